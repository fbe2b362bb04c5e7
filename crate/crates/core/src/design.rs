//! Cost-free collaboration designs: the PCA optimum, the diagonal-Ω shortcut
//! and the Gaussian random baseline.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{matrix_to_csv, DesignSpec, Omega, SignalClass};
use crate::numeric::projector_of;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Pca,
    DiagonalShortcut,
    Random,
    SparseL0,
    SparseL1,
    UserSupplied,
}

/// An `M×N` collaboration matrix and the spec that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CollaborationMatrix {
    weights: DMatrix<f64>,
    provenance: Provenance,
    spec: DesignSpec,
}

impl CollaborationMatrix {
    pub fn new(weights: DMatrix<f64>, provenance: Provenance, spec: DesignSpec) -> Result<Self> {
        if weights.shape() != (spec.m(), spec.n()) {
            return Err(Error::InvalidInput(format!(
                "W is {}x{} but spec expects {}x{}",
                weights.nrows(),
                weights.ncols(),
                spec.m(),
                spec.n()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("W entries must be finite".into()));
        }
        Ok(Self {
            weights,
            provenance,
            spec,
        })
    }

    pub fn user_supplied(weights: DMatrix<f64>) -> Result<Self> {
        let spec = DesignSpec::cost_free(weights.ncols(), weights.nrows())?;
        Self::new(weights, Provenance::UserSupplied, spec)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    /// `M` lines of `N` comma-separated values, no header.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.weights)
    }

    pub fn metadata(&self, seed: Option<u64>) -> DesignMetadata {
        DesignMetadata {
            provenance: self.provenance,
            spec: self.spec.clone(),
            seed,
        }
    }
}

impl AsRef<DMatrix<f64>> for CollaborationMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.weights
    }
}

/// Sidecar record written next to a collaboration-matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetadata {
    pub provenance: Provenance,
    pub spec: DesignSpec,
    pub seed: Option<u64>,
}

/// Rows of `W` are the `m` leading unit eigenvectors of Ω.
pub fn design_cost_free(omega: &Omega, m: usize) -> Result<CollaborationMatrix> {
    let spec = DesignSpec::cost_free(omega.dim(), m)?;
    CollaborationMatrix::new(omega.eigen().top_rows(m), Provenance::Pca, spec)
}

/// For diagonal Ω: pick the `m` coordinate axes with the largest diagonal
/// entries. Columns outside the support of diag(Ω) stay zero.
pub fn design_diagonal_shortcut(omega: &Omega, m: usize) -> Result<CollaborationMatrix> {
    let mat = omega.matrix();
    let n = mat.nrows();
    let diag_max = mat.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let off: f64 = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| mat[(i, j)].abs())
        .sum();
    if off > 1e-10 * diag_max.max(f64::MIN_POSITIVE) {
        let rel = if diag_max > 0.0 { off / diag_max } else { f64::INFINITY };
        return Err(Error::NotDiagonal(rel));
    }
    let spec = DesignSpec::cost_free(n, m)?;
    let mut support: Vec<usize> = (0..n).filter(|&k| mat[(k, k)] > 1e-10 * diag_max).collect();
    if m > support.len() {
        return Err(Error::InvalidInput(format!(
            "diagonal shortcut needs M <= rank(Ω) = {}, got M={m}",
            support.len()
        )));
    }
    support.sort_by(|&a, &b| mat[(b, b)].total_cmp(&mat[(a, a)]).then(a.cmp(&b)));
    let mut w = DMatrix::zeros(m, n);
    for (row, &axis) in support.iter().take(m).enumerate() {
        w[(row, axis)] = 1.0;
    }
    CollaborationMatrix::new(w, Provenance::DiagonalShortcut, spec)
}

/// i.i.d. standard-normal entries, drawn row by row.
pub fn design_random(spec: &DesignSpec, seed: u64) -> Result<CollaborationMatrix> {
    let mut rng = rng::seeded(seed, Stream::RandomDesign);
    let data: Vec<f64> = (0..spec.m() * spec.n())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let w = DMatrix::from_row_slice(spec.m(), spec.n(), &data);
    CollaborationMatrix::new(w, Provenance::Random, spec.clone())
}

/// `(M/N)·Σ‖sᵢ‖²`, the expected C-DC of a random design.
pub fn random_baseline_prediction(class: &SignalClass, m: usize) -> Result<f64> {
    let n = class.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    Ok(m as f64 / n as f64 * class.total_energy())
}

/// Per signal, whether `(1−δ)‖s‖² ≤ (N/M)‖P_w s‖² ≤ (1+δ)‖s‖²`.
pub fn check_stable_embedding(
    w: &DMatrix<f64>,
    class: &SignalClass,
    delta: f64,
) -> Result<Vec<bool>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0,1), got {delta}")));
    }
    let (m, n) = w.shape();
    let p = projector_of(w)?;
    let scale = n as f64 / m as f64;
    Ok(class
        .signals()
        .row_iter()
        .map(|s| {
            let energy = s.norm_squared();
            let embedded = scale * (s * &p.matrix).norm_squared();
            (1.0 - delta) * energy <= embedded && embedded <= (1.0 + delta) * energy
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cumulative_dc;
    use crate::model::{build_omega, generate_signal_class, Penalty};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> Omega {
        Omega::from_matrix(DMatrix::from_diagonal(&DVector::from_row_slice(values))).unwrap()
    }

    fn trace_objective(w: &DMatrix<f64>, omega: &Omega) -> f64 {
        (w * omega.matrix() * w.transpose()).trace()
    }

    #[test]
    fn cost_free_on_diagonal() {
        let omega = diag(&[3.0, 2.0, 1.0]);
        let w = design_cost_free(&omega, 2).unwrap();
        assert_eq!(w.provenance(), Provenance::Pca);
        assert_relative_eq!(trace_objective(w.weights(), &omega), 5.0, epsilon = 1e-12);
        assert!(w.weights().column(2).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cost_free_golden_ratio() {
        let class = SignalClass::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let w = design_cost_free(&build_omega(&class), 1).unwrap();
        let d = cumulative_dc(w.weights(), &class).unwrap();
        assert_relative_eq!(d.cdc, (3.0 + 5.0_f64.sqrt()) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn single_signal_design_is_normalized_signal() {
        let s = [0.3, -1.2, 2.0, 0.5];
        let class = SignalClass::from_rows(&[s.to_vec()]).unwrap();
        let w = design_cost_free(&build_omega(&class), 1).unwrap();
        let norm = class.total_energy().sqrt();
        // sign fixed by the first-coordinate-positive rule
        for (j, v) in s.iter().enumerate() {
            assert_relative_eq!(w.weights()[(0, j)], v / norm, epsilon = 1e-12);
        }
        let d = cumulative_dc(w.weights(), &class).unwrap();
        assert_relative_eq!(d.cdc, class.total_energy(), max_relative = 1e-12);
    }

    #[test]
    fn pca_rows_are_orthonormal() {
        let class = generate_signal_class(6, 12, 4).unwrap();
        let w = design_cost_free(&build_omega(&class), 4).unwrap();
        let gram = w.weights() * w.weights().transpose();
        assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn diagonal_shortcut_examples() {
        let omega = diag(&[5.0, 0.0, 0.0, 2.0]);
        let w1 = design_diagonal_shortcut(&omega, 1).unwrap();
        assert_eq!(w1.weights(), &DMatrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]));
        assert_relative_eq!(trace_objective(w1.weights(), &omega), 5.0);

        let w2 = design_diagonal_shortcut(&omega, 2).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(w2.weights(), &expected);
        assert_relative_eq!(trace_objective(w2.weights(), &omega), 7.0);

        // the W₂ block (columns outside the support) does not affect Tr(WΩWᵀ)
        let mut perturbed = expected.clone();
        perturbed[(0, 1)] = 0.7;
        perturbed[(1, 2)] = -1.3;
        perturbed[(0, 2)] = 2.5;
        assert_relative_eq!(trace_objective(&perturbed, &omega), 7.0, epsilon = 1e-12);

        let tied = diag(&[1.0, 1.0]);
        let w = design_diagonal_shortcut(&tied, 2).unwrap();
        assert_relative_eq!(trace_objective(w.weights(), &tied), 2.0);
        assert_eq!(w.weights(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_shortcut_matches_pca() {
        let omega = diag(&[0.5, 4.0, 0.0, 3.0, 1.5, 0.0]);
        for m in 1..=4 {
            let a = design_cost_free(&omega, m).unwrap();
            let b = design_diagonal_shortcut(&omega, m).unwrap();
            assert_relative_eq!(
                trace_objective(a.weights(), &omega),
                trace_objective(b.weights(), &omega),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn diagonal_shortcut_rejects_full_matrix() {
        let omega = Omega::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(design_diagonal_shortcut(&omega, 1), Err(Error::NotDiagonal(_))));
        assert!(design_diagonal_shortcut(&diag(&[1.0, 0.0]), 2).is_err());
    }

    #[test]
    fn random_design_is_deterministic() {
        let spec = DesignSpec::cost_free(30, 10).unwrap();
        let a = design_random(&spec, 1).unwrap();
        let b = design_random(&spec, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights().shape(), (10, 30));
        assert_ne!(a.weights(), design_random(&spec, 2).unwrap().weights());
    }

    #[test]
    fn square_random_design_keeps_everything() {
        let class = generate_signal_class(3, 5, 8).unwrap();
        let w = design_random(&DesignSpec::cost_free(5, 5).unwrap(), 3).unwrap();
        let p = projector_of(w.weights()).unwrap();
        assert!((p.matrix - DMatrix::identity(5, 5)).norm() < 1e-8);
        let d = cumulative_dc(w.weights(), &class).unwrap();
        assert_relative_eq!(d.cdc, class.total_energy(), max_relative = 1e-9);
        assert_relative_eq!(
            random_baseline_prediction(&class, 5).unwrap(),
            class.total_energy(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn baseline_prediction_scales_with_m() {
        let class = generate_signal_class(10, 30, 1).unwrap();
        assert_relative_eq!(
            random_baseline_prediction(&class, 10).unwrap(),
            class.total_energy() / 3.0,
            max_relative = 1e-15
        );
        assert!(random_baseline_prediction(&class, 31).is_err());
    }

    #[test]
    fn stable_embedding_examples() {
        let class = generate_signal_class(4, 5, 2).unwrap();
        assert!(check_stable_embedding(&DMatrix::identity(5, 5), &class, 0.1)
            .unwrap()
            .iter()
            .all(|&b| b));

        let orth = SignalClass::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert_eq!(check_stable_embedding(&w, &orth, 0.5).unwrap(), vec![false]);
        assert!(check_stable_embedding(&w, &orth, 1.0).is_err());
    }

    #[test]
    fn stable_embedding_rate_matches_beta_law() {
        use statrs::distribution::{Beta, ContinuousCDF};
        // (N/M)‖P_w s‖²/‖s‖² ~ 3·Beta(5, 10) for a Gaussian 10x30 W
        let beta = Beta::new(5.0, 10.0).unwrap();
        let oracle = beta.cdf(0.5) - beta.cdf(1.0 / 6.0);
        let spec = DesignSpec::uniform(30, 10, 0.0, Penalty::None).unwrap();
        let mut hits = 0usize;
        let mut total = 0usize;
        for seed in 0..100 {
            let class = generate_signal_class(10, 30, seed).unwrap();
            let w = design_random(&spec, seed).unwrap();
            let flags = check_stable_embedding(w.weights(), &class, 0.5).unwrap();
            hits += flags.iter().filter(|&&b| b).count();
            total += flags.len();
        }
        let rate = hits as f64 / total as f64;
        let sd = (oracle * (1.0 - oracle) / total as f64).sqrt();
        assert!((rate - oracle).abs() < 4.0 * sd, "rate {rate} vs oracle {oracle}");
    }
}
