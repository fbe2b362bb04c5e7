//! Detection-performance and cost metrics for a collaboration matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DesignSpec, SignalClass};
use crate::numeric::{projector_of, span_projector, Projector};

/// Relative threshold (times `max|W|`) below which an entry counts as a
/// deactivated link.
pub const DEFAULT_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Deflection {
    pub cdc: f64,
    pub per_signal: Vec<f64>,
}

/// Cumulative deflection coefficient: `Σ sᵢᵀ P_w sᵢ = Σ ‖P_w sᵢ‖²`.
pub fn cumulative_dc(w: &DMatrix<f64>, class: &SignalClass) -> Result<Deflection> {
    check_dims(w, class)?;
    Ok(deflection_with(&projector_of(w)?, class))
}

/// [`cumulative_dc`] for a `W` whose rows may be linearly dependent; the
/// projector is onto their span.
pub fn cumulative_dc_span(w: &DMatrix<f64>, class: &SignalClass) -> Result<Deflection> {
    check_dims(w, class)?;
    Ok(deflection_with(&span_projector(w), class))
}

fn deflection_with(p: &Projector, class: &SignalClass) -> Deflection {
    // ‖P sᵢ‖² for each row sᵢ of S is the row-wise squared norm of S·P.
    let projected = class.signals() * &p.matrix;
    let per_signal: Vec<f64> = projected.row_iter().map(|r| r.norm_squared()).collect();
    let cdc = per_signal.iter().sum();
    Deflection { cdc, per_signal }
}

fn check_dims(w: &DMatrix<f64>, class: &SignalClass) -> Result<()> {
    if w.ncols() != class.dim() {
        return Err(Error::InvalidInput(format!(
            "W has {} columns but signals have dimension {}",
            w.ncols(),
            class.dim()
        )));
    }
    Ok(())
}

/// `C_u = C-DC / Σ‖sᵢ‖²`, in `[0, 1]`.
pub fn cost_of_universality(w: &DMatrix<f64>, class: &SignalClass) -> Result<f64> {
    let total = class.total_energy();
    if total == 0.0 {
        return Err(Error::ZeroSignalClass);
    }
    Ok(cumulative_dc(w, class)?.cdc / total)
}

/// `C_c = Σ|γᵢ|`.
pub fn cost_of_collaboration(spec: &DesignSpec) -> f64 {
    spec.gammas().iter().map(|g| g.abs()).sum()
}

/// Fraction of entries with `|w| > zero_tol`.
pub fn active_link_ratio(w: &DMatrix<f64>, zero_tol: f64) -> f64 {
    let total = w.len();
    if total == 0 {
        return 0.0;
    }
    let active = w.iter().filter(|v| v.abs() > zero_tol).count();
    active as f64 / total as f64
}

pub fn default_zero_tol(w: &DMatrix<f64>) -> f64 {
    DEFAULT_ZERO_TOL * w.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `1 − active_link_ratio` at the default tolerance.
pub fn deactivation_ratio(w: &DMatrix<f64>) -> f64 {
    1.0 - active_link_ratio(w, default_zero_tol(w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cdc: f64,
    pub per_signal_dc: Vec<f64>,
    pub cdc_upper_bound: f64,
    pub cost_universality: f64,
    pub cost_collaboration: f64,
    pub active_link_ratio: f64,
    pub normalized_cdc: f64,
}

impl MetricsReport {
    /// `cdc_opt` is the cost-free optimum used for `normalized_cdc`. C-DC is
    /// taken over the row span of `w`, so sparse designs with dependent rows
    /// are accepted.
    pub fn evaluate(
        w: &DMatrix<f64>,
        class: &SignalClass,
        spec: &DesignSpec,
        cdc_opt: f64,
    ) -> Result<Self> {
        let deflection = cumulative_dc_span(w, class)?;
        let bound = class.total_energy();
        if bound == 0.0 {
            return Err(Error::ZeroSignalClass);
        }
        let normalized_cdc = if cdc_opt > 0.0 {
            deflection.cdc / cdc_opt
        } else {
            0.0
        };
        Ok(Self {
            cdc: deflection.cdc,
            cost_universality: deflection.cdc / bound,
            per_signal_dc: deflection.per_signal,
            cdc_upper_bound: bound,
            cost_collaboration: cost_of_collaboration(spec),
            active_link_ratio: active_link_ratio(w, default_zero_tol(w)),
            normalized_cdc,
        })
    }

    /// Flat key/value pairs; per-signal values are expanded as
    /// `per_signal_dc_<i>`.
    pub fn to_record(&self) -> Vec<(String, String)> {
        let mut rec = vec![
            ("cdc".to_string(), self.cdc.to_string()),
            ("cdc_upper_bound".to_string(), self.cdc_upper_bound.to_string()),
            ("cost_universality".to_string(), self.cost_universality.to_string()),
            ("cost_collaboration".to_string(), self.cost_collaboration.to_string()),
            ("active_link_ratio".to_string(), self.active_link_ratio.to_string()),
            ("normalized_cdc".to_string(), self.normalized_cdc.to_string()),
        ];
        for (i, v) in self.per_signal_dc.iter().enumerate() {
            rec.push((format!("per_signal_dc_{i}"), v.to_string()));
        }
        rec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_omega, generate_signal_class, Penalty};
    use approx::assert_relative_eq;

    #[test]
    fn identity_collects_all_energy() {
        let class = generate_signal_class(4, 6, 3).unwrap();
        let d = cumulative_dc(&DMatrix::identity(6, 6), &class).unwrap();
        assert_relative_eq!(d.cdc, class.total_energy(), max_relative = 1e-12);
    }

    #[test]
    fn axis_projector() {
        let class = SignalClass::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let d = cumulative_dc(&w, &class).unwrap();
        assert_eq!(d.per_signal, vec![1.0, 0.0]);
        assert_eq!(d.cdc, 1.0);
    }

    #[test]
    fn top_eigenvector_reaches_golden_ratio_value() {
        let class = SignalClass::from_rows(&[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let omega = build_omega(&class);
        let w = omega.eigen().top_rows(1);
        let d = cumulative_dc(&w, &class).unwrap();
        assert_relative_eq!(d.cdc, (3.0 + 5.0_f64.sqrt()) / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn universality_examples() {
        let s = vec![3.0, -1.0, 2.0];
        let class = SignalClass::from_rows(std::slice::from_ref(&s)).unwrap();
        let norm = (14.0_f64).sqrt();
        let w = DMatrix::from_row_slice(1, 3, &[3.0 / norm, -1.0 / norm, 2.0 / norm]);
        assert_relative_eq!(cost_of_universality(&w, &class).unwrap(), 1.0, epsilon = 1e-12);

        let zero = SignalClass::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(cost_of_universality(&w, &zero), Err(Error::ZeroSignalClass));
    }

    #[test]
    fn universality_matches_eigenvalue_share() {
        let class = generate_signal_class(20, 30, 5).unwrap();
        let omega = build_omega(&class);
        let w = omega.eigen().top_rows(10);
        let cu = cost_of_universality(&w, &class).unwrap();
        let oracle: f64 = omega.eigen().values[..10].iter().sum::<f64>() / omega.matrix().trace();
        assert!(cu < 1.0);
        assert_relative_eq!(cu, oracle, max_relative = 1e-9);
    }

    #[test]
    fn collaboration_cost_sums_penalties() {
        let spec = DesignSpec::uniform(30, 10, 0.0, Penalty::L1).unwrap();
        assert_eq!(cost_of_collaboration(&spec), 0.0);
        let spec = DesignSpec::uniform(30, 10, 0.1, Penalty::L1).unwrap();
        assert_relative_eq!(cost_of_collaboration(&spec), 1.0, epsilon = 1e-12);
        let spec = DesignSpec::new(5, 3, vec![0.2, 0.3, 0.5], Penalty::L0, vec![1.0; 3]).unwrap();
        assert_relative_eq!(cost_of_collaboration(&spec), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn link_ratio_examples() {
        assert_eq!(active_link_ratio(&DMatrix::zeros(3, 4), 0.0), 0.0);
        assert_eq!(deactivation_ratio(&DMatrix::zeros(3, 4)), 1.0);
        let dense = DMatrix::from_fn(3, 4, |i, j| 1.0 + (i * 4 + j) as f64);
        assert_eq!(active_link_ratio(&dense, 0.0), 1.0);
        let w = DMatrix::from_fn(10, 30, |i, j| if j < 18 { 0.5 + i as f64 } else { 0.0 });
        assert_relative_eq!(active_link_ratio(&w, 0.0), 0.6, epsilon = 1e-15);
        assert_relative_eq!(deactivation_ratio(&w), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn report_is_consistent() {
        let class = generate_signal_class(5, 8, 9).unwrap();
        let omega = build_omega(&class);
        let w = omega.eigen().top_rows(3);
        let spec = DesignSpec::uniform(8, 3, 0.2, Penalty::L0).unwrap();
        let r = MetricsReport::evaluate(&w, &class, &spec, omega.top_eigen_sum(3)).unwrap();
        assert_relative_eq!(r.cdc, r.per_signal_dc.iter().sum::<f64>(), max_relative = 1e-12);
        assert!(r.cdc <= r.cdc_upper_bound);
        assert_relative_eq!(r.normalized_cdc, 1.0, epsilon = 1e-9);
        assert_relative_eq!(r.cost_collaboration, 0.6, epsilon = 1e-12);
        let rec = r.to_record();
        assert_eq!(rec.len(), 6 + 5);
        assert_eq!(rec[0].0, "cdc");
    }
}
