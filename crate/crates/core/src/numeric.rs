//! Dense linear-algebra kernels: symmetric eigendecomposition with
//! deterministic ordering, the Stiefel polar factor, row Gram–Schmidt and the
//! oblique projector `P_w = Wᵀ(WWᵀ)⁻¹W`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues closer than this (relative to `|λ|max`) are treated as tied.
pub const TIE_TOL: f64 = 1e-10;
/// Smallest accepted `σmin/σmax` for [`polar_factor`].
pub const POLAR_RANK_TOL: f64 = 1e-12;
/// Smallest accepted `λmin/λmax` of `WWᵀ` for [`projector_of`].
pub const GRAM_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl EigenPairs {
    /// The leading `m` eigenvectors as the rows of an `m×N` matrix.
    pub fn top_rows(&self, m: usize) -> DMatrix<f64> {
        self.vectors.columns(0, m).transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(self.values.clone()));
        &self.vectors * lambda * self.vectors.transpose()
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Full spectral decomposition of a symmetric matrix.
///
/// Output ordering is deterministic: values descend, each eigenvector has its
/// first non-negligible coordinate positive, and runs of tied eigenvalues are
/// ordered by the index of each vector's largest-magnitude coordinate.
pub fn sym_eig(matrix: &DMatrix<f64>) -> Result<EigenPairs> {
    if !matrix.is_square() {
        return Err(Error::InvalidInput(format!(
            "sym_eig needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let scale = max_abs(matrix);
    let asym = max_abs(&(matrix - matrix.transpose()));
    if scale > 0.0 && asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym / scale));
    }
    let n = matrix.nrows();
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).into_owned();
            v.normalize_mut();
            if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
                if first < 0.0 {
                    v.neg_mut();
                }
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let lead = pairs.iter().fold(0.0_f64, |acc, p| acc.max(p.0.abs()));
    let tie = TIE_TOL * lead;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by_key(|(_, v)| v.iamax());
        }
        start = end;
    }

    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(k, v);
    }
    Ok(EigenPairs { values, vectors })
}

/// `U = G(GᵀG)^{-1/2}`, the maximizer of `Tr(UᵀG)` over matrices with
/// orthonormal columns. Computed as `U_G V_Gᵀ` from the thin SVD of `G`.
pub fn polar_factor(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() < g.ncols() {
        return Err(Error::RankDeficient(0.0));
    }
    let svd = SVD::new(g.clone(), true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < POLAR_RANK_TOL * smax {
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        return Err(Error::RankDeficient(ratio));
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    Ok(u * v_t)
}

/// Polar factor that tolerates rank deficiency. Any maximizer of
/// `Tr(UᵀG)` is acceptable to the power iteration, so zero singular
/// directions are filled with an arbitrary orthonormal completion.
pub(crate) fn polar_factor_lenient(g: &DMatrix<f64>) -> DMatrix<f64> {
    let m = g.ncols();
    let svd = SVD::new(g.clone(), true, true);
    let u = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    let gram_err = (u.transpose() * &u - DMatrix::identity(m, m)).norm();
    if gram_err <= 1e-12 {
        return u;
    }
    let q = u.qr().q();
    q.columns(0, m).into_owned()
}

/// Haar-distributed `rows×cols` matrix with orthonormal columns
/// (`cols ≤ rows`): QR of a Gaussian matrix with the signs of `diag(R)`
/// folded into `Q`.
pub fn random_stiefel(rows: usize, cols: usize, seed: u64) -> Result<DMatrix<f64>> {
    if cols == 0 || cols > rows {
        return Err(Error::InvalidInput(format!(
            "need 1 <= cols <= rows, got {rows}x{cols}"
        )));
    }
    let mut rng = rng::seeded(seed, Stream::Stiefel);
    let g = DMatrix::<f64>::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    Ok(q)
}

/// The orthogonal projector onto the row space of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub matrix: DMatrix<f64>,
    /// Number of rows that survived (equals `trace(P)`).
    pub rank: usize,
    /// Rows of `W` that were entirely zero and left out.
    pub dropped_rows: Vec<usize>,
}

impl Projector {
    pub fn apply(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.matrix * s
    }
}

/// Indices of rows of `w` that are not identically zero.
pub(crate) fn live_rows(w: &DMatrix<f64>) -> Vec<usize> {
    (0..w.nrows())
        .filter(|&i| w.row(i).iter().any(|&v| v != 0.0))
        .collect()
}

fn select_rows(w: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), w.ncols(), |r, c| w[(rows[r], c)])
}

/// `P_w = Wᵀ(WWᵀ)⁻¹W`. Identically-zero rows are dropped first and listed in
/// [`Projector::dropped_rows`]; the remaining rows must be linearly
/// independent.
pub fn projector_of(w: &DMatrix<f64>) -> Result<Projector> {
    let n = w.ncols();
    let live = live_rows(w);
    let dropped_rows: Vec<usize> = (0..w.nrows()).filter(|i| !live.contains(i)).collect();
    if live.is_empty() {
        return Ok(Projector {
            matrix: DMatrix::zeros(n, n),
            rank: 0,
            dropped_rows,
        });
    }
    let wr = select_rows(w, &live);
    let gram = &wr * wr.transpose();
    let spectrum = SymmetricEigen::new(gram.clone()).eigenvalues;
    let lmax = spectrum.max();
    let lmin = spectrum.min();
    if !(lmax > 0.0) || lmin < GRAM_RANK_TOL * lmax {
        return Err(Error::RankDeficient((lmin / lmax).max(0.0)));
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::RankDeficient(lmin / lmax))?;
    let solved = chol.solve(&wr);
    let p = wr.transpose() * solved;
    let matrix = (&p + p.transpose()) * 0.5;
    Ok(Projector {
        matrix,
        rank: live.len(),
        dropped_rows,
    })
}

/// Orthogonal projector onto the row space of `W`, whatever its rank.
///
/// Sparse designs at large γ can end up with repeated or dependent rows
/// (two rows truncated to the same coordinate axis). The fusion center still
/// sees exactly the span of the rows, so directions of the Gram matrix below
/// `GRAM_RANK_TOL · λmax` are discarded instead of failing. `rank` is the
/// dimension of the span.
pub fn span_projector(w: &DMatrix<f64>) -> Projector {
    let n = w.ncols();
    let live = live_rows(w);
    let dropped_rows: Vec<usize> = (0..w.nrows()).filter(|i| !live.contains(i)).collect();
    if live.is_empty() {
        return Projector {
            matrix: DMatrix::zeros(n, n),
            rank: 0,
            dropped_rows,
        };
    }
    let wr = select_rows(w, &live);
    let eig = SymmetricEigen::new(&wr * wr.transpose());
    let lmax = eig.eigenvalues.max();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > GRAM_RANK_TOL * lmax {
            // Wᵀv/√λ is a unit right singular vector
            let u = wr.transpose() * eig.eigenvectors.column(k) / lambda.sqrt();
            matrix += &u * u.transpose();
            rank += 1;
        }
    }
    Projector {
        matrix,
        rank,
        dropped_rows,
    }
}

/// Gram–Schmidt on the rows of `W`: returns `(W_ort, R)` with
/// `W = R · W_ort`, `W_ort W_ortᵀ = I` and `R` lower triangular (so that
/// `Wᵀ = W_ortᵀ Rᵀ` is a thin QR factorization with upper-triangular `Rᵀ`).
pub fn gram_schmidt_rows(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, n) = w.shape();
    if m > n {
        return Err(Error::RankDeficient(0.0));
    }
    let mut q = DMatrix::<f64>::zeros(m, n);
    let mut r = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let original = w.row(k).transpose();
        let norm0 = original.norm();
        let mut v = original.clone();
        // two passes of modified Gram-Schmidt keep orthogonality at roundoff level
        for _ in 0..2 {
            for j in 0..k {
                let qj = q.row(j).transpose();
                let c = qj.dot(&v);
                r[(k, j)] += c;
                v.axpy(-c, &qj, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm0 > 0.0) || norm <= GRAM_RANK_TOL * norm0 {
            return Err(Error::RankDeficient(if norm0 > 0.0 { norm / norm0 } else { 0.0 }));
        }
        r[(k, k)] = norm;
        q.set_row(k, &(v / norm).transpose());
    }
    Ok((q, r))
}
