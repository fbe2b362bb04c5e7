//! Cost-efficient designs through penalized sparse PCA.
//!
//! Both penalties are handled by the same block power iteration on the
//! Stiefel manifold `{U ∈ ℝ^{I×M} : UᵀU = I}`:
//!
//! ```text
//! ℓ1:  F(U) = Σᵢ Σⱼ [yᵢ|aⱼᵀuᵢ| − γᵢ]₊²
//! ℓ0:  F(U) = Σᵢ Σⱼ [(yᵢ aⱼᵀuᵢ)² − γᵢ]₊
//! ```
//!
//! `F` is convex, so `U ← polar(∇F(U))` never decreases it. Once `U` has
//! converged, each row `wᵢ` of the sparse collaboration matrix is the
//! thresholded vector `Aᵀuᵢ` normalized to unit length.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{CollaborationMatrix, Provenance};
use crate::error::{Error, Result};
use crate::metrics::deactivation_ratio;
use crate::model::{DesignSpec, Penalty, SignalClass};
use crate::numeric::{polar_factor_lenient, sym_eig};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Width below which the γ bisection bracket is considered collapsed.
pub const GAMMA_BRACKET_TOL: f64 = 1e-10;
/// Number of γ values scanned when bisection fails to hit the target.
pub const FALLBACK_GRID: usize = 200;
/// Warm-started steps across `[0, γmax]` in the last-resort continuation scan.
pub const CONTINUATION_STEPS: usize = 1000;

/// The factor `A` with `AᵀA = Ω` fed to the solver.
///
/// `A` is the signal matrix itself. When the class has fewer signals than
/// `m`, zero rows are appended so that an `m`-column Stiefel point exists;
/// this leaves `AᵀA` unchanged.
pub fn data_matrix(class: &SignalClass, m: usize) -> DMatrix<f64> {
    let s = class.signals();
    if s.nrows() >= m {
        return s.clone();
    }
    let mut a = DMatrix::zeros(m, s.ncols());
    a.rows_mut(0, s.nrows()).copy_from(s);
    a
}

/// `C = AᵀU`, so `C[(j, i)] = aⱼᵀuᵢ`.
fn correlations(u: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * u
}

fn check_shapes(u: &DMatrix<f64>, a: &DMatrix<f64>, gammas: &[f64], y_diag: &[f64]) {
    assert_eq!(u.nrows(), a.nrows(), "U and A must share the row dimension");
    assert_eq!(u.ncols(), gammas.len(), "one penalty per column of U");
    assert_eq!(u.ncols(), y_diag.len(), "one Y entry per column of U");
}

pub fn objective_l1(u: &DMatrix<f64>, a: &DMatrix<f64>, gammas: &[f64], y_diag: &[f64]) -> f64 {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let mut total = 0.0;
    for i in 0..u.ncols() {
        for j in 0..a.ncols() {
            let t = (y_diag[i] * c[(j, i)].abs() - gammas[i]).max(0.0);
            total += t * t;
        }
    }
    total
}

pub fn objective_l0(u: &DMatrix<f64>, a: &DMatrix<f64>, gammas: &[f64], y_diag: &[f64]) -> f64 {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let mut total = 0.0;
    for i in 0..u.ncols() {
        for j in 0..a.ncols() {
            let v = y_diag[i] * c[(j, i)];
            total += (v * v - gammas[i]).max(0.0);
        }
    }
    total
}

/// Gradient of [`objective_l1`]; the subgradient at `aⱼᵀuᵢ = 0` is taken as 0.
pub fn gradient_l1(
    u: &DMatrix<f64>,
    a: &DMatrix<f64>,
    gammas: &[f64],
    y_diag: &[f64],
) -> DMatrix<f64> {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let weights = DMatrix::from_fn(a.ncols(), u.ncols(), |j, i| {
        let x = c[(j, i)];
        let t = (y_diag[i] * x.abs() - gammas[i]).max(0.0);
        let sign = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        2.0 * t * y_diag[i] * sign
    });
    a * weights
}

pub fn gradient_l0(
    u: &DMatrix<f64>,
    a: &DMatrix<f64>,
    gammas: &[f64],
    y_diag: &[f64],
) -> DMatrix<f64> {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let weights = DMatrix::from_fn(a.ncols(), u.ncols(), |j, i| {
        let v = y_diag[i] * c[(j, i)];
        if v * v > gammas[i] {
            2.0 * y_diag[i] * v
        } else {
            0.0
        }
    });
    a * weights
}

/// Penalty weights actually used by the solver; `Penalty::None` is the
/// unpenalized ℓ0 form.
fn effective_gammas(spec: &DesignSpec) -> Vec<f64> {
    match spec.penalty() {
        Penalty::None => vec![0.0; spec.m()],
        _ => spec.gammas().to_vec(),
    }
}

fn objective_for(spec: &DesignSpec, u: &DMatrix<f64>, a: &DMatrix<f64>, g: &[f64]) -> f64 {
    match spec.penalty() {
        Penalty::L1 => objective_l1(u, a, g, spec.y_diag()),
        Penalty::L0 | Penalty::None => objective_l0(u, a, g, spec.y_diag()),
    }
}

fn gradient_for(spec: &DesignSpec, u: &DMatrix<f64>, a: &DMatrix<f64>, g: &[f64]) -> DMatrix<f64> {
    match spec.penalty() {
        Penalty::L1 => gradient_l1(u, a, g, spec.y_diag()),
        Penalty::L0 | Penalty::None => gradient_l0(u, a, g, spec.y_diag()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// `polar(A·V₀)` with `V₀` the leading `M` eigenvectors of `AᵀA`.
    PcaWarmStart,
    Given(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub init: InitStrategy,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            init: InitStrategy::PcaWarmStart,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: DMatrix<f64>,
    /// Objective after initialization and after every accepted iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The gradient vanished: every term is truncated by γ.
    pub degenerate: bool,
    /// Largest `‖UᵀU − I‖_F` seen over all iterates.
    pub max_feasibility_error: f64,
}

impl SolverState {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial value")
    }
}

fn stiefel_error(u: &DMatrix<f64>) -> f64 {
    let m = u.ncols();
    (u.transpose() * u - DMatrix::identity(m, m)).norm()
}

fn warm_start(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let gram = a.transpose() * a;
    let eig = sym_eig(&gram).expect("AᵀA is symmetric");
    let v0 = eig.vectors.columns(0, m).into_owned();
    polar_factor_lenient(&(a * v0))
}

/// Block generalized power iteration: `U ← polar(∇F(U))` until the relative
/// objective increase drops below `tol` or `max_iter` is reached.
///
/// An iterate that would lower the objective (only possible through
/// roundoff at a fixed point) is rejected and the run stops as converged.
pub fn solve_gpower(
    a: &DMatrix<f64>,
    spec: &DesignSpec,
    init: &InitStrategy,
    tol: f64,
    max_iter: usize,
) -> Result<SolverState> {
    let (rows, n) = a.shape();
    let m = spec.m();
    if n != spec.n() {
        return Err(Error::InvalidInput(format!(
            "A has {n} columns but spec has N={}",
            spec.n()
        )));
    }
    if m > rows || rows > n {
        return Err(Error::InvalidInput(format!(
            "sparse design needs M <= I <= N, got M={m}, I={rows}, N={n}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be > 0, got {tol}")));
    }
    let gammas = effective_gammas(spec);
    let mut u = match init {
        InitStrategy::PcaWarmStart => warm_start(a, m),
        InitStrategy::Given(u0) => {
            if u0.shape() != (rows, m) {
                return Err(Error::InvalidInput(format!(
                    "initial U must be {rows}x{m}, got {}x{}",
                    u0.nrows(),
                    u0.ncols()
                )));
            }
            polar_factor_lenient(u0)
        }
    };
    let mut state = SolverState {
        objective_trace: vec![objective_for(spec, &u, a, &gammas)],
        iterations: 0,
        converged: false,
        degenerate: false,
        max_feasibility_error: stiefel_error(&u),
        u: DMatrix::zeros(0, 0),
    };
    let mut current = state.objective_trace[0];
    while state.iterations < max_iter {
        let grad = gradient_for(spec, &u, a, &gammas);
        if grad.iter().all(|&v| v == 0.0) {
            state.degenerate = true;
            break;
        }
        let next = polar_factor_lenient(&grad);
        let value = objective_for(spec, &next, a, &gammas);
        state.iterations += 1;
        if value < current {
            state.converged = true;
            break;
        }
        state.max_feasibility_error = state.max_feasibility_error.max(stiefel_error(&next));
        state.objective_trace.push(value);
        let gain = value - current;
        u = next;
        let stalled = if current.abs() > 0.0 {
            gain / current.abs() < tol
        } else {
            gain <= 0.0
        };
        current = value;
        if stalled {
            state.converged = true;
            break;
        }
    }
    state.u = u;
    Ok(state)
}

/// Sparse rows recovered from a solved `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredRows {
    /// `M×N`, each live row of unit norm.
    pub weights: DMatrix<f64>,
    pub dead_rows: Vec<usize>,
}

fn normalize_rows(mut z: DMatrix<f64>) -> RecoveredRows {
    let mut dead_rows = Vec::new();
    for i in 0..z.nrows() {
        let norm = z.row(i).norm();
        if norm > 0.0 {
            z.row_mut(i).unscale_mut(norm);
        } else {
            dead_rows.push(i);
        }
    }
    RecoveredRows {
        weights: z,
        dead_rows,
    }
}

fn rows_l1(u: &DMatrix<f64>, a: &DMatrix<f64>, gammas: &[f64], y_diag: &[f64]) -> RecoveredRows {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let z = DMatrix::from_fn(u.ncols(), a.ncols(), |i, j| {
        let x = c[(j, i)];
        let t = (y_diag[i] * x.abs() - gammas[i]).max(0.0);
        if t > 0.0 {
            x.signum() * t
        } else {
            0.0
        }
    });
    normalize_rows(z)
}

fn rows_l0(u: &DMatrix<f64>, a: &DMatrix<f64>, gammas: &[f64], y_diag: &[f64]) -> RecoveredRows {
    check_shapes(u, a, gammas, y_diag);
    let c = correlations(u, a);
    let z = DMatrix::from_fn(u.ncols(), a.ncols(), |i, j| {
        let x = c[(j, i)];
        let v = y_diag[i] * x;
        if v * v > gammas[i] {
            x
        } else {
            0.0
        }
    });
    normalize_rows(z)
}

fn require_live(rows: RecoveredRows) -> Result<RecoveredRows> {
    if rows.dead_rows.len() == rows.weights.nrows() {
        Err(Error::AllRowsDead)
    } else {
        Ok(rows)
    }
}

/// `wᵢ ∝ sign(aⱼᵀuᵢ)·[yᵢ|aⱼᵀuᵢ| − γᵢ]₊`, the maximizer of
/// `yᵢuᵢᵀAw − γᵢ‖w‖₁` over unit `w`.
pub fn recover_w_l1(
    u: &DMatrix<f64>,
    a: &DMatrix<f64>,
    gammas: &[f64],
    y_diag: &[f64],
) -> Result<RecoveredRows> {
    require_live(rows_l1(u, a, gammas, y_diag))
}

/// `wᵢ ∝ (aⱼᵀuᵢ)·𝟙[(yᵢaⱼᵀuᵢ)² > γᵢ]`, the maximizer of
/// `(yᵢuᵢᵀAw)² − γᵢ‖w‖₀` over unit `w`.
pub fn recover_w_l0(
    u: &DMatrix<f64>,
    a: &DMatrix<f64>,
    gammas: &[f64],
    y_diag: &[f64],
) -> Result<RecoveredRows> {
    require_live(rows_l0(u, a, gammas, y_diag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    pub w: CollaborationMatrix,
    pub state: SolverState,
    pub objective: f64,
    pub dead_rows: Vec<usize>,
}

impl SparseSolution {
    pub fn deactivation(&self) -> f64 {
        deactivation_ratio(self.w.weights())
    }

    pub fn all_rows_dead(&self) -> bool {
        self.dead_rows.len() == self.w.spec().m()
    }

    pub fn metadata(&self) -> SparseMetadata {
        SparseMetadata {
            penalty: self.w.spec().penalty(),
            gammas: self.w.spec().gammas().to_vec(),
            iterations: self.state.iterations,
            converged: self.state.converged,
            objective: self.objective,
            deactivation: self.deactivation(),
            dead_rows: self.dead_rows.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMetadata {
    pub penalty: Penalty,
    pub gammas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub deactivation: f64,
    pub dead_rows: Vec<usize>,
}

/// Like [`solve_sparse`] but returns the all-zero design instead of
/// [`Error::AllRowsDead`] when γ truncates every row.
pub fn solve_sparse_allow_dead(
    a: &DMatrix<f64>,
    spec: &DesignSpec,
    opts: &SolverOptions,
) -> Result<SparseSolution> {
    let state = solve_gpower(a, spec, &opts.init, opts.tol, opts.max_iter)?;
    let gammas = effective_gammas(spec);
    let (rows, provenance) = match spec.penalty() {
        Penalty::L1 => (rows_l1(&state.u, a, &gammas, spec.y_diag()), Provenance::SparseL1),
        Penalty::L0 => (rows_l0(&state.u, a, &gammas, spec.y_diag()), Provenance::SparseL0),
        Penalty::None => (rows_l0(&state.u, a, &gammas, spec.y_diag()), Provenance::Pca),
    };
    let w = CollaborationMatrix::new(rows.weights, provenance, spec.clone())?;
    Ok(SparseSolution {
        w,
        objective: state.objective(),
        state,
        dead_rows: rows.dead_rows,
    })
}

/// Runs [`solve_gpower`] and recovers the sparse collaboration matrix.
pub fn solve_sparse(a: &DMatrix<f64>, spec: &DesignSpec, opts: &SolverOptions) -> Result<SparseSolution> {
    let sol = solve_sparse_allow_dead(a, spec, opts)?;
    if sol.all_rows_dead() {
        return Err(Error::AllRowsDead);
    }
    Ok(sol)
}

/// Smallest uniform γ that zeroes every entry regardless of `U`.
pub fn gamma_max(a: &DMatrix<f64>, y_diag: &[f64], penalty: Penalty) -> f64 {
    let col_max = a.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let y_max = y_diag.iter().copied().fold(0.0_f64, f64::max);
    let reach = y_max * col_max;
    match penalty {
        Penalty::L1 => reach,
        Penalty::L0 => reach * reach,
        Penalty::None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub gamma: f64,
    pub achieved_deactivation: f64,
    pub solution: SparseSolution,
    /// Number of sparse solves spent.
    pub evaluations: usize,
    /// True when the grid fallback was needed.
    pub used_grid: bool,
}

/// Finds a uniform γ whose design deactivates `target` of the `M·N` links.
///
/// Bisection on γ ∈ [0, γmax] stops once the achieved ratio is within one
/// link of the target or the bracket is narrower than
/// [`GAMMA_BRACKET_TOL`]. If that misses (the response need not be monotone
/// since `U` is re-optimized for each γ) a [`FALLBACK_GRID`]-point scan
/// is added, and after that a warm-started continuation path from γ = 0.
/// The closest evaluation wins.
pub fn calibrate_gamma(
    a: &DMatrix<f64>,
    spec: &DesignSpec,
    target: f64,
    penalty: Penalty,
    opts: &SolverOptions,
) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::InvalidInput(format!(
            "target deactivation must lie in [0,1], got {target}"
        )));
    }
    if penalty == Penalty::None {
        return Err(Error::InvalidInput("calibration needs an l0 or l1 penalty".into()));
    }
    let base = spec.with_penalty(penalty);
    let links = (spec.m() * spec.n()) as f64;
    let resolution = 1.0 / links + 1e-12;
    let gmax = gamma_max(a, spec.y_diag(), penalty);

    let mut evaluations = 0usize;
    let mut eval = |gamma: f64| -> Result<(f64, SparseSolution)> {
        evaluations += 1;
        let sol = solve_sparse_allow_dead(a, &base.with_uniform_gamma(gamma)?, opts)?;
        Ok((sol.deactivation(), sol))
    };

    let (d_lo, sol_lo) = eval(0.0)?;
    if target < d_lo - resolution {
        return Err(Error::Unachievable {
            target,
            low: d_lo,
            high: 1.0,
        });
    }
    let mut best = (0.0, d_lo, sol_lo);
    let close = |d: f64| (d - target).abs() <= resolution;
    let mut done = close(d_lo);

    if !done {
        let (d_hi, sol_hi) = eval(gmax)?;
        if (d_hi - target).abs() < (best.1 - target).abs() {
            best = (gmax, d_hi, sol_hi);
        }
        done = close(d_hi);
    }

    let (mut lo, mut hi) = (0.0, gmax);
    while !done && hi - lo >= GAMMA_BRACKET_TOL {
        let mid = 0.5 * (lo + hi);
        let (d, sol) = eval(mid)?;
        if (d - target).abs() < (best.1 - target).abs() {
            best = (mid, d, sol);
        }
        if close(d) {
            done = true;
        } else if d < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut used_grid = false;
    if !done {
        used_grid = true;
        for k in 0..FALLBACK_GRID {
            let gamma = gmax * k as f64 / (FALLBACK_GRID - 1) as f64;
            let (d, sol) = eval(gamma)?;
            if (d - target).abs() < (best.1 - target).abs() {
                best = (gamma, d, sol);
            }
        }
        done = close(best.1);
    }

    // Cold starts can jump between basins and skip the target by several
    // links. Following one basin along γ, each solve warm-started from the
    // previous U, sheds links a few at a time. A step that still jumps past
    // the target is bisected from its warm start.
    if !done {
        let mut warm = |gamma: f64, u: Option<&DMatrix<f64>>| -> Result<SparseSolution> {
            evaluations += 1;
            let init = u.map_or(InitStrategy::PcaWarmStart, |u| InitStrategy::Given(u.clone()));
            let path_opts = SolverOptions {
                init,
                ..opts.clone()
            };
            solve_sparse_allow_dead(a, &base.with_uniform_gamma(gamma)?, &path_opts)
        };
        let mut prev: Option<(f64, DMatrix<f64>)> = None;
        for k in 0..CONTINUATION_STEPS {
            let gamma = gmax * k as f64 / (CONTINUATION_STEPS - 1) as f64;
            let sol = warm(gamma, prev.as_ref().map(|p| &p.1))?;
            let d = sol.deactivation();
            let u = sol.state.u.clone();
            if (d - target).abs() < (best.1 - target).abs() {
                best = (gamma, d, sol);
            }
            if close(best.1) {
                break;
            }
            if d > target {
                if let Some((g_lo, u_lo)) = prev {
                    let (mut lo, mut hi) = (g_lo, gamma);
                    while hi - lo >= GAMMA_BRACKET_TOL {
                        let mid = 0.5 * (lo + hi);
                        let sol = warm(mid, Some(&u_lo))?;
                        let d = sol.deactivation();
                        if (d - target).abs() < (best.1 - target).abs() {
                            best = (mid, d, sol);
                        }
                        if close(best.1) {
                            break;
                        } else if d < target {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                }
                break;
            }
            prev = Some((gamma, u));
        }
    }

    let (gamma, achieved_deactivation, solution) = best;
    Ok(Calibration {
        gamma,
        achieved_deactivation,
        solution,
        evaluations,
        used_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cumulative_dc;
    use crate::model::{build_omega, generate_signal_class};
    use approx::assert_relative_eq;

    fn unit_u(values: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, values)
    }

    #[test]
    fn objectives_on_hand_instance() {
        let a = DMatrix::identity(2, 2);
        let u = unit_u(&[1.0, 0.0], 2, 1);
        assert_relative_eq!(objective_l1(&u, &a, &[0.5], &[1.0]), 0.25, epsilon = 1e-15);
        assert_relative_eq!(objective_l0(&u, &a, &[0.5], &[1.0]), 0.5, epsilon = 1e-15);
        assert_eq!(objective_l1(&u, &a, &[1.0], &[1.0]), 0.0);
        assert_eq!(objective_l0(&u, &a, &[1.0], &[1.0]), 0.0);
    }

    #[test]
    fn zero_penalty_is_trace_form() {
        let class = generate_signal_class(5, 9, 2).unwrap();
        let a = class.signals().clone();
        let u = polar_factor_lenient(&DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin()));
        let trace = (u.transpose() * &a * a.transpose() * &u).trace();
        let zeros = [0.0; 3];
        let ones = [1.0; 3];
        assert_relative_eq!(objective_l1(&u, &a, &zeros, &ones), trace, max_relative = 1e-12);
        assert_relative_eq!(objective_l0(&u, &a, &zeros, &ones), trace, max_relative = 1e-12);
        let expected = (&a * a.transpose() * &u) * 2.0;
        assert_relative_eq!(gradient_l1(&u, &a, &zeros, &ones), expected, max_relative = 1e-12);
        assert_relative_eq!(gradient_l0(&u, &a, &zeros, &ones), expected, max_relative = 1e-12);
    }

    #[test]
    fn clipped_gradients_vanish() {
        let a = DMatrix::identity(2, 2);
        let u = unit_u(&[0.6, 0.8], 2, 1);
        assert_eq!(gradient_l1(&u, &a, &[1.0], &[1.0]), DMatrix::zeros(2, 1));
        assert_eq!(gradient_l0(&u, &a, &[1.0], &[1.0]), DMatrix::zeros(2, 1));
    }

    #[test]
    fn scalar_stiefel_l0() {
        let a = DMatrix::from_row_slice(1, 3, &[2.0, -1.0, 0.5]);
        let spec = DesignSpec::uniform(3, 1, 0.5, Penalty::L0).unwrap();
        let st = solve_gpower(&a, &spec, &InitStrategy::Given(unit_u(&[-1.0], 1, 1)), 1e-10, 100).unwrap();
        assert_eq!(st.u.shape(), (1, 1));
        assert_relative_eq!(st.u[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        // F(u) = Σ[(aⱼu)² − γ]₊ is even in u, so both ±1 are maximizers
        assert_relative_eq!(st.objective(), 3.5 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_when_everything_is_truncated() {
        let class = generate_signal_class(4, 8, 1).unwrap();
        let a = class.signals().clone();
        let g = gamma_max(&a, &[1.0; 2], Penalty::L1) * 1.01;
        let spec = DesignSpec::uniform(8, 2, g, Penalty::L1).unwrap();
        let st = solve_gpower(&a, &spec, &InitStrategy::PcaWarmStart, 1e-8, 100).unwrap();
        assert!(st.degenerate);
        assert_eq!(st.iterations, 0);
        assert_eq!(
            solve_sparse(&a, &spec, &SolverOptions::default()).unwrap_err(),
            Error::AllRowsDead
        );
    }

    #[test]
    fn solver_rejects_bad_shapes() {
        let a = DMatrix::zeros(2, 5);
        let spec = DesignSpec::uniform(5, 3, 0.0, Penalty::L0).unwrap();
        assert!(solve_gpower(&a, &spec, &InitStrategy::PcaWarmStart, 1e-8, 10).is_err());
        let spec = DesignSpec::uniform(5, 2, 0.0, Penalty::L0).unwrap();
        assert!(solve_gpower(&a, &spec, &InitStrategy::PcaWarmStart, 0.0, 10).is_err());
    }

    #[test]
    fn recover_l1_deactivates_weaker_sensor() {
        let a = DMatrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let u = unit_u(&[1.0], 1, 1);
        let r = recover_w_l1(&u, &a, &[1.0], &[1.0]).unwrap();
        assert_eq!(r.weights, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert!(r.dead_rows.is_empty());
    }

    #[test]
    fn recover_l0_keeps_strong_sensor() {
        let a = DMatrix::from_row_slice(1, 2, &[3.0, 1.0]);
        let u = unit_u(&[1.0], 1, 1);
        let r = recover_w_l0(&u, &a, &[2.0], &[1.0]).unwrap();
        assert_eq!(r.weights, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        // γ exactly at (aⱼu)² = 1 is not strictly exceeded
        let r = recover_w_l0(&u, &a, &[1.0], &[1.0]).unwrap();
        assert_eq!(r.weights, DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn full_truncation_marks_dead_rows() {
        let class = generate_signal_class(4, 6, 3).unwrap();
        let a = class.signals().clone();
        let u = polar_factor_lenient(&DMatrix::from_fn(4, 2, |i, j| (1 + i + 2 * j) as f64));
        let c = a.transpose() * &u;
        let col0 = c.column(0).amax();
        // row 0 fully truncated, row 1 untouched
        let r = rows_l1(&u, &a, &[col0, 0.0], &[1.0, 1.0]);
        assert_eq!(r.dead_rows, vec![0]);
        let r = rows_l0(&u, &a, &[col0 * col0, 0.0], &[1.0, 1.0]);
        assert_eq!(r.dead_rows, vec![0]);
        assert_eq!(
            recover_w_l0(&u, &a, &[col0 * col0; 2], &[1.0; 2]).unwrap_err(),
            Error::AllRowsDead
        );
    }

    #[test]
    fn recovery_matches_inner_objective() {
        let class = generate_signal_class(5, 12, 17).unwrap();
        let a = class.signals().clone();
        let u = polar_factor_lenient(&DMatrix::from_fn(5, 3, |i, j| ((2 * i + j) as f64).cos()));
        let gammas = [0.4, 0.9, 1.3];
        let y = [1.0, 1.5, 0.7];
        let c = a.transpose() * &u;

        let r = rows_l1(&u, &a, &gammas, &y);
        for i in 0..3 {
            let w = r.weights.row(i).transpose();
            let inner = y[i] * c.column(i).dot(&w) - gammas[i] * w.lp_norm(1);
            let term: f64 = (0..12)
                .map(|j| (y[i] * c[(j, i)].abs() - gammas[i]).max(0.0).powi(2))
                .sum();
            assert_relative_eq!(inner, term.sqrt(), epsilon = 1e-9);
            assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-12);
        }

        let r = rows_l0(&u, &a, &gammas, &y);
        for i in 0..3 {
            let w = r.weights.row(i).transpose();
            let nnz = w.iter().filter(|v| **v != 0.0).count() as f64;
            let inner = (y[i] * c.column(i).dot(&w)).powi(2) - gammas[i] * nnz;
            let term: f64 = (0..12)
                .map(|j| ((y[i] * c[(j, i)]).powi(2) - gammas[i]).max(0.0))
                .sum();
            assert_relative_eq!(inner, term, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_penalty_recovers_pca_subspace() {
        let class = generate_signal_class(8, 20, 6).unwrap();
        let omega = build_omega(&class);
        let a = data_matrix(&class, 4);
        let opt = omega.top_eigen_sum(4);
        for penalty in [Penalty::L0, Penalty::L1, Penalty::None] {
            let spec = DesignSpec::uniform(20, 4, 0.0, penalty).unwrap();
            let sol = solve_sparse(&a, &spec, &SolverOptions::default()).unwrap();
            assert_relative_eq!(sol.objective, opt, max_relative = 1e-6);
            let cdc = cumulative_dc(sol.w.weights(), &class).unwrap().cdc;
            assert_relative_eq!(cdc, opt, max_relative = 1e-6);
            assert_eq!(sol.deactivation(), 0.0);
        }
    }

    #[test]
    fn padding_preserves_omega() {
        let class = generate_signal_class(3, 7, 9).unwrap();
        let a = data_matrix(&class, 5);
        assert_eq!(a.shape(), (5, 7));
        let omega = build_omega(&class);
        assert_relative_eq!(a.transpose() * &a, omega.matrix().clone(), epsilon = 1e-12);
        assert_eq!(data_matrix(&class, 2), class.signals().clone());
    }

    #[test]
    fn calibration_edge_targets() {
        let class = generate_signal_class(6, 15, 12).unwrap();
        let a = data_matrix(&class, 3);
        let spec = DesignSpec::uniform(15, 3, 0.0, Penalty::L0).unwrap();
        let opts = SolverOptions::default();

        let zero = calibrate_gamma(&a, &spec, 0.0, Penalty::L0, &opts).unwrap();
        assert_eq!(zero.gamma, 0.0);
        assert_eq!(zero.achieved_deactivation, 0.0);

        let full = calibrate_gamma(&a, &spec, 1.0, Penalty::L1, &opts).unwrap();
        assert_eq!(full.achieved_deactivation, 1.0);
        assert!(full.solution.all_rows_dead());

        assert!(calibrate_gamma(&a, &spec, 1.5, Penalty::L0, &opts).is_err());
        assert!(calibrate_gamma(&a, &spec, 0.5, Penalty::None, &opts).is_err());
    }

    #[test]
    fn calibration_hits_target_within_one_link() {
        let class = generate_signal_class(6, 15, 12).unwrap();
        let a = data_matrix(&class, 3);
        let spec = DesignSpec::uniform(15, 3, 0.0, Penalty::L0).unwrap();
        for penalty in [Penalty::L0, Penalty::L1] {
            let cal = calibrate_gamma(&a, &spec, 0.4, penalty, &SolverOptions::default()).unwrap();
            assert!(
                (cal.achieved_deactivation - 0.4).abs() <= 1.0 / 45.0 + 1e-12,
                "{penalty}: {}",
                cal.achieved_deactivation
            );
            assert!(cal.gamma > 0.0);
            assert_eq!(cal.solution.w.spec().gammas(), &[cal.gamma; 3]);
        }
    }
}
