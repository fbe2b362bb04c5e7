//! Reproduction sweeps and single-design runs.
//!
//! Every sweep cell is a pure function of `(seed, sweep point)`. Cells run on
//! the rayon pool and are collected in input order before averaging, so the
//! output does not depend on scheduling.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Method, RunConfig};
use crate::design::{
    design_cost_free, design_diagonal_shortcut, design_random, random_baseline_prediction,
    CollaborationMatrix,
};
use crate::detect::{simulate_detection, DetectionResult};
use crate::error::{Error, Result};
use crate::metrics::{cumulative_dc, cumulative_dc_span, MetricsReport};
use crate::model::{build_omega, generate_signal_class, DesignSpec, Penalty, SignalClass};
use crate::rng::derive_seed;
use crate::sparse::{
    calibrate_gamma, data_matrix, gamma_max, solve_sparse, solve_sparse_allow_dead,
    InitStrategy, SolverOptions, SparseMetadata,
};

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// `,`-separated, LF line endings, header first.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub(crate) fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        init: InitStrategy::PcaWarmStart,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    }
}

/// C-DC and achieved deactivation of a design calibrated to `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedPoint {
    pub gamma: f64,
    pub cdc: f64,
    pub deactivation: f64,
}

pub fn sparse_at_target(
    class: &SignalClass,
    m: usize,
    penalty: Penalty,
    target: f64,
    opts: &SolverOptions,
) -> Result<CalibratedPoint> {
    let a = data_matrix(class, m);
    let spec = DesignSpec::uniform(class.dim(), m, 0.0, penalty)?;
    let cal = calibrate_gamma(&a, &spec, target, penalty, opts)?;
    let cdc = cumulative_dc_span(cal.solution.w.weights(), class)?.cdc;
    Ok(CalibratedPoint {
        gamma: cal.gamma,
        cdc,
        deactivation: cal.achieved_deactivation,
    })
}

// ---------------------------------------------------------------- fig 2

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub m: usize,
    pub cdc_opt: f64,
    pub cdc_l0: f64,
    pub cdc_l1: f64,
    pub cdc_random: f64,
    pub cdc_random_predicted: f64,
    pub deactivation_l0: f64,
    pub deactivation_l1: f64,
}

struct Fig2Cell {
    cdc_opt: f64,
    l0: CalibratedPoint,
    l1: CalibratedPoint,
    random: f64,
    predicted: f64,
}

fn fig2_cell(cfg: &RunConfig, m: usize, seed: u64) -> Result<Fig2Cell> {
    let class = generate_signal_class(cfg.i, cfg.n, seed)?;
    let omega = build_omega(&class);
    let opts = solver_options(cfg);
    let target = cfg.target();
    let draws = cfg.random_draws();
    let spec = DesignSpec::cost_free(cfg.n, m)?;
    let base = seed.wrapping_mul(draws as u64);
    let random = (0..draws)
        .map(|k| {
            let w = design_random(&spec, derive_seed(base, k as u64))?;
            Ok(cumulative_dc(w.weights(), &class)?.cdc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Fig2Cell {
        cdc_opt: omega.top_eigen_sum(m),
        l0: sparse_at_target(&class, m, Penalty::L0, target, &opts)?,
        l1: sparse_at_target(&class, m, Penalty::L1, target, &opts)?,
        random: mean(random),
        predicted: random_baseline_prediction(&class, m)?,
    })
}

/// Mean C-DC versus `M` for the optimal, ℓ0, ℓ1 and random designs.
pub fn run_fig2(cfg: &RunConfig) -> Result<Vec<Fig2Row>> {
    let sweep: Vec<usize> = cfg
        .sweep
        .clone()
        .unwrap_or_else(|| (2..=cfg.n).collect());
    let cells: Vec<(usize, u64)> = sweep
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(m, seed)| fig2_cell(cfg, m, seed))
        .collect::<Result<Vec<_>>>()?;
    let per_m = cfg.seeds.len();
    Ok(sweep
        .iter()
        .zip(results.chunks(per_m))
        .map(|(&m, chunk)| Fig2Row {
            m,
            cdc_opt: mean(chunk.iter().map(|c| c.cdc_opt)),
            cdc_l0: mean(chunk.iter().map(|c| c.l0.cdc)),
            cdc_l1: mean(chunk.iter().map(|c| c.l1.cdc)),
            cdc_random: mean(chunk.iter().map(|c| c.random)),
            cdc_random_predicted: mean(chunk.iter().map(|c| c.predicted)),
            deactivation_l0: mean(chunk.iter().map(|c| c.l0.deactivation)),
            deactivation_l1: mean(chunk.iter().map(|c| c.l1.deactivation)),
        })
        .collect())
}

pub fn fig2_table(rows: &[Fig2Row]) -> Table {
    let mut t = Table::new(&[
        "m",
        "cdc_opt",
        "cdc_l0",
        "cdc_l1",
        "cdc_random",
        "cdc_random_predicted",
        "deactivation_l0",
        "deactivation_l1",
    ]);
    for r in rows {
        t.push(vec![
            r.m.to_string(),
            r.cdc_opt.to_string(),
            r.cdc_l0.to_string(),
            r.cdc_l1.to_string(),
            r.cdc_random.to_string(),
            r.cdc_random_predicted.to_string(),
            r.deactivation_l0.to_string(),
            r.deactivation_l1.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- fig 3

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub i: usize,
    pub cu_opt: f64,
    pub cu_l0: f64,
    pub cu_l1: f64,
}

/// Mean cost of universality versus the number of signals `I`.
pub fn run_fig3(cfg: &RunConfig) -> Result<Vec<Fig3Row>> {
    let sweep: Vec<usize> = cfg
        .sweep
        .clone()
        .unwrap_or_else(|| (2..=cfg.n).collect());
    let opts = solver_options(cfg);
    let cells: Vec<(usize, u64)> = sweep
        .iter()
        .flat_map(|&i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(count, seed)| -> Result<(f64, f64, f64)> {
            let class = generate_signal_class(count, cfg.n, seed)?;
            let total = class.total_energy();
            if total == 0.0 {
                return Err(Error::ZeroSignalClass);
            }
            let omega = build_omega(&class);
            let l0 = sparse_at_target(&class, cfg.m, Penalty::L0, cfg.target(), &opts)?;
            let l1 = sparse_at_target(&class, cfg.m, Penalty::L1, cfg.target(), &opts)?;
            Ok((omega.top_eigen_sum(cfg.m) / total, l0.cdc / total, l1.cdc / total))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sweep
        .iter()
        .zip(results.chunks(cfg.seeds.len()))
        .map(|(&i, chunk)| Fig3Row {
            i,
            cu_opt: mean(chunk.iter().map(|c| c.0)),
            cu_l0: mean(chunk.iter().map(|c| c.1)),
            cu_l1: mean(chunk.iter().map(|c| c.2)),
        })
        .collect())
}

pub fn fig3_table(rows: &[Fig3Row]) -> Table {
    let mut t = Table::new(&["i", "cu_opt", "cu_l0", "cu_l1"]);
    for r in rows {
        t.push(vec![
            r.i.to_string(),
            r.cu_opt.to_string(),
            r.cu_l0.to_string(),
            r.cu_l1.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- fig 4

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Point {
    pub penalty: Penalty,
    pub index: usize,
    /// γ / γmax, identical across seeds.
    pub gamma_fraction: f64,
    pub gamma_mean: f64,
    pub deactivation_mean: f64,
    pub normalized_cdc_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Summary {
    pub penalty: Penalty,
    pub target_deactivation: f64,
    /// Mean over seeds of C-DC/C-DC_opt at the calibrated target.
    pub normalized_cdc_at_target: f64,
    pub performance_level: f64,
    /// Mean over seeds of the largest grid deactivation whose normalized
    /// C-DC stays at or above `performance_level`.
    pub deactivation_at_level: f64,
    pub per_seed_normalized_cdc: Vec<f64>,
    pub per_seed_deactivation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Result {
    pub curve: Vec<Fig4Point>,
    pub summary: Vec<Fig4Summary>,
}

struct Fig4Cell {
    /// (γ, deactivation, normalized C-DC) per grid point
    grid: Vec<(f64, f64, f64)>,
    at_target: f64,
    at_level: f64,
}

fn fig4_cell(cfg: &RunConfig, penalty: Penalty, seed: u64) -> Result<Fig4Cell> {
    let class = generate_signal_class(cfg.i, cfg.n, seed)?;
    let omega = build_omega(&class);
    let cdc_opt = omega.top_eigen_sum(cfg.m);
    let a = data_matrix(&class, cfg.m);
    let spec = DesignSpec::uniform(cfg.n, cfg.m, 0.0, penalty)?;
    let opts = solver_options(cfg);
    let gmax = gamma_max(&a, spec.y_diag(), penalty);
    let grid = (0..cfg.grid)
        .map(|k| {
            let gamma = gmax * k as f64 / (cfg.grid - 1) as f64;
            let sol = solve_sparse_allow_dead(&a, &spec.with_uniform_gamma(gamma)?, &opts)?;
            let cdc = cumulative_dc_span(sol.w.weights(), &class)?.cdc;
            Ok((gamma, sol.deactivation(), cdc / cdc_opt))
        })
        .collect::<Result<Vec<_>>>()?;
    let at_level = grid
        .iter()
        .filter(|p| p.2 >= cfg.performance_level)
        .map(|p| p.1)
        .fold(0.0_f64, f64::max);
    let at_target = sparse_at_target(&class, cfg.m, penalty, cfg.target(), &opts)?.cdc / cdc_opt;
    Ok(Fig4Cell {
        grid,
        at_target,
        at_level,
    })
}

/// Deactivation and normalized C-DC along a γ grid, for ℓ0 and ℓ1.
pub fn run_fig4(cfg: &RunConfig) -> Result<Fig4Result> {
    let penalties = [Penalty::L0, Penalty::L1];
    let cells: Vec<(Penalty, u64)> = penalties
        .iter()
        .flat_map(|&p| cfg.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(p, seed)| fig4_cell(cfg, p, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut curve = Vec::new();
    let mut summary = Vec::new();
    for (&penalty, chunk) in penalties.iter().zip(results.chunks(cfg.seeds.len())) {
        for k in 0..cfg.grid {
            curve.push(Fig4Point {
                penalty,
                index: k,
                gamma_fraction: k as f64 / (cfg.grid - 1) as f64,
                gamma_mean: mean(chunk.iter().map(|c| c.grid[k].0)),
                deactivation_mean: mean(chunk.iter().map(|c| c.grid[k].1)),
                normalized_cdc_mean: mean(chunk.iter().map(|c| c.grid[k].2)),
            });
        }
        let per_seed_normalized_cdc: Vec<f64> = chunk.iter().map(|c| c.at_target).collect();
        let per_seed_deactivation: Vec<f64> = chunk.iter().map(|c| c.at_level).collect();
        summary.push(Fig4Summary {
            penalty,
            target_deactivation: cfg.target(),
            normalized_cdc_at_target: mean(per_seed_normalized_cdc.iter().copied()),
            performance_level: cfg.performance_level,
            deactivation_at_level: mean(per_seed_deactivation.iter().copied()),
            per_seed_normalized_cdc,
            per_seed_deactivation,
        });
    }
    Ok(Fig4Result { curve, summary })
}

pub fn fig4_tables(result: &Fig4Result) -> (Table, Table) {
    let mut curve = Table::new(&[
        "penalty",
        "index",
        "gamma_fraction",
        "gamma_mean",
        "deactivation_mean",
        "normalized_cdc_mean",
    ]);
    for p in &result.curve {
        curve.push(vec![
            p.penalty.to_string(),
            p.index.to_string(),
            p.gamma_fraction.to_string(),
            p.gamma_mean.to_string(),
            p.deactivation_mean.to_string(),
            p.normalized_cdc_mean.to_string(),
        ]);
    }
    let mut summary = Table::new(&[
        "penalty",
        "target_deactivation",
        "normalized_cdc_at_target",
        "performance_level",
        "deactivation_at_level",
    ]);
    for s in &result.summary {
        summary.push(vec![
            s.penalty.to_string(),
            s.target_deactivation.to_string(),
            s.normalized_cdc_at_target.to_string(),
            s.performance_level.to_string(),
            s.deactivation_at_level.to_string(),
        ]);
    }
    (curve, summary)
}

// ---------------------------------------------------------- single design

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRun {
    pub class: SignalClass,
    pub w: CollaborationMatrix,
    pub metrics: MetricsReport,
    pub seed: u64,
    pub calibrated_gamma: Option<f64>,
    pub sparse: Option<SparseMetadata>,
    pub detection: Vec<DetectionResult>,
}

fn load_class(cfg: &RunConfig) -> Result<SignalClass> {
    match &cfg.signals {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            SignalClass::from_csv(&text)
        }
        None => generate_signal_class(cfg.i, cfg.n, cfg.seeds[0]),
    }
}

/// One design by `cfg.method`, with its metrics. Sparse methods use
/// `cfg.gamma` when given and otherwise calibrate to the target deactivation.
pub fn run_single_design(cfg: &RunConfig) -> Result<DesignRun> {
    let class = load_class(cfg)?;
    let n = class.dim();
    let m = cfg.m;
    if m > n {
        return Err(Error::Config(format!("m={m} exceeds the signal dimension {n}")));
    }
    let seed = cfg.seeds[0];
    let omega = build_omega(&class);
    let cdc_opt = omega.top_eigen_sum(m);
    let opts = solver_options(cfg);

    let mut calibrated_gamma = None;
    let mut sparse = None;
    let w = match cfg.method {
        Method::Pca => design_cost_free(&omega, m)?,
        Method::Diagonal => design_diagonal_shortcut(&omega, m)?,
        Method::Random => design_random(&DesignSpec::cost_free(n, m)?, seed)?,
        Method::L0 | Method::L1 => {
            let penalty = if cfg.method == Method::L0 {
                Penalty::L0
            } else {
                Penalty::L1
            };
            let a = data_matrix(&class, m);
            let solution = match cfg.gamma {
                Some(gamma) => {
                    let spec = DesignSpec::uniform(n, m, gamma, penalty)?;
                    solve_sparse(&a, &spec, &opts)?
                }
                None => {
                    let spec = DesignSpec::uniform(n, m, 0.0, penalty)?;
                    let cal = calibrate_gamma(&a, &spec, cfg.target(), penalty, &opts)?;
                    calibrated_gamma = Some(cal.gamma);
                    cal.solution
                }
            };
            sparse = Some(solution.metadata());
            solution.w
        }
    };
    let metrics = MetricsReport::evaluate(w.weights(), &class, w.spec(), cdc_opt)?;
    Ok(DesignRun {
        class,
        w,
        metrics,
        seed,
        calibrated_gamma,
        sparse,
        detection: Vec::new(),
    })
}

/// A design followed by a Monte-Carlo detection run for every signal.
pub fn run_detect(cfg: &RunConfig) -> Result<DesignRun> {
    let mut run = run_single_design(cfg)?;
    let trials = cfg.detection_trials();
    let w: &DMatrix<f64> = run.w.weights();
    run.detection = (0..run.class.count())
        .map(|k| {
            simulate_detection(
                w,
                &run.class,
                k,
                cfg.sigma,
                cfg.pfa,
                trials,
                derive_seed(run.seed, (k as u64) << 32),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(run)
}

pub fn detection_table(results: &[DetectionResult]) -> Table {
    let mut t = Table::new(&[
        "signal_index",
        "sigma",
        "pfa",
        "deflection",
        "pd_closed_form",
        "pd_monte_carlo",
        "ci_half_width",
        "empirical_pfa",
        "trials_per_hypothesis",
    ]);
    for r in results {
        t.push(vec![
            r.signal_index.to_string(),
            r.sigma.to_string(),
            r.pfa.to_string(),
            r.deflection.to_string(),
            r.pd_closed_form.to_string(),
            r.pd_monte_carlo.to_string(),
            r.ci_half_width.to_string(),
            r.empirical_pfa.to_string(),
            r.trials_per_hypothesis.to_string(),
        ]);
    }
    t
}
