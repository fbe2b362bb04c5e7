//! Domain types for the detection problem.
//!
//! A [`SignalClass`] stacks the `I` known deterministic signals as the rows of
//! an `I×N` matrix `S`. The same matrix doubles as the factor `A` with
//! `Ω = AᵀA` used by the sparse solvers, so column `j` of `S` is the signal
//! profile seen by sensor `j`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sym_eig, EigenPairs};
use crate::rng::{self, Stream};

/// Numerical rank threshold relative to the largest eigenvalue of Ω.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalClass {
    signals: DMatrix<f64>,
}

impl SignalClass {
    pub fn new(signals: DMatrix<f64>) -> Result<Self> {
        if signals.nrows() == 0 || signals.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "signal class must be at least 1x1, got {}x{}",
                signals.nrows(),
                signals.ncols()
            )));
        }
        if signals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("signal entries must be finite".into()));
        }
        Ok(Self { signals })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let count = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("signal rows have unequal length".into()));
        }
        Self::new(DMatrix::from_fn(count, dim, |i, j| rows[i][j]))
    }

    /// Number of signals `I`.
    pub fn count(&self) -> usize {
        self.signals.nrows()
    }

    /// Ambient dimension `N` (number of sensors).
    pub fn dim(&self) -> usize {
        self.signals.ncols()
    }

    pub fn signals(&self) -> &DMatrix<f64> {
        &self.signals
    }

    pub fn signal(&self, index: usize) -> nalgebra::DVector<f64> {
        self.signals.row(index).transpose()
    }

    /// Squared norms `‖sᵢ‖²`, one per signal.
    pub fn energies(&self) -> Vec<f64> {
        self.signals.row_iter().map(|r| r.norm_squared()).collect()
    }

    /// `Σ‖sᵢ‖²`, the best C-DC any collaboration matrix can reach.
    pub fn total_energy(&self) -> f64 {
        self.signals.norm_squared()
    }

    /// One signal per line, comma separated, no header.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.signals)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        Self::new(matrix_from_csv(text)?)
    }
}

/// Draws `count` signals of dimension `dim` with i.i.d. standard-normal
/// entries, row by row.
pub fn generate_signal_class(count: usize, dim: usize, seed: u64) -> Result<SignalClass> {
    if count == 0 || dim == 0 {
        return Err(Error::InvalidInput(format!(
            "signal class dimensions must be positive, got I={count}, N={dim}"
        )));
    }
    let mut rng = rng::seeded(seed, Stream::Signals);
    let data: Vec<f64> = (0..count * dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    SignalClass::new(DMatrix::from_row_slice(count, dim, &data))
}

/// `Ω = Σ sᵢsᵢᵀ` together with its spectrum.
#[derive(Debug, Clone)]
pub struct Omega {
    matrix: DMatrix<f64>,
    rank_estimate: usize,
    eigen: EigenPairs,
}

impl Omega {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rank_estimate(&self) -> usize {
        self.rank_estimate
    }

    pub fn eigen(&self) -> &EigenPairs {
        &self.eigen
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Sum of the `m` largest eigenvalues, i.e. the cost-free optimal C-DC.
    pub fn top_eigen_sum(&self, m: usize) -> f64 {
        self.eigen.values.iter().take(m).sum()
    }

    /// Wraps an arbitrary symmetric PSD matrix (e.g. a hand-built diagonal Ω).
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidInput("Ω must be a non-empty square matrix".into()));
        }
        let eigen = sym_eig(&matrix)?;
        let trace = matrix.trace();
        let min = eigen.values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "Ω must be positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
        let symmetric = (&matrix + matrix.transpose()) * 0.5;
        let rank_estimate = numerical_rank(&eigen.values);
        Ok(Self {
            matrix: symmetric,
            rank_estimate,
            eigen,
        })
    }
}

fn numerical_rank(values: &[f64]) -> usize {
    let lead = values.first().copied().unwrap_or(0.0);
    if lead <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_TOL * lead).count()
}

pub fn build_omega(class: &SignalClass) -> Omega {
    let s = class.signals();
    let gram = s.transpose() * s;
    let matrix = (&gram + gram.transpose()) * 0.5;
    let eigen = sym_eig(&matrix).expect("SᵀS is symmetric by construction");
    let rank_estimate = numerical_rank(&eigen.values);
    Omega {
        matrix,
        rank_estimate,
        eigen,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise sigma must be > 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L0,
    L1,
    None,
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Penalty::L0 => "l0",
            Penalty::L1 => "l1",
            Penalty::None => "none",
        })
    }
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(Penalty::L0),
            "l1" => Ok(Penalty::L1),
            "none" => Ok(Penalty::None),
            other => Err(Error::InvalidInput(format!("unknown penalty '{other}'"))),
        }
    }
}

/// Problem dimensions and per-row penalty weights for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    n: usize,
    m: usize,
    gammas: Vec<f64>,
    penalty: Penalty,
    y_diag: Vec<f64>,
}

impl DesignSpec {
    pub fn new(
        n: usize,
        m: usize,
        gammas: Vec<f64>,
        penalty: Penalty,
        y_diag: Vec<f64>,
    ) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidInput(format!("need 1 <= M <= N, got M={m}, N={n}")));
        }
        if gammas.len() != m || y_diag.len() != m {
            return Err(Error::InvalidInput(format!(
                "gammas and y_diag must have length M={m}"
            )));
        }
        if gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidInput("penalties must be finite and >= 0".into()));
        }
        if y_diag.iter().any(|y| !(*y > 0.0 && y.is_finite())) {
            return Err(Error::InvalidInput("Y diagonal entries must be > 0".into()));
        }
        Ok(Self {
            n,
            m,
            gammas,
            penalty,
            y_diag,
        })
    }

    /// Same `γ` on every row and `Y = I`.
    pub fn uniform(n: usize, m: usize, gamma: f64, penalty: Penalty) -> Result<Self> {
        Self::new(n, m, vec![gamma; m], penalty, vec![1.0; m])
    }

    pub fn cost_free(n: usize, m: usize) -> Result<Self> {
        Self::uniform(n, m, 0.0, Penalty::None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn y_diag(&self) -> &[f64] {
        &self.y_diag
    }

    pub fn with_uniform_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n, self.m, vec![gamma; self.m], self.penalty, self.y_diag.clone())
    }

    pub fn with_penalty(&self, penalty: Penalty) -> Self {
        Self {
            penalty,
            ..self.clone()
        }
    }
}

pub(crate) fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub(crate) fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("'{}': {e}", field.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no rows".into(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
