//! Detection performance of a designed `W` for a known signal in white
//! Gaussian noise.
//!
//! The fusion center applies the matched filter in the projected space,
//! `T = (Ws)ᵀ(WWᵀ)⁻¹ y` with `y = Wx`, which equals `sᵀP_w x`. Normalized by
//! `σ‖P_w s‖`, `T` is `N(0,1)` under H₀ and `N(d,1)` under H₁ with
//! `d = ‖P_w s‖/σ`, so `pd = Q(Q⁻¹(pfa) − d)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::model::SignalClass;
use crate::numeric::{gram_schmidt_rows, live_rows, projector_of};
use crate::rng::{self, derive_seed, Stream};

/// Trials per parallel partition of a Monte-Carlo run.
const PARTITION: usize = 10_000;
const Z95: f64 = 1.959963984540054;
/// `‖P_w s‖/‖s‖` below which the signal is treated as invisible to `W`.
const DEGENERATE_TOL: f64 = 1e-10;

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Q⁻¹(p)` for `p ∈ (0, 1)`.
pub fn q_inverse(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn validate(sigma: f64, pfa: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be > 0, got {sigma}")));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidInput(format!("pfa must lie in (0,1), got {pfa}")));
    }
    Ok(())
}

/// `d = ‖P_w s‖/σ`.
pub fn deflection(w: &DMatrix<f64>, s: &DVector<f64>, sigma: f64) -> Result<f64> {
    let p = projector_of(w)?;
    Ok(p.apply(s).norm() / sigma)
}

pub fn pd_from_deflection(d: f64, pfa: f64) -> f64 {
    q_function(q_inverse(pfa) - d)
}

pub fn pd_closed_form(w: &DMatrix<f64>, s: &DVector<f64>, sigma: f64, pfa: f64) -> Result<f64> {
    validate(sigma, pfa)?;
    Ok(pd_from_deflection(deflection(w, s, sigma)?, pfa))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub signal_index: usize,
    pub sigma: f64,
    pub pfa: f64,
    pub deflection: f64,
    pub pd_closed_form: f64,
    pub pd_monte_carlo: f64,
    pub empirical_pfa: f64,
    pub trials_per_hypothesis: usize,
    /// 95% half-width of the Monte-Carlo pd estimate.
    pub ci_half_width: f64,
}

impl DetectionResult {
    /// Closed form and simulation agree within three half-widths.
    pub fn is_consistent(&self) -> bool {
        (self.pd_closed_form - self.pd_monte_carlo).abs() <= 3.0 * self.ci_half_width
    }
}

/// Agresti–Coull 95% half-width for `hits` successes out of `n`.
pub fn binomial_half_width(hits: usize, n: usize) -> f64 {
    let z2 = Z95 * Z95;
    let n_adj = n as f64 + z2;
    let p = (hits as f64 + z2 / 2.0) / n_adj;
    Z95 * (p * (1.0 - p) / n_adj).sqrt()
}

/// Monte-Carlo estimate of pd at the analytic threshold `Q⁻¹(pfa)`.
///
/// `trials/2` observations are drawn under each hypothesis of
/// `x = n` / `x = s + n`. Work is split into fixed partitions whose seeds are
/// derived from `(seed, partition)`, so the result does not depend on how
/// many threads run them.
pub fn simulate_detection(
    w: &DMatrix<f64>,
    class: &SignalClass,
    signal_index: usize,
    sigma: f64,
    pfa: f64,
    trials: usize,
    seed: u64,
) -> Result<DetectionResult> {
    validate(sigma, pfa)?;
    if trials < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 trials, got {trials}")));
    }
    if signal_index >= class.count() {
        return Err(Error::InvalidInput(format!(
            "signal index {signal_index} out of range for {} signals",
            class.count()
        )));
    }
    if w.ncols() != class.dim() {
        return Err(Error::InvalidInput("W and signals disagree on N".into()));
    }
    let s = class.signal(signal_index);
    let live = live_rows(w);
    let wr = DMatrix::from_fn(live.len(), w.ncols(), |r, c| w[(live[r], c)]);
    let d = deflection(w, &s, sigma)?;

    // Filter b applied to y = W_live x. The matched filter is (WWᵀ)⁻¹Ws; when
    // P_w s = 0 it degenerates and any fixed unit direction of the row space
    // gives a statistic with the same law under both hypotheses.
    // ‖P_w s‖ at roundoff level counts as d = 0
    let degenerate = d * sigma <= DEGENERATE_TOL * s.norm();
    let filter: Option<DVector<f64>> = if live.is_empty() {
        None
    } else if !degenerate {
        let gram = &wr * wr.transpose();
        let chol = gram.cholesky().ok_or(Error::RankDeficient(0.0))?;
        let b = chol.solve(&(&wr * &s));
        // sᵀP_w x / (σ‖P_w s‖) with ‖P_w s‖ = dσ
        Some(b / (d * sigma * sigma))
    } else {
        // y = R·W_ort·x, so bᵀ = e₁ᵀR⁻¹ reads off the first orthonormal row
        let (_, r) = gram_schmidt_rows(&wr)?;
        let r_inv = r.try_inverse().ok_or(Error::RankDeficient(0.0))?;
        Some(r_inv.row(0).transpose() / sigma)
    };
    let threshold = q_inverse(pfa);
    let per_hypothesis = trials / 2;
    let partitions = per_hypothesis.div_ceil(PARTITION);

    let counts: Vec<(usize, usize)> = (0..partitions)
        .into_par_iter()
        .map(|part| {
            let mut rng = rng::seeded(derive_seed(seed, part as u64), Stream::Detection);
            let len = PARTITION.min(per_hypothesis - part * PARTITION);
            let mut false_alarms = 0usize;
            let mut detections = 0usize;
            let mut x = DVector::<f64>::zeros(s.len());
            for _ in 0..len {
                for h1 in [false, true] {
                    for k in 0..x.len() {
                        let noise: f64 = StandardNormal.sample(&mut rng);
                        x[k] = sigma * noise + if h1 { s[k] } else { 0.0 };
                    }
                    let decide = match &filter {
                        Some(b) => {
                            let y = &wr * &x;
                            b.dot(&y) > threshold
                        }
                        None => rng.gen::<f64>() < pfa,
                    };
                    if decide {
                        if h1 {
                            detections += 1;
                        } else {
                            false_alarms += 1;
                        }
                    }
                }
            }
            (false_alarms, detections)
        })
        .collect();
    let (fa, det) = counts
        .iter()
        .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));

    Ok(DetectionResult {
        signal_index,
        sigma,
        pfa,
        deflection: d,
        pd_closed_form: pd_from_deflection(d, pfa),
        pd_monte_carlo: det as f64 / per_hypothesis as f64,
        empirical_pfa: fa as f64 / per_hypothesis as f64,
        trials_per_hypothesis: per_hypothesis,
        ci_half_width: binomial_half_width(det, per_hypothesis),
    })
}
