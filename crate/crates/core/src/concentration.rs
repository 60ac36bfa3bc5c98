//! Closed-form tail bounds for the information density and for the energy of
//! Gaussian blocks, the likelihood-ratio inflation between nearby channels,
//! and a Monte-Carlo harness that checks the tail bounds empirically.
//!
//! All bounds are evaluated as base-2 logarithms first so large block lengths
//! do not underflow.

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::Serialize;

use crate::channel::{
    complex_gaussian, info_density, transmit, BlockSequence, ChannelState, InputCovariance, NoiseSpec, RateEvaluator,
};
use crate::error::{param, Result};
use crate::rng::{par_count, SeedStream};

/// Fewest trials accepted by [`empirical_tail_check`].
pub const MIN_TRIALS: usize = 1000;

fn check_n_delta(n: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return param("block length must be at least 1");
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return param("deviation must be positive and finite");
    }
    Ok(())
}

/// `log₂` of the information-density lower-tail bound.
pub fn info_density_tail_log2(n: usize, n_r: usize, delta: f64) -> Result<f64> {
    check_n_delta(n, delta)?;
    if n_r == 0 {
        return param("N_R must be at least 1");
    }
    let nr = n_r as f64;
    let x = LN_2 * delta / nr;
    // sqrt(1+x²) - 1 without cancellation for small x
    let excess = x * x / ((1.0 + x * x).sqrt() + 1.0);
    Ok(-(n as f64 * nr / (2.0 * LN_2)) * excess)
}

/// `P[i(Tⁿ;Zⁿ) ≤ n f − nδ] ≤ 2^{−(nN_R/(2ln2))[(1+(ln2·δ)²/N_R²)^{1/2}−1]}`.
pub fn info_density_tail_bound(n: usize, n_r: usize, delta: f64) -> Result<f64> {
    Ok(info_density_tail_log2(n, n_r, delta)?.exp2())
}

/// `log₂` of the block-energy upper-tail bound.
pub fn power_tail_log2(n: usize, m_trace: f64, delta: f64) -> Result<f64> {
    check_n_delta(n, delta)?;
    if !(m_trace > 0.0) {
        return param("trace M must be positive");
    }
    let r = delta / m_trace;
    Ok(n as f64 * (r.ln_1p() / LN_2 - r / LN_2))
}

/// `P[Σ‖Xᵢ‖² ≥ n(M+δ)] ≤ [(1+δ/M)·2^{−δ/(ln2·M)}]ⁿ`.
pub fn power_tail_bound(n: usize, m_trace: f64, delta: f64) -> Result<f64> {
    Ok(power_tail_log2(n, m_trace, delta)?.exp2())
}

/// `ρ = 2a²P + 2N_Rσ² + 2`.
pub fn output_power_radius(a: f64, p_budget: f64, sigma2: f64, n_r: usize) -> Result<f64> {
    if !(a >= 0.0) || !(p_budget > 0.0) || !(sigma2 > 0.0) || n_r == 0 {
        return param("radius needs a ≥ 0 and positive P, σ², N_R");
    }
    Ok(2.0 * a * a * p_budget + 2.0 * n_r as f64 * sigma2 + 2.0)
}

/// `log₂` of the likelihood-ratio inflation factor.
pub fn likelihood_ratio_inflation_log2(n: usize, nu: f64, a: f64, p_budget: f64, rho: f64, sigma2: f64) -> Result<f64> {
    if n == 0 || !(nu >= 0.0) || !(a >= 0.0) || !(p_budget > 0.0) || !(rho >= 0.0) || !(sigma2 > 0.0) {
        return param("inflation needs n ≥ 1, ν, a, ρ ≥ 0 and positive P, σ²");
    }
    Ok(2.0 * n as f64 / (LN_2 * sigma2) * ((p_budget * rho).sqrt() + a * p_budget) * nu)
}

/// `2^{(2n/(ln2·σ²))[√(Pρ)+aP]·ν}`.
pub fn likelihood_ratio_inflation(n: usize, nu: f64, a: f64, p_budget: f64, rho: f64, sigma2: f64) -> Result<f64> {
    Ok(likelihood_ratio_inflation_log2(n, nu, a, p_budget, rho, sigma2)?.exp2())
}

/// Which deviation event the harness simulates.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailParams {
    /// `i(Tⁿ;Zⁿ) ≤ n·f(g,Q) − nδ` with `T ~ N_C(0,Q)` through `g`.
    InfoDensity { n: usize, delta: f64, g: ChannelState, q: InputCovariance, sigma2: f64 },
    /// `Σ‖Xᵢ‖² ≥ n(M+δ)` with `Xᵢ ~ N_C(0, (M/dim)·I)`.
    Power { n: usize, delta: f64, m_trace: f64, dim: usize },
}

impl TailParams {
    pub fn kind(&self) -> &'static str {
        match self {
            TailParams::InfoDensity { .. } => "info_density",
            TailParams::Power { .. } => "power",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            TailParams::InfoDensity { n, .. } | TailParams::Power { n, .. } => *n,
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            TailParams::InfoDensity { delta, .. } | TailParams::Power { delta, .. } => *delta,
        }
    }

    /// Receive dimension for the density kind, vector dimension for the power kind.
    pub fn dim(&self) -> usize {
        match self {
            TailParams::InfoDensity { g, .. } => g.n_r(),
            TailParams::Power { dim, .. } => *dim,
        }
    }

    pub fn log2_bound(&self) -> Result<f64> {
        match self {
            TailParams::InfoDensity { n, delta, g, .. } => info_density_tail_log2(*n, g.n_r(), *delta),
            TailParams::Power { n, delta, m_trace, .. } => power_tail_log2(*n, *m_trace, *delta),
        }
    }
}

/// Outcome of one empirical tail check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub params: TailParams,
    pub bound: f64,
    pub log2_bound: f64,
    pub empirical: f64,
    pub trials: usize,
    /// `3·√(p̂(1−p̂)/trials)`.
    pub slack: f64,
    pub pass: bool,
}

/// Simulate the deviation event `trials` times and compare with the bound.
///
/// Trial `k` draws its inputs from substream `2k` and its noise from
/// substream `2k+1` of `(master_seed, stream_id)`.
pub fn empirical_tail_check(params: &TailParams, trials: usize, master_seed: u64, stream_id: u64) -> Result<TailBoundReport> {
    if trials < MIN_TRIALS {
        return param(format!("at least {MIN_TRIALS} trials are required"));
    }
    let log2_bound = params.log2_bound()?;
    let base = SeedStream::new(master_seed, stream_id);
    let hits = match params {
        TailParams::InfoDensity { n, delta, g, q, sigma2 } => {
            let noise = NoiseSpec::new(*sigma2, g.n_r())?;
            if g.n_t() != q.dim() {
                return param("state and covariance shapes differ");
            }
            let threshold = *n as f64 * (RateEvaluator::new(q, *sigma2).eval(g) - delta);
            // surface a singular covariance before spawning the trials
            info_density(g, q, &noise, &BlockSequence::zeros(g.n_t(), 0), &BlockSequence::zeros(g.n_r(), 0))?;
            let failed = AtomicBool::new(false);
            let count = par_count(trials, |k| {
                let t = BlockSequence::gaussian(q, *n, base.substream(2 * k as u64));
                let z = match transmit(g, &t, &noise, base.substream(2 * k as u64 + 1)) {
                    Ok(z) => z,
                    Err(_) => {
                        failed.store(true, Ordering::Relaxed);
                        return false;
                    }
                };
                match info_density(g, q, &noise, &t, &z) {
                    Ok(i) => i <= threshold,
                    Err(_) => {
                        failed.store(true, Ordering::Relaxed);
                        false
                    }
                }
            });
            if failed.into_inner() {
                return param("information density evaluation failed");
            }
            count
        }
        TailParams::Power { n, delta, m_trace, dim } => {
            if *dim == 0 {
                return param("vector dimension must be at least 1");
            }
            let var = m_trace / *dim as f64;
            let threshold = *n as f64 * (m_trace + delta);
            par_count(trials, |k| {
                let mut rng = base.rng_at(k as u64);
                let energy: f64 = (0..n * dim).map(|_| complex_gaussian(&mut rng, var).norm_sqr()).sum();
                energy >= threshold
            })
        }
    };
    let empirical = hits as f64 / trials as f64;
    let slack = 3.0 * (empirical * (1.0 - empirical) / trials as f64).sqrt();
    let bound = log2_bound.exp2();
    Ok(TailBoundReport {
        params: params.clone(),
        bound,
        log2_bound,
        empirical,
        trials,
        slack,
        pass: empirical <= bound + slack,
    })
}
