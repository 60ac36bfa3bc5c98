//! Compound-channel max-min capacity `max_{Q∈Q_P} min_{g∈G} f(g,Q)` for
//! finite state sets, the water-filling singleton oracle, ν-net covering and
//! the norm-ball degradation map.
//!
//! The solver runs projected supergradient ascent on the concave function
//! `Q ↦ min_g f(g,Q)` and certifies its answer with a Frank–Wolfe style upper
//! bound: for any weights `w` on the simplex and any feasible `Q̄`,
//!
//! ```text
//! max_Q min_g f_g(Q) ≤ Σ_g w_g (f_g(Q̄) − ⟨∇f_g(Q̄), Q̄⟩) + P · λ_max⁺(Σ_g w_g ∇f_g(Q̄))
//! ```
//!
//! because each `f_g` is concave and the linear maximization over `Q_P` puts
//! all power on the top eigenvector.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelState, InputCovariance};
use crate::error::{param, Result};
use crate::hermitian::{
    herm_eig, hermitian_eigenvalues, hpd_inverse, logdet_id_plus_raw, project_trace_ball, ComplexMatrix,
    HermEigen,
};

/// States whose rate is within this of the minimum count as active.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Shrink factor applied to the returned covariance so that `tr Q < P` strictly.
pub const STRICT_TRACE_SHRINK: f64 = 1.0 - 1e-9;

/// Finite compound state set `G_a ⊆ B_a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompoundSet {
    states: Vec<ChannelState>,
    norm_bound: Option<f64>,
}

impl CompoundSet {
    pub fn new(states: Vec<ChannelState>, norm_bound: Option<f64>) -> Result<Self> {
        let Some(first) = states.first() else {
            return param("compound set must contain at least one state");
        };
        let shape = first.gain().shape();
        if states.iter().any(|s| s.gain().shape() != shape) {
            return param("all states of a compound set must share one shape");
        }
        if let Some(a) = norm_bound {
            if !(a > 0.0) {
                return param("norm bound must be positive");
            }
            if let Some((i, s)) = states.iter().enumerate().find(|(_, s)| s.norm() > a + 1e-9) {
                return param(format!("state {i} has operator norm {} > {a}", s.norm()));
            }
        }
        Ok(Self { states, norm_bound })
    }

    pub fn states(&self) -> &[ChannelState] {
        &self.states
    }

    pub fn norm_bound(&self) -> Option<f64> {
        self.norm_bound
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_t(&self) -> usize {
        self.states[0].n_t()
    }

    pub fn n_r(&self) -> usize {
        self.states[0].n_r()
    }
}

/// Result of [`compound_capacity`].
#[derive(Clone, Debug, Serialize)]
pub struct MaxMinSolution {
    /// `min_g f(g, q_star)` in bits.
    pub value: f64,
    pub q_star: InputCovariance,
    /// Indices of states attaining the minimum within [`ACTIVE_TOL`].
    pub active_states: Vec<usize>,
    pub iterations: usize,
    /// Certified upper bound minus `value`.
    pub certified_gap: f64,
    /// `certified_gap ≤ tol` was reached before the iteration cap.
    pub certified: bool,
}

/// Solver knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompoundSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Recompute the certificate every this many iterations.
    pub certify_every: usize,
}

impl CompoundSettings {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl Default for CompoundSettings {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 20_000, certify_every: 5 }
    }
}

fn rate(g: &ChannelState, q: &ComplexMatrix, sigma2: f64) -> f64 {
    let gq = g.gain() * q;
    let a = (&gq * &g.gain().conj_transpose()).scale(1.0 / sigma2);
    logdet_id_plus_raw(&a.hermitian_part())
}

/// Gradient of `f(g, ·)` at `q`: `(1/ln2)·gᴴ(σ²I + g q gᴴ)⁻¹ g`.
pub fn supergradient(g: &ChannelState, q: &InputCovariance, sigma2: f64) -> Result<ComplexMatrix> {
    if g.n_t() != q.dim() {
        return param("state and covariance shapes differ");
    }
    Ok(gradient(g, q.matrix(), sigma2))
}

fn gradient(g: &ChannelState, q: &ComplexMatrix, sigma2: f64) -> ComplexMatrix {
    let gh = g.gain().conj_transpose();
    let theta = &(&(g.gain() * q) * &gh) + &ComplexMatrix::identity(g.n_r()).scale(sigma2);
    let inv = hpd_inverse(&theta.hermitian_part()).expect("σ²I + gQgᴴ is positive definite");
    (&(&gh * &inv) * g.gain()).scale(1.0 / LN_2).hermitian_part()
}

/// `min_g f(g, q)` over the set.
pub fn min_rate(set: &CompoundSet, q: &InputCovariance, sigma2: f64) -> f64 {
    set.states.iter().map(|g| rate(g, q.matrix(), sigma2)).fold(f64::INFINITY, f64::min)
}

/// Classical water-filling over the eigenmodes of `gᴴg`.
pub fn waterfill_capacity(g: &ChannelState, p_budget: f64, sigma2: f64) -> Result<(f64, InputCovariance)> {
    if !(p_budget > 0.0) || !(sigma2 > 0.0) {
        return param("power budget and noise variance must be positive");
    }
    let n_t = g.n_t();
    let gram = &g.gain().conj_transpose() * g.gain();
    let eig = herm_eig(&gram.hermitian_part())?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let modes: Vec<f64> = eig.values.iter().copied().take_while(|&l| l > 1e-14 * top.max(f64::MIN_POSITIVE)).collect();
    if modes.is_empty() || top <= 0.0 {
        return Ok((0.0, InputCovariance::scaled_identity(n_t, p_budget)?));
    }
    let floors: Vec<f64> = modes.iter().map(|&l| sigma2 / l).collect();
    let mut active = modes.len();
    let level = loop {
        let mu = (p_budget + floors[..active].iter().sum::<f64>()) / active as f64;
        if mu > floors[active - 1] || active == 1 {
            break mu;
        }
        active -= 1;
    };
    let mut powers = vec![0.0; n_t];
    for k in 0..active {
        powers[k] = (level - floors[k]).max(0.0);
    }
    let capacity = (0..active).map(|k| (modes[k] * powers[k] / sigma2).ln_1p()).sum::<f64>() / LN_2;
    let q = HermEigen { values: powers, basis: eig.basis }.reconstruct();
    let q = project_trace_ball(&q, p_budget)?;
    Ok((capacity, InputCovariance::from_psd(q, p_budget)?))
}

struct Linearization {
    rates: Vec<f64>,
    grads: Vec<ComplexMatrix>,
}

fn linearize(set: &CompoundSet, q: &ComplexMatrix, sigma2: f64, with_grads: bool) -> Linearization {
    let rows: Vec<(f64, Option<ComplexMatrix>)> = set
        .states
        .par_iter()
        .map(|g| (rate(g, q, sigma2), with_grads.then(|| gradient(g, q, sigma2))))
        .collect();
    let mut rates = Vec::with_capacity(rows.len());
    let mut grads = Vec::with_capacity(rows.len());
    for (r, gr) in rows {
        rates.push(r);
        if let Some(gr) = gr {
            grads.push(gr);
        }
    }
    Linearization { rates, grads }
}

fn weighted(grads: &[ComplexMatrix], idx: &[usize], w: &[f64]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(grads[0].rows(), grads[0].cols());
    for (&i, &wi) in idx.iter().zip(w) {
        if wi != 0.0 {
            acc = &acc + &grads[i].scale(wi);
        }
    }
    acc
}

/// Upper bound on the max-min value from the linearization at `q`; `hint`
/// is an extra weight vector over all states tried as a dual candidate.
fn certificate(lin: &Linearization, q: &ComplexMatrix, p_budget: f64, hint: Option<&[f64]>) -> f64 {
    let m = lin.rates.len();
    let offsets: Vec<f64> = (0..m).map(|g| lin.rates[g] - lin.grads[g].trace_product_re(q)).collect();
    let bound_at = |idx: &[usize], w: &[f64]| -> f64 {
        let lin_part: f64 = idx.iter().zip(w).map(|(&i, &wi)| wi * offsets[i]).sum();
        let top = hermitian_eigenvalues(&weighted(&lin.grads, idx, w)).first().copied().unwrap_or(0.0);
        lin_part + p_budget * top.max(0.0)
    };
    let mut best = f64::INFINITY;
    for g in 0..m {
        best = best.min(bound_at(&[g], &[1.0]));
    }
    if m == 1 {
        return best;
    }
    if let Some(w) = hint {
        let all: Vec<usize> = (0..m).collect();
        best = best.min(bound_at(&all, w));
    }
    // Candidate support: the states closest to the minimum.
    let min_rate = lin.rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| lin.rates[a].total_cmp(&lin.rates[b]));
    let spread = (best - min_rate).max(1e-9);
    let support: Vec<usize> =
        order.iter().copied().take_while(|&i| lin.rates[i] <= min_rate + 10.0 * spread).take(16).collect();
    if support.len() < 2 {
        return best;
    }
    // Exact line search for every pair among the first few candidates.
    let few = support.len().min(6);
    for a in 0..few {
        for b in a + 1..few {
            let idx = [support[a], support[b]];
            let f = |t: f64| bound_at(&idx, &[t, 1.0 - t]);
            let (mut lo, mut hi) = (0.0, 1.0);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = hi - r * (hi - lo);
            let mut x2 = lo + r * (hi - lo);
            let (mut f1, mut f2) = (f(x1), f(x2));
            for _ in 0..60 {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - r * (hi - lo);
                    f1 = f(x1);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + r * (hi - lo);
                    f2 = f(x2);
                }
            }
            best = best.min(f1.min(f2));
        }
    }
    if support.len() > 2 {
        // Entropic mirror descent over the candidate support.
        let k = support.len();
        let mut w = vec![1.0 / k as f64; k];
        for t in 1..=300 {
            let acc = weighted(&lin.grads, &support, &w);
            let eig = herm_eig(&acc).expect("Hermitian");
            let lam = eig.values[0];
            let v: Vec<_> = (0..acc.rows()).map(|i| eig.basis[(i, 0)]).collect();
            let lin_part: f64 = support.iter().zip(&w).map(|(&i, &wi)| wi * offsets[i]).sum();
            best = best.min(lin_part + p_budget * lam.max(0.0));
            let grad: Vec<f64> = support
                .iter()
                .map(|&i| {
                    let quad = if lam > 0.0 {
                        let gv = lin.grads[i].mul_vec(&v);
                        v.iter().zip(&gv).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
                    } else {
                        0.0
                    };
                    offsets[i] + p_budget * quad
                })
                .collect();
            let scale = grad.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-12);
            let eta = 2.0 / (scale * (t as f64).sqrt());
            let gmin = grad.iter().copied().fold(f64::INFINITY, f64::min);
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi *= (-eta * (gi - gmin)).exp();
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
        }
    }
    best
}

/// Max-min capacity with default settings and the given certificate tolerance.
pub fn compound_capacity(set: &CompoundSet, p_budget: f64, sigma2: f64, tol: f64) -> Result<MaxMinSolution> {
    compound_capacity_with(set, p_budget, sigma2, CompoundSettings::with_tol(tol))
}

/// Softmin value `−τ·ln Σ exp(−f_g/τ)` and its normalized weights.
fn softmin(rates: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = rates.iter().map(|r| (-(r - m) / tau).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    (m - tau * z.ln(), w)
}

/// Projected supergradient ascent on `Q ↦ min_g f(g,Q)` over `Q_P`.
///
/// The ascent direction is a convex combination of the state supergradients
/// with softmin weights at temperature `τ`; as `τ → 0` the weights concentrate
/// on the active states (equal weights for exact ties). Steps use Armijo
/// backtracking on the softmin value, and `τ` shrinks once the Frank–Wolfe gap
/// of the current stage drops below it. The same weights serve as a dual
/// candidate for the certified upper bound. The best point found is shrunk by
/// [`STRICT_TRACE_SHRINK`] before it is returned.
pub fn compound_capacity_with(
    set: &CompoundSet,
    p_budget: f64,
    sigma2: f64,
    settings: CompoundSettings,
) -> Result<MaxMinSolution> {
    if !(p_budget > 0.0) || !(sigma2 > 0.0) {
        return param("power budget and noise variance must be positive");
    }
    if !(settings.tol > 0.0) || settings.max_iters == 0 {
        return param("tolerance and iteration cap must be positive");
    }
    let n_t = set.n_t();
    let mut q = ComplexMatrix::identity(n_t).scale(p_budget / n_t as f64);
    let mut best_q = q.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let tau_floor = settings.tol * 1e-2;
    let mut tau = if set.len() == 1 { tau_floor } else { 0.1 };
    let mut step = 0.0;
    let mut iterations = 0;

    for k in 1..=settings.max_iters {
        iterations = k;
        let lin = linearize(set, &q, sigma2, true);
        let m = lin.rates.iter().copied().fold(f64::INFINITY, f64::min);
        let (smooth, w) = softmin(&lin.rates, tau);
        let all: Vec<usize> = (0..lin.rates.len()).collect();
        let s = weighted(&lin.grads, &all, &w);
        let s_norm = s.frobenius_norm();
        if m > best_val {
            best_val = m;
            best_q = q.clone();
        }
        if s_norm == 0.0 {
            // f is constant in Q (all-zero state): any feasible Q is optimal.
            upper = upper.min(m);
            break;
        }
        let top = hermitian_eigenvalues(&s)[0].max(0.0);
        let fw_gap = (p_budget * top - s.trace_product_re(&q)).max(0.0);
        if k == 1 || k % settings.certify_every == 0 || fw_gap <= tau {
            upper = upper.min(certificate(&lin, &q, p_budget, Some(&w)));
        }
        if upper - best_val <= settings.tol {
            break;
        }
        if fw_gap <= tau && tau > tau_floor {
            tau = (tau * 0.2).max(tau_floor);
            continue;
        }
        if step == 0.0 {
            step = p_budget / s_norm;
        }
        let mut t = 2.0 * step;
        let mut moved = false;
        for _ in 0..50 {
            let cand = project_trace_ball(&(&q + &s.scale(t)), p_budget)?.into_matrix();
            let rates: Vec<f64> = set.states.iter().map(|g| rate(g, &cand, sigma2)).collect();
            let ascent = s.trace_product_re(&(&cand - &q));
            if softmin(&rates, tau).0 >= smooth + 1e-4 * ascent && ascent > 0.0 {
                q = cand;
                step = t;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            if tau > tau_floor {
                tau = (tau * 0.2).max(tau_floor);
                step = 0.0;
            } else {
                break;
            }
        }
    }

    let q_star = InputCovariance::from_psd(project_trace_ball(&best_q, p_budget)?, p_budget)?
        .shrunk(STRICT_TRACE_SHRINK);
    let final_lin = linearize(set, q_star.matrix(), sigma2, true);
    let value = final_lin.rates.iter().copied().fold(f64::INFINITY, f64::min);
    let (_, w) = softmin(&final_lin.rates, tau);
    upper = upper.min(certificate(&final_lin, q_star.matrix(), p_budget, Some(&w)));
    let certified_gap = (upper - value).max(0.0);
    let active_states = (0..final_lin.rates.len()).filter(|&i| final_lin.rates[i] <= value + ACTIVE_TOL).collect();
    Ok(MaxMinSolution {
        value,
        q_star,
        active_states,
        iterations,
        certified_gap,
        certified: certified_gap <= settings.tol,
    })
}

/// Indices of greedy farthest-point centers covering `states` within operator-norm `nu`.
pub fn cover_net_indices(states: &[ChannelState], nu: f64) -> Result<Vec<usize>> {
    if !(nu > 0.0) {
        return param("covering radius must be positive");
    }
    if states.is_empty() {
        return Ok(Vec::new());
    }
    let shape = states[0].gain().shape();
    if states.iter().any(|s| s.gain().shape() != shape) {
        return param("states must share one shape");
    }
    let dist = |a: usize, b: usize| (states[a].gain() - states[b].gain()).operator_norm();
    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = (0..states.len()).into_par_iter().map(|i| dist(i, 0)).collect();
    loop {
        let (far, &d) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        if d <= nu {
            break;
        }
        centers.push(far);
        let fresh: Vec<f64> = (0..states.len()).into_par_iter().map(|i| dist(i, far)).collect();
        for (n, f) in nearest.iter_mut().zip(fresh) {
            *n = n.min(f);
        }
    }
    Ok(centers)
}

/// Finite ν-net of the given states (a subset of them).
pub fn cover_net(states: &[ChannelState], nu: f64) -> Result<CompoundSet> {
    let idx = cover_net_indices(states, nu)?;
    if idx.is_empty() {
        return param("cannot cover an empty state list");
    }
    CompoundSet::new(idx.into_iter().map(|i| states[i].clone()).collect(), None)
}

/// Scale `g` into the operator-norm ball of radius `a`: `(a/‖g‖)·g` if `‖g‖ > a`.
pub fn degrade_scale(g: &ChannelState, a: f64) -> Result<ChannelState> {
    if !(a > 0.0) {
        return param("norm bound must be positive");
    }
    let norm = g.norm();
    if norm <= a {
        return Ok(g.clone());
    }
    ChannelState::new(g.gain().scale(a / norm))
}
