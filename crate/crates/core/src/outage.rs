//! Outage probabilities, the minimized outage curve `g_inf`, the bounds
//! `l(η) ≤ u(η)` on the η-outage capacity, and the closed forms for single
//! transmit antenna channels.
//!
//! Atomic ensembles are handled by exact enumeration. Everything else uses a
//! fixed set of common random draws so the estimated curve is a deterministic
//! function of the seed, which keeps bisection honest.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    complex_gaussian, sample_states, ChannelState, FadingEnsemble, InputCovariance, NoiseSpec, RateEvaluator,
};
use crate::compound::{compound_capacity, waterfill_capacity, CompoundSet};
use crate::error::{param, Result};
use crate::hermitian::{herm_eig, project_trace_ball, psd_factor, ComplexMatrix, C64};
use crate::rng::{par_count, SeedStream};

/// Probability comparisons in the exact paths treat differences below this as ties.
pub const PROB_TOL: f64 = 1e-12;

/// Atom ensembles with more than this many matrix atoms fall back to sampling.
pub const MAX_EXACT_ATOMS: usize = 12;

/// Stream carrying the shared state draws of an outage curve.
pub const STREAM_CURVE: u64 = 0x6375_7276;
/// Stream for random optimizer restarts.
pub const STREAM_RESTARTS: u64 = 0x7273_7472;

const Z95: f64 = 1.96;

/// Settings of the inner search over `Q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub restarts: usize,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    /// Pattern step at which a restart counts as converged.
    pub min_step: f64,
    /// Widen both thresholds by the CI half width of each estimate.
    pub conservative: bool,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { restarts: 8, max_evals: 400, min_step: 1e-3, conservative: false }
    }
}

/// Everything needed to evaluate the outage curve and its bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageQuery {
    pub eta: f64,
    pub p_budget: f64,
    pub sigma2: f64,
    pub ensemble: FadingEnsemble,
    pub mc_samples: usize,
    pub rate_tol: f64,
    #[serde(default)]
    pub q_search: SearchSettings,
}

impl OutageQuery {
    pub fn new(eta: f64, p_budget: f64, sigma2: f64, ensemble: FadingEnsemble, mc_samples: usize) -> Result<Self> {
        let q = Self { eta, p_budget, sigma2, ensemble, mc_samples, rate_tol: 1e-3, q_search: SearchSettings::default() };
        q.validate()?;
        Ok(q)
    }

    pub fn with_rate_tol(mut self, rate_tol: f64) -> Self {
        self.rate_tol = rate_tol;
        self
    }

    pub fn with_search(mut self, q_search: SearchSettings) -> Self {
        self.q_search = q_search;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eta) {
            return param(format!("eta must lie in [0, 1), got {}", self.eta));
        }
        if !(self.p_budget > 0.0) || !self.p_budget.is_finite() {
            return param("p_budget must be positive");
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return param("sigma2 must be positive");
        }
        if self.mc_samples == 0 {
            return param("mc_samples must be at least 1");
        }
        if !(self.rate_tol > 0.0) {
            return param("rate_tol must be positive");
        }
        if self.q_search.restarts == 0 || self.q_search.max_evals == 0 {
            return param("search needs at least one restart and one evaluation");
        }
        self.ensemble.validate()
    }

    pub fn n_t(&self) -> usize {
        self.ensemble.dims().1
    }
}

/// Estimated probability with its 95% half width (zero for exact results).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub probability: f64,
    pub half_width: f64,
    /// Monte-Carlo sample count; zero when the value is an exact enumeration.
    pub samples: usize,
}

impl OutageEstimate {
    fn exact(probability: f64) -> Self {
        Self { probability: probability.clamp(0.0, 1.0), half_width: 0.0, samples: 0 }
    }

    fn from_count(count: usize, samples: usize) -> Self {
        let p = count as f64 / samples as f64;
        Self { probability: p, half_width: Z95 * (p * (1.0 - p) / samples as f64).sqrt(), samples }
    }

    pub fn is_exact(&self) -> bool {
        self.samples == 0
    }
}

/// `P[f(G, q) < rate]`, exact for atomic ensembles and by Monte-Carlo otherwise.
pub fn outage_prob(
    ensemble: &FadingEnsemble,
    q: &InputCovariance,
    rate: f64,
    noise: &NoiseSpec,
    mc_samples: usize,
    stream_id: u64,
) -> Result<OutageEstimate> {
    if !(rate >= 0.0) {
        return param("rate must be non-negative");
    }
    ensemble.validate()?;
    let (n_r, n_t) = ensemble.dims();
    if n_t != q.dim() || n_r != noise.n_r {
        return param("ensemble, covariance and noise dimensions disagree");
    }
    let eval = RateEvaluator::new(q, noise.sigma2);
    if let Some(atoms) = ensemble.atoms() {
        let p = atoms.iter().filter(|(g, _)| eval.eval(g) < rate).map(|(_, p)| p).sum();
        return Ok(OutageEstimate::exact(p));
    }
    if mc_samples == 0 {
        return param("mc_samples must be at least 1");
    }
    let count = par_count(mc_samples, |k| eval.eval(&ensemble.sample_state(stream_id, k as u64)) < rate);
    Ok(OutageEstimate::from_count(count, mc_samples))
}

/// One evaluation of the minimized outage curve.
#[derive(Clone, Debug, Serialize)]
pub struct GInf {
    pub value: f64,
    pub argmin_q: InputCovariance,
    pub half_width: f64,
    pub exact: bool,
    /// False when some optimizer restart ran out of budget.
    pub certified: bool,
}

/// `l(η)` and `u(η)` with flags telling how they were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutageBounds {
    pub l: f64,
    pub u: f64,
    pub exact: bool,
    pub certified: bool,
}

/// Sorted distinct values with cumulative masses `c_k = P[V ≤ v_k]`.
#[derive(Clone, Debug)]
struct StepLaw {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl StepLaw {
    fn new(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        for (v, p) in pairs {
            if values.last() == Some(&v) {
                *mass.last_mut().expect("paired") += p;
            } else {
                values.push(v);
                mass.push(p);
            }
        }
        let mut acc = 0.0;
        let cum = mass
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { values, cum }
    }

    /// `P[V < x]`.
    fn below(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    /// Value at the first `k` with `c_k ≥ level` (or `> level` when `strict`).
    fn first_reaching(&self, level: f64, strict: bool) -> f64 {
        let k = self
            .cum
            .iter()
            .position(|&c| if strict { c > level + PROB_TOL } else { c >= level - PROB_TOL })
            .unwrap_or(self.values.len() - 1);
        self.values[k]
    }

    /// `sup{R: P[V < R] < η}` and `sup{R: P[V < R] ≤ η}`.
    fn bounds(&self, eta: f64) -> (f64, f64) {
        let l = if eta <= PROB_TOL { 0.0 } else { self.first_reaching(eta, false) };
        let u = self.first_reaching(eta, true);
        (l, u.max(l))
    }
}

enum Curve {
    /// Single transmit antenna atoms: full power is optimal, law of f is discrete.
    ScalarExact { law: StepLaw, q: InputCovariance },
    /// Matrix atoms: subsets of atoms that one covariance can serve together.
    SubsetExact { atoms: Vec<(ChannelState, f64)>, cache: Mutex<HashMap<u32, (f64, InputCovariance)>> },
    /// Sampled, single transmit antenna: sorted full-power rates.
    ScalarSampled { sorted: Vec<f64>, q: InputCovariance },
    /// Sampled, several transmit antennas: common random draws for the search.
    Search { samples: Vec<ChannelState> },
}

/// The minimized outage curve `R ↦ inf_Q P[f(G,Q) < R]` of one query.
pub struct OutageCurve {
    query: OutageQuery,
    curve: Curve,
}

impl OutageCurve {
    pub fn new(query: &OutageQuery) -> Result<Self> {
        query.validate()?;
        let n_t = query.n_t();
        let full = InputCovariance::scaled_identity(n_t, query.p_budget)?;
        let curve = match query.ensemble.atoms() {
            Some(atoms) if n_t == 1 => {
                let eval = RateEvaluator::new(&full, query.sigma2);
                Curve::ScalarExact { law: StepLaw::new(atoms.iter().map(|(g, p)| (eval.eval(g), *p)).collect()), q: full }
            }
            Some(atoms) if atoms.len() <= MAX_EXACT_ATOMS => {
                Curve::SubsetExact { atoms, cache: Mutex::new(HashMap::new()) }
            }
            _ => {
                let samples = sample_states(&query.ensemble, query.mc_samples, STREAM_CURVE)?;
                if n_t == 1 {
                    let eval = RateEvaluator::new(&full, query.sigma2);
                    let mut sorted: Vec<f64> = samples.par_iter().map(|g| eval.eval(g)).collect();
                    sorted.sort_by(f64::total_cmp);
                    Curve::ScalarSampled { sorted, q: full }
                } else {
                    Curve::Search { samples }
                }
            }
        };
        Ok(Self { query: query.clone(), curve })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.curve, Curve::ScalarExact { .. } | Curve::SubsetExact { .. })
    }

    /// Compound capacity of the atoms selected by `mask`, memoized.
    fn subset_capacity(&self, atoms: &[(ChannelState, f64)], cache: &Mutex<HashMap<u32, (f64, InputCovariance)>>, mask: u32) -> Result<(f64, InputCovariance)> {
        if let Some(hit) = cache.lock().expect("cache").get(&mask) {
            return Ok(hit.clone());
        }
        let members: Vec<ChannelState> =
            (0..atoms.len()).filter(|i| mask >> i & 1 == 1).map(|i| atoms[i].0.clone()).collect();
        let solved = if members.len() == 1 {
            waterfill_capacity(&members[0], self.query.p_budget, self.query.sigma2)?
        } else {
            let sol = compound_capacity(&CompoundSet::new(members, None)?, self.query.p_budget, self.query.sigma2, 1e-9)?;
            (sol.value, sol.q_star)
        };
        cache.lock().expect("cache").insert(mask, solved.clone());
        Ok(solved)
    }

    /// Subsets in decreasing probability order, skipping the empty set.
    fn subsets_by_mass(atoms: &[(ChannelState, f64)]) -> Vec<(u32, f64)> {
        let m = atoms.len();
        let mut subsets: Vec<(u32, f64)> = (1u32..1 << m)
            .map(|mask| (mask, (0..m).filter(|i| mask >> i & 1 == 1).map(|i| atoms[i].1).sum()))
            .collect();
        subsets.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.count_ones().cmp(&b.0.count_ones())).then(a.0.cmp(&b.0)));
        subsets
    }

    /// Evaluate `g_inf(rate)`.
    pub fn g_inf(&self, rate: f64) -> Result<GInf> {
        if !(rate >= 0.0) {
            return param("rate must be non-negative");
        }
        let n_t = self.query.n_t();
        let p = self.query.p_budget;
        match &self.curve {
            Curve::ScalarExact { law, q } => Ok(GInf {
                value: law.below(rate),
                argmin_q: q.clone(),
                half_width: 0.0,
                exact: true,
                certified: true,
            }),
            Curve::ScalarSampled { sorted, q } => {
                let est = OutageEstimate::from_count(sorted.partition_point(|&v| v < rate), sorted.len());
                Ok(GInf { value: est.probability, argmin_q: q.clone(), half_width: est.half_width, exact: false, certified: true })
            }
            Curve::SubsetExact { atoms, cache } => {
                if rate <= 0.0 {
                    return Ok(exact_ginf(0.0, InputCovariance::scaled_identity(n_t, p)?));
                }
                for (mask, mass) in Self::subsets_by_mass(atoms) {
                    let (cap, q) = self.subset_capacity(atoms, cache, mask)?;
                    if cap >= rate {
                        return Ok(exact_ginf(1.0 - mass, q));
                    }
                }
                Ok(exact_ginf(1.0, InputCovariance::scaled_identity(n_t, p)?))
            }
            Curve::Search { samples } => self.search(samples, rate),
        }
    }

    /// `(l, u)` for the query's η.
    pub fn bounds(&self) -> Result<OutageBounds> {
        let eta = self.query.eta;
        match &self.curve {
            Curve::ScalarExact { law, .. } => {
                let (l, u) = law.bounds(eta);
                Ok(OutageBounds { l, u, exact: true, certified: true })
            }
            Curve::SubsetExact { atoms, cache } => {
                // g_inf(R) < η iff some subset with mass > 1-η supports R.
                let mut l = 0.0f64;
                let mut u = 0.0f64;
                for (mask, mass) in Self::subsets_by_mass(atoms) {
                    if mass < 1.0 - eta - PROB_TOL {
                        break;
                    }
                    let (cap, _) = self.subset_capacity(atoms, cache, mask)?;
                    u = u.max(cap);
                    if mass > 1.0 - eta + PROB_TOL {
                        l = l.max(cap);
                    }
                }
                Ok(OutageBounds { l, u: u.max(l), exact: true, certified: true })
            }
            _ => self.bisect_bounds(),
        }
    }

    fn bisect_bounds(&self) -> Result<OutageBounds> {
        let eta = self.query.eta;
        let conservative = self.query.q_search.conservative;
        let certified = std::cell::Cell::new(true);
        let eval = |r: f64| -> Result<GInf> {
            let g = self.g_inf(r)?;
            if !g.certified {
                certified.set(false);
            }
            Ok(g)
        };
        let hi0 = self.initial_upper()?;
        let l = bisect(
            |r| {
                let g = eval(r)?;
                let margin = if conservative { g.half_width } else { 0.0 };
                Ok(g.value < eta - margin)
            },
            hi0,
            self.query.rate_tol,
        )?;
        let u = bisect(
            |r| {
                let g = eval(r)?;
                let margin = if conservative { g.half_width } else { 0.0 };
                Ok(g.value <= eta + margin)
            },
            hi0,
            self.query.rate_tol,
        )?;
        Ok(OutageBounds { l, u: u.max(l), exact: false, certified: certified.get() })
    }

    /// 99.9th percentile of the rate at `(P/N_T)·I` over the shared draws, at least 1 bit.
    fn initial_upper(&self) -> Result<f64> {
        let full = InputCovariance::scaled_identity(self.query.n_t(), self.query.p_budget)?;
        let rates: Vec<f64> = match &self.curve {
            Curve::ScalarSampled { sorted, .. } => sorted.clone(),
            Curve::Search { samples } => {
                let eval = RateEvaluator::new(&full, self.query.sigma2);
                let mut r: Vec<f64> = samples.par_iter().map(|g| eval.eval(g)).collect();
                r.sort_by(f64::total_cmp);
                r
            }
            _ => vec![1.0],
        };
        let idx = ((rates.len() as f64 * 0.999).ceil() as usize).clamp(1, rates.len()) - 1;
        Ok(rates[idx].max(1.0))
    }

    fn search(&self, samples: &[ChannelState], rate: f64) -> Result<GInf> {
        let n_t = self.query.n_t();
        let p = self.query.p_budget;
        let sigma2 = self.query.sigma2;
        let m = samples.len();
        if rate <= 0.0 {
            return Ok(GInf {
                value: 0.0,
                argmin_q: InputCovariance::scaled_identity(n_t, p)?,
                half_width: 0.0,
                exact: false,
                certified: true,
            });
        }
        let settings = self.query.q_search;
        let objective = |l: &[f64]| -> (Score, ComplexMatrix) {
            let q = cov_from_params(l, n_t, p);
            let cov = InputCovariance::new(q.clone(), p).expect("scaled into the ball");
            let eval = RateEvaluator::new(&cov, sigma2);
            let rates: Vec<f64> = samples.par_iter().map(|g| eval.eval(g)).collect();
            let mut count = 0usize;
            let mut shortfall = 0.0;
            for r in rates {
                if r < rate {
                    count += 1;
                    shortfall += rate - r;
                }
            }
            (Score { count, shortfall: shortfall / m as f64 }, q)
        };

        let mut best: Option<(Score, ComplexMatrix)> = None;
        let mut certified = true;
        for start in self.starts(samples, settings.restarts)? {
            let (score, q, converged) = pattern_search(start, &objective, settings);
            certified &= converged;
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, q));
            }
            if best.as_ref().is_some_and(|(b, _)| b.count == 0) {
                break;
            }
        }
        let (score, q) = best.expect("at least one restart");
        let est = OutageEstimate::from_count(score.count, m);
        Ok(GInf {
            value: est.probability,
            argmin_q: InputCovariance::new(q, p)?,
            half_width: est.half_width,
            exact: false,
            certified,
        })
    }

    /// Restart points as flattened `L` factors: identity, rank-1 along each
    /// eigenvector of the sample mean of `gᴴg`, water-filling for that mean,
    /// then random factors.
    fn starts(&self, samples: &[ChannelState], restarts: usize) -> Result<Vec<Vec<f64>>> {
        let n_t = self.query.n_t();
        let mut gram = ComplexMatrix::zeros(n_t, n_t);
        for g in samples {
            gram = &gram + &(&g.gain().conj_transpose() * g.gain());
        }
        let gram = gram.scale(1.0 / samples.len() as f64).hermitian_part();
        let eig = herm_eig(&gram)?;

        let mut starts = vec![flatten(&ComplexMatrix::identity(n_t))];
        for k in 0..n_t {
            let mut l = ComplexMatrix::zeros(n_t, n_t);
            for i in 0..n_t {
                l[(i, 0)] = eig.basis[(i, k)];
            }
            starts.push(flatten(&l));
        }
        let mean_state = ChannelState::new(psd_factor(&gram).conj_transpose())?;
        let (_, wf) = waterfill_capacity(&mean_state, self.query.p_budget, self.query.sigma2)?;
        starts.push(flatten(&psd_factor(wf.matrix())));
        let seeds = SeedStream::new(self.query.ensemble.master_seed(), STREAM_RESTARTS);
        let mut r = 0u64;
        while starts.len() < restarts {
            let mut rng = seeds.rng_at(r);
            r += 1;
            let data = (0..n_t * n_t).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            starts.push(flatten(&ComplexMatrix::new(n_t, n_t, data)?));
        }
        starts.truncate(restarts);
        Ok(starts)
    }
}

fn exact_ginf(value: f64, q: InputCovariance) -> GInf {
    GInf { value: value.clamp(0.0, 1.0), argmin_q: q, half_width: 0.0, exact: true, certified: true }
}

/// Outage count first, then mean shortfall below the target rate.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Score {
    count: usize,
    shortfall: f64,
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.count.cmp(&other.count).then(self.shortfall.total_cmp(&other.shortfall)))
    }
}

fn flatten(l: &ComplexMatrix) -> Vec<f64> {
    l.entries().iter().flat_map(|z| [z.re, z.im]).collect()
}

/// `P·LLᴴ/tr(LLᴴ)`: full power is never worse since `f` is monotone in `Q`.
fn cov_from_params(x: &[f64], n_t: usize, p: f64) -> ComplexMatrix {
    let data: Vec<C64> = x.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
    let l = ComplexMatrix::new(n_t, n_t, data).expect("parameter length");
    let ll = (&l * &l.conj_transpose()).hermitian_part();
    let tr = ll.trace().re;
    let scaled = if tr > 1e-300 { ll.scale(p / tr) } else { ComplexMatrix::identity(n_t).scale(p / n_t as f64) };
    project_trace_ball(&scaled, p).expect("positive budget").into_matrix()
}

/// Compass search; returns the best score, its covariance and whether the
/// step shrank below `min_step` within the evaluation budget.
fn pattern_search(
    start: Vec<f64>,
    objective: &impl Fn(&[f64]) -> (Score, ComplexMatrix),
    settings: SearchSettings,
) -> (Score, ComplexMatrix, bool) {
    let mut x = start;
    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    let mut step = 0.5 * scale;
    let (mut best, mut best_q) = objective(&x);
    let mut evals = 1;
    while step >= settings.min_step * scale {
        if best.count == 0 {
            return (best, best_q, true);
        }
        let mut improved = false;
        'coords: for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evals >= settings.max_evals {
                    return (best, best_q, false);
                }
                let mut y = x.clone();
                y[i] += dir * step;
                let (s, q) = objective(&y);
                evals += 1;
                if s < best {
                    best = s;
                    best_q = q;
                    x = y;
                    improved = true;
                    continue 'coords;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, best_q, true)
}

/// Largest `R` in `[0, ∞)` where the monotone predicate holds, to `tol`.
fn bisect(mut pred: impl FnMut(f64) -> Result<bool>, hi0: f64, tol: f64) -> Result<f64> {
    if !pred(0.0)? {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = hi0;
    let mut doublings = 0;
    while pred(hi)? {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Ok(hi);
        }
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `g_inf(rate)` for a query, building the shared draws on the fly.
pub fn g_inf(rate: f64, query: &OutageQuery) -> Result<GInf> {
    OutageCurve::new(query)?.g_inf(rate)
}

/// `(l(η), u(η))` for a query.
pub fn outage_bounds(query: &OutageQuery) -> Result<OutageBounds> {
    OutageCurve::new(query)?.bounds()
}

/// η-outage capacity for one transmit antenna: `u(η)` of the full-power rate law.
pub fn simo_outage_capacity(query: &OutageQuery) -> Result<f64> {
    query.validate()?;
    if query.n_t() != 1 {
        return param("simo_outage_capacity needs states with one transmit antenna");
    }
    let full = InputCovariance::scaled_identity(1, query.p_budget)?;
    let eval = RateEvaluator::new(&full, query.sigma2);
    let law = match query.ensemble.atoms() {
        Some(atoms) => StepLaw::new(atoms.iter().map(|(g, p)| (eval.eval(g), *p)).collect()),
        None => {
            let samples = sample_states(&query.ensemble, query.mc_samples, STREAM_CURVE)?;
            let w = 1.0 / samples.len() as f64;
            StepLaw::new(samples.par_iter().map(|g| (eval.eval(g), w)).collect())
        }
    };
    Ok(law.first_reaching(query.eta, true))
}

/// Law of the scalar power gain `|G|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ScalarLaw {
    Exponential { mean: f64 },
    Atoms { atoms: Vec<(f64, f64)> },
    Samples { values: Vec<f64> },
}

impl ScalarLaw {
    /// `γ₀ = sup{γ : P[|G|² ≥ γ] ≥ 1 − η}`.
    pub fn gamma0(&self, eta: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&eta) {
            return param("eta must lie in [0, 1)");
        }
        match self {
            ScalarLaw::Exponential { mean } => {
                if !(*mean > 0.0) {
                    return param("exponential mean must be positive");
                }
                Ok(-mean * (-eta).ln_1p())
            }
            ScalarLaw::Atoms { atoms } => {
                if atoms.is_empty() || atoms.iter().any(|&(v, p)| !(v >= 0.0) || !(p >= 0.0)) {
                    return param("atoms need non-negative values and probabilities");
                }
                if (atoms.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() > 1e-9 {
                    return param("atom probabilities must sum to 1");
                }
                Ok(StepLaw::new(atoms.clone()).first_reaching(eta, true))
            }
            ScalarLaw::Samples { values } => {
                if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
                    return param("samples must be non-negative and non-empty");
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                // first k with (k+1)/M > η, in integer arithmetic
                let m = sorted.len();
                let k = (0..m).find(|&k| (k + 1) as f64 > eta * m as f64 + PROB_TOL).unwrap_or(m - 1);
                Ok(sorted[k])
            }
        }
    }
}

/// `log₂(1 + P·γ₀/σ²)`.
pub fn siso_outage_capacity(law: &ScalarLaw, eta: f64, p_budget: f64, sigma2: f64) -> Result<f64> {
    if !(p_budget > 0.0) || !(sigma2 > 0.0) {
        return param("p_budget and sigma2 must be positive");
    }
    Ok((p_budget * law.gamma0(eta)? / sigma2).ln_1p() / LN_2)
}
