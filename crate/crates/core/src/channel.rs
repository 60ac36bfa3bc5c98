//! MIMO slow-fading channel model: states, fading laws, the Gaussian rate
//! functional `f(g, Q) = log₂ det(I + σ⁻² g Q gᴴ)`, the memoryless map
//! `z = g t + ξ`, and the Gaussian information density.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, precondition, Error, Result};
use crate::hermitian::{
    hermitian_eigenvalues, hpd_inverse, logdet_id_plus_raw, psd_factor, ComplexMatrix, HermitianPsd, C64,
};
use crate::rng::SeedStream;

/// One realization `g ∈ C^{N_R×N_T}` of the fading gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelState {
    gain: ComplexMatrix,
}

impl ChannelState {
    pub fn new(gain: ComplexMatrix) -> Result<Self> {
        if gain.rows() == 0 || gain.cols() == 0 {
            return param("channel gain must have at least one row and one column");
        }
        Ok(Self { gain })
    }

    /// 1x1 state with gain `g`.
    pub fn scalar(g: C64) -> Self {
        Self { gain: ComplexMatrix::new(1, 1, vec![g]).expect("1x1") }
    }

    pub fn gain(&self) -> &ComplexMatrix {
        &self.gain
    }

    pub fn n_r(&self) -> usize {
        self.gain.rows()
    }

    pub fn n_t(&self) -> usize {
        self.gain.cols()
    }

    /// Operator (spectral) norm `‖g‖`.
    pub fn norm(&self) -> f64 {
        self.gain.operator_norm()
    }

    /// Squared Frobenius norm, `|g|²` for scalar states.
    pub fn power_gain(&self) -> f64 {
        self.gain.frobenius_norm().powi(2)
    }
}

/// Input covariance `Q ∈ Q_P`: Hermitian PSD with `tr Q ≤ P`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputCovariance {
    q: HermitianPsd,
    p_budget: f64,
}

impl InputCovariance {
    pub fn new(q: ComplexMatrix, p_budget: f64) -> Result<Self> {
        Self::from_psd(HermitianPsd::new(q)?, p_budget)
    }

    pub fn from_psd(q: HermitianPsd, p_budget: f64) -> Result<Self> {
        if !(p_budget > 0.0) || !p_budget.is_finite() {
            return param(format!("power budget must be positive, got {p_budget}"));
        }
        if q.trace() > p_budget + 1e-9 {
            return param(format!("trace {} exceeds power budget {p_budget}", q.trace()));
        }
        Ok(Self { q, p_budget })
    }

    /// `(P/N_T)·I`.
    pub fn scaled_identity(n_t: usize, p_budget: f64) -> Result<Self> {
        if n_t == 0 {
            return param("N_T must be at least 1");
        }
        let q = ComplexMatrix::identity(n_t).scale(p_budget / n_t as f64);
        Self::new(q, p_budget)
    }

    /// Scalar full-power input `q = P` for single-antenna transmitters.
    pub fn full_power_scalar(p_budget: f64) -> Result<Self> {
        Self::scaled_identity(1, p_budget)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.q.matrix()
    }

    pub fn psd(&self) -> &HermitianPsd {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn trace(&self) -> f64 {
        self.q.trace()
    }

    pub fn p_budget(&self) -> f64 {
        self.p_budget
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(self.matrix()).last().copied().unwrap_or(0.0)
    }

    /// Non-singular regularization `(1-ε)Q + (εP/N_T)·I`.
    pub fn regularized(&self, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return param("regularization weight must lie in [0, 1]");
        }
        let n = self.dim();
        let mixed = &self.matrix().scale(1.0 - eps)
            + &ComplexMatrix::identity(n).scale(eps * self.p_budget / n as f64);
        Self::new(mixed, self.p_budget)
    }

    /// `factor · Q` for `0 < factor ≤ 1`.
    pub fn shrunk(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor <= 1.0);
        Self { q: HermitianPsd::trusted(self.matrix().scale(factor)), p_budget: self.p_budget }
    }
}

/// Additive noise `ξᵢ ~ N_C(0, σ² I_{N_R})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma2: f64,
    pub n_r: usize,
    /// Skip the noise draw in [`transmit`] (`z = g t` exactly).
    #[serde(default)]
    pub noiseless: bool,
}

impl NoiseSpec {
    pub fn new(sigma2: f64, n_r: usize) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return param(format!("noise variance must be positive, got {sigma2}"));
        }
        if n_r == 0 {
            return param("N_R must be at least 1");
        }
        Ok(Self { sigma2, n_r, noiseless: false })
    }

    pub fn noiseless(mut self) -> Self {
        self.noiseless = true;
        self
    }
}

/// One atom of a matrix-valued fading law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixAtom {
    pub gain: ChannelState,
    pub prob: f64,
}

/// The law of the random gain `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Point mass at `gain`.
    Deterministic { gain: ChannelState },
    /// i.i.d. circularly-symmetric complex Gaussian entries of the given variance.
    RayleighIid {
        n_r: usize,
        n_t: usize,
        #[serde(default = "unit")]
        variance: f64,
    },
    /// Scalar law given through the atoms `(|g|², probability)` of `|G|²`.
    ScalarAtoms { atoms: Vec<(f64, f64)> },
    /// Finite matrix-valued law.
    MatrixAtoms { atoms: Vec<MatrixAtom> },
}

fn unit() -> f64 {
    1.0
}

/// A fading law together with the master seed of its sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadingEnsemble {
    #[serde(flatten)]
    kind: EnsembleKind,
    #[serde(default)]
    master_seed: u64,
}

impl FadingEnsemble {
    pub fn new(kind: EnsembleKind, master_seed: u64) -> Result<Self> {
        let ens = Self { kind, master_seed };
        ens.validate()?;
        Ok(ens)
    }

    pub fn deterministic(gain: ChannelState) -> Self {
        Self { kind: EnsembleKind::Deterministic { gain }, master_seed: 0 }
    }

    pub fn rayleigh(n_r: usize, n_t: usize, variance: f64, master_seed: u64) -> Result<Self> {
        Self::new(EnsembleKind::RayleighIid { n_r, n_t, variance }, master_seed)
    }

    pub fn scalar_atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(EnsembleKind::ScalarAtoms { atoms }, 0)
    }

    pub fn matrix_atoms(atoms: Vec<MatrixAtom>) -> Result<Self> {
        Self::new(EnsembleKind::MatrixAtoms { atoms }, 0)
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn check_pmf(probs: impl Iterator<Item = f64>) -> Result<()> {
            let mut total = 0.0;
            let mut count = 0;
            for p in probs {
                if !(p >= 0.0) || !p.is_finite() {
                    return param(format!("atom probability {p} is not a probability"));
                }
                total += p;
                count += 1;
            }
            if count == 0 {
                return param("atom list is empty");
            }
            if (total - 1.0).abs() > 1e-12 {
                return param(format!("atom probabilities sum to {total}, not 1"));
            }
            Ok(())
        }
        match &self.kind {
            EnsembleKind::Deterministic { .. } => Ok(()),
            EnsembleKind::RayleighIid { n_r, n_t, variance } => {
                if *n_r == 0 || *n_t == 0 {
                    return param("Rayleigh ensemble needs N_R, N_T ≥ 1");
                }
                if !(*variance > 0.0) || !variance.is_finite() {
                    return param("Rayleigh per-entry variance must be positive");
                }
                Ok(())
            }
            EnsembleKind::ScalarAtoms { atoms } => {
                if atoms.iter().any(|&(v, _)| !(v >= 0.0) || !v.is_finite()) {
                    return param("scalar atoms are values of |G|² and must be ≥ 0");
                }
                check_pmf(atoms.iter().map(|a| a.1))
            }
            EnsembleKind::MatrixAtoms { atoms } => {
                check_pmf(atoms.iter().map(|a| a.prob))?;
                let shape = atoms[0].gain.gain().shape();
                if atoms.iter().any(|a| a.gain.gain().shape() != shape) {
                    return param("matrix atoms must share one shape");
                }
                Ok(())
            }
        }
    }

    /// `(N_R, N_T)`.
    pub fn dims(&self) -> (usize, usize) {
        match &self.kind {
            EnsembleKind::Deterministic { gain } => (gain.n_r(), gain.n_t()),
            EnsembleKind::RayleighIid { n_r, n_t, .. } => (*n_r, *n_t),
            EnsembleKind::ScalarAtoms { .. } => (1, 1),
            EnsembleKind::MatrixAtoms { atoms } => (atoms[0].gain.n_r(), atoms[0].gain.n_t()),
        }
    }

    /// The law as a finite list of `(state, probability)`, when it is atomic.
    pub fn atoms(&self) -> Option<Vec<(ChannelState, f64)>> {
        match &self.kind {
            EnsembleKind::Deterministic { gain } => Some(vec![(gain.clone(), 1.0)]),
            EnsembleKind::RayleighIid { .. } => None,
            EnsembleKind::ScalarAtoms { atoms } => Some(
                atoms.iter().map(|&(v, p)| (ChannelState::scalar(C64::new(v.sqrt(), 0.0)), p)).collect(),
            ),
            EnsembleKind::MatrixAtoms { atoms } => {
                Some(atoms.iter().map(|a| (a.gain.clone(), a.prob)).collect())
            }
        }
    }

    /// Draw number `index` of stream `stream_id`.
    pub fn sample_state(&self, stream_id: u64, index: u64) -> ChannelState {
        let mut rng = SeedStream::new(self.master_seed, stream_id).rng_at(index);
        self.sample_with(&mut rng)
    }

    pub(crate) fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        match &self.kind {
            EnsembleKind::Deterministic { gain } => gain.clone(),
            EnsembleKind::RayleighIid { n_r, n_t, variance } => {
                let data = (0..n_r * n_t).map(|_| complex_gaussian(rng, *variance)).collect();
                ChannelState { gain: ComplexMatrix::new(*n_r, *n_t, data).expect("shape") }
            }
            EnsembleKind::ScalarAtoms { atoms } => {
                let k = pick_atom(rng, atoms.iter().map(|a| a.1));
                ChannelState::scalar(C64::new(atoms[k].0.sqrt(), 0.0))
            }
            EnsembleKind::MatrixAtoms { atoms } => {
                let k = pick_atom(rng, atoms.iter().map(|a| a.prob));
                atoms[k].gain.clone()
            }
        }
    }
}

fn pick_atom<R: Rng + ?Sized>(rng: &mut R, probs: impl ExactSizeIterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let last = probs.len() - 1;
    let mut cum = 0.0;
    for (k, p) in probs.enumerate() {
        cum += p;
        if u < cum {
            return k;
        }
    }
    last
}

/// Circularly-symmetric complex Gaussian: real and imaginary parts i.i.d.
/// `N(0, variance/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// `count` reproducible draws from `ensemble`; draw `k` depends only on
/// `(master_seed, stream_id, k)`.
pub fn sample_states(ensemble: &FadingEnsemble, count: usize, stream_id: u64) -> Result<Vec<ChannelState>> {
    if count == 0 {
        return param("sample count must be at least 1");
    }
    ensemble.validate()?;
    Ok((0..count as u64).into_par_iter().map(|k| ensemble.sample_state(stream_id, k)).collect())
}

fn check_shapes(g: &ChannelState, q: &InputCovariance, noise: &NoiseSpec) -> Result<()> {
    if g.n_t() != q.dim() {
        return param(format!("gain has N_T = {} but covariance is {}x{}", g.n_t(), q.dim(), q.dim()));
    }
    if g.n_r() != noise.n_r {
        return param(format!("gain has N_R = {} but noise is for N_R = {}", g.n_r(), noise.n_r));
    }
    Ok(())
}

/// `f(g, Q) = log₂ det(I + σ⁻² g Q gᴴ)` in bits per channel use.
pub fn rate_functional(g: &ChannelState, q: &InputCovariance, noise: &NoiseSpec) -> Result<f64> {
    check_shapes(g, q, noise)?;
    let gq = g.gain() * q.matrix();
    let a = (&gq * &g.gain().conj_transpose()).scale(1.0 / noise.sigma2);
    Ok(logdet_id_plus_raw(&a.hermitian_part()))
}

/// Evaluates `f(·, Q)` for one fixed `Q` over many states.
///
/// Uses `det(I + σ⁻² g L Lᴴ gᴴ) = det(I + σ⁻² (gL)ᴴ(gL))` with `Q = L Lᴴ` and
/// works on whichever Gram matrix is smaller. Shapes are not checked.
#[derive(Clone, Debug)]
pub struct RateEvaluator {
    factor: ComplexMatrix,
    inv_sigma2: f64,
    scalar_q: Option<f64>,
}

impl RateEvaluator {
    pub fn new(q: &InputCovariance, sigma2: f64) -> Self {
        let scalar_q = (q.dim() == 1).then(|| q.matrix()[(0, 0)].re.max(0.0));
        Self { factor: psd_factor(q.matrix()), inv_sigma2: 1.0 / sigma2, scalar_q }
    }

    pub fn eval(&self, g: &ChannelState) -> f64 {
        if let Some(q) = self.scalar_q {
            return (q * g.power_gain() * self.inv_sigma2).ln_1p() / LN_2;
        }
        let b = g.gain() * &self.factor;
        let gram = if b.cols() <= b.rows() { &b.conj_transpose() * &b } else { &b * &b.conj_transpose() };
        hermitian_eigenvalues(&gram)
            .iter()
            .map(|&l| (l.max(0.0) * self.inv_sigma2).ln_1p())
            .sum::<f64>()
            / LN_2
    }
}

/// Sequence of complex column vectors of one common dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSequence {
    dim: usize,
    vectors: Vec<Vec<C64>>,
}

impl BlockSequence {
    pub fn new(dim: usize, vectors: Vec<Vec<C64>>) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != dim) {
            return param(format!("all block vectors must have dimension {dim}"));
        }
        Ok(Self { dim, vectors })
    }

    pub fn zeros(dim: usize, len: usize) -> Self {
        Self { dim, vectors: vec![vec![C64::new(0.0, 0.0); dim]; len] }
    }

    /// `len` i.i.d. `N_C(0, Q)` vectors; vector `i` uses draw `i` of `seed`.
    pub fn gaussian(q: &InputCovariance, len: usize, seed: SeedStream) -> Self {
        let l = psd_factor(q.matrix());
        let n = q.dim();
        let vectors = (0..len as u64)
            .map(|i| {
                let mut rng = seed.rng_at(i);
                let w: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
                l.mul_vec(&w)
            })
            .collect();
        Self { dim: n, vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<C64>] {
        &self.vectors
    }

    /// `(1/n) Σ tᵢᴴ tᵢ`.
    pub fn average_power(&self) -> f64 {
        if self.vectors.is_empty() {
            return 0.0;
        }
        let total: f64 = self.vectors.iter().flatten().map(|z| z.norm_sqr()).sum();
        total / self.vectors.len() as f64
    }
}

/// `zᵢ = g tᵢ + ξᵢ` with `ξᵢ ~ N_C(0, σ² I)`; noise vector `i` uses draw `i` of `seed`.
pub fn transmit(g: &ChannelState, t: &BlockSequence, noise: &NoiseSpec, seed: SeedStream) -> Result<BlockSequence> {
    if t.dim() != g.n_t() {
        return param(format!("input vectors have dimension {} but N_T = {}", t.dim(), g.n_t()));
    }
    if g.n_r() != noise.n_r {
        return param(format!("gain has N_R = {} but noise is for N_R = {}", g.n_r(), noise.n_r));
    }
    let vectors = t
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, ti)| {
            let mut z = g.gain().mul_vec(ti);
            if !noise.noiseless {
                let mut rng = seed.rng_at(i as u64);
                for zk in z.iter_mut() {
                    *zk += complex_gaussian(&mut rng, noise.sigma2);
                }
            }
            z
        })
        .collect();
    Ok(BlockSequence { dim: g.n_r(), vectors })
}

/// Gaussian information density `log₂ W_g(zⁿ|tⁿ)/q(zⁿ)` for `T ~ N_C(0, Q)`.
///
/// Evaluated as `n·f(g,Q) + (1/ln2)·Σ φᵢ` with
/// `φᵢ = -σ⁻²‖zᵢ - g tᵢ‖² + zᵢᴴ Θ⁻¹ zᵢ` and `Θ = gQgᴴ + σ²I`.
pub fn info_density(
    g: &ChannelState,
    q: &InputCovariance,
    noise: &NoiseSpec,
    t: &BlockSequence,
    z: &BlockSequence,
) -> Result<f64> {
    check_shapes(g, q, noise)?;
    if t.len() != z.len() {
        return param(format!("input length {} differs from output length {}", t.len(), z.len()));
    }
    if t.dim() != g.n_t() || z.dim() != g.n_r() {
        return param("block dimensions do not match the channel");
    }
    let lmin = q.smallest_eigenvalue();
    if lmin <= q.psd().psd_tolerance() || lmin <= 0.0 {
        return precondition("information density needs a non-singular input covariance");
    }
    if t.is_empty() {
        return Ok(0.0);
    }
    let theta = information_covariance(g, q, noise);
    let theta_inv = hpd_inverse(&theta)?;
    let f = rate_functional(g, q, noise)?;
    let mut phi_sum = 0.0;
    for (ti, zi) in t.vectors().iter().zip(z.vectors()) {
        let gt = g.gain().mul_vec(ti);
        let resid: f64 = zi.iter().zip(&gt).map(|(a, b)| (a - b).norm_sqr()).sum();
        let tz = theta_inv.mul_vec(zi);
        let quad: f64 = zi.iter().zip(&tz).map(|(a, b)| (a.conj() * b).re).sum();
        phi_sum += -resid / noise.sigma2 + quad;
    }
    Ok(t.len() as f64 * f + phi_sum / LN_2)
}

/// Output covariance `Θ = g Q gᴴ + σ² I`.
pub fn information_covariance(g: &ChannelState, q: &InputCovariance, noise: &NoiseSpec) -> ComplexMatrix {
    let gq = g.gain() * q.matrix();
    let ggh = &gq * &g.gain().conj_transpose();
    (&ggh + &ComplexMatrix::identity(g.n_r()).scale(noise.sigma2)).hermitian_part()
}

impl From<ChannelState> for ComplexMatrix {
    fn from(s: ChannelState) -> Self {
        s.gain
    }
}

impl TryFrom<ComplexMatrix> for ChannelState {
    type Error = Error;
    fn try_from(m: ComplexMatrix) -> Result<Self> {
        ChannelState::new(m)
    }
}
