//! Desk-scale simulation of common-randomness generation over a fading
//! channel with outage.
//!
//! Terminal A sees `xⁿ`, terminal B sees `yⁿ`. A picks a codeword jointly
//! typical with `xⁿ` from `N₁` bins of `N₂` words each, sends only the bin
//! index over the channel, and B looks in that bin for the unique word
//! jointly typical with `yⁿ`. The index link is idealized: it is delivered
//! whenever the realized rate `f(g, Q̂)` covers the index rate and replaced by
//! a uniformly random index otherwise.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{rate_functional, ChannelState, FadingEnsemble, InputCovariance, NoiseSpec};
use crate::cr::{entropy, AuxChannel, Dmms};
use crate::error::{param, Error, Result};
use crate::rng::SeedStream;

/// Largest `N₁·N₂` accepted, as a power of two.
pub const MAX_LOG2_WORDS: f64 = 24.0;
/// Largest number of stored codeword symbols.
pub const MAX_CODEBOOK_SYMBOLS: usize = 1 << 28;

pub const STREAM_CODEBOOK: u64 = 0x636f_6465;
pub const STREAM_TRIALS: u64 = 0x7472_6961;

/// Typicality slack used when none is given: 0.1 up to `n = 200`, 0.05 beyond.
pub fn default_typ_eps(n: usize) -> f64 {
    if n <= 200 {
        0.1
    } else {
        0.05
    }
}

/// The channel used for the bin index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexChannel {
    pub ensemble: FadingEnsemble,
    pub noise: NoiseSpec,
    pub q_hat: InputCovariance,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub mu: f64,
    pub alpha: f64,
    pub eta: f64,
    pub dmms: Dmms,
    pub aux: AuxChannel,
    pub typ_eps: f64,
    pub channel: IndexChannel,
    pub trials: usize,
    pub master_seed: u64,
    /// Independent codebooks drawn per experiment.
    pub codebook_replicas: usize,
}

/// Codebook sizes and the information quantities they derive from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CodebookSizes {
    pub i_ux: f64,
    pub i_uy: f64,
    /// `n[I(U;X) − I(U;Y) + 3μ]`.
    pub log2_n1_target: f64,
    /// `n[I(U;Y) − 2μ]`.
    pub log2_n2_target: f64,
}

impl CodebookSizes {
    /// `(N₁, N₂)` if both are at least one and the product respects the guard.
    pub fn counts(&self) -> Result<(usize, usize)> {
        if self.log2_n1_target < 0.0 || self.log2_n2_target < 0.0 {
            return param(format!(
                "codebook sizes below one: log2 N1 = {:.4}, log2 N2 = {:.4}",
                self.log2_n1_target, self.log2_n2_target
            ));
        }
        if self.log2_n1_target + self.log2_n2_target > MAX_LOG2_WORDS {
            return Err(Error::TooLarge(format!(
                "N1*N2 = 2^{:.2} exceeds 2^{MAX_LOG2_WORDS}",
                self.log2_n1_target + self.log2_n2_target
            )));
        }
        Ok((self.log2_n1_target.exp2().floor() as usize, self.log2_n2_target.exp2().floor() as usize))
    }

    /// `log₂(N₁N₂ + 1)` without forming the product; uses the floor-free upper value.
    pub fn log2_alphabet_upper(&self) -> f64 {
        let s = self.log2_n1_target + self.log2_n2_target;
        // log2(2^s + 1) = s + log2(1 + 2^-s)
        s + (-s).exp2().ln_1p() / LN_2
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param("block length must be at least 1");
        }
        if !(self.mu > 0.0) || !(self.alpha > 0.0) || !(self.typ_eps > 0.0) {
            return param("mu, alpha and typ_eps must be positive");
        }
        if !(0.0..1.0).contains(&self.eta) {
            return param("eta must lie in [0, 1)");
        }
        if self.trials == 0 {
            return param("trials must be at least 1");
        }
        if self.codebook_replicas == 0 {
            return param("codebook_replicas must be at least 1");
        }
        if self.aux.rows.len() != self.dmms.nx() {
            return param("test channel and source disagree on |X|");
        }
        let (n_r, n_t) = self.channel.ensemble.dims();
        if n_t != self.channel.q_hat.dim() || n_r != self.channel.noise.n_r {
            return param("index channel dimensions disagree");
        }
        self.channel.ensemble.validate()
    }

    pub fn sizes(&self) -> Result<CodebookSizes> {
        let (i_ux, i_uy) = self.aux.informations(&self.dmms)?;
        let n = self.n as f64;
        Ok(CodebookSizes {
            i_ux,
            i_uy,
            log2_n1_target: n * (i_ux - i_uy + 3.0 * self.mu),
            log2_n2_target: n * (i_uy - 2.0 * self.mu),
        })
    }

    /// `P_U` induced by the source marginal and the test channel.
    pub fn pu(&self) -> Vec<f64> {
        let px = self.dmms.px();
        (0..self.aux.card_u).map(|u| self.aux.rows.iter().zip(&px).map(|(r, p)| r[u] * p).sum()).collect()
    }

    /// Target joint pmfs `P(u,x)` and `P(u,y)`, rows indexed by `u`.
    fn targets(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let px = self.dmms.px();
        let ku = self.aux.card_u;
        let ux = (0..ku).map(|u| (0..self.dmms.nx()).map(|x| px[x] * self.aux.rows[x][u]).collect()).collect();
        let uy = (0..ku)
            .map(|u| {
                (0..self.dmms.ny())
                    .map(|y| (0..self.dmms.nx()).map(|x| self.dmms.joint()[x][y] * self.aux.rows[x][u]).sum())
                    .collect()
            })
            .collect();
        (ux, uy)
    }
}

/// Largest-remainder apportionment of `n` symbols to the pmf `p`.
pub fn round_type(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// `N₁` bins of `N₂` words of one exact type, plus the reserved label.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Codebook {
    pub n1: usize,
    pub n2: usize,
    pub n: usize,
    /// Symbol counts of every word (the rounded `P_U`).
    pub type_counts: Vec<usize>,
    words: Vec<u8>,
}

impl Codebook {
    /// Word `j` of bin `i`, both 1-based.
    pub fn word(&self, i: usize, j: usize) -> &[u8] {
        let k = (i - 1) * self.n2 + (j - 1);
        &self.words[k * self.n..(k + 1) * self.n]
    }

    /// `N₁N₂ + 1` including the reserved label.
    pub fn alphabet_size(&self) -> usize {
        self.n1 * self.n2 + 1
    }

    /// FNV-1a over sizes and symbols.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for v in [self.n1, self.n2, self.n] {
            v.to_le_bytes().into_iter().for_each(&mut eat);
        }
        self.words.iter().copied().for_each(eat);
        h
    }
}

/// Draw a codebook with explicit sizes; words are uniform permutations of
/// the rounded type, word `k` keyed by draw `k` of the replica's stream.
pub fn build_codebook_sized(config: &ProtocolConfig, n1: usize, n2: usize, replica: u64) -> Result<Codebook> {
    if n1 == 0 || n2 == 0 {
        return param("codebook needs at least one bin and one word per bin");
    }
    if (n1 as f64 * n2 as f64).log2() > MAX_LOG2_WORDS {
        return Err(Error::TooLarge(format!("{n1}*{n2} words exceed 2^{MAX_LOG2_WORDS}")));
    }
    let total = n1 * n2;
    if total.saturating_mul(config.n) > MAX_CODEBOOK_SYMBOLS {
        return Err(Error::TooLarge(format!("{total} words of length {} exceed the memory guard", config.n)));
    }
    if config.aux.card_u > u8::MAX as usize {
        return param("U alphabet too large");
    }
    let type_counts = round_type(&config.pu(), config.n);
    let base: Vec<u8> = type_counts.iter().enumerate().flat_map(|(u, &c)| std::iter::repeat_n(u as u8, c)).collect();
    let stream = SeedStream::new(config.master_seed, STREAM_CODEBOOK).substream(replica);
    let words: Vec<u8> = (0..total as u64)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut w = base.clone();
            w.shuffle(&mut stream.rng_at(k));
            w
        })
        .collect();
    Ok(Codebook { n1, n2, n: config.n, type_counts, words })
}

/// Codebook with the sizes implied by the configuration.
pub fn build_codebooks(config: &ProtocolConfig) -> Result<Codebook> {
    config.validate()?;
    let (n1, n2) = config.sizes()?.counts()?;
    build_codebook_sized(config, n1, n2, 0)
}

/// Output of the encoder or decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    Word { bin: usize, index: usize },
    Reserved,
}

impl Label {
    /// Dense id in `0..N₁N₂`, the reserved label mapping to `N₁N₂`.
    pub fn id(&self, cb: &Codebook) -> usize {
        match *self {
            Label::Word { bin, index } => (bin - 1) * cb.n2 + (index - 1),
            Label::Reserved => cb.n1 * cb.n2,
        }
    }
}

/// Every joint frequency within `eps` of the target.
fn jointly_typical(word: &[u8], other: &[u8], target: &[Vec<f64>], eps: f64) -> bool {
    let n = word.len() as f64;
    let cols = target[0].len();
    let mut counts = vec![0usize; target.len() * cols];
    for (&u, &v) in word.iter().zip(other) {
        counts[u as usize * cols + v as usize] += 1;
    }
    counts.iter().enumerate().all(|(k, &c)| (c as f64 / n - target[k / cols][k % cols]).abs() <= eps)
}

/// First word in `(i, j)` order jointly typical with `x`, with its bin index;
/// the reserved label and `N₁+1` when there is none.
pub fn encode_source(x: &[u8], cb: &Codebook, config: &ProtocolConfig) -> Result<(Label, usize)> {
    if x.len() != cb.n {
        return param("source sequence length differs from n");
    }
    let (ux, _) = config.targets();
    for i in 1..=cb.n1 {
        for j in 1..=cb.n2 {
            if jointly_typical(cb.word(i, j), x, &ux, config.typ_eps) {
                return Ok((Label::Word { bin: i, index: j }, i));
            }
        }
    }
    Ok((Label::Reserved, cb.n1 + 1))
}

/// Deliver `i_star` if `f(g, Q̂)` covers `log₂(N₁+1)/n`, otherwise a uniform
/// index from `1..=N₁+1`.
pub fn transmit_index<R: Rng + ?Sized>(
    i_star: usize,
    g: &ChannelState,
    cb: &Codebook,
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<(usize, bool)> {
    if i_star == 0 || i_star > cb.n1 + 1 {
        return param("index out of range");
    }
    let rate = rate_functional(g, &config.channel.q_hat, &config.channel.noise)?;
    if rate >= index_rate(cb.n1, config.n) {
        Ok((i_star, false))
    } else {
        Ok((rng.random_range(1..=cb.n1 + 1), true))
    }
}

/// `log₂(N₁+1)/n`.
pub fn index_rate(n1: usize, n: usize) -> f64 {
    ((n1 + 1) as f64).log2() / n as f64
}

/// The unique word of bin `i_hat` jointly typical with `y`, else the reserved label.
pub fn decode_output(y: &[u8], i_hat: usize, cb: &Codebook, config: &ProtocolConfig) -> Result<Label> {
    if y.len() != cb.n {
        return param("output sequence length differs from n");
    }
    if i_hat == 0 || i_hat > cb.n1 + 1 {
        return param("bin index out of range");
    }
    if i_hat == cb.n1 + 1 {
        return Ok(Label::Reserved);
    }
    let (_, uy) = config.targets();
    let mut found = None;
    for j in 1..=cb.n2 {
        if jointly_typical(cb.word(i_hat, j), y, &uy, config.typ_eps) {
            if found.is_some() {
                return Ok(Label::Reserved);
            }
            found = Some(Label::Word { bin: i_hat, index: j });
        }
    }
    Ok(found.unwrap_or(Label::Reserved))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub k_label: Label,
    pub l_label: Label,
    pub state: ChannelState,
    pub in_outage: bool,
    pub agreed: bool,
}

/// One trial against a given codebook.
pub fn run_trial(config: &ProtocolConfig, cb: &Codebook, replica: u64, index: u64) -> Result<TrialOutcome> {
    let mut rng = SeedStream::new(config.master_seed, STREAM_TRIALS).substream(replica).rng_at(index);
    let (x, y) = sample_sources(&config.dmms, config.n, &mut rng);
    let state = config.channel.ensemble.sample_with(&mut rng);
    let (k_label, i_star) = encode_source(&x, cb, config)?;
    let (i_hat, in_outage) = transmit_index(i_star, &state, cb, config, &mut rng)?;
    let l_label = decode_output(&y, i_hat, cb, config)?;
    Ok(TrialOutcome { k_label, l_label, state, in_outage, agreed: k_label == l_label })
}

fn sample_sources<R: Rng + ?Sized>(dmms: &Dmms, n: usize, rng: &mut R) -> (Vec<u8>, Vec<u8>) {
    let ny = dmms.ny();
    let flat: Vec<f64> = dmms.joint().iter().flatten().copied().collect();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = flat.len() - 1;
        for (k, p) in flat.iter().enumerate() {
            acc += p;
            if r < acc {
                pick = k;
                break;
            }
        }
        x.push((pick / ny) as u8);
        y.push((pick % ny) as u8);
    }
    (x, y)
}

/// Aggregates of [`run_trials`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProtocolStats {
    pub n: usize,
    pub trials: usize,
    pub replicas: usize,
    pub n1: usize,
    pub n2: usize,
    pub type_counts: Vec<usize>,
    pub i_ux: f64,
    pub i_uy: f64,
    pub index_rate: f64,
    pub outage_frac: f64,
    /// `None` when every trial was in outage.
    pub disagree_off_outage: Option<f64>,
    /// Plug-in `H(K)/n`, averaged over codebook replicas.
    pub h_k_per_n: f64,
    /// Plug-in `H(K)/n` and `H(L)/n` on trials outside outage.
    pub h_k_off_outage_per_n: f64,
    pub h_l_off_outage_per_n: f64,
    /// Across-replica variance of `H(K)/n`.
    pub h_k_replica_variance: f64,
    pub tv_uniform: f64,
    pub reserved_frac: f64,
    /// `log₂(N₁N₂+1)`.
    pub log2_alphabet: f64,
    /// `c = H(X) + μ + 1`.
    pub c_bits: f64,
    pub c_bound_ok: bool,
    pub index_rate_ok: bool,
    pub all_outage: bool,
    pub codebook_fingerprints: Vec<u64>,
}

fn plug_in_entropy(labels: impl Iterator<Item = usize>) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut total = 0usize;
    for l in labels {
        *counts.entry(l).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    entropy(&c.iter().map(|&v| v as f64 / total as f64).collect::<Vec<_>>())
}

fn tv_from_uniform(labels: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let support = counts.len() as f64;
    let total = labels.len() as f64;
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    0.5 * c.iter().map(|&v| (v as f64 / total - 1.0 / support).abs()).sum::<f64>()
}

/// Simulate the protocol; every trial outcome is kept in the returned list.
pub fn run_trials(config: &ProtocolConfig) -> Result<(ProtocolStats, Vec<TrialOutcome>)> {
    config.validate()?;
    let sizes = config.sizes()?;
    let (n1, n2) = sizes.counts()?;
    let n = config.n as f64;
    let idx_rate = index_rate(n1, config.n);
    let index_rate_ok = idx_rate <= sizes.i_ux - sizes.i_uy + 3.0 * config.mu + 2.0 / n + 1e-12;
    let log2_alphabet = ((n1 * n2 + 1) as f64).log2();
    let c_bits = config.dmms.entropy_x() + config.mu + 1.0;
    let c_bound_ok = log2_alphabet <= n * c_bits;

    let mut outcomes = Vec::with_capacity(config.trials * config.codebook_replicas);
    let mut h_k = Vec::new();
    let mut h_k_off = Vec::new();
    let mut h_l_off = Vec::new();
    let mut tvs = Vec::new();
    let mut fingerprints = Vec::new();
    let mut type_counts = Vec::new();
    for r in 0..config.codebook_replicas as u64 {
        let cb = build_codebook_sized(config, n1, n2, r)?;
        fingerprints.push(cb.fingerprint());
        type_counts = cb.type_counts.clone();
        let batch: Vec<TrialOutcome> =
            (0..config.trials as u64).into_par_iter().map(|t| run_trial(config, &cb, r, t)).collect::<Result<_>>()?;
        let ks: Vec<usize> = batch.iter().map(|o| o.k_label.id(&cb)).collect();
        h_k.push(plug_in_entropy(ks.iter().copied()) / n);
        h_k_off.push(plug_in_entropy(batch.iter().filter(|o| !o.in_outage).map(|o| o.k_label.id(&cb))) / n);
        h_l_off.push(plug_in_entropy(batch.iter().filter(|o| !o.in_outage).map(|o| o.l_label.id(&cb))) / n);
        tvs.push(tv_from_uniform(&ks));
        outcomes.extend(batch);
    }
    let total = outcomes.len() as f64;
    let outage = outcomes.iter().filter(|o| o.in_outage).count();
    let off: Vec<&TrialOutcome> = outcomes.iter().filter(|o| !o.in_outage).collect();
    let disagree_off_outage =
        (!off.is_empty()).then(|| off.iter().filter(|o| !o.agreed).count() as f64 / off.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let h_mean = mean(&h_k);
    let h_var = h_k.iter().map(|h| (h - h_mean).powi(2)).sum::<f64>() / h_k.len() as f64;
    let stats = ProtocolStats {
        n: config.n,
        trials: config.trials,
        replicas: config.codebook_replicas,
        n1,
        n2,
        type_counts,
        i_ux: sizes.i_ux,
        i_uy: sizes.i_uy,
        index_rate: idx_rate,
        outage_frac: outage as f64 / total,
        disagree_off_outage,
        h_k_per_n: h_mean,
        h_k_off_outage_per_n: mean(&h_k_off),
        h_l_off_outage_per_n: mean(&h_l_off),
        h_k_replica_variance: h_var,
        tv_uniform: mean(&tvs),
        reserved_frac: outcomes.iter().filter(|o| o.k_label == Label::Reserved).count() as f64 / total,
        log2_alphabet,
        c_bits,
        c_bound_ok,
        index_rate_ok,
        all_outage: off.is_empty(),
        codebook_fingerprints: fingerprints,
    };
    Ok((stats, outcomes))
}
