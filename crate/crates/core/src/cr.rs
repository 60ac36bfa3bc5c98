//! The discrete common-randomness rate function
//! `H(C) = max{ I(U;X) : U – X – Y, I(U;X) − I(U;Y) ≤ C }`, a brute-force grid
//! oracle for it, and its composition with the outage capacity bounds.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::outage::{outage_bounds, OutageQuery};
use crate::rng::SeedStream;

/// Mass tolerance for pmfs.
pub const PMF_TOL: f64 = 1e-12;
/// Tolerance on the leakage constraint of a returned point.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const LOG_FLOOR: f64 = 1e-300;

/// Stream for the random starting channels of [`cr_rate_function`].
pub const STREAM_CR_STARTS: u64 = 0x6372_7374;

/// Joint pmf of a discrete memoryless pair `(X, Y)`, rows indexed by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DmmsRecord", into = "DmmsRecord")]
pub struct Dmms {
    joint: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DmmsRecord {
    joint: Vec<Vec<f64>>,
}

impl TryFrom<DmmsRecord> for Dmms {
    type Error = crate::Error;
    fn try_from(r: DmmsRecord) -> Result<Self> {
        Dmms::new(r.joint)
    }
}

impl From<Dmms> for DmmsRecord {
    fn from(d: Dmms) -> Self {
        DmmsRecord { joint: d.joint }
    }
}

impl Dmms {
    pub fn new(joint: Vec<Vec<f64>>) -> Result<Self> {
        validate_joint(&joint)?;
        Ok(Self { joint })
    }

    /// Doubly symmetric binary source with crossover `p`.
    pub fn dsbs(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return param("crossover must lie in [0, 1]");
        }
        Self::new(vec![vec![(1.0 - p) / 2.0, p / 2.0], vec![p / 2.0, (1.0 - p) / 2.0]])
    }

    /// Independent uniform `X` and `Y` on the given alphabet sizes.
    pub fn independent_uniform(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return param("alphabets must be non-empty");
        }
        let v = 1.0 / (nx * ny) as f64;
        Self::new(vec![vec![v; ny]; nx])
    }

    /// `X = Y` uniform on `k` letters.
    pub fn identical_uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return param("alphabet must be non-empty");
        }
        Self::new((0..k).map(|i| (0..k).map(|j| if i == j { 1.0 / k as f64 } else { 0.0 }).collect()).collect())
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn nx(&self) -> usize {
        self.joint.len()
    }

    pub fn ny(&self) -> usize {
        self.joint[0].len()
    }

    pub fn px(&self) -> Vec<f64> {
        self.joint.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn py(&self) -> Vec<f64> {
        (0..self.ny()).map(|y| self.joint.iter().map(|r| r[y]).sum()).collect()
    }

    pub fn entropy_x(&self) -> f64 {
        entropy(&self.px())
    }

    pub fn entropy_y(&self) -> f64 {
        entropy(&self.py())
    }

    pub fn mutual_information(&self) -> f64 {
        mi_unchecked(&self.joint)
    }
}

fn validate_joint(joint: &[Vec<f64>]) -> Result<()> {
    let Some(first) = joint.first() else {
        return param("joint pmf must have at least one row");
    };
    if first.is_empty() || joint.iter().any(|r| r.len() != first.len()) {
        return param("joint pmf rows must be non-empty and of equal length");
    }
    if joint.iter().flatten().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return param("joint pmf entries must be finite and non-negative");
    }
    let total: f64 = joint.iter().flatten().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return param(format!("joint pmf sums to {total}, not 1"));
    }
    Ok(())
}

/// Entropy in bits with `0·log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    let h = -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>();
    if h > 0.0 {
        h
    } else {
        0.0
    }
}

/// `I(A;B)` in bits for a joint pmf given as rows over `a`.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    validate_joint(joint)?;
    Ok(mi_unchecked(joint))
}

fn mi_unchecked(joint: &[Vec<f64>]) -> f64 {
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let nb = joint[0].len();
    let pb: Vec<f64> = (0..nb).map(|b| joint.iter().map(|r| r[b]).sum()).collect();
    let mut acc = 0.0;
    for (a, row) in joint.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    acc.max(0.0)
}

/// Test channel `P(u|x)`; row `x` is a pmf over `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxChannel {
    pub card_u: usize,
    pub rows: Vec<Vec<f64>>,
}

impl AuxChannel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(card_u) = rows.first().map(Vec::len) else {
            return param("test channel needs at least one row");
        };
        if card_u == 0 || rows.iter().any(|r| r.len() != card_u) {
            return param("test channel rows must share one non-zero length");
        }
        for r in &rows {
            if r.iter().any(|&v| !(v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > PMF_TOL {
                return param("each test channel row must be a pmf");
            }
        }
        Ok(Self { card_u, rows })
    }

    /// `(I(U;X), I(U;Y))` through the Markov chain `U – X – Y`.
    pub fn informations(&self, dmms: &Dmms) -> Result<(f64, f64)> {
        if self.rows.len() != dmms.nx() {
            return param("test channel and source disagree on |X|");
        }
        Ok(informations(dmms, &self.rows))
    }
}

/// One point of the rate function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrCurvePoint {
    pub budget: f64,
    pub value: f64,
    pub arg: AuxChannel,
    /// `C − (I(U;X) − I(U;Y))` at `arg`; non-negative up to [`FEASIBILITY_TOL`].
    pub feasible_gap: f64,
}

/// Local search settings for [`cr_rate_function`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrSearch {
    /// Random starts in addition to the deterministic ones.
    pub random_starts: usize,
    /// Penalty rounds; `κ` grows tenfold per round.
    pub rounds: usize,
    pub iters_per_round: usize,
    pub initial_kappa: f64,
    pub seed: u64,
}

impl Default for CrSearch {
    fn default() -> Self {
        Self { random_starts: 6, rounds: 8, iters_per_round: 300, initial_kappa: 10.0, seed: 0 }
    }
}

fn joint_uy(dmms: &Dmms, w: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let card_u = w[0].len();
    let px = dmms.px();
    let mut pu = vec![0.0; card_u];
    let mut puy = vec![vec![0.0; dmms.ny()]; card_u];
    for (x, row) in w.iter().enumerate() {
        for u in 0..card_u {
            pu[u] += px[x] * row[u];
            for (y, &pxy) in dmms.joint[x].iter().enumerate() {
                puy[u][y] += pxy * row[u];
            }
        }
    }
    (pu, puy)
}

fn informations(dmms: &Dmms, w: &[Vec<f64>]) -> (f64, f64) {
    let px = dmms.px();
    let joint_ux: Vec<Vec<f64>> =
        (0..w[0].len()).map(|u| w.iter().zip(&px).map(|(row, p)| row[u] * p).collect()).collect();
    let (_, puy) = joint_uy(dmms, w);
    let iux = mi_unchecked(&joint_ux);
    let iuy = mi_unchecked(&puy);
    debug_assert!(iuy <= dmms.mutual_information() + 1e-9, "data processing violated");
    (iux, iuy)
}

/// Gradients of `I(U;X)` and `I(U;Y)` with respect to each `w(u|x)`.
fn gradients(dmms: &Dmms, w: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let px = dmms.px();
    let py = dmms.py();
    let (pu, puy) = joint_uy(dmms, w);
    let lg = |v: f64| v.max(LOG_FLOOR).log2();
    let mut gx = vec![vec![0.0; pu.len()]; w.len()];
    let mut gy = vec![vec![0.0; pu.len()]; w.len()];
    for x in 0..w.len() {
        for u in 0..pu.len() {
            gx[x][u] = px[x] * (lg(w[x][u]) - lg(pu[u]));
            gy[x][u] = dmms.joint[x]
                .iter()
                .enumerate()
                .filter(|(_, &pxy)| pxy > 0.0)
                .map(|(y, &pxy)| pxy * (lg(puy[u][y]) - lg(pu[u]) - lg(py[y])))
                .sum();
        }
    }
    (gx, gy)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &x) in s.iter().enumerate() {
        acc += x;
        let t = (acc - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

struct Penalized<'a> {
    dmms: &'a Dmms,
    budget: f64,
    kappa: f64,
}

impl Penalized<'_> {
    fn value(&self, w: &[Vec<f64>]) -> f64 {
        let (iux, iuy) = informations(self.dmms, w);
        let excess = (iux - iuy - self.budget).max(0.0);
        iux - self.kappa * excess * excess
    }

    fn gradient(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (iux, iuy) = informations(self.dmms, w);
        let excess = (iux - iuy - self.budget).max(0.0);
        let (gx, gy) = gradients(self.dmms, w);
        gx.iter()
            .zip(&gy)
            .map(|(rx, ry)| rx.iter().zip(ry).map(|(a, b)| a - 2.0 * self.kappa * excess * (a - b)).collect())
            .collect()
    }

    /// Projected gradient ascent with Armijo backtracking.
    fn ascend(&self, mut w: Vec<Vec<f64>>, iters: usize) -> Vec<Vec<f64>> {
        let mut val = self.value(&w);
        let mut step = 1.0;
        for _ in 0..iters {
            let g = self.gradient(&w);
            let mut moved = false;
            let mut t = step * 2.0;
            for _ in 0..40 {
                let cand: Vec<Vec<f64>> =
                    w.iter().zip(&g).map(|(r, gr)| project_simplex(&r.iter().zip(gr).map(|(a, b)| a + t * b).collect::<Vec<_>>())).collect();
                let ascent: f64 = cand.iter().zip(&w).zip(&g).flat_map(|((c, r), gr)| c.iter().zip(r).zip(gr).map(|((c, r), g)| (c - r) * g)).sum();
                let v = self.value(&cand);
                if ascent > 0.0 && v >= val + 1e-4 * ascent {
                    w = cand;
                    val = v;
                    step = t;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        w
    }
}

fn leakage(dmms: &Dmms, w: &[Vec<f64>]) -> f64 {
    let (iux, iuy) = informations(dmms, w);
    iux - iuy
}

/// Move `w` towards a channel that ignores `x` until the leakage fits the budget.
fn repair(dmms: &Dmms, w: Vec<Vec<f64>>, budget: f64) -> Vec<Vec<f64>> {
    if leakage(dmms, &w) <= budget {
        return w;
    }
    let px = dmms.px();
    let card_u = w[0].len();
    let pu: Vec<f64> = (0..card_u).map(|u| w.iter().zip(&px).map(|(r, p)| r[u] * p).sum()).collect();
    let mix = |t: f64| -> Vec<Vec<f64>> {
        w.iter().map(|r| r.iter().zip(&pu).map(|(a, b)| (1.0 - t) * a + t * b).collect()).collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if leakage(dmms, &mix(mid)) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    mix(hi)
}

fn starts(dmms: &Dmms, card_u: usize, search: &CrSearch) -> Vec<Vec<Vec<f64>>> {
    let nx = dmms.nx();
    let mut out = Vec::new();
    // U = X, letters beyond card_u merged into the last one
    out.push((0..nx).map(|x| (0..card_u).map(|u| if u == x.min(card_u - 1) { 1.0 } else { 0.0 }).collect()).collect());
    // near-uniform channel
    out.push(vec![vec![1.0 / card_u as f64; card_u]; nx]);
    // soft identity
    out.push(
        (0..nx)
            .map(|x| project_simplex(&(0..card_u).map(|u| if u == x % card_u { 0.7 } else { 0.3 / card_u as f64 }).collect::<Vec<_>>()))
            .collect(),
    );
    let stream = SeedStream::new(search.seed, STREAM_CR_STARTS);
    for k in 0..search.random_starts {
        let mut rng = stream.rng_at(k as u64);
        out.push(
            (0..nx)
                .map(|_| {
                    let e: Vec<f64> = (0..card_u).map(|_| Exp1.sample(&mut rng)).collect::<Vec<f64>>();
                    let s: f64 = e.iter().sum();
                    let sharp = rng.random_range(1.0..4.0);
                    let p: Vec<f64> = e.iter().map(|v| (v / s).powf(sharp)).collect();
                    let z: f64 = p.iter().sum();
                    p.iter().map(|v| v / z).collect()
                })
                .collect(),
        );
    }
    out
}

/// Maximize `I(U;X)` subject to `I(U;X) − I(U;Y) ≤ budget` by multi-start
/// penalized projected gradient ascent. The value is that of an exactly
/// feasible channel, so it is a lower bound on the true maximum.
pub fn cr_rate_function(dmms: &Dmms, budget: f64, card_u: usize, search: &CrSearch) -> Result<CrCurvePoint> {
    if !(budget >= 0.0) {
        return param("budget must be non-negative");
    }
    if card_u < 2 {
        return param("card_u must be at least 2");
    }
    if search.rounds == 0 || !(search.initial_kappa > 0.0) {
        return param("search needs at least one penalty round and a positive kappa");
    }
    let results: Vec<(f64, Vec<Vec<f64>>)> = starts(dmms, card_u, search)
        .into_par_iter()
        .map(|mut w| {
            let mut kappa = search.initial_kappa;
            for _ in 0..search.rounds {
                w = Penalized { dmms, budget, kappa }.ascend(w, search.iters_per_round);
                if leakage(dmms, &w) <= budget {
                    break;
                }
                kappa *= 10.0;
            }
            let w = repair(dmms, w, budget);
            (informations(dmms, &w).0, w)
        })
        .collect();
    // first best in start order keeps the result independent of scheduling
    let (value, w) = results
        .into_iter()
        .fold(None::<(f64, Vec<Vec<f64>>)>, |best, cand| match best {
            Some(b) if b.0 >= cand.0 => Some(b),
            _ => Some(cand),
        })
        .expect("at least one start");
    let gap = budget - leakage(dmms, &w);
    debug_assert!(gap >= -FEASIBILITY_TOL);
    Ok(CrCurvePoint { budget, value, arg: AuxChannel { card_u, rows: w }, feasible_gap: gap })
}

/// All pmfs on `k` letters with entries in `{0, 1/(steps−1), …, 1}`.
fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    let total = steps - 1;
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / total as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, cur, total, out);
        }
    }
    rec(0, total, &mut cur, total, &mut out);
    out
}

/// Exhaustive grid oracle: max feasible `I(U;X)` over test channels whose
/// rows lie on the simplex grid of resolution `1/(grid_steps−1)`.
pub fn brute_force_cr(dmms: &Dmms, budget: f64, card_u: usize, grid_steps: usize) -> Result<f64> {
    if !(budget >= 0.0) {
        return param("budget must be non-negative");
    }
    if dmms.nx() > 3 || card_u > 3 || grid_steps > 21 {
        return param("brute force is limited to |X| ≤ 3, card_u ≤ 3, grid_steps ≤ 21");
    }
    if card_u < 1 || grid_steps < 2 {
        return param("brute force needs card_u ≥ 1 and grid_steps ≥ 2");
    }
    let grid = simplex_grid(card_u, grid_steps);
    let nx = dmms.nx();
    let combos = grid.len().pow(nx as u32);
    let best = (0..combos)
        .into_par_iter()
        .map(|mut idx| {
            let mut w = Vec::with_capacity(nx);
            for _ in 0..nx {
                w.push(grid[idx % grid.len()].clone());
                idx /= grid.len();
            }
            let (iux, iuy) = informations(dmms, &w);
            if iux - iuy <= budget + PMF_TOL {
                iux
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// `H(l(η))` and `H(u(η))` for a channel query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutageCrBounds {
    pub l: f64,
    pub u: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn outage_cr_bounds(dmms: &Dmms, query: &OutageQuery, card_u: usize, search: &CrSearch) -> Result<OutageCrBounds> {
    let b = outage_bounds(query)?;
    let lower = cr_rate_function(dmms, b.l, card_u, search)?.value;
    let upper = cr_rate_function(dmms, b.u, card_u, search)?.value;
    Ok(OutageCrBounds { l: b.l, u: b.u, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelState, FadingEnsemble};
    use crate::compound::waterfill_capacity;
    use crate::hermitian::ComplexMatrix;

    fn h2(p: f64) -> f64 {
        entropy(&[p, 1.0 - p])
    }

    #[test]
    fn mutual_information_examples() {
        assert!(mutual_information(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap().abs() < 1e-15);
        assert!((mutual_information(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap() - 1.0).abs() < 1e-15);
        let dsbs = Dmms::dsbs(0.1).unwrap();
        assert!((dsbs.mutual_information() - (1.0 - h2(0.1))).abs() < 1e-12);
        assert!((dsbs.mutual_information() - 0.531).abs() < 1e-3);
        assert!(mutual_information(&[vec![-0.1, 0.6], vec![0.25, 0.25]]).is_err());
        assert!(mutual_information(&[vec![0.3, 0.3], vec![0.3, 0.3]]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dmms = Dmms::new(vec![vec![0.3, 0.1, 0.05], vec![0.05, 0.2, 0.3]]).unwrap();
        let w = vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3]];
        let (gx, gy) = gradients(&dmms, &w);
        let h = 1e-6;
        for x in 0..2 {
            for u in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[x][u] += h;
                wm[x][u] -= h;
                // informations accepts unnormalized rows through the joint sums
                let (ixp, iyp) = raw_informations(&dmms, &wp);
                let (ixm, iym) = raw_informations(&dmms, &wm);
                assert!(((ixp - ixm) / (2.0 * h) - gx[x][u]).abs() < 1e-6);
                assert!(((iyp - iym) / (2.0 * h) - gy[x][u]).abs() < 1e-6);
            }
        }
    }

    /// I(U;X), I(U;Y) as functions of arbitrary positive w, for differentiation.
    fn raw_informations(dmms: &Dmms, w: &[Vec<f64>]) -> (f64, f64) {
        let px = dmms.px();
        let py = dmms.py();
        let (pu, puy) = joint_uy(dmms, w);
        let mut ix = 0.0;
        for x in 0..w.len() {
            for u in 0..pu.len() {
                ix += px[x] * w[x][u] * (w[x][u] / pu[u]).log2();
            }
        }
        let mut iy = 0.0;
        for u in 0..pu.len() {
            for y in 0..py.len() {
                iy += puy[u][y] * (puy[u][y] / (pu[u] * py[y])).log2();
            }
        }
        (ix, iy)
    }

    #[test]
    fn identical_sources_give_full_entropy() {
        let d = Dmms::identical_uniform(2).unwrap();
        for c in [0.0, 0.3, 1.0] {
            let p = cr_rate_function(&d, c, 3, &CrSearch::default()).unwrap();
            assert!((p.value - 1.0).abs() < 1e-9);
            assert!(p.feasible_gap >= -FEASIBILITY_TOL);
        }
    }

    #[test]
    fn independent_sources_give_min_c_hx() {
        let d = Dmms::independent_uniform(2, 2).unwrap();
        for c in [0.0, 0.1, 0.5, 1.0, 2.0] {
            let p = cr_rate_function(&d, c, 3, &CrSearch::default()).unwrap();
            assert!((p.value - c.min(1.0)).abs() < 1e-6, "C={c}: {}", p.value);
            let (ix, iy) = p.arg.informations(&d).unwrap();
            assert!(ix - iy <= c + FEASIBILITY_TOL);
        }
        let b = brute_force_cr(&d, 0.5, 3, 21).unwrap();
        assert!(b <= 0.5 + 1e-12 && b > 0.45);
        assert!(brute_force_cr(&d, 0.0, 3, 21).unwrap() < 1e-12);
    }

    #[test]
    fn dsbs_matches_binary_symmetric_test_channel() {
        // U = X through a BSC(β): leakage h(β∗p) − h(β), value 1 − h(β)
        let p = 0.1;
        let d = Dmms::dsbs(p).unwrap();
        for c in [0.1, 0.2, 0.5] {
            let leak = |b: f64| h2(b * (1.0 - p) + (1.0 - b) * p) - h2(b);
            let (mut lo, mut hi) = (0.0, 0.5);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if leak(mid) > c {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let target = 1.0 - h2(hi);
            let got = cr_rate_function(&d, c, 3, &CrSearch::default()).unwrap().value;
            assert!(got >= target - 1e-3, "C={c}: {got} < {target}");
            assert!(got <= target + 1e-3, "C={c}: {got} > {target}");
        }
    }

    #[test]
    fn value_is_monotone_in_budget() {
        let d = Dmms::dsbs(0.2).unwrap();
        let budgets = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
        let vals: Vec<f64> = budgets.iter().map(|&c| cr_rate_function(&d, c, 3, &CrSearch::default()).unwrap().value).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
        assert!(vals.iter().all(|&v| v <= d.entropy_x() + 1e-9));
    }

    #[test]
    fn search_dominates_grid_on_small_instances() {
        let sources = [
            Dmms::new(vec![vec![0.3, 0.1, 0.05], vec![0.05, 0.2, 0.3]]).unwrap(),
            Dmms::new(vec![vec![0.2, 0.05], vec![0.1, 0.25], vec![0.3, 0.1]]).unwrap(),
        ];
        for d in &sources {
            for c in [0.0, 0.1, 0.3] {
                let s = cr_rate_function(d, c, 3, &CrSearch::default()).unwrap().value;
                let g = brute_force_cr(d, c, 3, 11).unwrap();
                assert!(s >= g - 0.01, "C={c}: search {s} grid {g}");
            }
        }
    }

    #[test]
    fn brute_force_guards_and_resolution() {
        let d = Dmms::dsbs(0.1).unwrap();
        assert!(brute_force_cr(&d, 0.2, 4, 11).is_err());
        assert!(brute_force_cr(&d, 0.2, 3, 22).is_err());
        assert!(brute_force_cr(&Dmms::independent_uniform(4, 2).unwrap(), 0.2, 3, 11).is_err());
        // a refined grid contains the coarse one when (steps−1) divides
        let coarse = brute_force_cr(&d, 0.2, 3, 6).unwrap();
        let fine = brute_force_cr(&d, 0.2, 3, 11).unwrap();
        assert!(fine >= coarse);
        assert!((brute_force_cr(&d, 5.0, 2, 11).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = Dmms::dsbs(0.1).unwrap();
        assert!(cr_rate_function(&d, -0.1, 3, &CrSearch::default()).is_err());
        assert!(cr_rate_function(&d, 0.1, 1, &CrSearch::default()).is_err());
        assert!(AuxChannel::new(vec![vec![0.5, 0.6]]).is_err());
        assert!(Dmms::new(vec![vec![0.5], vec![0.4]]).is_err());
    }

    #[test]
    fn composition_with_deterministic_channel() {
        let g = ChannelState::new(ComplexMatrix::from_diag(&[0.6])).unwrap();
        let (c0, _) = waterfill_capacity(&g, 1.0, 1.0).unwrap();
        let q = OutageQuery::new(0.2, 1.0, 1.0, FadingEnsemble::deterministic(g), 1).unwrap();
        let d = Dmms::independent_uniform(2, 2).unwrap();
        let b = outage_cr_bounds(&d, &q, 3, &CrSearch::default()).unwrap();
        assert!((b.l - c0).abs() < 1e-12 && (b.u - c0).abs() < 1e-12);
        assert!((b.lower - c0.min(1.0)).abs() < 1e-6);
        assert_eq!(b.lower, b.upper);
        let same = outage_cr_bounds(&Dmms::identical_uniform(2).unwrap(), &q, 3, &CrSearch::default()).unwrap();
        assert!((same.lower - 1.0).abs() < 1e-9 && (same.upper - 1.0).abs() < 1e-9);
    }
}
