//! Acceptance suite. Each test prints one line
//!
//! ```text
//! criterion <k>: PASS|FAIL <details>
//! ```
//!
//! and then asserts the verdict, so `cargo test --test acceptance -- --nocapture`
//! shows the full scoreboard. Runs go through the CLI library entry point
//! where a command exists, so the files checked here are the same files a
//! user would get.
//!
//! 1. SISO closed form vs the Monte-Carlo bisection.
//! 2. Two-atom discontinuity, exact enumeration.
//! 3. Compound solver vs water-filling.
//! 4. Monotonicity, concavity and supergradient property suites.
//! 5. Concentration tail bounds over the (n, δ, N_R) grid.
//! 6. CR-capacity local search vs brute force.
//! 7. Protocol reference run.
//! 8. Byte-identical results across worker counts.

use std::f64::consts::LN_2;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use outcr_cli::{execute, Overrides, ParsedTable, RunConfig};
use outcr_core::channel::{rate_functional, ChannelState, FadingEnsemble, InputCovariance, MatrixAtom, NoiseSpec};
use outcr_core::compound::{min_rate, supergradient, waterfill_capacity, CompoundSet};
use outcr_core::cr::{brute_force_cr, AuxChannel, Dmms};
use outcr_core::hermitian::ComplexMatrix;
use outcr_core::outage::{OutageCurve, OutageQuery};
use outcr_core::protocol::{default_typ_eps, IndexChannel, ProtocolConfig};
use serde_json::{json, Value};
use tempfile::TempDir;

fn verdict(k: u32, pass: bool, details: &str) {
    println!("criterion {k}: {} {details}", if pass { "PASS" } else { "FAIL" });
}

fn within(start: Instant, budget_s: u64) -> (bool, Duration) {
    let t = start.elapsed();
    (t <= Duration::from_secs(budget_s), t)
}

/// Write `config` as `<name>.json` in `dir` and run it.
fn run(dir: &Path, name: &str, config: &Value) -> ParsedTable {
    run_raw(dir, name, config).1
}

fn run_raw(dir: &Path, name: &str, config: &Value) -> (PathBuf, ParsedTable) {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    let summary = execute(&cfg, &Overrides::default()).unwrap();
    let text = std::fs::read_to_string(&summary.results_path).unwrap();
    (summary.results_path, ParsedTable::parse(&text).unwrap())
}

fn config(command: &str, params: Value, out: &str, seed: u64) -> Value {
    json!({ "command": command, "params": params, "output_path": out, "seed": seed })
}

// ---------------------------------------------------------------------------
// Configs shared with the reproducibility check
// ---------------------------------------------------------------------------

const SISO_ETAS: [f64; 3] = [0.05, 0.1, 0.3];
const SNR: f64 = 10.0;

fn c1_outage() -> Value {
    config(
        "outage",
        json!({
            "eta": SISO_ETAS, "p_budget": SNR, "sigma2": 1.0,
            "ensemble": { "kind": "rayleigh_iid", "n_r": 1, "n_t": 1, "variance": 1.0 },
            "mc_samples": 100_000, "rate_tol": 0.01
        }),
        "c1_outage.csv",
        2024,
    )
}

fn c1_siso() -> Value {
    config(
        "siso",
        json!({ "law": "exponential", "mean": 1.0, "eta": SISO_ETAS, "p_budget": SNR, "sigma2": 1.0 }),
        "c1_siso.csv",
        2024,
    )
}

fn c2_outage() -> Value {
    config(
        "outage",
        json!({
            "eta": 0.5, "p_budget": 1.0, "sigma2": 1.0,
            "ensemble": { "kind": "scalar_atoms", "atoms": [[1.0, 0.5], [4.0, 0.5]] }
        }),
        "c2.csv",
        1,
    )
}

fn random_state(n_r: usize, n_t: usize, stream: u64, index: u64) -> ChannelState {
    FadingEnsemble::rayleigh(n_r, n_t, 1.0, 0xacce).unwrap().sample_state(stream, index)
}

/// `rows cols re im ...` at shortest round-trip precision.
fn state_line(m: &ComplexMatrix) -> String {
    let mut parts = vec![m.rows().to_string(), m.cols().to_string()];
    for z in m.entries() {
        parts.push(format!("{:e}", z.re));
        parts.push(format!("{:e}", z.im));
    }
    parts.join(" ")
}

fn c3_singletons() -> Vec<ChannelState> {
    (0..20u64).map(|k| random_state(1 + (k % 4) as usize, 1 + ((k / 4 + k) % 4) as usize, 3, k)).collect()
}

fn c3_config(dir: &Path, k: usize, states: &[ChannelState], p: f64) -> Value {
    let file = format!("c3_states_{k}.txt");
    let text: String = states.iter().map(|g| state_line(g.gain()) + "\n").collect();
    std::fs::write(dir.join(&file), text).unwrap();
    config(
        "compound",
        json!({ "states_file": file, "p_budget": p, "sigma2": 1.0, "tol": 1e-7 }),
        &format!("c3_{k}.csv"),
        0,
    )
}

fn c5_bounds() -> Value {
    config(
        "bounds",
        json!({ "n": [1, 5, 20], "delta": [0.25, 0.5, 1.0], "n_r": [1, 2], "trials": 100_000 }),
        "c5.csv",
        5,
    )
}

const CR_BUDGETS: [f64; 5] = [0.0, 0.1, 0.2, 0.5, 1.0];

fn c6_config(name: &str, joint: &[Vec<f64>]) -> Value {
    config(
        "cr-curve",
        json!({ "joint": joint, "budgets": CR_BUDGETS, "card_u": 3 }),
        &format!("c6_{name}.csv"),
        11,
    )
}

fn dsbs_joint() -> Vec<Vec<f64>> {
    vec![vec![0.45, 0.05], vec![0.05, 0.45]]
}

fn indep_joint() -> Vec<Vec<f64>> {
    vec![vec![0.25, 0.25], vec![0.25, 0.25]]
}

fn same_joint() -> Vec<Vec<f64>> {
    vec![vec![0.5, 0.0], vec![0.0, 0.5]]
}

fn c7_reference() -> Value {
    config(
        "protocol",
        json!({
            "n": 200, "mu": 0.05, "alpha": 0.05, "eta": 0.1, "joint": same_joint(),
            "ensemble": { "kind": "deterministic", "gain": { "rows": 1, "cols": 1, "entries": [[2.0, 0.0]] } },
            "p_budget": 1.0, "sigma2": 1.0, "trials": 500
        }),
        "c7_reference.csv",
        77,
    )
}

fn c7_rayleigh() -> Value {
    config(
        "protocol",
        json!({
            "n": 12, "mu": 0.05, "alpha": 0.05, "eta": 0.1, "joint": same_joint(),
            "ensemble": { "kind": "rayleigh_iid", "n_r": 1, "n_t": 1, "variance": 1.0 },
            "p_budget": 1.0, "sigma2": 1.0, "trials": 4000
        }),
        "c7_rayleigh.csv",
        77,
    )
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_siso_closed_form_vs_monte_carlo() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let mc = run(dir.path(), "c1_outage", &c1_outage());
    let exact = run(dir.path(), "c1_siso", &c1_siso());
    let (fast, t) = within(start, 30);

    let n = 100_000.0;
    let mut ok = true;
    let mut details = Vec::new();
    for (row, &eta) in SISO_ETAS.iter().enumerate() {
        let c = exact.real(row, "capacity_bits").unwrap();
        // 95% CI of the empirical quantile, mapped to bits by the delta method.
        let gamma = -(1.0 - eta).ln();
        let hw_prob = 1.96 * (eta * (1.0 - eta) / n).sqrt();
        let ci_bits = hw_prob / (1.0 - eta) * SNR / ((1.0 + SNR * gamma) * LN_2);
        let tol = (0.01f64).max(2.0 * ci_bits);
        let l = mc.real(row, "l_bits").unwrap();
        let u = mc.real(row, "u_bits").unwrap();
        ok &= (l - c).abs() <= tol && (u - c).abs() <= tol;
        details.push(format!("eta={eta}: closed {c:.4} l {l:.4} u {u:.4} tol {tol:.4}"));
    }
    let anchor = (1.0 + SNR * -(0.9f64).ln()).log2();
    let c01 = exact.real(1, "capacity_bits").unwrap();
    ok &= (c01 - anchor).abs() < 1e-9 && (c01 - 1.038).abs() < 5e-4;
    let pass = ok && fast;
    verdict(1, pass, &format!("{}; {:.1}s", details.join("; "), t.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_2_discontinuity_exact_enumeration() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let t = run(dir.path(), "c2", &c2_outage());
    let (fast, el) = within(start, 1);
    let l = t.real(0, "l_bits").unwrap();
    let u = t.real(0, "u_bits").unwrap();
    let exact = t.text(0, "exact") == Some("true");
    let pass = fast && exact && l == 1.0 && (u - 5f64.log2()).abs() < 1e-11;
    verdict(2, pass, &format!("l={l} u={u} exact={exact}; {:.3}s", el.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_3_compound_vs_waterfilling() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let mut worst_diff = 0.0f64;
    let mut worst_gap = 0.0f64;
    for (k, g) in c3_singletons().iter().enumerate() {
        let p = 0.5 + (k % 5) as f64;
        let t = run(dir.path(), &format!("c3_{k}"), &c3_config(dir.path(), k, std::slice::from_ref(g), p));
        let (wf, _) = waterfill_capacity(g, p, 1.0).unwrap();
        worst_diff = worst_diff.max((t.real(0, "value_bits").unwrap() - wf).abs());
        worst_gap = worst_gap.max(t.real(0, "certified_gap").unwrap());
    }
    let diag = vec![
        ChannelState::new(ComplexMatrix::from_diag(&[1.0, 0.0])).unwrap(),
        ChannelState::new(ComplexMatrix::from_diag(&[0.0, 1.0])).unwrap(),
    ];
    let t = run(dir.path(), "c3_diag", &c3_config(dir.path(), 99, &diag, 2.0));
    let v = t.real(0, "value_bits").unwrap();
    let (fast, el) = within(start, 60);
    let pass = fast && worst_diff <= 1e-6 && worst_gap <= 1e-6 && (v - 1.0).abs() <= 1e-4;
    verdict(
        3,
        pass,
        &format!("20 singletons: max |diff| {worst_diff:.2e}, max gap {worst_gap:.2e}; diag instance {v:.6}; {:.1}s", el.as_secs_f64()),
    );
    assert!(pass);
}

fn non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}

fn random_cov(n: usize, p: f64, stream: u64, k: u64) -> InputCovariance {
    let l = random_state(n, n, stream, k);
    let ll = l.gain() * &l.gain().conj_transpose();
    let frac = 0.25 + 0.75 * ((k as f64 * 0.618_033_988_75).fract());
    InputCovariance::new(ll.scale(p * frac / ll.trace().re).hermitian_part(), p).unwrap()
}

#[test]
fn criterion_4_property_suites() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();

    // g_inf on rate grids.
    let scalar = FadingEnsemble::scalar_atoms(vec![(0.2, 0.1), (1.0, 0.3), (4.0, 0.4), (9.0, 0.2)]).unwrap();
    let matrix = FadingEnsemble::matrix_atoms(
        (0..4)
            .map(|k| MatrixAtom { gain: random_state(2, 2, 4, k), prob: 0.25 })
            .collect(),
    )
    .unwrap();
    let rayleigh = FadingEnsemble::rayleigh(1, 1, 1.0, 9).unwrap();
    let mut monotone = true;
    let mut exact_atoms = true;
    for (ens, mc) in [(scalar, 1), (matrix, 1), (rayleigh, 20_000)] {
        let query = OutageQuery::new(0.1, 2.0, 1.0, ens, mc).unwrap();
        let curve = OutageCurve::new(&query).unwrap();
        let values: Vec<f64> = grid.iter().map(|&r| curve.g_inf(r).unwrap().value).collect();
        monotone &= non_decreasing(&values);
        if mc == 1 {
            exact_atoms &= curve.is_exact();
        }
    }

    // Concavity of q ↦ min_g f(g, q).
    let set = CompoundSet::new((0..4).map(|k| random_state(3, 3, 5, k)).collect(), None).unwrap();
    let mut worst_concavity = f64::INFINITY;
    for k in 0..100u64 {
        let a = random_cov(3, 2.0, 6, 2 * k);
        let b = random_cov(3, 2.0, 6, 2 * k + 1);
        let t = (k as f64 * 0.414_213_562_37 + 0.05).fract();
        let mix = &a.matrix().scale(t) + &b.matrix().scale(1.0 - t);
        let mix = InputCovariance::new(mix.hermitian_part(), 2.0).unwrap();
        let excess = min_rate(&set, &mix, 1.0) - (t * min_rate(&set, &a, 1.0) + (1.0 - t) * min_rate(&set, &b, 1.0));
        worst_concavity = worst_concavity.min(excess);
    }

    // Supergradient vs central differences on strictly positive definite inputs.
    let sigma2 = 0.8;
    let noise = NoiseSpec::new(sigma2, 3).unwrap();
    let mut worst_rel = 0.0f64;
    for k in 0..40u64 {
        let g = random_state(3, 2, 7, k);
        let base = random_cov(2, 1.0, 8, k);
        let q = InputCovariance::new(&base.matrix().clone() + &ComplexMatrix::identity(2).scale(0.4), 3.0).unwrap();
        let s = supergradient(&g, &q, sigma2).unwrap();
        let a = random_state(2, 2, 9, k);
        let d = (a.gain() + &a.gain().conj_transpose()).hermitian_part();
        let h = 1e-5;
        let f = |m: ComplexMatrix| rate_functional(&g, &InputCovariance::new(m, 3.0).unwrap(), &noise).unwrap();
        let fd = (f(q.matrix() + &d.scale(h)) - f(q.matrix() - &d.scale(h))) / (2.0 * h);
        let an = s.trace_product_re(&d);
        worst_rel = worst_rel.max((fd - an).abs() / an.abs().max(1e-3));
    }

    let (fast, el) = within(start, 60);
    let pass = fast && monotone && exact_atoms && worst_concavity >= -1e-9 && worst_rel <= 1e-5;
    verdict(
        4,
        pass,
        &format!(
            "g_inf monotone {monotone} (atoms exact {exact_atoms}); min concavity excess {worst_concavity:.2e}; \
             max supergradient rel err {worst_rel:.2e}; {:.1}s",
            el.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_concentration_bounds() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let t = run(dir.path(), "c5", &c5_bounds());
    let (fast, el) = within(start, 300);
    let cells = t.rows.len();
    let mut all_pass = cells == 36;
    let mut analytic = None;
    for r in 0..cells {
        let bound = t.real(r, "bound").unwrap();
        let emp = t.real(r, "empirical").unwrap();
        let trials = t.real(r, "trials").unwrap();
        let slack = 3.0 * (emp * (1.0 - emp) / trials).sqrt();
        all_pass &= emp <= bound + slack && t.text(r, "pass") == Some("true");
        let key = (t.text(r, "kind").unwrap(), t.real(r, "n").unwrap(), t.real(r, "delta").unwrap(), t.real(r, "n_r").unwrap());
        if key == ("power", 1.0, 1.0, 1.0) {
            analytic = Some((emp, bound));
        }
    }
    let (emp, bound) = analytic.expect("analytic cell present");
    let e2 = (-2.0f64).exp();
    let analytic_ok = (emp - e2).abs() <= 3.0 * (e2 * (1.0 - e2) / 1e5).sqrt() && (bound - 2.0 * (-1.0f64).exp()).abs() < 1e-9;
    let pass = fast && all_pass && analytic_ok;
    verdict(
        5,
        pass,
        &format!(
            "{cells} cells within bound+3σ: {all_pass}; power M=1 δ=1 n=1: empirical {emp:.4} (e^-2 = {e2:.4}), bound {bound:.4}; {:.1}s",
            el.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_cr_search_vs_brute_force() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut anchors = true;
    for (name, joint) in [("dsbs", dsbs_joint()), ("indep", indep_joint()), ("same", same_joint())] {
        let t = run(dir.path(), name, &c6_config(name, &joint));
        let dmms = Dmms::new(joint).unwrap();
        for (r, &c) in CR_BUDGETS.iter().enumerate() {
            let v = t.real(r, "value_bits").unwrap();
            match name {
                "indep" => anchors &= (v - c.min(1.0)).abs() <= 1e-6,
                "same" => anchors &= (v - 1.0).abs() <= 1e-6,
                _ => {}
            }
            if name != "same" {
                let brute = brute_force_cr(&dmms, c, 3, 21).unwrap();
                let diff = (v - brute).abs();
                if diff > worst {
                    worst = diff;
                    worst_at = format!("{name} C={c}: search {v:.6} brute {brute:.6}");
                }
            }
        }
    }
    let (fast, el) = within(start, 300);
    let pass = fast && anchors && worst <= 0.01;
    verdict(
        6,
        pass,
        &format!("anchors {anchors}; worst |search - brute| {worst:.4} at {worst_at}; {:.1}s", el.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_7_protocol_reference_run() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();

    // The reference run itself.
    let path = dir.path().join("c7_reference.json");
    std::fs::write(&path, c7_reference().to_string()).unwrap();
    let reference = execute(&RunConfig::load(&path).unwrap(), &Overrides::default());
    let reference_ok = match &reference {
        Ok(s) => {
            let t = ParsedTable::parse(&std::fs::read_to_string(&s.results_path).unwrap()).unwrap();
            let dis = t.real(0, "disagree_off_outage").unwrap();
            let h = t.real(0, "H_K_per_n").unwrap();
            println!("  reference: disagreement {dis:.4}, H(K)/n {h:.4}");
            dis <= 0.05 && h >= 1.0 - 0.15 && t.text(0, "c_bound_ok") == Some("true")
        }
        Err(e) => {
            println!("  reference run not executable: {e}");
            false
        }
    };

    // Alphabet bound from the codebook sizes alone.
    let n = 200;
    let channel = IndexChannel {
        ensemble: FadingEnsemble::deterministic(ChannelState::scalar(Complex64::new(2.0, 0.0))),
        noise: NoiseSpec::new(1.0, 1).unwrap(),
        q_hat: InputCovariance::full_power_scalar(1.0).unwrap(),
    };
    let cfg = ProtocolConfig {
        n,
        mu: 0.05,
        alpha: 0.05,
        eta: 0.1,
        dmms: Dmms::new(same_joint()).unwrap(),
        aux: AuxChannel::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        typ_eps: default_typ_eps(n),
        channel,
        trials: 500,
        master_seed: 77,
        codebook_replicas: 1,
    };
    let sizes = cfg.sizes().unwrap();
    let alphabet = sizes.log2_alphabet_upper();
    let c_bits = cfg.dmms.entropy_x() + cfg.mu + 1.0;
    let alphabet_ok = alphabet <= n as f64 * c_bits;
    println!(
        "  alphabet: log2 |K| <= {alphabet:.2} vs n(H(X)+mu+1) = {:.2}; log2 N1 = {:.1}, log2 N2 = {:.1}",
        n as f64 * c_bits,
        sizes.log2_n1_target,
        sizes.log2_n2_target
    );

    // Scalar Rayleigh variant at desk scale.
    let t = run(dir.path(), "c7_rayleigh", &c7_rayleigh());
    let n1 = t.real(0, "N1").unwrap();
    let bits = (n1 + 1.0).log2() / 12.0;
    let s = bits.exp2() - 1.0;
    let expected = 1.0 - (-s).exp();
    let trials = t.real(0, "trials").unwrap();
    let frac = t.real(0, "outage_frac").unwrap();
    let sd = (expected * (1.0 - expected) / trials).sqrt();
    let rayleigh_ok = (frac - expected).abs() <= 3.0 * sd;
    println!("  rayleigh variant: outage {frac:.4} vs 1-e^-s = {expected:.4} (s = {s:.4}, 3σ = {:.4})", 3.0 * sd);

    let (fast, el) = within(start, 180);
    let pass = fast && reference_ok && alphabet_ok && rayleigh_ok;
    verdict(
        7,
        pass,
        &format!(
            "reference run {reference_ok}; alphabet bound {alphabet_ok}; rayleigh outage fraction {rayleigh_ok}; {:.1}s",
            el.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_byte_identical_across_worker_counts() {
    let start = Instant::now();
    let mut configs: Vec<(String, Value)> = vec![
        ("c1_outage".into(), c1_outage()),
        ("c1_siso".into(), c1_siso()),
        ("c2".into(), c2_outage()),
        ("c5".into(), c5_bounds()),
        ("dsbs".into(), c6_config("dsbs", &dsbs_joint())),
        ("indep".into(), c6_config("indep", &indep_joint())),
        ("c7_rayleigh".into(), c7_rayleigh()),
    ];
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let singletons = c3_singletons();
    for k in [0usize, 7, 15] {
        for d in &dirs {
            let cfg = c3_config(d.path(), k, std::slice::from_ref(&singletons[k]), 1.5);
            configs.push((format!("c3_{k}"), cfg));
        }
    }
    configs.dedup_by(|a, b| a.0 == b.0);

    let mut mismatched = Vec::new();
    for (name, cfg) in &configs {
        let mut outputs = Vec::new();
        for (d, threads) in dirs.iter().zip([1usize, 4]) {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let (path, _) = pool.install(|| run_raw(d.path(), name, cfg));
            outputs.push(std::fs::read(path).unwrap());
        }
        if outputs[0] != outputs[1] {
            mismatched.push(name.clone());
        }
    }
    let pass = mismatched.is_empty();
    verdict(
        8,
        pass,
        &format!("{} result files compared at 1 and 4 workers, mismatched: {mismatched:?}; {:.1}s", configs.len(), start.elapsed().as_secs_f64()),
    );
    assert!(pass);
}
