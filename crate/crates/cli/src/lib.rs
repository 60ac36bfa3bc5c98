//! Batch front-end for `outcr-core`: one JSON config drives one run, which
//! writes a CSV results file and a `<results>.meta.json` sidecar.
//!
//! Exit statuses: 0 on success, 2 on an unreadable or invalid config (or an
//! unwritable output), 3 when a result was written but a solver could not
//! certify it.

pub mod config;
pub mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use outcr_core::channel::{ChannelState, InputCovariance, NoiseSpec};
use outcr_core::compound::{self, CompoundSet, CompoundSettings};
use outcr_core::concentration::{empirical_tail_check, TailParams};
use outcr_core::cr::{cr_rate_function, AuxChannel, Dmms};
use outcr_core::hermitian::ComplexMatrix;
use outcr_core::outage::{self, OutageQuery, PROB_TOL};
use outcr_core::protocol::{default_typ_eps, run_trials, IndexChannel, ProtocolConfig};
use serde_json::json;
use thiserror::Error;

pub use config::{Command, Params, RunConfig};
use config::{parse_state_file, BoundsParams, CompoundParams, CrCurveParams, OutageParams, ProtocolParams, SisoParams, TailKind};
pub use table::{fmt_real, Cell, ParsedTable, Table};

#[derive(Debug, Error)]
pub enum CliError {
    /// Config unreadable or malformed; the message is `file:line:col: ...`.
    #[error("{0}")]
    Config(String),
    /// Parameters rejected by a solver.
    #[error("invalid parameters: {0}")]
    Invalid(#[from] outcr_core::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Command-line overrides of config fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mc_samples: Option<usize>,
}

/// What a completed run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub results_path: PathBuf,
    pub meta_path: PathBuf,
    pub table: Table,
    /// False when some solver stopped short of its tolerance.
    pub certified: bool,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.certified {
            0
        } else {
            3
        }
    }
}

struct Outcome {
    table: Table,
    certified: bool,
    tolerances: serde_json::Value,
}

/// Apply overrides, run the command, write results and sidecar.
pub fn execute(cfg: &RunConfig, ov: &Overrides) -> Result<RunSummary, CliError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &ov.out {
        cfg.output_path = out.clone();
    }
    if let Some(mc) = ov.mc_samples {
        match &mut cfg.params {
            Params::Outage(p) | Params::Simo(p) => p.mc_samples = mc,
            _ => eprintln!("note: --mc-samples has no effect on `{}`", cfg.command.name()),
        }
    }

    let results_path = cfg.resolve(&cfg.output_path);
    let start = Instant::now();
    let outcome = match &cfg.params {
        Params::Outage(p) => run_outage(p, cfg.seed)?,
        Params::Simo(p) => run_simo(p, cfg.seed)?,
        Params::Siso(p) => run_siso(p)?,
        Params::Compound(p) => run_compound(p, &cfg)?,
        Params::Bounds(p) => run_bounds(p, cfg.seed)?,
        Params::CrCurve(p) => run_cr_curve(p, cfg.seed)?,
        Params::Protocol(p) => run_protocol(p, cfg.seed)?,
    };
    let wall = start.elapsed().as_secs_f64();

    write_file(&results_path, &outcome.table.render())?;
    let meta_path = sidecar_path(&results_path);
    let meta = json!({
        "command": cfg.command,
        "params": cfg.params,
        "seed": cfg.seed,
        "output_path": results_path,
        "config": cfg.source_name,
        "overrides": {
            "seed": ov.seed,
            "out": ov.out,
            "mc_samples": ov.mc_samples,
        },
        "schema": outcome.table.schema,
        "rows": outcome.table.rows.len(),
        "certified": outcome.certified,
        "tolerances": outcome.tolerances,
        "wall_time_s": wall,
        "versions": { "outcr-cli": env!("CARGO_PKG_VERSION") },
    });
    let meta_text = serde_json::to_string_pretty(&meta).expect("metadata is plain JSON");
    write_file(&meta_path, &(meta_text + "\n"))?;

    Ok(RunSummary { results_path, meta_path, table: outcome.table, certified: outcome.certified })
}

/// `results.csv` → `results.csv.meta.json`.
pub fn sidecar_path(results: &Path) -> PathBuf {
    let mut s = results.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

/// Load, execute and report; returns the process exit status.
pub fn run_config_file(path: &Path, ov: &Overrides) -> i32 {
    let result = RunConfig::load(path).and_then(|cfg| execute(&cfg, ov));
    match result {
        Ok(summary) => {
            if !summary.certified {
                eprintln!("warning: results written to {} are not certified", summary.results_path.display());
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn outage_query(p: &OutageParams, eta: f64, seed: u64) -> Result<OutageQuery, CliError> {
    let q = OutageQuery {
        eta,
        p_budget: p.p_budget,
        sigma2: p.sigma2,
        ensemble: p.ensemble.clone().with_seed(seed),
        mc_samples: p.mc_samples,
        rate_tol: p.rate_tol,
        q_search: p.q_search,
    };
    q.validate()?;
    Ok(q)
}

fn outage_tolerances(p: &OutageParams) -> serde_json::Value {
    json!({
        "rate_tol": p.rate_tol,
        "prob_tol": PROB_TOL,
        "max_exact_atoms": outage::MAX_EXACT_ATOMS,
        "q_search": p.q_search,
    })
}

fn run_outage(p: &OutageParams, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new("outage", &["eta", "l_bits", "u_bits", "mc_samples", "rate_tol", "seed", "exact", "certified"]);
    let mut certified = true;
    for eta in p.eta.to_vec() {
        let b = outage::outage_bounds(&outage_query(p, eta, seed)?)?;
        certified &= b.certified;
        table.push(vec![
            eta.into(),
            b.l.into(),
            b.u.into(),
            p.mc_samples.into(),
            p.rate_tol.into(),
            seed.into(),
            b.exact.into(),
            b.certified.into(),
        ]);
    }
    Ok(Outcome { table, certified, tolerances: outage_tolerances(p) })
}

fn run_simo(p: &OutageParams, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new("simo", &["eta", "capacity_bits", "mc_samples", "seed"]);
    for eta in p.eta.to_vec() {
        let c = outage::simo_outage_capacity(&outage_query(p, eta, seed)?)?;
        table.push(vec![eta.into(), c.into(), p.mc_samples.into(), seed.into()]);
    }
    Ok(Outcome { table, certified: true, tolerances: outage_tolerances(p) })
}

fn run_siso(p: &SisoParams) -> Result<Outcome, CliError> {
    let mut table = Table::new("siso", &["eta", "gamma0", "capacity_bits"]);
    for eta in p.eta.to_vec() {
        let gamma0 = p.law.gamma0(eta)?;
        let c = outage::siso_outage_capacity(&p.law, eta, p.p_budget, p.sigma2)?;
        table.push(vec![eta.into(), gamma0.into(), c.into()]);
    }
    Ok(Outcome { table, certified: true, tolerances: json!({ "prob_tol": PROB_TOL }) })
}

/// `rows cols re im ...` with every number at full CSV precision.
fn matrix_field(m: &ComplexMatrix) -> String {
    let mut parts = vec![m.rows().to_string(), m.cols().to_string()];
    for z in m.entries() {
        parts.push(fmt_real(z.re));
        parts.push(fmt_real(z.im));
    }
    parts.join(" ")
}

fn run_compound(p: &CompoundParams, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let matrices = match (&p.states_file, &p.states) {
        (Some(file), _) => {
            let path = cfg.resolve(Path::new(file));
            let name = path.display().to_string();
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{name}:1:1: cannot read state file: {e}")))?;
            parse_state_file(&name, &text)?
        }
        (None, Some(states)) => states.clone(),
        (None, None) => return Err(CliError::Config(format!("{}: compound needs `states_file` or `states`", cfg.source_name))),
    };
    let states = matrices.into_iter().map(ChannelState::new).collect::<Result<Vec<_>, _>>()?;
    let set = CompoundSet::new(states, p.norm_bound)?;
    let settings = CompoundSettings { tol: p.tol, max_iters: p.max_iters, ..CompoundSettings::default() };
    let sol = compound::compound_capacity_with(&set, p.p_budget, p.sigma2, settings)?;
    let mut table = Table::new("compound", &["value_bits", "certified_gap", "iterations", "certified", "q_star"]);
    table.push(vec![
        sol.value.into(),
        sol.certified_gap.into(),
        sol.iterations.into(),
        sol.certified.into(),
        matrix_field(sol.q_star.matrix()).into(),
    ]);
    Ok(Outcome {
        table,
        certified: sol.certified,
        tolerances: json!({
            "tol": settings.tol,
            "max_iters": settings.max_iters,
            "certify_every": settings.certify_every,
            "active_tol": compound::ACTIVE_TOL,
        }),
    })
}

fn run_bounds(p: &BoundsParams, seed: u64) -> Result<Outcome, CliError> {
    let mut cells = Vec::new();
    for &kind in &p.kinds {
        for &n_r in &p.n_r {
            for &n in &p.n {
                for &delta in &p.delta {
                    let params = match kind {
                        TailKind::InfoDensity => TailParams::InfoDensity {
                            n,
                            delta,
                            g: ChannelState::new(ComplexMatrix::identity(n_r))?,
                            q: InputCovariance::scaled_identity(n_r, p.power * n_r as f64)?,
                            sigma2: p.sigma2,
                        },
                        TailKind::Power => TailParams::Power { n, delta, m_trace: p.m_trace, dim: n_r },
                    };
                    cells.push(params);
                }
            }
        }
    }
    let mut table = Table::new("bounds", &["kind", "n", "delta", "bound", "empirical", "trials", "pass", "n_r", "log2_bound"]);
    for (k, params) in cells.iter().enumerate() {
        let r = empirical_tail_check(params, p.trials, seed, k as u64)?;
        table.push(vec![
            params.kind().to_string().into(),
            params.n().into(),
            params.delta().into(),
            r.bound.into(),
            r.empirical.into(),
            r.trials.into(),
            r.pass.into(),
            params.dim().into(),
            r.log2_bound.into(),
        ]);
    }
    Ok(Outcome { table, certified: true, tolerances: json!({ "slack": "3 binomial standard errors" }) })
}

fn run_cr_curve(p: &CrCurveParams, seed: u64) -> Result<Outcome, CliError> {
    let dmms = Dmms::new(p.joint.clone())?;
    let card_u = p.card_u.unwrap_or(dmms.nx() + 1);
    let search = outcr_core::cr::CrSearch { seed, ..p.search };
    let mut table = Table::new("cr-curve", &["C_bits", "value_bits", "feasible_gap"]);
    for &c in &p.budgets {
        let pt = cr_rate_function(&dmms, c, card_u, &search)?;
        table.push(vec![c.into(), pt.value.into(), pt.feasible_gap.into()]);
    }
    Ok(Outcome {
        table,
        certified: true,
        tolerances: json!({ "card_u": card_u, "search": search, "feasibility_tol": outcr_core::cr::FEASIBILITY_TOL }),
    })
}

fn protocol_config(p: &ProtocolParams, n: usize, seed: u64) -> Result<ProtocolConfig, CliError> {
    let dmms = Dmms::new(p.joint.clone())?;
    let aux = match &p.aux {
        Some(rows) => AuxChannel::new(rows.clone())?,
        None => {
            let k = dmms.nx();
            AuxChannel::new((0..k).map(|x| (0..k).map(|u| if u == x { 1.0 } else { 0.0 }).collect()).collect())?
        }
    };
    let (n_r, n_t) = p.ensemble.dims();
    let q_hat = match &p.q_hat {
        Some(m) => InputCovariance::new(m.clone(), p.p_budget)?,
        None => InputCovariance::scaled_identity(n_t, p.p_budget)?,
    };
    let config = ProtocolConfig {
        n,
        mu: p.mu,
        alpha: p.alpha,
        eta: p.eta,
        dmms,
        aux,
        typ_eps: p.typ_eps.unwrap_or_else(|| default_typ_eps(n)),
        channel: IndexChannel { ensemble: p.ensemble.clone().with_seed(seed), noise: NoiseSpec::new(p.sigma2, n_r)?, q_hat },
        trials: p.trials,
        master_seed: seed,
        codebook_replicas: p.codebook_replicas,
    };
    config.validate()?;
    Ok(config)
}

fn run_protocol(p: &ProtocolParams, seed: u64) -> Result<Outcome, CliError> {
    let mut table = Table::new(
        "protocol",
        &["n", "trials", "outage_frac", "disagree_off_outage", "H_K_per_n", "tv_uniform", "N1", "N2", "c_bound_ok"],
    );
    let mut eps = Vec::new();
    for n in p.n.to_vec() {
        let config = protocol_config(p, n, seed)?;
        eps.push(config.typ_eps);
        let (s, _) = run_trials(&config)?;
        table.push(vec![
            n.into(),
            (s.trials * s.replicas).into(),
            s.outage_frac.into(),
            s.disagree_off_outage.unwrap_or(f64::NAN).into(),
            s.h_k_per_n.into(),
            s.tv_uniform.into(),
            s.n1.into(),
            s.n2.into(),
            s.c_bound_ok.into(),
        ]);
    }
    Ok(Outcome { table, certified: true, tolerances: json!({ "typ_eps": eps, "prob_tol": PROB_TOL }) })
}
