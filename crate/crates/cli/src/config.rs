//! Run configuration: one JSON document per run.
//!
//! ```json
//! { "command": "siso",
//!   "params": { "law": "exponential", "mean": 1.0, "eta": 0.1, "p_budget": 10.0, "sigma2": 1.0 },
//!   "output_path": "siso.csv",
//!   "seed": 7 }
//! ```
//!
//! Relative paths (`output_path`, compound `states_file`) resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use outcr_core::channel::FadingEnsemble;
use outcr_core::compound::CompoundSettings;
use outcr_core::cr::CrSearch;
use outcr_core::hermitian::ComplexMatrix;
use outcr_core::outage::{ScalarLaw, SearchSettings};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Outage,
    Simo,
    Siso,
    Compound,
    Bounds,
    CrCurve,
    Protocol,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Outage => "outage",
            Command::Simo => "simo",
            Command::Siso => "siso",
            Command::Compound => "compound",
            Command::Bounds => "bounds",
            Command::CrCurve => "cr-curve",
            Command::Protocol => "protocol",
        }
    }
}

/// A scalar or a list, so `"eta": 0.1` and `"eta": [0.05, 0.1]` both parse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_mc_samples() -> usize {
    10_000
}

fn default_rate_tol() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageParams {
    pub eta: OneOrMany<f64>,
    pub p_budget: f64,
    pub sigma2: f64,
    pub ensemble: FadingEnsemble,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_rate_tol")]
    pub rate_tol: f64,
    #[serde(default)]
    pub q_search: SearchSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SisoParams {
    #[serde(flatten)]
    pub law: ScalarLaw,
    pub eta: OneOrMany<f64>,
    pub p_budget: f64,
    pub sigma2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompoundParams {
    /// State file, one matrix per line: `rows cols re im re im ...`.
    #[serde(default)]
    pub states_file: Option<String>,
    /// Inline states, used when no file is given.
    #[serde(default)]
    pub states: Option<Vec<ComplexMatrix>>,
    pub p_budget: f64,
    pub sigma2: f64,
    #[serde(default)]
    pub norm_bound: Option<f64>,
    #[serde(default = "default_compound_tol")]
    pub tol: f64,
    #[serde(default = "default_compound_iters")]
    pub max_iters: usize,
}

fn default_compound_tol() -> f64 {
    CompoundSettings::default().tol
}

fn default_compound_iters() -> usize {
    CompoundSettings::default().max_iters
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    InfoDensity,
    Power,
}

fn both_kinds() -> Vec<TailKind> {
    vec![TailKind::InfoDensity, TailKind::Power]
}

fn default_trials() -> usize {
    100_000
}

fn unit() -> f64 {
    1.0
}

/// Grid of tail checks. The density kind uses `g = I`, `Q = power·I` of size
/// `N_R`; the power kind uses vectors of dimension `N_R` and trace `m_trace`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
    pub n_r: Vec<usize>,
    #[serde(default = "both_kinds")]
    pub kinds: Vec<TailKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "unit")]
    pub m_trace: f64,
    #[serde(default = "unit")]
    pub power: f64,
    #[serde(default = "unit")]
    pub sigma2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrCurveParams {
    pub joint: Vec<Vec<f64>>,
    pub budgets: Vec<f64>,
    /// Defaults to `|X| + 1`.
    #[serde(default)]
    pub card_u: Option<usize>,
    #[serde(default)]
    pub search: CrSearch,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub n: OneOrMany<usize>,
    pub mu: f64,
    pub alpha: f64,
    pub eta: f64,
    pub joint: Vec<Vec<f64>>,
    /// Test channel rows `P(u|x)`; `U = X` when absent.
    #[serde(default)]
    pub aux: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub typ_eps: Option<f64>,
    pub ensemble: FadingEnsemble,
    pub p_budget: f64,
    pub sigma2: f64,
    /// Input covariance of the index channel; `(P/N_T)·I` when absent.
    #[serde(default)]
    pub q_hat: Option<ComplexMatrix>,
    pub trials: usize,
    #[serde(default = "one")]
    pub codebook_replicas: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Outage(OutageParams),
    Simo(OutageParams),
    Siso(SisoParams),
    Compound(CompoundParams),
    Bounds(BoundsParams),
    CrCurve(CrCurveParams),
    Protocol(ProtocolParams),
}

/// A parsed config file.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub output_path: PathBuf,
    pub seed: u64,
    /// Directory used to resolve relative paths.
    pub base_dir: PathBuf,
    pub source_name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig<'a> {
    command: Command,
    #[serde(borrow, alias = "parameters")]
    params: &'a RawValue,
    output_path: String,
    seed: u64,
}

/// Human-readable `name:line:col: message` for a serde_json error whose
/// positions are relative to `offset` bytes into `src`.
fn anchored(name: &str, src: &str, offset: usize, err: &serde_json::Error) -> CliError {
    let prefix = &src[..offset];
    let base_line = prefix.matches('\n').count() + 1;
    let base_col = offset - prefix.rfind('\n').map_or(0, |p| p + 1) + 1;
    let (line, col) = if err.line() <= 1 {
        (base_line, base_col + err.column().saturating_sub(1))
    } else {
        (base_line + err.line() - 1, err.column())
    };
    let text = err.to_string();
    let msg = text.rfind(" at line ").map_or(text.as_str(), |p| &text[..p]);
    CliError::Config(format!("{name}:{line}:{col}: {msg}"))
}

fn parse_params<'a, T: Deserialize<'a>>(name: &str, src: &str, raw: &'a RawValue) -> Result<T, CliError> {
    let offset = raw.get().as_ptr() as usize - src.as_ptr() as usize;
    serde_json::from_str(raw.get()).map_err(|e| anchored(name, src, offset, &e))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let name = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{name}:1:1: cannot read config: {e}")))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&src, &name, base_dir)
    }

    pub fn parse(src: &str, name: &str, base_dir: PathBuf) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(src).map_err(|e| anchored(name, src, 0, &e))?;
        let params = match raw.command {
            Command::Outage => Params::Outage(parse_params(name, src, raw.params)?),
            Command::Simo => Params::Simo(parse_params(name, src, raw.params)?),
            Command::Siso => Params::Siso(parse_params(name, src, raw.params)?),
            Command::Compound => Params::Compound(parse_params(name, src, raw.params)?),
            Command::Bounds => Params::Bounds(parse_params(name, src, raw.params)?),
            Command::CrCurve => Params::CrCurve(parse_params(name, src, raw.params)?),
            Command::Protocol => Params::Protocol(parse_params(name, src, raw.params)?),
        };
        Ok(Self {
            command: raw.command,
            params,
            output_path: PathBuf::from(raw.output_path),
            seed: raw.seed,
            base_dir,
            source_name: name.to_string(),
        })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Parse a state file: one `rows cols re im ...` record per line; blank lines
/// and lines starting with `#` are skipped.
pub fn parse_state_file(name: &str, text: &str) -> Result<Vec<ComplexMatrix>, CliError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| CliError::Config(format!("{name}:{}:1: {msg}", k + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(bad("expected `rows cols` followed by entries".into()));
        }
        let rows: usize = fields[0].parse().map_err(|e| bad(format!("bad row count: {e}")))?;
        let cols: usize = fields[1].parse().map_err(|e| bad(format!("bad column count: {e}")))?;
        let nums = fields[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("bad entry: {e}")))?;
        if nums.len() != 2 * rows * cols {
            return Err(bad(format!("{rows}x{cols} matrix needs {} numbers, found {}", 2 * rows * cols, nums.len())));
        }
        let data = nums.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        out.push(ComplexMatrix::new(rows, cols, data).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}
