//! Experiment configuration files.
//!
//! The format is line oriented. `#` starts a comment. `[name]` opens a
//! section; inside `[model]`, `[experiment]` and `[output]` every line is
//! `key = value`, where list values are whitespace separated. The
//! `[covariance]` section is a matrix block: one row per line, entries
//! separated by whitespace. The full key reference, with defaults, is
//! produced by [`reference`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use pacer_core::latent::symmetrize;
use pacer_core::programs::{MpcConfig, RiskMode};
use pacer_core::{LatentDistribution, Layout};

use crate::error::CliError;

/// Asymmetry above which a loaded covariance triggers a warning.
pub const ASYMMETRY_WARN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: ExperimentSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_ill: usize,
    pub n_liq: usize,
    pub mean: Vec<f64>,
    /// Symmetric after loading.
    pub cov: DMatrix<f64>,
    /// `None` means the contiguous `[λ | δ | R_ill | R_liq]` layout.
    pub layout: Option<Layout>,
    pub mean_samples: usize,
    pub mean_seed: u64,
}

impl ModelConfig {
    pub fn layout(&self) -> Layout {
        self.layout.clone().unwrap_or_else(|| Layout::contiguous(self.n_ill, self.n_liq))
    }

    pub fn distribution(&self) -> Result<LatentDistribution, CliError> {
        LatentDistribution::new(self.mean.clone(), self.cov.clone(), self.n_ill, self.n_liq, self.layout())
            .map_err(CliError::Model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Impulse,
    Step,
    Plan,
    Simulate,
    Frontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    OpenLoop,
    CommitmentMpc,
    AllCash,
    Heuristic,
    Mpc,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Planning {
    /// Re-plan to the end of the run.
    Shrinking,
    Receding(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaGrid {
    Range { min: f64, max: f64, count: usize },
    List(Vec<f64>),
}

impl SigmaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Range { min, max, count } => pacer_core::frontier::sigma_grid(*min, *max, *count),
            Self::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub i_targ: f64,
    pub gamma_smooth: f64,
    pub n_lim: Option<f64>,
    /// First period counted in the delayed RMS.
    pub rms_start: usize,
    pub planning: Planning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub periods: usize,
    /// Stochastic paths. For impulse and step runs, zero skips the Monte
    /// Carlo check of the mean response.
    pub paths: usize,
    pub seed: u64,
    pub policies: Vec<PolicyKind>,
    pub tracking: Tracking,
    /// `mpc.sigma` is the risk bound of simulate runs.
    pub mpc: MpcConfig,
    pub kappa: Option<f64>,
    pub grid: SigmaGrid,
    /// Simulated lengths of a frontier run; each gets its own set of curves.
    pub frontier_periods: Vec<usize>,
    pub write_paths: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub prefix: String,
}

// ---------------------------------------------------------------------------
// Names

impl ExperimentKind {
    pub const ALL: [Self; 5] = [Self::Impulse, Self::Step, Self::Plan, Self::Simulate, Self::Frontier];

    pub fn name(self) -> &'static str {
        match self {
            Self::Impulse => "impulse",
            Self::Step => "step",
            Self::Plan => "plan",
            Self::Simulate => "simulate",
            Self::Frontier => "frontier",
        }
    }
}

impl PolicyKind {
    pub const ALL: [Self; 6] = [
        Self::OpenLoop,
        Self::CommitmentMpc,
        Self::AllCash,
        Self::Heuristic,
        Self::Mpc,
        Self::Relaxed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::OpenLoop => "open_loop",
            Self::CommitmentMpc => "commitment_mpc",
            Self::AllCash => "all_cash",
            Self::Heuristic => "heuristic",
            Self::Mpc => "mpc",
            Self::Relaxed => "relaxed",
        }
    }

    /// Whether the policy drives commitments only (no liquid side).
    pub fn is_tracking(self) -> bool {
        matches!(self, Self::OpenLoop | Self::CommitmentMpc)
    }
}

fn by_name<T: Copy>(all: &[T], name: impl Fn(T) -> &'static str, s: &str) -> Option<T> {
    all.iter().copied().find(|v| name(*v) == s)
}

// ---------------------------------------------------------------------------
// Raw document

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
    rows: Vec<(Vec<f64>, usize)>,
}

const SECTIONS: [&str; 4] = ["model", "covariance", "experiment", "output"];

fn parse_document(text: &str) -> Result<BTreeMap<String, Section>, CliError> {
    let mut doc: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::parse(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(CliError::parse(line, format!("unknown section [{name}]")));
            }
            if doc.contains_key(name) {
                return Err(CliError::parse(line, format!("section [{name}] appears twice")));
            }
            doc.insert(name.to_string(), Section { line, ..Section::default() });
            current = Some(name.to_string());
            continue;
        }
        let name = current.as_ref().ok_or_else(|| CliError::parse(line, "content before the first section"))?;
        let section = doc.get_mut(name).expect("section was inserted");
        if name == "covariance" {
            let row = content
                .split_whitespace()
                .map(|t| parse_f64(t, line))
                .collect::<Result<Vec<_>, _>>()?;
            section.rows.push((row, line));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::parse(line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CliError::parse(line, "empty key"));
        }
        if section.entries.insert(key.to_string(), (value.trim().to_string(), line)).is_some() {
            return Err(CliError::parse(line, format!("`{key}` set twice in [{name}]")));
        }
    }
    Ok(doc)
}

fn parse_f64(t: &str, line: usize) -> Result<f64, CliError> {
    let v: f64 = t.parse().map_err(|_| CliError::parse(line, format!("`{t}` is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::parse(line, format!("`{t}` is not finite")));
    }
    Ok(v)
}

/// Typed access to one key-value section. Every key must be consumed, so
/// misspelled keys are reported instead of silently ignored.
struct Fields {
    name: &'static str,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

impl Fields {
    fn take(doc: &mut BTreeMap<String, Section>, name: &'static str) -> Self {
        let s = doc.remove(name).unwrap_or_default();
        Self { name, line: s.line, entries: s.entries }
    }

    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<(String, usize), CliError> {
        self.raw(key).ok_or_else(|| CliError::Missing { section: self.name, key: key.to_string(), line: self.line })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::parse(line, format!("`{key}` must be {what}, found `{v}`"))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        Ok(self.parse(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.parse(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, line)) => parse_f64(&v, line),
        }
    }

    /// A number, or `none`.
    fn opt_f64(&mut self, key: &str, default: Option<f64>) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, _)) if v == "none" => Ok(None),
            Some((v, line)) => parse_f64(&v, line).map(Some),
        }
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        Ok(self.parse(key, "true or false")?.unwrap_or(default))
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<(Vec<f64>, usize)>, CliError> {
        self.raw(key)
            .map(|(v, line)| {
                v.split_whitespace()
                    .map(|t| parse_f64(t, line))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|l| (l, line))
            })
            .transpose()
    }

    fn usize_list(&mut self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        self.raw(key)
            .map(|(v, line)| {
                v.split_whitespace()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| CliError::parse(line, format!("`{t}` is not a nonnegative integer")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.into_iter().min_by_key(|(_, (_, line))| *line) {
            Some((key, (_, line))) => Err(CliError::parse(line, format!("unknown key `{key}` in [{}]", self.name))),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Loading

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut doc = parse_document(text)?;
    let cov_section = doc.remove("covariance");
    let model = parse_model(Fields::take(&mut doc, "model"), cov_section)?;
    let experiment = parse_experiment(Fields::take(&mut doc, "experiment"), &model)?;
    let mut out = Fields::take(&mut doc, "output");
    let output = OutputConfig {
        dir: out.raw("dir").map_or_else(|| "out".to_string(), |v| v.0),
        prefix: out.raw("prefix").map_or_else(String::new, |v| v.0),
    };
    out.finish()?;
    Ok(ExperimentConfig { model, experiment, output })
}

fn parse_model(mut f: Fields, cov: Option<Section>) -> Result<ModelConfig, CliError> {
    let n_ill: usize = f.parse("n_ill", "a nonnegative integer")?.ok_or(CliError::Missing {
        section: "model",
        key: "n_ill".into(),
        line: f.line,
    })?;
    let n_liq = f.usize("n_liq", 0)?;
    let dim = 3 * n_ill + n_liq;
    let (mean, mean_line) = f.f64_list("mean")?.ok_or(CliError::Missing {
        section: "model",
        key: "mean".into(),
        line: f.line,
    })?;
    if n_ill == 0 {
        return Err(CliError::parse(f.line, "the model needs at least one illiquid asset"));
    }
    if mean.len() != dim {
        return Err(CliError::parse(
            mean_line,
            format!("mean has {} entries; n_ill = {n_ill} and n_liq = {n_liq} need {dim}", mean.len()),
        ));
    }

    let cov = cov.ok_or(CliError::Missing { section: "covariance", key: "matrix rows".into(), line: 0 })?;
    if cov.rows.len() != dim {
        return Err(CliError::parse(cov.line, format!("covariance has {} rows, expected {dim}", cov.rows.len())));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for (i, (row, line)) in cov.rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::parse(*line, format!("covariance row has {} entries, expected {dim}", row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let (cov_sym, asym) = symmetrize(&m);
    if asym > ASYMMETRY_WARN {
        warn!("covariance asymmetry {asym:e} exceeds {ASYMMETRY_WARN:e}; using (Σ + Σᵀ)/2");
    }

    let blocks = ["lambda", "delta", "ret_ill", "ret_liq"];
    let given = blocks.map(|b| f.usize_list(b));
    let layout_line = f.line;
    let layout = match f.raw("layout") {
        None => None,
        Some((v, _)) if v == "contiguous" => None,
        Some((v, line)) if v == "explicit" => Some(line),
        Some((v, line)) => return Err(CliError::parse(line, format!("layout must be contiguous or explicit, found `{v}`"))),
    };
    let given = given.into_iter().collect::<Result<Vec<_>, _>>()?;
    let layout = match layout {
        None => {
            if given.iter().any(Option::is_some) {
                return Err(CliError::parse(layout_line, "block indices need `layout = explicit`"));
            }
            None
        }
        Some(line) => {
            let mut ranges = Vec::new();
            for (name, idx) in blocks.iter().zip(given) {
                let idx = idx.ok_or_else(|| CliError::parse(line, format!("explicit layout needs `{name}`")))?;
                ranges.push(to_range(&idx).ok_or_else(|| {
                    CliError::parse(line, format!("`{name}` must list consecutive indices"))
                })?);
            }
            let [lambda, delta, ret_ill, ret_liq]: [_; 4] = ranges.try_into().expect("four blocks");
            Some(Layout { lambda, delta, ret_ill, ret_liq })
        }
    };

    let model = ModelConfig {
        n_ill,
        n_liq,
        mean,
        cov: cov_sym,
        layout,
        mean_samples: f.usize("mean_samples", 1_000_000)?,
        mean_seed: f.u64("mean_seed", 12345)?,
    };
    f.finish()?;
    model.distribution().map_err(|e| CliError::parse(cov.line, e.to_string()))?;
    Ok(model)
}

fn to_range(idx: &[usize]) -> Option<std::ops::Range<usize>> {
    let start = idx.first().copied().unwrap_or(0);
    idx.iter().enumerate().all(|(k, v)| *v == start + k).then_some(start..start + idx.len())
}

fn parse_experiment(mut f: Fields, model: &ModelConfig) -> Result<ExperimentSection, CliError> {
    let (kind_s, kind_line) = f.required("kind")?;
    let kind = by_name(&ExperimentKind::ALL, ExperimentKind::name, &kind_s).ok_or_else(|| {
        CliError::parse(kind_line, format!("unknown experiment kind `{kind_s}`"))
    })?;
    let tracking_run = model.n_liq == 0;

    let policies = match f.raw("policies") {
        Some((v, line)) => v
            .split_whitespace()
            .map(|p| {
                by_name(&PolicyKind::ALL, PolicyKind::name, p)
                    .ok_or_else(|| CliError::parse(line, format!("unknown policy `{p}`")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => default_policies(kind, tracking_run),
    };
    if kind == ExperimentKind::Simulate {
        if let Some(p) = policies.iter().find(|p| p.is_tracking() != tracking_run || **p == PolicyKind::Relaxed) {
            let why = if tracking_run { "a model without liquid assets" } else { "a model with liquid assets" };
            return Err(CliError::parse(f.line, format!("policy {} cannot be simulated on {why}", p.name())));
        }
    }
    if kind == ExperimentKind::Frontier {
        if tracking_run {
            return Err(CliError::parse(f.line, "frontier runs need liquid assets"));
        }
        if let Some(p) = policies.iter().find(|p| p.is_tracking() || **p == PolicyKind::AllCash) {
            return Err(CliError::parse(f.line, format!("policy {} has no frontier", p.name())));
        }
    }

    let periods = f.usize("periods", 20)?;
    if periods == 0 {
        return Err(CliError::parse(f.line, "periods must be at least 1"));
    }
    let paths_default = match kind {
        ExperimentKind::Impulse | ExperimentKind::Step | ExperimentKind::Plan => 0,
        ExperimentKind::Simulate => 100,
        ExperimentKind::Frontier => 200,
    };
    let paths = f.usize("paths", paths_default)?;
    let seed = f.u64("seed", 1)?;

    let planning = match f.raw("planning") {
        None => Planning::Shrinking,
        Some((v, _)) if v == "shrinking" => Planning::Shrinking,
        Some((v, line)) => match v.strip_prefix("receding").map(str::trim) {
            Some(h) => Planning::Receding(
                h.parse()
                    .ok()
                    .filter(|h| *h >= 1)
                    .ok_or_else(|| CliError::parse(line, "use `planning = receding H` with H ≥ 1"))?,
            ),
            None => return Err(CliError::parse(line, format!("planning must be shrinking or receding H, found `{v}`"))),
        },
    };
    let tracking = Tracking {
        i_targ: f.f64("i_targ", 1.0)?,
        gamma_smooth: f.f64("gamma_smooth", 1.0)?,
        n_lim: f.opt_f64("n_lim", Some(0.5))?,
        rms_start: f.usize("rms_start", 5)?,
        planning,
    };
    if tracking.rms_start == 0 || tracking.rms_start > periods {
        return Err(CliError::parse(f.line, format!("rms_start must lie in 1..={periods}")));
    }

    let d = MpcConfig::default();
    let risk_mode = match f.raw("risk_mode") {
        None => d.risk_mode,
        Some((v, _)) if v == "penalized" => RiskMode::Penalized,
        Some((v, _)) if v == "hard" => RiskMode::Hard,
        Some((v, line)) => return Err(CliError::parse(line, format!("risk_mode must be hard or penalized, found `{v}`"))),
    };
    let mpc = MpcConfig {
        horizon: f.usize("mpc_horizon", d.horizon)?,
        gamma: f.f64("discount", d.gamma)?,
        sigma: f.f64("sigma", d.sigma)?,
        epsilon_ins: f.f64("eps_ins", d.epsilon_ins)?,
        lambda_risk: f.f64("lambda_risk", d.lambda_risk)?,
        lambda_smooth: f.f64("lambda_smooth", d.lambda_smooth)?,
        lambda_cash: f.f64("lambda_cash", d.lambda_cash)?,
        n_lim: f.opt_f64("mpc_n_lim", d.n_lim)?,
        risk_mode,
    };
    mpc.validate().map_err(|e| CliError::parse(f.line, e.to_string()))?;
    let kappa = f.opt_f64("kappa", Some(pacer_core::presets::HEURISTIC_KAPPA))?;

    let list = f.f64_list("sigmas")?;
    let range_keys = ["sigma_min", "sigma_max", "sigma_count"].map(|k| f.entries.contains_key(k));
    let grid = match list {
        Some((v, line)) => {
            if range_keys.iter().any(|b| *b) {
                return Err(CliError::parse(line, "give either `sigmas` or sigma_min/sigma_max/sigma_count"));
            }
            SigmaGrid::List(v)
        }
        None => SigmaGrid::Range {
            min: f.f64("sigma_min", 0.0)?,
            max: f.f64("sigma_max", 0.3)?,
            count: f.usize("sigma_count", 10)?,
        },
    };
    if grid.values().iter().any(|s| *s < 0.0) || (kind == ExperimentKind::Frontier && grid.values().is_empty()) {
        return Err(CliError::parse(f.line, "the risk grid must be nonempty and nonnegative"));
    }
    let frontier_periods = f.usize_list("frontier_periods")?.unwrap_or_else(|| vec![periods]);
    if frontier_periods.is_empty() || frontier_periods.contains(&0) {
        return Err(CliError::parse(f.line, "frontier_periods must list positive lengths"));
    }
    let write_paths = f.bool("write_paths", kind == ExperimentKind::Simulate)?;
    f.finish()?;
    Ok(ExperimentSection {
        kind,
        periods,
        paths,
        seed,
        policies,
        tracking,
        mpc,
        kappa,
        grid,
        frontier_periods,
        write_paths,
    })
}

pub fn default_policies(kind: ExperimentKind, tracking_run: bool) -> Vec<PolicyKind> {
    use PolicyKind::*;
    match kind {
        ExperimentKind::Frontier => vec![Relaxed, Heuristic, Mpc],
        ExperimentKind::Simulate if tracking_run => vec![OpenLoop, CommitmentMpc],
        ExperimentKind::Simulate => vec![AllCash, Heuristic, Mpc],
        _ => Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Writing

/// Shortest decimal text that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), num)
}

/// Canonical text of `cfg`: every key written, defaults included.
pub fn write_config(cfg: &ExperimentConfig) -> String {
    let m = &cfg.model;
    let e = &cfg.experiment;
    let mut s = String::new();
    let _ = writeln!(s, "[model]");
    let _ = writeln!(s, "n_ill = {}", m.n_ill);
    let _ = writeln!(s, "n_liq = {}", m.n_liq);
    let _ = writeln!(s, "mean = {}", nums(&m.mean));
    match &m.layout {
        None => {
            let _ = writeln!(s, "layout = contiguous");
        }
        Some(l) => {
            let _ = writeln!(s, "layout = explicit");
            for (name, r) in [("lambda", &l.lambda), ("delta", &l.delta), ("ret_ill", &l.ret_ill), ("ret_liq", &l.ret_liq)] {
                let idx: Vec<String> = r.clone().map(|i| i.to_string()).collect();
                let _ = writeln!(s, "{name} = {}", idx.join(" "));
            }
        }
    }
    let _ = writeln!(s, "mean_samples = {}", m.mean_samples);
    let _ = writeln!(s, "mean_seed = {}", m.mean_seed);
    let _ = writeln!(s, "\n[covariance]");
    for row in m.cov.row_iter() {
        let _ = writeln!(s, "{}", nums(&row.iter().copied().collect::<Vec<_>>()));
    }

    let _ = writeln!(s, "\n[experiment]");
    let _ = writeln!(s, "kind = {}", e.kind.name());
    let _ = writeln!(s, "periods = {}", e.periods);
    let _ = writeln!(s, "paths = {}", e.paths);
    let _ = writeln!(s, "seed = {}", e.seed);
    let pols: Vec<&str> = e.policies.iter().map(|p| p.name()).collect();
    let _ = writeln!(s, "policies = {}", pols.join(" "));
    let t = &e.tracking;
    let _ = writeln!(s, "i_targ = {}", num(t.i_targ));
    let _ = writeln!(s, "gamma_smooth = {}", num(t.gamma_smooth));
    let _ = writeln!(s, "n_lim = {}", opt(t.n_lim));
    let _ = writeln!(s, "rms_start = {}", t.rms_start);
    match t.planning {
        Planning::Shrinking => {
            let _ = writeln!(s, "planning = shrinking");
        }
        Planning::Receding(h) => {
            let _ = writeln!(s, "planning = receding {h}");
        }
    }
    let c = &e.mpc;
    let _ = writeln!(s, "sigma = {}", num(c.sigma));
    let _ = writeln!(s, "mpc_horizon = {}", c.horizon);
    let _ = writeln!(s, "discount = {}", num(c.gamma));
    let _ = writeln!(s, "eps_ins = {}", num(c.epsilon_ins));
    let _ = writeln!(s, "lambda_risk = {}", num(c.lambda_risk));
    let _ = writeln!(s, "lambda_smooth = {}", num(c.lambda_smooth));
    let _ = writeln!(s, "lambda_cash = {}", num(c.lambda_cash));
    let _ = writeln!(s, "mpc_n_lim = {}", opt(c.n_lim));
    let mode = match c.risk_mode {
        RiskMode::Hard => "hard",
        RiskMode::Penalized => "penalized",
    };
    let _ = writeln!(s, "risk_mode = {mode}");
    let _ = writeln!(s, "kappa = {}", opt(e.kappa));
    match &e.grid {
        SigmaGrid::Range { min, max, count } => {
            let _ = writeln!(s, "sigma_min = {}", num(*min));
            let _ = writeln!(s, "sigma_max = {}", num(*max));
            let _ = writeln!(s, "sigma_count = {count}");
        }
        SigmaGrid::List(v) => {
            let _ = writeln!(s, "sigmas = {}", nums(v));
        }
    }
    let fp: Vec<String> = e.frontier_periods.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(s, "frontier_periods = {}", fp.join(" "));
    let _ = writeln!(s, "write_paths = {}", e.write_paths);

    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", cfg.output.dir);
    let _ = writeln!(s, "prefix = {}", cfg.output.prefix);
    s
}

/// Key reference with defaults, as printed by `pacer reference`.
pub fn reference() -> String {
    let d = MpcConfig::default();
    let rows: &[(&str, &str, String)] = &[
        ("model", "n_ill", "required; number of illiquid assets (≥ 1)".into()),
        ("model", "n_liq", "0; number of liquid assets".into()),
        ("model", "mean", "required; 3·n_ill + n_liq latent means".into()),
        ("model", "layout", "contiguous; or explicit with lambda, delta, ret_ill, ret_liq index lists".into()),
        ("model", "mean_samples", "1000000; draws averaged into the mean matrices".into()),
        ("model", "mean_seed", "12345; seed of those draws".into()),
        ("covariance", "(rows)", "required; latent covariance, one row per line, symmetrized on load".into()),
        ("experiment", "kind", "required; impulse, step, plan, simulate or frontier".into()),
        ("experiment", "periods", "20; horizon T".into()),
        ("experiment", "paths", "0 for impulse/step/plan, 100 for simulate, 200 for frontier".into()),
        ("experiment", "seed", "1; master seed".into()),
        ("experiment", "policies", "simulate: open_loop commitment_mpc (no liquids) or all_cash heuristic mpc; frontier: relaxed heuristic mpc".into()),
        ("experiment", "i_targ", "1; illiquid wealth target of commitment plans".into()),
        ("experiment", "gamma_smooth", "1; commitment smoothing weight".into()),
        ("experiment", "n_lim", "0.5; commitment cap of plans, or none".into()),
        ("experiment", "rms_start", "5; first period of the delayed RMS".into()),
        ("experiment", "planning", "shrinking; or `receding H`".into()),
        ("experiment", "sigma", format!("{}; risk bound of simulate runs", d.sigma)),
        ("experiment", "mpc_horizon", format!("{}", d.horizon)),
        ("experiment", "discount", format!("{}", d.gamma)),
        ("experiment", "eps_ins", format!("{}; insolvency probability, at most 0.5", d.epsilon_ins)),
        ("experiment", "lambda_risk", format!("{}", d.lambda_risk)),
        ("experiment", "lambda_smooth", format!("{}", d.lambda_smooth)),
        ("experiment", "lambda_cash", format!("{}", d.lambda_cash)),
        ("experiment", "mpc_n_lim", "none; commitment cap of the full MPC".into()),
        ("experiment", "risk_mode", "penalized; or hard".into()),
        ("experiment", "kappa", format!("{}; heuristic feedback gain, or none", pacer_core::presets::HEURISTIC_KAPPA)),
        ("experiment", "sigma_min", "0".into()),
        ("experiment", "sigma_max", "0.3".into()),
        ("experiment", "sigma_count", "10".into()),
        ("experiment", "sigmas", "explicit risk grid; replaces sigma_min/max/count".into()),
        ("experiment", "frontier_periods", "periods; simulated lengths of a frontier run".into()),
        ("experiment", "write_paths", "true for simulate, false otherwise; per-path CSV".into()),
        ("output", "dir", "out".into()),
        ("output", "prefix", "empty; prepended to every file name".into()),
    ];
    let mut s = String::from("section\tkey\tdefault and meaning\n");
    for (sec, key, text) in rows {
        let _ = writeln!(s, "{sec}\t{key}\t{text}");
    }
    s
}
