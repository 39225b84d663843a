//! Runs one configured experiment and collects its output tables.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use pacer_core::frontier::{frontier_sweep, FrontierModel, FrontierPoint, PolicyFamily};
use pacer_core::policy::{CommitmentMpc, CommitmentPolicy, ConstantCommitment, OpenLoop, PlanningHorizon, Policy};
use pacer_core::programs::{build_commitment_qp, delayed_rms, mean_squared_error, CommitmentPlan, CommitmentProblem};
use pacer_core::sim::{allocation_trace, run_commitment_monte_carlo, run_monte_carlo, Stat, TrajectoryRecord};
use pacer_core::{
    impulse_response, mean_matrices, step_response, steady_state_gains, IlliquidState, LatentDistribution,
    MeanMatrices, Output, SolverSettings, SystemLayout,
};

use crate::config::{ExperimentConfig, ExperimentKind, Planning, PolicyKind};
use crate::error::CliError;
use crate::output::{manifest, write_table, Cell, Table};

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(o) = &self.out {
            cfg.output.dir = o.display().to_string();
        }
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
        }
        if let Some(p) = self.paths {
            cfg.experiment.paths = p;
        }
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Items that could not be produced; the rest of the output stands.
    pub failures: Vec<String>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

/// `threads` caps the worker pool of the Monte Carlo harness; results do
/// not depend on it.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput, CliError> {
    let dist = cfg.model.distribution()?;
    let e = &cfg.experiment;
    info!("{} experiment, {} periods, {} paths, seed {}", e.kind.name(), e.periods, e.paths, e.seed);
    match e.kind {
        ExperimentKind::Impulse | ExperimentKind::Step => responses(cfg, &dist, threads),
        ExperimentKind::Plan => plan(cfg, &dist),
        ExperimentKind::Simulate if cfg.model.n_liq == 0 => tracking(cfg, &dist, threads),
        ExperimentKind::Simulate => simulate_joint(cfg, dist, threads),
        ExperimentKind::Frontier => frontier(cfg, dist, threads),
    }
}

/// Runs `cfg` and writes its CSVs and manifest to the output directory.
/// Returns the written files and the per-item failures.
pub fn run_and_write(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<(Vec<PathBuf>, Vec<String>), CliError> {
    let out = run_experiment(cfg, threads)?;
    let dir = Path::new(&cfg.output.dir);
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e.to_string()))?;
    let mut files = Vec::new();
    for t in &out.tables {
        files.push(write_table(dir, &cfg.output.prefix, t)?);
    }
    let path = dir.join(format!("{}manifest.txt", cfg.output.prefix));
    std::fs::write(&path, manifest(cfg, &files, &out.failures))
        .map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
    files.push(path);
    Ok((files, out.failures))
}

fn illiquid_means(cfg: &ExperimentConfig, dist: &LatentDistribution) -> Result<MeanMatrices, CliError> {
    Ok(mean_matrices(dist, SystemLayout::IlliquidOnly, cfg.model.mean_samples, cfg.model.mean_seed)?)
}

fn stat_cells(s: Stat) -> [Cell; 2] {
    [s.mean.into(), s.se.into()]
}

// ---------------------------------------------------------------------------
// Responses

const COMPONENTS: [&str; 4] = ["I", "K", "C", "D"];

fn component(o: &Output, c: usize) -> &[f64] {
    [&o.i, &o.k, &o.c, &o.d][c]
}

fn responses(cfg: &ExperimentConfig, dist: &LatentDistribution, threads: Option<usize>) -> Result<RunOutput, CliError> {
    let e = &cfg.experiment;
    let mm = illiquid_means(cfg, dist)?;
    let m = mm.n_ill;
    let impulse = e.kind == ExperimentKind::Impulse;
    let mean = if impulse { impulse_response(&mm, e.periods)? } else { step_response(&mm, e.periods)? };

    // Monte Carlo outputs[path][t] in the same layout as the mean response.
    let mut sampled: Vec<Vec<Output>> = Vec::new();
    if e.paths > 0 {
        let plan = if impulse { vec![vec![1.0; m]] } else { vec![vec![1.0; m]; e.periods] };
        let pol = OpenLoop::new(plan, m);
        let run = run_commitment_monte_carlo(dist, &pol, e.periods, e.paths, e.seed, 0.0, 1, threads)?;
        sampled = run
            .paths
            .iter()
            .map(|p| {
                (0..e.periods)
                    .map(|t| Output {
                        i: p.states[t].i.clone(),
                        k: p.states[t].k.clone(),
                        c: p.calls[t].clone(),
                        d: p.dists[t].clone(),
                    })
                    .collect()
            })
            .collect();
    }

    let mut table = Table::new("responses", &["period", "component", "asset", "mean", "mc_mean", "mc_se"]);
    let mut per_path = Table::new("response_paths", &["path", "period", "component", "asset", "value"]);
    for (t, y) in mean.iter().enumerate() {
        for (c, name) in COMPONENTS.iter().enumerate() {
            for j in 0..m {
                let mc = if sampled.is_empty() {
                    [Cell::Empty, Cell::Empty]
                } else {
                    let vals: Vec<f64> = sampled.iter().map(|p| component(&p[t], c)[j]).collect();
                    stat_cells(Stat::of(&vals))
                };
                let [a, b] = mc;
                table.push(vec![(t + 1).into(), (*name).into(), (j + 1).into(), component(y, c)[j].into(), a, b]);
            }
        }
    }
    if e.write_paths {
        for (p, path) in sampled.iter().enumerate() {
            for (t, y) in path.iter().enumerate() {
                for (c, name) in COMPONENTS.iter().enumerate() {
                    for j in 0..m {
                        per_path.push(vec![p.into(), (t + 1).into(), (*name).into(), (j + 1).into(), component(y, c)[j].into()]);
                    }
                }
            }
        }
    }

    let gains = steady_state_gains(&mm)?;
    let mut g = Table::new("gains", &["asset", "alpha_i", "alpha_k", "alpha_c", "alpha_d"]);
    for j in 0..m {
        g.push(vec![
            (j + 1).into(),
            gains.alpha_i[j].into(),
            gains.alpha_k[j].into(),
            gains.alpha_c[j].into(),
            gains.alpha_d[j].into(),
        ]);
    }
    let mut tables = vec![table, g];
    if e.write_paths && !sampled.is_empty() {
        tables.push(per_path);
    }
    Ok(RunOutput { tables, failures: Vec::new() })
}

// ---------------------------------------------------------------------------
// Commitment plans and tracking

fn open_loop_plan(cfg: &ExperimentConfig, mm: &MeanMatrices) -> Result<CommitmentPlan, CliError> {
    let e = &cfg.experiment;
    let t = &e.tracking;
    let prob = CommitmentProblem::open_loop(e.periods, vec![t.i_targ; mm.n_ill], t.gamma_smooth, t.n_lim)?;
    let qp = build_commitment_qp(mm, &IlliquidState::zero(mm.n_ill), &prob)?;
    Ok(qp.solve(&SolverSettings::default())?)
}

fn plan(cfg: &ExperimentConfig, dist: &LatentDistribution) -> Result<RunOutput, CliError> {
    let e = &cfg.experiment;
    let mm = illiquid_means(cfg, dist)?;
    let p = open_loop_plan(cfg, &mm)?;
    let gains = steady_state_gains(&mm)?;
    let mut table = Table::new("plans", &["period", "asset", "commitment", "I", "K"]);
    for t in 0..=e.periods {
        for j in 0..mm.n_ill {
            let n = p.n.get(t).map_or(Cell::Empty, |n| n[j].into());
            table.push(vec![(t + 1).into(), (j + 1).into(), n, p.i[t][j].into(), p.k[t][j].into()]);
        }
    }
    let targ = e.tracking.i_targ;
    let mut summary = Table::new(
        "plan_summary",
        &["asset", "terminal_commitment", "steady_commitment", "delayed_rms", "mse", "objective"],
    );
    for j in 0..mm.n_ill {
        let i: Vec<f64> = p.i.iter().map(|x| x[j]).collect();
        summary.push(vec![
            (j + 1).into(),
            p.n[e.periods - 1][j].into(),
            (targ / gains.alpha_i[j]).into(),
            delayed_rms(&i[..e.periods], targ, e.tracking.rms_start)?.into(),
            mean_squared_error(&i, targ).into(),
            p.objective.into(),
        ]);
    }
    Ok(RunOutput { tables: vec![table, summary], failures: Vec::new() })
}

fn tracking(cfg: &ExperimentConfig, dist: &LatentDistribution, threads: Option<usize>) -> Result<RunOutput, CliError> {
    let e = &cfg.experiment;
    let t = &e.tracking;
    let mm = Arc::new(illiquid_means(cfg, dist)?);
    let mut metrics = Table::new(
        "metrics",
        &["experiment", "policy", "periods", "paths", "delayed_rms", "se_delayed_rms", "mse", "se_mse", "fallbacks"],
    );
    let mut paths = Table::new(
        "trajectories",
        &["policy", "path", "period", "asset", "commitment", "I", "K", "C", "D"],
    );
    let mut failures = Vec::new();
    for kind in &e.policies {
        let pol: Box<dyn CommitmentPolicy> = match kind {
            PolicyKind::OpenLoop => match open_loop_plan(cfg, &mm) {
                Ok(p) => Box::new(OpenLoop::new(p.n, mm.n_ill)),
                Err(err) => {
                    warn!("open-loop plan failed: {err}");
                    failures.push(format!("open_loop: {err}"));
                    continue;
                }
            },
            PolicyKind::CommitmentMpc => {
                let horizon = match t.planning {
                    Planning::Shrinking => PlanningHorizon::ShrinkingTo(e.periods),
                    Planning::Receding(h) => PlanningHorizon::Receding(h),
                };
                Box::new(CommitmentMpc::new(mm.clone(), t.i_targ, t.gamma_smooth, t.n_lim, horizon))
            }
            _ => unreachable!("validated on load"),
        };
        let run = match run_commitment_monte_carlo(dist, pol.as_ref(), e.periods, e.paths, e.seed, t.i_targ, t.rms_start, threads) {
            Ok(r) => r,
            Err(err) => {
                failures.push(format!("{}: {err}", kind.name()));
                continue;
            }
        };
        let [rms, rms_se] = stat_cells(run.delayed_rms);
        let [mse, mse_se] = stat_cells(run.mse);
        metrics.push(vec![
            "simulate".into(),
            kind.name().into(),
            e.periods.into(),
            e.paths.into(),
            rms,
            rms_se,
            mse,
            mse_se,
            run.fallbacks.into(),
        ]);
        if e.write_paths {
            for p in &run.paths {
                for (k, x) in p.states.iter().enumerate() {
                    for j in 0..mm.n_ill {
                        let flow = |v: &Vec<Vec<f64>>| v.get(k).map_or(Cell::Empty, |f| f[j].into());
                        paths.push(vec![
                            kind.name().into(),
                            (p.path as usize).into(),
                            (k + 1).into(),
                            (j + 1).into(),
                            flow(&p.n),
                            x.i[j].into(),
                            x.k[j].into(),
                            flow(&p.calls),
                            flow(&p.dists),
                        ]);
                    }
                }
            }
        }
    }
    let mut tables = vec![metrics];
    if e.write_paths {
        tables.push(paths);
    }
    Ok(RunOutput { tables, failures })
}

// ---------------------------------------------------------------------------
// Joint simulation and frontiers

const METRICS: [&str; 13] = [
    "experiment",
    "policy",
    "periods",
    "sigma",
    "paths",
    "realized_ret",
    "se_ret",
    "realized_vol",
    "se_vol",
    "forced_frequency",
    "fallbacks",
    "max_accounting_residual",
    "min_state",
];

fn metrics_row(experiment: &str, p: &FrontierPoint) -> Vec<Cell> {
    let [r, rs] = stat_cells(p.realized_ret);
    let [v, vs] = stat_cells(p.realized_vol);
    vec![
        experiment.into(),
        p.policy.clone().into(),
        p.periods.into(),
        p.sigma.into(),
        p.paths.into(),
        r,
        rs,
        v,
        vs,
        p.forced_frequency.into(),
        p.fallbacks.into(),
        p.max_accounting_residual.into(),
        p.min_state.into(),
    ]
}

fn joint_model(cfg: &ExperimentConfig, dist: LatentDistribution) -> Result<FrontierModel, CliError> {
    let mm = mean_matrices(&dist, SystemLayout::Joint, cfg.model.mean_samples, cfg.model.mean_seed)?;
    Ok(FrontierModel::from_mean(dist, mm)?)
}

fn asset_names(n_liq: usize, n_ill: usize) -> Vec<String> {
    (1..=n_liq).map(|j| format!("liq_{j}")).chain((1..=n_ill).map(|j| format!("ill_{j}"))).collect()
}

fn allocation_rows(table: &mut Table, experiment: &str, policy: &str, periods: usize, sigma: f64, records: &[TrajectoryRecord], names: &[String]) -> Result<(), CliError> {
    let trace = allocation_trace(records)?;
    for (t, w) in trace.weights.iter().enumerate() {
        for (name, v) in names.iter().zip(w) {
            table.push(vec![
                experiment.into(),
                policy.into(),
                periods.into(),
                sigma.into(),
                (t + 1).into(),
                name.clone().into(),
                (*v).into(),
            ]);
        }
    }
    Ok(())
}

const ALLOCATIONS: [&str; 7] = ["experiment", "policy", "periods", "sigma", "period", "asset", "mean_weight"];

fn simulate_joint(cfg: &ExperimentConfig, dist: LatentDistribution, threads: Option<usize>) -> Result<RunOutput, CliError> {
    let e = &cfg.experiment;
    let model = joint_model(cfg, dist)?;
    let (q, m) = (model.dist.n_liq(), model.dist.n_ill());
    let names = asset_names(q, m);
    let sigma = e.mpc.sigma;
    let mut metrics = Table::new("metrics", &METRICS);
    let mut alloc = Table::new("allocations", &ALLOCATIONS);
    let mut header: Vec<String> = ["policy", "path", "period", "L"].map(String::from).to_vec();
    header.extend((1..=m).map(|j| format!("I_{j}")));
    header.extend((1..=m).map(|j| format!("K_{j}")));
    header.extend(names[..q].iter().map(|n| format!("h_{n}")));
    header.extend((1..=m).map(|j| format!("n_{j}")));
    header.extend(["s", "forced", "realized_ret", "fallback"].map(String::from));
    let mut paths = Table { name: "trajectories".into(), header, rows: Vec::new() };
    let mut failures = Vec::new();

    for kind in &e.policies {
        let pol: Box<dyn Policy> = match kind {
            PolicyKind::AllCash => Box::new(ConstantCommitment { n: vec![0.0; m], n_liq: q, cash: model.cash }),
            PolicyKind::Heuristic => match model.heuristic(sigma, e.kappa) {
                Ok(p) => Box::new(p),
                Err(err) => {
                    failures.push(format!("heuristic: {err}"));
                    continue;
                }
            },
            PolicyKind::Mpc => match model.mpc_policy(&e.mpc, e.kappa) {
                Ok(p) => Box::new(p),
                Err(err) => {
                    failures.push(format!("mpc: {err}"));
                    continue;
                }
            },
            _ => unreachable!("validated on load"),
        };
        let mc = match run_monte_carlo(&model.dist, pol.as_ref(), &model.initial_state(), e.periods, e.paths, e.seed, threads) {
            Ok(mc) => mc,
            Err(err) => {
                failures.push(format!("{}: {err}", kind.name()));
                continue;
            }
        };
        let s = &mc.summary;
        let point = FrontierPoint {
            policy: kind.name().into(),
            sigma,
            periods: e.periods,
            paths: e.paths,
            realized_vol: s.volatility,
            realized_ret: s.mean_return,
            forced_frequency: s.forced_frequency,
            fallbacks: s.fallbacks,
            max_accounting_residual: s.max_accounting_residual,
            min_state: s.min_state,
        };
        metrics.push(metrics_row("simulate", &point));
        allocation_rows(&mut alloc, "simulate", kind.name(), e.periods, sigma, &mc.records, &names)?;
        if e.write_paths {
            for r in &mc.records {
                for p in &r.periods {
                    let mut row: Vec<Cell> =
                        vec![kind.name().into(), (r.path as usize).into(), p.t.into(), p.state.l.into()];
                    row.extend(p.state.ill.i.iter().chain(&p.state.ill.k).map(|v| Cell::Num(*v)));
                    row.extend(p.control.h.iter().chain(&p.control.n).map(|v| Cell::Num(*v)));
                    row.push(p.control.s.into());
                    row.push(p.forced.into());
                    row.push(p.realized_return().map_or(Cell::Empty, Cell::Num));
                    row.push(Cell::Int(i64::from(p.fallback)));
                    paths.push(row);
                }
            }
        }
    }
    let mut tables = vec![metrics, alloc];
    if e.write_paths {
        tables.push(paths);
    }
    Ok(RunOutput { tables, failures })
}

fn frontier(cfg: &ExperimentConfig, dist: LatentDistribution, threads: Option<usize>) -> Result<RunOutput, CliError> {
    let e = &cfg.experiment;
    let model = joint_model(cfg, dist)?;
    let names = asset_names(model.dist.n_liq(), model.dist.n_ill());
    let grid = e.grid.values();
    let mut metrics = Table::new("metrics", &METRICS);
    let mut alloc = Table::new("allocations", &ALLOCATIONS);
    let mut failures = Vec::new();
    for &periods in &e.frontier_periods {
        for kind in &e.policies {
            let family = match kind {
                PolicyKind::Relaxed => PolicyFamily::Relaxed,
                PolicyKind::Heuristic => PolicyFamily::Heuristic { kappa: e.kappa },
                PolicyKind::Mpc => PolicyFamily::Mpc { cfg: e.mpc.clone(), kappa: e.kappa },
                _ => unreachable!("validated on load"),
            };
            info!("{} frontier over {} periods", kind.name(), periods);
            let run = frontier_sweep(&model, &family, &grid, periods, e.paths, e.seed, threads, true)?;
            for p in &run.points {
                metrics.push(metrics_row("frontier", p));
            }
            for (sigma, mc) in &run.runs {
                allocation_rows(&mut alloc, "frontier", kind.name(), periods, *sigma, &mc.records, &names)?;
            }
            failures.extend(
                run.failures.iter().map(|(s, why)| format!("{} periods={periods} sigma={s}: {why}", kind.name())),
            );
        }
    }
    Ok(RunOutput { tables: vec![metrics, alloc], failures })
}
