use nalgebra::DMatrix;
use pacer_cli::config::*;
use pacer_cli::presets::{preset, PRESETS};
use pacer_cli::{parse_config, write_config, CliError};
use pacer_core::presets as core;
use proptest::prelude::*;

const SINGLE_MODEL: &str = "[model]
n_ill = 1
mean = -0.7 -0.423 0.158

[covariance]
0.068 0.072 0.006
0.073 0.271 0.043
0.006 0.043 0.079
";

fn with_experiment(body: &str) -> String {
    format!("{SINGLE_MODEL}\n[experiment]\n{body}\n")
}

fn line_of(err: CliError) -> usize {
    match err {
        CliError::Parse { line, .. } => line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn single_asset_preset_matches_the_library() {
    let cfg = parse_config(preset("impulse").unwrap()).unwrap();
    assert_eq!(cfg.model.mean, core::SINGLE_MEAN.to_vec());
    assert_eq!(cfg.model.cov, core::single_cov());
    assert_eq!(cfg.model.cov[(0, 1)], 0.0725);
    let slow = parse_config(preset("tracking-slow").unwrap()).unwrap();
    assert_eq!(slow.model.mean, core::SLOW_MEAN.to_vec());
}

#[test]
fn joint_preset_matches_the_library() {
    let cfg = parse_config(preset("frontier").unwrap()).unwrap();
    let (mean, cov) = core::joint_parameters();
    assert_eq!(cfg.model.mean, mean);
    // The library product is symmetric to rounding; the loader averages it.
    assert!((&cfg.model.cov - &cov).abs().max() < 1e-17);
    assert_eq!(cfg.experiment.grid.values().len(), 30);
    assert_eq!(cfg.experiment.frontier_periods, vec![20, 10]);
    assert_eq!(cfg.experiment.mpc, pacer_core::programs::MpcConfig::default());
}

#[test]
fn every_preset_loads_and_round_trips() {
    for (name, text) in PRESETS {
        let cfg = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg, "{name}");
    }
}

#[test]
fn printed_covariance_is_symmetrized() {
    let cfg = parse_config(&with_experiment("kind = impulse")).unwrap();
    let m = &cfg.model.cov;
    assert_eq!(m, &m.transpose());
    // The printed pair differs by 1e-3, far above the warning threshold.
    let printed = (0.072f64, 0.073f64);
    assert!(printed.1 - printed.0 > ASYMMETRY_WARN);
}

#[test]
fn defaults_fill_omitted_fields() {
    let e = parse_config(&with_experiment("kind = simulate")).unwrap().experiment;
    assert_eq!(e.periods, 20);
    assert_eq!(e.paths, 100);
    assert_eq!(e.policies, vec![PolicyKind::OpenLoop, PolicyKind::CommitmentMpc]);
    assert_eq!(e.tracking.n_lim, Some(0.5));
    assert_eq!(e.tracking.planning, Planning::Shrinking);
    assert!(e.write_paths);
}

#[test]
fn empty_experiment_section_names_the_missing_field() {
    let err = parse_config(&with_experiment("")).unwrap_err();
    assert!(matches!(&err, CliError::Missing { key, .. } if key == "kind"), "{err}");
    assert!(err.to_string().contains("kind"));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn errors_carry_line_numbers() {
    let bad_number = with_experiment("kind = plan\nperiods = twenty");
    assert_eq!(line_of(parse_config(&bad_number).unwrap_err()), 12);

    let short_mean = SINGLE_MODEL.replace("0.158", "") + "[experiment]\nkind = plan\n";
    assert_eq!(line_of(parse_config(&short_mean).unwrap_err()), 3);

    let ragged = SINGLE_MODEL.replace("0.271 0.043", "0.271") + "[experiment]\nkind = plan\n";
    assert_eq!(line_of(parse_config(&ragged).unwrap_err()), 7);

    let typo = with_experiment("kind = plan\nperoids = 10");
    let err = parse_config(&typo).unwrap_err();
    assert!(err.to_string().contains("peroids"));
    assert_eq!(line_of(err), 12);

    let orphan = "n_ill = 1\n";
    assert_eq!(line_of(parse_config(orphan).unwrap_err()), 1);
}

#[test]
fn indefinite_covariance_is_refused() {
    let text = SINGLE_MODEL.replace("0.068 0.072", "-0.5 0.072") + "[experiment]\nkind = plan\n";
    let err = parse_config(&text).unwrap_err();
    assert!(err.to_string().contains("positive semidefinite"), "{err}");
}

#[test]
fn policies_must_fit_the_model() {
    let err = parse_config(&with_experiment("kind = simulate\npolicies = mpc")).unwrap_err();
    assert!(err.to_string().contains("without liquid assets"), "{err}");
    let err = parse_config(&with_experiment("kind = frontier")).unwrap_err();
    assert!(err.to_string().contains("liquid"), "{err}");
    let joint = parse_config(preset("simulate").unwrap()).unwrap();
    let text = write_config(&joint).replace("policies = all_cash heuristic mpc", "policies = open_loop");
    assert!(parse_config(&text).is_err());
}

#[test]
fn insolvency_probability_above_half_is_refused() {
    let err = parse_config(&with_experiment("kind = simulate\neps_ins = 0.6")).unwrap_err();
    assert!(err.to_string().contains("nonconvex"), "{err}");
}

#[test]
fn explicit_layout_round_trips() {
    let text = with_experiment("kind = impulse").replace(
        "n_ill = 1\n",
        "n_ill = 1\nlayout = explicit\nlambda = 2\ndelta = 1\nret_ill = 0\nret_liq =\n",
    );
    let cfg = parse_config(&text).unwrap();
    let l = cfg.model.layout.clone().unwrap();
    assert_eq!((l.lambda, l.delta, l.ret_ill), (2..3, 1..2, 0..1));
    assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg);
    let overlap = text.replace("delta = 1", "delta = 2");
    assert!(parse_config(&overlap).is_err());
}

#[test]
fn sigma_list_and_range_are_exclusive() {
    let err = parse_config(&with_experiment("kind = impulse\nsigmas = 0.1 0.2\nsigma_max = 0.3")).unwrap_err();
    assert_eq!(line_of(err), 12);
    let cfg = parse_config(&with_experiment("kind = impulse\nsigmas = 0.1 0.2")).unwrap();
    assert_eq!(cfg.experiment.grid, SigmaGrid::List(vec![0.1, 0.2]));
}

#[test]
fn reference_lists_every_written_key() {
    let text = write_config(&parse_config(preset("frontier").unwrap()).unwrap());
    let reference = reference();
    for line in text.lines().filter(|l| l.contains('=')) {
        let key = line.split('=').next().unwrap().trim();
        assert!(reference.contains(&format!("\t{key}\t")), "{key} undocumented");
    }
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    let base = parse_config(preset("frontier").unwrap()).unwrap();
    (
        prop::sample::select(ExperimentKind::ALL.to_vec()),
        1usize..60,
        0usize..500,
        any::<u64>(),
        prop::option::of(0.0f64..2.0),
        prop::collection::vec(0.0f64..1.0, 1..6),
        (0.001f64..0.5, 1usize..30, 0.5f64..1.0),
        any::<bool>(),
    )
        .prop_map(move |(kind, periods, paths, seed, n_lim, sigmas, (eps, h, disc), list)| {
            let mut c = base.clone();
            let e = &mut c.experiment;
            e.kind = kind;
            e.policies = default_policies(kind, false);
            e.periods = periods;
            e.paths = paths;
            e.seed = seed;
            e.tracking.n_lim = n_lim;
            e.tracking.rms_start = 1 + seed as usize % periods;
            e.mpc.epsilon_ins = eps;
            e.mpc.horizon = h;
            e.mpc.gamma = disc;
            e.kappa = n_lim;
            let first = sigmas[0];
            e.grid = if list {
                SigmaGrid::List(sigmas)
            } else {
                SigmaGrid::Range { min: first, max: first + 0.3, count: sigmas.len() }
            };
            e.frontier_periods = vec![periods, periods + 1];
            c.model.mean[2] = first - 0.5;
            c.model.mean_seed = seed / 3;
            c.output.prefix = format!("run{paths}_");
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn written_configs_load_back_unchanged(cfg in arb_config()) {
        prop_assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn covariance_loads_symmetric(a in prop::collection::vec(-0.02f64..0.02, 9)) {
        // Diagonally dominant, slightly asymmetric.
        let m = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { a[3 * i + j] });
        let rows: Vec<String> = m.row_iter().map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")).collect();
        let text = format!("[model]\nn_ill = 1\nmean = 0 0 0\n[covariance]\n{}\n[experiment]\nkind = step\n", rows.join("\n"));
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(&cfg.model.cov, &cfg.model.cov.transpose());
        prop_assert_eq!(cfg.model.cov[(0, 1)], (m[(0, 1)] + m[(1, 0)]) * 0.5);
    }
}
