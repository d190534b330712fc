use super::*;

fn small_known(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Scenario::KnownCovMultichannel, seed);
    cfg.pfa = 0.05;
    cfg.trials = 4_000;
    cfg.snr_grid_db = vec![f64::NEG_INFINITY, -6.0, -2.0, 2.0];
    cfg
}

fn small_adaptive(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(Scenario::AdaptiveSingleChannel, seed);
    cfg.d = 4;
    cfg.n_train = 10;
    cfg.pfa = 0.05;
    cfg.trials = 2_000;
    cfg.snr_grid_db = vec![f64::NEG_INFINITY, 6.0, 14.0];
    cfg
}

fn assert_null_point_matches_pfa(result: &ScenarioResult, pfa: f64) {
    let sd = (pfa * (1.0 - pfa) / result.trials as f64).sqrt();
    for c in &result.curves {
        assert_eq!(c.points[0].snr_db, f64::NEG_INFINITY);
        // Null statistics are recomputed at -inf, so the two tallies agree.
        assert_eq!(c.points[0].pd, c.pfa_achieved, "{}", c.detector);
        assert!((c.pfa_achieved - pfa).abs() <= 4.0 * sd, "{}: {}", c.detector, c.pfa_achieved);
    }
}

fn assert_monotone(result: &ScenarioResult) {
    for c in &result.curves {
        for w in c.points.windows(2) {
            assert!(w[1].pd >= w[0].pd, "{}: {:?}", c.detector, c.points);
        }
    }
}

#[test]
fn known_cov_scenario_shape() {
    let result = run_scenario(&small_known(1)).unwrap();
    let names: Vec<&str> = result.curves.iter().map(|c| c.detector.as_str()).collect();
    assert_eq!(names, ["nmf", "nmf-phi", "mf", "glr-cg"]);
    assert_eq!(result.curve("nmf").unwrap().source, ThresholdSource::Analytic);
    assert_eq!(result.curve("nmf-phi").unwrap().source, ThresholdSource::Analytic);
    assert!(matches!(result.curve("mf").unwrap().source, ThresholdSource::Empirical { trials: 4_000, .. }));
    assert_eq!(result.diverged, 0);
    assert_null_point_matches_pfa(&result, 0.05);
    assert_monotone(&result);
    assert!(result.curve("nmf").unwrap().points[3].pd > 0.5);
}

#[test]
fn known_cov_under_texture_keeps_nmf_rate() {
    let mut cfg = small_known(2);
    cfg.texture = Texture::InverseGamma { shape: 1.5 };
    cfg.correlation = Correlation::ArToeplitz(0.9);
    let result = run_scenario(&cfg).unwrap();
    let nmf = result.curve("nmf").unwrap();
    let sd = (0.05f64 * 0.95 / cfg.trials as f64).sqrt();
    assert!((nmf.pfa_achieved - 0.05).abs() <= 4.0 * sd);
}

#[test]
fn adaptive_scenario_shape() {
    let result = run_scenario(&small_adaptive(3)).unwrap();
    let names: Vec<&str> = result.curves.iter().map(|c| c.detector.as_str()).collect();
    assert_eq!(names, ["nmf-known", "tyler-nmf", "bt-nmf", "scm-mf", "cg-glrcg", "known-glrcg"]);
    assert_eq!(result.curve("nmf-known").unwrap().source, ThresholdSource::Analytic);
    assert!(matches!(result.curve("tyler-nmf").unwrap().source, ThresholdSource::Empirical { .. }));
    assert_null_point_matches_pfa(&result, 0.05);
    assert_monotone(&result);
    let known = result.curve("nmf-known").unwrap();
    let tyler = result.curve("tyler-nmf").unwrap();
    for (k, t) in known.points.iter().zip(&tyler.points).skip(1) {
        assert!(k.pd + k.ci_halfwidth >= t.pd - t.ci_halfwidth);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small_adaptive(4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scenario(&cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
    let mut other = cfg.clone();
    other.seed = 5;
    assert_ne!(run_scenario(&other).unwrap(), run(1));
}

#[test]
fn insufficient_trials_are_reported() {
    let mut cfg = small_adaptive(1);
    cfg.pfa = 1e-3;
    cfg.trials = 1_000;
    assert!(matches!(
        run_scenario(&cfg),
        Err(Error::InsufficientTrials {
            required: 99_900,
            available: 1_000
        })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    let base = small_adaptive(1);
    let mut bad = Vec::new();
    let mut c = base.clone();
    c.n_train = 3;
    bad.push(c);
    let mut c = base.clone();
    c.pfa = 1.0;
    bad.push(c);
    let mut c = base.clone();
    c.trials = 0;
    bad.push(c);
    let mut c = base.clone();
    c.snr_grid_db = vec![];
    bad.push(c);
    let mut c = base.clone();
    c.texture = Texture::InverseGamma { shape: 1.0 };
    bad.push(c);
    let mut c = small_known(1);
    c.channel_dims = vec![4, 1];
    bad.push(c);
    let mut c = base.clone();
    c.correlation = Correlation::ArToeplitz(1.0);
    bad.push(c);
    for c in bad {
        assert!(run_scenario(&c).is_err(), "{c:?}");
    }
}

#[test]
fn scenario_names_parse() {
    for s in [Scenario::KnownCovMultichannel, Scenario::AdaptiveSingleChannel] {
        assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
    }
    assert!("radar".parse::<Scenario>().is_err());
    assert_eq!(Scenario::KnownCovMultichannel.default_snr_grid().len(), 21);
    assert_eq!(Scenario::AdaptiveSingleChannel.default_snr_grid().last(), Some(&30.0));
}

#[test]
fn csv_has_one_row_per_point() {
    let result = ScenarioResult {
        trials: 10,
        diverged: 0,
        curves: vec![DetectorCurve {
            detector: "nmf".into(),
            threshold: 2.5,
            source: ThresholdSource::Analytic,
            pfa_achieved: 0.1,
            points: vec![
                CurvePoint {
                    snr_db: 0.0,
                    pd: 0.5,
                    ci_halfwidth: 0.25,
                },
                CurvePoint {
                    snr_db: 1.5,
                    pd: 1.0,
                    ci_halfwidth: 0.0,
                },
            ],
        }],
    };
    let mut buf = Vec::new();
    write_csv(&result, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(
        text,
        "detector,snr_db,pd,ci,trials,threshold,pfa_achieved\nnmf,0,0.5,0.25,10,2.5,0.1\nnmf,1.5,1,0,10,2.5,0.1\n"
    );
}

#[test]
fn tyler_curves_ignore_training_texture() {
    let gaussian = run_scenario(&small_adaptive(6)).unwrap();
    let mut cfg = small_adaptive(6);
    cfg.texture = Texture::InverseGamma { shape: 2.1 };
    let textured = run_scenario(&cfg).unwrap();
    let (a, b) = (gaussian.curve("tyler-nmf").unwrap(), textured.curve("tyler-nmf").unwrap());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((p.pd - q.pd).abs() <= p.ci_halfwidth + q.ci_halfwidth, "{p:?} vs {q:?}");
    }
    // The sample covariance is not texture-blind.
    let (c, d) = (gaussian.curve("scm-mf").unwrap(), textured.curve("scm-mf").unwrap());
    assert!(c.points.iter().zip(&d.points).any(|(p, q)| p.pd != q.pd));
}
