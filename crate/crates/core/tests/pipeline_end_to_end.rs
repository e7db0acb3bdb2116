mod common;

use std::collections::HashMap;

use common::spearman;
use sjc_core::config::KeyValues;
use sjc_core::pipeline::fixture::{
    make_fixture, FixtureConfig, PlantedClass, BENCHMARK_FILE, CONFIG_FILE, PRICES_FILE,
    RECOMMENDATIONS_FILE,
};
use sjc_core::pipeline::{build_panel, io, run_study, PipelineConfig, Subsample};

fn small(vintages: usize) -> FixtureConfig {
    FixtureConfig {
        downgrades: 150,
        upgrades: 100,
        unchanged: 60,
        low_coverage: 3,
        vintages,
        ..FixtureConfig::default()
    }
}

#[test]
fn fixture_round_trips_through_csv() {
    let fx = make_fixture(&small(2), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    fx.write_to(dir.path()).unwrap();
    let (recs, market) = io::load_inputs(
        &dir.path().join(RECOMMENDATIONS_FILE),
        &dir.path().join(PRICES_FILE),
        &dir.path().join(BENCHMARK_FILE),
    )
    .unwrap();
    assert_eq!(recs, fx.recommendations);
    let config = PipelineConfig::from_kv(&KeyValues::load(&dir.path().join(CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(config, fx.pipeline_config());

    let panels = build_panel(&recs, &market, &config).unwrap();
    let prov = &panels[0].provenance;
    assert_eq!(*prov, fx.truth.expected);
    assert!(prov.balanced());
    assert_eq!(prov.dropped(), prov.dropped_analysts);
    assert_eq!(prov.dropped_analysts, 1 + 2 + 1);
    assert!(prov.no_prior > 0);
    assert_eq!(panels[1].subsample, Subsample::ADowngrade);
    assert_eq!(panels[1].len(), 150);
    assert_eq!(panels[2].len(), 100);

    // planted ranks survive ingestion, matching and return computation
    let full: HashMap<(&str, _), _> = panels[0]
        .observations
        .iter()
        .map(|o| ((o.security_id.as_str(), o.vintage_date), o))
        .collect();
    for class in [PlantedClass::Downgrade, PlantedClass::Upgrade, PlantedClass::Unchanged] {
        let planted: Vec<_> = fx.truth.planted.iter().filter(|p| p.class == class).collect();
        let matched: Vec<_> = planted
            .iter()
            .map(|p| full[&(p.security_id.as_str(), p.vintage_date)])
            .collect();
        let u: Vec<f64> = planted.iter().map(|p| p.u).collect();
        let v: Vec<f64> = planted.iter().map(|p| p.v).collect();
        let score: Vec<f64> = matched.iter().map(|o| o.score_reversed).collect();
        let excess: Vec<f64> = matched.iter().map(|o| o.excess_return_6m).collect();
        assert_eq!(spearman(&u, &score), 1.0, "{class:?}");
        assert_eq!(spearman(&v, &excess), 1.0, "{class:?}");
        for (p, o) in planted.iter().zip(&matched) {
            assert_eq!(o.score_reversed, p.score_reversed);
            assert!((o.excess_return_6m - p.excess_target).abs() < 1e-9);
            assert!(o.passed_iid_screen);
        }
    }
}

#[test]
fn independence_plant_estimates_near_zero() {
    let cfg = FixtureConfig {
        downgrades: 400,
        upgrades: 400,
        unchanged: 200,
        plant_downgrade: (0.0, 0.0),
        ..FixtureConfig::default()
    };
    let fx = make_fixture(&cfg, 12).unwrap();
    let config = fx.pipeline_config();
    let panels = build_panel(&fx.recommendations, &fx.market(), &config).unwrap();
    let reports = run_study(&panels, &config).unwrap();
    for r in &reports {
        assert!(r.lambda_u_hat < 0.1 && r.lambda_l_hat < 0.1, "{r:?}");
        assert!(!(r.t_u > 1.96) && !(r.t_l > 1.96), "{r:?}");
    }
}

#[test]
fn study_replays_exactly() {
    let fx = make_fixture(&small(1), 4).unwrap();
    let config = PipelineConfig {
        bootstrap_reps: 3,
        ..fx.pipeline_config()
    };
    let run = || {
        let panels = build_panel(&fx.recommendations, &fx.market(), &config).unwrap();
        run_study(&panels, &config).unwrap()
    };
    let a = run();
    let json = |r: &Vec<sjc_core::FitReport>| serde_json::to_string(r).unwrap();
    assert_eq!(json(&a), json(&run()));
    let labels: Vec<&str> = a.iter().map(|r| r.subsample_label.as_str()).collect();
    assert_eq!(labels, ["full", "B_upgrade", "A_downgrade"]);
    assert!(a.iter().all(|r| r.bootstrap.is_some()));
    assert!(a.iter().all(|r| r.ks_p_u.is_some_and(|p| p > 0.05)));
}

#[test]
fn filtered_excess_mode_runs() {
    let fx = make_fixture(&small(1), 6).unwrap();
    let config = PipelineConfig {
        return_mode: sjc_core::pipeline::ReturnMode::FilteredExcess,
        ..fx.pipeline_config()
    };
    let panels = build_panel(&fx.recommendations, &fx.market(), &config).unwrap();
    assert_eq!(panels[0].provenance, fx.truth.expected);
    assert!(panels[0].observations.iter().all(|o| o.excess_return_6m.is_finite()));
    assert_eq!(run_study(&panels, &config).unwrap().len(), 3);
}
