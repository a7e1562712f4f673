mod common;

use stockshare::metrics::{
    infected_ratio, min_stock_ratio, unserved_infected_ratio, MetricsError, OutcomeClass, ScenarioSummary,
    SummaryOptions,
};
use stockshare::model::{
    run_scenario, simulate, Community, CommunityParams, EpidemicParams, ModelNumerics, RunSettings, Scenario,
    SharingParams, Trajectory,
};

fn run(sc: &Scenario) -> Trajectory {
    run_scenario(sc, &sc.integrator_settings(&RunSettings::default())).unwrap()
}

fn isolated(s_max: f64, numerics: ModelNumerics, epidemic: EpidemicParams) -> Scenario {
    Scenario {
        epidemic,
        community_a: CommunityParams::with_stock(s_max),
        community_b: CommunityParams::with_stock(s_max),
        sharing: SharingParams::disabled(),
        numerics,
    }
}

#[test]
fn final_size_oracle_values() {
    assert!((common::final_size(1.38) - 0.495).abs() < 2e-3);
    assert!((common::final_size(2.3) - 0.86).abs() < 5e-3);
}

#[test]
fn ample_stock_matches_the_protected_final_size() {
    let ep = EpidemicParams::default();
    let tr = run(&isolated(1e13, ModelNumerics::default(), ep));
    let expected = common::final_size(ep.r0 * (1.0 - ep.r));
    for c in Community::BOTH {
        assert!((infected_ratio(&tr, c).unwrap() - expected).abs() < 0.03);
        assert!(min_stock_ratio(&tr, c) > 0.99);
    }
}

#[test]
fn unreachable_stock_matches_the_unprotected_final_size() {
    let ep = EpidemicParams::default();
    let numerics = ModelNumerics {
        s_offset: 1e15,
        ..ModelNumerics::default()
    };
    let tr = run(&isolated(3e7, numerics, ep));
    let expected = common::final_size(ep.r0);
    for c in Community::BOTH {
        assert!((infected_ratio(&tr, c).unwrap() - expected).abs() < 0.03);
    }
}

#[test]
fn subcritical_epidemic_stays_small() {
    let ep = EpidemicParams {
        r0: 1.5,
        r: 0.5,
        ..EpidemicParams::default()
    };
    let tr = run(&isolated(1e13, ModelNumerics::default(), ep));
    let s = ScenarioSummary::from_trajectory(&tr, &SummaryOptions::default());
    assert!(s.infected_ratio_a < 0.05 && s.infected_ratio_b < 0.05);
    assert_eq!(s.outcome, OutcomeClass::Blue);
    assert_eq!(s.unserved_ratio_a, 0.0);
}

#[test]
fn metrics_are_stable_under_finer_sampling() {
    let sc = common::time_evolution(SharingParams::with_threshold(0.6));
    let coarse = run(&sc);
    let fine = run_scenario(
        &sc,
        &sc.integrator_settings(&RunSettings {
            dense_output_dt: 0.25,
            ..RunSettings::default()
        }),
    )
    .unwrap();
    let opts = SummaryOptions::default();
    let (a, b) = (
        ScenarioSummary::from_trajectory(&coarse, &opts),
        ScenarioSummary::from_trajectory(&fine, &opts),
    );
    assert_eq!(a.outcome, b.outcome);
    assert!((a.infected_ratio_a - b.infected_ratio_a).abs() < 1e-3);
    assert!((a.infected_ratio_b - b.infected_ratio_b).abs() < 1e-3);
    assert!((a.unserved_ratio_a - b.unserved_ratio_a).abs() < 1e-3);
    assert!((a.min_stock_ratio_b - b.min_stock_ratio_b).abs() < 1e-3);
}

#[test]
fn unserved_ratio_is_bounded() {
    let tr = run(&common::time_evolution(SharingParams::disabled()));
    for c in Community::BOTH {
        let unserved = unserved_infected_ratio(&tr, c, 0.05);
        assert!(unserved > 0.0);
        assert!(unserved <= infected_ratio(&tr, c).unwrap());
        assert_eq!(unserved_infected_ratio(&tr, c, 1.0), 0.0);
    }
}

#[test]
fn truncated_run_reports_incomplete() {
    let sc = Scenario::default();
    let mut settings = sc.integrator_settings(&RunSettings::default());
    settings.max_steps = 50;
    let out = simulate(&sc, &settings).unwrap();
    assert!(out.failure.is_some());
    match infected_ratio(&out.trajectory, Community::A) {
        Err(MetricsError::IncompleteRun { value }) => assert!((0.0..=1.0).contains(&value)),
        other => panic!("expected an incomplete run, got {other:?}"),
    }
    let s = ScenarioSummary::from_trajectory(&out.trajectory, &SummaryOptions::default());
    assert!(!s.complete);
    assert!(s.infected_ratio_a.is_finite());
}

#[test]
#[should_panic]
fn depletion_threshold_outside_range_panics() {
    let tr = run(&Scenario::default());
    stockshare::metrics::stock_depleted(&tr, Community::A, 0.1);
}
