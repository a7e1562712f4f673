mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stockshare::metrics::{OutcomeClass, ScenarioSummary, SummaryOptions};
use stockshare::model::{
    run_scenario, CommunityParams, RunSettings, Scenario, SharingParams, SystemState, Trajectory, STATE_DIM,
};
use stockshare::solver::{self, Method};

fn scaled_diff(a: &SystemState, b: &SystemState, scale: &[f64; STATE_DIM]) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..STATE_DIM)
        .map(|j| (a[j] - b[j]).abs() / scale[j])
        .fold(0.0, f64::max)
}

fn summarize(tr: &Trajectory) -> ScenarioSummary {
    ScenarioSummary::from_trajectory(tr, &SummaryOptions::default())
}

#[test]
fn both_integrators_agree_with_small_step_rk4() {
    let sc = Scenario {
        sharing: SharingParams::disabled(),
        ..Scenario::default()
    };
    let reference = common::rk4(&sc, 0.0, 50.0, 1e-3);
    let scale = sc.component_scale();
    for method in [Method::DormandPrince45, Method::Rodas4] {
        let mut settings = sc.integrator_settings(&RunSettings {
            method,
            ..RunSettings::default()
        });
        settings.t_start = 0.0;
        settings.t_end = 50.0;
        let sol = solver::integrate_scaled(&sc, &sc.initial_state().to_array(), &scale, &settings).unwrap();
        let (_, last) = sol.iter().last().unwrap();
        let got = SystemState::from_slice(last);
        let diff = scaled_diff(&got, &reference, &scale);
        assert!(diff < 10.0 * settings.rel_tol, "{method:?}: scaled difference {diff:e}");
    }
}

#[test]
fn simultaneous_onset_keeps_equal_communities_identical() {
    for theta in [0.0, 0.3, 0.6, 1.0] {
        let sc = Scenario {
            sharing: SharingParams::with_threshold(theta),
            ..Scenario::default()
        };
        let tr = run_scenario(&sc, &sc.integrator_settings(&RunSettings::default())).unwrap();
        for (y, aux) in tr.states.iter().zip(&tr.aux) {
            assert!((y.a.u - y.b.u).abs() <= 1e-9 * sc.community_a.n);
            assert!((y.a.s - y.b.s).abs() <= 1e-9 * sc.community_a.s_max);
            assert!(aux.transfer_rate.abs() <= 1e-6 * sc.community_a.p0);
        }
    }
}

fn swapped_pair(sc: &Scenario, run: &RunSettings) -> (Trajectory, Trajectory) {
    let orig = run_scenario(sc, &sc.integrator_settings(run)).unwrap();
    let swapped_sc = sc.label_swapped();
    let swapped = run_scenario(&swapped_sc, &swapped_sc.integrator_settings(run)).unwrap();
    (orig, swapped)
}

#[test]
fn label_swap_reproduces_the_shifted_trajectory() {
    let sc = Scenario {
        community_a: CommunityParams::with_stock(3e7),
        community_b: CommunityParams::with_stock(5e7).onset_at(120.0),
        sharing: SharingParams::with_threshold(0.6),
        ..Scenario::default()
    };
    let run = RunSettings::default();
    let (orig, swapped) = swapped_pair(&sc, &run);
    assert_eq!(summarize(&orig).outcome, OutcomeClass::Blue);
    assert_eq!(orig.len(), swapped.len());
    let (mut epi, mut supply) = (0.0f64, 0.0f64);
    for (j, (y, z)) in orig.states.iter().zip(&swapped.states).enumerate() {
        assert!((orig.times[j] - 120.0 - swapped.times[j]).abs() < 1e-9);
        for (c, m, p) in [(&y.a, &z.b, &sc.community_a), (&y.b, &z.a, &sc.community_b)] {
            for (v, w) in [(c.u, m.u), (c.i, m.i), (c.rec, m.rec)] {
                epi = epi.max((v - w).abs() / p.n);
            }
            supply = supply.max((c.s - m.s).abs() / p.s_max);
            supply = supply.max((c.p - m.p).abs() / p.p_max);
            supply = supply.max((c.d - m.d).abs() / p.p_max);
        }
    }
    assert!(epi < 10.0 * run.rel_tol, "epidemic components differ by {epi:e}");
    // Sharing switches on within a fraction of a day, so the stock is
    // sensitive to the exact switching time.
    assert!(supply < 1e-3, "supply components differ by {supply:e}");
}

#[test]
fn label_swap_mirrors_a_depleting_run() {
    let sc = Scenario {
        community_a: CommunityParams::with_stock(2e7),
        community_b: CommunityParams::with_stock(5e7).onset_at(60.0),
        sharing: SharingParams::with_threshold(0.5),
        ..Scenario::default()
    };
    let (orig, swapped) = swapped_pair(&sc, &RunSettings::default());
    let (a, b) = (summarize(&orig), summarize(&swapped));
    assert!(a.depleted_a || a.depleted_b);
    assert_eq!(a.outcome, b.outcome.mirrored());
    assert!((a.infected_ratio_a - b.infected_ratio_b).abs() < 1e-3);
    assert!((a.infected_ratio_b - b.infected_ratio_a).abs() < 1e-3);
    assert!((a.min_stock_ratio_a - b.min_stock_ratio_b).abs() < 1e-3);
}

#[test]
fn sharing_lowers_or_keeps_the_worst_infected_ratio() {
    let disabled = common::time_evolution(SharingParams::disabled());
    let shared = common::time_evolution(SharingParams::with_threshold(0.6));
    let run = RunSettings::default();
    let worst = |sc: &Scenario| {
        let tr = run_scenario(sc, &sc.integrator_settings(&run)).unwrap();
        let last = tr.last_state().unwrap();
        (1.0 - last.a.u / sc.community_a.n).max(1.0 - last.b.u / sc.community_b.n)
    };
    assert!(worst(&shared) < worst(&disabled) - 0.1);
}

#[test]
fn six_hundred_day_window_yields_1201_samples() {
    let sc = Scenario::default();
    let run = RunSettings {
        horizon: 595.0,
        ..RunSettings::default()
    };
    let tr = run_scenario(&sc, &sc.integrator_settings(&run)).unwrap();
    assert_eq!(tr.len(), 1201);
    assert_eq!(tr.times[0], -5.0);
    assert_eq!(*tr.times.last().unwrap(), 595.0);
}

#[test]
fn random_scenarios_finish_and_conserve_population() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..8 {
        let sc = common::random_scenario(&mut rng);
        let tr = run_scenario(&sc, &sc.integrator_settings(&RunSettings::default())).unwrap();
        for y in &tr.states {
            for (c, p) in [(&y.a, &sc.community_a), (&y.b, &sc.community_b)] {
                assert!((c.population() - p.n).abs() < 1e-6 * p.n);
                assert!(c.u >= -1e-6 * p.n && c.i >= -1e-6 * p.n);
            }
        }
    }
}
