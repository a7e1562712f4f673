#![allow(dead_code)]

use rand::Rng;
use stockshare::model::{CommunityParams, EpidemicParams, Scenario, SharingParams, SystemState, STATE_DIM};

/// Root in (0, 1] of `z = 1 − exp(−R z)` for `R > 1`, by fixed-point
/// iteration from `z = 1`.
pub fn final_size(r: f64) -> f64 {
    assert!(r > 1.0);
    let mut z = 1.0;
    for _ in 0..10_000 {
        let next = 1.0 - (-r * z).exp();
        if (next - z).abs() < 1e-15 {
            return next;
        }
        z = next;
    }
    z
}

/// Classical fixed-step RK4 on the coupled right-hand side.
pub fn rk4(sc: &Scenario, t0: f64, t1: f64, h: f64) -> SystemState {
    let f = |t: f64, y: &[f64; STATE_DIM]| -> [f64; STATE_DIM] {
        sc.coupled_rhs(t, &SystemState::from_slice(y))
            .expect("finite derivative")
            .to_array()
    };
    let axpy = |y: &[f64; STATE_DIM], k: &[f64; STATE_DIM], a: f64| {
        let mut out = *y;
        for (o, kv) in out.iter_mut().zip(k) {
            *o += a * kv;
        }
        out
    };
    let steps = ((t1 - t0) / h).round() as usize;
    let h = (t1 - t0) / steps as f64;
    let mut y = sc.initial_state().to_array();
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &axpy(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &axpy(&y, &k3, h));
        for j in 0..STATE_DIM {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t += h;
    }
    SystemState::from_slice(&y)
}

/// The configuration behind the time-evolution figure: equal stock 3e7 and
/// B starting 180 days after A.
pub fn time_evolution(sharing: SharingParams) -> Scenario {
    Scenario {
        community_a: CommunityParams::with_stock(3e7),
        community_b: CommunityParams::with_stock(3e7).onset_at(180.0),
        sharing,
        ..Scenario::default()
    }
}

/// A valid scenario with every physical parameter drawn from a broad range.
pub fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let community = |rng: &mut R, onset: f64| {
        let p0 = rng.gen_range(1e5..1e6);
        CommunityParams {
            n: rng.gen_range(1e6..5e7),
            s_max: rng.gen_range(5e6..1e8),
            p0,
            p_max: p0 * rng.gen_range(1.5..6.0),
            d0: p0,
            onset,
        }
    };
    let epidemic = EpidemicParams {
        r0: rng.gen_range(1.2..3.5),
        gamma: 1.0 / rng.gen_range(4.0..10.0),
        r: rng.gen_range(0.0..0.8),
        w: rng.gen_range(1.0..8.0),
    };
    let community_a = community(rng, 0.0);
    let onset_b = rng.gen_range(-240.0..240.0);
    let community_b = community(rng, onset_b);
    let sharing = SharingParams {
        enabled: rng.gen_bool(0.8),
        ..SharingParams::with_threshold(rng.gen_range(0.0..=1.0))
    };
    Scenario {
        epidemic,
        community_a,
        community_b,
        sharing,
        ..Scenario::default()
    }
}
