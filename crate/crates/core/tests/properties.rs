use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use v2i_core::channel::{los_probability, path_loss};
use v2i_core::config::FadingMode;
use v2i_core::geometry::{place_vehicles, reassociate, Point, Topology};
use v2i_core::metrics::{jain_index, lower_tail_mean};
use v2i_core::radio::{compute_sinr, link_capacity, RxComponents};
use v2i_core::{Scenario, ScenarioConfig, Tech};

fn scenario() -> impl Strategy<Value = Scenario> {
    prop_oneof![Just(Scenario::UMi), Just(Scenario::RMa)]
}

fn tech() -> impl Strategy<Value = Tech> {
    prop_oneof![Just(Tech::Lte), Just(Tech::MmWave)]
}

prop_compose! {
    fn config()(
        s in scenario(),
        t in tech(),
        lambda in 1.0f64..100.0,
        m_v in 1u32..20,
        rate in 1e5f64..3e8,
        seed in any::<u64>(),
        runs in 1u32..200,
        iid in any::<bool>(),
        force_los in any::<bool>(),
    ) -> ScenarioConfig {
        let mut c = ScenarioConfig::defaults(s, t);
        c.lambda_enb_per_km2 = lambda;
        c.vehicles_per_enb = m_v;
        c.app_rate_bps = rate;
        c.master_seed = seed;
        c.n_runs = runs;
        c.fading = if iid { FadingMode::Iid } else { FadingMode::Correlated };
        c.force_los = force_los;
        c
    }
}

fn rx(pl: f64, sf: f64, fading: f64, g: f64) -> RxComponents {
    RxComponents {
        path_loss: pl,
        shadowing: sf,
        fading_power: fading,
        tx_gain: g,
        rx_gain: 0.0,
    }
}

proptest! {
    #[test]
    fn config_round_trips_through_json(c in config()) {
        let back = ScenarioConfig::from_json_str(&c.to_json_string()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn rate_and_interarrival_agree(c in config()) {
        let product = c.app_rate_bps * c.interarrival_s();
        let bits = 8.0 * f64::from(c.packet_size_bytes);
        prop_assert!((product / bits - 1.0).abs() < 1e-6);
    }

    #[test]
    fn jain_is_scale_and_permutation_invariant(
        mut s in prop::collection::vec(0.0f64..1e9, 1..60),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(s.iter().any(|&x| x > 0.0));
        let j = jain_index(&s).unwrap();
        let n = s.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0);
        let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
        prop_assert!((jain_index(&scaled).unwrap() - j).abs() < 1e-9);
        s.reverse();
        prop_assert!((jain_index(&s).unwrap() - j).abs() < 1e-12);
    }

    #[test]
    fn lower_tail_is_monotone_and_below_mean(s in prop::collection::vec(0.0f64..1e9, 1..200)) {
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let p5 = lower_tail_mean(&s, 0.05).unwrap();
        let p10 = lower_tail_mean(&s, 0.10).unwrap();
        prop_assert!(p5 <= p10 + 1e-6);
        prop_assert!(p10 <= mean * (1.0 + 1e-12) + 1e-6);
        let mut rev = s.clone();
        rev.reverse();
        prop_assert_eq!(lower_tail_mean(&rev, 0.05).unwrap(), p5);
    }

    #[test]
    fn association_ignores_common_offsets(
        seed in any::<u64>(),
        n_enb in 1usize..8,
        offset in -50.0f64..50.0,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let enbs: Vec<Point> = (0..n_enb).map(|i| Point { x: 50.0 * i as f64, y: 100.0 }).collect();
        let vehicles = place_vehicles(&enbs, 3, Scenario::UMi, 500.0, 8.33, &mut r).unwrap();
        let mut a = Topology::new(Scenario::UMi, 500.0, enbs, vehicles);
        let mut b = a.clone();
        let powers: Vec<f64> = (0..a.vehicles.len() * n_enb).map(|i| -60.0 - ((i * 7919) % 41) as f64).collect();
        let shifted: Vec<f64> = powers.iter().map(|p| p + offset).collect();
        reassociate(&mut a, &powers);
        reassociate(&mut b, &shifted);
        let sa: Vec<usize> = a.vehicles.iter().map(|v| v.serving).collect();
        let sb: Vec<usize> = b.vehicles.iter().map(|v| v.serving).collect();
        prop_assert_eq!(sa, sb);
    }

    #[test]
    fn los_probability_is_a_non_increasing_probability(s in scenario(), t in tech(), d in 0.0f64..2000.0, step in 0.0f64..100.0) {
        let p = los_probability(s, t, d).unwrap();
        let q = los_probability(s, t, d + step).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q <= p + 1e-12);
    }

    #[test]
    fn path_loss_is_monotone_and_nlos_dominates(s in scenario(), t in tech(), d in 10.0f64..1000.0, step in 0.0f64..50.0) {
        let fc = if t == Tech::Lte { 2e9 } else { 28e9 };
        for los in [true, false] {
            let a = path_loss(s, t, los, d, fc).unwrap();
            let b = path_loss(s, t, los, d + step, fc).unwrap();
            prop_assert!(a.is_finite() && a > 0.0);
            prop_assert!(b >= a - 1e-9);
        }
        prop_assert!(path_loss(s, t, false, d, fc).unwrap() >= path_loss(s, t, true, d, fc).unwrap());
    }

    #[test]
    fn capacity_is_monotone_and_bounded(t in tech(), a in -20.0f64..60.0, b in -20.0f64..60.0) {
        let w = if t == Tech::Lte { 20e6 } else { 1e9 };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let cl = link_capacity(lo, w, t);
        let ch = link_capacity(hi, w, t);
        prop_assert!(cl <= ch);
        prop_assert!(ch <= w * v2i_core::radio::max_spectral_efficiency(t) + 1e-6);
        prop_assert!(cl >= 0.0);
    }

    #[test]
    fn interference_sum_ignores_order(pls in prop::collection::vec(60.0f64..160.0, 0..20)) {
        let cfg = ScenarioConfig::defaults(Scenario::UMi, Tech::MmWave);
        let serving = rx(90.0, 1.0, 0.8, 30.0);
        let mut ifs: Vec<RxComponents> = pls.iter().map(|&p| rx(p, -2.0, 1.3, -5.0)).collect();
        let a = compute_sinr(&serving, &ifs, &cfg);
        ifs.reverse();
        let b = compute_sinr(&serving, &ifs, &cfg);
        prop_assert!((a.sinr - b.sinr).abs() < 1e-9);
        // Budget identities.
        let lin = |db: f64| 10f64.powf(db / 10.0);
        let expect = a.rx_power - 10.0 * (lin(a.interference) + lin(a.noise)).log10();
        prop_assert!((a.sinr - expect).abs() < 1e-6);
    }
}

#[test]
fn doubling_power_helps_only_noise_limited_links() {
    let mut cfg = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
    // Interference 40 dB above noise.
    let strong = [rx(50.0, 0.0, 1.0, 0.0)];
    let serving = rx(45.0, 0.0, 1.0, 0.0);
    let before = compute_sinr(&serving, &strong, &cfg).sinr;
    let noise_only = compute_sinr(&rx(120.0, 0.0, 1.0, 0.0), &[], &cfg).sinr;
    cfg.tx_power_dbm += 10.0 * 2f64.log10();
    let after = compute_sinr(&serving, &strong, &cfg).sinr;
    let noise_after = compute_sinr(&rx(120.0, 0.0, 1.0, 0.0), &[], &cfg).sinr;
    assert!((after - before).abs() < 0.1);
    assert!((noise_after - noise_only - 3.0103).abs() < 1e-3);
}
