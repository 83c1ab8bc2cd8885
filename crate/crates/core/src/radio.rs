//! Antenna gains, SINR and the truncated-Shannon PHY abstraction.

use rand::Rng;

use crate::config::{ArraySize, ScenarioConfig, Tech};

/// Thermal noise density, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;
/// SINR below which a link carries nothing, dB.
pub const SINR_OUTAGE_DB: f64 = -5.0;
/// Implementation-loss gap of the Shannon abstraction, dB.
pub const SHANNON_GAP_DB: f64 = 3.0;
/// Side-lobe floor below the main-lobe gain, dB.
pub const SIDE_LOBE_DROP_DB: f64 = 20.0;
/// Half-power beamwidth of a one-element-per-side array, degrees.
const BEAMWIDTH_PER_SIDE_DEG: f64 = 102.0;

pub fn max_spectral_efficiency(tech: Tech) -> f64 {
    match tech {
        Tech::Lte => 4.8,
        Tech::MmWave => 7.4,
    }
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Boresight gain `10 log10(N)` of an array, dBi.
pub fn max_gain(array: ArraySize) -> f64 {
    lin_to_db(f64::from(array.elements()))
}

/// 3 dB beamwidth, radians.
pub fn beamwidth(array: ArraySize) -> f64 {
    (BEAMWIDTH_PER_SIDE_DEG / f64::from(array.0.max(array.1))).to_radians()
}

/// Antenna gain of one link endpoint, dBi.
///
/// Aligned mmWave endpoints get the boresight gain. Unaligned ones fall in
/// the main lobe with probability `beamwidth / 2 pi` and otherwise see the
/// side-lobe floor. LTE antennas are omnidirectional.
pub fn antenna_gain<R: Rng + ?Sized>(tech: Tech, array: ArraySize, aligned: bool, rng: &mut R) -> f64 {
    match tech {
        Tech::Lte => 0.0,
        Tech::MmWave => {
            let g = max_gain(array);
            if aligned {
                g
            } else {
                let p_main = beamwidth(array) / (2.0 * std::f64::consts::PI);
                if rng.random::<f64>() < p_main {
                    g
                } else {
                    g - SIDE_LOBE_DROP_DB
                }
            }
        }
    }
}

/// Linear two-level gain pattern of one array, for hot loops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainPattern {
    pub main: f64,
    pub side: f64,
    /// Probability that a random direction falls in the main lobe; zero for
    /// omnidirectional antennas, which draw nothing.
    pub p_main: f64,
}

impl GainPattern {
    pub fn new(tech: Tech, array: ArraySize) -> Self {
        match tech {
            Tech::Lte => GainPattern {
                main: 1.0,
                side: 1.0,
                p_main: 0.0,
            },
            Tech::MmWave => {
                let g = max_gain(array);
                GainPattern {
                    main: db_to_lin(g),
                    side: db_to_lin(g - SIDE_LOBE_DROP_DB),
                    p_main: beamwidth(array) / (2.0 * std::f64::consts::PI),
                }
            }
        }
    }

    /// Linear gain towards a random direction. Same draws as
    /// [`antenna_gain`] with `aligned = false`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.p_main == 0.0 {
            return self.main;
        }
        if rng.random::<f64>() < self.p_main {
            self.main
        } else {
            self.side
        }
    }
}

/// Thermal noise over `bandwidth_hz` with noise figure `nf_db`, dBm.
pub fn noise_dbm(bandwidth_hz: f64, nf_db: f64) -> f64 {
    THERMAL_NOISE_DBM_HZ + lin_to_db(bandwidth_hz) + nf_db
}

/// Everything needed to turn one link into a received power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RxComponents {
    pub path_loss: f64,
    pub shadowing: f64,
    /// Linear fast-fading gain.
    pub fading_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

impl RxComponents {
    pub fn rx_power_dbm(&self, tx_power_dbm: f64) -> f64 {
        tx_power_dbm - self.path_loss - self.shadowing + lin_to_db(self.fading_power) + self.tx_gain + self.rx_gain
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub rx_power: f64,
    /// Aggregate interference, dBm; `-inf` without interferers.
    pub interference: f64,
    pub noise: f64,
    pub sinr: f64,
    /// Full-band capacity before MAC sharing, bit/s.
    pub capacity: f64,
}

/// SINR of `serving` against every co-channel interferer.
pub fn compute_sinr(serving: &RxComponents, interferers: &[RxComponents], config: &ScenarioConfig) -> LinkBudget {
    let rx_power = serving.rx_power_dbm(config.tx_power_dbm);
    let interference_lin: f64 = interferers
        .iter()
        .map(|i| db_to_lin(i.rx_power_dbm(config.tx_power_dbm)))
        .sum();
    let noise = noise_dbm(config.bandwidth_hz, config.noise_figure_db);
    let sinr = rx_power - lin_to_db(interference_lin + db_to_lin(noise));
    LinkBudget {
        rx_power,
        interference: lin_to_db(interference_lin),
        noise,
        sinr,
        capacity: link_capacity(sinr, config.bandwidth_hz, config.tech),
    }
}

/// Truncated Shannon capacity, bit/s.
pub fn link_capacity(sinr_db: f64, bandwidth_hz: f64, tech: Tech) -> f64 {
    if !(sinr_db >= SINR_OUTAGE_DB) {
        return 0.0;
    }
    let eff = (1.0 + db_to_lin(sinr_db - SHANNON_GAP_DB)).log2();
    bandwidth_hz * eff.min(max_spectral_efficiency(tech))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Scenario;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rx(pl: f64) -> RxComponents {
        RxComponents {
            path_loss: pl,
            shadowing: 0.0,
            fading_power: 1.0,
            tx_gain: 0.0,
            rx_gain: 0.0,
        }
    }

    #[test]
    fn lte_is_omni() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for aligned in [true, false] {
            assert_eq!(antenna_gain(Tech::Lte, ArraySize::OMNI, aligned, &mut rng), 0.0);
        }
    }

    #[test]
    fn aligned_array_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((antenna_gain(Tech::MmWave, ArraySize(8, 8), true, &mut rng) - 18.0618).abs() < 1e-3);
        assert!((antenna_gain(Tech::MmWave, ArraySize(4, 4), true, &mut rng) - 12.0412).abs() < 1e-3);
    }

    #[test]
    fn unaligned_gain_is_two_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = ArraySize(8, 8);
        let n = 200_000;
        let mut main = 0;
        for _ in 0..n {
            let g = antenna_gain(Tech::MmWave, a, false, &mut rng);
            if g == max_gain(a) {
                main += 1;
            } else {
                assert!((g - (max_gain(a) - 20.0)).abs() < 1e-12);
            }
        }
        let expect = 12.75 / 360.0;
        let frac = main as f64 / n as f64;
        assert!((frac - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt());
    }

    #[test]
    fn noise_floors() {
        assert!((noise_dbm(1e9, 5.0) + 79.0).abs() < 1e-9);
        assert!((noise_dbm(20e6, 5.0) + 95.99).abs() < 0.01);
    }

    #[test]
    fn noise_only_sinr() {
        let cfg = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
        let noise = noise_dbm(cfg.bandwidth_hz, cfg.noise_figure_db);
        let b = compute_sinr(&rx(cfg.tx_power_dbm - noise), &[], &cfg);
        assert!((b.rx_power - noise).abs() < 1e-9);
        assert!(b.sinr.abs() < 1e-9);
        assert_eq!(b.interference, f64::NEG_INFINITY);
    }

    #[test]
    fn capacity_reference_points() {
        assert_eq!(link_capacity(-10.0, 20e6, Tech::Lte), 0.0);
        assert!((link_capacity(1e3, 20e6, Tech::Lte) - 96e6).abs() < 1e-6);
        let c = link_capacity(13.0, 20e6, Tech::Lte);
        assert!((c - 20e6 * 11f64.log2()).abs() < 1.0);
        assert!((c / 1e6 - 69.2).abs() < 0.05);
    }

    #[test]
    fn pattern_matches_antenna_gain() {
        let a = ArraySize(8, 8);
        let pat = GainPattern::new(Tech::MmWave, a);
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let g = antenna_gain(Tech::MmWave, a, false, &mut r1);
            assert!((lin_to_db(pat.draw(&mut r2)) - g).abs() < 1e-9);
        }
        assert_eq!(GainPattern::new(Tech::Lte, ArraySize::OMNI).draw(&mut r1), 1.0);
    }

    #[test]
    fn interference_is_permutation_invariant() {
        let cfg = ScenarioConfig::defaults(Scenario::UMi, Tech::Lte);
        let mut ifs = vec![rx(100.0), rx(110.0), rx(95.0), rx(130.0)];
        let a = compute_sinr(&rx(90.0), &ifs, &cfg);
        ifs.reverse();
        let b = compute_sinr(&rx(90.0), &ifs, &cfg);
        assert!((a.sinr - b.sinr).abs() < 1e-12);
    }
}
