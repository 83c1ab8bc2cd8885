//! Propagation: LOS probability, path loss, shadowing and small-scale fading.
//!
//! Normative closed forms (f_c in GHz inside the logs, d in metres):
//!
//! | model            | LOS                                   | NLOS                                             |
//! |------------------|---------------------------------------|--------------------------------------------------|
//! | LTE UMi          | 22.0 log d3 + 28.0 + 20 log f_c       | max(LOS, 36.7 log d3 + 22.7 + 26 log f_c)         |
//! | LTE RMa          | Friis on the ground distance          | same as LOS                                       |
//! | mmWave UMi       | 32.4 + 21 log d3 + 20 log f_c         | max(LOS, 35.3 log d3 + 22.4 + 21.3 log f_c)       |
//! | mmWave RMa       | 20 log(40 pi d3 f_c / 3) + height terms | max(LOS, 161.04 - ... + 20 log f_c - ...)      |
//!
//! Each LOS form switches to its far-field branch beyond the breakpoint
//! distance. LOS probability, urban: `min(18/d, 1)(1 - e^{-d/36}) + e^{-d/36}`;
//! rural: 1 up to 10 m, then `e^{-(d-10)/1000}`.
//!
//! Shadowing is log-normal with a first-order autoregressive evolution along
//! the vehicle's path. Fast fading is a unit-power complex Gaussian process:
//! a single Rayleigh tap for LTE, and four exponentially decaying clusters
//! with per-cluster Doppler shifts for mmWave.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::{FadingMode, Scenario, Tech};
use crate::geometry::{enb_height, VEHICLE_HEIGHT};
use crate::SPEED_OF_LIGHT;

/// Path-loss distance clamp, m.
pub const D_MIN: f64 = 1.0;

/// Number of mmWave clusters.
pub const MMWAVE_CLUSTERS: usize = 4;
/// Power decay between consecutive mmWave clusters, dB.
pub const CLUSTER_DECAY_DB: f64 = 3.0;
/// Doppler spread inside one cluster as a fraction of the maximum Doppler.
pub const INTRA_CLUSTER_SPREAD: f64 = 0.1;

/// Urban average building height and street width for the rural formulas, m.
const RMA_BUILDING_HEIGHT: f64 = 5.0;
const RMA_STREET_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance must be non-negative, got {0} m")]
    NegativeDistance(f64),
    #[error("distance {0} m is below the {D_MIN} m path-loss minimum")]
    DistanceBelowMinimum(f64),
    #[error("carrier frequency must be positive, got {0} Hz")]
    NonPositiveCarrier(f64),
}

/// Probability that a link of ground distance `d` is in line of sight.
pub fn los_probability(scenario: Scenario, _tech: Tech, d: f64) -> Result<f64, ChannelError> {
    if !(d >= 0.0) {
        return Err(ChannelError::NegativeDistance(d));
    }
    Ok(match scenario {
        Scenario::UMi => {
            let e = (-d / 36.0).exp();
            (18.0 / d).min(1.0) * (1.0 - e) + e
        }
        Scenario::RMa => {
            if d <= 10.0 {
                1.0
            } else {
                (-(d - 10.0) / 1000.0).exp()
            }
        }
    })
}

/// Free-space loss `20 log10(4 pi d f / c)`.
pub fn friis(d: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * PI * d * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// Path loss in dB for a link of ground distance `d`.
pub fn path_loss(scenario: Scenario, tech: Tech, los: bool, d: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(d >= D_MIN) {
        return Err(ChannelError::DistanceBelowMinimum(d));
    }
    if !(carrier_hz > 0.0) {
        return Err(ChannelError::NonPositiveCarrier(carrier_hz));
    }
    let h_bs = enb_height(scenario);
    let h_ut = VEHICLE_HEIGHT;
    let d3 = d.hypot(h_bs - h_ut);
    let fc = carrier_hz / 1e9;
    Ok(match (scenario, tech) {
        (Scenario::RMa, Tech::Lte) => friis(d, carrier_hz),
        (Scenario::UMi, Tech::Lte) => {
            let bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * carrier_hz / SPEED_OF_LIGHT;
            let los_pl = if d <= bp {
                22.0 * d3.log10() + 28.0 + 20.0 * fc.log10()
            } else {
                40.0 * d3.log10() + 28.0 + 20.0 * fc.log10() - 9.0 * (bp * bp + (h_bs - h_ut).powi(2)).log10()
            };
            if los {
                los_pl
            } else {
                let nlos = 36.7 * d3.log10() + 22.7 + 26.0 * fc.log10() - 0.3 * (h_ut - 1.5);
                nlos.max(los_pl)
            }
        }
        (Scenario::UMi, Tech::MmWave) => {
            let bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * carrier_hz / SPEED_OF_LIGHT;
            let los_pl = if d <= bp {
                32.4 + 21.0 * d3.log10() + 20.0 * fc.log10()
            } else {
                32.4 + 40.0 * d3.log10() + 20.0 * fc.log10() - 9.5 * (bp * bp + (h_bs - h_ut).powi(2)).log10()
            };
            if los {
                los_pl
            } else {
                let nlos = 35.3 * d3.log10() + 22.4 + 21.3 * fc.log10() - 0.3 * (h_ut - 1.5);
                nlos.max(los_pl)
            }
        }
        (Scenario::RMa, Tech::MmWave) => {
            let h = RMA_BUILDING_HEIGHT;
            let w = RMA_STREET_WIDTH;
            let bp = 2.0 * PI * h_bs * h_ut * carrier_hz / SPEED_OF_LIGHT;
            let pl1 = |x: f64| {
                20.0 * (40.0 * PI * x * fc / 3.0).log10() + (0.03 * h.powf(1.72)).min(10.0) * x.log10()
                    - (0.044 * h.powf(1.72)).min(14.77)
                    + 0.002 * h.log10() * x
            };
            let los_pl = if d <= bp {
                pl1(d3)
            } else {
                pl1(bp) + 40.0 * (d3 / bp).log10()
            };
            if los {
                los_pl
            } else {
                let nlos = 161.04 - 7.1 * w.log10() + 7.5 * h.log10()
                    - (24.37 - 3.7 * (h / h_bs).powi(2)) * h_bs.log10()
                    + (43.42 - 3.1 * h_bs.log10()) * (d3.log10() - 3.0)
                    + 20.0 * fc.log10()
                    - (3.2 * (11.75 * h_ut).log10().powi(2) - 4.97);
                nlos.max(los_pl)
            }
        }
    })
}

/// Shadow-fading standard deviation, dB.
pub fn shadow_sigma(scenario: Scenario, tech: Tech, los: bool) -> f64 {
    match (scenario, tech, los) {
        (Scenario::RMa, Tech::Lte, _) => 0.0,
        (Scenario::UMi, Tech::Lte, true) => 3.0,
        (Scenario::UMi, Tech::Lte, false) => 4.0,
        (Scenario::UMi, Tech::MmWave, true) => 4.0,
        (Scenario::UMi, Tech::MmWave, false) => 7.82,
        (Scenario::RMa, Tech::MmWave, true) => 4.0,
        (Scenario::RMa, Tech::MmWave, false) => 8.0,
    }
}

/// Shadowing decorrelation distance, m.
pub fn shadow_decorrelation(scenario: Scenario, los: bool) -> f64 {
    match (scenario, los) {
        (Scenario::UMi, true) => 10.0,
        (Scenario::UMi, false) => 13.0,
        (Scenario::RMa, true) => 37.0,
        (Scenario::RMa, false) => 120.0,
    }
}

/// Distance a vehicle travels before its LOS states are redrawn, m.
pub fn los_refresh_distance(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::UMi => 10.0,
        Scenario::RMa => 50.0,
    }
}

/// One independent shadowing draw in dB.
pub fn sample_shadowing<R: Rng + ?Sized>(scenario: Scenario, tech: Tech, los: bool, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    shadow_sigma(scenario, tech, los) * z
}

/// Autoregressive shadowing state in standard-normal units.
///
/// The dB value is `sigma * z`, so a LOS transition rescales the deviation
/// without breaking the spatial correlation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shadowing {
    z: f64,
}

impl Shadowing {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Shadowing { z: rng.sample(StandardNormal) }
    }

    pub fn from_normal(z: f64) -> Self {
        Shadowing { z }
    }

    pub fn normal(&self) -> f64 {
        self.z
    }

    pub fn db(&self, sigma: f64) -> f64 {
        sigma * self.z
    }

    /// Moves the state `displacement` metres along the path.
    pub fn advance<R: Rng + ?Sized>(&mut self, displacement: f64, decorrelation: f64, rng: &mut R) {
        if displacement <= 0.0 {
            return;
        }
        let rho = (-displacement / decorrelation).exp();
        let w: f64 = rng.sample(StandardNormal);
        self.z = rho * self.z + (1.0 - rho * rho).sqrt() * w;
    }
}

/// Bessel function of the first kind, order zero, on `[0, 2.4048]`.
fn bessel_j0_small(x: f64) -> f64 {
    let q = -x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..30 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    sum
}

const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

/// Lag-`dt` correlation of a Clarke spectrum with maximum Doppler `f_d`,
/// floored at zero past the first zero of J0.
pub fn doppler_correlation(f_d: f64, dt: f64) -> f64 {
    let x = 2.0 * PI * f_d * dt;
    if x >= J0_FIRST_ZERO {
        0.0
    } else {
        bessel_j0_small(x).clamp(0.0, 1.0)
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn cluster_powers() -> &'static [f64; MMWAVE_CLUSTERS] {
    static POWERS: OnceLock<[f64; MMWAVE_CLUSTERS]> = OnceLock::new();
    POWERS.get_or_init(|| {
        let lin: [f64; MMWAVE_CLUSTERS] = std::array::from_fn(|i| 10f64.powf(-CLUSTER_DECAY_DB * i as f64 / 10.0));
        let total: f64 = lin.iter().sum();
        lin.map(|p| p / total)
    })
}

/// Relative power of cluster `k`, normalized over all clusters.
pub fn cluster_power(k: usize) -> f64 {
    cluster_powers()[k]
}

/// Per-step coefficients, reused while the motion state is unchanged.
#[derive(Clone, Copy, Debug, PartialEq)]
struct StepCoefficients {
    key: [f64; 4],
    mode: FadingMode,
    rho: f64,
    innov: f64,
    rot: [Complex64; MMWAVE_CLUSTERS],
}

/// Small-scale fading state of one link.
#[derive(Clone, Debug, PartialEq)]
pub struct Fading {
    taps: [Complex64; MMWAVE_CLUSTERS],
    /// Cluster arrival angles, rad.
    angles: [f64; MMWAVE_CLUSTERS],
    n: usize,
    coeffs: Option<StepCoefficients>,
}

impl Fading {
    pub fn new<R: Rng + ?Sized>(tech: Tech, rng: &mut R) -> Self {
        let mut taps = [Complex64::new(0.0, 0.0); MMWAVE_CLUSTERS];
        let mut angles = [0.0; MMWAVE_CLUSTERS];
        let n = match tech {
            Tech::Lte => {
                taps[0] = complex_normal(rng, 1.0);
                1
            }
            Tech::MmWave => {
                for k in 0..MMWAVE_CLUSTERS {
                    taps[k] = complex_normal(rng, cluster_power(k));
                    angles[k] = rng.random::<f64>() * 2.0 * PI - PI;
                }
                MMWAVE_CLUSTERS
            }
        };
        Fading {
            taps,
            angles,
            n,
            coeffs: None,
        }
    }

    /// Channel gain `|h|^2`.
    pub fn power(&self) -> f64 {
        self.taps[..self.n].iter().sum::<Complex64>().norm_sqr()
    }

    /// Complex channel coefficient.
    pub fn coefficient(&self) -> Complex64 {
        self.taps[..self.n].iter().sum()
    }

    pub fn clusters(&self) -> usize {
        self.n
    }

    /// Advances the process by `dt` seconds for a receiver moving at `speed`
    /// along `heading`.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, speed: f64, heading: f64, carrier_hz: f64, mode: FadingMode, rng: &mut R) {
        let key = [dt, speed, heading, carrier_hz];
        let c = match self.coeffs {
            Some(c) if c.key == key && c.mode == mode => c,
            _ => {
                let c = self.coefficients(key, mode);
                self.coeffs = Some(c);
                c
            }
        };
        if c.rho >= 1.0 && self.n == 1 {
            return;
        }
        let powers = cluster_powers();
        let single = self.n == 1;
        for (k, tap) in self.taps[..self.n].iter_mut().enumerate() {
            if c.rho < 1.0 {
                let p = if single { 1.0 } else { powers[k] };
                *tap = *tap * c.rho + complex_normal(rng, p) * c.innov;
            }
            *tap *= c.rot[k];
        }
    }

    fn coefficients(&self, key: [f64; 4], mode: FadingMode) -> StepCoefficients {
        let [dt, speed, heading, carrier_hz] = key;
        let f_d = speed * carrier_hz / SPEED_OF_LIGHT;
        let one = Complex64::new(1.0, 0.0);
        let mut rot = [one; MMWAVE_CLUSTERS];
        // A single Rayleigh tap carries the whole Doppler spectrum in its
        // correlation. Clusters rotate at their own Doppler shift and only
        // decorrelate slowly inside.
        let spread = if self.n == 1 {
            f_d
        } else {
            for (k, r) in rot.iter_mut().enumerate().take(self.n) {
                let shift = f_d * (self.angles[k] - heading).cos();
                *r = Complex64::from_polar(1.0, 2.0 * PI * shift * dt);
            }
            f_d * INTRA_CLUSTER_SPREAD
        };
        let rho = match mode {
            FadingMode::Correlated => doppler_correlation(spread, dt),
            FadingMode::Iid => 0.0,
        };
        StepCoefficients {
            key,
            mode,
            rho,
            innov: (1.0 - rho * rho).sqrt(),
            rot,
        }
    }
}

/// Propagation state of one (vehicle, eNB) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkState {
    /// Ground distance, m.
    pub distance: f64,
    pub los: bool,
    /// A building lies on the straight path (urban grid only).
    pub blocked: bool,
    pub path_loss: f64,
    pub shadowing: f64,
    pub fading_power: f64,
    /// Simulation time of the last update, s.
    pub last_update: f64,
    pub shadow: Shadowing,
    pub fading: Fading,
}

/// Propagation model of one deployment: scenario, technology and carrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub scenario: Scenario,
    pub tech: Tech,
    pub carrier_hz: f64,
    pub fading_mode: FadingMode,
    pub force_los: bool,
}

impl ChannelModel {
    pub fn draw_los<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> bool {
        let p = los_probability(self.scenario, self.tech, d.max(0.0)).expect("non-negative distance");
        // Always consume the draw so forcing LOS does not shift the stream.
        let u: f64 = rng.random();
        self.force_los || u < p
    }

    pub fn path_loss(&self, los: bool, d: f64) -> f64 {
        path_loss(self.scenario, self.tech, los, d.max(D_MIN), self.carrier_hz).expect("clamped distance")
    }

    pub fn new_link<R: Rng + ?Sized>(&self, d: f64, blocked: bool, rng: &mut R) -> LinkState {
        let los = self.draw_los(d, rng);
        let shadow = Shadowing::new(rng);
        let fading = Fading::new(self.tech, rng);
        LinkState {
            distance: d,
            los,
            blocked,
            path_loss: self.path_loss(los, d),
            shadowing: shadow.db(shadow_sigma(self.scenario, self.tech, los)),
            fading_power: fading.power(),
            last_update: 0.0,
            shadow,
            fading,
        }
    }

    /// Large-scale update after the vehicle moved `displacement` metres.
    /// `redraw_los` refreshes the frozen LOS draw and the blockage flag.
    pub fn update_large_scale<R: Rng + ?Sized>(
        &self,
        link: &mut LinkState,
        d: f64,
        displacement: f64,
        redraw: Option<bool>,
        rng: &mut R,
    ) {
        link.distance = d;
        if let Some(blocked) = redraw {
            link.los = self.draw_los(d, rng);
            link.blocked = blocked;
        }
        link.shadow
            .advance(displacement, shadow_decorrelation(self.scenario, link.los), rng);
        link.shadowing = link.shadow.db(shadow_sigma(self.scenario, self.tech, link.los));
        link.path_loss = self.path_loss(link.los, d);
    }

    /// Path loss and shadowing seen by a vehicle that does not use this link
    /// for service. Blocked paths are forced into NLOS.
    pub fn interferer_loss(&self, link: &LinkState) -> (f64, f64) {
        if link.los && link.blocked {
            let pl = self.path_loss(false, link.distance);
            let sf = link.shadow.db(shadow_sigma(self.scenario, self.tech, false));
            (pl, sf)
        } else {
            (link.path_loss, link.shadowing)
        }
    }
}

/// Advances the fast fading of `link` by `dt` seconds.
#[allow(clippy::too_many_arguments)]
pub fn step_fading<R: Rng + ?Sized>(
    link: &mut LinkState,
    dt: f64,
    speed: f64,
    heading: f64,
    carrier_hz: f64,
    mode: FadingMode,
    rng: &mut R,
) {
    link.fading.step(dt, speed, heading, carrier_hz, mode, rng);
    link.fading_power = link.fading.power();
    link.last_update += dt;
}
