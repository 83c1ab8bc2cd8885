//! Deployment geometry: eNB and vehicle drops, street grid, mobility and
//! serving-cell association.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Scenario;

/// eNB antenna height, m.
pub fn enb_height(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::UMi => 10.0,
        Scenario::RMa => 35.0,
    }
}

/// Vehicle antenna height, m.
pub const VEHICLE_HEIGHT: f64 = 1.5;

/// Street-grid block pitch, m.
pub const BLOCK_PITCH: f64 = 50.0;
/// Fraction of the area covered by buildings in the urban grid.
pub const BUILDING_COVERAGE: f64 = 0.4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned building footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub min: Point,
    pub max: Point,
}

impl Building {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Liang-Barsky clip of segment `a`-`b` against the rectangle.
    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-dx, a.x - self.min.x),
            (dx, self.max.x - a.x),
            (-dy, a.y - self.min.y),
            (dy, self.max.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return false;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub pos: Point,
    /// Velocity vector, m/s.
    pub vel: Point,
    /// Random-waypoint target (urban mobility only).
    pub waypoint: Option<Point>,
    pub serving: usize,
    /// Distance travelled since the start of the run, m.
    pub odometer: f64,
}

impl Vehicle {
    pub fn speed(&self) -> f64 {
        self.vel.x.hypot(self.vel.y)
    }

    pub fn heading(&self) -> f64 {
        self.vel.y.atan2(self.vel.x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub scenario: Scenario,
    pub area_side: f64,
    pub enbs: Vec<Point>,
    pub vehicles: Vec<Vehicle>,
    pub buildings: Vec<Building>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("deployment area side must be positive, got {0} m")]
    ZeroArea(f64),
    #[error("point-process density must be positive, got {0} /km^2")]
    NonPositiveDensity(f64),
    #[error("cannot place vehicles without any eNB")]
    NoEnb,
}

/// Homogeneous PPP on `[0, area_side]^2` with `density` points per km^2.
pub fn sample_ppp<R: Rng + ?Sized>(area_side: f64, density: f64, rng: &mut R) -> Result<Vec<Point>, GeometryError> {
    if !(area_side > 0.0) {
        return Err(GeometryError::ZeroArea(area_side));
    }
    if !(density > 0.0) {
        return Err(GeometryError::NonPositiveDensity(density));
    }
    let mean = density * (area_side / 1000.0).powi(2);
    let count = Poisson::new(mean).expect("positive finite mean").sample(rng) as usize;
    Ok((0..count).map(|_| uniform_point(area_side, rng)).collect())
}

fn uniform_point<R: Rng + ?Sized>(side: f64, rng: &mut R) -> Point {
    Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side)
}

/// Drops `m_v` vehicles per eNB uniformly over the area.
///
/// Urban vehicles start towards a random waypoint; highway vehicles drive
/// along the x axis in a random direction. The initial serving cell is the
/// nearest eNB; callers refine it with [`reassociate`] once link states exist.
pub fn place_vehicles<R: Rng + ?Sized>(
    enbs: &[Point],
    m_v: u32,
    scenario: Scenario,
    area_side: f64,
    speed: f64,
    rng: &mut R,
) -> Result<Vec<Vehicle>, GeometryError> {
    if enbs.is_empty() {
        return Err(GeometryError::NoEnb);
    }
    let n = enbs.len() * m_v as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pos = uniform_point(area_side, rng);
        let (vel, waypoint) = match scenario {
            Scenario::UMi => {
                let wp = uniform_point(area_side, rng);
                (toward(pos, wp, speed), Some(wp))
            }
            Scenario::RMa => {
                let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
                (Point::new(dir * speed, 0.0), None)
            }
        };
        out.push(Vehicle {
            pos,
            vel,
            waypoint,
            serving: nearest(enbs, pos),
            odometer: 0.0,
        });
    }
    Ok(out)
}

fn nearest(enbs: &[Point], p: Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, e) in enbs.iter().enumerate() {
        let d = e.distance(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn toward(from: Point, to: Point, speed: f64) -> Point {
    let d = from.distance(to);
    if d <= f64::EPSILON {
        // Degenerate waypoint; pick an arbitrary heading.
        return Point::new(speed, 0.0);
    }
    Point::new((to.x - from.x) / d * speed, (to.y - from.y) / d * speed)
}

/// Regular grid of buildings covering [`BUILDING_COVERAGE`] of the area.
pub fn street_grid(area_side: f64) -> Vec<Building> {
    let blocks = (area_side / BLOCK_PITCH).floor() as usize;
    let side = BLOCK_PITCH * BUILDING_COVERAGE.sqrt();
    let margin = (BLOCK_PITCH - side) / 2.0;
    let mut out = Vec::with_capacity(blocks * blocks);
    for i in 0..blocks {
        for j in 0..blocks {
            let x0 = i as f64 * BLOCK_PITCH + margin;
            let y0 = j as f64 * BLOCK_PITCH + margin;
            out.push(Building {
                min: Point::new(x0, y0),
                max: Point::new(x0 + side, y0 + side),
            });
        }
    }
    out
}

impl Topology {
    pub fn new(scenario: Scenario, area_side: f64, enbs: Vec<Point>, vehicles: Vec<Vehicle>) -> Self {
        let buildings = match scenario {
            Scenario::UMi => street_grid(area_side),
            Scenario::RMa => Vec::new(),
        };
        Topology {
            scenario,
            area_side,
            enbs,
            vehicles,
            buildings,
        }
    }

    /// True when the segment crosses a building that contains neither end.
    pub fn path_blocked(&self, a: Point, b: Point) -> bool {
        let (lo_x, hi_x) = (a.x.min(b.x), a.x.max(b.x));
        let (lo_y, hi_y) = (a.y.min(b.y), a.y.max(b.y));
        self.buildings.iter().any(|bld| {
            bld.max.x >= lo_x
                && bld.min.x <= hi_x
                && bld.max.y >= lo_y
                && bld.min.y <= hi_y
                && !bld.contains(a)
                && !bld.contains(b)
                && bld.intersects_segment(a, b)
        })
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        (0.0..=self.area_side).contains(&p.x) && (0.0..=self.area_side).contains(&p.y)
    }
}

/// Advances every vehicle by `dt` seconds.
///
/// Urban: random waypoint, new target drawn on arrival, reflection at the
/// borders. Highway: constant velocity with wrap-around.
pub fn step_mobility<R: Rng + ?Sized>(topology: &mut Topology, dt: f64, rng: &mut R) {
    let side = topology.area_side;
    let scenario = topology.scenario;
    for v in &mut topology.vehicles {
        let speed = v.speed();
        if speed == 0.0 {
            continue;
        }
        match scenario {
            Scenario::UMi => step_waypoint(v, dt, side, rng),
            Scenario::RMa => {
                v.pos.x = (v.pos.x + v.vel.x * dt).rem_euclid(side);
                v.pos.y = (v.pos.y + v.vel.y * dt).rem_euclid(side);
            }
        }
        v.odometer += speed * dt;
    }
}

fn step_waypoint<R: Rng + ?Sized>(v: &mut Vehicle, dt: f64, side: f64, rng: &mut R) {
    let speed = v.speed();
    let mut remaining = speed * dt;
    // A step can pass through several waypoints when they are close.
    for _ in 0..8 {
        if let Some(wp) = v.waypoint {
            let d = v.pos.distance(wp);
            if d <= remaining {
                v.pos = wp;
                remaining -= d;
                let next = uniform_point(side, rng);
                v.vel = toward(v.pos, next, speed);
                v.waypoint = Some(next);
                continue;
            }
        }
        break;
    }
    let mut x = v.pos.x + v.vel.x / speed * remaining;
    let mut y = v.pos.y + v.vel.y / speed * remaining;
    let mut reflected = false;
    if x < 0.0 || x > side {
        x = reflect(x, side);
        v.vel.x = -v.vel.x;
        reflected = true;
    }
    if y < 0.0 || y > side {
        y = reflect(y, side);
        v.vel.y = -v.vel.y;
        reflected = true;
    }
    v.pos = Point::new(x, y);
    if reflected {
        // The old target lies behind the reflected heading; pick a new one
        // on the reflected ray.
        let reach = ray_to_border(v.pos, v.vel, side);
        let f: f64 = rng.random();
        v.waypoint = Some(Point::new(
            v.pos.x + v.vel.x / speed * reach * f,
            v.pos.y + v.vel.y / speed * reach * f,
        ));
    }
}

/// Distance from `p` along `vel` to the square's border.
fn ray_to_border(p: Point, vel: Point, side: f64) -> f64 {
    let speed = vel.x.hypot(vel.y);
    let along = |c: f64, vc: f64| {
        let u = vc / speed;
        if u > 0.0 {
            (side - c) / u
        } else if u < 0.0 {
            -c / u
        } else {
            f64::INFINITY
        }
    };
    along(p.x, vel.x).min(along(p.y, vel.y)).max(0.0)
}

fn reflect(c: f64, side: f64) -> f64 {
    let period = 2.0 * side;
    let m = c.rem_euclid(period);
    if m > side {
        period - m
    } else {
        m
    }
}

/// Points every vehicle at the eNB with the largest average received power.
///
/// `avg_rx_dbm` is row-major, one row of `topology.enbs.len()` entries per
/// vehicle. Ties go to the lowest eNB index.
pub fn reassociate(topology: &mut Topology, avg_rx_dbm: &[f64]) {
    let n_enb = topology.enbs.len();
    debug_assert_eq!(avg_rx_dbm.len(), n_enb * topology.vehicles.len());
    for (v, row) in topology.vehicles.iter_mut().zip(avg_rx_dbm.chunks_exact(n_enb)) {
        let mut best = 0;
        for (i, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = i;
            }
        }
        v.serving = best;
    }
}
