//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes plain arguments and returns a JSON string. Errors come
//! back as `{"error": "..."}` so the page needs no exception plumbing and
//! the same functions can be tested natively.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use v2i_core::channel::{friis, los_probability, path_loss};
use v2i_core::engine::run_once_traced;
use v2i_core::geometry::Topology;
use v2i_core::metrics::{avg_latency, cell_jain, lower_tail_mean, vehicle_throughputs};
use v2i_core::radio::{compute_sinr, max_gain, RxComponents};
use v2i_core::trace::TraceSink;
use v2i_core::{Scenario, ScenarioConfig, Tech};

/// Largest deployment the page may simulate in one call.
pub const MAX_VEHICLES: usize = 400;

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| format!("unknown {what} `{s}`"))
}

fn distances(d_max: f64, points: u32) -> Result<Vec<f64>, String> {
    if !(d_max.is_finite() && d_max > 10.0) {
        return Err(format!("maximum distance must exceed 10 m, got {d_max}"));
    }
    if !(2..=2000).contains(&points) {
        return Err(format!("point count must be in 2..=2000, got {points}"));
    }
    let step = (d_max - 10.0) / f64::from(points - 1);
    Ok((0..points).map(|i| 10.0 + step * f64::from(i)).collect())
}

#[derive(Serialize)]
struct Curves {
    distance_m: Vec<f64>,
    p_los: Vec<f64>,
    pl_los_db: Vec<f64>,
    pl_nlos_db: Vec<f64>,
    friis_db: Vec<f64>,
}

fn curves(scenario: &str, tech: &str, d_max: f64, points: u32) -> Result<Curves, String> {
    let scenario: Scenario = parse("scenario", scenario)?;
    let tech: Tech = parse("tech", tech)?;
    let fc = ScenarioConfig::defaults(scenario, tech).carrier_hz;
    let d = distances(d_max, points)?;
    let pl = |los: bool| -> Result<Vec<f64>, String> {
        d.iter()
            .map(|&x| path_loss(scenario, tech, los, x, fc).map_err(|e| e.to_string()))
            .collect()
    };
    Ok(Curves {
        p_los: d
            .iter()
            .map(|&x| los_probability(scenario, tech, x).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?,
        pl_los_db: pl(true)?,
        pl_nlos_db: pl(false)?,
        friis_db: d.iter().map(|&x| friis(x, fc)).collect(),
        distance_m: d,
    })
}

/// Path loss (LOS, NLOS, free space) and LOS probability against distance.
#[wasm_bindgen]
pub fn channel_curves(scenario: &str, tech: &str, d_max: f64, points: u32) -> String {
    respond(curves(scenario, tech, d_max, points))
}

#[derive(Serialize)]
struct Budget {
    distance_m: Vec<f64>,
    noise_dbm: f64,
    snr_los_db: Vec<f64>,
    snr_nlos_db: Vec<f64>,
    capacity_los_bps: Vec<f64>,
    capacity_nlos_bps: Vec<f64>,
}

fn budget(scenario: &str, tech: &str, d_max: f64, points: u32) -> Result<Budget, String> {
    let scenario: Scenario = parse("scenario", scenario)?;
    let tech: Tech = parse("tech", tech)?;
    let cfg = ScenarioConfig::defaults(scenario, tech);
    let d = distances(d_max, points)?;
    let mut out = Budget {
        distance_m: d.clone(),
        noise_dbm: 0.0,
        snr_los_db: Vec::new(),
        snr_nlos_db: Vec::new(),
        capacity_los_bps: Vec::new(),
        capacity_nlos_bps: Vec::new(),
    };
    for &x in &d {
        for los in [true, false] {
            let link = RxComponents {
                path_loss: path_loss(scenario, tech, los, x, cfg.carrier_hz).map_err(|e| e.to_string())?,
                shadowing: 0.0,
                fading_power: 1.0,
                tx_gain: max_gain(cfg.enb_array),
                rx_gain: max_gain(cfg.vehicle_array),
            };
            let b = compute_sinr(&link, &[], &cfg);
            out.noise_dbm = b.noise;
            let (snr, cap) = if los {
                (&mut out.snr_los_db, &mut out.capacity_los_bps)
            } else {
                (&mut out.snr_nlos_db, &mut out.capacity_nlos_bps)
            };
            snr.push(b.sinr);
            cap.push(b.capacity);
        }
    }
    Ok(out)
}

/// Noise-limited SNR and capacity of an aligned link, no fading or
/// shadowing, against distance.
#[wasm_bindgen]
pub fn link_budget(scenario: &str, tech: &str, d_max: f64, points: u32) -> String {
    respond(budget(scenario, tech, d_max, points))
}

#[derive(Default)]
struct Snapshot(Option<Topology>);

impl TraceSink for Snapshot {
    fn topology(&mut self, topology: &Topology) {
        self.0 = Some(topology.clone());
    }
}

#[derive(Serialize)]
struct VehicleView {
    x: f64,
    y: f64,
    home_cell: usize,
    throughput_bps: f64,
}

#[derive(Serialize)]
struct RunView {
    area_side_m: f64,
    enbs: Vec<[f64; 2]>,
    buildings: Vec<[f64; 4]>,
    vehicles: Vec<VehicleView>,
    avg_throughput_bps: f64,
    p5_throughput_bps: f64,
    avg_latency_s: Option<f64>,
    jain: Option<f64>,
    generated: u64,
    delivered: u64,
    dropped: u64,
}

fn simulate(config_json: &str, run: u32) -> Result<RunView, String> {
    let cfg = ScenarioConfig::from_json_str(config_json)
        .map_err(|e| e.to_string())?
        .validate()
        .map_err(|e| e.to_string())?;
    let expected = cfg.lambda_enb_per_km2 * (cfg.area_side_m / 1000.0).powi(2) * f64::from(cfg.vehicles_per_enb);
    if expected > MAX_VEHICLES as f64 {
        return Err(format!("about {expected:.0} vehicles expected; the demo caps runs at {MAX_VEHICLES}"));
    }
    let mut snap = Snapshot::default();
    let r = run_once_traced(&cfg, run, &mut snap).map_err(|e| e.to_string())?;
    let topo = snap.0.ok_or("engine reported no topology")?;
    let thr = vehicle_throughputs(&r).map_err(|e| e.to_string())?;
    let mean = thr.iter().sum::<f64>() / thr.len() as f64;
    Ok(RunView {
        area_side_m: topo.area_side,
        enbs: topo.enbs.iter().map(|p| [p.x, p.y]).collect(),
        buildings: topo.buildings.iter().map(|b| [b.min.x, b.min.y, b.max.x, b.max.y]).collect(),
        vehicles: topo
            .vehicles
            .iter()
            .zip(&r.vehicles)
            .zip(&thr)
            .map(|((v, o), &t)| VehicleView {
                x: v.pos.x,
                y: v.pos.y,
                home_cell: o.home_cell,
                throughput_bps: t,
            })
            .collect(),
        avg_throughput_bps: mean,
        p5_throughput_bps: lower_tail_mean(&thr, 0.05).map_err(|e| e.to_string())?,
        avg_latency_s: avg_latency(&r).ok(),
        jain: cell_jain(&r).ok(),
        generated: r.counters.generated,
        delivered: r.counters.delivered,
        dropped: r.counters.dropped,
    })
}

/// Runs one simulation of `config_json` (missing fields take the scenario
/// defaults) and returns the initial layout with per-vehicle results.
#[wasm_bindgen]
pub fn simulate_run(config_json: &str, run: u32) -> String {
    respond(simulate(config_json, run))
}
