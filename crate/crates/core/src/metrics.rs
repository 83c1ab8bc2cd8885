//! Throughput, latency and fairness metrics, and their aggregation across a
//! campaign.

use std::io::BufRead;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::engine::RunResult;
use crate::stack::PacketState;
use crate::trace::PACKET_HEADER;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("measurement window is empty")]
    EmptyWindow,
    #[error("no throughput samples")]
    EmptySample,
    #[error("no delivered packets")]
    NoDeliveredPackets,
    #[error("all throughputs are zero")]
    AllZero,
    #[error("negative or non-finite throughput {0}")]
    InvalidThroughput(f64),
    #[error("percentile fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("packet trace line {line}: {reason}")]
    Trace { line: usize, reason: String },
}

/// Per-vehicle throughput of one run, bit/s.
pub fn vehicle_throughputs(result: &RunResult) -> Result<Vec<f64>, MetricsError> {
    if !(result.window_s > 0.0) {
        return Err(MetricsError::EmptyWindow);
    }
    Ok(result
        .vehicles
        .iter()
        .map(|v| v.delivered_bytes as f64 * 8.0 / result.window_s)
        .collect())
}

/// Mean per-vehicle throughput of one run, bit/s.
pub fn avg_throughput(result: &RunResult) -> Result<f64, MetricsError> {
    let s = vehicle_throughputs(result)?;
    if s.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    Ok(mean(&s))
}

/// Mean of the lowest `ceil(q n)` values.
pub fn lower_tail_mean(values: &[f64], q: f64) -> Result<f64, MetricsError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(MetricsError::InvalidFraction(q));
    }
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Ok(mean(&v[..k]))
}

/// Lower-tail throughput with vehicles pooled across every run, bit/s.
pub fn percentile_throughput(results: &[RunResult], q: f64) -> Result<f64, MetricsError> {
    let mut pooled = Vec::new();
    for r in results {
        pooled.extend(vehicle_throughputs(r)?);
    }
    lower_tail_mean(&pooled, q)
}

/// Mean latency of the packets delivered in the window, s.
pub fn avg_latency(result: &RunResult) -> Result<f64, MetricsError> {
    let (sum, n) = result
        .vehicles
        .iter()
        .fold((0.0, 0u64), |(s, n), v| (s + v.latency_sum_s, n + v.latency_samples));
    if n == 0 {
        return Err(MetricsError::NoDeliveredPackets);
    }
    Ok(sum / n as f64)
}

/// `(sum S)^2 / (n sum S^2)`.
pub fn jain_index(throughputs: &[f64]) -> Result<f64, MetricsError> {
    if throughputs.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if let Some(&bad) = throughputs.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(MetricsError::InvalidThroughput(bad));
    }
    let sum: f64 = throughputs.iter().sum();
    let sq: f64 = throughputs.iter().map(|s| s * s).sum();
    if sq == 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok((sum * sum / (throughputs.len() as f64 * sq)).min(1.0))
}

/// Throughputs grouped by home cell. Cells that host no vehicle are absent.
pub fn cell_throughputs(result: &RunResult) -> Result<Vec<(usize, Vec<f64>)>, MetricsError> {
    let s = vehicle_throughputs(result)?;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); result.n_enbs];
    for (v, tp) in result.vehicles.iter().zip(s) {
        cells[v.home_cell].push(tp);
    }
    Ok(cells.into_iter().enumerate().filter(|(_, c)| !c.is_empty()).collect())
}

/// Fairness of one run: Jain's index inside each cell, averaged over the
/// cells where something was delivered.
pub fn cell_jain(result: &RunResult) -> Result<f64, MetricsError> {
    let mut values = Vec::new();
    for (_, c) in cell_throughputs(result)? {
        match jain_index(&c) {
            Ok(j) => values.push(j),
            Err(MetricsError::AllZero) => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(MetricsError::AllZero);
    }
    Ok(mean(&values))
}

/// Aggregate cell throughput of one run, bit/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellTotals {
    /// Cell with the median number of home vehicles (lower median, ties to
    /// the lowest index).
    pub median_cell: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn cell_totals(result: &RunResult) -> Result<CellTotals, MetricsError> {
    let mut cells: Vec<(usize, usize, f64)> = cell_throughputs(result)?
        .into_iter()
        .map(|(id, c)| (c.len(), id, c.iter().sum()))
        .collect();
    if cells.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let min = cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let max = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    cells.sort_by_key(|c| (c.0, c.1));
    let (_, median_cell, median) = cells[(cells.len() - 1) / 2];
    Ok(CellTotals {
        median_cell,
        median,
        min,
        max,
    })
}

/// Total throughput of the median-load cell, bit/s.
pub fn total_throughput(result: &RunResult) -> Result<f64, MetricsError> {
    cell_totals(result).map(|c| c.median)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Half-width of the 95% Student-t interval of the mean. Zero below two
/// samples.
pub fn ci95(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

/// How lower-tail throughput is aggregated across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileMode {
    /// One population of vehicles over all runs.
    #[default]
    Pooled,
    /// Percentile of each run, then averaged.
    PerRun,
}

/// One metric over a campaign.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    /// Value of each run that produced one.
    pub per_run: Vec<f64>,
    /// Campaign value; NaN when no run produced a sample.
    pub mean: f64,
    pub ci95: f64,
}

impl MetricSummary {
    fn from_runs(per_run: Vec<f64>) -> Self {
        let mean = if per_run.is_empty() { f64::NAN } else { mean(&per_run) };
        let ci = if per_run.is_empty() { f64::NAN } else { ci95(&per_run) };
        MetricSummary {
            per_run,
            mean,
            ci95: ci,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub avg_throughput: MetricSummary,
    pub total_throughput: MetricSummary,
    pub p5_throughput: MetricSummary,
    pub p10_throughput: MetricSummary,
    pub avg_latency: MetricSummary,
    pub jain: MetricSummary,
    /// `(run index, seed)` of every aggregated run.
    pub runs: Vec<(u32, u64)>,
}

/// Metric names in CSV order.
pub const METRIC_NAMES: [&str; 6] = [
    "avg_throughput",
    "total_throughput",
    "p5_throughput",
    "p10_throughput",
    "avg_latency",
    "jain",
];

impl MetricsReport {
    /// Aggregates a campaign. Runs without a sample for some metric (no
    /// deliveries, say) are left out of that metric only.
    pub fn from_runs(results: &[RunResult], mode: PercentileMode) -> Result<Self, MetricsError> {
        if results.is_empty() {
            return Err(MetricsError::EmptySample);
        }
        let mut avg = Vec::new();
        let mut total = Vec::new();
        let mut p5 = Vec::new();
        let mut p10 = Vec::new();
        let mut lat = Vec::new();
        let mut jain = Vec::new();
        let skip_empty = |r: Result<f64, MetricsError>, into: &mut Vec<f64>| -> Result<(), MetricsError> {
            match r {
                Ok(v) => into.push(v),
                Err(MetricsError::EmptyWindow | MetricsError::EmptySample) => {}
                Err(MetricsError::NoDeliveredPackets | MetricsError::AllZero) => {}
                Err(e) => return Err(e),
            }
            Ok(())
        };
        for r in results {
            skip_empty(avg_throughput(r), &mut avg)?;
            skip_empty(total_throughput(r), &mut total)?;
            if let Ok(s) = vehicle_throughputs(r) {
                skip_empty(lower_tail_mean(&s, 0.05), &mut p5)?;
                skip_empty(lower_tail_mean(&s, 0.10), &mut p10)?;
            }
            skip_empty(avg_latency(r), &mut lat)?;
            skip_empty(cell_jain(r), &mut jain)?;
        }
        let mut p5 = MetricSummary::from_runs(p5);
        let mut p10 = MetricSummary::from_runs(p10);
        if mode == PercentileMode::Pooled {
            let windowed: Vec<RunResult> = results.iter().filter(|r| r.window_s > 0.0).cloned().collect();
            if !windowed.is_empty() {
                p5.mean = percentile_throughput(&windowed, 0.05)?;
                p10.mean = percentile_throughput(&windowed, 0.10)?;
            }
        }
        Ok(MetricsReport {
            avg_throughput: MetricSummary::from_runs(avg),
            total_throughput: MetricSummary::from_runs(total),
            p5_throughput: p5,
            p10_throughput: p10,
            avg_latency: MetricSummary::from_runs(lat),
            jain: MetricSummary::from_runs(jain),
            runs: results.iter().map(|r| (r.run_index, r.seed)).collect(),
        })
    }

    /// Summaries in [`METRIC_NAMES`] order.
    pub fn rows(&self) -> [(&'static str, &MetricSummary); 6] {
        [
            (METRIC_NAMES[0], &self.avg_throughput),
            (METRIC_NAMES[1], &self.total_throughput),
            (METRIC_NAMES[2], &self.p5_throughput),
            (METRIC_NAMES[3], &self.p10_throughput),
            (METRIC_NAMES[4], &self.avg_latency),
            (METRIC_NAMES[5], &self.jain),
        ]
    }
}

/// One row of a packet trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub vehicle: usize,
    pub id: u64,
    pub created_at: f64,
    pub delivered_at: Option<f64>,
    pub attempts: u8,
    pub state: String,
}

/// Parses a packet trace written by the simulator.
pub fn read_packet_trace<R: BufRead>(reader: R) -> Result<Vec<TraceRow>, MetricsError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let err = |reason: String| MetricsError::Trace { line: line_no, reason };
        let line = line.map_err(|e| err(e.to_string()))?;
        if i == 0 {
            if line.trim() != PACKET_HEADER {
                return Err(err(format!("expected header `{PACKET_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let bad = |name: &str| err(format!("invalid {name}"));
        rows.push(TraceRow {
            vehicle: f[0].parse().map_err(|_| bad("vehicle"))?,
            id: f[1].parse().map_err(|_| bad("id"))?,
            created_at: f[2].parse().map_err(|_| bad("created_at"))?,
            delivered_at: if f[3].is_empty() {
                None
            } else {
                Some(f[3].parse().map_err(|_| bad("delivered_at"))?)
            },
            attempts: f[4].parse().map_err(|_| bad("attempts"))?,
            state: f[5].to_string(),
        });
    }
    Ok(rows)
}

/// Mean latency of the packets created and delivered inside
/// `[warmup_s, end_s)`, the same sample the engine aggregates.
pub fn trace_latency(rows: &[TraceRow], warmup_s: f64, end_s: f64) -> Result<f64, MetricsError> {
    let lat: Vec<f64> = rows
        .iter()
        .filter(|r| r.state == PacketState::Delivered.as_str() && r.created_at >= warmup_s)
        .filter_map(|r| r.delivered_at.filter(|&d| d < end_s).map(|d| d - r.created_at))
        .collect();
    if lat.is_empty() {
        return Err(MetricsError::NoDeliveredPackets);
    }
    Ok(mean(&lat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{PacketCounters, VehicleOutcome};
    use std::time::Duration;

    fn vehicle(cell: usize, bytes: u64) -> VehicleOutcome {
        VehicleOutcome {
            home_cell: cell,
            delivered_bytes: bytes,
            latency_samples: 0,
            latency_sum_s: 0.0,
            generated: 0,
            delivered: 0,
            dropped: 0,
            queued: 0,
            in_flight: 0,
        }
    }

    fn run(window: f64, vehicles: Vec<VehicleOutcome>, n_enbs: usize) -> RunResult {
        RunResult {
            run_index: 0,
            seed: 0,
            window_s: window,
            n_enbs,
            vehicles,
            counters: PacketCounters::default(),
            wall_clock: Duration::ZERO,
        }
    }

    #[test]
    fn throughput_definitions() {
        assert_eq!(avg_throughput(&run(10.0, vec![vehicle(0, 1_250_000)], 1)).unwrap(), 1e6);
        assert_eq!(avg_throughput(&run(10.0, vec![vehicle(0, 0)], 1)).unwrap(), 0.0);
        let two = run(1.0, vec![vehicle(0, 500_000), vehicle(0, 750_000)], 1);
        assert_eq!(avg_throughput(&two).unwrap(), 5e6);
        assert_eq!(avg_throughput(&run(0.0, vec![vehicle(0, 1)], 1)), Err(MetricsError::EmptyWindow));
    }

    #[test]
    fn lower_tail() {
        let v: Vec<f64> = (1..=100).map(|x| x as f64 * 1e6).collect();
        assert!((lower_tail_mean(&v, 0.10).unwrap() - 5.5e6).abs() < 1e-6);
        let twenty: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(lower_tail_mean(&twenty, 0.05).unwrap(), 1.0);
        assert_eq!(lower_tail_mean(&[3.0; 7], 0.05).unwrap(), 3.0);
        assert_eq!(lower_tail_mean(&[], 0.05), Err(MetricsError::EmptySample));
        assert!(lower_tail_mean(&v, 0.0).is_err());
    }

    #[test]
    fn jain_examples() {
        assert!((jain_index(&[1.0, 2.0, 3.0]).unwrap() - 36.0 / 42.0).abs() < 1e-12);
        assert_eq!(jain_index(&[4.0; 5]).unwrap(), 1.0);
        let mut one = vec![0.0; 10];
        one[3] = 7.0;
        assert!((jain_index(&one).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(jain_index(&[0.0, 0.0]), Err(MetricsError::AllZero));
        assert_eq!(jain_index(&[]), Err(MetricsError::EmptySample));
    }

    #[test]
    fn latency_only_counts_delivered() {
        let mut v = vehicle(0, 0);
        v.latency_samples = 2;
        v.latency_sum_s = 0.040;
        v.dropped = 5;
        assert!((avg_latency(&run(1.0, vec![v], 1)).unwrap() - 0.020).abs() < 1e-12);
        assert_eq!(avg_latency(&run(1.0, vec![vehicle(0, 0)], 1)), Err(MetricsError::NoDeliveredPackets));
    }

    #[test]
    fn totals_use_median_load_cell() {
        // Cell 0 hosts 1 vehicle, cell 1 hosts 2, cell 2 hosts 3.
        let vs = vec![
            vehicle(0, 10),
            vehicle(1, 20),
            vehicle(1, 30),
            vehicle(2, 1),
            vehicle(2, 1),
            vehicle(2, 1),
        ];
        let t = cell_totals(&run(8.0, vs, 4)).unwrap();
        assert_eq!(t.median_cell, 1);
        assert_eq!(t.median, 50.0);
        assert_eq!(t.min, 3.0);
        assert_eq!(t.max, 50.0);
    }

    #[test]
    fn ci_matches_t_table() {
        assert_eq!(ci95(&[5.0]), 0.0);
        // t(0.975, 4) = 2.776; sample sd of 1..5 is sqrt(2.5).
        let ci = ci95(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((ci - 2.776445 * (2.5f64 / 5.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn trace_round_trip() {
        let text = format!("{PACKET_HEADER}\n0,1,1.000000000,1.020000000,1,Delivered\n0,2,1.5,,4,Dropped\n1,3,0.5,0.6,1,Delivered\n");
        let rows = read_packet_trace(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((trace_latency(&rows, 1.0, 10.0).unwrap() - 0.020).abs() < 1e-9);
        assert!(read_packet_trace("bogus\n".as_bytes()).is_err());
    }
}
