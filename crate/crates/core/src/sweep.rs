//! Parameter sweeps over density, application rate and deployment, and the
//! CSV result table.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigErrors, ConfigLoadError, Scenario, ScenarioConfig, Tech};
use crate::engine::{self, EngineError, RunResult};
use crate::metrics::{MetricsError, MetricsReport, PercentileMode};
use crate::trace::{CsvTrace, TraceKind};

/// First line of every result file. Bump the version when columns change.
pub const CSV_VERSION_LINE: &str = "# v2i-sim results v1";
pub const CSV_COLUMNS: &str = "scenario,tech,lambda_enb,app_rate,metric,mean,ci95";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub scenario: Scenario,
    pub tech: Tech,
}

/// A Cartesian grid of campaigns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// eNB densities, 1/km^2.
    pub lambda_enb: Vec<f64>,
    /// Application rates, bit/s.
    pub app_rates: Vec<f64>,
    pub deployments: Vec<Deployment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_runs: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Config fields applied to every job before the grid values.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub base: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("sweep file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("job {job}: {source}")]
    Load { job: String, source: ConfigLoadError },
    #[error("job {job}: {source}")]
    Invalid { job: String, source: ConfigErrors },
    #[error("job {job}: {source}")]
    Engine { job: String, source: EngineError },
    #[error("job {job}: {source}")]
    Metrics { job: String, source: MetricsError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl SweepError {
    /// The sweep was rejected before any simulation started.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            SweepError::EmptyAxis(_) | SweepError::Parse(_) | SweepError::Load { .. } | SweepError::Invalid { .. }
        )
    }
}

/// One grid point, fully configured.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub config: ScenarioConfig,
}

impl Job {
    /// Human-readable label, also used in trace file names.
    pub fn label(&self) -> String {
        let c = &self.config;
        format!("{}-{}-lambda{}-rate{}", c.scenario, c.tech, c.lambda_enb_per_km2, c.app_rate_bps)
    }
}

impl SweepSpec {
    pub fn from_json_str(text: &str) -> Result<Self, SweepError> {
        Ok(serde_json::from_str(text)?)
    }

    /// A one-point sweep around `config`.
    pub fn single(config: &ScenarioConfig) -> Self {
        let mut base = match serde_json::to_value(config).expect("config serializes") {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for k in ["scenario", "tech", "lambda_enb_per_km2", "app_rate_bps"] {
            base.remove(k);
        }
        SweepSpec {
            lambda_enb: vec![config.lambda_enb_per_km2],
            app_rates: vec![config.app_rate_bps],
            deployments: vec![Deployment {
                scenario: config.scenario,
                tech: config.tech,
            }],
            out: None,
            n_runs: None,
            seed: None,
            base,
        }
    }

    /// Expands and validates the grid, deployments outermost, rates
    /// innermost.
    pub fn jobs(&self) -> Result<Vec<Job>, SweepError> {
        if self.lambda_enb.is_empty() {
            return Err(SweepError::EmptyAxis("lambda_enb"));
        }
        if self.app_rates.is_empty() {
            return Err(SweepError::EmptyAxis("app_rates"));
        }
        if self.deployments.is_empty() {
            return Err(SweepError::EmptyAxis("deployments"));
        }
        let mut jobs = Vec::new();
        for d in &self.deployments {
            for &lambda in &self.lambda_enb {
                for &rate in &self.app_rates {
                    let mut fields = self.base.clone();
                    fields.insert("scenario".into(), serde_json::to_value(d.scenario)?);
                    fields.insert("tech".into(), serde_json::to_value(d.tech)?);
                    fields.insert("lambda_enb_per_km2".into(), lambda.into());
                    fields.insert("app_rate_bps".into(), rate.into());
                    if let Some(n) = self.n_runs {
                        fields.insert("n_runs".into(), n.into());
                    }
                    if let Some(s) = self.seed {
                        fields.insert("master_seed".into(), s.into());
                    }
                    let job = format!("{}-{}-lambda{}-rate{}", d.scenario, d.tech, lambda, rate);
                    let config = ScenarioConfig::from_json_value(serde_json::Value::Object(fields))
                        .map_err(|source| SweepError::Load { job: job.clone(), source })?
                        .validate()
                        .map_err(|source| SweepError::Invalid { job, source })?;
                    jobs.push(Job { config });
                }
            }
        }
        Ok(jobs)
    }
}

/// Execution knobs that do not change results.
#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads for the runs of a campaign; 0 or 1 runs serially.
    pub parallel: usize,
    pub percentile_mode: PercentileMode,
    pub trace: TraceKind,
    /// Directory receiving one trace file per run.
    pub trace_dir: Option<PathBuf>,
}

/// Campaign results of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub tech: Tech,
    pub lambda_enb: f64,
    pub app_rate: f64,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{CSV_VERSION_LINE}")?;
        writeln!(w, "{CSV_COLUMNS}")?;
        for r in &self.rows {
            for (name, m) in r.report.rows() {
                writeln!(
                    w,
                    "{},{},{},{},{},{:.6},{:.6}",
                    r.scenario, r.tech, r.lambda_enb, r.app_rate, name, m.mean, m.ci95
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Writes the table to `path`, removing the file if writing fails.
    pub fn write_csv_file(&self, path: &Path) -> Result<(), SweepError> {
        let io_err = |source| SweepError::Io {
            path: path.to_path_buf(),
            source,
        };
        let result = File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            self.write_csv(&mut w)?;
            w.flush()
        });
        if let Err(e) = result {
            let _ = fs::remove_file(path);
            return Err(io_err(e));
        }
        Ok(())
    }
}

/// Progress notification, sent after each finished campaign.
#[derive(Clone, Debug)]
pub struct Progress<'a> {
    pub done: usize,
    pub total: usize,
    pub job: &'a Job,
}

/// Runs every campaign of `spec`.
pub fn run_sweep(spec: &SweepSpec, options: &SweepOptions) -> Result<ResultTable, SweepError> {
    run_sweep_with_progress(spec, options, |_| {})
}

pub fn run_sweep_with_progress(
    spec: &SweepSpec,
    options: &SweepOptions,
    mut progress: impl FnMut(Progress<'_>),
) -> Result<ResultTable, SweepError> {
    let jobs = spec.jobs()?;
    let created_dir = match (&options.trace_dir, options.trace) {
        (Some(dir), kind) if kind != TraceKind::None => {
            let existed = dir.exists();
            fs::create_dir_all(dir).map_err(|source| SweepError::Io {
                path: dir.clone(),
                source,
            })?;
            (!existed).then(|| dir.clone())
        }
        _ => None,
    };
    let mut table = ResultTable::default();
    for (i, job) in jobs.iter().enumerate() {
        match run_job(job, options) {
            Ok(row) => table.rows.push(row),
            Err(e) => {
                if let Some(dir) = &created_dir {
                    let _ = fs::remove_dir_all(dir);
                }
                return Err(e);
            }
        }
        progress(Progress {
            done: i + 1,
            total: jobs.len(),
            job,
        });
    }
    Ok(table)
}

/// Runs one campaign and aggregates it.
pub fn run_job(job: &Job, options: &SweepOptions) -> Result<ResultRow, SweepError> {
    let label = job.label();
    let results = run_campaign_traced(job, options)?;
    let report = MetricsReport::from_runs(&results, options.percentile_mode).map_err(|source| SweepError::Metrics {
        job: label,
        source,
    })?;
    let c = &job.config;
    Ok(ResultRow {
        scenario: c.scenario,
        tech: c.tech,
        lambda_enb: c.lambda_enb_per_km2,
        app_rate: c.app_rate_bps,
        report,
    })
}

fn run_one(job: &Job, run: u32, options: &SweepOptions) -> Result<RunResult, SweepError> {
    let engine_err = |source| SweepError::Engine { job: job.label(), source };
    let dir = match (&options.trace_dir, options.trace) {
        (Some(dir), kind) if kind != TraceKind::None => dir,
        _ => return engine::run_once(&job.config, run).map_err(engine_err),
    };
    let path = dir.join(format!("{}-run{}.{}.csv", job.label(), run, options.trace.as_str()));
    let io_err = |source| SweepError::Io {
        path: path.clone(),
        source,
    };
    let file = File::create(&path).map_err(io_err)?;
    let mut sink = CsvTrace::single(options.trace, BufWriter::new(file)).map_err(io_err)?;
    let result = engine::run_once_traced(&job.config, run, &mut sink).map_err(engine_err)?;
    sink.finish().map_err(io_err)?;
    Ok(result)
}

fn run_campaign_traced(job: &Job, options: &SweepOptions) -> Result<Vec<RunResult>, SweepError> {
    let n = job.config.n_runs;
    #[cfg(feature = "parallel")]
    if options.parallel > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallel)
            .build()
            .map_err(|e| SweepError::Engine {
                job: job.label(),
                source: EngineError::Pool(e.to_string()),
            })?;
        return pool.install(|| (0..n).into_par_iter().map(|i| run_one(job, i, options)).collect());
    }
    (0..n).map(|i| run_one(job, i, options)).collect()
}
