//! Experiment configuration, the simulate → bands → predict → compare
//! pipeline, and report export.
//!
//! Configs are TOML; see `docs/config.md` for the schema. Reports are written
//! as CSV (one row per station and grid point) and as JSON carrying the full
//! metadata. Both are pure functions of the config and seed list.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frontier::{FrontierError, WeightKind, WeightedModel};
use crate::simulator::{BehindAverages, Condition, ProfileSnapshot, SimError, SimOptions, Simulation};
use crate::topology::{NetworkSpec, Station, Topology, TopologyError};

pub const CSV_HEADER: &str = "station,y,emp_min,emp_mean,emp_max,theory";
pub const PARTIAL_MARKER: &str = "# partial=true";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("no snapshots to summarize")]
    NoSnapshots,
    #[error("horizon exhausted before any snapshot was taken")]
    HorizonExhausted,
    #[error("grid mismatch: expected {expected} points, got {got}")]
    GridMismatch { expected: usize, got: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Evaluation points, either listed or evenly spaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values { values: Vec<f64> },
    Linspace { start: f64, stop: f64, points: usize },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::Values { values } => values.clone(),
            Self::Linspace { start, stop, points } => match points {
                0 => Vec::new(),
                1 => vec![*start],
                n => {
                    let step = (stop - start) / (*n - 1) as f64;
                    (0..*n)
                        .map(|i| if i + 1 == *n { *stop } else { start + step * i as f64 })
                        .collect()
                }
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub condition: Condition,
    pub local_time_threshold: f64,
    /// Snapshots collected per seed.
    pub snapshots: usize,
    pub seeds: Vec<u64>,
    pub horizon_cap: f64,
    /// Simulated time discarded before sampling starts.
    #[serde(default)]
    pub warmup: f64,
    #[serde(default)]
    pub preemptive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_cap: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionBlock {
    #[serde(default)]
    pub weights: WeightKind,
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl Default for PredictionBlock {
    fn default() -> Self {
        Self {
            weights: WeightKind::Count,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSpec,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub prediction: PredictionBlock,
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every invariant and returns the built topology.
    pub fn validate(&self) -> Result<Topology, HarnessError> {
        let topo = Topology::build(self.network.clone())?;
        let e = &self.experiment;
        if e.snapshots == 0 {
            return Err(HarnessError::Validation("snapshot count must be at least 1".into()));
        }
        if e.seeds.is_empty() {
            return Err(HarnessError::Validation("seed list must not be empty".into()));
        }
        if !(e.local_time_threshold > 0.0 && e.local_time_threshold.is_finite()) {
            return Err(HarnessError::Validation(
                "local_time_threshold must be positive and finite".into(),
            ));
        }
        if !(e.horizon_cap > 0.0 && e.horizon_cap.is_finite()) {
            return Err(HarnessError::Validation("horizon_cap must be positive and finite".into()));
        }
        if !(e.warmup >= 0.0 && e.warmup < e.horizon_cap) {
            return Err(HarnessError::Validation(
                "warmup must be nonnegative and below horizon_cap".into(),
            ));
        }
        match &e.condition {
            Condition::ExactClassCounts(t) if t.len() != topo.num_stations()
                || t.iter().any(|r| r.len() != topo.num_classes()) =>
            {
                return Err(HarnessError::Validation(format!(
                    "condition needs {} rows of {} class counts",
                    topo.num_stations(),
                    topo.num_classes()
                )))
            }
            Condition::TotalCounts(t) if t.len() != topo.num_stations() => {
                return Err(HarnessError::Validation(format!(
                    "condition needs {} station targets",
                    topo.num_stations()
                )))
            }
            Condition::TotalBand(b) if b.len() != topo.num_stations() || b.iter().any(|(lo, hi)| lo > hi) => {
                return Err(HarnessError::Validation(format!(
                    "condition needs {} bands with lo <= hi",
                    topo.num_stations()
                )))
            }
            _ => {}
        }
        let grid = self.grid.points();
        if grid.len() < 2 {
            return Err(HarnessError::Validation("grid needs at least 2 points".into()));
        }
        if grid.iter().any(|y| !y.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Validation("grid must be strictly increasing".into()));
        }
        Ok(topo)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ExperimentConfig::from_toml_str(&text, &path.display().to_string())
}

#[derive(Deserialize)]
struct NetworkOnly {
    network: NetworkSpec,
}

/// Reads only the `[network]` table of a TOML file and builds its topology.
pub fn load_network(path: impl AsRef<Path>) -> Result<Topology, HarnessError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: NetworkOnly = toml::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(Topology::build(file.network)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

/// Pointwise min/mean/max over snapshots of the empirical lead-time CDF at
/// station `j`. An empty snapshot counts as a CDF identically 1.
pub fn empirical_bands(
    snapshots: &[ProfileSnapshot],
    j: Station,
    grid: &[f64],
) -> Result<Bands, HarnessError> {
    if snapshots.is_empty() {
        return Err(HarnessError::NoSnapshots);
    }
    let n = grid.len();
    let mut bands = Bands {
        min: vec![f64::INFINITY; n],
        mean: vec![0.0; n],
        max: vec![f64::NEG_INFINITY; n],
    };
    let mut leads = Vec::new();
    for snap in snapshots {
        leads.clear();
        leads.extend(snap.leads(j));
        leads.sort_by(f64::total_cmp);
        for (i, &y) in grid.iter().enumerate() {
            let f = if leads.is_empty() {
                1.0
            } else {
                leads.partition_point(|&l| l <= y) as f64 / leads.len() as f64
            };
            bands.min[i] = bands.min[i].min(f);
            bands.max[i] = bands.max[i].max(f);
            bands.mean[i] += f;
        }
    }
    let count = snapshots.len() as f64;
    for m in &mut bands.mean {
        *m /= count;
    }
    Ok(bands)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    pub sup_distance: f64,
    pub l1_distance: f64,
}

/// Sup distance and span-normalized trapezoidal L1 distance on `grid`.
pub fn compare_profiles(a: &[f64], b: &[f64], grid: &[f64]) -> Result<Distances, HarnessError> {
    for len in [a.len(), b.len()] {
        if len != grid.len() {
            return Err(HarnessError::GridMismatch {
                expected: grid.len(),
                got: len,
            });
        }
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let sup_distance = diff.iter().copied().fold(0.0, f64::max);
    let span = match (grid.first(), grid.last()) {
        (Some(lo), Some(hi)) if hi > lo => hi - lo,
        _ => {
            return Ok(Distances {
                sup_distance,
                l1_distance: 0.0,
            })
        }
    };
    let area: f64 = grid
        .windows(2)
        .zip(diff.windows(2))
        .map(|(g, d)| 0.5 * (d[0] + d[1]) * (g[1] - g[0]))
        .sum();
    Ok(Distances {
        sup_distance,
        l1_distance: area / span,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationProfile {
    pub station: Station,
    pub grid: Vec<f64>,
    pub emp_min: Vec<f64>,
    pub emp_mean: Vec<f64>,
    pub emp_max: Vec<f64>,
    pub theory: Vec<f64>,
    pub sup_distance: f64,
    pub l1_distance: f64,
    /// Seed-mean time averages over each whole run.
    pub behind: BehindAverages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub weights: WeightKind,
    pub normalized: bool,
    /// Right-hand side handed to the inverter, per station.
    pub inputs: Vec<f64>,
    pub frontiers: Vec<f64>,
    pub permutation: Vec<Station>,
    /// Denominators of the theory CDF: the predicted station totals.
    pub predicted_totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub snapshots: usize,
    pub complete: bool,
    /// Simulated clock at the end of the run.
    pub simulated_time: f64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub seeds: Vec<SeedSummary>,
    pub pooled_snapshots: usize,
    pub prediction: PredictionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    /// Set when some seed hit the horizon cap before its snapshot quota.
    pub partial: bool,
    pub metadata: ReportMetadata,
    pub stations: Vec<StationProfile>,
}

/// Frontier prediction for the conditioning totals of `cfg`.
pub fn predict(cfg: &ExperimentConfig, topo: &Topology) -> Result<(WeightedModel, PredictionSummary), HarnessError> {
    let kind = cfg.prediction.weights;
    let mut model = WeightedModel::new(topo.clone(), kind);
    if cfg.prediction.normalize {
        model = model.normalize()?;
    }
    let inputs = prediction_inputs(&cfg.experiment.condition, topo, kind);
    let sol = model.invert(&inputs)?;
    let predicted_totals = (1..=topo.num_stations())
        .map(|j| model.predicted_total(&sol.frontiers, j))
        .collect();
    let summary = PredictionSummary {
        weights: kind,
        normalized: cfg.prediction.normalize,
        inputs,
        frontiers: sol.frontiers,
        permutation: sol.permutation,
        predicted_totals,
    };
    Ok((model, summary))
}

/// Station totals implied by the condition, in the units of `kind`. Work
/// units use exact per-class service means when class counts are given and
/// the traffic-weighted mean otherwise.
pub fn prediction_inputs(condition: &Condition, topo: &Topology, kind: WeightKind) -> Vec<f64> {
    let spec = topo.spec();
    let mean_service = |k: usize, j: Station| 1.0 / spec.class(k).service_rate(j).expect("visits");
    match (kind, condition) {
        (WeightKind::Count, c) => c.station_totals(),
        (WeightKind::Work, Condition::ExactClassCounts(t)) => t
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .filter(|&(k, &q)| q > 0 && topo.visits(k + 1, j + 1))
                    .map(|(k, &q)| q as f64 * mean_service(k + 1, j + 1))
                    .sum()
            })
            .collect(),
        (WeightKind::Work, c) => c
            .station_totals()
            .into_iter()
            .enumerate()
            .map(|(i, q)| {
                let j = i + 1;
                let (mut lam, mut rho) = (0.0, 0.0);
                for &k in topo.visitors(j) {
                    let l = spec.class(k).arrival_rate;
                    lam += l;
                    rho += l * mean_service(k, j);
                }
                q * rho / lam
            })
            .collect(),
    }
}

struct SeedRun {
    summary: SeedSummary,
    snapshots: Vec<ProfileSnapshot>,
    behind: Vec<BehindAverages>,
}

fn run_seed(cfg: &ExperimentConfig, topo: &Topology, seed: u64) -> Result<SeedRun, HarnessError> {
    let e = &cfg.experiment;
    let mut sim = Simulation::from_topology(
        topo.clone(),
        SimOptions {
            preemptive: e.preemptive,
            seed,
            event_cap: e.event_cap.unwrap_or(crate::simulator::DEFAULT_EVENT_CAP),
            ..SimOptions::default()
        },
    );
    sim.run_until(e.warmup)?;
    let out = sim.conditional_sample(e.condition.clone(), e.local_time_threshold, e.snapshots, e.horizon_cap)?;
    let behind = (1..=topo.num_stations()).map(|j| sim.behind_averages(j)).collect();
    Ok(SeedRun {
        summary: SeedSummary {
            seed,
            snapshots: out.snapshots.len(),
            complete: out.complete,
            simulated_time: sim.now(),
            events: sim.events_processed(),
        },
        snapshots: out.snapshots,
        behind,
    })
}

/// Runs every seed (concurrently, aggregated in seed order), pools the
/// snapshots and compares their mean CDF against the prediction.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ProfileReport, HarnessError> {
    let topo = cfg.validate()?;
    let (model, prediction) = predict(cfg, &topo)?;
    let grid = cfg.grid.points();

    let runs: Vec<Result<SeedRun, HarnessError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .experiment
            .seeds
            .iter()
            .map(|&seed| {
                let topo = &topo;
                scope.spawn(move || run_seed(cfg, topo, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let partial = runs.iter().any(|r| !r.summary.complete);
    let pooled: Vec<ProfileSnapshot> = runs.iter().flat_map(|r| r.snapshots.iter().cloned()).collect();
    if pooled.is_empty() {
        return Err(HarnessError::HorizonExhausted);
    }

    let seeds = runs.len() as f64;
    let mut stations = Vec::with_capacity(topo.num_stations());
    for j in 1..=topo.num_stations() {
        let bands = empirical_bands(&pooled, j, &grid)?;
        let theory: Vec<f64> = grid
            .iter()
            .map(|&y| model.predicted_cdf(&prediction.frontiers, j, y))
            .collect();
        let d = compare_profiles(&bands.mean, &theory, &grid)?;
        let mut behind = BehindAverages::default();
        for r in &runs {
            let b = &r.behind[j - 1];
            behind.mean_queue += b.mean_queue / seeds;
            behind.mean_behind += b.mean_behind / seeds;
            behind.mean_work += b.mean_work / seeds;
            behind.mean_work_behind += b.mean_work_behind / seeds;
            behind.fraction_behind += b.fraction_behind / seeds;
        }
        stations.push(StationProfile {
            station: j,
            grid: grid.clone(),
            emp_min: bands.min,
            emp_mean: bands.mean,
            emp_max: bands.max,
            theory,
            sup_distance: d.sup_distance,
            l1_distance: d.l1_distance,
            behind,
        });
    }

    Ok(ProfileReport {
        partial,
        metadata: ReportMetadata {
            config_hash: cfg.hash(),
            seeds: runs.into_iter().map(|r| r.summary).collect(),
            pooled_snapshots: pooled.len(),
            prediction,
        },
        stations,
    })
}

impl ProfileReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.stations {
            for i in 0..s.grid.len() {
                w.serialize(CsvRow {
                    station: s.station,
                    y: s.grid[i],
                    emp_min: s.emp_min[i],
                    emp_mean: s.emp_mean[i],
                    emp_max: s.emp_max[i],
                    theory: s.theory[i],
                })
                .expect("in-memory write");
            }
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
        let mut out = String::new();
        if self.partial {
            out.push_str(PARTIAL_MARKER);
            out.push('\n');
        }
        if body.is_empty() {
            out.push_str(CSV_HEADER);
            out.push('\n');
        }
        out.push_str(&body);
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse {
            path: "<report>".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Writes `report` to `path` in `format`.
pub fn export_report(report: &ProfileReport, path: impl AsRef<Path>, format: ExportFormat) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let body = match format {
        ExportFormat::Csv => report.to_csv(),
        ExportFormat::Json => report.to_json(),
    };
    fs::write(path, body).map_err(io_err(path))
}

/// One data row of an exported CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub station: Station,
    pub y: f64,
    pub emp_min: f64,
    pub emp_mean: f64,
    pub emp_max: f64,
    pub theory: f64,
}

/// Parses an exported CSV. Returns the rows and whether it was flagged partial.
pub fn parse_csv(text: &str, origin: &str) -> Result<(Vec<CsvRow>, bool), HarnessError> {
    let parse_err = |message: String| HarnessError::Parse {
        path: origin.to_string(),
        message,
    };
    let partial = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .any(|l| l.trim() == PARTIAL_MARKER);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(parse_err(format!("expected header `{CSV_HEADER}`")));
    }
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<CsvRow>, _>>()
        .map_err(|e| parse_err(e.to_string()))?;
    Ok((rows, partial))
}
