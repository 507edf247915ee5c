//! Experiment pipelines behind the command-line subcommands.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::baseline::{dr_orientation_increment, dr_position_increment};
use super::config::ExperimentConfig;
use crate::cascade::{
    orientation_mae, orientation_samples, position_samples, position_unit_mae, train_ocaslstm, train_pcaslstm,
    GammaMode, OCasLstmModel, PCasLstmModel, TrainReport,
};
use crate::fusion::{dataset_events, format_event_line, replay, run_stream, FusionModels, ReplaySummary, TruthSidecar};
use crate::ins::{dead_reckon, NavState, GRAVITY_ENU};
use crate::simdata::{
    downsample_streams, generate_trajectory, split_dataset, synthesize_imu, write_imu_csv, write_orientation_csv,
    write_position_csv, write_track_csv, DatasetSplits, GroundTruthTrack, ImuNoiseModel, ImuStream, Manifest,
    MultiRateDataset, TrajectorySpec,
};
use crate::{Error, Result};

pub const ORIENTATION_CHECKPOINT: &str = "orientation.ckpt.json";
pub const POSITION_CHECKPOINT: &str = "position.ckpt.json";

/// Which network `train` fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Orientation,
    Position,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orientation" => Ok(Self::Orientation),
            "position" => Ok(Self::Position),
            other => Err(Error::Config(format!("unknown target `{other}`, expected orientation or position"))),
        }
    }
}

/// A generated trajectory with its IMU stream and truth streams.
#[derive(Debug, Clone)]
pub struct SimData {
    pub spec: TrajectorySpec,
    pub noise: ImuNoiseModel,
    pub track: GroundTruthTrack,
    pub imu: ImuStream,
    pub ds: MultiRateDataset,
    pub splits: DatasetSplits,
}

/// Generates the configured dataset with the orientation truth at `f_ori`.
pub fn simulate_data(cfg: &ExperimentConfig, f_ori: f64) -> Result<SimData> {
    simulate_span(cfg, 0.0, cfg.trajectory.duration, 0, f_ori)
}

/// The position benchmark's dataset: `fig5.duration` seconds of the same
/// trajectory and noise.
pub fn fig5_data(cfg: &ExperimentConfig) -> Result<SimData> {
    simulate_span(cfg, 0.0, cfg.fig5.duration, 0, cfg.rates.orientation)
}

/// Generates `duration` seconds of the configured trajectory from
/// `start_time` with noise seeded at `noise_offset` past the base seed.
pub fn simulate_span(
    cfg: &ExperimentConfig,
    start_time: f64,
    duration: f64,
    noise_offset: u64,
    f_ori: f64,
) -> Result<SimData> {
    let spec = cfg.trajectory_spec(start_time, duration);
    let noise = cfg.noise_model(noise_offset);
    let track = generate_trajectory(&spec)?;
    let imu = synthesize_imu(&track, &noise, GRAVITY_ENU)?;
    let ds = downsample_streams(&track, &imu, cfg.rates.position, f_ori)?;
    let splits = split_dataset(&ds)?;
    Ok(SimData { spec, noise, track, imu, ds, splits })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    if !dir.exists() {
        fs::create_dir_all(dir)?;
        eprintln!("created output directory {}", dir.display());
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

fn write_events(path: &Path, ds: &MultiRateDataset, range: std::ops::Range<usize>) -> Result<()> {
    write_file(path, |w| {
        for e in dataset_events(ds, range) {
            writeln!(w, "{}", format_event_line(&e)?)?;
        }
        Ok(())
    })
}

/// Files written by `simulate`.
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub files: Vec<PathBuf>,
    pub data: SimData,
}

/// Writes the IMU, truth and track CSVs, the full and test-split event
/// streams, the manifest and the resolved configuration.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutput> {
    let data = simulate_data(cfg, cfg.rates.orientation)?;
    let dir = &cfg.out;
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(&path)?;
        files.push(path);
        Ok(())
    };
    emit("imu.csv", &|p| write_file(p, |w| write_imu_csv(w, &data.imu)))?;
    emit("position.csv", &|p| write_file(p, |w| write_position_csv(w, &data.ds)))?;
    emit("orientation.csv", &|p| write_file(p, |w| write_orientation_csv(w, &data.ds)))?;
    emit("track.csv", &|p| write_file(p, |w| write_track_csv(w, &data.track)))?;
    emit("events.ndjson", &|p| write_events(p, &data.ds, 0..data.ds.len()))?;
    emit("test_events.ndjson", &|p| write_events(p, &data.ds, data.splits.test.clone()))?;
    emit("manifest.json", &|p| write_json(p, &Manifest::new(&data.spec, &data.noise, GRAVITY_ENU, &data.ds)))?;
    emit("config.toml", &|p| Ok(fs::write(p, cfg.to_toml()?)?))?;
    eprintln!("simulated {} IMU samples into {}", data.ds.len(), dir.display());
    Ok(SimulateOutput { files, data })
}

/// Outcome of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub target: String,
    pub checkpoint: PathBuf,
    /// Degrees for orientation, millimetres for position.
    pub final_val_mae: [f64; 3],
    pub test_mae: [f64; 3],
    pub unit: String,
    pub report: TrainReport,
}

/// Fits the orientation network at the dataset's orientation rate.
pub fn fit_orientation(cfg: &ExperimentConfig, data: &SimData) -> Result<(OCasLstmModel, TrainReport)> {
    let o = &cfg.orientation;
    let n = data.ds.orientation.decimation;
    let mut model = OCasLstmModel::new(n, o.m, o.hidden, data.ds.stats.clone(), cfg.orientation_seed())?;
    let report = train_ocaslstm(&mut model, &data.ds, &cfg.train_config())?;
    Ok((model, report))
}

/// Fits the position network with Γ mode `gamma`.
pub fn fit_position(cfg: &ExperimentConfig, data: &SimData, gamma: GammaMode) -> Result<(PCasLstmModel, TrainReport)> {
    let p = &cfg.position;
    let n = data.ds.position.decimation;
    let mut model = PCasLstmModel::new(p.k, n, p.m, p.hidden, gamma, data.ds.stats.clone(), cfg.position_seed())?;
    let report = train_pcaslstm(&mut model, &data.ds, &cfg.train_config())?;
    Ok((model, report))
}

/// Rejects evaluation samples that start before the test split.
fn check_test_only(starts: impl IntoIterator<Item = usize>, splits: &DatasetSplits) -> Result<()> {
    for s in starts {
        if s < splits.test.start || s >= splits.test.end {
            return Err(Error::Internal(format!("evaluation sample at {s} lies outside the test split")));
        }
    }
    Ok(())
}

/// Test-split orientation MAE (degrees) of the model and of gyro dead
/// reckoning over the same intervals.
pub fn orientation_test_mae(model: &OCasLstmModel, data: &SimData) -> Result<([f64; 3], [f64; 3])> {
    let test = orientation_samples(&data.ds, &data.splits.test, model.m(), &model.stats)?;
    check_test_only(test.iter().map(|s| s.start), &data.splits)?;
    let mae = orientation_mae(model, &test)?;
    let mut dr = [0.0; 3];
    for s in &test {
        let start = data.ds.orientation.at(s.start).expect("sample starts at a truth");
        let d = dr_orientation_increment(&data.ds, s.start, model.n(), start)?;
        for a in 0..3 {
            dr[a] += (d[a] - s.delta[a]).abs() / test.len() as f64;
        }
    }
    Ok((mae, dr))
}

/// Test-split position MAE (metres) of every unit and of strapdown dead
/// reckoning over one truth period.
pub fn position_test_mae(model: &PCasLstmModel, data: &SimData) -> Result<(Vec<[f64; 3]>, [f64; 3])> {
    let test = position_samples(&data.ds, &data.splits.test, model.m(), &model.stats)?;
    check_test_only(test.iter().map(|s| s.start), &data.splits)?;
    let units = position_unit_mae(model, &test)?;
    let mut dr = [0.0; 3];
    for s in &test {
        let d = dr_position_increment(&data.ds, s.start, model.n(), s.dp_prev, GRAVITY_ENU)?;
        for a in 0..3 {
            dr[a] += (d[a] - s.delta[a]).abs() / test.len() as f64;
        }
    }
    Ok((units, dr))
}

/// Trains one network and writes its checkpoint and report.
pub fn cmd_train(cfg: &ExperimentConfig, target: Target, checkpoint: Option<&Path>) -> Result<TrainSummary> {
    let data = simulate_data(cfg, cfg.rates.orientation)?;
    ensure_dir(&cfg.out)?;
    let hyper = cfg.train.hyper();
    let (name, default_file) = match target {
        Target::Orientation => ("orientation", ORIENTATION_CHECKPOINT),
        Target::Position => ("position", POSITION_CHECKPOINT),
    };
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(default_file));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let summary = match target {
        Target::Orientation => {
            let (model, report) = fit_orientation(cfg, &data)?;
            model.save(&path, hyper)?;
            let (test_mae, _) = orientation_test_mae(&model, &data)?;
            TrainSummary {
                target: name.into(),
                checkpoint: path,
                final_val_mae: report.final_val_mae,
                test_mae,
                unit: "deg".into(),
                report,
            }
        }
        Target::Position => {
            let (model, report) = fit_position(cfg, &data, cfg.position.gamma)?;
            model.save(&path, hyper)?;
            let (units, _) = position_test_mae(&model, &data)?;
            let mm = |v: [f64; 3]| v.map(|x| x * 1000.0);
            TrainSummary {
                target: name.into(),
                checkpoint: path,
                final_val_mae: mm(report.final_val_mae),
                test_mae: mm(*units.last().expect("k >= 1")),
                unit: "mm".into(),
                report,
            }
        }
    };
    write_json(&cfg.out.join(format!("{name}_report.json")), &summary)?;
    eprintln!(
        "{name}: {} epochs (best {}), validation MAE {:?} {}, test MAE {:?} {}",
        summary.report.epochs_run, summary.report.best_epoch, summary.final_val_mae, summary.unit, summary.test_mae,
        summary.unit
    );
    Ok(summary)
}

const AXES: [&str; 3] = ["pitch", "roll", "yaw"];

/// Orientation MAE per fine-to-truth ratio.
#[derive(Debug, Clone, Serialize)]
pub struct Table1 {
    pub ratios: Vec<usize>,
    /// Degrees, `[ratio][axis]`.
    pub mae: Vec<[f64; 3]>,
    pub dead_reckoning: Vec<[f64; 3]>,
}

impl Table1 {
    fn csv(&self, values: &[[f64; 3]]) -> String {
        let mut s = String::from("axis");
        for r in &self.ratios {
            s.push_str(&format!(",ratio_{r}"));
        }
        s.push('\n');
        for (a, name) in AXES.iter().enumerate() {
            s.push_str(name);
            for v in values {
                s.push_str(&format!(",{}", v[a]));
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        self.csv(&self.mae)
    }

    pub fn dead_reckoning_csv(&self) -> String {
        self.csv(&self.dead_reckoning)
    }
}

/// Trains one orientation network per ratio, scores each on the test split
/// and writes `table1.csv` and `table1_dead_reckoning.csv`.
pub fn cmd_eval_table1(cfg: &ExperimentConfig) -> Result<Table1> {
    let dir = cfg.out.join("table1");
    ensure_dir(&dir)?;
    let mut table = Table1 { ratios: cfg.table1.ratios.clone(), mae: Vec::new(), dead_reckoning: Vec::new() };
    for &r in &cfg.table1.ratios {
        let data = simulate_data(cfg, cfg.trajectory.fine_rate / r as f64)?;
        let (model, report) = fit_orientation(cfg, &data)?;
        model.save(&dir.join(format!("orientation_ratio_{r}.ckpt.json")), cfg.train.hyper())?;
        let (mae, dr) = orientation_test_mae(&model, &data)?;
        eprintln!("ratio {r}: {} epochs, test MAE {mae:?} deg, dead reckoning {dr:?} deg", report.epochs_run);
        table.mae.push(mae);
        table.dead_reckoning.push(dr);
    }
    fs::write(cfg.out.join("table1.csv"), table.to_csv())?;
    fs::write(cfg.out.join("table1_dead_reckoning.csv"), table.dead_reckoning_csv())?;
    Ok(table)
}

/// Per-unit position MAE for each Γ mode.
#[derive(Debug, Clone, Serialize)]
pub struct Fig5 {
    pub modes: Vec<GammaMode>,
    /// Millimetres, `[mode][unit][axis]`.
    pub unit_mae_mm: Vec<Vec<[f64; 3]>>,
    /// Dead reckoning over one truth period, millimetres.
    pub dead_reckoning_mm: [f64; 3],
    pub reports: Vec<TrainReport>,
}

pub fn mean_axis(v: &[f64; 3]) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

impl Fig5 {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,unit,x_mm,y_mm,z_mm,mean_mm\n");
        for (mode, units) in self.modes.iter().zip(&self.unit_mae_mm) {
            for (j, v) in units.iter().enumerate() {
                s.push_str(&format!("{},{},{},{},{},{}\n", mode.short_name(), j + 1, v[0], v[1], v[2], mean_axis(v)));
            }
        }
        s
    }

    pub fn baseline_csv(&self) -> String {
        let v = &self.dead_reckoning_mm;
        format!("method,x_mm,y_mm,z_mm,mean_mm\ndead_reckoning,{},{},{},{}\n", v[0], v[1], v[2], mean_axis(v))
    }

    /// Mean-axis MAE of each mode's last unit.
    pub fn final_unit_mae(&self) -> Vec<f64> {
        self.unit_mae_mm.iter().map(|u| mean_axis(u.last().expect("k >= 1"))).collect()
    }
}

/// Trains one position network per Γ mode and writes `fig5.csv` and
/// `fig5_dead_reckoning.csv`.
pub fn cmd_eval_fig5(cfg: &ExperimentConfig) -> Result<Fig5> {
    let dir = cfg.out.join("fig5");
    ensure_dir(&dir)?;
    let data = fig5_data(cfg)?;
    let mut fig = Fig5 { modes: cfg.fig5.modes.clone(), unit_mae_mm: Vec::new(), dead_reckoning_mm: [0.0; 3], reports: Vec::new() };
    for &mode in &cfg.fig5.modes {
        let (model, report) = fit_position(cfg, &data, mode)?;
        model.save(&dir.join(format!("position_{}.ckpt.json", mode.short_name())), cfg.train.hyper())?;
        let (units, dr) = position_test_mae(&model, &data)?;
        let units: Vec<[f64; 3]> = units.iter().map(|v| v.map(|x| x * 1000.0)).collect();
        eprintln!(
            "mode {mode}: {} epochs, last unit test MAE {:?} mm, dead reckoning {:?} mm",
            report.epochs_run,
            units.last().expect("k >= 1"),
            dr.map(|x| x * 1000.0)
        );
        fig.dead_reckoning_mm = dr.map(|x| x * 1000.0);
        fig.unit_mae_mm.push(units);
        fig.reports.push(report);
    }
    fs::write(cfg.out.join("fig5.csv"), fig.to_csv())?;
    fs::write(cfg.out.join("fig5_dead_reckoning.csv"), fig.baseline_csv())?;
    Ok(fig)
}

/// Loads the two checkpoints named in the config, falling back to the
/// default file names inside `dir`.
pub fn load_models(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<FusionModels> {
    let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf> {
        match (explicit, dir) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(d)) => Ok(d.join(name)),
            (None, None) => Err(Error::Config(format!(
                "no checkpoint given: set `models.{}` or pass --checkpoint <dir>",
                if name == ORIENTATION_CHECKPOINT { "orientation_checkpoint" } else { "position_checkpoint" }
            ))),
        }
    };
    let o = OCasLstmModel::load(&pick(&cfg.models.orientation_checkpoint, ORIENTATION_CHECKPOINT)?)?;
    let p = PCasLstmModel::load(&pick(&cfg.models.position_checkpoint, POSITION_CHECKPOINT)?)?;
    Ok(FusionModels::new(o, p))
}

/// Position error of both pipelines at one fine sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineRow {
    pub t: f64,
    pub dead_reckoning_mm: f64,
    pub fusion_mm: f64,
    /// Whether a position truth arrived at this sample.
    pub truth: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineComparison {
    pub rows: Vec<BaselineRow>,
    pub summary: ReplaySummary,
}

impl BaselineComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,dead_reckoning_mm,fusion_mm,truth\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.t, r.dead_reckoning_mm, r.fusion_mm, r.truth as u8));
        }
        s
    }

    pub fn terminal(&self) -> Option<&BaselineRow> {
        self.rows.last()
    }
}

fn dist_mm(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt() * 1000.0
}

/// Runs dead reckoning and the fusion loop over a held-out continuation of
/// the trajectory (`baseline.horizon` seconds after the training data, with
/// a fresh noise realization) and writes `compare_baseline.csv`.
pub fn cmd_compare_baseline(cfg: &ExperimentConfig, models: &FusionModels) -> Result<BaselineComparison> {
    ensure_dir(&cfg.out)?;
    let held = simulate_span(cfg, cfg.trajectory.duration, cfg.baseline.horizon, 1, cfg.rates.orientation)?;
    let track = &held.track;
    let v0 = track
        .velocities
        .as_ref()
        .map(|v| v[0])
        .ok_or_else(|| Error::Internal("trajectory has no velocities".into()))?;
    let init = NavState::from_angles(track.angles[0], v0, track.positions[0], track.timestamps[0]);
    let dr = dead_reckon(&init, &held.imu, GRAVITY_ENU)?;
    let events = dataset_events(&held.ds, 0..held.ds.len());
    let r = replay(&events, models, cfg.models.buffer_capacity, None)?;
    let mut rows = Vec::with_capacity(r.poses.len());
    let mut k = 0;
    for pose in &r.poses {
        while k < track.len() && track.timestamps[k] < pose.t {
            k += 1;
        }
        if k == track.len() || track.timestamps[k] != pose.t {
            return Err(Error::Internal(format!("pose at t = {} has no matching track sample", pose.t)));
        }
        rows.push(BaselineRow {
            t: pose.t,
            dead_reckoning_mm: dist_mm(dr.positions[k], track.positions[k]),
            fusion_mm: dist_mm(pose.p, track.positions[k]),
            truth: held.ds.position.at(k).is_some(),
        });
    }
    let out = BaselineComparison { rows, summary: r.summary };
    fs::write(cfg.out.join("compare_baseline.csv"), out.to_csv())?;
    if let Some(t) = out.terminal() {
        eprintln!(
            "terminal position error at t = {}: dead reckoning {} mm, fusion {} mm",
            t.t, t.dead_reckoning_mm, t.fusion_mm
        );
    }
    Ok(out)
}

/// Replays an NDJSON event file into `<out>/poses.ndjson` and
/// `<out>/replay_summary.json`; diagnostics go to standard error.
pub fn cmd_replay(
    cfg: &ExperimentConfig,
    models: &FusionModels,
    input: &Path,
    sidecar: Option<&Path>,
) -> Result<ReplaySummary> {
    ensure_dir(&cfg.out)?;
    let reader = BufReader::new(
        File::open(input).map_err(|e| Error::Input(format!("cannot open event file {}: {e}", input.display())))?,
    );
    let side = match sidecar {
        Some(p) => Some(TruthSidecar::read_csv(BufReader::new(
            File::open(p).map_err(|e| Error::Input(format!("cannot open sidecar {}: {e}", p.display())))?,
        ))?),
        None => None,
    };
    let out = BufWriter::new(File::create(cfg.out.join("poses.ndjson"))?);
    let summary = run_stream(reader, out, std::io::stderr().lock(), models, cfg.models.buffer_capacity, side.as_ref())?;
    write_json(&cfg.out.join("replay_summary.json"), &summary)?;
    Ok(summary)
}

/// Serves one stream from `input` to `output` and prints the summary line
/// on standard error.
pub fn serve_stream<R: BufRead, W: Write>(
    cfg: &ExperimentConfig,
    models: &FusionModels,
    input: R,
    output: W,
) -> Result<ReplaySummary> {
    let summary = run_stream(input, output, std::io::stderr().lock(), models, cfg.models.buffer_capacity, None)?;
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(summary)
}

/// Serves standard input, or each TCP connection in turn when `listen` is
/// set. Every connection gets a fresh fusion state.
pub fn cmd_serve(cfg: &ExperimentConfig, models: &FusionModels, listen: Option<&str>) -> Result<()> {
    match listen {
        None => {
            let stdin = std::io::stdin();
            serve_stream(cfg, models, stdin.lock(), std::io::stdout().lock())?;
        }
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| Error::Config(format!("cannot listen on {addr}: {e}")))?;
            eprintln!("listening on {}", listener.local_addr()?);
            for conn in listener.incoming() {
                let conn = conn?;
                let peer = conn.peer_addr()?;
                eprintln!("connection from {peer}");
                let reader = BufReader::new(conn.try_clone()?);
                if let Err(e) = serve_stream(cfg, models, reader, conn) {
                    eprintln!("connection {peer} ended: {e}");
                }
            }
        }
    }
    Ok(())
}
