//! Subcommand implementations. Every command reads and writes files only,
//! so a pipeline run is the composition of the individual commands.

use std::path::{Path, PathBuf};

use climbloc::eval::{
    boxplot_csv, boxplot_summary, cdf_csv, composite_objective, compute_cdf, match_errors,
    metrics_csv, metrics_from_series, MetricsRow,
};
use climbloc::fcnn::{build_training_set, BaroFcnnModel, SensorKind, UwbFcnnModel};
use climbloc::fusion::amfa_pipeline;
use climbloc::fusion::FusionBundle;
use climbloc::nnet::{LossHistory, ModelMetadata, StandardizedNetwork};
use climbloc::runner::{run_algorithm, run_front_end, train_fusion_stage, SensorModels};
use climbloc::sim::{simulate, ScenarioData};
use climbloc::{Algorithm, PoseEstimate};

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::records::*;

pub const STREAMS: [&str; 5] = ["truth", "imu", "gps", "uwb", "baro"];
pub const UWB_MODEL: &str = "uwb.json";
pub const BARO_MODEL: &str = "baro.json";
pub const FUSION_MODEL: &str = "fusion.json";

fn mkdir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Fusion ratios written next to an amfa trajectory.
pub fn ratios_path(trajectory: &Path) -> PathBuf {
    let stem = trajectory
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    trajectory.with_file_name(format!("{stem}.ratios.csv"))
}

fn stream_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.jsonl"))
}

/// Writes the five streams, `anchor.json` and `manifest.json` into `out`.
pub fn cmd_simulate(cfg: &AppConfig, seed: Option<u64>, out: &Path) -> CliResult<RunManifest> {
    let mut scenario = cfg.sim.scenario.clone();
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let data = simulate(&scenario)?;
    mkdir(out)?;
    write_jsonl(
        &stream_path(out, "truth"),
        data.truth.iter().map(TruthRecord::from),
    )?;
    write_jsonl(
        &stream_path(out, "imu"),
        data.imu.iter().map(ImuRecord::from),
    )?;
    write_jsonl(
        &stream_path(out, "gps"),
        data.gps.iter().map(GpsRecord::from),
    )?;
    write_jsonl(
        &stream_path(out, "uwb"),
        data.uwb.iter().map(UwbRecord::from),
    )?;
    write_jsonl(
        &stream_path(out, "baro"),
        data.baro.iter().map(BaroRecord::from),
    )?;
    let anchor = AnchorFile {
        origin: data.origin,
        anchor: data.anchor,
        baro_reference: data.baro_reference,
    };
    write_json(&out.join("anchor.json"), &anchor)?;

    let mut m = RunManifest::new(cfg).seed("scenario", scenario.seed);
    for s in STREAMS {
        m.file(s, format!("{s}.jsonl"));
    }
    m.file("anchor", "anchor.json");
    write_json(&out.join("manifest.json"), &m)?;
    Ok(m)
}

/// Loads a scenario directory. `truth.jsonl` is optional for running; when
/// present its first attitude seeds the EKF.
pub fn load_scenario(dir: &Path, need_truth: bool) -> CliResult<ScenarioData> {
    if !dir.is_dir() {
        return Err(CliError::MissingInput(format!(
            "scenario directory {}",
            dir.display()
        )));
    }
    let anchor: AnchorFile = read_json(&dir.join("anchor.json"))?;
    let truth_path = stream_path(dir, "truth");
    let truth: Vec<TruthRecord> = if need_truth || truth_path.exists() {
        read_jsonl(&truth_path)?
    } else {
        Vec::new()
    };
    let imu: Vec<ImuRecord> = read_jsonl(&stream_path(dir, "imu"))?;
    let gps: Vec<GpsRecord> = read_jsonl(&stream_path(dir, "gps"))?;
    let uwb: Vec<UwbRecord> = read_jsonl(&stream_path(dir, "uwb"))?;
    let baro: Vec<BaroRecord> = read_jsonl(&stream_path(dir, "baro"))?;
    Ok(ScenarioData {
        origin: anchor.origin,
        anchor: anchor.anchor,
        baro_reference: anchor.baro_reference,
        truth: truth.iter().map(Into::into).collect(),
        imu: imu.iter().map(Into::into).collect(),
        gps: gps.iter().map(Into::into).collect(),
        uwb: uwb.iter().map(Into::into).collect(),
        baro: baro.iter().map(Into::into).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Uwb,
    Baro,
    Fusion,
}

impl std::str::FromStr for ModelKind {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "uwb" => Ok(ModelKind::Uwb),
            "baro" => Ok(ModelKind::Baro),
            "fusion" => Ok(ModelKind::Fusion),
            _ => Err(CliError::Config(format!(
                "unknown model '{s}' (expected uwb, baro or fusion)"
            ))),
        }
    }
}

fn loss_csv(h: &LossHistory) -> String {
    let mut s = String::from("epoch,train_loss,validation_loss\n");
    for (i, (t, v)) in h.train.iter().zip(&h.validation).enumerate() {
        s.push_str(&format!("{},{t:.9e},{v:.9e}\n", i + 1));
    }
    s
}

pub fn loss_path(model: &Path) -> PathBuf {
    model.with_extension("loss.csv")
}

fn read_model(path: &Path) -> CliResult<StandardizedNetwork> {
    let s = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(StandardizedNetwork::from_json(&s)?)
}

pub fn load_uwb(dir: &Path, cfg: &AppConfig) -> CliResult<UwbFcnnModel> {
    Ok(UwbFcnnModel::from_network(
        read_model(&dir.join(UWB_MODEL))?,
        cfg.fcnn.uwb_noise,
    )?)
}

pub fn load_baro(dir: &Path) -> CliResult<BaroFcnnModel> {
    Ok(BaroFcnnModel::from_network(read_model(
        &dir.join(BARO_MODEL),
    )?)?)
}

pub fn load_fusion(dir: &Path) -> CliResult<FusionBundle> {
    let path = dir.join(FUSION_MODEL);
    let s = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FusionBundle::from_json(&s)?)
}

/// Trains one network and writes it with its loss history next to it.
/// Fusion training needs the sensor models in `models` (defaults to the
/// output's directory).
pub fn cmd_train(
    cfg: &AppConfig,
    kind: ModelKind,
    data_dir: &Path,
    out: &Path,
    models: Option<&Path>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> CliResult<()> {
    let seed = seed.unwrap_or(cfg.nnet.seed);
    let models_dir = models
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.parent().map(Path::to_path_buf).unwrap_or_default());
    if kind == ModelKind::Fusion {
        for (file, stage) in [(UWB_MODEL, "uwb"), (BARO_MODEL, "baro")] {
            if !models_dir.join(file).is_file() {
                return Err(CliError::MissingInput(format!(
                    "staged training order: train --model {stage} before --model fusion ({} not found)",
                    models_dir.join(file).display()
                )));
            }
        }
    }
    let data = load_scenario(data_dir, true)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    let (json, history) = match kind {
        ModelKind::Uwb | ModelKind::Baro => {
            let mut fc = cfg.fcnn.clone();
            fc.train.seed = seed;
            if let Some(e) = epochs {
                fc.train.epochs = e;
            }
            let (mut net, sensor) = match kind {
                ModelKind::Uwb => (UwbFcnnModel::new(&fc, seed)?.net, SensorKind::Uwb),
                _ => (BaroFcnnModel::new(&fc, seed)?.net, SensorKind::Baro),
            };
            let set = build_training_set(&data, sensor, &fc)?;
            let h = net.fit(&set, &fc.train)?;
            net.metadata.seed = seed;
            net.metadata.epochs = fc.train.epochs;
            (net.to_json()?, h)
        }
        ModelKind::Fusion => {
            let uwb = load_uwb(&models_dir, cfg)?;
            let baro = load_baro(&models_dir)?;
            let mut fcfg = cfg.fusion.model.clone();
            if let Some(e) = epochs {
                fcfg.train.epochs = e;
            }
            let sm = SensorModels {
                uwb: Some(&uwb),
                baro: Some(&baro),
            };
            let (net, h) = train_fusion_stage(&data, sm, &cfg.fusion.runner, &fcfg, seed)?;
            let meta = ModelMetadata {
                seed,
                epochs: fcfg.train.epochs,
                ..ModelMetadata::default()
            };
            (FusionBundle::new(&net, &fcfg, &cfg.ukf, meta).to_json()?, h)
        }
    };
    write_text(out, &(json + "\n"))?;
    write_text(&loss_path(out), &loss_csv(&history))
}

/// Runs one algorithm and writes its trajectory.
pub fn cmd_run(
    cfg: &AppConfig,
    data_dir: &Path,
    models_dir: &Path,
    algo: Algorithm,
    out: &Path,
) -> CliResult<usize> {
    let data = load_scenario(data_dir, false)?;
    let needs_uwb = matches!(algo, Algorithm::UwbFcnn | Algorithm::Amfa);
    let needs_baro = matches!(algo, Algorithm::BaroFcnn | Algorithm::Amfa);
    let uwb = needs_uwb.then(|| load_uwb(models_dir, cfg)).transpose()?;
    let baro = needs_baro.then(|| load_baro(models_dir)).transpose()?;
    let bundle = (algo == Algorithm::Amfa)
        .then(|| load_fusion(models_dir))
        .transpose()?;
    let net = bundle.as_ref().map(|b| b.network()).transpose()?;
    let fusion = match (&bundle, &net) {
        (Some(b), Some(n)) => Some((n, &b.config, &b.ukf)),
        _ => None,
    };
    let models = SensorModels {
        uwb: uwb.as_ref(),
        baro: baro.as_ref(),
    };
    if algo == Algorithm::Amfa {
        let absent: Vec<&str> = ["uwb", "gps", "baro"]
            .into_iter()
            .zip([
                data.uwb.is_empty(),
                data.gps.iter().all(|g| !g.valid),
                data.baro.is_empty(),
            ])
            .filter_map(|(n, missing)| missing.then_some(n))
            .collect();
        if !absent.is_empty() {
            eprintln!(
                "warning: amfa running without {}; fusion degrades to the remaining modalities",
                absent.join(", ")
            );
        }
    }
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        mkdir(dir)?;
    }
    let est = match fusion {
        Some((net, fcfg, ukf)) => {
            let front = run_front_end(&data, models, &cfg.fusion.runner)?;
            let amfa = amfa_pipeline(&front.frames, net, fcfg, ukf)?;
            let ratios: Vec<RatioRecord> =
                amfa.fused.iter().flatten().map(RatioRecord::from).collect();
            write_text(&ratios_path(out), &ratios_csv(&ratios))?;
            amfa.estimates
        }
        None => run_algorithm(algo, &data, models, None, &cfg.fusion.runner)?,
    };
    let records: Vec<TrajectoryRecord> = est
        .iter()
        .flatten()
        .map(|p| TrajectoryRecord::from_estimate(p, algo))
        .collect();
    write_jsonl(out, &records)?;
    Ok(records.len())
}

pub struct Evaluation {
    pub rows: Vec<MetricsRow>,
    pub composite: Vec<(String, f64)>,
}

fn check_trajectory(name: &str, est: &[PoseEstimate]) -> CliResult<()> {
    if est.is_empty() {
        return Err(CliError::MissingInput(format!(
            "trajectory {name} has no records"
        )));
    }
    Ok(())
}

/// Writes `metrics.csv`, `cdf.csv`, `boxplot.csv` and `composite.csv` into `out`.
/// With `with_reference` the metrics gain the hardware reference footer row.
pub fn cmd_eval(
    cfg: &AppConfig,
    est_files: &[PathBuf],
    truth_file: &Path,
    out: &Path,
    with_reference: bool,
) -> CliResult<Evaluation> {
    let truth: Vec<TruthRecord> = read_jsonl(truth_file)?;
    let truth: Vec<_> = truth.iter().map(Into::into).collect();
    let thresholds = cfg.eval.thresholds();
    let mut rows = Vec::new();
    let mut cdfs = Vec::new();
    let mut boxes = Vec::new();
    let mut composite = Vec::new();
    for f in est_files {
        let recs: Vec<TrajectoryRecord> = read_jsonl(f)?;
        let name = recs
            .first()
            .map(|r| r.algo.clone())
            .unwrap_or_else(|| f.display().to_string());
        let est: Vec<PoseEstimate> = recs
            .iter()
            .map(|r| r.to_estimate())
            .collect::<CliResult<_>>()?;
        check_trajectory(&name, &est)?;
        let axes = [
            recs.iter().any(|r| r.x.is_some()),
            recs.iter().any(|r| r.y.is_some()),
            recs.iter().any(|r| r.z.is_some()),
        ];
        let series = match_errors(&est, &truth, axes);
        if series.excluded > 0 {
            eprintln!(
                "note: {name}: {} epochs had no truth within tolerance and were excluded",
                series.excluded
            );
        }
        let row = metrics_from_series(&name, &series)
            .map_err(|e| CliError::MissingInput(e.to_string()))?;
        cdfs.push((name.clone(), compute_cdf(&series.magnitudes, &thresholds)?));
        boxes.push((name.clone(), boxplot_summary(&series.magnitudes)?));
        composite.push((
            name.clone(),
            composite_objective(&series, cfg.eval.composite_k1, cfg.eval.composite_k2)?,
        ));
        rows.push(row);
    }
    mkdir(out)?;
    write_text(
        &out.join("metrics.csv"),
        &metrics_csv(&rows, with_reference),
    )?;
    write_text(&out.join("cdf.csv"), &cdf_csv(&thresholds, &cdfs))?;
    write_text(&out.join("boxplot.csv"), &boxplot_csv(&boxes))?;
    let mut comp = String::from("algorithm,k1,k2,value\n");
    for (n, v) in &composite {
        comp.push_str(&format!(
            "{n},{},{},{v:.6}\n",
            cfg.eval.composite_k1, cfg.eval.composite_k2
        ));
    }
    write_text(&out.join("composite.csv"), &comp)?;
    Ok(Evaluation { rows, composite })
}

/// Fixed-width comparison table of an evaluation.
pub fn comparison_table(rows: &[MetricsRow]) -> String {
    let mut s = format!(
        "{:<18} {:>8} {:>8} {:>8} {:>8}\n",
        "algorithm", "RMSE", "STD", "MAX", "epochs"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<18} {:>8.3} {:>8.3} {:>8.3} {:>8}\n",
            r.algorithm, r.rmse, r.std, r.max, r.matched_epochs
        ));
    }
    let (a, b, c) = climbloc::eval::HARDWARE_REFERENCE;
    s.push_str(&format!(
        "{:<18} {a:>8.2} {b:>8.2} {c:>8.2} {:>8}\n",
        climbloc::eval::HARDWARE_REFERENCE_LABEL,
        "-"
    ));
    s
}

/// Sub-directories and files a pipeline run produces under its output root.
pub struct PipelineLayout {
    pub root: PathBuf,
}

impl PipelineLayout {
    pub fn sensor_data(&self) -> PathBuf {
        self.root.join("data/sensor-train")
    }
    pub fn fusion_data(&self) -> PathBuf {
        self.root.join("data/fusion-train")
    }
    pub fn eval_data(&self) -> PathBuf {
        self.root.join("data/eval")
    }
    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn trajectory(&self, a: Algorithm) -> PathBuf {
        self.root
            .join("trajectories")
            .join(format!("{}.jsonl", a.name()))
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).display().to_string()
}

/// Simulates three scenarios (sensor training, fusion training, evaluation),
/// trains the three networks in order, runs all six algorithms concurrently
/// and writes the report.
pub fn cmd_pipeline(cfg: &AppConfig, out: &Path) -> CliResult<(RunManifest, Evaluation)> {
    let l = PipelineLayout {
        root: out.to_path_buf(),
    };
    let seeds = &cfg.sim.training_seeds;
    cmd_simulate(cfg, Some(seeds.sensor_scenario), &l.sensor_data())?;
    cmd_simulate(cfg, Some(seeds.fusion_scenario), &l.fusion_data())?;
    cmd_simulate(cfg, None, &l.eval_data())?;

    let models = l.models();
    cmd_train(
        cfg,
        ModelKind::Uwb,
        &l.sensor_data(),
        &models.join(UWB_MODEL),
        None,
        None,
        None,
    )?;
    cmd_train(
        cfg,
        ModelKind::Baro,
        &l.sensor_data(),
        &models.join(BARO_MODEL),
        None,
        Some(cfg.nnet.seed + 1),
        None,
    )?;
    cmd_train(
        cfg,
        ModelKind::Fusion,
        &l.fusion_data(),
        &models.join(FUSION_MODEL),
        None,
        Some(cfg.nnet.seed + 2),
        None,
    )?;

    let results: Vec<CliResult<usize>> = std::thread::scope(|s| {
        let handles: Vec<_> = Algorithm::ALL
            .iter()
            .map(|&a| {
                let (data, models, traj) = (l.eval_data(), l.models(), l.trajectory(a));
                s.spawn(move || cmd_run(cfg, &data, &models, a, &traj))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("algorithm thread panicked"))
            .collect()
    });
    for r in results {
        r?;
    }

    let trajectories: Vec<PathBuf> = Algorithm::ALL.iter().map(|&a| l.trajectory(a)).collect();
    let eval = cmd_eval(
        cfg,
        &trajectories,
        &stream_path(&l.eval_data(), "truth"),
        &l.report(),
        true,
    )?;

    let mut m = RunManifest::new(cfg)
        .seed("sensor_scenario", seeds.sensor_scenario)
        .seed("fusion_scenario", seeds.fusion_scenario)
        .seed("eval_scenario", cfg.sim.scenario.seed)
        .seed("uwb_model", cfg.nnet.seed)
        .seed("baro_model", cfg.nnet.seed + 1)
        .seed("fusion_model", cfg.nnet.seed + 2);
    for (key, dir) in [
        ("sensor_scenario", l.sensor_data()),
        ("fusion_scenario", l.fusion_data()),
        ("eval_scenario", l.eval_data()),
    ] {
        m.file(key, rel(out, &dir.join("manifest.json")));
    }
    for (key, file) in [
        ("uwb_model", UWB_MODEL),
        ("baro_model", BARO_MODEL),
        ("fusion_model", FUSION_MODEL),
    ] {
        let p = models.join(file);
        m.file(key, rel(out, &p));
        m.file(&format!("{key}_loss"), rel(out, &loss_path(&p)));
    }
    for &a in &Algorithm::ALL {
        m.file(
            &format!("trajectory_{}", a.name()),
            rel(out, &l.trajectory(a)),
        );
    }
    m.file(
        "amfa_ratios",
        rel(out, &ratios_path(&l.trajectory(Algorithm::Amfa))),
    );
    for f in ["metrics.csv", "cdf.csv", "boxplot.csv", "composite.csv"] {
        m.file(f.trim_end_matches(".csv"), rel(out, &l.report().join(f)));
    }
    write_text(&out.join("config.json"), &(cfg.to_json() + "\n"))?;
    m.file("config", "config.json");
    m.verify(out)?;
    write_json(&out.join("manifest.json"), &m)?;
    Ok((m, eval))
}
