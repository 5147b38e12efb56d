use std::fs;
use std::path::Path;

use magclimb::dsp::{preprocess as run_preprocess, write_windows_csv, PreprocessConfig, WindowManifest};
use magclimb::dynamics::{rod_gain_phase, simulate_response, RodModel, SignalFrame, SimScenario};
use magclimb::experiment::{
    compare_models as run_compare_models, compare_sensors as run_compare_sensors, generate_windows, split_by_group, window_set,
    ExperimentPlan,
};
use magclimb::models::{fit_model, ModelKind, TrainedModel, WindowSet};
use magclimb::quality::{magnitude_name, quality_report, write_level_table};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{sidecar, Recorder};
use crate::{CompareModelsArgs, EvaluateArgs, PlanArgs, PreprocessArgs, QualityArgs, RodArgs, SimulateArgs, TrainArgs};

/// Parse a JSON config. A run manifest is accepted in place of the config
/// it recorded.
fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |e: serde_json::Error| CliError::Input(format!("{}: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    if let (Some(config), Some(_)) = (value.get("config"), value.get("tool_version")) {
        // Model commands record `{model, plan}`.
        let config = config.get("plan").unwrap_or(config);
        return serde_json::from_value(config.clone())
            .map_err(|e| CliError::Input(format!("{}: recorded config: {e}", path.display())));
    }
    serde_json::from_str(&text).map_err(bad)
}

fn write_text(rec: &mut Recorder, path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::io(path, e))?;
    rec.write(path, &buf)
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut scn: SimScenario = match &a.scenario {
        Some(p) => read_config(p)?,
        None => SimScenario::default(),
    };
    if let Some(s) = a.seed {
        scn.seed = s;
    }
    if let Some(n) = a.plates {
        scn.adhesion.plate_count = n;
    }
    if let Some(l) = a.level {
        scn.excitation_level = l;
    }
    if let Some(d) = a.duration_s {
        scn.duration_s = d;
    }
    let mut rec = Recorder::new("simulate", &scn)?;
    rec.seed("scenario", scn.seed);
    let frame = simulate_response(&scn)?;
    let mut buf = Vec::new();
    frame.write_csv(&mut buf)?;
    rec.write(&a.out, &buf)?;
    rec.finish(&sidecar(&a.out))?;
    eprintln!("{} samples x {} channels -> {}", frame.len(), frame.channels.len(), a.out.display());
    Ok(())
}

pub fn rod_response(a: &RodArgs) -> Result<(), CliError> {
    let rod: RodModel = match &a.rod {
        Some(p) => read_config(p)?,
        None => RodModel::default(),
    };
    if !(a.omega_min > 0.0 && a.omega_max > a.omega_min && a.omega_max.is_finite()) || a.points < 2 {
        return Err(CliError::Input(format!(
            "invalid range: need 0 < omega_min < omega_max and at least 2 points (got {}..{}, {})",
            a.omega_min, a.omega_max, a.points
        )));
    }
    let rec_cfg = serde_json::json!({ "rod": rod, "omega_min": a.omega_min, "omega_max": a.omega_max, "points": a.points });
    let mut rec = Recorder::new("rod-response", &rec_cfg)?;
    let ratio = (a.omega_max / a.omega_min).ln();
    let mut csv = String::from("omega_rad_s,freq_hz,gain,phase_rad\n");
    for i in 0..a.points {
        let w = a.omega_min * (ratio * i as f64 / (a.points - 1) as f64).exp();
        let (g, p) = rod_gain_phase(w, &rod)?;
        csv.push_str(&format!("{w},{},{g},{p}\n", w / std::f64::consts::TAU));
    }
    rec.write(&a.out, csv.as_bytes())?;
    rec.finish(&sidecar(&a.out))?;
    Ok(())
}

fn read_frame(path: &Path) -> Result<SignalFrame, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    SignalFrame::read_csv(std::io::BufReader::new(file)).map_err(|e| CliError::io(path, e))
}

pub fn quality(a: &QualityArgs) -> Result<(), CliError> {
    let frame = read_frame(&a.input)?;
    let mut rec = Recorder::new("quality", &serde_json::json!({ "input": a.input }))?;
    rec.record(&a.input)?;
    let report = quality_report(&frame)?;
    rec.write_json(&a.out, &report)?;
    rec.finish(&sidecar(&a.out))?;
    for c in &report.channels {
        if !c.degenerate.is_empty() {
            eprintln!("{}: {}", c.channel, c.degenerate.join("; "));
        }
    }
    Ok(())
}

pub fn preprocess(a: &PreprocessArgs) -> Result<(), CliError> {
    let mut cfg: PreprocessConfig = match &a.config {
        Some(p) => read_config(p)?,
        None => PreprocessConfig::default(),
    };
    if let Some(c) = a.cutoff_hz {
        cfg.cutoff_hz = c;
    }
    if let Some(l) = a.window_len {
        cfg.window_len = l;
    }
    if let Some(s) = a.stride {
        cfg.stride = s;
    }
    let frame = read_frame(&a.input)?;
    let mut rec = Recorder::new("preprocess", &serde_json::json!({ "sensor": a.sensor, "preprocess": cfg }))?;
    rec.record(&a.input)?;
    let axes = cfg.axes.pick(a.sensor.axes());
    let pre = run_preprocess(&frame, &axes, &cfg)?;
    let mut buf = Vec::new();
    let rows = pre.windows.iter().enumerate().map(|(i, w)| (vec![i.to_string()], w.clone()));
    let n = write_windows_csv(&mut buf, &["window"], rows, cfg.window_len)?;
    rec.write(&a.out, &buf)?;
    let manifest = WindowManifest {
        window_len: cfg.window_len,
        stride: cfg.stride,
        filter: cfg.filter_spec(frame.sample_rate_hz),
        preprocess: cfg,
        norm_params: vec![pre.params],
        rows: n,
    };
    rec.write_json(&a.out.with_extension("json"), &manifest)?;
    rec.finish(&sidecar(&a.out))?;
    if pre.degenerate {
        eprintln!("warning: constant record; normalised to zeros");
    }
    eprintln!("{n} windows -> {}", a.out.display());
    Ok(())
}

/// Built-in or file plan with flag overrides applied, validated.
fn load_plan(a: &PlanArgs) -> Result<ExperimentPlan, CliError> {
    let mut plan: ExperimentPlan = match &a.plan {
        Some(p) => read_config(p)?,
        None => ExperimentPlan::default(),
    };
    if let Some(s) = a.seed {
        plan.master_seed = s;
    }
    if let Some(e) = a.epochs {
        plan.models.train.epochs = e;
    }
    if let Some(p) = a.pool_window {
        plan.models.icnn_lstm.pool_window = p;
    }
    if let Some(c) = a.cutoff_hz {
        plan.preprocess.cutoff_hz = c;
    }
    if let Some(l) = a.level {
        plan.model_level = l;
    }
    if let Some(s) = a.sensor {
        plan.model_sensor = s;
    }
    plan.validate()?;
    if !plan.excitation_levels.contains(&plan.model_level) {
        return Err(CliError::Input(format!("level {} is not in the plan", plan.model_level)));
    }
    out_dir(&a.out_dir)?;
    Ok(plan)
}

/// The plan's single-level dataset split by run, as `train` and `evaluate` see it.
fn plan_split(plan: &ExperimentPlan) -> Result<(WindowSet, WindowSet), CliError> {
    let data = generate_windows(plan, &[plan.model_level], &[plan.model_sensor])?;
    let set = window_set(&data, plan.model_angle_deg, plan.model_level, plan.model_sensor);
    let (tr, te) = split_by_group(&set.labels, &set.groups, plan.split_ratio, plan.master_seed)?;
    Ok((set.subset(&tr), set.subset(&te)))
}

#[derive(Serialize)]
struct ModelRun<'a> {
    model: ModelKind,
    plan: &'a ExperimentPlan,
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let plan = load_plan(&a.plan)?;
    let mut rec = Recorder::new("train", &ModelRun { model: a.model, plan: &plan })?;
    rec.seed("master", plan.master_seed);
    let (train, test) = plan_split(&plan)?;
    let model = fit_model(a.model, &train, &plan.models, plan.master_seed)?;
    let eval = model.evaluate(&test)?;

    let dir = &a.plan.out_dir;
    let stem = dir.join("model");
    model.save(&stem)?;
    rec.record(&stem.with_extension("json"))?;
    if a.model.is_neural() {
        rec.record(&stem.with_extension("bin"))?;
    }
    if let Some(h) = model.history() {
        rec.write_json(&dir.join("history.json"), h)?;
    }
    rec.write_json(&dir.join("eval.json"), &eval)?;
    let table = eval.to_table();
    rec.write(&dir.join("confusion.txt"), table.as_bytes())?;
    rec.finish(&dir.join("manifest.json"))?;
    println!("{} trained on {} windows, tested on {}", a.model, train.len(), test.len());
    print!("{table}");
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let plan = load_plan(&a.plan)?;
    let mut rec = Recorder::new("evaluate", &ModelRun { model: a.model, plan: &plan })?;
    rec.seed("master", plan.master_seed);
    rec.record(&a.model_file)?;
    let model = TrainedModel::load(a.model, &a.model_file)?;
    let (_, test) = plan_split(&plan)?;
    let eval = model.evaluate(&test)?;
    let dir = &a.plan.out_dir;
    rec.write_json(&dir.join("eval.json"), &eval)?;
    let table = eval.to_table();
    rec.write(&dir.join("confusion.txt"), table.as_bytes())?;
    rec.finish(&dir.join("manifest.json"))?;
    print!("{table}");
    Ok(())
}

pub fn compare_models(a: &CompareModelsArgs) -> Result<(), CliError> {
    let mut plan = load_plan(&a.plan)?;
    if let Some(r) = a.runs {
        plan.runs = r;
        plan.validate()?;
    }
    let kinds = if a.models.is_empty() { ModelKind::ALL.to_vec() } else { a.models.clone() };
    let mut rec = Recorder::new("compare-models", &serde_json::json!({ "models": kinds, "plan": plan }))?;
    rec.seed("master", plan.master_seed);
    let report = run_compare_models(&plan, &kinds)?;
    let dir = &a.plan.out_dir;
    write_text(&mut rec, &dir.join("model_runs.csv"), |b| report.write_csv(b))?;
    rec.write_json(&dir.join("model_comparison.json"), &report)?;
    rec.finish(&dir.join("manifest.json"))?;
    println!("level {} {} sensor, {} train / {} test windows", report.level, report.sensor, report.train_windows, report.test_windows);
    for s in &report.summaries {
        println!("{:<10} mean {:.4}  std {:.4}", s.model.name(), s.mean_accuracy, s.std_accuracy);
    }
    Ok(())
}

pub fn compare_sensors(a: &PlanArgs) -> Result<(), CliError> {
    let plan = load_plan(a)?;
    let mut rec = Recorder::new("compare-sensors", &plan)?;
    rec.seed("master", plan.master_seed);
    let report = run_compare_sensors(&plan)?;
    write_text(&mut rec, &a.out_dir.join("sensor_accuracy.csv"), |b| report.write_accuracy_csv(b))?;
    let channels: Vec<String> = magclimb::dynamics::SensorKind::ALL.iter().map(|&s| magnitude_name(s)).collect();
    let names: Vec<&str> = channels.iter().map(String::as_str).collect();
    write_text(&mut rec, &a.out_dir.join("quality_by_level.csv"), |b| write_level_table(b, &report.quality, &names))?;
    rec.write_json(&a.out_dir.join("sensor_comparison.json"), &report)?;
    rec.finish(&a.out_dir.join("manifest.json"))?;
    for c in &report.cells {
        println!("level {} {:<4} accuracy {:.4}", c.level, c.sensor.name(), c.accuracy);
    }
    Ok(())
}
