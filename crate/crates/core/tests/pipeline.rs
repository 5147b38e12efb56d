use std::collections::BTreeSet;

use magclimb::dsp::{preprocess, PreprocessConfig};
use magclimb::dynamics::{simulate_response, SensorKind, SignalFrame, SimScenario};
use magclimb::experiment::{generate_windows, split_by_group, window_set, ExperimentPlan};
use magclimb::models::{fit_model, ModelConfigs, ModelKind, TrainedModel};
use magclimb::quality::{magnitude_name, quality_report};

fn small_plan() -> ExperimentPlan {
    ExperimentPlan {
        wall_angles_deg: vec![55.0],
        excitation_levels: vec![3],
        windows_per_class: 24,
        windows_per_run: 4,
        ..Default::default()
    }
}

fn small_models() -> ModelConfigs {
    serde_json::from_value(serde_json::json!({
        "icnn_lstm": {"filters": 4, "lstm_hidden": 4},
        "sequence": {"hidden": 4, "dense": 4},
        "bp": {"hidden": 8},
        "forest": {"trees": 10},
        "train": {"epochs": 3, "patience": 3}
    }))
    .unwrap()
}

#[test]
fn simulation_round_trips_through_csv() {
    let scn = SimScenario { duration_s: 3.0, excitation_level: 2, seed: 4, ..Default::default() };
    let frame = simulate_response(&scn).unwrap();
    assert_eq!(frame.len(), 300);
    let mut buf = Vec::new();
    frame.write_csv(&mut buf).unwrap();
    let back = SignalFrame::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.channel_names().collect::<Vec<_>>(), frame.channel_names().collect::<Vec<_>>());
    for name in frame.channel_names() {
        let (a, b) = (frame.channel(name).unwrap(), back.channel(name).unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0)));
    }
}

#[test]
fn seeds_separate_runs() {
    let scn = SimScenario { duration_s: 2.0, ..Default::default() };
    let a = simulate_response(&scn).unwrap();
    assert_eq!(a, simulate_response(&scn).unwrap());
    let b = simulate_response(&SimScenario { seed: 1, ..scn }).unwrap();
    assert_ne!(a, b);
}

#[test]
fn rod_channel_carries_more_motion_under_load() {
    let std_at = |level| {
        let scn = SimScenario { duration_s: 20.0, excitation_level: level, seed: 9, ..Default::default() };
        let report = quality_report(&simulate_response(&scn).unwrap()).unwrap();
        report.channel(&magnitude_name(SensorKind::Rod)).unwrap().std.unwrap()
    };
    assert!(std_at(3) > 2.0 * std_at(0));
}

#[test]
fn preprocessing_yields_unit_range_windows() {
    let scn = SimScenario { duration_s: 8.0, excitation_level: 1, ..Default::default() };
    let frame = simulate_response(&scn).unwrap();
    let cfg = PreprocessConfig::default();
    let pre = preprocess(&frame, &SensorKind::Rod.axes(), &cfg).unwrap();
    // (800 - 100 settle - 128) / 64 + 1
    assert_eq!(pre.windows.len(), 9);
    assert!(!pre.degenerate);
    for w in &pre.windows {
        assert_eq!(w.len(), cfg.window_len);
        assert!(w.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn split_keeps_runs_whole() {
    let plan = small_plan();
    let data = generate_windows(&plan, &[3], &[SensorKind::Rod]).unwrap();
    let set = window_set(&data, 55.0, 3, SensorKind::Rod);
    assert_eq!(set.len(), 72);
    let (tr, te) = split_by_group(&set.labels, &set.groups, 0.7, 1).unwrap();
    assert_eq!(tr.len() + te.len(), 72);
    let g_tr: BTreeSet<u64> = tr.iter().map(|&i| set.groups[i]).collect();
    let g_te: BTreeSet<u64> = te.iter().map(|&i| set.groups[i]).collect();
    assert!(g_tr.is_disjoint(&g_te));
    for c in 0..3 {
        assert!(te.iter().any(|&i| set.labels[i] == c));
    }
}

#[test]
fn every_model_trains_saves_and_reloads() {
    let plan = small_plan();
    let data = generate_windows(&plan, &[3], &[SensorKind::Rod]).unwrap();
    let set = window_set(&data, 55.0, 3, SensorKind::Rod);
    let (tr, te) = split_by_group(&set.labels, &set.groups, 0.7, 0).unwrap();
    let (train, test) = (set.subset(&tr), set.subset(&te));
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_models();
    for kind in ModelKind::ALL {
        let model = fit_model(kind, &train, &cfg, 3).unwrap();
        let report = model.evaluate(&test).unwrap();
        assert_eq!(report.total, test.len());
        assert_eq!(report.confusion.iter().flatten().sum::<usize>(), test.len());
        let stem = dir.path().join(kind.to_string());
        model.save(&stem).unwrap();
        let back = TrainedModel::load(kind, &stem.with_extension("json")).unwrap();
        for w in &test.windows {
            assert_eq!(model.predict(w).unwrap(), back.predict(w).unwrap(), "{kind}");
        }
    }
}
