//! Step protocol checks on hand-built panels driven by a stub learner.

use cla_core::engine::{
    read_trace_jsonl, triangle_rows, write_trace_jsonl, ClaEngine, EngineConfig, StepTrace, ThresholdMode,
};
use cla_core::experiment::{run_baseline, run_engine, EngineRun};
use cla_core::learners::{Learner, LearnerSpec, ParamSnapshot};
use cla_core::panel::{sliding_window_at, step_time_id, CrossSection, GeneratorConfig, RegimeSpec, TrainingSet};
use cla_core::similarity::{SamplerConfig, Strategy};
use cla_core::{EntityId, FeatureMatrix, Panel, Result, TargetSeries, TimeId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Predicts the mean training target regardless of features.
struct MeanLearner;

impl Learner for MeanLearner {
    fn fit(&self, set: &TrainingSet, trained_at: &TimeId) -> Result<ParamSnapshot> {
        let mean = set.targets.iter().sum::<f64>() / set.len() as f64;
        Ok(ParamSnapshot::linear(mean, &vec![0.0; set.width()], Some(trained_at.clone())))
    }
}

const ENTITIES: usize = 20;

/// One feature centred on 0 (state A) or 5 (state B); targets exactly 0 or 1.
fn two_state_panel(steps: usize, in_b: impl Fn(usize) -> bool) -> (Panel, TargetSeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let entities: Vec<EntityId> = (0..ENTITIES).map(|i| EntityId(format!("e{i:02}"))).collect();
    let mut targets = TargetSeries::new(1).unwrap();
    let mut sections = Vec::new();
    for t in 0..steps {
        let (level, y) = if in_b(t) { (5.0, 1.0) } else { (0.0, 0.0) };
        let rows: Vec<Vec<f64>> = (0..ENTITIES).map(|_| vec![level + noise.sample(&mut rng)]).collect();
        for e in &entities {
            targets.insert(step_time_id(t), e.clone(), y).unwrap();
        }
        sections.push(CrossSection {
            time: step_time_id(t),
            entities: entities.clone(),
            values: FeatureMatrix::from_rows(&rows).unwrap(),
        });
    }
    (Panel::new(vec!["x".into()], sections).unwrap(), targets)
}

fn config(threshold: ThresholdMode) -> EngineConfig {
    EngineConfig {
        strategy: Strategy::Euclidean,
        sampler: SamplerConfig::exhaustive(),
        threshold,
        window: 1,
        ..EngineConfig::default()
    }
}

fn run(panel: &Panel, targets: &TargetSeries, threshold: ThresholdMode) -> EngineRun {
    run_engine(panel, targets, &MeanLearner, config(threshold)).unwrap()
}

fn assert_gate_sound(traces: &[StepTrace]) {
    for t in traces {
        let j = t.j_crit.unwrap_or(f64::INFINITY);
        let cue = t.base_error.is_some_and(|e| e > j);
        assert_eq!(t.remember_fired, cue, "step {}", t.step);
        assert_eq!(t.new_memory.is_some(), cue, "step {}", t.step);
    }
}

#[test]
fn single_spike_stores_the_pre_spike_learner() {
    // State B from cross-section 9 on: the forecast for cross-section 9 is the only miss,
    // and it becomes observable at step 10.
    let (panel, targets) = two_state_panel(30, |t| t >= 9);
    let r = run(&panel, &targets, ThresholdMode::Fixed { value: 0.5 });
    let traces = r.traces();
    assert_gate_sound(&traces);
    let spikes: Vec<usize> = traces.iter().filter(|t| t.base_error.is_some_and(|e| e > 0.5)).map(|t| t.step).collect();
    assert_eq!(spikes, vec![10]);
    let cols = r.memory.columns();
    assert_eq!(cols.len(), 1);
    assert_eq!(cols[0].created_at, step_time_id(10));
    assert_eq!(cols[0].params.training_time_id(), Some(&step_time_id(9)));
    // Trained on cross-section 8 only, all of whose targets are 0.
    assert_eq!(cols[0].params.values()[0], 0.0);
}

#[test]
fn two_spikes_store_two_columns_in_order() {
    let (panel, targets) = two_state_panel(30, |t| (9..20).contains(&t));
    let r = run(&panel, &targets, ThresholdMode::Fixed { value: 0.5 });
    assert_gate_sound(&r.traces());
    let created: Vec<TimeId> = r.memory.columns().iter().map(|c| c.created_at.clone()).collect();
    assert_eq!(created, vec![step_time_id(10), step_time_id(21)]);
    let ids: Vec<u64> = r.memory.columns().iter().map(|c| c.id).collect();
    assert!(ids[0] < ids[1]);
}

fn oracle_grid(errors: &[f64], n: usize) -> Vec<f64> {
    let lo = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

fn mean_cla_error(run: &EngineRun, targets: &TargetSeries, last_step: usize) -> f64 {
    let mut errs = Vec::new();
    for o in run.outputs.iter().filter(|o| o.step <= last_step) {
        let e: f64 = o
            .entities
            .iter()
            .zip(&o.forecast)
            .map(|(ent, f)| (f - targets.get(&o.time, ent).unwrap()).abs())
            .sum::<f64>()
            / o.entities.len() as f64;
        errs.push(e);
    }
    errs.iter().sum::<f64>() / errs.len() as f64
}

#[test]
fn learned_threshold_matches_exhaustive_grid_replay() {
    // One excursion to state B at cross-section 14: base errors are exactly zero
    // apart from two unit spikes observed at steps 15 and 16.
    let steps = 30;
    let (panel, targets) = two_state_panel(steps, |t| t == 14);
    let learned = run(&panel, &targets, ThresholdMode::Learned);
    assert_gate_sound(&learned.traces());

    let mut engine = ClaEngine::new(&panel, &targets, &MeanLearner, config(ThresholdMode::Learned)).unwrap();
    engine.run().unwrap();
    let j = engine.gate().j_crit();

    let base = run_baseline(&panel, &targets, &MeanLearner, &config(ThresholdMode::Learned)).unwrap();
    let last = steps - 2;
    let errors: Vec<f64> = base.traces().iter().filter_map(|t| t.base_error).collect();
    let noise_max = errors.iter().copied().filter(|e| *e < 0.5).fold(0.0, f64::max);
    let spike = errors.iter().copied().fold(0.0, f64::max);
    assert_eq!(errors.iter().filter(|e| **e > 0.5).count(), 2);

    let grid = oracle_grid(&errors, 20);
    let scores: Vec<f64> = grid
        .iter()
        .map(|&c| mean_cla_error(&run(&panel, &targets, ThresholdMode::Fixed { value: c }), &targets, last))
        .collect();
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let expected =
        grid.iter().zip(&scores).filter(|(_, s)| **s == best).map(|(c, _)| *c).fold(f64::NEG_INFINITY, f64::max);

    assert!((j - expected).abs() < 1e-12, "engine {j} oracle {expected}");
    assert!(noise_max < j && j < spike, "noise {noise_max} j {j} spike {spike}");
    // Remembering the spike must beat never remembering.
    assert!(best < *scores.last().unwrap());
}

#[test]
fn disabled_gate_is_the_base_learner_bit_for_bit() {
    let k = 4;
    let cfg = GeneratorConfig {
        regimes: vec![
            RegimeSpec {
                start: 0,
                label: "A".into(),
                weights: vec![0.05, -0.03, 0.02, 0.01],
                noise: 0.01,
                profile: None,
            },
            RegimeSpec {
                start: 50,
                label: "B".into(),
                weights: vec![-0.05, 0.03, -0.02, 0.04],
                noise: 0.01,
                profile: None,
            },
        ],
        entities: 25,
        features: k,
        seed: 8,
        steps: 106,
        horizon: 1,
        feature_noise: 1.0,
        lag_jitter: 0,
        require_recurrence: false,
    };
    let g = cfg.generate().unwrap();
    let spec = LearnerSpec { epochs: 60, ..LearnerSpec::feedforward(k, 3) };
    let engine_cfg = EngineConfig { threshold: ThresholdMode::Disabled, ..EngineConfig::default() };
    let r = run_engine(&g.panel, &g.targets, &spec, engine_cfg.clone()).unwrap();
    assert!(r.outputs.len() >= 100);
    assert!(r.memory.is_empty());
    for o in &r.outputs {
        let set = sliding_window_at(&g.panel, &g.targets, o.step, engine_cfg.window).unwrap();
        let snap = spec.fit(&set, &o.time).unwrap();
        let direct = snap.predict(&g.panel.section(o.step).values).unwrap();
        assert_eq!(o.forecast, direct, "step {}", o.step);
        assert_eq!(o.forecast, o.base_forecast);
        assert_eq!(o.trace.participants.len(), 1);
        assert_eq!(o.trace.participants[0].weight, 1.0);
    }
    let inf = run_engine(
        &g.panel,
        &g.targets,
        &spec,
        EngineConfig { threshold: ThresholdMode::Fixed { value: f64::INFINITY }, ..engine_cfg },
    )
    .unwrap();
    let a: Vec<&Vec<f64>> = inf.outputs.iter().map(|o| &o.forecast).collect();
    let b: Vec<&Vec<f64>> = r.outputs.iter().map(|o| &o.forecast).collect();
    assert_eq!(a, b);
}

#[test]
fn recorded_thresholds_reproduce_a_learned_run() {
    let (panel, targets) = two_state_panel(30, |t| (9..14).contains(&t) || t >= 22);
    let learned = run(&panel, &targets, ThresholdMode::Learned);
    let replayed = run(&panel, &targets, ThresholdMode::Recorded { thresholds: learned.thresholds.clone() });
    assert_eq!(learned.traces(), replayed.traces());
    assert_eq!(learned.memory, replayed.memory);
}

#[test]
fn triangle_reconstructs_from_trace_jsonl() {
    let (panel, targets) = two_state_panel(30, |t| (9..14).contains(&t) || t >= 22);
    let r = run(&panel, &targets, ThresholdMode::Fixed { value: 0.5 });
    let mut buf = Vec::new();
    write_trace_jsonl(&r.traces(), &mut buf).unwrap();
    let back = read_trace_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back, r.traces());

    let rows = triangle_rows(&back);
    let alive: usize = back.iter().map(|t| t.participants.iter().filter(|p| p.memory_id.is_some()).count()).sum();
    assert_eq!(rows.len(), alive);
    assert!(alive > 0);
    let mut i = 0;
    for t in &back {
        for p in t.participants.iter().filter(|p| p.memory_id.is_some()) {
            assert_eq!(rows[i].step, t.t);
            assert_eq!(Some(rows[i].memory_id), p.memory_id);
            assert_eq!(Some(&rows[i].created_at), p.created_at.as_ref());
            assert_eq!(rows[i].weight, p.weight);
            i += 1;
        }
        assert!((t.weight_sum() - 1.0).abs() < 1e-12);
    }
}
