use mining::ContextSequence;
use numcore::{ParamStore, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use training::{
    curriculum_bounds, curriculum_weights, shuffle_context, Adam, CurriculumState, Ema, PlateauScheduler, RunConfig,
};

fn at(step: usize, k: usize) -> Vec<f64> {
    curriculum_weights(CurriculumState { step, period: 600 }, k)
}

#[test]
fn curriculum_reference_points() {
    assert_eq!(at(0, 10), vec![1.0; 10]);
    let mut end = vec![0.0; 9];
    end.push(1.0);
    assert_eq!(at(13 * 600, 10), end);
    assert_eq!(at(100 * 600, 10), end);
    let w = at(600, 10);
    assert!((w[0] - 0.8).abs() < 1e-12);
    assert!(w[1..].iter().all(|&x| x == 1.0));
    assert_eq!(at(599, 10), vec![1.0; 10]);
}

#[test]
fn curriculum_ramp_midway() {
    // L = 2, F = 7
    let w = at(7 * 600, 10);
    let expect = [0.0, 0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.0, 1.0];
    for (a, b) in w.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{w:?}");
    }
}

proptest! {
    #[test]
    fn curriculum_is_monotone_and_ends_at_one(step in 0usize..20_000, k in 2usize..25, period in 1usize..1000) {
        let s = CurriculumState { step, period };
        let w = curriculum_weights(s, k);
        let next = curriculum_weights(CurriculumState { step: step + 1, period }, k);
        prop_assert_eq!(w.len(), k);
        prop_assert_eq!(w[k - 1], 1.0);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for i in 0..k - 1 {
            prop_assert!(next[i] <= w[i]);
        }
        let (l, f) = curriculum_bounds(step, period, k);
        let (l2, f2) = curriculum_bounds(step + 1, period, k);
        prop_assert!(l < f && l2 >= l && f2 >= f);
    }
}

fn ctx(ids: &[&str]) -> ContextSequence {
    ContextSequence { pattern_id: "P".into(), molecule_ids: ids.iter().map(|s| s.to_string()).collect() }
}

#[test]
fn shuffle_basics() {
    let one = ctx(&["a"]);
    assert_eq!(shuffle_context(&one, &mut ChaCha8Rng::seed_from_u64(1)), one);
    let c = ctx(&["a", "b", "c", "d", "e", "f"]);
    let before = c.clone();
    let x = shuffle_context(&c, &mut ChaCha8Rng::seed_from_u64(9));
    let y = shuffle_context(&c, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(x, y);
    assert_eq!(c, before);
    let mut sorted = x.molecule_ids.clone();
    sorted.sort();
    assert_eq!(sorted, c.molecule_ids);
}

#[test]
fn shuffle_is_uniform_over_orders() {
    let c = ctx(&["a", "b", "c"]);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = std::collections::BTreeMap::new();
    let n = 10_000;
    for _ in 0..n {
        *counts.entry(shuffle_context(&c, &mut rng).molecule_ids).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 6);
    let expect = n as f64 / 6.0;
    let chi2: f64 = counts.values().map(|&o| (o as f64 - expect).powi(2) / expect).sum();
    // 5 degrees of freedom, p = 0.001
    assert!(chi2 < 20.515, "chi2 = {chi2}");
    for (order, &o) in &counts {
        let f = o as f64 / n as f64;
        assert!((f - 1.0 / 6.0).abs() <= 0.02, "{order:?}: {f}");
    }
}

fn store(vals: &[f64]) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.insert("a", Tensor::vector(vals.to_vec()));
    s
}

#[test]
fn ema_with_zero_decay_tracks_params() {
    let mut ema = Ema::new(&store(&[0.0, 0.0]), 0.0);
    for t in 1..5 {
        let p = store(&[t as f64, -2.0 * t as f64]);
        ema.update(&p);
        assert_eq!(ema.shadow, p);
    }
}

#[test]
fn ema_closed_form_on_constant_params() {
    let s0 = [4.0, -1.0];
    let p = [1.0, 3.0];
    let decay = 0.9;
    let mut ema = Ema::new(&store(&s0), decay);
    for t in 1..=50 {
        ema.update(&store(&p));
        let got = ema.shadow.get("a").unwrap().data();
        for i in 0..2 {
            let want = p[i] + decay.powi(t) * (s0[i] - p[i]);
            assert!((got[i] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn adam_first_step_is_signed_lr() {
    let mut p = store(&[1.0, 1.0, 1.0]);
    let mut adam = Adam::new(&p);
    adam.step(&mut p, &[Tensor::vector(vec![0.5, -3.0, 0.0])], 0.01);
    let got = p.get("a").unwrap().data();
    assert!((got[0] - 0.99).abs() < 1e-7);
    assert!((got[1] - 1.01).abs() < 1e-7);
    assert_eq!(got[2], 1.0);
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut p = store(&[5.0, -4.0]);
    let mut adam = Adam::new(&p);
    for _ in 0..3000 {
        let g: Vec<f64> = p.get("a").unwrap().data().iter().map(|x| 2.0 * (x - 1.0)).collect();
        adam.step(&mut p, &[Tensor::vector(g)], 0.01);
    }
    assert!(p.get("a").unwrap().data().iter().all(|x| (x - 1.0).abs() < 1e-3));
}

#[test]
fn plateau_trace() {
    let mut s = PlateauScheduler::new(1e-3, 100, 1e-5);
    let mut trace = vec![s.lr];
    let mut changes = Vec::new();
    for epoch in 0..600 {
        // improves until 0, then flat; one new best at epoch 150
        let metric = if epoch == 150 { 0.5 } else { 1.0 };
        let before = s.lr;
        let lr = s.observe(metric);
        if lr != before {
            trace.push(lr);
            changes.push(epoch);
        }
    }
    assert_eq!(changes, vec![100, 250]);
    assert_eq!(trace.len(), 3);
    for (a, b) in trace.iter().zip([1e-3, 1e-4, 1e-5]) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(s.lr, 1e-5);
}

#[test]
fn config_file_sections_and_defaults() {
    let cfg = RunConfig::from_toml(
        r#"
        [pretrain]
        lr = 1e-4
        epochs = 3
        warmup_steps = 10
        ema_decay = 0.999

        [icl]
        lr = 1e-3
        batch_sequences = 16
        period = 600
        patience_epochs = 100
        lr_floor = 1e-5

        [data]
        dataset = "data/qm9.jsonl"
        contexts = "data/contexts.jsonl"
        encodings = "data/enc.bin"
        "#,
    )
    .unwrap();
    assert_eq!(cfg.pretrain.epochs, 3);
    assert_eq!(cfg.icl.batch_sequences, 16);
    assert_eq!(cfg.model.input_dim, 768);
    assert_eq!(cfg.data.dataset.as_deref(), Some(std::path::Path::new("data/qm9.jsonl")));
    assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
}

#[test]
fn config_rejects_bad_values() {
    assert!(RunConfig::from_toml("[icl]\nlr = 1e-3\nlr_floor = 1e-2\n").is_err());
    assert!(RunConfig::from_toml("[icl]\nlr = 0.0\n").is_err());
    assert!(RunConfig::from_toml("[icl]\nlearning_rate = 1.0\n").is_err());
    assert!(RunConfig::from_toml("[pretrain]\nema_decay = 1.5\n").is_err());
}
