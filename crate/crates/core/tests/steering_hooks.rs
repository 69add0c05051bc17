use actadd_core::steering::{self, ContrastPair, SteeringSpec};
use actadd_core::{Engine, HookSet};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const WORDS: &[&str] = &["Love", "Hate", "weddings", "cats", "Anger", "Calm", "the sea", "a b c", "x"];

#[test]
fn resume_equivalence_over_random_specs() {
    let e = Engine::tiny(11);
    let cfg = e.model.config.clone();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let prompt = e.encode_prompt("I went up to my friend and said hello");
    for _ in 0..10 {
        let pair = ContrastPair::new(
            WORDS[rng.gen_range(0..WORDS.len())],
            WORDS[rng.gen_range(0..WORDS.len())],
        )
        .unwrap();
        let mut spec = SteeringSpec::new(pair, rng.gen_range(0..cfg.n_layers), rng.gen_range(-20.0..20.0));
        spec.alignment = rng.gen_range(1..4);
        let v = steering::build_steering_vector(&e, &spec).unwrap();
        let hooks = v.hooks(prompt.len());
        let steered = e.model.forward(&prompt, &hooks).unwrap();

        let clean = e.model.forward(&prompt, &HookSet::new().capture(v.layer)).unwrap();
        let mut stream = clean.snapshot(v.layer).unwrap().activations.clone();
        for j in 1..v.rows() {
            let pos = v.alignment - 1 + j;
            for (s, d) in stream.row_mut(pos).iter_mut().zip(v.delta.row(j)) {
                *s += d;
            }
        }
        let resumed = e.model.forward_from(v.layer, stream, &HookSet::new()).unwrap();
        for (a, b) in steered.logits.data.iter().zip(&resumed.logits.data) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b} for {spec:?}");
        }
        if !v.is_zero() {
            assert_eq!(steered.modified_positions, v.modified_positions().collect::<Vec<_>>());
        }
    }
}

#[test]
fn row_zero_is_zero_at_every_layer() {
    let e = Engine::tiny(12);
    for layer in 0..e.model.config.n_layers {
        let spec = SteeringSpec::new(ContrastPair::new("weddings", " ").unwrap(), layer, 1.0);
        let v = steering::build_steering_vector(&e, &spec).unwrap();
        assert!(v.delta.row_is_zero(0));
        assert!(!v.is_zero());
        assert!(v.delta.data.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn linearity_in_coefficient() {
    let e = Engine::tiny(13);
    let pair = ContrastPair::new("Anger", "Calm").unwrap();
    let unit = steering::build_steering_vector(&e, &SteeringSpec::new(pair.clone(), 2, 1.0)).unwrap();
    for c in [0.0f32, -1.0, 3.0, 10.0, 0.37] {
        let v = steering::build_steering_vector(&e, &SteeringSpec::new(pair.clone(), 2, c)).unwrap();
        assert_eq!(v.delta, steering::scale(&unit, c).delta);
    }
    let ten = steering::scale(&unit, 10.0);
    for (a, b) in unit.norms().iter().zip(ten.norms()) {
        assert!((b - 10.0 * a).abs() <= 1e-5 * b.max(1e-12));
    }
    assert_eq!(steering::scale(&unit, 1.0).delta, unit.delta);
}

#[test]
fn zero_vector_leaves_logits_bit_identical() {
    let e = Engine::tiny(14);
    let prompt = e.encode_prompt("abcdefgh");
    let base = e.model.forward(&prompt, &HookSet::new()).unwrap();
    let v = steering::build_steering_vector(
        &e,
        &SteeringSpec::new(ContrastPair::new("Anger", "Calm").unwrap(), 1, 0.0),
    )
    .unwrap();
    let out = e.model.forward(&prompt, &v.hooks(prompt.len())).unwrap();
    assert_eq!(base.logits, out.logits);
}

#[test]
fn export_and_import_through_a_file() {
    let e = Engine::tiny(15);
    let mut spec = SteeringSpec::new(ContrastPair::new("Anger", "Calm").unwrap(), 3, 5.0);
    spec.dim_cutoff = Some(8);
    let v = steering::build_steering_vector(&e, &spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anger.aawf");
    v.export(&path).unwrap();
    let back = steering::SteeringVector::import(&path).unwrap();
    assert_eq!(back, v);
    assert!(back.delta.row(2)[8..].iter().all(|&x| x == 0.0));
}
