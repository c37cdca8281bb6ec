//! Model validation and document round-trips.

use plateau::geometry::KdPartition;
use plateau::model::{
    load_model, save_model, ActionEntry, DiscreteDist, HybridMdp, Outcome, OutcomeKind,
    OutcomeSet,
};
use plateau::pwlc::PwlcSet;
use plateau::rover::{default_spec, generate, RewardVariant};

fn minimal_model() -> HybridMdp {
    let entry = ActionEntry {
        reward: KdPartition::from_payload(1, PwlcSet::zero(1)),
        discrete: KdPartition::from_payload(1, DiscreteDist::delta(1, 0)),
        continuous: vec![Some(KdPartition::from_payload(
            1,
            OutcomeSet::relative([(vec![0.0], 1.0)]),
        ))],
    };
    HybridMdp::new(
        1,
        vec!["s0".into()],
        vec!["a0".into()],
        1,
        0.0,
        vec![vec![Some(entry)]],
    )
}

#[test]
fn well_formed_model_has_no_violations() {
    assert!(minimal_model().validate().is_empty());
}

#[test]
fn bad_probability_sum_is_reported_with_value() {
    let entry = ActionEntry {
        reward: KdPartition::from_payload(1, PwlcSet::zero(1)),
        discrete: KdPartition::from_payload(1, DiscreteDist::delta(1, 0)),
        continuous: vec![Some(KdPartition::from_payload(
            1,
            OutcomeSet::relative([(vec![0.0], 0.2), (vec![-0.1], 0.7)]),
        ))],
    };
    let m = HybridMdp::new(
        1,
        vec!["s0".into()],
        vec!["a0".into()],
        1,
        0.0,
        vec![vec![Some(entry)]],
    );
    let violations = m.validate();
    assert_eq!(violations.len(), 1);
    assert!(violations[0].message.contains("sum to 0.9"), "{violations:?}");
}

#[test]
fn absolute_target_outside_cube_is_reported() {
    let entry = ActionEntry {
        reward: KdPartition::from_payload(2, PwlcSet::zero(2)),
        discrete: KdPartition::from_payload(2, DiscreteDist::delta(1, 0)),
        continuous: vec![Some(KdPartition::from_payload(
            2,
            OutcomeSet {
                outcomes: vec![Outcome {
                    kind: OutcomeKind::Absolute,
                    target: vec![1.5, 0.2],
                    prob: 1.0,
                }],
            },
        ))],
    };
    let m = HybridMdp::new(
        2,
        vec!["s0".into()],
        vec!["a0".into()],
        1,
        0.0,
        vec![vec![Some(entry)]],
    );
    let violations = m.validate();
    assert_eq!(violations.len(), 1);
    assert!(violations[0].message.contains("out of range"), "{violations:?}");
}

#[test]
fn minimal_document_loads() {
    let text = r#"{
        "dims": 1,
        "discrete_states": ["s0"],
        "actions": ["a0"],
        "horizon": 2,
        "entries": [{
            "state": "s0",
            "action": "a0",
            "reward": [{"rect": {"low": [0.0], "high": [1.0]},
                        "linear_fns": [{"coeffs": [0.0], "offset": 0.0}]}],
            "discrete_transition": [{"rect": {"low": [0.0], "high": [1.0]},
                                     "successors": {"s0": 1.0}}],
            "continuous": {"s0": [{"rect": {"low": [0.0], "high": [1.0]},
                                   "outcomes": [{"kind": "relative",
                                                 "target": [0.0],
                                                 "prob": 1.0}]}]}
        }]
    }"#;
    let m = load_model(text).unwrap();
    assert_eq!(m.dims(), 1);
    assert_eq!(m.horizon(), 2);
    assert!(m.validate().is_empty());
}

#[test]
fn missing_continuous_conditional_names_the_successor() {
    let text = r#"{
        "dims": 1,
        "discrete_states": ["s0", "s1"],
        "actions": ["a0"],
        "horizon": 1,
        "entries": [{
            "state": "s0",
            "action": "a0",
            "reward": [{"rect": {"low": [0.0], "high": [1.0]},
                        "linear_fns": [{"coeffs": [0.0], "offset": 0.0}]}],
            "discrete_transition": [{"rect": {"low": [0.0], "high": [1.0]},
                                     "successors": {"s1": 1.0}}],
            "continuous": {}
        },{
            "state": "s1",
            "action": "a0",
            "reward": [{"rect": {"low": [0.0], "high": [1.0]},
                        "linear_fns": [{"coeffs": [0.0], "offset": 0.0}]}],
            "discrete_transition": [{"rect": {"low": [0.0], "high": [1.0]},
                                     "successors": {"s1": 1.0}}],
            "continuous": {"s1": [{"rect": {"low": [0.0], "high": [1.0]},
                                   "outcomes": [{"kind": "relative",
                                                 "target": [0.0],
                                                 "prob": 1.0}]}]}
        }]
    }"#;
    let err = load_model(text).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("s1") && message.contains("no continuous conditional"), "{message}");
}

#[test]
fn parse_errors_carry_location() {
    let err = load_model("{ not json").unwrap_err();
    assert!(err.to_string().contains("line"), "{err}");
}

#[test]
fn gap_in_partition_is_rejected() {
    let text = r#"{
        "dims": 1,
        "discrete_states": ["s0"],
        "actions": ["a0"],
        "horizon": 1,
        "entries": [{
            "state": "s0",
            "action": "a0",
            "reward": [{"rect": {"low": [0.0], "high": [0.5]},
                        "linear_fns": [{"coeffs": [0.0], "offset": 0.0}]}],
            "discrete_transition": [{"rect": {"low": [0.0], "high": [1.0]},
                                     "successors": {"s0": 1.0}}],
            "continuous": {"s0": [{"rect": {"low": [0.0], "high": [1.0]},
                                   "outcomes": [{"kind": "relative",
                                                 "target": [0.0],
                                                 "prob": 1.0}]}]}
        }]
    }"#;
    let err = load_model(text).unwrap_err();
    assert!(err.to_string().contains("gap"), "{err}");
}

#[test]
fn rover_document_round_trips_semantically() {
    let m = generate(&default_spec(2, 3, RewardVariant::Pwlc)).unwrap();
    let text = save_model(&m);
    let loaded = load_model(&text).unwrap();
    assert!(loaded.validate().is_empty());
    assert_eq!(loaded.states(), m.states());
    assert_eq!(loaded.actions(), m.actions());
    assert_eq!(loaded.horizon(), m.horizon());
    assert_eq!(loaded.out_of_bounds_value(), m.out_of_bounds_value());

    // The rebuilt trees may order leaves differently; compare the
    // models pointwise instead.
    let mut r = plateau::testkit::rng(8);
    for s in 0..m.num_states() {
        let applicable: Vec<usize> = m.applicable(s).map(|(a, _)| a).collect();
        let loaded_applicable: Vec<usize> = loaded.applicable(s).map(|(a, _)| a).collect();
        assert_eq!(applicable, loaded_applicable);
        for &a in &applicable {
            let (ea, eb) = (m.entry(s, a).unwrap(), loaded.entry(s, a).unwrap());
            for _ in 0..500 {
                let x = plateau::testkit::random_point(2, &mut r);
                assert_eq!(
                    ea.reward.locate(&x).unwrap().payload,
                    eb.reward.locate(&x).unwrap().payload
                );
                assert_eq!(
                    ea.discrete.locate(&x).unwrap().payload,
                    eb.discrete.locate(&x).unwrap().payload
                );
                for sp in 0..m.num_states() {
                    match (&ea.continuous[sp], &eb.continuous[sp]) {
                        (None, None) => {}
                        (Some(ca), Some(cb)) => {
                            assert_eq!(
                                ca.locate(&x).unwrap().payload,
                                cb.locate(&x).unwrap().payload
                            );
                        }
                        _ => panic!("conditional presence differs for successor {sp}"),
                    }
                }
            }
        }
    }
}
