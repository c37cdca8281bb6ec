//! Rover generator checks (including the independent error-function
//! series oracle for the Gaussian discretization) and Monte-Carlo
//! simulator exactness on deterministic models.

use plateau::geometry::KdPartition;
use plateau::mc::{simulate, RolloutConfig};
use plateau::model::{ActionEntry, DiscreteDist, HybridMdp, OutcomeKind, OutcomeSet};
use plateau::pwlc::PwlcSet;
use plateau::rover::{default_spec, discretize_gaussian, generate, RewardVariant};
use plateau::solver::{extract_policy, value_iteration, SolveOptions};

/// Maclaurin series for erf, independent of the statrs implementation
/// the generator uses. Converges comfortably for |z| <= 3.
fn erf_series(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    for n in 1..=120 {
        let n = n as f64;
        term *= -z * z / n;
        let contribution = term / (2.0 * n + 1.0);
        sum += contribution;
        if contribution.abs() < 1e-18 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn cdf_series(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

#[test]
fn two_buckets_split_symmetrically() {
    let out = discretize_gaussian(0.3, 0.04, 2).unwrap();
    assert_eq!(out.len(), 2);
    assert!((out[0].0 - (0.3 - 1.5 * 0.04)).abs() < 1e-12);
    assert!((out[1].0 - (0.3 + 1.5 * 0.04)).abs() < 1e-12);
    assert!((out[0].1 - 0.5).abs() < 1e-12);
    assert!((out[1].1 - 0.5).abs() < 1e-12);
}

#[test]
fn bucket_masses_match_series_oracle() {
    let (mean, std, resolution) = (0.1, 0.02, 5);
    let out = discretize_gaussian(mean, std, resolution).unwrap();
    let total = cdf_series(3.0) - cdf_series(-3.0);
    let width = 6.0 * std / resolution as f64;
    let mut sum = 0.0;
    for (i, &(delta, prob)) in out.iter().enumerate() {
        let b0 = mean - 3.0 * std + i as f64 * width;
        let expected =
            (cdf_series((b0 + width - mean) / std) - cdf_series((b0 - mean) / std)) / total;
        assert!((prob - expected).abs() < 1e-10, "bucket {i}");
        assert!((delta - (b0 + 0.5 * width)).abs() < 1e-12);
        sum += prob;
    }
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn tiny_std_concentrates_consumption_at_the_mean() {
    // The truncated-support rule is scale invariant, so bucket masses
    // do not change with std; concentration shows up as every outcome
    // collapsing onto the mean.
    let out = discretize_gaussian(0.2, 1e-6, 3).unwrap();
    for &(delta, _) in &out {
        assert!((delta - 0.2).abs() <= 3e-6);
    }
    let middle = out[1].1;
    assert!(middle > out[0].1 && middle > out[2].1);
}

#[test]
fn rejects_bad_parameters() {
    assert!(discretize_gaussian(0.1, 0.0, 4).is_err());
    assert!(discretize_gaussian(0.1, -0.1, 4).is_err());
    assert!(discretize_gaussian(0.1, 0.02, 1).is_err());
    assert!(discretize_gaussian(f64::NAN, 0.02, 4).is_err());
}

#[test]
fn finer_resolution_preserves_mean_consumption() {
    let (mean, std) = (0.15, 0.03);
    let mut previous: Option<f64> = None;
    for resolution in [2usize, 4, 8, 16, 32] {
        let out = discretize_gaussian(mean, std, resolution).unwrap();
        let avg: f64 = out.iter().map(|(d, p)| d * p).sum();
        let bucket = 6.0 * std / resolution as f64;
        assert!((avg - mean).abs() <= bucket, "resolution {resolution}");
        if let Some(prev) = previous {
            assert!((avg - prev).abs() <= bucket);
        }
        previous = Some(avg);
    }
}

#[test]
fn default_specs_generate_valid_models() {
    for resources in 1..=3usize {
        for variant in [RewardVariant::Pwc, RewardVariant::Pwlc] {
            let spec = default_spec(resources, 4, variant);
            assert_eq!(spec.stages.len(), 11);
            let m = generate(&spec).unwrap();
            assert!(m.validate().is_empty());
            // Eleven plan stages plus the terminal failure state.
            assert_eq!(m.num_states(), 12);
            assert!(m.actions().iter().any(|a| a == "wait"));
        }
    }
}

#[test]
fn resolution_two_gives_two_outcomes_per_resource() {
    let m = generate(&default_spec(1, 2, RewardVariant::Pwc)).unwrap();
    let s = m.state_index("start").unwrap();
    let a = m.action_index("approach").unwrap();
    let entry = m.entry(s, a).unwrap();
    let to = m.state_index("approached").unwrap();
    let cont = entry.continuous[to].as_ref().unwrap();
    for leaf in cont.leaves() {
        if leaf.payload.outcomes.len() > 1 {
            assert_eq!(leaf.payload.outcomes.len(), 2);
            assert_eq!(leaf.payload.kind(), Some(OutcomeKind::Relative));
            // Consumption shifts are negative.
            assert!(leaf.payload.outcomes.iter().all(|o| o.target[0] < 0.0));
        }
    }
}

#[test]
fn three_resources_take_the_product_discretization_up_to_the_cap() {
    // 3 buckets per resource, 27 joint outcomes, no cap hit.
    let mut spec = default_spec(3, 3, RewardVariant::Pwc);
    spec.max_outcomes = Some(64);
    let m = generate(&spec).unwrap();
    let s = m.state_index("start").unwrap();
    let a = m.action_index("approach").unwrap();
    let to = m.state_index("approached").unwrap();
    let cont = m.entry(s, a).unwrap().continuous[to].as_ref().unwrap();
    let max = cont.leaves().map(|l| l.payload.outcomes.len()).max().unwrap();
    assert_eq!(max, 27);

    // Requesting 5 buckets would be 125 > 64; coarsened to 4^3 = 64.
    let mut spec = default_spec(3, 5, RewardVariant::Pwc);
    spec.max_outcomes = Some(64);
    let m = generate(&spec).unwrap();
    let cont = m.entry(s, a).unwrap().continuous[to].as_ref().unwrap();
    let max = cont.leaves().map(|l| l.payload.outcomes.len()).max().unwrap();
    assert_eq!(max, 64);
}

#[test]
fn generated_probabilities_sum_per_cell() {
    let m = generate(&default_spec(2, 6, RewardVariant::Pwc)).unwrap();
    for s in 0..m.num_states() {
        for (_, entry) in m.applicable(s) {
            for cont in entry.continuous.iter().flatten() {
                for leaf in cont.leaves() {
                    let sum: f64 = leaf.payload.outcomes.iter().map(|o| o.prob).sum();
                    assert!((sum - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn zero_reward_model_simulates_to_zero() {
    let m = plateau::testkit::scale_rewards(
        &generate(&default_spec(1, 2, RewardVariant::Pwc)).unwrap(),
        0.0,
    );
    let result = value_iteration(&m, &SolveOptions::default()).unwrap();
    let policies = extract_policy(&result.values, &m, &SolveOptions::default()).unwrap();
    let sim = simulate(
        &m,
        &policies,
        &RolloutConfig {
            start_state: 0,
            start_point: vec![0.9],
            episodes: 500,
            seed: 9,
        },
    )
    .unwrap();
    assert_eq!(sim.mean, 0.0);
    assert_eq!(sim.std_error, 0.0);
}

/// Deterministic chain with dyadic rewards and shifts: the episode
/// return must equal the solved value bitwise.
#[test]
fn deterministic_model_simulates_exactly() {
    let dims = 1;
    let entry = ActionEntry {
        reward: KdPartition::from_payload(dims, PwlcSet::constant(dims, 0.25)),
        discrete: KdPartition::from_payload(dims, DiscreteDist::delta(1, 0)),
        continuous: vec![Some(KdPartition::from_payload(
            dims,
            OutcomeSet::relative([(vec![-0.25], 1.0)]),
        ))],
    };
    let m = HybridMdp::new(
        dims,
        vec!["s0".into()],
        vec!["go".into()],
        3,
        0.0,
        vec![vec![Some(entry)]],
    );
    let result = value_iteration(&m, &SolveOptions::default()).unwrap();
    let policies = extract_policy(&result.values, &m, &SolveOptions::default()).unwrap();
    let start = vec![0.875];
    let expected = result.values.last().unwrap().eval(0, &start).unwrap();
    assert_eq!(expected, 0.75);

    let sim = simulate(
        &m,
        &policies,
        &RolloutConfig {
            start_state: 0,
            start_point: start,
            episodes: 64,
            seed: 1234,
        },
    )
    .unwrap();
    assert_eq!(sim.mean, expected);
    assert_eq!(sim.std_error, 0.0);
}

#[test]
fn identical_seeds_reproduce_bitwise() {
    let m = generate(&default_spec(1, 5, RewardVariant::Pwc)).unwrap();
    let result = value_iteration(&m, &SolveOptions::default()).unwrap();
    let policies = extract_policy(&result.values, &m, &SolveOptions::default()).unwrap();
    let cfg = RolloutConfig {
        start_state: 0,
        start_point: vec![0.95],
        episodes: 2_000,
        seed: 77,
    };
    let a = simulate(&m, &policies, &cfg).unwrap();
    let b = simulate(&m, &policies, &cfg).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}
