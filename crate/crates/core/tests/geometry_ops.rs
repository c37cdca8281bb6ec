//! Partition operation tests: point-location conventions, refinement
//! splitting rules, intersection against a two-locate pointwise oracle,
//! merging, and statistics.

use plateau::geometry::{intersect, KdPartition, Rect};
use plateau::testkit::{random_partition, random_point, rng};
use proptest::prelude::*;

fn rect(low: &[f64], high: &[f64]) -> Rect {
    Rect::new(low.to_vec(), high.to_vec()).unwrap()
}

#[test]
fn locate_single_leaf_and_boundaries() {
    let p: KdPartition<u32> = KdPartition::from_payload(2, 7);
    assert_eq!(*p.locate(&[0.5, 0.5]).unwrap().payload, 7);

    // A split at 0.5 sends the boundary point to the high side.
    let p = p.refine(&rect(&[0.0, 0.0], &[0.5, 1.0]), |_| 1);
    let leaf = p.locate(&[0.5, 0.2]).unwrap();
    assert_eq!(*leaf.payload, 7);
    assert_eq!(leaf.rect.low()[0], 0.5);

    // The top corner belongs to the cell whose high face is 1.0.
    let leaf = p.locate(&[1.0, 1.0]).unwrap();
    assert_eq!(leaf.rect.high(), &[1.0, 1.0]);

    assert!(p.locate(&[1.1, 0.0]).is_err());
    assert!(p.locate(&[0.0, -0.1]).is_err());
}

#[test]
fn refine_whole_cube_maps_without_splitting() {
    let p: KdPartition<u32> = KdPartition::from_payload(2, 1);
    let p = p.refine(&Rect::unit(2), |v| v + 10);
    assert_eq!(p.leaf_count(), 1);
    assert_eq!(*p.locate(&[0.3, 0.3]).unwrap().payload, 11);
}

#[test]
fn refine_one_face_splits_once() {
    let p: KdPartition<u32> = KdPartition::from_payload(2, 0);
    let p = p.refine(&rect(&[0.0, 0.0], &[0.5, 1.0]), |_| 1);
    assert_eq!(p.leaf_count(), 2);
    assert_eq!(*p.locate(&[0.2, 0.9]).unwrap().payload, 1);
    assert_eq!(*p.locate(&[0.7, 0.9]).unwrap().payload, 0);
}

#[test]
fn refine_interior_box_tiles_and_maps_exactly() {
    let region = rect(&[0.25, 0.25], &[0.75, 0.75]);
    let p: KdPartition<u32> = KdPartition::from_payload(2, 0);
    let p = p.refine(&region, |_| 1);
    assert_eq!(p.leaf_count(), 5);

    // Sampling oracle: payload is 1 exactly inside the region.
    let mut r = rng(11);
    for _ in 0..10_000 {
        let x = random_point(2, &mut r);
        let expected = u32::from(region.contains(&x));
        assert_eq!(*p.locate(&x).unwrap().payload, expected, "at {x:?}");
    }

    let stats = p.leaf_stats(|_| 0);
    assert!((stats.volume - 1.0).abs() < 1e-12);
}

#[test]
fn refine_along_existing_boundaries_never_splits() {
    let mut r = rng(23);
    let p = random_partition(3, 40, &mut r, |rng| rng.random_range(0..4u32));
    let before = p.leaf_count();
    // Refining with any existing leaf cell crosses no face, so the leaf
    // count (and hence the split count) stays put.
    let cells: Vec<Rect> = p.leaves().map(|l| l.rect.clone()).collect();
    let mut p = p;
    for cell in cells.iter().take(10) {
        p = p.refine(cell, |v| *v);
        assert_eq!(p.leaf_count(), before);
    }
}

#[test]
fn intersect_with_trivial_partition_is_congruent() {
    let mut r = rng(5);
    let p = random_partition(2, 12, &mut r, |rng| rng.random_range(0.0..1.0f64));
    let one: KdPartition<u32> = KdPartition::from_payload(2, 3);
    let out = intersect(&p, &one, |a, b| a + f64::from(*b));
    assert_eq!(out.leaf_count(), p.leaf_count());
    for _ in 0..2_000 {
        let x = random_point(2, &mut r);
        let expected = p.locate(&x).unwrap().payload + 3.0;
        assert_eq!(*out.locate(&x).unwrap().payload, expected);
    }
}

#[test]
fn intersect_crossing_splits_product() {
    let a: KdPartition<u32> =
        KdPartition::from_payload(2, 0).refine(&rect(&[0.0, 0.0], &[0.5, 1.0]), |_| 1);
    let b: KdPartition<u32> =
        KdPartition::from_payload(2, 0).refine(&rect(&[0.0, 0.0], &[1.0, 0.5]), |_| 2);
    let out = intersect(&a, &b, |x, y| 10 * x + y);
    assert_eq!(out.leaf_count(), 4);
    assert_eq!(*out.locate(&[0.2, 0.2]).unwrap().payload, 12);
    assert_eq!(*out.locate(&[0.2, 0.8]).unwrap().payload, 10);
    assert_eq!(*out.locate(&[0.8, 0.2]).unwrap().payload, 2);
    assert_eq!(*out.locate(&[0.8, 0.8]).unwrap().payload, 0);
}

#[test]
fn intersect_random_partitions_pointwise_oracle() {
    let mut r = rng(42);
    let p = random_partition(3, 20, &mut r, |rng| rng.random_range(0..100u32));
    let q = random_partition(3, 30, &mut r, |rng| rng.random_range(0..100u32));
    let out = intersect(&p, &q, |a, b| (*a, *b));
    assert!(out.leaf_count() <= p.leaf_count() * q.leaf_count());

    let stats = out.leaf_stats(|_| 0);
    assert!((stats.volume - 1.0).abs() < 1e-12);

    for _ in 0..10_000 {
        let x = random_point(3, &mut r);
        let expected = (
            *p.locate(&x).unwrap().payload,
            *q.locate(&x).unwrap().payload,
        );
        assert_eq!(*out.locate(&x).unwrap().payload, expected, "at {x:?}");
    }
}

#[test]
fn merge_collapses_equal_payloads() {
    let mut r = rng(7);
    let p = random_partition(2, 25, &mut r, |_| 7.0f64);
    let merged = p.merge_equal_leaves(|a, b| a == b);
    assert_eq!(merged.leaf_count(), 1);
}

#[test]
fn merge_keeps_distinct_siblings() {
    let p: KdPartition<f64> =
        KdPartition::from_payload(1, 1.0).refine(&rect(&[0.0], &[0.5]), |_| 2.0);
    let merged = p.merge_equal_leaves(|a, b| a == b);
    assert_eq!(merged.leaf_count(), 2);
}

#[test]
fn merge_preserves_pointwise_payloads_and_is_idempotent() {
    let mut r = rng(99);
    let p = random_partition(3, 60, &mut r, |rng| rng.random_range(0..2u32));
    let merged = p.clone().merge_equal_leaves(|a, b| a == b);
    assert!(merged.leaf_count() <= p.leaf_count());
    for _ in 0..10_000 {
        let x = random_point(3, &mut r);
        assert_eq!(
            p.locate(&x).unwrap().payload,
            merged.locate(&x).unwrap().payload
        );
    }
    let twice = merged.clone().merge_equal_leaves(|a, b| a == b);
    assert_eq!(twice.leaf_count(), merged.leaf_count());
}

#[test]
fn leaf_stats_counts_and_volumes() {
    let p: KdPartition<u32> = KdPartition::from_payload(2, 0);
    let stats = p.leaf_stats(|_| 1);
    assert_eq!(stats.leaves, 1);
    assert!((stats.volume - 1.0).abs() < 1e-15);

    let quads = p
        .refine(&rect(&[0.0, 0.0], &[0.5, 0.5]), |_| 1)
        .refine(&rect(&[0.5, 0.0], &[1.0, 0.5]), |_| 2)
        .refine(&rect(&[0.0, 0.5], &[0.5, 1.0]), |_| 3);
    assert_eq!(quads.leaf_count(), 4);
    for leaf in quads.leaves() {
        assert!((leaf.rect.volume() - 0.25).abs() < 1e-15);
    }
    let stats = quads.leaf_stats(|p| *p as usize);
    assert!((stats.volume - 1.0).abs() < 1e-12);
    assert_eq!(stats.max_payload_size, 3);
}

#[test]
fn from_pieces_detects_gaps_and_overlaps() {
    let whole = vec![(Rect::unit(2), 1u32)];
    assert!(KdPartition::from_pieces(2, whole).is_ok());

    let gap = vec![(rect(&[0.0, 0.0], &[0.5, 1.0]), 1u32)];
    assert!(KdPartition::from_pieces(2, gap).is_err());

    let overlap = vec![
        (rect(&[0.0, 0.0], &[0.6, 1.0]), 1u32),
        (rect(&[0.4, 0.0], &[1.0, 1.0]), 2u32),
    ];
    assert!(KdPartition::from_pieces(2, overlap).is_err());
}

#[test]
fn from_pieces_handles_pinwheel_tilings() {
    // Four cells around a center block admit no single kd plane.
    let pieces = vec![
        (rect(&[0.0, 0.0], &[0.6, 0.4]), 0u32),
        (rect(&[0.6, 0.0], &[1.0, 0.6]), 1),
        (rect(&[0.4, 0.6], &[1.0, 1.0]), 2),
        (rect(&[0.0, 0.4], &[0.4, 1.0]), 3),
        (rect(&[0.4, 0.4], &[0.6, 0.6]), 4),
    ];
    let p = KdPartition::from_pieces(2, pieces.clone()).unwrap();
    let mut r = rng(3);
    for _ in 0..5_000 {
        let x = random_point(2, &mut r);
        let expected = pieces
            .iter()
            .find(|(cell, _)| cell.contains(&x))
            .map(|(_, v)| *v)
            .unwrap();
        assert_eq!(*p.locate(&x).unwrap().payload, expected);
    }
}

#[test]
fn translated_overlaps_tile_the_window() {
    let mut r = rng(17);
    let p = random_partition(2, 15, &mut r, |rng| rng.random_range(0..50u32));
    let window = rect(&[0.1, 0.2], &[0.7, 0.9]);
    let shift = [0.15, -0.05];
    let pieces = p.translated_overlaps(&shift, &window);

    // Pieces are disjoint and tile exactly the part of the window the
    // shifted cube reaches.
    let covered = Rect::unit(2)
        .shift_clip(&shift)
        .and_then(|c| c.intersection(&window))
        .unwrap();
    let total: f64 = pieces.iter().map(|(r, _)| r.volume()).sum();
    assert!((total - covered.volume()).abs() < 1e-12);
    for _ in 0..3_000 {
        let u: Vec<f64> = window
            .low()
            .iter()
            .zip(window.high())
            .map(|(lo, hi)| lo + (hi - lo) * r.random_range(0.0..1.0))
            .collect();
        let covering: Vec<&u32> = pieces
            .iter()
            .filter(|(rect, _)| rect.contains(&u))
            .map(|(_, p)| *p)
            .collect();
        if !covered.contains(&u) {
            assert!(covering.is_empty(), "at {u:?}");
            continue;
        }
        assert_eq!(covering.len(), 1, "at {u:?}");
        // The piece payload is the source payload at u - shift.
        let back: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a - b).collect();
        assert_eq!(covering[0], p.locate(&back).unwrap().payload);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cover_and_disjoint_after_random_operations(seed in 0u64..500) {
        let mut r = rng(seed);
        let leaves = 2 + (seed as usize % 20);
        let p = random_partition(2, leaves, &mut r, |rng| rng.random_range(0..3u32));
        let q = random_partition(2, 8, &mut r, |rng| rng.random_range(0..3u32));
        let combined = intersect(&p, &q, |a, b| a + b)
            .merge_equal_leaves(|a, b| a == b);
        let stats = combined.leaf_stats(|_| 0);
        prop_assert!((stats.volume - 1.0).abs() < 1e-12);
        for _ in 0..200 {
            let x = random_point(2, &mut r);
            // locate succeeds and agrees with exhaustive membership.
            let hit = combined.locate(&x).unwrap();
            prop_assert!(hit.rect.contains(&x));
            let members = combined.leaves().filter(|l| l.rect.contains(&x)).count();
            prop_assert_eq!(members, 1);
        }
    }

    #[test]
    fn shift_clip_round_trip_loses_never_invents(
        lo0 in 0.0f64..0.6, w0 in 0.05f64..0.4, d0 in -0.8f64..0.8,
        lo1 in 0.0f64..0.6, w1 in 0.05f64..0.4, d1 in -0.8f64..0.8,
    ) {
        let r = rect(&[lo0, lo1], &[(lo0 + w0).min(1.0), (lo1 + w1).min(1.0)]);
        let delta = [d0, d1];
        let neg = [-d0, -d1];
        if let Some(shifted) = r.shift_clip(&delta) {
            if let Some(back) = shifted.shift_clip(&neg) {
                for dim in 0..2 {
                    prop_assert!(back.low()[dim] >= r.low()[dim] - 1e-12);
                    prop_assert!(back.high()[dim] <= r.high()[dim] + 1e-12);
                }
            }
        }
    }
}
