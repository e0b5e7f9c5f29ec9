use proptest::prelude::*;

use cbb::geometry::{
    generate_polygon, inside_convex, is_simple, make_edit, signed_area, EditCondition, GenParams,
    Point2, Polygon,
};
use cbb::metrics::{binarize, default_tau_grid, fit_tau, rac, sweep, HumanData, ProbMap, RacRecord};
use cbb::morphology::morphological_closing;
use cbb::raster::{decode_mask_bytes, encode_mask_png, rasterize_mask, rasterize_mask_naive, MaskGrid};
use cbb::trials::Condition;

fn gen_params() -> impl Strategy<Value = GenParams> {
    (5u32..=12, 0u32..=3, 0.0f64..=1.0, 0.0f64..=1.0, any::<u64>()).prop_map(|(n, k, irr, spk, seed)| {
        GenParams {
            n_vertices: n,
            n_concavities: k.min(n - 4),
            irregularity: irr,
            spikiness: spk,
            seed,
        }
    })
}

fn mask(max: u32) -> impl Strategy<Value = MaskGrid> {
    (4u32..max, 4u32..max).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop_oneof![3 => Just(0u8), 2 => Just(1u8)], (w * h) as usize)
            .prop_map(move |bits| MaskGrid::from_bits(w, h, bits).unwrap())
    })
}

/// Points spread over a triangle, corners excluded.
fn triangle_samples(tri: &[Point2]) -> Vec<Point2> {
    let mut out = Vec::new();
    for i in 1..=30 {
        for j in 1..=(31 - i) {
            let (u, v) = (i as f64 / 32.0, j as f64 / 32.0);
            let w = 1.0 - u - v;
            if w <= 0.0 {
                continue;
            }
            out.push(Point2::new(
                u * tri[0].x + v * tri[1].x + w * tri[2].x,
                u * tri[0].y + v * tri[1].y + w * tri[2].y,
            ));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_polygons_meet_contract(p in gen_params()) {
        let poly = generate_polygon(&p).unwrap();
        let v = poly.vertices();
        prop_assert!(is_simple(v));
        prop_assert!(signed_area(v) >= 0.02);
        prop_assert_eq!(v.len(), p.n_vertices as usize);
        prop_assert_eq!(poly.reflex_count(), p.n_concavities as usize);
        prop_assert!(v.iter().all(|q| (0.0..=1.0).contains(&q.x) && (0.0..=1.0).contains(&q.y)));
        let again = generate_polygon(&p).unwrap();
        prop_assert_eq!(poly, again);
    }

    #[test]
    fn hull_area_bounds_polygon_area(p in gen_params()) {
        let poly = generate_polygon(&p).unwrap();
        let hull = poly.convex_hull();
        if p.n_concavities == 0 {
            prop_assert!((hull.area() - poly.area()).abs() < 1e-12);
        } else {
            prop_assert!(hull.area() > poly.area());
        }
    }

    #[test]
    fn edits_add_exact_area_and_keep_host_vertices(
        p in gen_params(),
        which in 0usize..3,
        rel in 0.01f64..=0.15,
        seed in any::<u64>(),
    ) {
        let condition = [EditCondition::Concave, EditCondition::Nofill, EditCondition::Convex][which];
        let poly = generate_polygon(&p).unwrap();
        let Ok((out, piece)) = make_edit(&poly, condition, rel, seed) else {
            return Ok(());
        };
        prop_assert!(is_simple(out.vertices()));
        prop_assert!((out.area() - poly.area() - piece.area).abs() < 1e-9);
        prop_assert!((piece.area - rel * poly.area()).abs() < 1e-9);

        let kept = poly.vertices().iter().filter(|v| out.vertices().contains(v)).count();
        let hull = poly.convex_hull();
        let patch = piece.patch.vertices();
        let samples = triangle_samples(patch);
        match condition {
            EditCondition::Convex => {
                prop_assert_eq!(kept, poly.len());
                for q in samples {
                    prop_assert!(!inside_convex(hull.vertices(), q, 1e-9));
                }
            }
            _ => {
                // the wedge absorbs the pocket apex, which ends up inside the patch
                prop_assert_eq!(kept, poly.len() - 1);
                let lost = poly.vertices().iter().find(|v| !out.vertices().contains(v)).unwrap();
                prop_assert!(piece.patch.contains(*lost) || patch.contains(lost));
                for q in samples {
                    prop_assert!(inside_convex(hull.vertices(), q, -1e-12));
                }
            }
        }
    }

    #[test]
    fn scanline_matches_point_sampling(p in gen_params(), w in 16u32..96, h in 16u32..96) {
        let poly = generate_polygon(&p).unwrap();
        prop_assert_eq!(rasterize_mask(&poly, w, h), rasterize_mask_naive(&poly, w, h));
    }

    #[test]
    fn hull_raster_contains_polygon_raster(p in gen_params()) {
        let poly = generate_polygon(&p).unwrap();
        let m = rasterize_mask(&poly, 128, 128);
        let hm = rasterize_mask(&poly.convex_hull(), 128, 128);
        let outside = (0..128u32)
            .flat_map(|y| (0..128u32).map(move |x| (x, y)))
            .filter(|&(x, y)| m.get(x, y) && !hm.get(x, y))
            .count();
        prop_assert_eq!(outside, 0);
    }

    #[test]
    fn mask_png_round_trip(m in mask(40)) {
        prop_assert_eq!(decode_mask_bytes(&encode_mask_png(&m)).unwrap(), m);
    }

    #[test]
    fn rac_is_linear(a in 0u64..1_000_000, g in 1u64..10_000, k in 0u64..20) {
        prop_assert_eq!(rac(a, a + k * g, g).unwrap(), k as f64);
    }

    #[test]
    fn detection_rates_never_increase(racs in proptest::collection::vec(-1.0f64..1.5, 1..60)) {
        let records: Vec<RacRecord> = racs
            .iter()
            .enumerate()
            .map(|(i, &r)| RacRecord {
                trial_id: i.to_string(),
                condition: Condition::CHANGES[i % 3],
                a_init: 0,
                a_out: 0,
                a_seg_gt: 1,
                rac: Some(r),
                rel_delta: None,
            })
            .collect();
        let curve = sweep(&records, &default_tau_grid()).unwrap();
        for rates in curve.rates.values() {
            prop_assert!(rates.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(rates.iter().all(|r| (0.0..=1.0).contains(r)));
        }
    }

    #[test]
    fn fit_is_exact_when_a_row_is_attainable(racs in proptest::collection::vec(0.0f64..0.3, 3..60), row in 0usize..25) {
        let records: Vec<RacRecord> = racs
            .iter()
            .enumerate()
            .map(|(i, &r)| RacRecord {
                trial_id: i.to_string(),
                condition: Condition::CHANGES[i % 3],
                a_init: 0,
                a_out: 0,
                a_seg_gt: 1,
                rac: Some(r),
                rel_delta: None,
            })
            .collect();
        let curve = sweep(&records, &default_tau_grid()).unwrap();
        let human = HumanData::new(Condition::CHANGES.into_iter().map(|c| (c, curve.rates[&c][row])).collect()).unwrap();
        let fit = fit_tau(&curve, &human).unwrap();
        prop_assert_eq!(fit.rmse, 0.0);
        prop_assert!(fit.tau_star <= curve.tau_grid[row]);
    }

    #[test]
    fn binarize_is_two_class_argmax(values in proptest::collection::vec(0.0f64..=1.0, 64)) {
        let mut values = values;
        values[0] = 0.5;
        let m = binarize(&ProbMap::new(8, 8, values.clone()).unwrap());
        for (i, p) in values.iter().enumerate() {
            let fg_wins = *p > 1.0 - *p;
            prop_assert_eq!(m.bits()[i] == 1, fg_wins);
        }
    }
}

fn disk(r: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            if x * x + y * y <= r * r {
                v.push((x, y));
            }
        }
    }
    v
}

/// True when the radius `big` disk is a union of translates of the radius `small` disk.
fn disks_nest(small: u32, big: u32) -> bool {
    let (a, b) = (disk(small as i64), disk(big as i64));
    let inside = |p: &(i64, i64)| b.contains(p);
    let mut covered = std::collections::HashSet::new();
    for &(tx, ty) in &b {
        if a.iter().all(|&(x, y)| inside(&(tx + x, ty + y))) {
            covered.extend(a.iter().map(|&(x, y)| (tx + x, ty + y)));
        }
    }
    covered.len() == b.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closing_is_extensive_and_idempotent(m in mask(28), r in 1u32..7) {
        let c = morphological_closing(&m, r);
        prop_assert!(c.contains(&m));
        prop_assert_eq!(morphological_closing(&c, r), c);
    }

    #[test]
    fn closing_grows_with_nested_disks(m in mask(28), r1 in 1u32..5, dr in 0u32..6) {
        let r2 = r1 + dr;
        prop_assume!(dr == 0 || disks_nest(r1, r2));
        let c1 = morphological_closing(&m, r1);
        let c2 = morphological_closing(&m, r2);
        prop_assert!(c2.contains(&c1));
    }

    #[test]
    fn closing_grows_with_radius_on_polygons(p in gen_params(), r1 in 1u32..12, dr in 1u32..12) {
        let poly = generate_polygon(&p).unwrap();
        let m = rasterize_mask(&poly, 128, 128);
        let r2 = r1 + dr;
        prop_assume!(disks_nest(r1, r2));
        prop_assert!(morphological_closing(&m, r2).contains(&morphological_closing(&m, r1)));
    }
}

#[test]
fn closing_radius_order_breaks_for_non_nesting_disks() {
    // a hole shaped like the radius 3 disk survives radius 3 closing but not radius 1
    assert!(!disks_nest(1, 3));
    let mut m = MaskGrid::zeros(15, 15);
    for y in 0..15 {
        for x in 0..15 {
            m.set(x, y, true);
        }
    }
    for (dx, dy) in disk(3) {
        m.set((7 + dx) as u32, (7 + dy) as u32, false);
    }
    let c1 = morphological_closing(&m, 1);
    let c3 = morphological_closing(&m, 3);
    assert_eq!(c3, m);
    assert!(!c3.contains(&c1));
}

#[test]
fn l_hexagon_hull_covers_notch_points() {
    let l = Polygon::new(vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.5, 1.0),
        Point2::new(0.5, 0.5),
        Point2::new(0.0, 0.5),
    ])
    .unwrap();
    let hull = l.convex_hull();
    assert!(inside_convex(hull.vertices(), Point2::new(0.4, 0.6), 1e-9));
    assert!(!l.contains(Point2::new(0.4, 0.6)));
}
