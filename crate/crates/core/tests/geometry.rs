mod oracles;

use jointdet_core::geometry::{area, intersection_area, ioh, iou};
use jointdet_core::BBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_int_box(rng: &mut ChaCha8Rng, positive: bool) -> BBox {
    let lo = if positive { 1 } else { 0 };
    let x0 = rng.random_range(0..30) as f64;
    let y0 = rng.random_range(0..30) as f64;
    let w = rng.random_range(lo..20) as f64;
    let h = rng.random_range(lo..20) as f64;
    BBox::new(x0, y0, x0 + w, y0 + h).unwrap()
}

#[test]
fn rasterization_oracle_agrees_on_random_integer_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let a = random_int_box(&mut rng, true);
        let positive = rng.random_bool(0.8);
        let b = random_int_box(&mut rng, positive);
        assert!((intersection_area(&a, &b) - oracles::raster_intersection(&a, &b)).abs() <= 1e-9);
        assert!((iou(&a, &b) - oracles::raster_iou(&a, &b)).abs() <= 1e-9, "{a:?} {b:?}");
        assert!((ioh(&a, &b).unwrap() - oracles::raster_ioh(&a, &b)).abs() <= 1e-9);
    }
}

#[test]
fn worked_examples_match_the_oracle() {
    let head = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let body = BBox::new(5.0, 0.0, 100.0, 100.0).unwrap();
    assert_eq!(oracles::raster_intersection(&head, &body), 50.0);
    assert_eq!(intersection_area(&head, &body), 50.0);
    assert_eq!(oracles::raster_iou(&head, &body), 50.0 / 9550.0);
    assert_eq!(iou(&head, &body), 50.0 / 9550.0);
    assert_eq!(ioh(&head, &body).unwrap(), 0.5);
}

fn any_box() -> impl Strategy<Value = BBox> {
    (-100.0..100.0f64, -100.0..100.0f64, 0.0..50.0f64, 0.0..50.0f64)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

fn positive_box() -> impl Strategy<Value = BBox> {
    (-100.0..100.0f64, -100.0..100.0f64, 0.5..50.0f64, 0.5..50.0f64)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h).unwrap())
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in any_box(), b in any_box()) {
        prop_assert_eq!(iou(&a, &b), iou(&b, &a));
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn intersection_bounded_by_smaller_area(a in any_box(), b in any_box()) {
        let i = intersection_area(&a, &b);
        prop_assert!(i >= 0.0);
        prop_assert!(i <= area(&a).min(area(&b)) + 1e-9);
    }

    #[test]
    fn ioh_bounded_and_one_iff_contained(h in positive_box(), b in any_box()) {
        let v = ioh(&h, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v == 1.0, b.contains(&h));
    }

    #[test]
    fn contained_head_has_unit_ioh(b in positive_box(), fx in 0.0..1.0f64, fy in 0.0..1.0f64, fw in 0.01..1.0f64, fh in 0.01..1.0f64) {
        let w = b.width() * fw * (1.0 - fx);
        let h = b.height() * fh * (1.0 - fy);
        let x0 = b.x_min() + fx * b.width();
        let y0 = b.y_min() + fy * b.height();
        let head = BBox::new(x0, y0, (x0 + w).min(b.x_max()), (y0 + h).min(b.y_max())).unwrap();
        prop_assume!(head.area() > 0.0);
        prop_assert_eq!(ioh(&head, &b).unwrap(), 1.0);
    }
}
