mod oracles;

use jointdet_core::data::{Class, Detection, PersonInstance, Scene};
use jointdet_core::eval::{compute_mr2, default_fppi_points, EvalConfig};
use jointdet_core::BBox;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn person(id: u64, body: [f64; 4], occ: f64) -> PersonInstance {
    let b = BBox::try_from(body).unwrap();
    let w = b.width() / 3.0;
    let head = BBox::new(b.x_min() + w, b.y_min(), b.x_min() + 2.0 * w, b.y_min() + w).unwrap();
    PersonInstance { person_id: id, head, body: b, ignore: false, occlusion_ratio: occ }
}

fn scene(id: &str, persons: Vec<PersonInstance>) -> Scene {
    Scene { scene_id: id.into(), width: 1000, height: 1000, persons }
}

fn det(id: u64, class: Class, b: BBox, score: f64) -> Detection {
    Detection::new(id, class, b, score).unwrap()
}

fn evaluate(
    scenes: &[Scene],
    dets: &[(String, Vec<Detection>)],
    cfg: &EvalConfig,
) -> jointdet_core::Result<jointdet_core::eval::EvalResult> {
    let refs: Vec<(&str, &[Detection])> = dets.iter().map(|(s, d)| (s.as_str(), d.as_slice())).collect();
    compute_mr2(scenes, &refs, cfg)
}

/// Up to 10 images and 30 detections, scores on a coarse grid so ties are common.
fn random_instance(rng: &mut ChaCha8Rng, class: Class) -> (Vec<Scene>, Vec<(String, Vec<Detection>)>) {
    let n_img = rng.random_range(1..=10);
    let scenes: Vec<Scene> = (0..n_img)
        .map(|i| {
            let persons = (0..rng.random_range(0..5))
                .map(|p| {
                    let x = rng.random_range(0.0..800.0);
                    let y = rng.random_range(0.0..700.0);
                    let h = rng.random_range(30.0..200.0);
                    let mut pi = person(p, [x, y, x + h * 0.4, y + h], rng.random_range(0.0..0.6));
                    pi.ignore = rng.random_bool(0.1);
                    pi
                })
                .collect();
            scene(&format!("s{i}"), persons)
        })
        .collect();
    let n_det = rng.random_range(0..=30);
    let mut per_scene: Vec<Vec<Detection>> = vec![Vec::new(); n_img];
    for id in 0..n_det {
        let s = rng.random_range(0..n_img);
        let score = rng.random_range(1..=10) as f64 / 10.0;
        let bbox = match scenes[s].persons.get(rng.random_range(0..6)) {
            Some(p) => {
                let g = if class == Class::Head { p.head } else { p.body };
                let (cx, cy) = g.center();
                let j = g.width() * 0.15;
                BBox::from_center_size(
                    cx + rng.random_range(-j..j),
                    cy + rng.random_range(-j..j),
                    g.width(),
                    g.height(),
                )
                .unwrap()
            }
            None => {
                let x = rng.random_range(0.0..900.0);
                let y = rng.random_range(0.0..900.0);
                BBox::new(x, y, x + 30.0, y + 60.0).unwrap()
            }
        };
        per_scene[s].push(det(id, class, bbox, score));
    }
    let dets = per_scene.into_iter().enumerate().map(|(i, d)| (format!("s{i}"), d)).collect();
    (scenes, dets)
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    while compared < 100 {
        let class = if compared % 2 == 0 { Class::Body } else { Class::Head };
        let (scenes, dets) = random_instance(&mut rng, class);
        let cfg = EvalConfig::for_class(class);
        let reference = oracles::mr2_reference(&scenes, &dets, class, 0.5, 50.0, 0.35);
        let got = evaluate(&scenes, &dets, &cfg);
        let Some(reference) = reference else {
            assert!(got.is_err());
            continue;
        };
        let got = got.unwrap();
        assert_eq!(got.mr2, reference.mr2);
        assert_eq!(got.num_gt, reference.num_gt);
        let curve: Vec<(f64, f64, f64)> = got.curve.iter().map(|c| (c.threshold, c.fppi, c.miss_rate)).collect();
        assert_eq!(curve, reference.curve);
        compared += 1;
    }
}

#[test]
fn four_image_example() {
    let scenes: Vec<Scene> =
        (0..4).map(|i| scene(&format!("s{i}"), vec![person(0, [100.0, 100.0, 140.0, 200.0], 0.0)])).collect();
    let gt = scenes[0].persons[0].body;
    let far = BBox::new(500.0, 500.0, 540.0, 600.0).unwrap();
    let dets = vec![
        ("s0".to_string(), vec![det(0, Class::Body, gt, 0.9), det(1, Class::Body, far, 0.85)]),
        ("s1".to_string(), vec![det(2, Class::Body, gt, 0.8)]),
        ("s2".to_string(), vec![det(3, Class::Body, gt, 0.7), det(4, Class::Body, far, 0.6)]),
    ];
    let got = evaluate(&scenes, &dets, &EvalConfig::default()).unwrap();
    let reference = oracles::mr2_reference(&scenes, &dets, Class::Body, 0.5, 50.0, 0.35).unwrap();
    assert_eq!(got.mr2, reference.mr2);
    let curve: Vec<(f64, f64, f64)> = got.curve.iter().map(|c| (c.threshold, c.fppi, c.miss_rate)).collect();
    assert_eq!(
        curve,
        vec![(0.9, 0.0, 0.75), (0.85, 0.25, 0.75), (0.8, 0.25, 0.5), (0.7, 0.25, 0.25), (0.6, 0.5, 0.25)]
    );
    // six reference points sit below FPPI 0.25 and see 0.75, three see 0.25
    let expected = (0.75f64.ln() * 6.0 + 0.25f64.ln() * 3.0) / 9.0;
    assert!((got.mr2 - expected.exp()).abs() < 1e-12);
}

#[test]
fn trivial_detectors() {
    let scenes =
        vec![scene("a", vec![person(0, [0.0, 0.0, 40.0, 100.0], 0.0), person(1, [200.0, 0.0, 240.0, 100.0], 0.1)])];
    let perfect: Vec<Detection> =
        scenes[0].persons.iter().map(|p| det(p.person_id, Class::Body, p.body, 1.0)).collect();
    let r = evaluate(&scenes, &[("a".into(), perfect)], &EvalConfig::default()).unwrap();
    assert_eq!(r.mr2, 0.0);
    let r = evaluate(&scenes, &[], &EvalConfig::default()).unwrap();
    assert_eq!(r.mr2, 1.0);
    assert!(r.curve.is_empty());
}

#[test]
fn reasonable_boundaries() {
    let scenes = vec![scene(
        "a",
        vec![
            person(0, [0.0, 0.0, 20.0, 49.0], 0.0),
            person(1, [100.0, 0.0, 120.0, 50.0], 0.0),
            person(2, [200.0, 0.0, 240.0, 100.0], 0.34),
            person(3, [300.0, 0.0, 340.0, 100.0], 0.35),
        ],
    )];
    for class in [Class::Body, Class::Head] {
        let r = evaluate(&scenes, &[], &EvalConfig::for_class(class)).unwrap();
        assert_eq!(r.num_gt, 2, "{class}");
        // a detection on an ignored person is neither TP nor FP
        let p = &scenes[0].persons[3];
        let b = if class == Class::Head { p.head } else { p.body };
        let r = evaluate(&scenes, &[("a".into(), vec![det(0, class, b, 0.9)])], &EvalConfig::for_class(class)).unwrap();
        assert_eq!(r.curve[0].fppi, 0.0);
        assert_eq!(r.curve[0].miss_rate, 1.0);
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let scenes = vec![scene("a", vec![person(0, [0.0, 0.0, 40.0, 100.0], 0.0)])];
    let d = det(0, Class::Head, scenes[0].persons[0].head, 0.5);
    assert!(evaluate(&scenes, &[("a".into(), vec![d])], &EvalConfig::default()).is_err());
    assert!(evaluate(&scenes, &[("zzz".into(), vec![])], &EvalConfig::default()).is_err());
    assert!(evaluate(&scenes, &[("a".into(), vec![]), ("a".into(), vec![])], &EvalConfig::default()).is_err());
    let tiny = vec![scene("a", vec![person(0, [0.0, 0.0, 10.0, 20.0], 0.0)])];
    assert!(evaluate(&tiny, &[], &EvalConfig::default()).is_err());
}

#[test]
fn reference_points_are_log_spaced() {
    let p = default_fppi_points();
    assert_eq!(p.len(), 9);
    assert_eq!(p[0], 0.01);
    assert_eq!(p[8], 1.0);
    for (k, v) in p.iter().enumerate() {
        assert!((v.log10() - (-2.0 + k as f64 / 4.0)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn mr2_is_bounded_and_fp_injection_never_helps(seed in any::<u64>(), score in 0.01..1.0f64, dup in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenes, mut dets) = random_instance(&mut rng, Class::Body);
        let cfg = EvalConfig::default();
        let Ok(before) = evaluate(&scenes, &dets, &cfg) else { return Ok(()) };
        prop_assert!((0.0..=1.0).contains(&before.mr2));

        let target = rng.random_range(0..dets.len());
        let extra = match dets[target].1.first() {
            // a lower-scored copy of an existing detection can only be a duplicate
            Some(d) if dup => det(1000, Class::Body, d.bbox, (d.score * score).max(1e-6)),
            _ => det(1000, Class::Body, BBox::new(2000.0, 2000.0, 2030.0, 2060.0).unwrap(), score),
        };
        dets[target].1.push(extra);
        let after = evaluate(&scenes, &dets, &cfg).unwrap();
        prop_assert!(after.mr2 >= before.mr2);
        prop_assert_eq!(after.num_gt, before.num_gt);
    }

    #[test]
    fn filtering_never_adds_ground_truth(seed in any::<u64>(), min_h in 0.0..300.0f64, max_occ in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scenes, _) = random_instance(&mut rng, Class::Body);
        let loose = EvalConfig { reasonable_min_height: 0.0, reasonable_max_occlusion: f64::INFINITY, ..EvalConfig::default() };
        let strict = EvalConfig { reasonable_min_height: min_h, reasonable_max_occlusion: max_occ, ..EvalConfig::default() };
        let all = evaluate(&scenes, &[], &loose).map(|r| r.num_gt).unwrap_or(0);
        let kept = evaluate(&scenes, &[], &strict).map(|r| r.num_gt).unwrap_or(0);
        prop_assert!(kept <= all);
    }
}
