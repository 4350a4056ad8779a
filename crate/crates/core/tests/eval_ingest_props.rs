use poolprop::eval::{iou, recall_at, RecallReport};
use poolprop::geometry::Rect;
use poolprop::ingest::{parse_ground_truth_str, parse_proposal_records, write_proposal_records, GroundTruthBox, GtFormat, ProposalRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rect_strategy() -> impl Strategy<Value = Rect> {
    (0.0f64..100.0, 0.0f64..100.0, 0.5f64..50.0, 0.5f64..50.0).prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h))
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in rect_strategy(), b in rect_strategy()) {
        let ab = iou(&a, &b).unwrap();
        let ba = iou(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((iou(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_area_box_is_an_error() {
    let a = Rect::new(1.0, 1.0, 1.0, 5.0);
    assert!(iou(&a, &Rect::new(0.0, 0.0, 2.0, 2.0)).is_err());
}

fn gt(rect: Rect) -> GroundTruthBox {
    GroundTruthBox {
        rect,
        transcription: None,
        difficult: false,
        oriented: None,
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> Rect {
    let (x, y) = (rng.gen_range(0..80) as f64, rng.gen_range(0..80) as f64);
    Rect::new(x, y, x + rng.gen_range(2..30) as f64, y + rng.gen_range(2..30) as f64)
}

#[test]
fn recall_grows_with_budget_and_shrinks_with_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..30 {
        let images = rng.gen_range(1..6);
        let props: Vec<Vec<Rect>> = (0..images)
            .map(|_| (0..rng.gen_range(0..60)).map(|_| random_box(&mut rng)).collect())
            .collect();
        let truth: Vec<Vec<GroundTruthBox>> = (0..images)
            .map(|_| (0..rng.gen_range(0..5)).map(|_| gt(random_box(&mut rng))).collect())
            .collect();
        let mut last = 0.0;
        for budget in [0, 1, 5, 10, 30, 100] {
            let r = recall_at(&props, &truth, 0.5, budget).unwrap().recall();
            assert!(r >= last);
            last = r;
        }
        let mut last = 1.0;
        for t in [0.3, 0.5, 0.7, 0.9, 1.0] {
            let r = recall_at(&props, &truth, t, 100).unwrap().recall();
            assert!(r <= last);
            last = r;
        }
    }
}

#[test]
fn difficult_boxes_are_not_counted() {
    let mut hard = gt(Rect::new(0.0, 0.0, 10.0, 10.0));
    hard.difficult = true;
    let truth = vec![vec![hard, gt(Rect::new(20.0, 20.0, 30.0, 30.0))]];
    let props = vec![vec![Rect::new(20.0, 20.0, 30.0, 30.0)]];
    let s = recall_at(&props, &truth, 0.5, 10).unwrap();
    assert_eq!((s.matched, s.total), (1, 1));
}

#[test]
fn report_is_byte_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let props: Vec<Vec<Rect>> = (0..4).map(|_| (0..40).map(|_| random_box(&mut rng)).collect()).collect();
    let truth: Vec<Vec<GroundTruthBox>> = (0..4).map(|_| (0..3).map(|_| gt(random_box(&mut rng))).collect()).collect();
    let render = || {
        let r = RecallReport::compute(&props, &truth, 2000, None).unwrap();
        let mut out = Vec::new();
        r.write_summary(&mut out, "seed=1").unwrap();
        r.write_curve(&mut out, "seed=1").unwrap();
        out
    };
    assert_eq!(render(), render());
}

#[test]
fn proposal_csv_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let records: Vec<ProposalRecord> = (0..100)
        .map(|i| {
            let x = rng.gen_range(0.0..500.0);
            let y = if i % 3 == 0 { rng.gen_range(0..400) as f64 } else { rng.gen_range(0.0..400.0) };
            ProposalRecord {
                image_id: format!("img_{}", i % 7),
                rect: Rect::new(x, y, x + rng.gen_range(1.0..80.0), y + rng.gen_range(1.0..80.0)),
                score: (i % 5 != 0).then(|| rng.gen_range(0.0..1.0)),
            }
        })
        .collect();
    let mut buf = Vec::new();
    write_proposal_records(records.clone(), &mut buf).unwrap();
    let back = parse_proposal_records(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.image_id, b.image_id);
        assert_eq!(a.rect, b.rect);
        match (a.score, b.score) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 5e-7),
            (None, None) => {}
            other => panic!("score mismatch {other:?}"),
        }
    }
}

#[test]
fn ground_truth_keeps_one_box_per_annotation_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..50 {
        let mut text = String::new();
        let mut expected = 0;
        for _ in 0..rng.gen_range(0..20) {
            match rng.gen_range(0..4) {
                0 => text.push_str("# comment\n"),
                1 => text.push('\n'),
                _ => {
                    let r = random_box(&mut rng);
                    let word = if rng.gen_bool(0.2) { "###" } else { "Word" };
                    text.push_str(&format!("{},{},{},{},{word}\r\n", r.x_min, r.y_min, r.x_max, r.y_max));
                    expected += 1;
                }
            }
        }
        let parsed = parse_ground_truth_str(&text, GtFormat::Icdar, (200, 200)).unwrap();
        assert_eq!(parsed.boxes.len(), expected);
        assert!(parsed.warnings.is_empty());
    }
}
