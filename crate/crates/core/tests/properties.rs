use gridact::growing_grid::{GridConfig, GrowingGrid, LambdaMode, Phase};
use gridact::label::{LabelConfig, LabelingLayer};
use gridact::lattice::{Lattice, NeuronMap};
use gridact::ordered::{
    compute_kmax, dedup_consecutive, polyline_length, resample, ActivityPattern, Point,
};
use gridact::preprocess::{build_canonical, scale_to_canonical, to_ego_frame};
use gridact::skeleton::{generate_synthetic, Joint3D, SkeletonFrame, SyntheticSpec};
use gridact::som::{SomConfig, SomNet};
use proptest::prelude::*;

fn pattern(max_len: usize) -> impl Strategy<Value = Vec<Point<f64>>> {
    proptest::collection::vec(
        (0u8..8, 0u8..8).prop_map(|(r, c)| [r as f64, c as f64]),
        1..max_len,
    )
}

fn collinear(a: Point<f64>, b: Point<f64>, q: Point<f64>) -> bool {
    let cross = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]);
    let within = |i: usize| q[i] >= a[i].min(b[i]) - 1e-9 && q[i] <= a[i].max(b[i]) + 1e-9;
    cross.abs() <= 1e-9 && within(0) && within(1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dedup_removes_only_adjacent_repeats(points in pattern(40)) {
        let d = dedup_consecutive(&ActivityPattern { points: points.clone(), source: 0 });
        prop_assert!(d.points.windows(2).all(|w| w[0] != w[1]));
        let mut expect = points.clone();
        expect.dedup();
        prop_assert_eq!(&d.points, &expect);
        prop_assert_eq!(dedup_consecutive(&d), d);
    }

    #[test]
    fn polyline_length_matches_pairwise_sum(points in pattern(30)) {
        let mut sum = 0.0;
        for i in 1..points.len() {
            sum += ((points[i][0] - points[i - 1][0]).powi(2) + (points[i][1] - points[i - 1][1]).powi(2)).sqrt();
        }
        prop_assert!((polyline_length(&points) - sum).abs() <= 1e-12);
    }

    #[test]
    fn resample_hits_length_and_stays_on_polyline(points in pattern(30), extra in 0usize..30) {
        let p = dedup_consecutive(&ActivityPattern { points, source: 0 });
        prop_assume!(p.points.len() >= 2);
        let k = p.points.len() + extra;
        let out = resample(&p, k).unwrap();
        prop_assert_eq!(out.len(), k);
        prop_assert_eq!(out.flatten().len(), 2 * k);
        prop_assert_eq!(out.points[0], p.points[0]);
        prop_assert_eq!(*out.points.last().unwrap(), *p.points.last().unwrap());
        prop_assert!(out.points.windows(2).all(|w| w[0] != w[1]));
        for q in &out.points {
            prop_assert!(p.points.windows(2).any(|s| collinear(s[0], s[1], *q)), "{:?} off the polyline", q);
        }
        let kmax = compute_kmax(&[p.clone(), ActivityPattern { points: out.points.clone(), source: 1 }]).unwrap();
        prop_assert_eq!(kmax, k);
    }

    #[test]
    fn resample_rejects_overlong(points in pattern(30)) {
        let p = dedup_consecutive(&ActivityPattern { points, source: 0 });
        prop_assume!(p.points.len() >= 3);
        prop_assert!(resample(&p, p.points.len() - 1).is_err());
        prop_assert_eq!(resample(&p, p.points.len()).unwrap().points, p.points);
    }

    #[test]
    fn winner_is_nearest_and_most_active(
        rows in 1usize..8, cols in 2usize..8, dim in 1usize..6, seed in any::<u64>(),
        x in proptest::collection::vec(-1.0f64..2.0, 6),
    ) {
        let l = Lattice::<f64>::random(rows, cols, dim, seed);
        let x = &x[..dim];
        let w = l.find_winner(x, 1.0).unwrap();
        let d = l.distances(x).unwrap();
        let i = l.index(w.row, w.col);
        prop_assert!(d.iter().all(|&v| v >= d[i]));
        prop_assert_eq!(d.iter().position(|&v| v == d[i]), Some(i));
        prop_assert!((w.activity - (-w.distance).exp()).abs() <= 1e-15);
    }

    #[test]
    fn insertion_keeps_old_lines_and_averages_new(
        rows in 2usize..6, cols in 2usize..6, dim in 1usize..4, seed in any::<u64>(), at in 0usize..5, as_row in any::<bool>(),
    ) {
        let before = Lattice::<f64>::random(rows, cols, dim, seed);
        let mut l = before.clone();
        if as_row {
            let top = at % (rows - 1);
            l.insert_row(top);
            prop_assert_eq!((l.rows(), l.cols()), (rows + 1, cols));
            for c in 0..cols {
                for k in 0..dim {
                    let mean = (before.weight(top, c)[k] + before.weight(top + 1, c)[k]) / 2.0;
                    prop_assert!((l.weight(top + 1, c)[k] - mean).abs() <= 1e-15);
                }
                prop_assert_eq!(l.weight(top, c), before.weight(top, c));
                prop_assert_eq!(l.weight(top + 2, c), before.weight(top + 1, c));
            }
        } else {
            let left = at % (cols - 1);
            l.insert_column(left);
            prop_assert_eq!((l.rows(), l.cols()), (rows, cols + 1));
            for r in 0..rows {
                for k in 0..dim {
                    let mean = (before.weight(r, left)[k] + before.weight(r, left + 1)[k]) / 2.0;
                    prop_assert!((l.weight(r, left + 1)[k] - mean).abs() <= 1e-15);
                }
                prop_assert_eq!(l.weight(r, left + 2), before.weight(r, left + 1));
            }
        }
        prop_assert_eq!(l.weights().len(), l.rows() * l.cols() * dim);
    }

    #[test]
    fn growth_stops_at_first_check_over_cap(gamma in 4usize..40, lambda in 1usize..20, seed in any::<u64>()) {
        let cfg = GridConfig { gamma, lambda: LambdaMode::Fixed(lambda), seed, ..Default::default() };
        let mut net = GrowingGrid::<f64>::init(cfg, 2).unwrap();
        let xs: Vec<[f64; 2]> = (0..lambda).map(|i| [i as f64 / lambda as f64, 0.5]).collect();
        let report = net.run_growth_phase(xs.iter().cycle(), lambda).unwrap();
        prop_assert_eq!(net.phase(), Phase::FineTune);
        prop_assert!(net.neuron_count() >= gamma);
        let mut size = 4;
        for (i, r) in report.intervals.iter().enumerate() {
            let last = i + 1 == report.intervals.len();
            prop_assert_eq!(r.inserted, !last);
            prop_assert_eq!(size < gamma, !last, "check {} started at {} neurons, cap {}", i, size, gamma);
            size = r.rows * r.cols;
        }
        // A 2x2 start already at the cap is checked before any signal.
        let upfront = usize::from(gamma <= 4);
        prop_assert_eq!(report.signals, lambda * (report.intervals.len() - upfront));
    }

    #[test]
    fn contrast_map_is_a_distribution_with_the_winner_on_top(
        seed in any::<u64>(), p in 0.5f64..20.0, sigma in 0.1f64..1.0e6,
        x in proptest::collection::vec(0.0f64..1.0, 3),
    ) {
        let net = SomNet::init(SomConfig { rows: 3, cols: 4, sigma, seed, ..Default::default() }, 3).unwrap();
        let a = net.contrast_activities(&x, p).unwrap();
        let w = net.find_winner(&x).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let top = a.iter().cloned().fold(0.0, f64::max);
        prop_assert_eq!(a[net.lattice().index(w.row, w.col)], top);
    }

    #[test]
    fn cosine_prediction_is_scale_free(
        seed in any::<u64>(), x in proptest::collection::vec(0.01f64..1.0, 4), c in 1e-3f64..1e3,
    ) {
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let l = LabelingLayer::init(names, 4, &LabelConfig { seed, ..Default::default() }).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (a, b) = (l.score(&x).unwrap(), l.score(&scaled).unwrap());
        prop_assert_eq!(a.predicted, b.predicted);
        for (s, w) in a.scores.iter().zip(&l.weights) {
            let dot: f64 = x.iter().zip(w).map(|(p, q)| p * q).sum();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nw = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((s - dot / (nx * nw)).abs() <= 1e-12);
        }
    }

    #[test]
    fn preprocessing_is_translation_invariant(seed in 0u64..1000, shift in proptest::array::uniform3(-3.0f64..3.0)) {
        let data = generate_synthetic::<f64>(&SyntheticSpec {
            n_classes: 2, n_per_class: 1, n_joints: 20, frame_range: (10, 10), noise_sigma: 0.02, seed,
        }).unwrap();
        let seq = &data.sequences[0];
        let canon = build_canonical(&data.sequences).unwrap();
        let moved = SkeletonFrame::new(
            seq.frames[0].joints.iter().map(|j| *j + Joint3D::new(shift[0], shift[1], shift[2])).collect(),
        );
        let a = scale_to_canonical(&to_ego_frame(&seq.frames[0], &seq.joint_map).unwrap(), &canon).unwrap();
        let b = scale_to_canonical(&to_ego_frame(&moved, &seq.joint_map).unwrap(), &canon).unwrap();
        for (p, q) in a.joints.iter().zip(&b.joints) {
            prop_assert!((*p - *q).norm() <= 1e-9);
        }
    }
}

#[test]
fn f32_grid_trains() {
    let cfg = GridConfig::<f32> {
        gamma: 9,
        lambda: LambdaMode::Fixed(10),
        seed: 3,
        ..Default::default()
    };
    let mut net = GrowingGrid::init(cfg, 3).unwrap();
    let xs: Vec<[f32; 3]> = (0..50).map(|i| [i as f32 / 50.0, 0.3, 0.9]).collect();
    net.run_growth_phase(xs.iter().cycle(), 50).unwrap();
    net.finetune_on(&xs, 3).unwrap();
    assert_eq!(net.phase(), Phase::Frozen);
    assert!(net.lattice().weights().iter().all(|v| v.is_finite()));
}
