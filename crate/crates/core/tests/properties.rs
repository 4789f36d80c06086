use std::collections::BTreeSet;

use proptest::prelude::*;

use burnkit::annotate::{sample_annotations, AnnotationConfig};
use burnkit::evalkit::{build_splits, mae, spearman_pct, train_count, Spc};
use burnkit::heartrate::{keytel_kcal, HeartRateRecord, KeytelCoefficients, Sex, SubjectProfile};
use burnkit::kinetics::{body_energy, hourly_kcal, ConversionConfig};
use burnkit::pose::{region_centroids, BodyModel, SkeletonSequence, NUM_REGIONS};
use burnkit::predictor::{fuse_average, window_ranges, WindowOutput, WindowSpec};
use burnkit::softlabel::{encode, kl_loss, CalorieDistribution, SoftLabelCodec};

fn coord() -> impl Strategy<Value = f64> {
    -5.0f64..5.0
}

/// A clip of `frames × joints` points with every joint mapped to some region.
fn clip(joints: usize) -> impl Strategy<Value = SkeletonSequence> {
    prop::collection::vec(prop::collection::vec([coord(), coord(), coord()], joints), 2..20)
        .prop_map(|frames| SkeletonSequence::new("p", "a", 30.0, frames).unwrap())
}

fn energy(seq: &SkeletonSequence, model: &BodyModel) -> f64 {
    body_energy(&region_centroids(seq, model).unwrap(), model)
}

fn random_distribution(n: usize) -> impl Strategy<Value = CalorieDistribution> {
    prop::collection::vec(0.0f64..1.0, n)
        .prop_filter("needs mass", |w| w.iter().sum::<f64>() > 1e-6)
        .prop_map(|w| CalorieDistribution::from_weights(w).unwrap())
}

proptest! {
    #[test]
    fn centroids_ignore_joint_order_within_a_region(seq in clip(12), perm in Just((0..12).collect::<Vec<usize>>()).prop_shuffle()) {
        let map = [0, 0, 1, 1, 1, 2, 3, 4, 5, 6, 7, 7];
        let model = BodyModel::from_joint_map(&map).unwrap();
        let permuted_map: Vec<usize> = perm.iter().map(|&j| map[j]).collect();
        let permuted_model = BodyModel::from_joint_map(&permuted_map).unwrap();
        let permuted = SkeletonSequence::new(
            "p", "a", 30.0,
            seq.frames().iter().map(|f| perm.iter().map(|&j| f[j]).collect()).collect(),
        ).unwrap();
        let a = region_centroids(&seq, &model).unwrap();
        let b = region_centroids(&permuted, &permuted_model).unwrap();
        for t in 0..seq.frame_count() {
            for r in 0..NUM_REGIONS {
                for k in 0..3 {
                    prop_assert!((a.centroid(t, r)[k] - b.centroid(t, r)[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn energy_is_nonnegative_and_translation_invariant(seq in clip(25), dx in coord(), dy in coord(), dz in coord()) {
        let model = BodyModel::ntu25();
        let e = energy(&seq, &model);
        prop_assert!(e >= 0.0);
        let moved = seq.map_points(|p| [p[0] + dx, p[1] + dy, p[2] + dz]).unwrap();
        let em = energy(&moved, &model);
        prop_assert!((em - e).abs() <= 1e-9 * e.max(1.0));
        prop_assert_eq!(energy(&seq.reversed(), &model).to_bits(), e.to_bits());
    }

    #[test]
    fn hourly_is_linear_in_energy(raw in 0.0f64..1e4, k in 0.0f64..10.0, frames in 2usize..500) {
        let conv = ConversionConfig::default();
        let a = hourly_kcal(raw, frames, 30.0, &conv).unwrap();
        let b = hourly_kcal(k * raw, frames, 30.0, &conv).unwrap();
        prop_assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn keytel_is_linear_in_duration(hr in 40.0f64..200.0, w in 30.0f64..150.0, age in 10.0f64..90.0, t in 0.0f64..5.0, male in any::<bool>()) {
        let sex = if male { Sex::Male } else { Sex::Female };
        let p = SubjectProfile::new(sex, w, age).unwrap();
        let c = KeytelCoefficients::default();
        let one = keytel_kcal(&p, &HeartRateRecord::new(hr, t).unwrap(), &c).unwrap().kcal;
        let two = keytel_kcal(&p, &HeartRateRecord::new(hr, 2.0 * t).unwrap(), &c).unwrap().kcal;
        prop_assert!((two - 2.0 * one).abs() <= 1e-9 * two.abs().max(1.0));
    }

    #[test]
    fn sample_labels_stay_in_band_and_keep_order(
        l_cat in 1.0f64..1000.0,
        energies in prop::collection::vec(0.0f64..2000.0, 1..40),
    ) {
        let config = AnnotationConfig::diverse();
        let batch: Vec<(String, f64)> = energies.iter().enumerate().map(|(i, &e)| (format!("s{i}"), e)).collect();
        let out = sample_annotations("a", l_cat, &batch, &config).unwrap();
        let half = 0.5 * config.category_fluctuation(l_cat);
        for s in &out {
            prop_assert!(s.l_sample >= l_cat - half && s.l_sample <= l_cat + half);
        }
        for (a, b) in out.iter().zip(&out[1..]).filter(|(a, b)| a.energy < b.energy) {
            prop_assert!(a.l_sample <= b.l_sample);
        }
    }

    #[test]
    fn encoded_labels_are_normalized(label in 0.0f64..=999.0, sigma in 0.5f64..80.0) {
        let codec = SoftLabelCodec::diverse().with_sigma(sigma).unwrap();
        let d = encode(label, &codec).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_self(p in random_distribution(16), q in random_distribution(16)) {
        prop_assert!(kl_loss(&p, &q).unwrap() >= 0.0);
        prop_assert_eq!(kl_loss(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn mae_is_translation_invariant(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50), c in -1e3f64..1e3) {
        let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let shifted = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let a = mae(&p, &g).unwrap();
        let b = mae(&shifted(&p), &shifted(&g)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(pairs in prop::collection::vec((0u8..6, 0u8..6), 2..12)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().map(|(x, y)| (x as f64, y as f64)).unzip();
        let ab = spearman_pct(&a, &b).unwrap();
        prop_assert_eq!(ab, spearman_pct(&b, &a).unwrap());
        if let Spc::Value(v) = ab {
            prop_assert!((-100.0 - 1e-9..=100.0 + 1e-9).contains(&v));
        }
    }

    #[test]
    fn splits_partition_every_sample(
        sizes in prop::collection::vec(1usize..25, 1..8),
        seed in any::<u64>(),
        held in prop::collection::vec(any::<bool>(), 8),
    ) {
        let samples: Vec<(String, String)> = sizes.iter().enumerate()
            .flat_map(|(a, &n)| (0..n).map(move |i| (format!("a{a}-{i}"), format!("a{a}"))))
            .collect();
        let heldout: BTreeSet<String> = (0..sizes.len()).filter(|&a| held[a]).map(|a| format!("a{a}")).collect();
        let m = build_splits(&samples, &heldout, seed, (7, 3)).unwrap();
        prop_assert_eq!(m.train.len() + m.test_known.len() + m.test_new.len(), samples.len());
        for (id, activity) in &samples {
            let hits = [&m.train, &m.test_known, &m.test_new].iter().filter(|s| s.contains(id)).count();
            prop_assert_eq!(hits, 1);
            prop_assert_eq!(m.test_new.contains(id), heldout.contains(activity));
        }
        let expected_train: usize = sizes.iter().enumerate()
            .filter(|(a, _)| !held[*a])
            .map(|(_, &n)| train_count(n, (7, 3)))
            .sum();
        prop_assert_eq!(m.train.len(), expected_train);
        prop_assert_eq!(build_splits(&samples, &heldout, seed, (7, 3)).unwrap().to_text(), m.to_text());
    }

    #[test]
    fn windows_cover_the_clip(frames in 2usize..400, len in 2usize..64, overlap_frac in 0.0f64..1.0) {
        let overlap = ((len - 1) as f64 * overlap_frac) as usize;
        let spec = WindowSpec::new(len, overlap).unwrap();
        let w = window_ranges(frames, &spec).unwrap();
        prop_assert_eq!(w[0].start, 0);
        prop_assert_eq!(w.last().unwrap().end, frames);
        for pair in w.windows(2) {
            prop_assert!(pair[1].start <= pair[0].end);
            prop_assert!(pair[1].start > pair[0].start);
        }
        prop_assert!(w.iter().all(|r| r.len() == len.min(frames)));
    }

    #[test]
    fn fusing_identical_outputs_is_identity(v in -1e4f64..1e4, k in 1usize..10, label in 0.0f64..999.0) {
        prop_assert_eq!(fuse_average(&vec![WindowOutput::Scalar(v); k]).unwrap(), WindowOutput::Scalar(v));
        let d = encode(label, &SoftLabelCodec::diverse()).unwrap();
        let WindowOutput::Distribution(f) = fuse_average(&vec![WindowOutput::Distribution(d.clone()); k]).unwrap() else {
            panic!("kind changed");
        };
        for (a, b) in f.probs().iter().zip(d.probs()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
