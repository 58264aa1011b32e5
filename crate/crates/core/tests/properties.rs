use proptest::prelude::*;

use grl_mad::bioeval::{self, ScoreSet};
use grl_mad::regloss;
use grl_mad::sample::LandmarkSet;

fn scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(0.0f64..1.0, 1..30), prop::collection::vec(0.0f64..1.0, 1..30))
}

proptest! {
    #[test]
    fn metrics_invariant_under_monotone_transform((m, b) in scores()) {
        let f = |x: &f64| 3.0 * x.powi(3) + 0.5;
        let s = ScoreSet::from_scores(&m, &b);
        let t = ScoreSet::from_scores(&m.iter().map(f).collect::<Vec<_>>(), &b.iter().map(f).collect::<Vec<_>>());
        prop_assert_eq!(bioeval::eer(&s).unwrap(), bioeval::eer(&t).unwrap());
        prop_assert_eq!(bioeval::auc(&s).unwrap(), bioeval::auc(&t).unwrap());
        prop_assert_eq!(bioeval::apcer_at_bpcer(&s, 0.1).unwrap(), bioeval::apcer_at_bpcer(&t, 0.1).unwrap());
    }

    #[test]
    fn auc_complements_under_class_swap((m, b) in scores()) {
        let a = bioeval::auc(&ScoreSet::from_scores(&m, &b)).unwrap();
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let swapped = bioeval::auc(&ScoreSet::from_scores(&neg(&m), &neg(&b))).unwrap();
        prop_assert!((a + swapped - 1.0).abs() < 1e-12);
    }

    #[test]
    fn landmark_interpolation_is_affine(
        pts in prop::collection::vec((0.0f64..64.0, 0.0f64..64.0, 0.0f64..64.0, 0.0f64..64.0), 1..25),
        alpha in 0.01f64..0.99,
    ) {
        let a = LandmarkSet::new(pts.iter().map(|p| [p.0, p.1]).collect());
        let b = LandmarkSet::new(pts.iter().map(|p| [p.2, p.3]).collect());
        let ab = a.interpolate(&b, alpha).unwrap();
        let ba = b.interpolate(&a, 1.0 - alpha).unwrap();
        for (p, q) in ab.points.iter().zip(&ba.points) {
            prop_assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn js_symmetric_and_bounded(raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..8)) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum::<f64>() + 1e-9; v.into_iter().map(|x| (x + 1e-9 / 8.0) / s).collect::<Vec<_>>() };
        let p = norm(raw.iter().map(|r| r.0).collect());
        let q = norm(raw.iter().map(|r| r.1).collect());
        let a = regloss::js_divergence(&p, &q).unwrap();
        let b = regloss::js_divergence(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1e-15..=std::f64::consts::LN_2 + 1e-12).contains(&a));
    }
}
