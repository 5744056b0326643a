use proptest::prelude::*;

use intake_core::meal::{dbscan_1d, localize_meals, DbscanConfig, MealLocalizeConfig};
use intake_core::{EventSet, Label};

/// Bite times on a quarter-second grid: a few clusters plus stray bites.
fn bite_sets() -> impl Strategy<Value = EventSet> {
    let cluster = (0u32..4000, 1usize..50, 8u32..240);
    (
        prop::collection::vec(cluster, 0..5),
        prop::collection::vec(0u32..80_000, 0..8),
    )
        .prop_map(|(clusters, strays)| {
            let mut ts: Vec<f64> = strays.iter().map(|&q| q as f64 * 0.25).collect();
            for (start, n, spacing) in clusters {
                for i in 0..n {
                    ts.push((start as f64 * 4.0 + i as f64 * spacing as f64) * 0.25);
                }
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            EventSet::new(ts).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn meals_are_long_separated_and_covered(bites in bite_sets()) {
        let cfg = MealLocalizeConfig::default();
        let meals = localize_meals(&bites, &cfg).unwrap();
        for m in &meals {
            prop_assert!(m.duration() >= cfg.min_meal_s);
            prop_assert_eq!(m.label, Label::Meal);
            // Meals start and end on bites.
            prop_assert!(bites.as_slice().contains(&m.start));
            prop_assert!(bites.as_slice().contains(&m.end));
        }
        for w in meals.intervals().windows(2) {
            prop_assert!(w[1].start - w[0].end > cfg.merge_gap_s);
        }
    }

    #[test]
    fn idempotent_on_own_bites(bites in bite_sets()) {
        let cfg = MealLocalizeConfig::default();
        let meals = localize_meals(&bites, &cfg).unwrap();
        let kept: Vec<f64> = meals.iter().flat_map(|m| bites.within(m.start, m.end).as_slice().to_vec()).collect();
        prop_assert_eq!(localize_meals(&EventSet::new(kept).unwrap(), &cfg).unwrap(), meals);
    }

    #[test]
    fn translation_equivariant(bites in bite_sets(), shift in -100_000i32..100_000) {
        let cfg = MealLocalizeConfig::default();
        let delta = shift as f64;
        let moved = localize_meals(&bites.shifted(delta), &cfg).unwrap();
        prop_assert_eq!(moved, localize_meals(&bites, &cfg).unwrap().shifted(delta));
    }

    #[test]
    fn dbscan_clusters_are_disjoint_and_span_bites(bites in bite_sets()) {
        let clusters = dbscan_1d(&bites, &DbscanConfig::default()).unwrap();
        for c in &clusters {
            prop_assert!(bites.as_slice().contains(&c.start) && bites.as_slice().contains(&c.end));
            prop_assert!(bites.within(c.start, c.end).len() >= DbscanConfig::default().min_pts);
        }
    }
}
