//! Bandit set updates under random sample streams.

use proptest::prelude::*;

use spatial_bandit::bandit::{confidence_radius, BanditState, Thresholds};
use spatial_bandit::environment::CellIndex;

const T: Thresholds = Thresholds { theta: 0.5, epsilon: 0.05, delta: 0.1 };

proptest! {
    #[test]
    fn radius_shrinks_with_samples(n in 1u64..1_000_000, c in 1usize..500) {
        prop_assert!(confidence_radius(n + 1, c, 0.1) < confidence_radius(n, c, 0.1));
        prop_assert!(confidence_radius(n, c + 1, 0.1) > confidence_radius(n, c, 0.1));
    }

    #[test]
    fn sets_are_monotone_and_goals_unclassified(
        batches in prop::collection::vec((0usize..8, prop::collection::vec(any::<bool>(), 1..12)), 1..120),
        d in 1usize..6,
    ) {
        let mut state = BanditState::new((0..8).map(CellIndex));
        for chunk in batches.chunks(4) {
            let goals = state.select_epoch_goals(d, T.delta).unwrap();
            prop_assert_eq!(goals.len(), d.min(state.unclassified().count()));
            prop_assert!(goals.iter().all(|g| !state.is_classified(*g)));
            prop_assert_eq!(&goals, &state.select_epoch_goals(d, T.delta).unwrap());
            let (keep, reject) = (state.keep.clone(), state.reject.clone());
            for (cell, batch) in chunk {
                state.record_samples(CellIndex(*cell), batch).unwrap();
            }
            state.update_sets(T);
            prop_assert!(keep.is_subset(&state.keep));
            prop_assert!(reject.is_subset(&state.reject));
            prop_assert!(state.keep.is_disjoint(&state.reject));
        }
    }
}
