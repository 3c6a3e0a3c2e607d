//! Collision repair on random multi-agent walks.

use proptest::prelude::*;

use spatial_bandit::assignment::{deconflict_cycle, detect_conflicts, ConflictKind};
use spatial_bandit::environment::{CellIndex, GridSpec};

const SIDE: usize = 5;

/// Random king walks of `agents` agents over `steps` steps, with distinct
/// cells at every step.
fn walks() -> impl Strategy<Value = Vec<Vec<CellIndex>>> {
    (2usize..=4, 2usize..=7).prop_flat_map(|(agents, steps)| {
        prop::collection::vec(prop::collection::vec(0usize..9, agents), steps).prop_filter_map("needs distinct cells", move |moves| {
            let mut cur: Vec<usize> = (0..agents).map(|a| a * 6).collect();
            let mut out = vec![cur.iter().map(|&c| CellIndex(c)).collect::<Vec<_>>()];
            for row in &moves[1..] {
                let next: Vec<usize> = cur
                    .iter()
                    .zip(row)
                    .map(|(&c, &m)| {
                        let (r, q) = ((c / SIDE) as i64 + m as i64 / 3 - 1, (c % SIDE) as i64 + m as i64 % 3 - 1);
                        if (0..SIDE as i64).contains(&r) && (0..SIDE as i64).contains(&q) { (r as usize) * SIDE + q as usize } else { c }
                    })
                    .collect();
                let mut sorted = next.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() < agents {
                    return None;
                }
                cur = next;
                out.push(cur.iter().map(|&c| CellIndex(c)).collect());
            }
            Some(out)
        })
    })
}

proptest! {
    #[test]
    fn repair_preserves_occupancy_and_removes_crossings(steps in walks()) {
        let grid = GridSpec::new(SIDE, SIDE).unwrap();
        let legal = |a: CellIndex, b: CellIndex| grid.chebyshev(a, b) <= 1;
        let fixed = deconflict_cycle(grid, &steps, legal).unwrap();
        prop_assert_eq!(fixed.len(), steps.len());
        prop_assert_eq!(&fixed[0], &steps[0]);
        for (a, b) in steps.iter().zip(&fixed) {
            let (mut a, mut b) = (a.clone(), b.clone());
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
        for w in fixed.windows(2) {
            prop_assert!((0..w[0].len()).all(|i| legal(w[0][i], w[1][i])));
        }
        let left = detect_conflicts(grid, 0, &fixed).unwrap();
        prop_assert!(left.iter().all(|c| !matches!(c.kind, ConflictKind::Swap | ConflictKind::Crossing)), "{:?}", left);
    }
}
