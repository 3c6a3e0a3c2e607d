//! Antichains of goal bitmasks: the sets of goals an agent (or group) can
//! visit, reduced to their maximal elements.

/// Inserts `m` keeping only maximal masks. Returns false if `m` was dominated.
pub(crate) fn insert_max(family: &mut Vec<u32>, m: u32) -> bool {
    if family.iter().any(|&f| m & !f == 0) {
        return false;
    }
    family.retain(|&f| f & !m != 0);
    family.push(m);
    true
}

/// Inserts `m` keeping only minimal masks.
pub(crate) fn insert_min(family: &mut Vec<u32>, m: u32) {
    if family.iter().any(|&f| f & !m == 0) {
        return;
    }
    family.retain(|&f| m & !f != 0);
    family.push(m);
}

/// Maximal elements of `{a | (b & within) : a in acc, b in next}`.
pub(crate) fn union_conv(acc: &[u32], next: &[u32], within: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for &a in acc {
        for &b in next {
            insert_max(&mut out, a | (b & within));
        }
    }
    out
}

/// Maximal masks reachable by picking one member from every family, restricted
/// to `within`. Empty if some family is empty.
pub(crate) fn union_family(families: &[&[u32]], within: u32) -> Vec<u32> {
    let mut acc = vec![0u32];
    for f in families {
        acc = union_conv(&acc, f, within);
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Whether one member per family can be chosen so their union contains
/// `target`. Every family must be nonempty.
pub(crate) fn covers(families: &[&[u32]], target: u32) -> bool {
    if families.iter().any(|f| f.is_empty()) {
        return false;
    }
    fn go(families: &[&[u32]], used: u64, need: u32) -> bool {
        if need == 0 {
            return true;
        }
        let bit = need & need.wrapping_neg();
        for (n, fam) in families.iter().enumerate() {
            if used >> n & 1 == 1 {
                continue;
            }
            for &m in fam.iter() {
                if m & bit != 0 && go(families, used | 1 << n, need & !m) {
                    return true;
                }
            }
        }
        false
    }
    debug_assert!(families.len() <= 64);
    go(families, 0, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn insert_max_keeps_antichain() {
        let mut f = Vec::new();
        assert!(insert_max(&mut f, 0b001));
        assert!(insert_max(&mut f, 0b011));
        assert!(!insert_max(&mut f, 0b010));
        assert!(insert_max(&mut f, 0b100));
        f.sort();
        assert_eq!(f, vec![0b011, 0b100]);
    }

    #[test]
    fn insert_min_keeps_minimal_sets() {
        let mut f = Vec::new();
        insert_min(&mut f, 0b111);
        insert_min(&mut f, 0b010);
        insert_min(&mut f, 0b110);
        assert_eq!(f, vec![0b010]);
    }

    #[test]
    fn covers_needs_distinct_families() {
        let a: &[u32] = &[0b01, 0b10];
        assert!(!covers(&[a], 0b11));
        assert!(covers(&[a, a], 0b11));
        assert!(!covers(&[a, &[]], 0));
    }

    fn brute_covers(families: &[Vec<u32>], target: u32) -> bool {
        fn rec(families: &[Vec<u32>], acc: u32, target: u32) -> bool {
            match families.split_first() {
                None => acc & target == target,
                Some((f, rest)) => f.iter().any(|&m| rec(rest, acc | m, target)),
            }
        }
        rec(families, 0, target)
    }

    proptest! {
        #[test]
        fn covers_matches_exhaustive_choice(
            fams in prop::collection::vec(prop::collection::vec(0u32..64, 1..4), 1..4),
            target in 0u32..64,
        ) {
            let refs: Vec<&[u32]> = fams.iter().map(|f| f.as_slice()).collect();
            prop_assert_eq!(covers(&refs, target), brute_covers(&fams, target));
            let u = union_family(&refs, target);
            prop_assert_eq!(u.contains(&target), brute_covers(&fams, target));
        }
    }
}
