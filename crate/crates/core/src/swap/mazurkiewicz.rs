use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Trace equivalence of two words under the independence relation `indep`
/// (assumed symmetric and irreflexive).
///
/// The words are equivalent iff they have the same letters with the same
/// multiplicities and, for every dependent pair of letters `(a, b)`
/// (including `a = b`), their projections onto `{a, b}` coincide.
pub fn trace_equivalent<L: Ord>(w1: &[L], w2: &[L], indep: impl Fn(&L, &L) -> bool) -> bool {
    if w1.len() != w2.len() {
        return false;
    }
    fn count<L: Ord>(w: &[L]) -> BTreeMap<&L, usize> {
        let mut m = BTreeMap::new();
        for l in w {
            *m.entry(l).or_insert(0usize) += 1;
        }
        m
    }
    fn proj<'w, L: Ord>(w: &'w [L], a: &L, b: &L) -> Vec<&'w L> {
        w.iter().filter(|l| *l == a || *l == b).collect()
    }
    let (c1, c2) = (count(w1), count(w2));
    if c1 != c2 {
        return false;
    }
    let alphabet: Vec<&L> = c1.keys().copied().collect();
    for (i, a) in alphabet.iter().enumerate() {
        for b in &alphabet[i..] {
            if a != b && indep(a, b) {
                continue;
            }
            if proj(w1, a, b) != proj(w2, a, b) {
                return false;
            }
        }
    }
    true
}

/// The equivalence class of `word`, generated by swapping adjacent
/// independent letters. Returns `None` if the class exceeds `limit` words.
pub fn trace_class<L: Ord + Clone>(
    word: &[L],
    indep: impl Fn(&L, &L) -> bool,
    limit: usize,
) -> Option<BTreeSet<Vec<L>>> {
    let mut seen = BTreeSet::from([word.to_vec()]);
    let mut queue = VecDeque::from([word.to_vec()]);
    while let Some(w) = queue.pop_front() {
        for k in 0..w.len().saturating_sub(1) {
            if w[k] != w[k + 1] && indep(&w[k], &w[k + 1]) {
                let mut v = w.clone();
                v.swap(k, k + 1);
                if seen.insert(v.clone()) {
                    if seen.len() > limit {
                        return None;
                    }
                    queue.push_back(v);
                }
            }
        }
    }
    Some(seen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i12(a: &&str, b: &&str) -> bool {
        matches!((*a, *b), ("t1", "t2") | ("t2", "t1"))
    }

    #[test]
    fn worked_example_pair() {
        let w1 = ["t0", "t1", "t1", "t2", "t0"];
        let w2 = ["t0", "t2", "t1", "t1", "t0"];
        assert!(trace_equivalent(&w1, &w2, i12));
        assert!(trace_equivalent(&w1, &w1, i12));
        assert!(!trace_equivalent(&["t1", "t2"], &["t2", "t1"], |_: &&str, _: &&str| false));
        assert!(!trace_equivalent(&["t0", "t1"], &["t1", "t0"], i12));
        assert!(!trace_equivalent(&["t1"], &["t1", "t1"], i12));
    }

    #[test]
    fn class_of_worked_example() {
        let w = ["t0", "t1", "t1", "t2", "t0"];
        let class = trace_class(&w, i12, 100).unwrap();
        let expected: BTreeSet<Vec<&str>> = [
            vec!["t0", "t1", "t1", "t2", "t0"],
            vec!["t0", "t1", "t2", "t1", "t0"],
            vec!["t0", "t2", "t1", "t1", "t0"],
        ]
        .into_iter()
        .collect();
        assert_eq!(class, expected);
        assert!(trace_class(&w, i12, 2).is_none());
    }
}
