//! Longest common subsequence with a tie-break that does not depend on
//! argument order: when both skips preserve the optimum, the side whose
//! current item sorts first is skipped. Swapping the inputs therefore mirrors
//! the alignment exactly.

/// Cell budget for the quadratic table; larger middles are treated as fully changed.
const MAX_CELLS: usize = 16_000_000;

/// Index pairs `(i, j)` with `a[i] == b[j]`, strictly increasing in both.
pub(crate) fn lcs_pairs<T: Ord>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let mut pairs: Vec<(usize, usize)> = (0..prefix).map(|i| (i, i)).collect();

    let mid_a = &a[prefix..a.len() - suffix];
    let mid_b = &b[prefix..b.len() - suffix];
    let (n, m) = (mid_a.len(), mid_b.len());
    if n > 0 && m > 0 && (n + 1) * (m + 1) <= MAX_CELLS {
        let width = m + 1;
        // table[i * width + j] = LCS length of mid_a[i..] and mid_b[j..]
        let mut table = vec![0u32; (n + 1) * width];
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                table[i * width + j] = if mid_a[i] == mid_b[j] {
                    table[(i + 1) * width + j + 1] + 1
                } else {
                    table[(i + 1) * width + j].max(table[i * width + j + 1])
                };
            }
        }
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            if mid_a[i] == mid_b[j] {
                pairs.push((prefix + i, prefix + j));
                i += 1;
                j += 1;
                continue;
            }
            let skip_a = table[(i + 1) * width + j];
            let skip_b = table[i * width + j + 1];
            if skip_a > skip_b || (skip_a == skip_b && mid_a[i] < mid_b[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    pairs.extend((0..suffix).map(|k| (a.len() - suffix + k, b.len() - suffix + k)));
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_lcs_len(a: &[u8], b: &[u8]) -> usize {
        // exhaustive over subsets of the shorter input
        let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let mut best = 0;
        for mask in 0u32..(1 << short.len()) {
            let sub: Vec<u8> = (0..short.len()).filter(|k| mask & (1 << k) != 0).map(|k| short[k]).collect();
            let mut it = long.iter();
            if sub.iter().all(|c| it.any(|x| x == c)) {
                best = best.max(sub.len());
            }
        }
        best
    }

    #[test]
    fn small_cases() {
        assert_eq!(lcs_pairs(&["a", "b", "c"], &["a", "x", "c"]), vec![(0, 0), (2, 2)]);
        assert!(lcs_pairs::<&str>(&[], &["a"]).is_empty());
        assert_eq!(lcs_pairs(&[1, 2, 3], &[1, 2, 3]).len(), 3);
    }

    #[test]
    fn swap_mirrors() {
        let a = ["b", "a"];
        let b = ["a", "b"];
        let ab = lcs_pairs(&a, &b);
        let ba: Vec<_> = lcs_pairs(&b, &a).into_iter().map(|(i, j)| (j, i)).collect();
        assert_eq!(ab, ba);
    }

    proptest::proptest! {
        #[test]
        fn optimal_and_valid(a in proptest::collection::vec(0u8..4, 0..10), b in proptest::collection::vec(0u8..4, 0..10)) {
            let pairs = lcs_pairs(&a, &b);
            for w in pairs.windows(2) {
                proptest::prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
            }
            for &(i, j) in &pairs {
                proptest::prop_assert_eq!(a[i], b[j]);
            }
            proptest::prop_assert_eq!(pairs.len(), brute_lcs_len(&a, &b));
            let swapped: Vec<_> = lcs_pairs(&b, &a).into_iter().map(|(i, j)| (j, i)).collect();
            proptest::prop_assert_eq!(swapped, pairs);
        }
    }
}
