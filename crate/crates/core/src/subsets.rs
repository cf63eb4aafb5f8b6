//! Combination enumeration helpers.

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `sum_{k=1}^{s} C(p, k)`, the number of nonempty subsets of size at most `s`.
pub fn subsets_up_to(p: usize, s: usize) -> u128 {
    (1..=s.min(p)).fold(0u128, |acc, k| acc.saturating_add(binomial(p, k)))
}

/// Calls `f` on every size-`k` combination of `lo..hi` whose first element is
/// `first`, in lexicographic order.
pub fn for_each_with_first<F: FnMut(&[usize])>(first: usize, hi: usize, k: usize, mut f: F) {
    if k == 0 || first >= hi || hi - first < k {
        return;
    }
    let mut idx: Vec<usize> = (first..first + k).collect();
    loop {
        f(&idx);
        // Advance positions 1..k; position 0 stays fixed.
        let mut pos = k;
        loop {
            if pos <= 1 {
                return;
            }
            pos -= 1;
            if idx[pos] < hi - (k - pos) {
                break;
            }
        }
        idx[pos] += 1;
        for q in (pos + 1)..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(20, 8), 125_970);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(7, 0), 1);
        assert_eq!(subsets_up_to(20, 20), (1 << 20) - 1);
    }

    #[test]
    fn enumeration_covers_every_combination_once() {
        let (p, k) = (7, 3);
        let mut all = Vec::new();
        for first in 0..p {
            for_each_with_first(first, p, k, |c| all.push(c.to_vec()));
        }
        assert_eq!(all.len() as u128, binomial(p, k));
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, all);
    }
}
