use crate::real::Real;

/// Ranks of `v` with 1 for the smallest value.
///
/// Exact ties are broken by position and logged; continuous latent values
/// tie with probability zero, so a tie indicates degenerate input.
pub fn rank_of<T: Real>(v: &[T]) -> Vec<usize> {
    let (ranks, tied) = rank_with_ties(v);
    if tied {
        log::warn!("rank_of: exact ties broken by index order");
    }
    ranks
}

/// Like [`rank_of`], additionally reporting whether any tie was broken.
pub fn rank_with_ties<T: Real>(v: &[T]) -> (Vec<usize>, bool) {
    let order = argsort(v);
    let mut ranks = vec![0; v.len()];
    let mut tied = false;
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
        if pos > 0 && v[order[pos - 1]] == v[i] {
            tied = true;
        }
    }
    (ranks, tied)
}

/// Indices that sort `v` ascending (stable, NaN last).
pub fn argsort<T: Real>(v: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or_else(|| v[a].is_nan().cmp(&v[b].is_nan())));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(rank_of(&[0.2, -1.0, 0.7]), vec![2, 1, 3]);
        assert_eq!(rank_of(&[5.0]), vec![1]);
        assert_eq!(rank_of(&[1.0, 2.0, 3.0]), vec![1, 2, 3]);
        assert_eq!(rank_with_ties(&[1.0, 1.0, 0.0]), (vec![2, 3, 1], true));
    }

    proptest! {
        #[test]
        fn monotone_invariance(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let t: Vec<f64> = v.iter().map(|x| (x / 100.0).exp() * 3.0 - 7.0).collect();
            prop_assert_eq!(rank_of(&v), rank_of(&t));
            let mut r = rank_of(&v);
            r.sort_unstable();
            prop_assert_eq!(r, (1..=v.len()).collect::<Vec<_>>());
        }
    }
}
