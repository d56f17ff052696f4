//! Deterministic tree summation.
//!
//! Every mean in the crate is reduced with one fixed tree so that the graph
//! route and the compiled batched route produce bitwise-identical sums:
//!
//! * a run of at most [`FOLD_BLOCK`] values is folded left to right;
//! * a longer run of `n` values is split at the largest power of two `p < n`
//!   into `[0, p)` and `[p, n)`, each reduced recursively, then added.
//!
//! Subtrees are therefore dyadic blocks, so any power-of-two chunking of the
//! points (with chunk size at least `FOLD_BLOCK`) reduces chunk-locally and then
//! combines the chunk partials with [`pairwise`] to the same result.

/// Length of the left-fold leaves of the summation tree.
pub const FOLD_BLOCK: usize = 8;

fn split_point(n: usize) -> usize {
    debug_assert!(n >= 2);
    let p = n.next_power_of_two();
    if p == n {
        n / 2
    } else {
        p / 2
    }
}

/// Tree reduction of `xs` with leaves of at most [`FOLD_BLOCK`] values.
/// Returns `None` for an empty slice.
pub fn tree_reduce<T, F>(xs: &[T], add: &F) -> Option<T>
where
    T: Clone,
    F: Fn(&T, &T) -> T,
{
    reduce_with_leaf(xs, FOLD_BLOCK, add)
}

/// Tree reduction with unit leaves (pure pairwise over dyadic splits).
pub fn pairwise<T, F>(xs: &[T], add: &F) -> Option<T>
where
    T: Clone,
    F: Fn(&T, &T) -> T,
{
    reduce_with_leaf(xs, 1, add)
}

fn reduce_with_leaf<T, F>(xs: &[T], leaf: usize, add: &F) -> Option<T>
where
    T: Clone,
    F: Fn(&T, &T) -> T,
{
    match xs.len() {
        0 => None,
        n if n <= leaf => {
            let mut acc = xs[0].clone();
            for x in &xs[1..] {
                acc = add(&acc, x);
            }
            Some(acc)
        }
        n => {
            let p = split_point(n);
            let l = reduce_with_leaf(&xs[..p], leaf, add)?;
            let r = reduce_with_leaf(&xs[p..], leaf, add)?;
            Some(add(&l, &r))
        }
    }
}

/// [`tree_reduce`] over `f64`, zero for an empty slice.
pub fn tree_sum(xs: &[f64]) -> f64 {
    tree_reduce(xs, &|a: &f64, b: &f64| a + b).unwrap_or(0.0)
}

/// [`pairwise`] over `f64`, zero for an empty slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise(xs, &|a: &f64, b: &f64| a + b).unwrap_or(0.0)
}

/// Mean of `xs` reduced with [`tree_sum`].
pub fn tree_mean(xs: &[f64]) -> f64 {
    tree_sum(xs) / xs.len() as f64
}
