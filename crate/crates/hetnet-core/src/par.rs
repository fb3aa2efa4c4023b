//! Thin data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan work out to rayon; without
//! it they run sequentially. Both variants are order-preserving maps followed
//! by ordered collection — there are no parallel reductions anywhere — so a
//! build with the feature disabled produces bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, collecting results in slice order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * i);
        assert_eq!(v.len(), 1000);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }

    #[test]
    fn map_slice_preserves_order() {
        let items: Vec<f64> = (0..257).map(|i| i as f64 * 0.5).collect();
        let doubled = map_slice(&items, |x| x * 2.0);
        assert_eq!(doubled, (0..257).map(|i| i as f64).collect::<Vec<_>>());
    }
}
