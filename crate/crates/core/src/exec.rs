//! Indexed data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`map_indexed`] fans out over
//! rayon; without it the same call compiles to a plain sequential map.
//! Results are identical either way because every work item derives its
//! state purely from its own index. [`map_indexed_serial`] is always
//! sequential and serves as the benchmark baseline and the equivalence
//! reference in tests.

#[cfg(feature = "parallel")]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Always-sequential twin of [`map_indexed`].
pub fn map_indexed_serial<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_agree() {
        let par = map_indexed(64, |i| i * i);
        let ser = map_indexed_serial(64, |i| i * i);
        assert_eq!(par, ser);
    }

    #[test]
    fn preserves_index_order() {
        let v = map_indexed(1000, |i| i);
        assert!(v.iter().enumerate().all(|(i, &x)| i == x));
    }
}
