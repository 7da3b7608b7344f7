//! Data-parallel helpers with a sequential fallback.
//!
//! Every call site that goes through here must merge results in an
//! order-independent way (indexed collect, max, min-with-index tie-break,
//! counts) so outputs are identical for any thread count, including one.
//! The numeric solver and simulator kernels never use these helpers; their
//! traces are bitwise deterministic by sequential construction.

/// Map `0..count` through `f`, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<U: Send, F: Fn(usize) -> U + Sync + Send>(count: usize, f: F) -> Vec<U> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F: Fn(usize) -> U>(count: usize, f: F) -> Vec<U> {
    (0..count).map(f).collect()
}

/// Cap the global thread pool. Call once, early; later calls are ignored.
/// No-op without the `parallel` feature.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}
