//! Small shared helpers.

/// Order-preserving map over `0..n`, parallel when the `parallel` feature is
/// enabled. Results are collected in index order, so output is deterministic
/// regardless of scheduling.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Format a float with 17 significant digits (lossless f64 round trip).
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Wall-clock stopwatch that degrades to zero on targets without a
/// monotonic clock (wasm).
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
