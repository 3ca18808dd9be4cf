//! Execution-mode switch for the data-parallel inner loops.
//!
//! Batch gradient accumulation, batch evaluation and revision diffing map the
//! same closure over independent items. `ExecMode::Parallel` fans the work out
//! with rayon, `ExecMode::Sequential` runs in place; both produce results in
//! input order, so outputs are bit-identical either way. Without the
//! `parallel` feature only the sequential path is compiled.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[cfg_attr(feature = "parallel", default)]
    Parallel,
}

/// Order-preserving map over a slice.
pub fn map_ordered<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
    }
}

/// Fixed chunk width for chunked folds. A constant (rather than the thread
/// count) keeps the floating-point reduction order identical on every
/// machine and in both exec modes.
pub const FOLD_CHUNK: usize = 8;

/// Map `f` over fixed-size chunks (in order), then fold the chunk results
/// left to right. The parallel mode only parallelizes across chunks, so the
/// reduction order never changes.
pub fn fold_chunked<T, A, FMap, FMerge>(
    mode: ExecMode,
    items: &[T],
    map_chunk: FMap,
    mut merge: FMerge,
) -> Option<A>
where
    T: Sync,
    A: Send,
    FMap: Fn(&[T]) -> A + Sync + Send,
    FMerge: FnMut(A, A) -> A,
{
    let chunk_results: Vec<A> = match mode {
        ExecMode::Sequential => items.chunks(FOLD_CHUNK).map(map_chunk).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_chunks(FOLD_CHUNK).map(map_chunk).collect()
        }
    };
    chunk_results.into_iter().reduce(|a, b| merge(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_ordered_preserves_input_order() {
        let items: Vec<u64> = (0..100).collect();
        let seq = map_ordered(ExecMode::Sequential, &items, |&x| x * x);
        assert_eq!(seq, items.iter().map(|&x| x * x).collect::<Vec<_>>());
        #[cfg(feature = "parallel")]
        {
            let par = map_ordered(ExecMode::Parallel, &items, |&x| x * x);
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn fold_chunked_reduction_order_is_mode_independent() {
        // Floating point sums differ under re-association; identical results
        // across modes show the chunking really is fixed.
        let items: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let sum_chunk = |chunk: &[f64]| chunk.iter().fold(0.0, |a, b| a + b);
        let seq = fold_chunked(ExecMode::Sequential, &items, sum_chunk, |a, b| a + b).unwrap();
        #[cfg(feature = "parallel")]
        {
            let par = fold_chunked(ExecMode::Parallel, &items, sum_chunk, |a, b| a + b).unwrap();
            assert_eq!(seq.to_bits(), par.to_bits());
        }
        assert!(seq > 0.0);
    }
}
