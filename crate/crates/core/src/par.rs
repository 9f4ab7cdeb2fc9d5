//! Data-parallel block summation with a sequential fallback.
//!
//! All reductions in this crate are over exact modular arithmetic, so the
//! result is independent of chunking and evaluation order. The `parallel`
//! feature selects rayon; `force_sequential` lets callers (benches, the
//! CLI `--sequential` flag) pin the sequential path at runtime.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Globally force sequential evaluation even when the `parallel` feature is on.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_sequential() -> bool {
    if cfg!(not(feature = "parallel")) {
        return true;
    }
    FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Split `0..total` into blocks of `block_size`, evaluate each block and fold
/// the results. `eval` must be independent of evaluation order.
pub fn block_sum<T, E, F, M>(total: u64, block_size: u64, eval: F, merge: M) -> Result<T, E>
where
    T: Send,
    E: Send,
    F: Fn(std::ops::Range<u64>) -> Result<T, E> + Sync,
    M: Fn(T, T) -> T + Sync,
{
    assert!(block_size > 0);
    let blocks: Vec<std::ops::Range<u64>> = (0..total)
        .step_by(block_size as usize)
        .map(|start| start..(start + block_size).min(total))
        .collect();
    if blocks.is_empty() {
        panic!("block_sum over empty range");
    }

    #[cfg(feature = "parallel")]
    {
        if !is_sequential() {
            use rayon::prelude::*;
            let parts: Result<Vec<T>, E> = blocks.into_par_iter().map(&eval).collect();
            let mut parts = parts?;
            let mut acc = parts.remove(0);
            for part in parts {
                acc = merge(acc, part);
            }
            return Ok(acc);
        }
    }

    let mut iter = blocks.into_iter();
    let mut acc = eval(iter.next().unwrap())?;
    for range in iter {
        acc = merge(acc, eval(range)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sum_matches_direct_sum() {
        let direct: u64 = (0..1000u64).sum();
        for block in [1u64, 7, 100, 1000, 5000] {
            let got = block_sum::<u64, (), _, _>(
                1000,
                block,
                |r| Ok(r.sum()),
                |a, b| a + b,
            )
            .unwrap();
            assert_eq!(got, direct);
        }
    }

    #[test]
    fn sequential_override_gives_same_result() {
        force_sequential(true);
        let a = block_sum::<u64, (), _, _>(500, 64, |r| Ok(r.map(|x| x * x).sum()), |a, b| a + b)
            .unwrap();
        force_sequential(false);
        let b = block_sum::<u64, (), _, _>(500, 64, |r| Ok(r.map(|x| x * x).sum()), |a, b| a + b)
            .unwrap();
        assert_eq!(a, b);
    }
}
