use crate::error::{Error, Result};
use crate::rng;

/// Per-rank sample indices for one epoch.
///
/// The optionally shuffled order of `0..n` (keyed by `(seed, epoch)`) is padded
/// by repeating from the front up to a multiple of `world`; rank `r` takes
/// positions `r, r + world, r + 2 * world, ...`.
pub fn shard_indices(
    n: usize,
    world: usize,
    rank: usize,
    epoch: u64,
    shuffle: bool,
    seed: u64,
) -> Result<Vec<usize>> {
    if world == 0 {
        return Err(Error::Config("world size must be positive".into()));
    }
    if rank >= world {
        return Err(Error::Config(format!(
            "rank {rank} outside world of {world}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        rng::shuffle(&mut order, &mut rng::keyed_u64(seed, epoch));
    }
    if n == 0 {
        return Ok(order);
    }
    let total = n.div_ceil(world) * world;
    let padding: Vec<usize> = order.iter().copied().cycle().take(total - n).collect();
    order.extend(padding);
    Ok(order.into_iter().skip(rank).step_by(world).collect())
}

/// Consecutive chunks of `batch_size`; the final short chunk is dropped iff `drop_last`.
pub fn make_batches(indices: &[usize], batch_size: usize, drop_last: bool) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    indices
        .chunks(batch_size)
        .filter(|c| !drop_last || c.len() == batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}
