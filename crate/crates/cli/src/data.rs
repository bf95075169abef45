//! Sieved blocks, optionally cached under `$MFLAB_CACHE_DIR`.

use std::fs;
use std::path::PathBuf;

use mflab::cache::{self, CACHE_ENV};
use mflab::sieve::{build_block_with, primes_for, DEFAULT_SEGMENT};
use mflab::SievedBlock;

use crate::error::CliError;

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Smallest cached block containing `[lo, hi)`.
fn cached_cover(dir: &PathBuf, lo: u64, hi: u64) -> Option<(u64, u64)> {
    let suffix = format!("_v{}.bin", cache::FORMAT_VERSION);
    fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let mid = name.strip_prefix("block_")?.strip_suffix(&suffix)?;
            let (a, b) = mid.split_once('_')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        })
        .filter(|&(a, b)| a <= lo && b >= hi)
        .min_by_key(|&(a, b)| b - a)
}

/// Block covering `[lo, hi)`; may be larger when served from the cache.
pub fn block(lo: u64, hi: u64, segment: Option<usize>) -> Result<SievedBlock, CliError> {
    let dir = cache_dir();
    if let Some(dir) = &dir {
        if let Some((a, b)) = cached_cover(dir, lo, hi) {
            if let Some(block) = cache::load(dir, a, b)? {
                return Ok(block);
            }
        }
    }
    let block = build_block_with(lo, hi, &primes_for(hi), segment.unwrap_or(DEFAULT_SEGMENT))?;
    if let Some(dir) = &dir {
        cache::save(&block, dir)?;
    }
    Ok(block)
}

/// Block `[1, need]` for tables read at `|n| <= need`.
pub fn block_to(need: u64, segment: Option<usize>) -> Result<SievedBlock, CliError> {
    block(1, need.max(1) + 1, segment)
}
