//! On-disk block cache.
//!
//! Layout, all little-endian:
//!
//! ```text
//! lo: u64 | hi: u64 | version: u32
//! omega:      [u8; hi-lo]
//! big_omega:  [u8; hi-lo]
//! mu:         [i8; hi-lo]
//! lambda:     [i8; hi-lo]
//! squarefree: [u64; ceil((hi-lo)/64)]   bit i of word i/64 is n = lo + i
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sieve::{primes_for, BitArray, SievedBlock};

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "MFLAB_CACHE_DIR";

pub fn write_block<W: Write>(block: &SievedBlock, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    w.write_all(&block.lo.to_le_bytes())?;
    w.write_all(&block.hi.to_le_bytes())?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&block.omega)?;
    w.write_all(&block.big_omega)?;
    w.write_all(&block.mu.iter().map(|&x| x as u8).collect::<Vec<_>>())?;
    w.write_all(&block.lambda.iter().map(|&x| x as u8).collect::<Vec<_>>())?;
    for word in block.squarefree.words() {
        w.write_all(&word.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_block<R: Read>(input: R) -> Result<SievedBlock> {
    let mut r = BufReader::new(input);
    let mut u64buf = [0u8; 8];
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u64buf)?;
    let lo = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf)?;
    let hi = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::CacheFormat(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    if lo == 0 || hi <= lo {
        return Err(Error::CacheFormat(format!("bad range [{lo}, {hi})")));
    }
    let len = (hi - lo) as usize;
    let mut read_bytes = |n: usize| -> Result<Vec<u8>> {
        let mut v = vec![0u8; n];
        r.read_exact(&mut v)?;
        Ok(v)
    };
    let omega = read_bytes(len)?;
    let big_omega = read_bytes(len)?;
    let mu = read_bytes(len)?.into_iter().map(|x| x as i8).collect();
    let lambda = read_bytes(len)?.into_iter().map(|x| x as i8).collect();
    let raw = read_bytes(len.div_ceil(64) * 8)?;
    let words = raw
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CacheFormat("trailing bytes after block".into()));
    }
    SievedBlock::from_parts(
        lo,
        hi,
        omega,
        big_omega,
        mu,
        lambda,
        BitArray::from_words(len, words),
        primes_for(hi),
    )
}

/// Canonical file name for a cached block.
pub fn cache_path(dir: &Path, lo: u64, hi: u64) -> PathBuf {
    dir.join(format!("block_{lo}_{hi}_v{FORMAT_VERSION}.bin"))
}

pub fn save(block: &SievedBlock, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = cache_path(dir, block.lo, block.hi);
    write_block(block, File::create(&path)?)?;
    Ok(path)
}

/// Load `[lo, hi)` from `dir` if present.
pub fn load(dir: &Path, lo: u64, hi: u64) -> Result<Option<SievedBlock>> {
    let path = cache_path(dir, lo, hi);
    if !path.exists() {
        return Ok(None);
    }
    read_block(File::open(path)?).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::build_block;

    #[test]
    fn round_trip_is_bit_exact() {
        let block = build_block(100, 1_337, &primes_for(1_337)).unwrap();
        let mut bytes = Vec::new();
        write_block(&block, &mut bytes).unwrap();
        assert_eq!(&bytes[..8], &100u64.to_le_bytes());
        assert_eq!(&bytes[16..20], &FORMAT_VERSION.to_le_bytes());
        let back = read_block(bytes.as_slice()).unwrap();
        assert_eq!(back, block);
        let mut again = Vec::new();
        write_block(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn rejects_wrong_version_and_truncation() {
        let block = build_block(1, 64, &primes_for(64)).unwrap();
        let mut bytes = Vec::new();
        write_block(&block, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[16] = 99;
        assert!(matches!(read_block(bad.as_slice()), Err(Error::CacheFormat(_))));
        assert!(read_block(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_block(long.as_slice()).is_err());
    }
}
