use alloc::vec::Vec;

use crate::{Error, Result};

/// Writes row by row into a `rows x cols` array and reads column by column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInterleaver {
    pub rows: usize,
    pub cols: usize,
}

impl BlockInterleaver {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config("interleaver dimensions must be positive".into()));
        }
        Ok(Self { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::Framing(alloc::format!("interleaver holds {} items, got {n}", self.len())));
        }
        Ok(())
    }
}

pub fn interleave<T: Copy>(il: &BlockInterleaver, data: &[T]) -> Result<Vec<T>> {
    il.check(data.len())?;
    Ok((0..il.cols).flat_map(|c| (0..il.rows).map(move |r| data[r * il.cols + c])).collect())
}

pub fn deinterleave<T: Copy + Default>(il: &BlockInterleaver, data: &[T]) -> Result<Vec<T>> {
    il.check(data.len())?;
    let mut out = alloc::vec![T::default(); data.len()];
    let mut i = 0;
    for c in 0..il.cols {
        for r in 0..il.rows {
            out[r * il.cols + c] = data[i];
            i += 1;
        }
    }
    Ok(out)
}
