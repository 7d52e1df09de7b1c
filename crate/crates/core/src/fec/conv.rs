use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Rate-1/2 feedforward convolutional code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCode {
    pub constraint_len: usize,
    /// Generator taps; the most significant of the `constraint_len` bits
    /// weights the current input.
    pub generators: [u32; 2],
}

impl Default for ConvCode {
    fn default() -> Self {
        Self { constraint_len: 7, generators: [0o171, 0o155] }
    }
}

/// Soft or hard input to the Viterbi decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decision {
    #[default]
    Soft,
    Hard,
}

impl ConvCode {
    pub fn memory(&self) -> usize {
        self.constraint_len - 1
    }

    fn n_states(&self) -> usize {
        1 << self.memory()
    }

    /// Output pair for `input` entering a register whose previous inputs are
    /// `state` (most recent in the highest bit).
    fn output(&self, state: usize, input: u8) -> [u8; 2] {
        let reg = ((input as u32) << self.memory()) | state as u32;
        [(reg & self.generators[0]).count_ones() as u8 & 1, (reg & self.generators[1]).count_ones() as u8 & 1]
    }

    fn next_state(&self, state: usize, input: u8) -> usize {
        ((input as usize) << (self.memory() - 1)) | (state >> 1)
    }
}

/// Encodes `bits` and appends `memory` zero flush bits, returning
/// `2 * (bits.len() + memory)` coded bits.
pub fn conv_encode(code: &ConvCode, bits: &[u8]) -> Vec<u8> {
    let mut state = 0usize;
    let mut out = Vec::with_capacity(2 * (bits.len() + code.memory()));
    for &b in bits.iter().chain(core::iter::repeat(&0u8).take(code.memory())) {
        let b = b & 1;
        out.extend_from_slice(&code.output(state, b));
        state = code.next_state(state, b);
    }
    out
}

/// Maximum-likelihood decoding of a terminated code word. `soft` holds one
/// value per coded bit with `+1` meaning bit 0 and `-1` meaning bit 1;
/// branches are scored by squared Euclidean distance. Hard decisions first
/// slice each value to `+-1`. Returns the message bits without the flush.
pub fn viterbi_decode(code: &ConvCode, soft: &[f64], decision: Decision) -> Result<Vec<u8>> {
    if soft.len() % 2 != 0 || soft.len() < 2 * code.memory() {
        return Err(Error::Framing("coded length must be even and cover the flush bits".into()));
    }
    let steps = soft.len() / 2;
    let ns = code.n_states();
    let mut table = vec![[[0.0f64; 2]; 2]; ns];
    for (s, row) in table.iter_mut().enumerate() {
        for b in 0..2u8 {
            let o = code.output(s, b);
            row[b as usize] = [1.0 - 2.0 * o[0] as f64, 1.0 - 2.0 * o[1] as f64];
        }
    }
    let mut metric = vec![f64::INFINITY; ns];
    metric[0] = 0.0;
    let mut next = vec![f64::INFINITY; ns];
    // survivors[t * ns + s] = predecessor state
    let mut survivors = vec![0u16; steps * ns];
    let half = ns / 2;
    for t in 0..steps {
        let mut r = [soft[2 * t], soft[2 * t + 1]];
        if decision == Decision::Hard {
            for v in &mut r {
                *v = if *v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        // Next state `ns_` has input bit = top bit; predecessors are
        // `(ns_ << 1) & mask` and that plus one.
        for ns_ in 0..ns {
            let b = (ns_ >= half) as usize;
            let p0 = (ns_ << 1) & (ns - 1);
            let p1 = p0 | 1;
            let cost = |p: usize| {
                let e = table[p][b];
                let d0 = r[0] - e[0];
                let d1 = r[1] - e[1];
                metric[p] + d0 * d0 + d1 * d1
            };
            let (c0, c1) = (cost(p0), cost(p1));
            let (best, pred) = if c1 < c0 { (c1, p1) } else { (c0, p0) };
            next[ns_] = best;
            survivors[t * ns + ns_] = pred as u16;
        }
        core::mem::swap(&mut metric, &mut next);
    }
    if !metric[0].is_finite() {
        return Err(Error::Numeric("decoder metrics are not finite".into()));
    }
    let mut bits = vec![0u8; steps];
    let mut s = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (s >= half) as u8;
        s = survivors[t * ns + s] as usize;
    }
    bits.truncate(steps - code.memory());
    Ok(bits)
}
