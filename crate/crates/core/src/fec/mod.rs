//! Channel coding: outer Reed-Solomon (255, 239) over GF(2^8), inner
//! rate-1/2 constraint-length-7 convolutional code with Viterbi decoding,
//! and a row-column block interleaver on the coded bits.

mod conv;
mod frame;
mod gf256;
mod interleave;
mod rs;

pub use conv::{conv_encode, viterbi_decode, ConvCode, Decision};
pub use frame::{bits_to_soft, CodecConfig, CodewordDecode};
pub use gf256::Gf256;
pub use interleave::{deinterleave, interleave, BlockInterleaver};
pub use rs::{rs_decode, rs_encode, RsDecodeError, RS_K, RS_N, RS_T};

/// Most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> alloc::vec::Vec<u8> {
    bytes.iter().flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
}

/// Inverse of [`bytes_to_bits`]; a trailing partial byte is zero-padded.
pub fn bits_to_bytes(bits: &[u8]) -> alloc::vec::Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}
