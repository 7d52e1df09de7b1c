//! Code word framing: RS encode, convolutional encode, interleave the coded
//! bits, then pad to a whole number of OFDM symbols.

use alloc::vec::Vec;

use super::conv::{conv_encode, viterbi_decode, ConvCode, Decision};
use super::interleave::{deinterleave, interleave, BlockInterleaver};
use super::rs::{rs_decode, rs_encode, RS_K, RS_N};
use super::{bits_to_bytes, bytes_to_bits};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub code: ConvCode,
    pub interleaver: BlockInterleaver,
    pub decision: Decision,
}

impl Default for CodecConfig {
    fn default() -> Self {
        // 62 * 66 = 2 * (255 * 8 + 6) coded bits per RS code word.
        Self { code: ConvCode::default(), interleaver: BlockInterleaver { rows: 62, cols: 66 }, decision: Decision::Soft }
    }
}

/// Result of decoding one code word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordDecode {
    /// Information bits after RS decoding, or the systematic part of the
    /// Viterbi output when RS decoding failed.
    pub info_bits: Vec<u8>,
    /// Viterbi output, i.e. the RS code word bits before RS decoding.
    pub rs_input_bits: Vec<u8>,
    pub rs_ok: bool,
    pub corrected_bytes: usize,
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.code.constraint_len < 2 || self.code.constraint_len > 16 {
            return Err(Error::Config("constraint length must be in 2..=16".into()));
        }
        if self.interleaver.len() != self.coded_bits() {
            return Err(Error::Config(alloc::format!(
                "interleaver holds {} bits but a code word has {} coded bits",
                self.interleaver.len(),
                self.coded_bits()
            )));
        }
        Ok(())
    }

    pub fn info_bits(&self) -> usize {
        RS_K * 8
    }

    pub fn rs_bits(&self) -> usize {
        RS_N * 8
    }

    pub fn coded_bits(&self) -> usize {
        2 * (self.rs_bits() + self.code.memory())
    }

    /// Coded bits rounded up to whole OFDM symbols.
    pub fn padded_bits(&self, bits_per_symbol: usize) -> usize {
        self.coded_bits().div_ceil(bits_per_symbol) * bits_per_symbol
    }

    /// Channel bits for one code word, zero padded to `bits_per_symbol`.
    pub fn encode_codeword(&self, info_bits: &[u8], bits_per_symbol: usize) -> Result<Vec<u8>> {
        self.validate()?;
        if info_bits.len() != self.info_bits() {
            return Err(Error::Framing(alloc::format!("code word needs {} information bits", self.info_bits())));
        }
        let mut info = [0u8; RS_K];
        info.copy_from_slice(&bits_to_bytes(info_bits));
        let rs_bits = bytes_to_bits(&rs_encode(&info));
        let coded = conv_encode(&self.code, &rs_bits);
        let mut out = interleave(&self.interleaver, &coded)?;
        out.resize(self.padded_bits(bits_per_symbol), 0);
        Ok(out)
    }

    /// Decodes one padded code word of soft values (`+1` for bit 0).
    pub fn decode_codeword(&self, soft: &[f64], bits_per_symbol: usize) -> Result<CodewordDecode> {
        self.validate()?;
        if soft.len() != self.padded_bits(bits_per_symbol) {
            return Err(Error::Framing(alloc::format!(
                "expected {} soft values, got {}",
                self.padded_bits(bits_per_symbol),
                soft.len()
            )));
        }
        let coded = deinterleave(&self.interleaver, &soft[..self.coded_bits()])?;
        let rs_input_bits = viterbi_decode(&self.code, &coded, self.decision)?;
        let bytes = bits_to_bytes(&rs_input_bits);
        Ok(match rs_decode(&bytes) {
            Ok((info, corrected)) => {
                CodewordDecode { info_bits: bytes_to_bits(&info), rs_input_bits, rs_ok: true, corrected_bytes: corrected }
            }
            Err(_) => CodewordDecode {
                info_bits: rs_input_bits[..self.info_bits()].to_vec(),
                rs_input_bits,
                rs_ok: false,
                corrected_bytes: 0,
            },
        })
    }

    /// Encodes consecutive code words.
    pub fn encode_frame(&self, info_bits: &[u8], bits_per_symbol: usize) -> Result<Vec<u8>> {
        if info_bits.len() % self.info_bits() != 0 {
            return Err(Error::Framing("frame must hold whole code words".into()));
        }
        let mut out = Vec::new();
        for chunk in info_bits.chunks(self.info_bits()) {
            out.extend(self.encode_codeword(chunk, bits_per_symbol)?);
        }
        Ok(out)
    }

    pub fn decode_frame(&self, soft: &[f64], bits_per_symbol: usize) -> Result<Vec<CodewordDecode>> {
        let len = self.padded_bits(bits_per_symbol);
        if soft.len() % len != 0 {
            return Err(Error::Framing("soft values must cover whole code words".into()));
        }
        soft.chunks(len).map(|c| self.decode_codeword(c, bits_per_symbol)).collect()
    }

    /// RS code word bits for `info_bits`, for pre-RS error counting.
    pub fn rs_codeword_bits(&self, info_bits: &[u8]) -> Result<Vec<u8>> {
        if info_bits.len() != self.info_bits() {
            return Err(Error::Framing("wrong number of information bits".into()));
        }
        let mut info = [0u8; RS_K];
        info.copy_from_slice(&bits_to_bytes(info_bits));
        Ok(bytes_to_bits(&rs_encode(&info)))
    }
}

/// Maps channel bits to ideal soft values.
pub fn bits_to_soft(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| 1.0 - 2.0 * (b & 1) as f64).collect()
}
