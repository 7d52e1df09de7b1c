//! Systematic Reed-Solomon (255, 239) code. Code words list the
//! coefficients from `x^254` down to `x^0`; the 16 parity bytes come last.
//! Generator roots are `alpha^0 .. alpha^15`.

use alloc::vec;
use alloc::vec::Vec;

use super::gf256::Gf256;

pub const RS_N: usize = 255;
pub const RS_K: usize = 239;
pub const RS_T: usize = 8;
const NPAR: usize = RS_N - RS_K;
const FIRST_ROOT: i64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RsDecodeError {
    #[error("received word has the wrong length")]
    Length,
    #[error("too many errors to correct")]
    Uncorrectable,
}

/// Generator coefficients in descending powers, leading 1 included.
fn generator(f: &Gf256) -> Vec<u8> {
    let mut g = vec![1u8];
    for i in 0..NPAR as i64 {
        let root = f.pow_alpha(FIRST_ROOT + i);
        let mut next = vec![0u8; g.len() + 1];
        for (j, &c) in g.iter().enumerate() {
            next[j] ^= c;
            next[j + 1] ^= f.mul(c, root);
        }
        g = next;
    }
    g
}

pub fn rs_encode(info: &[u8; RS_K]) -> [u8; RS_N] {
    let f = Gf256::new();
    let g = generator(&f);
    let mut rem = [0u8; NPAR];
    for &m in info {
        let fb = m ^ rem[0];
        rem.copy_within(1.., 0);
        rem[NPAR - 1] = 0;
        if fb != 0 {
            for j in 0..NPAR {
                rem[j] ^= f.mul(fb, g[j + 1]);
            }
        }
    }
    let mut out = [0u8; RS_N];
    out[..RS_K].copy_from_slice(info);
    out[RS_K..].copy_from_slice(&rem);
    out
}

fn syndromes(f: &Gf256, word: &[u8]) -> [u8; NPAR] {
    let mut s = [0u8; NPAR];
    for (j, sj) in s.iter_mut().enumerate() {
        let x = f.pow_alpha(FIRST_ROOT + j as i64);
        *sj = word.iter().fold(0u8, |acc, &c| f.mul(acc, x) ^ c);
    }
    s
}

/// Corrects up to eight byte errors. Returns the information bytes and the
/// number of corrected bytes.
pub fn rs_decode(received: &[u8]) -> core::result::Result<([u8; RS_K], usize), RsDecodeError> {
    if received.len() != RS_N {
        return Err(RsDecodeError::Length);
    }
    let f = Gf256::new();
    let mut word = [0u8; RS_N];
    word.copy_from_slice(received);
    let s = syndromes(&f, &word);
    let info = |w: &[u8; RS_N]| {
        let mut out = [0u8; RS_K];
        out.copy_from_slice(&w[..RS_K]);
        out
    };
    if s.iter().all(|&v| v == 0) {
        return Ok((info(&word), 0));
    }

    // Berlekamp-Massey; polynomials in ascending powers.
    let mut lambda = vec![1u8];
    let mut prev = vec![1u8];
    let mut order = 0usize;
    let mut shift = 1usize;
    let mut prev_disc = 1u8;
    for n in 0..NPAR {
        let mut d = s[n];
        for i in 1..=order.min(lambda.len() - 1) {
            d ^= f.mul(lambda[i], s[n - i]);
        }
        if d == 0 {
            shift += 1;
            continue;
        }
        let coef = f.div(d, prev_disc);
        let mut updated = lambda.clone();
        if updated.len() < prev.len() + shift {
            updated.resize(prev.len() + shift, 0);
        }
        for (i, &b) in prev.iter().enumerate() {
            updated[i + shift] ^= f.mul(coef, b);
        }
        if 2 * order <= n {
            prev = core::mem::replace(&mut lambda, updated);
            order = n + 1 - order;
            prev_disc = d;
            shift = 1;
        } else {
            lambda = updated;
            shift += 1;
        }
    }
    while lambda.len() > 1 && *lambda.last().unwrap() == 0 {
        lambda.pop();
    }
    let degree = lambda.len() - 1;
    if degree != order || degree > RS_T {
        return Err(RsDecodeError::Uncorrectable);
    }

    // omega = S(x) lambda(x) mod x^16
    let mut omega = [0u8; NPAR];
    for (i, &l) in lambda.iter().enumerate() {
        for j in 0..NPAR - i {
            omega[i + j] ^= f.mul(l, s[j]);
        }
    }
    let deriv: Vec<u8> = (1..lambda.len()).map(|i| if i % 2 == 1 { lambda[i] } else { 0 }).collect();

    let mut found = 0usize;
    for power in 0..RS_N {
        let x_inv = f.pow_alpha(-(power as i64));
        if f.eval_ascending(&lambda, x_inv) != 0 {
            continue;
        }
        found += 1;
        let denom = f.eval_ascending(&deriv, x_inv);
        if denom == 0 {
            return Err(RsDecodeError::Uncorrectable);
        }
        let num = f.eval_ascending(&omega, x_inv);
        let x_factor = f.pow_alpha((1 - FIRST_ROOT) * power as i64);
        let magnitude = f.mul(x_factor, f.div(num, denom));
        word[RS_N - 1 - power] ^= magnitude;
    }
    if found != degree || syndromes(&f, &word).iter().any(|&v| v != 0) {
        return Err(RsDecodeError::Uncorrectable);
    }
    Ok((info(&word), found))
}
