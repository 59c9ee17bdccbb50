//! Elementary Fast-SSC message operations.
//!
//! LLRs are sign-magnitude: a hard decision reads the sign bit, so `-0.0`
//! decides 1 and `+0.0` decides 0. An exact cancellation in `g` produces
//! `+0.0`. Under these rules every specialized node decoder below returns
//! exactly what min-sum successive cancellation returns on the same
//! constituent code, ties included.

use crate::code_model::QuantSpec;
use crate::error::{Error, Result};

/// LLR scalar. Fixed-point values are integers held in an `f32`.
pub type Llr = f32;
/// Hard bit, 0 or 1.
pub type Bit = u8;

#[inline]
pub fn hard_decision(x: Llr) -> Bit {
    x.is_sign_negative() as Bit
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

#[inline]
fn min_sum(a: Llr, b: Llr) -> Llr {
    let mag = a.abs().min(b.abs());
    if a.is_sign_negative() != b.is_sign_negative() {
        -mag
    } else {
        mag
    }
}

/// `f(a, b) = sign(a) sign(b) min(|a|, |b|)` into `out`.
#[inline]
pub fn f_into(a: &[Llr], b: &[Llr], out: &mut [Llr]) {
    debug_assert!(a.len() == b.len() && a.len() == out.len());
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = min_sum(x, y);
    }
}

/// `g(a, b, u) = b + (1 - 2u) a`, saturating in fixed mode.
#[inline]
pub fn g_into(a: &[Llr], b: &[Llr], u: &[Bit], quant: &QuantSpec, out: &mut [Llr]) {
    debug_assert!(a.len() == b.len() && a.len() == u.len() && a.len() == out.len());
    for (((o, &x), &y), &bit) in out.iter_mut().zip(a).zip(b).zip(u) {
        let sum = if bit == 0 { y + x } else { y - x };
        *o = quant.saturate(sum);
    }
}

/// `[l ^ r, r]`.
#[inline]
pub fn combine_into(left: &[Bit], right: &[Bit], out: &mut [Bit]) {
    let half = left.len();
    debug_assert!(right.len() == half && out.len() == 2 * half);
    for i in 0..half {
        out[i] = left[i] ^ right[i];
        out[half + i] = right[i];
    }
}

pub fn f_op(a: &[Llr], b: &[Llr]) -> Result<Vec<Llr>> {
    check_len(a.len(), b.len())?;
    let mut out = vec![0.0; a.len()];
    f_into(a, b, &mut out);
    Ok(out)
}

pub fn g_op(a: &[Llr], b: &[Llr], u: &[Bit], quant: &QuantSpec) -> Result<Vec<Llr>> {
    check_len(a.len(), b.len())?;
    check_len(a.len(), u.len())?;
    let mut out = vec![0.0; a.len()];
    g_into(a, b, u, quant, &mut out);
    Ok(out)
}

pub fn combine(left: &[Bit], right: &[Bit]) -> Result<Vec<Bit>> {
    check_len(left.len(), right.len())?;
    let mut out = vec![0; 2 * left.len()];
    combine_into(left, right, &mut out);
    Ok(out)
}

fn check_min_len(op: &'static str, alpha: &[Llr], min: usize) -> Result<()> {
    if alpha.len() < min {
        return Err(Error::TooShort { op, min, got: alpha.len() });
    }
    Ok(())
}

/// Rate-0: every bit is frozen.
pub fn rate0_decode(alpha: &[Llr]) -> Result<Vec<Bit>> {
    check_min_len("rate0_decode", alpha, 1)?;
    Ok(vec![0; alpha.len()])
}

/// Rate-1: elementwise hard decision.
pub fn rate1_decode(alpha: &[Llr]) -> Result<Vec<Bit>> {
    check_min_len("rate1_decode", alpha, 1)?;
    Ok(alpha.iter().map(|&x| hard_decision(x)).collect())
}

/// Sum of all LLRs through a saturating butterfly adder tree (second half
/// folded onto the first, one saturation per level).
pub fn repetition_sum(alpha: &[Llr], quant: &QuantSpec) -> Llr {
    let mut acc = alpha.to_vec();
    let mut len = acc.len();
    while len > 1 {
        len /= 2;
        for i in 0..len {
            acc[i] = quant.saturate(acc[len + i] + acc[i]);
        }
    }
    acc[0]
}

/// Repetition: one decision on the LLR sum, replicated.
pub fn rep_decode(alpha: &[Llr], quant: &QuantSpec) -> Result<Vec<Bit>> {
    check_min_len("rep_decode", alpha, 2)?;
    if !alpha.len().is_power_of_two() {
        return Err(Error::InvalidArgument(format!("rep_decode length {} is not a power of two", alpha.len())));
    }
    Ok(vec![hard_decision(repetition_sum(alpha, quant)); alpha.len()])
}

/// Position of the least reliable LLR, found by a butterfly tournament.
///
/// Level `l + 1` holds `f` of the two halves of level `l`; the winner is
/// traced back from the single top entry. Inside a pair the smaller
/// magnitude wins; on equal magnitudes the first-half entry wins when the
/// second-half entry has a clear sign bit, otherwise the second-half entry.
pub fn least_reliable_index(alpha: &[Llr]) -> usize {
    debug_assert!(alpha.len().is_power_of_two());
    let mut levels = vec![alpha.to_vec()];
    while levels.last().map_or(0, Vec::len) > 1 {
        let prev = levels.last().unwrap();
        let half = prev.len() / 2;
        let mut next = vec![0.0; half];
        f_into(&prev[..half], &prev[half..], &mut next);
        levels.push(next);
    }
    let mut winner = 0;
    for level in levels.iter().rev().skip(1) {
        let half = level.len() / 2;
        let (a, b) = (level[winner], level[winner + half]);
        let take_second = match a.abs().partial_cmp(&b.abs()) {
            Some(std::cmp::Ordering::Less) => false,
            Some(std::cmp::Ordering::Greater) => true,
            _ => b.is_sign_negative(),
        };
        if take_second {
            winner += half;
        }
    }
    winner
}

/// Single parity check (Wagner rule): hard decisions, then flip the least
/// reliable position if the parity is odd.
pub fn spc_decode(alpha: &[Llr]) -> Result<Vec<Bit>> {
    check_min_len("spc_decode", alpha, 2)?;
    if !alpha.len().is_power_of_two() {
        return Err(Error::InvalidArgument(format!("spc_decode length {} is not a power of two", alpha.len())));
    }
    let mut bits: Vec<Bit> = alpha.iter().map(|&x| hard_decision(x)).collect();
    let parity = bits.iter().fold(0, |acc, &b| acc ^ b);
    if parity == 1 {
        bits[least_reliable_index(alpha)] ^= 1;
    }
    Ok(bits)
}
