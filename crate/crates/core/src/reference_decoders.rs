//! Sequential decoders used as functional ground truth: a plain min-sum SC
//! recursion and an interpreter for compiled Fast-SSC programs.

use std::collections::HashMap;

use serde::Serialize;

use crate::code_model::{polar_transform_in_place, ChannelConfig, PolarCodeSpec, QuantSpec};
use crate::error::{Error, Result};
use crate::kernel_ops::{self, hard_decision, Bit, Llr};
use crate::tree_compiler::{compile, CompilerConfig, OpProgram, Opcode, Slot};

/// A message on a decoder edge: LLRs flowing down or bits flowing up.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Signal {
    Llrs(Vec<Llr>),
    Bits(Vec<Bit>),
}

impl Signal {
    pub fn len(&self) -> usize {
        match self {
            Signal::Llrs(v) => v.len(),
            Signal::Bits(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn llrs(&self) -> Result<&[Llr]> {
        match self {
            Signal::Llrs(v) => Ok(v),
            Signal::Bits(_) => Err(Error::BadProgram("expected LLR operand, found bits".into())),
        }
    }

    fn bits(&self) -> Result<&[Bit]> {
        match self {
            Signal::Bits(v) => Ok(v),
            Signal::Llrs(_) => Err(Error::BadProgram("expected bit operand, found LLRs".into())),
        }
    }
}

fn expect_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Evaluates one instruction. Shared by the interpreter and by the pipeline
/// functional units.
pub fn apply_op(op: Opcode, span: usize, a: &Signal, b: Option<&Signal>, quant: &QuantSpec) -> Result<Signal> {
    let missing = || Error::BadProgram(format!("{} needs two operands", op.label(span)));
    Ok(match op {
        Opcode::F => {
            let alpha = a.llrs()?;
            expect_len(span, alpha.len())?;
            let (x, y) = alpha.split_at(span / 2);
            Signal::Llrs(kernel_ops::f_op(x, y)?)
        }
        Opcode::G => {
            let alpha = a.llrs()?;
            expect_len(span, alpha.len())?;
            let (x, y) = alpha.split_at(span / 2);
            Signal::Llrs(kernel_ops::g_op(x, y, b.ok_or_else(missing)?.bits()?, quant)?)
        }
        Opcode::Combine => {
            let left = a.bits()?;
            expect_len(span / 2, left.len())?;
            Signal::Bits(kernel_ops::combine(left, b.ok_or_else(missing)?.bits()?)?)
        }
        leaf => {
            let alpha = a.llrs()?;
            expect_len(span, alpha.len())?;
            Signal::Bits(match leaf {
                Opcode::Rate0 => kernel_ops::rate0_decode(alpha)?,
                Opcode::Rate1 => kernel_ops::rate1_decode(alpha)?,
                Opcode::Rep => kernel_ops::rep_decode(alpha, quant)?,
                Opcode::Spc => kernel_ops::spc_decode(alpha)?,
                _ => unreachable!(),
            })
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    /// u-domain estimate, frozen positions zero.
    pub u_hat: Vec<Bit>,
    /// Codeword estimate.
    pub x_hat: Vec<Bit>,
}

fn sc_recurse(alpha: &[Llr], frozen: &[bool], quant: &QuantSpec, u_out: &mut [Bit]) -> Vec<Bit> {
    if alpha.len() == 1 {
        let bit = if frozen[0] { 0 } else { hard_decision(alpha[0]) };
        u_out[0] = bit;
        return vec![bit];
    }
    let half = alpha.len() / 2;
    let (a, b) = alpha.split_at(half);
    let (u_left, u_right) = u_out.split_at_mut(half);

    let mut child = vec![0.0; half];
    kernel_ops::f_into(a, b, &mut child);
    let beta_left = sc_recurse(&child, &frozen[..half], quant, u_left);
    kernel_ops::g_into(a, b, &beta_left, quant, &mut child);
    let beta_right = sc_recurse(&child, &frozen[half..], quant, u_right);

    let mut out = vec![0; alpha.len()];
    kernel_ops::combine_into(&beta_left, &beta_right, &mut out);
    out
}

/// Min-sum SC over an explicit frozen mask (any power-of-two length, including 1).
pub fn sc_decode_mask(frozen: &[bool], channel_llrs: &[Llr], quant: &QuantSpec) -> Result<Decoded> {
    expect_len(frozen.len(), channel_llrs.len())?;
    if !channel_llrs.len().is_power_of_two() {
        return Err(Error::BadBlockLength(channel_llrs.len()));
    }
    let mut u_hat = vec![0; channel_llrs.len()];
    let x_hat = sc_recurse(channel_llrs, frozen, quant, &mut u_hat);
    Ok(Decoded { u_hat, x_hat })
}

/// Min-sum successive-cancellation decoding.
pub fn sc_decode(spec: &PolarCodeSpec, channel_llrs: &[Llr], quant: &QuantSpec) -> Result<Decoded> {
    sc_decode_mask(spec.frozen_mask(), channel_llrs, quant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpreted {
    pub u_hat: Vec<Bit>,
    pub x_hat: Vec<Bit>,
    /// Output of every instruction, in program order, when requested.
    pub trace: Option<Vec<Signal>>,
}

/// Runs an [`OpProgram`] one instruction at a time against the slot model.
pub fn fastssc_interpret(
    prog: &OpProgram,
    channel_llrs: &[Llr],
    quant: &QuantSpec,
    keep_trace: bool,
) -> Result<Interpreted> {
    let n = prog.n_block();
    expect_len(n, channel_llrs.len())?;
    let mut slots: HashMap<Slot, Signal> = HashMap::new();
    slots.insert(Slot::CHANNEL, Signal::Llrs(channel_llrs.to_vec()));
    let mut trace = keep_trace.then(|| Vec::with_capacity(prog.len()));

    for (index, inst) in prog.instructions.iter().enumerate() {
        let fetch = |slot: Slot| slots.get(&slot).ok_or_else(|| Error::SlotUnderflow { index, slot: slot.to_string() });
        let a = fetch(inst.slot_in_a)?;
        let b = inst.slot_in_b.map(fetch).transpose()?;
        let out = apply_op(inst.op, inst.span, a, b, quant)?;
        if let Some(t) = trace.as_mut() {
            t.push(out.clone());
        }
        slots.insert(inst.slot_out, out);
    }

    let x_hat = match slots.remove(&Slot::Output) {
        Some(Signal::Bits(bits)) if bits.len() == n => bits,
        _ => return Err(Error::BadProgram("program did not produce a codeword".into())),
    };
    let mut u_hat = x_hat.clone();
    polar_transform_in_place(&mut u_hat);
    Ok(Interpreted { u_hat, x_hat, trace })
}

/// One received frame of a Monte-Carlo run.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: u64,
    pub info: Vec<Bit>,
    pub codeword: Vec<Bit>,
    pub llrs: Vec<Llr>,
}

/// Random info word, encoded and sent over the channel. Depends only on
/// `(seed, frame index)`.
pub fn simulate_frame(spec: &PolarCodeSpec, chan: &ChannelConfig, quant: &QuantSpec, index: u64) -> Frame {
    let info = crate::code_model::random_info_bits(spec.k_info(), chan.seed, index);
    let codeword = crate::code_model::encode(spec, &info).expect("info length matches spec");
    let llrs = crate::code_model::transmit(&codeword, chan, spec.rate(), quant, index);
    Frame { index, info, codeword, llrs }
}

/// JSON-lines record for a frame on which the two decoders disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchRecord {
    pub frame: u64,
    pub ebno: f64,
    pub first_diff_index: usize,
    pub sc_bits: String,
    pub fastssc_bits: String,
}

#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub frames: u64,
    pub mismatches: Vec<MismatchRecord>,
    /// Full interpreter trace of the first mismatching frame.
    pub first_trace: Option<Vec<Signal>>,
}

impl AgreementReport {
    pub fn mismatch_count(&self) -> usize {
        self.mismatches.len()
    }

    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for m in &self.mismatches {
            out.push_str(&serde_json::to_string(m)?);
            out.push('\n');
        }
        Ok(out)
    }
}

pub(crate) fn bit_string(bits: &[Bit]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

fn compare_frame(
    spec: &PolarCodeSpec,
    prog: &OpProgram,
    chan: &ChannelConfig,
    quant: &QuantSpec,
    index: u64,
) -> Result<Option<MismatchRecord>> {
    let frame = simulate_frame(spec, chan, quant, index);
    let sc = sc_decode(spec, &frame.llrs, quant)?;
    let fast = fastssc_interpret(prog, &frame.llrs, quant, false)?;
    Ok(sc.x_hat.iter().zip(&fast.x_hat).position(|(a, b)| a != b).map(|first_diff_index| MismatchRecord {
        frame: index,
        ebno: chan.ebno_db,
        first_diff_index,
        sc_bits: bit_string(&sc.x_hat),
        fastssc_bits: bit_string(&fast.x_hat),
    }))
}

/// Runs the SC oracle and the Fast-SSC interpreter on identical channel
/// outputs and collects every disagreement.
pub fn decoders_agree(
    spec: &PolarCodeSpec,
    cfg: &CompilerConfig,
    quant: &QuantSpec,
    chan: &ChannelConfig,
    frames: u64,
) -> Result<AgreementReport> {
    if frames == 0 {
        return Err(Error::InvalidArgument("frames must be at least 1".into()));
    }
    let prog = compile(spec, cfg);
    let check = |i: u64| compare_frame(spec, &prog, chan, quant, i);

    #[cfg(feature = "parallel")]
    let results: Vec<Result<Option<MismatchRecord>>> = {
        use rayon::prelude::*;
        (0..frames).into_par_iter().map(check).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<Option<MismatchRecord>>> = (0..frames).map(check).collect();

    let mut mismatches = Vec::new();
    for r in results {
        if let Some(m) = r? {
            mismatches.push(m);
        }
    }
    let first_trace = match mismatches.first() {
        Some(m) => {
            let frame = simulate_frame(spec, chan, quant, m.frame);
            fastssc_interpret(&prog, &frame.llrs, quant, true)?.trace
        }
        None => None,
    };
    Ok(AgreementReport { frames, mismatches, first_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::{construct_frozen_set, encode, transmit_noiseless};

    fn code_8_4() -> PolarCodeSpec {
        PolarCodeSpec::new(8, [0, 1, 2, 4]).unwrap()
    }

    #[test]
    fn sc_single_bit() {
        let d = sc_decode_mask(&[false], &[3.0], &QuantSpec::Float).unwrap();
        assert_eq!(d.u_hat, vec![0]);
    }

    #[test]
    fn sc_length_two_by_hand() {
        let spec = PolarCodeSpec::new(2, [0]).unwrap();
        let d = sc_decode(&spec, &[1.0, 4.0], &QuantSpec::Float).unwrap();
        assert_eq!(d.u_hat, vec![0, 0]);
        assert_eq!(d.x_hat, vec![0, 0]);
    }

    #[test]
    fn sc_length_mismatch() {
        assert!(matches!(
            sc_decode(&code_8_4(), &[1.0; 4], &QuantSpec::Float),
            Err(Error::LengthMismatch { expected: 8, got: 4 })
        ));
    }

    #[test]
    fn sc_noiseless_recovers_every_frame() {
        let spec = code_8_4();
        let quant = QuantSpec::default();
        for w in 0u8..16 {
            let info: Vec<Bit> = (0..4).map(|i| (w >> i) & 1).collect();
            let cw = encode(&spec, &info).unwrap();
            let d = sc_decode(&spec, &transmit_noiseless(&cw, &quant), &quant).unwrap();
            let recovered: Vec<Bit> = spec.info_positions().iter().map(|&p| d.u_hat[p]).collect();
            assert_eq!(recovered, info);
            assert_eq!(d.x_hat, cw);
        }
    }

    /// Straight-line evaluation of the (8,4) decoder on one input, written
    /// out by hand without the interpreter or slot model.
    fn code84_by_hand(a: [Llr; 8]) -> Vec<Bit> {
        let fmin = |x: Llr, y: Llr| -> Llr {
            let m = x.abs().min(y.abs());
            if (x < 0.0) != (y < 0.0) {
                -m
            } else {
                m
            }
        };
        let left: Vec<Llr> = (0..4).map(|i| fmin(a[i], a[i + 4])).collect();
        let sum = (left[0] + left[2]) + (left[1] + left[3]);
        let v = (sum < 0.0) as Bit;
        let right: Vec<Llr> = (0..4).map(|i| if v == 0 { a[i + 4] + a[i] } else { a[i + 4] - a[i] }).collect();
        let mut r: Vec<Bit> = right.iter().map(|&x| (x < 0.0) as Bit).collect();
        if r.iter().fold(0, |p, &b| p ^ b) == 1 {
            let j = (0..4).min_by(|&i, &k| right[i].abs().partial_cmp(&right[k].abs()).unwrap()).unwrap();
            r[j] ^= 1;
        }
        (0..4).map(|i| v ^ r[i]).chain(r.iter().copied()).collect()
    }

    #[test]
    fn interpreter_code84_worked_example() {
        let llrs = [-1.0, -2.0, -3.0, 4.0, 5.0, -6.0, 7.0, -8.0];
        let prog = compile(&code_8_4(), &CompilerConfig::default_for(8));
        let out = fastssc_interpret(&prog, &llrs, &QuantSpec::default(), true).unwrap();
        let trace = out.trace.unwrap();
        assert_eq!(trace[0], Signal::Llrs(vec![-1.0, 2.0, -3.0, -4.0]));
        assert_eq!(trace[1], Signal::Bits(vec![1, 1, 1, 1]));
        assert_eq!(trace[2], Signal::Llrs(vec![6.0, -4.0, 10.0, -12.0]));
        assert_eq!(trace[3], Signal::Bits(vec![0, 1, 0, 1]));
        assert_eq!(out.x_hat, vec![1, 0, 1, 0, 0, 1, 0, 1]);
        assert_eq!(out.x_hat, code84_by_hand(llrs));
        // leaves produce constituent codewords, so frozen bits come back zero
        for &p in code_8_4().frozen_set() {
            assert_eq!(out.u_hat[p], 0);
        }
        assert_eq!(sc_decode(&code_8_4(), &llrs, &QuantSpec::default()).unwrap().x_hat, out.x_hat);
    }

    #[test]
    fn interpreter_rate1_leaf() {
        let spec = PolarCodeSpec::new(4, []).unwrap();
        let prog = compile(&spec, &CompilerConfig::default_for(4));
        let out = fastssc_interpret(&prog, &[9.0, -9.0, 9.0, -9.0], &QuantSpec::Float, false).unwrap();
        assert_eq!(out.x_hat, vec![0, 1, 0, 1]);
        assert!(out.trace.is_none());
    }

    #[test]
    fn interpreter_zero_input_decodes_zero() {
        for (n, k) in [(8, 4), (64, 32), (256, 100)] {
            let spec = construct_frozen_set(n, k, 0.0).unwrap();
            let prog = compile(&spec, &CompilerConfig::default_for(n));
            let out = fastssc_interpret(&prog, &vec![0.0; n], &QuantSpec::default(), false).unwrap();
            assert_eq!(out.x_hat, vec![0; n]);
        }
    }

    #[test]
    fn interpreter_reports_underflow() {
        let mut prog = compile(&code_8_4(), &CompilerConfig::default_for(8));
        prog.instructions.remove(1);
        assert!(matches!(
            fastssc_interpret(&prog, &[1.0; 8], &QuantSpec::Float, false),
            Err(Error::SlotUnderflow { index: 1, .. })
        ));
    }

    #[test]
    fn interpreter_matches_sc_on_16_8() {
        let spec = construct_frozen_set(16, 8, 0.0).unwrap();
        let prog = compile(&spec, &CompilerConfig::default_for(16));
        let quant = QuantSpec::default();
        let chan = ChannelConfig::new(1.0, 11);
        for i in 0..100 {
            let frame = simulate_frame(&spec, &chan, &quant, i);
            let sc = sc_decode(&spec, &frame.llrs, &quant).unwrap();
            let fast = fastssc_interpret(&prog, &frame.llrs, &quant, false).unwrap();
            assert_eq!(sc, Decoded { u_hat: fast.u_hat, x_hat: fast.x_hat });
        }
    }

    #[test]
    fn agreement_small_codes() {
        let quant = QuantSpec::default();
        let chan = ChannelConfig::new(2.0, 5);
        let report = decoders_agree(&code_8_4(), &CompilerConfig::default_for(8), &quant, &chan, 2000).unwrap();
        assert_eq!(report.mismatch_count(), 0);
        assert!(report.first_trace.is_none());
        let rate1 = PolarCodeSpec::new(32, []).unwrap();
        let r = decoders_agree(&rate1, &CompilerConfig::default_for(32), &quant, &chan, 500).unwrap();
        assert_eq!(r.mismatch_count(), 0);
        assert!(decoders_agree(&rate1, &CompilerConfig::default_for(32), &quant, &chan, 0).is_err());
    }

    #[test]
    fn mismatch_record_json_fields() {
        let rec = MismatchRecord {
            frame: 3,
            ebno: 2.0,
            first_diff_index: 1,
            sc_bits: "01".into(),
            fastssc_bits: "00".into(),
        };
        let report = AgreementReport { frames: 4, mismatches: vec![rec], first_trace: None };
        let line = report.to_json_lines().unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        for key in ["frame", "ebno", "first_diff_index", "sc_bits", "fastssc_bits"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
