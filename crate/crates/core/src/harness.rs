//! Monte-Carlo BER/FER runs and resource sweeps.
//!
//! Every frame draws its info word and noise from streams keyed by
//! `(seed, frame index)`, and frames are processed in fixed-size batches
//! with the stopping rule evaluated only between batches, so results do
//! not depend on thread count or scheduling.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::code_model::{construct_frozen_set, ChannelConfig, PolarCodeSpec, QuantSpec};
use crate::error::{Error, Result};
use crate::kernel_ops::Bit;
use crate::pipeline_sim::{self, SimOptions};
use crate::reference_decoders::{fastssc_interpret, sc_decode, simulate_frame, Frame};
use crate::tree_compiler::{compile, CompilerConfig, OpProgram};
use crate::unroller::{latency_of, resource_report, unroll, PipelineNetlist};

/// Frames decoded between two evaluations of the stopping rule.
pub const BATCH_FRAMES: u64 = 2048;
/// Frames per independent pipeline run inside a batch.
const CHUNK_FRAMES: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Sc,
    FastSsc,
    Pipeline,
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(DecoderKind::Sc),
            "fastssc" => Ok(DecoderKind::FastSsc),
            "pipeline" => Ok(DecoderKind::Pipeline),
            other => Err(Error::InvalidArgument(format!("unknown decoder {other:?}"))),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Sc => "sc",
            DecoderKind::FastSsc => "fastssc",
            DecoderKind::Pipeline => "pipeline",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BerConfig {
    pub ebno_list: Vec<f64>,
    pub min_frame_errors: u64,
    pub max_frames: u64,
    pub seed: u64,
    pub decoder: DecoderKind,
    pub quant: QuantSpec,
    pub compiler: CompilerConfig,
    /// Cross-check every frame against the SC oracle.
    pub check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRow {
    pub ebno_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerOutcome {
    pub rows: Vec<BerRow>,
    /// Frames on which the selected decoder disagreed with the SC oracle
    /// (only counted in check mode).
    pub oracle_mismatches: u64,
}

/// Everything needed to decode with any of the three decoders.
pub struct DecoderBench {
    pub spec: PolarCodeSpec,
    pub quant: QuantSpec,
    pub program: OpProgram,
    pub netlist: PipelineNetlist,
}

impl DecoderBench {
    pub fn new(spec: PolarCodeSpec, cfg: &CompilerConfig, quant: QuantSpec) -> Result<Self> {
        let program = compile(&spec, cfg);
        let netlist = unroll(&program, &quant)?;
        Ok(Self { spec, quant, program, netlist })
    }

    /// Decoded codewords for a list of frames, in order.
    pub fn decode(&self, kind: DecoderKind, frames: &[Frame]) -> Result<Vec<Vec<Bit>>> {
        match kind {
            DecoderKind::Sc => frames.iter().map(|f| Ok(sc_decode(&self.spec, &f.llrs, &self.quant)?.x_hat)).collect(),
            DecoderKind::FastSsc => frames
                .iter()
                .map(|f| Ok(fastssc_interpret(&self.program, &f.llrs, &self.quant, false)?.x_hat))
                .collect(),
            DecoderKind::Pipeline => {
                let run =
                    pipeline_sim::run(&self.netlist, frames.iter().map(|f| f.llrs.clone()), SimOptions::default())?;
                if run.outputs.len() != frames.len() || !run.trace.faults.is_empty() {
                    return Err(Error::BadProgram("pipeline lost frames or mixed operands".into()));
                }
                Ok(run.outputs.into_iter().map(|e| e.x_hat).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    frames: u64,
    bit_errors: u64,
    frame_errors: u64,
    mismatches: u64,
}

fn info_bit_errors(spec: &PolarCodeSpec, frame: &Frame, x_hat: &[Bit]) -> u64 {
    let mut u_hat = x_hat.to_vec();
    crate::code_model::polar_transform_in_place(&mut u_hat);
    spec.info_positions().iter().zip(&frame.info).filter(|(&p, &b)| u_hat[p] != b).count() as u64
}

fn decode_chunk(
    bench: &DecoderBench,
    config: &BerConfig,
    chan: &ChannelConfig,
    range: std::ops::Range<u64>,
) -> Result<Tally> {
    let frames: Vec<Frame> = range.map(|i| simulate_frame(&bench.spec, chan, &bench.quant, i)).collect();
    let decoded = bench.decode(config.decoder, &frames)?;
    let oracle = if config.check && config.decoder != DecoderKind::Sc {
        Some(bench.decode(DecoderKind::Sc, &frames)?)
    } else {
        None
    };
    let mut tally = Tally { frames: frames.len() as u64, ..Tally::default() };
    for (i, (frame, x_hat)) in frames.iter().zip(&decoded).enumerate() {
        let errors = info_bit_errors(&bench.spec, frame, x_hat);
        tally.bit_errors += errors;
        tally.frame_errors += u64::from(errors > 0);
        if oracle.as_ref().is_some_and(|o| &o[i] != x_hat) {
            tally.mismatches += 1;
        }
    }
    Ok(tally)
}

fn decode_batch(bench: &DecoderBench, config: &BerConfig, chan: &ChannelConfig, start: u64, len: u64) -> Result<Tally> {
    let chunks: Vec<std::ops::Range<u64>> =
        (start..start + len).step_by(CHUNK_FRAMES as usize).map(|s| s..(s + CHUNK_FRAMES).min(start + len)).collect();
    #[cfg(feature = "parallel")]
    let tallies: Vec<Result<Tally>> = {
        use rayon::prelude::*;
        chunks.into_par_iter().map(|r| decode_chunk(bench, config, chan, r)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tallies: Vec<Result<Tally>> = chunks.into_iter().map(|r| decode_chunk(bench, config, chan, r)).collect();

    let mut total = Tally::default();
    for t in tallies {
        let t = t?;
        total.frames += t.frames;
        total.bit_errors += t.bit_errors;
        total.frame_errors += t.frame_errors;
        total.mismatches += t.mismatches;
    }
    Ok(total)
}

/// BER/FER per Eb/N0 point. Stops a point once `min_frame_errors` frame
/// errors are seen (checked per batch) or `max_frames` frames are decoded.
pub fn run_ber(spec: &PolarCodeSpec, config: &BerConfig) -> Result<BerOutcome> {
    if config.ebno_list.is_empty() {
        return Err(Error::InvalidArgument("empty Eb/N0 list".into()));
    }
    if config.max_frames == 0 {
        return Err(Error::InvalidArgument("max_frames must be at least 1".into()));
    }
    let bench = DecoderBench::new(spec.clone(), &config.compiler, config.quant)?;
    let mut rows = Vec::new();
    let mut oracle_mismatches = 0;
    for &ebno_db in &config.ebno_list {
        let chan = ChannelConfig::new(ebno_db, config.seed);
        let mut total = Tally::default();
        while total.frames < config.max_frames && total.frame_errors < config.min_frame_errors {
            let len = BATCH_FRAMES.min(config.max_frames - total.frames);
            let t = decode_batch(&bench, config, &chan, total.frames, len)?;
            total.frames += t.frames;
            total.bit_errors += t.bit_errors;
            total.frame_errors += t.frame_errors;
            total.mismatches += t.mismatches;
        }
        oracle_mismatches += total.mismatches;
        let info_bits = (total.frames * spec.k_info() as u64).max(1);
        rows.push(BerRow {
            ebno_db,
            frames: total.frames,
            bit_errors: total.bit_errors,
            frame_errors: total.frame_errors,
            ber: total.bit_errors as f64 / info_bits as f64,
            fer: total.frame_errors as f64 / total.frames.max(1) as f64,
        });
    }
    Ok(BerOutcome { rows, oracle_mismatches })
}

pub fn ber_csv(rows: &[BerRow]) -> String {
    let mut out = String::from("ebno_db,frames,bit_errors,frame_errors,ber,fer\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{:e},{:e}", r.ebno_db, r.frames, r.bit_errors, r.frame_errors, r.ber, r.fer);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRow {
    pub n_block: usize,
    pub latency_cycles: usize,
    pub register_bits: u64,
    pub instruction_count: usize,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    /// Code rate; `K = round(N * rate)`, at least 1.
    pub rate: f64,
    pub design_ebno_db: f64,
    pub cap_repspc: usize,
    pub quant: QuantSpec,
}

/// construct → compile → unroll → report for each block length.
pub fn resource_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if !(config.rate > 0.0 && config.rate <= 1.0) {
        return Err(Error::InvalidArgument(format!("rate {} outside (0, 1]", config.rate)));
    }
    config
        .n_list
        .iter()
        .map(|&n| {
            let k = ((n as f64 * config.rate).round() as usize).clamp(1, n);
            let spec = construct_frozen_set(n, k, config.design_ebno_db)?;
            let cfg = CompilerConfig::new(config.cap_repspc, n.max(2))?;
            let prog = compile(&spec, &cfg);
            let netlist = unroll(&prog, &config.quant)?;
            let report = resource_report(&netlist, 1.0)?;
            Ok(SweepRow {
                n_block: n,
                latency_cycles: latency_of(&netlist),
                register_bits: report.register_bits,
                instruction_count: prog.len(),
            })
        })
        .collect()
}

/// Least-squares fit of `y = c x^e` in log-log space. Returns `(c, e)`;
/// `None` with fewer than two distinct positive `x`.
pub fn power_law_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return None;
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let e = sxy / sxx;
    Some(((my - e * mx).exp(), e))
}

/// Fit of register bits against block length.
pub fn register_fit(rows: &[SweepRow]) -> Option<(f64, f64)> {
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_block as f64, r.register_bits as f64)).collect();
    power_law_fit(&points)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("N,latency_cycles,register_bits,instruction_count\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n_block, r.latency_cycles, r.register_bits, r.instruction_count);
    }
    if let Some((c, e)) = register_fit(rows) {
        let _ = writeln!(out, "# register_bits ~ c * N^e, e = {e:.4}, c = {c:.4}");
    }
    out
}
