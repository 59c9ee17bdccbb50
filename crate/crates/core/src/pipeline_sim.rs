//! Cycle-accurate simulation of a [`PipelineNetlist`].
//!
//! Registers are edge-triggered: every cycle all functional units and sync
//! registers compute from the current register contents, then all
//! registers commit at once. Each register carries the id of the frame it
//! belongs to, so operand misalignment is detected as it happens.

use std::fmt::Write as _;
use std::rc::Rc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel_ops::{Bit, Llr};
use crate::reference_decoders::{apply_op, Signal};
use crate::unroller::{latency_of, PipelineNetlist, RegRef};

#[derive(Debug)]
struct Token {
    frame_id: u64,
    data: Signal,
}

type Reg = Option<Rc<Token>>;

#[derive(Debug, Clone, Default)]
struct Registers {
    units: Vec<Vec<Reg>>,
    syncs: Vec<Vec<Reg>>,
}

impl Registers {
    fn empty(netlist: &PipelineNetlist) -> Self {
        Self {
            units: netlist.stages.iter().map(|s| vec![None; s.units.len()]).collect(),
            syncs: netlist.stages.iter().map(|s| vec![None; s.syncs.len()]).collect(),
        }
    }
}

/// A frame slot in flight: when it entered and when it must leave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameSlot {
    pub frame_id: u64,
    pub injected_cycle: u64,
    pub expected_output_cycle: u64,
}

/// Operands of one functional unit belonged to different frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyncFault {
    pub cycle: u64,
    pub stage: usize,
    pub frame_ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emitted {
    pub frame_id: u64,
    pub x_hat: Vec<Bit>,
    /// First cycle at which the codeword is visible on the output register.
    pub output_cycle: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub latency: usize,
    /// Whether a frame was offered on the input bus, per cycle.
    pub offered: Vec<bool>,
    pub ingests: Vec<FrameSlot>,
    /// `(output_cycle, frame_id)`.
    pub emits: Vec<(u64, u64)>,
    /// Per cycle, the frame each stage's functional unit worked on.
    /// Only filled when occupancy recording is enabled.
    pub occupancy: Vec<Vec<Option<u64>>>,
    pub faults: Vec<SyncFault>,
    /// Opcode label per stage, for trace export.
    pub stage_labels: Vec<String>,
}

impl SimTrace {
    /// CSV `cycle,stage_index,frame_id,opcode`, one row per busy stage.
    pub fn occupancy_csv(&self) -> String {
        let mut out = String::from("cycle,stage_index,frame_id,opcode\n");
        for (cycle, row) in self.occupancy.iter().enumerate() {
            for (stage, frame) in row.iter().enumerate() {
                if let Some(frame) = frame {
                    let _ = writeln!(out, "{cycle},{stage},{frame},{}", self.stage_labels[stage]);
                }
            }
        }
        out
    }

    /// Text rendering of the occupancy, one row per frame, one column per cycle.
    pub fn occupancy_chart(&self) -> String {
        let frames: Vec<u64> = self.ingests.iter().map(|f| f.frame_id).collect();
        let mut out = String::new();
        for frame in frames {
            let _ = write!(out, "frame {frame:>3} |");
            for row in &self.occupancy {
                match row.iter().position(|f| *f == Some(frame)) {
                    Some(stage) => {
                        let _ = write!(out, " {:>6}", self.stage_labels[stage]);
                    }
                    None => out.push_str("      ."),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Order in which stages are evaluated inside a cycle; identity if `None`.
    pub eval_order: Option<Vec<usize>>,
    pub record_occupancy: bool,
}

/// Clocked model of one netlist.
pub struct Simulator<'a> {
    netlist: &'a PipelineNetlist,
    current: Registers,
    next: Registers,
    order: Vec<usize>,
    record_occupancy: bool,
    cycle: u64,
    next_frame_id: u64,
    trace: SimTrace,
}

impl<'a> Simulator<'a> {
    pub fn new(netlist: &'a PipelineNetlist, options: SimOptions) -> Result<Self> {
        let stages = netlist.stages.len();
        let order = match options.eval_order {
            Some(order) => {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..stages).collect::<Vec<_>>() {
                    return Err(Error::InvalidArgument("evaluation order must be a permutation of the stages".into()));
                }
                order
            }
            None => (0..stages).collect(),
        };
        for stage in &netlist.stages {
            for unit in &stage.units {
                if unit.inputs.iter().any(|&r| !netlist.register_exists(r)) {
                    return Err(Error::BadProgram(format!("stage {} reads a missing register", stage.index)));
                }
            }
        }
        Ok(Self {
            netlist,
            current: Registers::empty(netlist),
            next: Registers::empty(netlist),
            order,
            record_occupancy: options.record_occupancy,
            cycle: 0,
            next_frame_id: 0,
            trace: SimTrace {
                latency: latency_of(netlist),
                stage_labels: netlist
                    .stages
                    .iter()
                    .map(|s| s.units.first().map(|u| u.label()).unwrap_or_default())
                    .collect(),
                ..SimTrace::default()
            },
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    fn read(&self, reg: RegRef, input: &Reg) -> Reg {
        match reg {
            RegRef::Channel => input.clone(),
            RegRef::Unit { stage } => self.current.units[stage][0].clone(),
            RegRef::Sync { stage, index } => self.current.syncs[stage][index].clone(),
        }
    }

    /// Advances one clock. `input` is the frame on the input bus this cycle,
    /// or `None` for a bubble. Returns the codeword that became visible on
    /// the output register at the end of the cycle.
    pub fn step(&mut self, input: Option<Vec<Llr>>) -> Result<Option<Emitted>> {
        let cycle = self.cycle;
        let input: Reg = match input {
            Some(llrs) => {
                if llrs.len() != self.netlist.n_block {
                    return Err(Error::LengthMismatch { expected: self.netlist.n_block, got: llrs.len() });
                }
                let frame_id = self.next_frame_id;
                self.next_frame_id += 1;
                self.trace.ingests.push(FrameSlot {
                    frame_id,
                    injected_cycle: cycle,
                    expected_output_cycle: cycle + self.trace.latency as u64,
                });
                Some(Rc::new(Token { frame_id, data: Signal::Llrs(llrs) }))
            }
            None => None,
        };
        self.trace.offered.push(input.is_some());

        let quant = self.netlist.quant;
        let mut occupancy = vec![None; self.netlist.stages.len()];
        let mut next = std::mem::take(&mut self.next);
        for &s in &self.order {
            let stage = &self.netlist.stages[s];
            for (u, unit) in stage.units.iter().enumerate() {
                let operands: Vec<Reg> = unit.inputs.iter().map(|&r| self.read(r, &input)).collect();
                let value = if operands.iter().any(Option::is_none) {
                    None
                } else {
                    let ops: Vec<&Token> = operands.iter().map(|o| o.as_deref().unwrap()).collect();
                    let frame_id = ops[0].frame_id;
                    if ops.iter().any(|t| t.frame_id != frame_id) {
                        self.trace.faults.push(SyncFault {
                            cycle,
                            stage: s,
                            frame_ids: ops.iter().map(|t| t.frame_id).collect(),
                        });
                    }
                    let data = apply_op(unit.op, unit.span, &ops[0].data, ops.get(1).map(|t| &t.data), &quant)?;
                    Some(Rc::new(Token { frame_id, data }))
                };
                if u == 0 {
                    occupancy[s] = value.as_ref().map(|t| t.frame_id);
                }
                next.units[s][u] = value;
            }
            for (i, sync) in stage.syncs.iter().enumerate() {
                next.syncs[s][i] = self.read(sync.src, &input);
            }
        }
        // commit
        self.next = std::mem::replace(&mut self.current, next);
        self.cycle += 1;
        if self.record_occupancy {
            self.trace.occupancy.push(occupancy);
        }

        let out = match self.netlist.stages.len() {
            0 => None,
            n => self.current.units[n - 1][0].as_ref().map(|t| match &t.data {
                Signal::Bits(bits) => Emitted { frame_id: t.frame_id, x_hat: bits.clone(), output_cycle: self.cycle },
                Signal::Llrs(_) => unreachable!("last stage produces bits"),
            }),
        };
        if let Some(e) = &out {
            self.trace.emits.push((e.output_cycle, e.frame_id));
        }
        Ok(out)
    }

    pub fn into_trace(self) -> SimTrace {
        self.trace
    }
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub outputs: Vec<Emitted>,
    pub trace: SimTrace,
}

/// Streams frames (or bubbles) through the pipeline, then drains it.
pub fn run_stream<I>(netlist: &PipelineNetlist, frames: I, options: SimOptions) -> Result<SimRun>
where
    I: IntoIterator<Item = Option<Vec<Llr>>>,
{
    let mut sim = Simulator::new(netlist, options)?;
    let mut outputs = Vec::new();
    for frame in frames {
        outputs.extend(sim.step(frame)?);
    }
    for _ in 0..latency_of(netlist) {
        outputs.extend(sim.step(None)?);
    }
    Ok(SimRun { outputs, trace: sim.into_trace() })
}

/// Feeds one frame per cycle with no bubbles.
pub fn run<I>(netlist: &PipelineNetlist, frames: I, options: SimOptions) -> Result<SimRun>
where
    I: IntoIterator<Item = Vec<Llr>>,
{
    run_stream(netlist, frames.into_iter().map(Some), options)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimingReport {
    pub pass: bool,
    pub checks: Vec<TimingCheck>,
    pub first_missynchronized_stage: Option<usize>,
}

/// Verifies the initiation-interval-1 timing contract on a finished trace.
pub fn check_timing(trace: &SimTrace, netlist: &PipelineNetlist) -> TimingReport {
    let latency = latency_of(netlist) as u64;
    let mut checks = Vec::new();
    let mut push = |name, failure: Option<String>| {
        checks.push(TimingCheck { name, pass: failure.is_none(), detail: failure.unwrap_or_else(|| "ok".into()) })
    };

    // (a) every offered frame is ingested in its own cycle, in order
    let offered_cycles: Vec<u64> =
        trace.offered.iter().enumerate().filter(|(_, &o)| o).map(|(c, _)| c as u64).collect();
    let ingest_failure = if offered_cycles.len() != trace.ingests.len() {
        Some(format!("{} frames offered, {} ingested", offered_cycles.len(), trace.ingests.len()))
    } else {
        trace
            .ingests
            .iter()
            .zip(&offered_cycles)
            .enumerate()
            .find(|(i, (slot, &c))| slot.injected_cycle != c || slot.frame_id != *i as u64)
            .map(|(i, (slot, _))| {
                format!("frame {i} ingested at cycle {} as id {}", slot.injected_cycle, slot.frame_id)
            })
    };
    push("one_ingest_per_cycle", ingest_failure);

    // (b) one emit per cycle for every ingested frame, once the pipe is full
    let emit_cycles: std::collections::HashMap<u64, u64> = trace.emits.iter().map(|&(c, f)| (f, c)).collect();
    let mut emit_failure = None;
    let mut prev_cycle = None;
    for &(cycle, frame) in &trace.emits {
        if cycle < latency {
            emit_failure = Some(format!("frame {frame} emitted at cycle {cycle} before the pipeline filled"));
            break;
        }
        if prev_cycle == Some(cycle) {
            emit_failure = Some(format!("two frames emitted at cycle {cycle}"));
            break;
        }
        prev_cycle = Some(cycle);
    }
    if emit_failure.is_none() {
        if let Some(slot) = trace.ingests.iter().find(|s| !emit_cycles.contains_key(&s.frame_id)) {
            emit_failure = Some(format!("frame {} never emitted", slot.frame_id));
        }
    }
    push("one_emit_per_cycle", emit_failure);

    // (c) every frame leaves exactly `latency` cycles after it entered
    let delay_failure = trace.ingests.iter().find_map(|slot| match emit_cycles.get(&slot.frame_id) {
        Some(&c) if c != slot.expected_output_cycle => {
            Some(format!("frame {} delay {} != latency {latency}", slot.frame_id, c - slot.injected_cycle))
        }
        _ => None,
    });
    push("delay_equals_latency", delay_failure);

    // (d) stage s at cycle t works on the frame ingested at t - s
    let ingested_at: std::collections::HashMap<u64, u64> =
        trace.ingests.iter().map(|s| (s.injected_cycle, s.frame_id)).collect();
    let mut occupancy_failure = None;
    let mut first_bad_stage = None;
    'outer: for (t, row) in trace.occupancy.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for (s, &frame) in row.iter().enumerate() {
            let expected = (t as u64).checked_sub(s as u64).and_then(|c| ingested_at.get(&c).copied());
            if frame != expected || frame.is_some_and(|f| !seen.insert(f)) {
                occupancy_failure = Some(format!("cycle {t}, stage {s}: holds {frame:?}, expected {expected:?}"));
                first_bad_stage = Some(s);
                break 'outer;
            }
        }
    }
    push("staggered_occupancy", occupancy_failure);

    // (e) no functional unit ever mixed frames
    let fault = trace.faults.iter().min_by_key(|f| (f.stage, f.cycle));
    push(
        "operands_synchronized",
        fault.map(|f| format!("stage {} at cycle {} read frames {:?}", f.stage, f.cycle, f.frame_ids)),
    );

    let first_missynchronized_stage = fault.map(|f| f.stage).or(first_bad_stage);
    TimingReport { pass: checks.iter().all(|c| c.pass), checks, first_missynchronized_stage }
}
