//! Unrolling pass: one functional unit and output register per instruction,
//! one instruction per pipeline stage, and synchronization register chains
//! for every value that must wait more than one cycle for its consumer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::code_model::QuantSpec;
use crate::error::{Error, Result};
use crate::tree_compiler::{OpProgram, Opcode, Slot};

/// Version of the netlist JSON layout.
pub const NETLIST_SCHEMA_VERSION: u32 = 1;

/// A register in the netlist, or the channel input bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegRef {
    /// Channel LLRs on the input bus, conceptually stage -1.
    Channel,
    /// Output register of the functional unit at `stage`.
    Unit { stage: usize },
    /// Sync register `index` of `stage`.
    Sync { stage: usize, index: usize },
}

impl RegRef {
    pub fn stage(self) -> i64 {
        match self {
            RegRef::Channel => -1,
            RegRef::Unit { stage } | RegRef::Sync { stage, .. } => stage as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub op: Opcode,
    pub span: usize,
    /// Operand registers, port order.
    pub inputs: Vec<RegRef>,
    /// Elements in the output register.
    pub out_len: usize,
    /// Bits per output element.
    pub elem_bits: u32,
}

impl Unit {
    pub fn label(&self) -> String {
        self.op.label(self.span)
    }

    pub fn register_bits(&self) -> u64 {
        self.out_len as u64 * u64::from(self.elem_bits)
    }
}

/// A logic-free pipeline register that delays a value by one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncReg {
    /// Total register width.
    pub width_bits: u64,
    pub src_stage: i64,
    pub src: RegRef,
    pub len: usize,
    pub elem_bits: u32,
    /// Register that originally produced the value.
    pub origin: RegRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub index: usize,
    pub units: Vec<Unit>,
    pub syncs: Vec<SyncReg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sink {
    Unit { stage: usize, unit: usize, port: usize },
    Sync { stage: usize, index: usize },
}

impl Sink {
    pub fn stage(self) -> usize {
        match self {
            Sink::Unit { stage, .. } | Sink::Sync { stage, .. } => stage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: RegRef,
    pub to: Sink,
}

/// Fully-unrolled, deeply-pipelined decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineNetlist {
    pub schema_version: u32,
    pub n_block: usize,
    pub k_info: usize,
    pub quant: QuantSpec,
    pub stages: Vec<Stage>,
    pub edges: Vec<Edge>,
}

fn elem_bits(reg_is_llr: bool, quant: &QuantSpec) -> u32 {
    if reg_is_llr {
        quant.llr_width_bits()
    } else {
        1
    }
}

/// Builds the pipeline netlist for a program.
pub fn unroll(prog: &OpProgram, quant: &QuantSpec) -> Result<PipelineNetlist> {
    prog.validate()?;
    let n = prog.n_block();

    // Resolve slot dataflow into producer registers.
    let mut writer: BTreeMap<Slot, RegRef> = BTreeMap::from([(Slot::CHANNEL, RegRef::Channel)]);
    let mut operands: Vec<Vec<RegRef>> = Vec::with_capacity(prog.len());
    let mut consumers: BTreeMap<RegRef, Vec<usize>> = BTreeMap::new();
    for (stage, inst) in prog.instructions.iter().enumerate() {
        let mut ins = Vec::new();
        for slot in inst.inputs() {
            let producer =
                *writer.get(&slot).ok_or_else(|| Error::SlotUnderflow { index: stage, slot: slot.to_string() })?;
            if producer.stage() >= stage as i64 {
                return Err(Error::BadProgram(format!("instruction {stage} is not topologically ordered")));
            }
            consumers.entry(producer).or_default().push(stage);
            ins.push(producer);
        }
        operands.push(ins);
        writer.insert(inst.slot_out, RegRef::Unit { stage });
    }

    let mut stages: Vec<Stage> = prog
        .instructions
        .iter()
        .enumerate()
        .map(|(index, inst)| Stage {
            index,
            units: vec![Unit {
                op: inst.op,
                span: inst.span,
                inputs: Vec::new(),
                out_len: inst.output_len(),
                elem_bits: elem_bits(inst.op.outputs_llrs(), quant),
            }],
            syncs: Vec::new(),
        })
        .collect();

    // One shared delay chain per produced value, long enough for its last
    // consumer; tap[s] is the register holding the value at the end of stage s.
    let mut taps: BTreeMap<RegRef, BTreeMap<i64, RegRef>> = BTreeMap::new();
    for (&producer, users) in &consumers {
        let last = *users.iter().max().expect("non-empty") as i64;
        let (len, bits) = match producer {
            RegRef::Channel => (n, elem_bits(true, quant)),
            RegRef::Unit { stage } => {
                let u = &stages[stage].units[0];
                (u.out_len, u.elem_bits)
            }
            RegRef::Sync { .. } => unreachable!("sync registers are created here"),
        };
        let mut tap = BTreeMap::from([(producer.stage(), producer)]);
        let mut prev = producer;
        for s in (producer.stage() + 1)..last {
            let stage = &mut stages[s as usize];
            let reg = RegRef::Sync { stage: s as usize, index: stage.syncs.len() };
            stage.syncs.push(SyncReg {
                width_bits: len as u64 * u64::from(bits),
                src_stage: prev.stage(),
                src: prev,
                len,
                elem_bits: bits,
                origin: producer,
            });
            tap.insert(s, reg);
            prev = reg;
        }
        taps.insert(producer, tap);
    }

    for (stage, ins) in operands.into_iter().enumerate() {
        stages[stage].units[0].inputs = ins.into_iter().map(|p| taps[&p][&(stage as i64 - 1)]).collect();
    }

    let edges = collect_edges(&stages);
    Ok(PipelineNetlist {
        schema_version: NETLIST_SCHEMA_VERSION,
        n_block: n,
        k_info: prog.k_info(),
        quant: *quant,
        stages,
        edges,
    })
}

fn collect_edges(stages: &[Stage]) -> Vec<Edge> {
    let mut edges = Vec::new();
    for stage in stages {
        for (u, unit) in stage.units.iter().enumerate() {
            for (port, &from) in unit.inputs.iter().enumerate() {
                edges.push(Edge { from, to: Sink::Unit { stage: stage.index, unit: u, port } });
            }
        }
        for (index, sync) in stage.syncs.iter().enumerate() {
            edges.push(Edge { from: sync.src, to: Sink::Sync { stage: stage.index, index } });
        }
    }
    edges
}

/// Stage count.
pub fn latency_of(netlist: &PipelineNetlist) -> usize {
    netlist.stages.len()
}

/// A register read that does not come from the immediately preceding stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncViolation {
    pub edge: Edge,
}

impl PipelineNetlist {
    /// Recomputes `edges` from the stage contents (after manual edits).
    pub fn rebuild_edges(&mut self) {
        self.edges = collect_edges(&self.stages);
    }

    pub fn register_exists(&self, reg: RegRef) -> bool {
        match reg {
            RegRef::Channel => true,
            RegRef::Unit { stage } => self.stages.get(stage).is_some_and(|s| !s.units.is_empty()),
            RegRef::Sync { stage, index } => self.stages.get(stage).is_some_and(|s| index < s.syncs.len()),
        }
    }

    /// Static synchronization check: every edge spans exactly one stage and
    /// points at an existing register.
    pub fn check_sync(&self) -> std::result::Result<(), SyncViolation> {
        for &edge in &self.edges {
            if !self.register_exists(edge.from) || edge.from.stage() + 1 != edge.to.stage() as i64 {
                return Err(SyncViolation { edge });
            }
        }
        Ok(())
    }

    /// Unit output register of the last stage.
    pub fn output_register(&self) -> RegRef {
        RegRef::Unit { stage: self.stages.len().saturating_sub(1) }
    }

    pub fn sync_register_count(&self) -> usize {
        self.stages.iter().map(|s| s.syncs.len()).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let netlist: PipelineNetlist = serde_json::from_str(text)?;
        if netlist.schema_version != NETLIST_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported netlist schema {}", netlist.schema_version)));
        }
        Ok(netlist)
    }

    /// Graphviz rendering, stages left to right.
    pub fn to_dot(&self) -> String {
        let name = |r: RegRef| match r {
            RegRef::Channel => "channel".to_string(),
            RegRef::Unit { stage } => format!("u{stage}"),
            RegRef::Sync { stage, index } => format!("s{stage}_{index}"),
        };
        let mut out = String::from("digraph pipeline {\n  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n");
        let _ = writeln!(out, "  channel [label=\"channel\\n{} LLRs\", shape=cds];", self.n_block);
        for stage in &self.stages {
            let _ = writeln!(out, "  subgraph cluster_{} {{\n    label=\"stage {}\";", stage.index, stage.index);
            for unit in &stage.units {
                let _ = writeln!(out, "    u{} [label=\"{}\", shape=box];", stage.index, unit.label());
            }
            for (i, sync) in stage.syncs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "    s{}_{} [label=\"{}b\", shape=box, style=dashed];",
                    stage.index, i, sync.width_bits
                );
            }
            out.push_str("  }\n");
        }
        let _ = writeln!(out, "  output [label=\"x_hat\\n{} bits\", shape=cds];", self.n_block);
        for edge in &self.edges {
            let to = match edge.to {
                Sink::Unit { stage, .. } => format!("u{stage}"),
                Sink::Sync { stage, index } => format!("s{stage}_{index}"),
            };
            let _ = writeln!(out, "  {} -> {};", name(edge.from), to);
        }
        if !self.stages.is_empty() {
            let _ = writeln!(out, "  {} -> output;", name(self.output_register()));
        }
        out.push_str("}\n");
        out
    }
}

/// Serializes a netlist as `json` or `dot`.
pub fn emit_netlist(netlist: &PipelineNetlist, format: &str) -> Result<String> {
    match format {
        "json" => netlist.to_json(),
        "dot" => Ok(netlist.to_dot()),
        other => Err(Error::UnknownFormat(other.to_string())),
    }
}

/// Code rate kept as the exact pair `K/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rate {
    pub k_info: usize,
    pub n_block: usize,
}

impl Rate {
    pub fn value(self) -> f64 {
        self.k_info as f64 / self.n_block as f64
    }
}

/// Information throughput `P f R` for a bus of `P` bits per cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputModel {
    pub p_bus_bits: u64,
    pub f_hz: f64,
    pub rate: Rate,
    pub coded_bps: f64,
    pub info_bps: f64,
}

impl ThroughputModel {
    pub fn new(p_bus_bits: u64, f_hz: f64, rate: Rate) -> Self {
        let coded_bps = p_bus_bits as f64 * f_hz;
        Self { p_bus_bits, f_hz, rate, coded_bps, info_bps: coded_bps * rate.value() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub latency_cycles: usize,
    pub register_bits: u64,
    pub unit_register_bits: u64,
    pub sync_register_bits: u64,
    pub sync_registers: usize,
    pub functional_units: BTreeMap<String, usize>,
    pub throughput_model: ThroughputModel,
}

impl ResourceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Latency, register bits and the throughput model at clock `f_hz`.
///
/// Unit output registers and sync registers are counted at full bus width;
/// the channel ingress register is not counted.
pub fn resource_report(netlist: &PipelineNetlist, f_hz: f64) -> Result<ResourceReport> {
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {f_hz}")));
    }
    let mut functional_units = BTreeMap::new();
    let mut unit_register_bits = 0;
    let mut sync_register_bits = 0;
    for stage in &netlist.stages {
        for unit in &stage.units {
            *functional_units.entry(unit.op.name().to_string()).or_insert(0) += 1;
            unit_register_bits += unit.register_bits();
        }
        sync_register_bits += stage.syncs.iter().map(|s| s.width_bits).sum::<u64>();
    }
    let rate = Rate { k_info: netlist.k_info, n_block: netlist.n_block };
    Ok(ResourceReport {
        latency_cycles: latency_of(netlist),
        register_bits: unit_register_bits + sync_register_bits,
        unit_register_bits,
        sync_register_bits,
        sync_registers: netlist.sync_register_count(),
        functional_units,
        throughput_model: ThroughputModel::new(netlist.n_block as u64, f_hz, rate),
    })
}
