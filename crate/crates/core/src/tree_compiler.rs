//! Decoder-tree construction, Fast-SSC pruning, and program emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::code_model::PolarCodeSpec;
use crate::error::{Error, Result};

/// Default size limit for Repetition and SPC leaves.
pub const DEFAULT_CAP_REPSPC: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompilerConfig {
    /// Largest Repetition / SPC leaf.
    pub cap_repspc: usize,
    /// Largest Rate-0 / Rate-1 leaf.
    pub cap_rate: usize,
}

impl CompilerConfig {
    pub fn new(cap_repspc: usize, cap_rate: usize) -> Result<Self> {
        for (name, cap) in [("cap_repspc", cap_repspc), ("cap_rate", cap_rate)] {
            if cap < 2 || !cap.is_power_of_two() {
                return Err(Error::BadConfig(format!("{name} = {cap} must be a power of two >= 2")));
            }
        }
        Ok(Self { cap_repspc, cap_rate })
    }

    /// `(4, N)`.
    pub fn default_for(n_block: usize) -> Self {
        Self { cap_repspc: DEFAULT_CAP_REPSPC, cap_rate: n_block.max(2) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Rate0,
    Rate1,
    Repetition,
    #[serde(rename = "SPC")]
    Spc,
    Branch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// First u-domain index covered.
    pub start: usize,
    pub span: usize,
    pub depth: u32,
    pub children: Option<Box<[TreeNode; 2]>>,
}

impl TreeNode {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.span
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderTree {
    pub n_block: usize,
    pub root: TreeNode,
}

fn classify(frozen: &[bool], cfg: &CompilerConfig) -> NodeKind {
    let span = frozen.len();
    let frozen_count = frozen.iter().filter(|&&f| f).count();
    if span <= cfg.cap_rate || span == 1 {
        if frozen_count == span {
            return NodeKind::Rate0;
        }
        if frozen_count == 0 {
            return NodeKind::Rate1;
        }
    }
    if span >= 2 && span <= cfg.cap_repspc {
        if frozen_count == span - 1 && !frozen[span - 1] {
            return NodeKind::Repetition;
        }
        if frozen_count == 1 && frozen[0] {
            return NodeKind::Spc;
        }
    }
    NodeKind::Branch
}

fn build_node(frozen: &[bool], start: usize, depth: u32, cfg: &CompilerConfig) -> TreeNode {
    let span = frozen.len();
    let kind = classify(frozen, cfg);
    let children = (kind == NodeKind::Branch).then(|| {
        let half = span / 2;
        Box::new([
            build_node(&frozen[..half], start, depth + 1, cfg),
            build_node(&frozen[half..], start + half, depth + 1, cfg),
        ])
    });
    TreeNode { kind, start, span, depth, children }
}

/// Builds the maximally pruned Fast-SSC decoder tree.
pub fn build_tree(spec: &PolarCodeSpec, cfg: &CompilerConfig) -> DecoderTree {
    DecoderTree { n_block: spec.n_block(), root: build_node(spec.frozen_mask(), 0, 0, cfg) }
}

impl DecoderTree {
    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        fn walk<'a>(node: &'a TreeNode, out: &mut Vec<&'a TreeNode>) {
            match &node.children {
                None => out.push(node),
                Some(c) => {
                    walk(&c[0], out);
                    walk(&c[1], out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Graphviz rendering, root at the top.
    pub fn to_dot(&self) -> String {
        fn walk(node: &TreeNode, next_id: &mut usize, out: &mut String) -> usize {
            let id = *next_id;
            *next_id += 1;
            let (label, style) = match node.kind {
                NodeKind::Branch => (format!("{}", node.span), "shape=circle"),
                NodeKind::Rate0 => (format!("Rate0 {}", node.span), "shape=box, style=filled, fillcolor=white"),
                NodeKind::Rate1 => {
                    (format!("Rate1 {}", node.span), "shape=box, style=filled, fillcolor=black, fontcolor=white")
                }
                NodeKind::Repetition => {
                    (format!("Rep {}", node.span), "shape=box, style=\"filled,striped\", fillcolor=\"white:gray\"")
                }
                NodeKind::Spc => (format!("SPC {}", node.span), "shape=box, style=filled, fillcolor=lightgray"),
            };
            let _ =
                writeln!(out, "  n{id} [label=\"{label}\\n[{}, {})\", {style}];", node.start, node.start + node.span);
            if let Some(children) = &node.children {
                for child in children.iter() {
                    let child_id = walk(child, next_id, out);
                    let _ = writeln!(out, "  n{id} -> n{child_id};");
                }
            }
            id
        }
        let mut out = String::from("digraph decoder_tree {\n  node [fontname=\"Helvetica\"];\n");
        walk(&self.root, &mut 0, &mut out);
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Opcode {
    F,
    G,
    Combine,
    Rate0,
    Rate1,
    Rep,
    #[serde(rename = "SPC")]
    Spc,
}

impl Opcode {
    pub const ALL: [Opcode; 7] =
        [Opcode::F, Opcode::G, Opcode::Combine, Opcode::Rate0, Opcode::Rate1, Opcode::Rep, Opcode::Spc];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::F => "F",
            Opcode::G => "G",
            Opcode::Combine => "Combine",
            Opcode::Rate0 => "Rate0",
            Opcode::Rate1 => "Rate1",
            Opcode::Rep => "Rep",
            Opcode::Spc => "SPC",
        }
    }

    /// Short label with span, e.g. `F8`, `Rep4`, `Comb8`.
    pub fn label(self, span: usize) -> String {
        match self {
            Opcode::Combine => format!("Comb{span}"),
            Opcode::Rate0 | Opcode::Rate1 => format!("{}_{span}", self.name()),
            _ => format!("{}{span}", self.name()),
        }
    }

    pub fn is_leaf(self) -> bool {
        !matches!(self, Opcode::F | Opcode::G | Opcode::Combine)
    }

    /// True when the output is a vector of LLRs rather than bits.
    pub fn outputs_llrs(self) -> bool {
        matches!(self, Opcode::F | Opcode::G)
    }

    /// Output length for an instruction of the given span.
    pub fn output_len(self, span: usize) -> usize {
        if self.outputs_llrs() {
            span / 2
        } else {
            span
        }
    }

    fn of_leaf(kind: NodeKind) -> Opcode {
        match kind {
            NodeKind::Rate0 => Opcode::Rate0,
            NodeKind::Rate1 => Opcode::Rate1,
            NodeKind::Repetition => Opcode::Rep,
            NodeKind::Spc => Opcode::Spc,
            NodeKind::Branch => unreachable!("branch is not a leaf"),
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Storage slot of the sequential decoder: one LLR buffer per tree depth,
/// left/right bit buffers per depth, and the root output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Slot {
    /// LLRs at a depth; `Alpha(0)` is the channel.
    Alpha(u32),
    BetaLeft(u32),
    BetaRight(u32),
    /// The decoded codeword.
    Output,
}

impl Slot {
    pub const CHANNEL: Slot = Slot::Alpha(0);

    /// Element count of the slot for block length `n_block`.
    pub fn len(self, n_block: usize) -> usize {
        match self {
            Slot::Alpha(d) | Slot::BetaLeft(d) | Slot::BetaRight(d) => n_block >> d,
            Slot::Output => n_block,
        }
    }

    pub fn holds_llrs(self) -> bool {
        matches!(self, Slot::Alpha(_))
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Alpha(d) => write!(f, "alpha{d}"),
            Slot::BetaLeft(d) => write!(f, "beta_l{d}"),
            Slot::BetaRight(d) => write!(f, "beta_r{d}"),
            Slot::Output => f.write_str("output"),
        }
    }
}

impl FromStr for Slot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let depth = |rest: &str| rest.parse::<u32>().map_err(|_| Error::BadProgram(format!("bad slot {s:?}")));
        if s == "output" {
            Ok(Slot::Output)
        } else if let Some(rest) = s.strip_prefix("alpha") {
            Ok(Slot::Alpha(depth(rest)?))
        } else if let Some(rest) = s.strip_prefix("beta_l") {
            Ok(Slot::BetaLeft(depth(rest)?))
        } else if let Some(rest) = s.strip_prefix("beta_r") {
            Ok(Slot::BetaRight(depth(rest)?))
        } else {
            Err(Error::BadProgram(format!("bad slot {s:?}")))
        }
    }
}

impl From<Slot> for String {
    fn from(slot: Slot) -> String {
        slot.to_string()
    }
}

impl TryFrom<String> for Slot {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Opcode,
    /// Span of the tree node the instruction belongs to.
    pub span: usize,
    pub slot_in_a: Slot,
    pub slot_in_b: Option<Slot>,
    pub slot_out: Slot,
    /// u-domain index range `[start, end)` of the source node.
    pub node_range: [usize; 2],
}

impl Instruction {
    pub fn inputs(&self) -> impl Iterator<Item = Slot> + '_ {
        std::iter::once(self.slot_in_a).chain(self.slot_in_b)
    }

    pub fn label(&self) -> String {
        self.op.label(self.span)
    }

    pub fn output_len(&self) -> usize {
        self.op.output_len(self.span)
    }
}

/// Linear Fast-SSC instruction list. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpProgram {
    pub instructions: Vec<Instruction>,
}

fn emit_node(node: &TreeNode, out_slot: Slot, prog: &mut Vec<Instruction>) {
    let node_range = [node.start, node.start + node.span];
    let alpha = Slot::Alpha(node.depth);
    let Some(children) = &node.children else {
        prog.push(Instruction {
            op: Opcode::of_leaf(node.kind),
            span: node.span,
            slot_in_a: alpha,
            slot_in_b: None,
            slot_out: out_slot,
            node_range,
        });
        return;
    };
    let child_alpha = Slot::Alpha(node.depth + 1);
    let left = Slot::BetaLeft(node.depth + 1);
    let right = Slot::BetaRight(node.depth + 1);
    let span = node.span;
    prog.push(Instruction {
        op: Opcode::F,
        span,
        slot_in_a: alpha,
        slot_in_b: None,
        slot_out: child_alpha,
        node_range,
    });
    emit_node(&children[0], left, prog);
    prog.push(Instruction {
        op: Opcode::G,
        span,
        slot_in_a: alpha,
        slot_in_b: Some(left),
        slot_out: child_alpha,
        node_range,
    });
    emit_node(&children[1], right, prog);
    prog.push(Instruction {
        op: Opcode::Combine,
        span,
        slot_in_a: left,
        slot_in_b: Some(right),
        slot_out: out_slot,
        node_range,
    });
}

/// Depth-first schedule: `F`, left subtree, `G`, right subtree, `Combine`.
pub fn emit_program(tree: &DecoderTree) -> OpProgram {
    let mut instructions = Vec::new();
    emit_node(&tree.root, Slot::Output, &mut instructions);
    OpProgram { instructions }
}

/// `build_tree` followed by `emit_program`.
pub fn compile(spec: &PolarCodeSpec, cfg: &CompilerConfig) -> OpProgram {
    emit_program(&build_tree(spec, cfg))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramStats {
    pub instruction_count: usize,
    pub count_by_opcode: BTreeMap<Opcode, usize>,
    pub max_span: usize,
}

impl OpProgram {
    /// Block length, read from the root instruction.
    pub fn n_block(&self) -> usize {
        self.instructions.last().map_or(0, |i| i.node_range[1] - i.node_range[0])
    }

    /// Number of information bits decided by the leaves.
    pub fn k_info(&self) -> usize {
        self.instructions
            .iter()
            .map(|i| match i.op {
                Opcode::Rate1 => i.span,
                Opcode::Rep => 1,
                Opcode::Spc => i.span - 1,
                _ => 0,
            })
            .sum()
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.instructions.iter().map(Instruction::label).collect()
    }

    pub fn stats(&self) -> ProgramStats {
        let mut count_by_opcode = BTreeMap::new();
        for inst in &self.instructions {
            *count_by_opcode.entry(inst.op).or_insert(0) += 1;
        }
        ProgramStats {
            instruction_count: self.instructions.len(),
            count_by_opcode,
            max_span: self.instructions.iter().map(|i| i.span).max().unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let prog: OpProgram = serde_json::from_str(text)?;
        prog.validate()?;
        Ok(prog)
    }

    /// Checks operand shapes and that every slot is written before it is
    /// read. The channel slot counts as written on entry.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_block();
        if self.instructions.is_empty() || !n.is_power_of_two() {
            return Err(Error::BadProgram("empty program or non power-of-two root".into()));
        }
        let mut written = std::collections::HashSet::from([Slot::CHANNEL]);
        for (index, inst) in self.instructions.iter().enumerate() {
            let bad = |msg: &str| Error::BadProgram(format!("instruction {index} ({}): {msg}", inst.label()));
            if inst.span == 0 || !inst.span.is_power_of_two() || inst.node_range[1] - inst.node_range[0] != inst.span {
                return Err(bad("inconsistent span"));
            }
            let expected_inputs: Vec<(bool, usize)> = match inst.op {
                Opcode::F => vec![(true, inst.span)],
                Opcode::G => vec![(true, inst.span), (false, inst.span / 2)],
                Opcode::Combine => vec![(false, inst.span / 2), (false, inst.span / 2)],
                _ => vec![(true, inst.span)],
            };
            let inputs: Vec<Slot> = inst.inputs().collect();
            if inputs.len() != expected_inputs.len() {
                return Err(bad("wrong operand count"));
            }
            for (slot, (llr, len)) in inputs.iter().zip(expected_inputs) {
                if slot.holds_llrs() != llr || slot.len(n) != len {
                    return Err(bad(&format!("operand {slot} has the wrong type or length")));
                }
                if !written.contains(slot) {
                    return Err(Error::SlotUnderflow { index, slot: slot.to_string() });
                }
            }
            if inst.slot_out.holds_llrs() != inst.op.outputs_llrs() || inst.slot_out.len(n) != inst.output_len() {
                return Err(bad("output slot has the wrong type or length"));
            }
            written.insert(inst.slot_out);
        }
        if self.instructions.last().map(|i| i.slot_out) != Some(Slot::Output) {
            return Err(Error::BadProgram("last instruction must write the output".into()));
        }
        Ok(())
    }
}
