//! Fast-SSC polar decoder compiler and pipeline model.
//!
//! The crate takes a polar code from construction all the way to a
//! fully-unrolled, deeply-pipelined decoder description:
//!
//! 1. [`code_model`] builds the code (frozen set, encoder, BPSK-AWGN channel,
//!    LLR quantization).
//! 2. [`tree_compiler`] prunes the successive-cancellation decoder tree into
//!    Rate-0 / Rate-1 / Repetition / SPC leaves and emits a linear
//!    [`OpProgram`](tree_compiler::OpProgram).
//! 3. [`unroller`] turns the program into a [`PipelineNetlist`] with one
//!    functional unit per stage and explicit synchronization register chains.
//! 4. [`pipeline_sim`] clocks the netlist cycle by cycle, one new frame per
//!    cycle.
//!
//! [`reference_decoders`] holds the sequential min-sum SC oracle and the
//! Fast-SSC program interpreter used as ground truth, and [`harness`] wires
//! everything into BER, agreement and resource-sweep runs.

pub mod code_model;
pub mod error;
pub mod harness;
pub mod kernel_ops;
pub mod pipeline_sim;
pub mod reference_decoders;
pub mod tree_compiler;
pub mod unroller;

pub use code_model::{ChannelConfig, PolarCodeSpec, QuantSpec};
pub use error::{Error, Result};
pub use kernel_ops::{Bit, Llr};
pub use tree_compiler::{CompilerConfig, DecoderTree, OpProgram};
pub use unroller::{PipelineNetlist, ResourceReport};
