//! `polar-unroll` command line: construct, compile, ber, sweep, simulate, agree.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 invariant violation.

mod config;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use polar_unroll::code_model::{
    construct_frozen_set, format_frozen_set, parse_frozen_set, ChannelConfig, PolarCodeSpec, QuantSpec,
};
use polar_unroll::harness::{
    ber_csv, register_fit, resource_sweep, run_ber, sweep_csv, BerConfig, DecoderKind, SweepConfig,
};
use polar_unroll::pipeline_sim::{check_timing, run, SimOptions};
use polar_unroll::reference_decoders::{decoders_agree, simulate_frame};
use polar_unroll::tree_compiler::{build_tree, emit_program, CompilerConfig, DEFAULT_CAP_REPSPC};
use polar_unroll::unroller::{resource_report, unroll};
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "polar-unroll", version, about = "Unrolled Fast-SSC polar decoder compiler and pipeline simulator")]
#[command(after_help = "Any subcommand also accepts --config FILE with key=value lines mirroring its flags.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or validate a frozen set and write frozen.txt.
    Construct(ConstructArgs),
    /// Compile a code into program.json, netlist.json/.dot, tree.dot and report.json.
    Compile(CompileArgs),
    /// Monte-Carlo BER/FER over AWGN; writes ber.csv.
    Ber(BerArgs),
    /// Resource scaling over block lengths; writes sweep.csv.
    Sweep(SweepArgs),
    /// Cycle-accurate pipeline run; writes trace.csv and timing.json.
    Simulate(SimulateArgs),
    /// SC oracle vs pruned decoder on random frames; writes mismatches.jsonl.
    Agree(AgreeArgs),
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct ConstructArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, conflicts_with = "load", required_unless_present = "load")]
    k: Option<usize>,
    /// Design Eb/N0 in dB for the Bhattacharyya construction.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    design_snr: f64,
    /// Validate an existing frozen-set file instead of constructing one.
    #[arg(long)]
    load: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// A frozen-set file plus compiler settings.
#[derive(Args, Debug)]
struct CodeArgs {
    /// Frozen-set file (indices, `#` comments).
    #[arg(long)]
    frozen: PathBuf,
    /// Block length; read from the file's `# N=` header when omitted.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_CAP_REPSPC)]
    cap_repspc: usize,
    /// Largest Rate-0/Rate-1 node (default N).
    #[arg(long)]
    cap_rate: Option<usize>,
    /// `float`, `fixed:B` or `fixed:B:F`.
    #[arg(long, default_value = "fixed:6")]
    quant: QuantSpec,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct CompileArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = 231.0)]
    freq_mhz: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct BerArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    ebno_list: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    min_frame_errors: u64,
    #[arg(long, default_value_t = 100_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// sc, fastssc or pipeline.
    #[arg(long, default_value = "fastssc")]
    decoder: DecoderKind,
    /// Also run the SC oracle and exit 3 on any disagreement.
    #[arg(long)]
    check: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SweepArgs {
    /// Comma-separated block lengths (powers of two).
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    design_snr: f64,
    #[arg(long, default_value_t = DEFAULT_CAP_REPSPC)]
    cap_repspc: usize,
    #[arg(long, default_value = "fixed:6")]
    quant: QuantSpec,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = 3)]
    frames: u64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    ebno: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(args_override_self = true)]
struct AgreeArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, default_value_t = 10_000)]
    frames: u64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    ebno: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// A detected invariant violation (exit code 3).
#[derive(Debug)]
struct Violation(String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Violation {}

/// A bad flag combination caught after parsing (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Violation>().is_some() {
        return 3;
    }
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<polar_unroll::Error>() {
        Some(e) if e.is_usage() => 2,
        Some(polar_unroll::Error::SlotUnderflow { .. }) => 3,
        _ => 1,
    }
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Block length from a `# N=...` header line.
fn header_block_length(text: &str) -> Option<usize> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .flat_map(str::split_whitespace)
        .find_map(|tok| tok.strip_prefix("N=")?.parse().ok())
}

fn read_spec(path: &Path, n: Option<usize>) -> Result<PolarCodeSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading frozen set {}", path.display()))?;
    let n = match n.or_else(|| header_block_length(&text)) {
        Some(n) => n,
        None => bail!(Usage(format!("{} has no `# N=` header; pass --n", path.display()))),
    };
    Ok(parse_frozen_set(&text, n)?)
}

impl CodeArgs {
    fn load(&self) -> Result<(PolarCodeSpec, CompilerConfig)> {
        let spec = read_spec(&self.frozen, self.n)?;
        let n = spec.n_block();
        let cfg = CompilerConfig::new(self.cap_repspc, self.cap_rate.unwrap_or(n.max(2)))?;
        Ok((spec, cfg))
    }
}

fn cmd_construct(a: ConstructArgs) -> Result<()> {
    let spec = match (&a.load, a.k) {
        (Some(path), _) => read_spec(path, Some(a.n))?,
        (None, Some(k)) => construct_frozen_set(a.n, k, a.design_snr)?,
        (None, None) => unreachable!("clap requires --k or --load"),
    };
    let path = write_file(&a.out, "frozen.txt", &format_frozen_set(&spec))?;
    let (k, n) = spec.rate_ratio();
    println!("N = {n}, K = {k}, R = {}", spec.rate());
    println!("frozen: {:?}", spec.frozen_set());
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_compile(a: CompileArgs) -> Result<()> {
    let (spec, cfg) = a.code.load()?;
    let tree = build_tree(&spec, &cfg);
    let prog = emit_program(&tree);
    prog.validate()?;
    let netlist = unroll(&prog, &a.code.quant)?;
    if let Err(v) = netlist.check_sync() {
        bail!(Violation(format!("netlist failed its synchronization check: {v:?}")));
    }
    let report = resource_report(&netlist, a.freq_mhz * 1e6)?;
    write_file(&a.out, "program.json", &prog.to_json()?)?;
    write_file(&a.out, "netlist.json", &netlist.to_json()?)?;
    write_file(&a.out, "netlist.dot", &netlist.to_dot())?;
    write_file(&a.out, "tree.dot", &tree.to_dot())?;
    write_file(&a.out, "report.json", &report.to_json()?)?;
    println!("program: {}", prog.labels().join(" "));
    println!("latency_cycles = {}", report.latency_cycles);
    println!("register_bits = {}", report.register_bits);
    println!("coded_bps = {:.6e}", report.throughput_model.coded_bps);
    println!("info_bps = {:.6e}", report.throughput_model.info_bps);
    println!("wrote program.json netlist.json netlist.dot tree.dot report.json to {}", a.out.display());
    Ok(())
}

fn cmd_ber(a: BerArgs) -> Result<()> {
    let (spec, compiler) = a.code.load()?;
    let config = BerConfig {
        ebno_list: a.ebno_list,
        min_frame_errors: a.min_frame_errors,
        max_frames: a.max_frames,
        seed: a.seed,
        decoder: a.decoder,
        quant: a.code.quant,
        compiler,
        check: a.check,
    };
    let outcome = run_ber(&spec, &config)?;
    let csv = ber_csv(&outcome.rows);
    let path = write_file(&a.out, "ber.csv", &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    if a.check && outcome.oracle_mismatches > 0 {
        bail!(Violation(format!("{} frames disagree with the SC oracle", outcome.oracle_mismatches)));
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let config = SweepConfig {
        n_list: a.n_list,
        rate: a.rate,
        design_ebno_db: a.design_snr,
        cap_repspc: a.cap_repspc,
        quant: a.quant,
    };
    let rows = resource_sweep(&config)?;
    let csv = sweep_csv(&rows);
    let path = write_file(&a.out, "sweep.csv", &csv)?;
    print!("{csv}");
    if register_fit(&rows).is_none() {
        println!("# fewer than two block lengths, no fit");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let (spec, cfg) = a.code.load()?;
    let quant = a.code.quant;
    let netlist = unroll(&emit_program(&build_tree(&spec, &cfg)), &quant)?;
    let chan = ChannelConfig::new(a.ebno, a.seed);
    let frames = (0..a.frames).map(|i| simulate_frame(&spec, &chan, &quant, i).llrs);
    let sim = run(&netlist, frames, SimOptions { record_occupancy: true, ..SimOptions::default() })?;
    let report = check_timing(&sim.trace, &netlist);
    write_file(&a.out, "trace.csv", &sim.trace.occupancy_csv())?;
    write_file(&a.out, "timing.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if sim.trace.occupancy.len() <= 40 && a.frames <= 16 {
        print!("{}", sim.trace.occupancy_chart());
    }
    for e in &sim.outputs {
        println!("frame {} out at cycle {}", e.frame_id, e.output_cycle);
    }
    for c in &report.checks {
        println!("{:<24} {} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    println!("wrote trace.csv timing.json to {}", a.out.display());
    if !report.pass {
        bail!(Violation(format!(
            "timing check failed; first mis-synchronized stage {:?}",
            report.first_missynchronized_stage
        )));
    }
    Ok(())
}

fn cmd_agree(a: AgreeArgs) -> Result<()> {
    let (spec, cfg) = a.code.load()?;
    let chan = ChannelConfig::new(a.ebno, a.seed);
    let report = decoders_agree(&spec, &cfg, &a.code.quant, &chan, a.frames)?;
    write_file(&a.out, "mismatches.jsonl", &report.to_json_lines()?)?;
    println!("{} frames, {} mismatches", report.frames, report.mismatch_count());
    if report.mismatch_count() > 0 {
        bail!(Violation(format!("{} frames disagree with the SC oracle", report.mismatch_count())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Construct(a) => cmd_construct(a),
        Command::Compile(a) => cmd_compile(a),
        Command::Ber(a) => cmd_ber(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Agree(a) => cmd_agree(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
