//! Browser bindings: compile a code, watch frames move through the
//! unrolled pipeline, and sweep resources over block length. Every entry
//! point returns a JSON string; `www/index.html` renders it.

use polar_unroll::code_model::{construct_frozen_set, parse_frozen_set, ChannelConfig, PolarCodeSpec, QuantSpec};
use polar_unroll::harness::{register_fit, resource_sweep as sweep, SweepConfig};
use polar_unroll::pipeline_sim::{check_timing, run, SimOptions};
use polar_unroll::reference_decoders::simulate_frame;
use polar_unroll::tree_compiler::{build_tree, emit_program, CompilerConfig, TreeNode};
use polar_unroll::unroller::{resource_report, unroll};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

type DemoResult = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A frozen-set listing wins over `(k, design_snr)` when non-blank.
fn code_from(n: usize, k: usize, design_snr: f64, frozen_text: &str) -> Result<PolarCodeSpec, String> {
    let listed = frozen_text.lines().any(|l| !l.split('#').next().unwrap_or("").trim().is_empty());
    if listed {
        parse_frozen_set(frozen_text, n).map_err(err)
    } else {
        construct_frozen_set(n, k, design_snr).map_err(err)
    }
}

fn compiler(n: usize, cap_repspc: usize) -> Result<CompilerConfig, String> {
    CompilerConfig::new(cap_repspc, n.max(2)).map_err(err)
}

#[derive(Serialize)]
struct TreeView {
    kind: String,
    start: usize,
    span: usize,
    children: Vec<TreeView>,
}

fn tree_view(node: &TreeNode) -> TreeView {
    TreeView {
        kind: serde_json::to_value(node.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        start: node.start,
        span: node.span,
        children: node.children.iter().flat_map(|c| c.iter().map(tree_view)).collect(),
    }
}

pub fn compile_code_json(
    n: usize,
    k: usize,
    design_snr: f64,
    frozen_text: &str,
    cap_repspc: usize,
    quant: &str,
    freq_mhz: f64,
) -> DemoResult {
    let spec = code_from(n, k, design_snr, frozen_text)?;
    let quant: QuantSpec = quant.parse().map_err(err)?;
    let tree = build_tree(&spec, &compiler(n, cap_repspc)?);
    let prog = emit_program(&tree);
    let netlist = unroll(&prog, &quant).map_err(err)?;
    let report = resource_report(&netlist, freq_mhz * 1e6).map_err(err)?;
    let value = json!({
        "n_block": spec.n_block(),
        "k_info": spec.k_info(),
        "frozen": spec.frozen_set(),
        "tree": tree_view(&tree.root),
        "program": prog.labels(),
        "stats": prog.stats(),
        "report": report,
        "sync_registers": netlist.sync_register_count(),
    });
    serde_json::to_string(&value).map_err(err)
}

#[allow(clippy::too_many_arguments)]
pub fn timing_diagram_json(
    n: usize,
    k: usize,
    design_snr: f64,
    frozen_text: &str,
    cap_repspc: usize,
    frames: u32,
    ebno_db: f64,
    seed: u64,
) -> DemoResult {
    if frames == 0 || frames > 64 {
        return Err("frames must be between 1 and 64".into());
    }
    if n > 256 {
        return Err("the timing view is limited to N <= 256".into());
    }
    let spec = code_from(n, k, design_snr, frozen_text)?;
    let quant = QuantSpec::default();
    let netlist = unroll(&emit_program(&build_tree(&spec, &compiler(n, cap_repspc)?)), &quant).map_err(err)?;
    let chan = ChannelConfig::new(ebno_db, seed);
    let sent: Vec<_> = (0..frames as u64).map(|i| simulate_frame(&spec, &chan, &quant, i)).collect();
    let sim = run(
        &netlist,
        sent.iter().map(|f| f.llrs.clone()),
        SimOptions { record_occupancy: true, ..SimOptions::default() },
    )
    .map_err(err)?;
    let timing = check_timing(&sim.trace, &netlist);
    let outputs: Vec<_> = sim
        .outputs
        .iter()
        .map(|e| {
            let sent = &sent[e.frame_id as usize];
            let bit_errors = e.x_hat.iter().zip(&sent.codeword).filter(|(a, b)| a != b).count();
            json!({ "frame": e.frame_id, "cycle": e.output_cycle, "codeword_bit_errors": bit_errors })
        })
        .collect();
    let value = json!({
        "latency": sim.trace.latency,
        "stage_labels": sim.trace.stage_labels,
        "occupancy": sim.trace.occupancy,
        "outputs": outputs,
        "timing_pass": timing.pass,
        "checks": timing.checks,
    });
    serde_json::to_string(&value).map_err(err)
}

pub fn resource_sweep_json(n_list: &str, rate: f64, cap_repspc: usize) -> DemoResult {
    let n_list: Vec<usize> = n_list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad block length {s:?}")))
        .collect::<Result<_, _>>()?;
    if n_list.is_empty() {
        return Err("empty block-length list".into());
    }
    if n_list.iter().any(|&n| n > 4096) {
        return Err("block lengths above 4096 are too slow for the browser".into());
    }
    let rows = sweep(&SweepConfig { n_list, rate, design_ebno_db: 0.0, cap_repspc, quant: QuantSpec::default() })
        .map_err(err)?;
    let fit = register_fit(&rows).map(|(c, e)| json!({ "c": c, "e": e }));
    serde_json::to_string(&json!({ "rows": rows, "fit": fit })).map_err(err)
}

#[wasm_bindgen]
pub fn compile_code(
    n: usize,
    k: usize,
    design_snr: f64,
    frozen_text: &str,
    cap_repspc: usize,
    quant: &str,
    freq_mhz: f64,
) -> Result<String, JsError> {
    compile_code_json(n, k, design_snr, frozen_text, cap_repspc, quant, freq_mhz).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn timing_diagram(
    n: usize,
    k: usize,
    design_snr: f64,
    frozen_text: &str,
    cap_repspc: usize,
    frames: u32,
    ebno_db: f64,
    seed: u32,
) -> Result<String, JsError> {
    timing_diagram_json(n, k, design_snr, frozen_text, cap_repspc, frames, ebno_db, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn resource_sweep(n_list: &str, rate: f64, cap_repspc: usize) -> Result<String, JsError> {
    resource_sweep_json(n_list, rate, cap_repspc).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: DemoResult) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn compile_example_code() {
        let v = parse(compile_code_json(8, 0, 0.0, "0 1 2 4", 4, "fixed:6", 231.0));
        assert_eq!(v["program"], json!(["F8", "Rep4", "G8", "SPC4", "Comb8"]));
        assert_eq!(v["report"]["latency_cycles"], 5);
        assert_eq!(v["report"]["throughput_model"]["info_bps"], json!(924e6));
        assert_eq!(v["tree"]["kind"], "Branch");
        assert_eq!(v["tree"]["children"][0]["kind"], "Repetition");
        assert_eq!(v["tree"]["children"][1]["kind"], "SPC");
        assert_eq!(v["sync_registers"], 4);
    }

    #[test]
    fn compile_constructs_when_no_listing() {
        let v = parse(compile_code_json(64, 32, 0.0, "  # nothing\n", 4, "fixed:6", 100.0));
        assert_eq!(v["k_info"], 32);
        assert_eq!(v["frozen"].as_array().unwrap().len(), 32);
    }

    #[test]
    fn compile_reports_errors() {
        assert!(compile_code_json(7, 3, 0.0, "", 4, "fixed:6", 231.0).is_err());
        assert!(compile_code_json(8, 4, 0.0, "", 3, "fixed:6", 231.0).is_err());
        assert!(compile_code_json(8, 4, 0.0, "", 4, "fixed:0", 231.0).is_err());
        assert!(compile_code_json(8, 4, 0.0, "0 x", 4, "fixed:6", 231.0).is_err());
    }

    #[test]
    fn timing_three_frames() {
        let v = parse(timing_diagram_json(8, 0, 0.0, "0 1 2 4", 4, 3, 2.0, 1));
        assert_eq!(v["latency"], 5);
        assert_eq!(v["timing_pass"], true);
        let cycles: Vec<u64> = v["outputs"].as_array().unwrap().iter().map(|o| o["cycle"].as_u64().unwrap()).collect();
        assert_eq!(cycles, [5, 6, 7]);
        assert_eq!(v["occupancy"][2], json!([2, 1, 0, null, null]));
        assert!(timing_diagram_json(8, 4, 0.0, "", 4, 0, 2.0, 1).is_err());
    }

    #[test]
    fn sweep_with_fit() {
        let v = parse(resource_sweep_json("64, 128,256", 0.5, 4));
        assert_eq!(v["rows"].as_array().unwrap().len(), 3);
        assert!(v["fit"]["e"].as_f64().unwrap() > 1.0);
        let single = parse(resource_sweep_json("8", 0.5, 4));
        assert_eq!(single["fit"], Value::Null);
        assert!(resource_sweep_json("", 0.5, 4).is_err());
        assert!(resource_sweep_json("12", 0.5, 4).is_err());
    }
}
