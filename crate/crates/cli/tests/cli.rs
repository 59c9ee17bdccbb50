use std::path::Path;
use std::process::{Command, Output};

fn polar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polar-unroll")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Independent Bhattacharyya enumeration for N = 8: walk each index's bits
/// MSB first from z0.
fn bhattacharyya_worst(n_bits: u32, rate: f64, snr_db: f64, count: usize) -> Vec<usize> {
    let z0 = (-rate * 10f64.powf(snr_db / 10.0)).exp();
    let n = 1usize << n_bits;
    let mut z: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let mut v = z0;
            for b in (0..n_bits).rev() {
                v = if i >> b & 1 == 1 { v * v } else { 2.0 * v - v * v };
            }
            (v, i)
        })
        .collect();
    z.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut worst: Vec<usize> = z.into_iter().take(count).map(|p| p.1).collect();
    worst.sort_unstable();
    worst
}

fn frozen_lines(text: &str) -> Vec<usize> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.trim().parse().unwrap()).collect()
}

#[test]
fn construct_matches_recursion_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = polar(dir.path(), &["construct", "--n", "8", "--k", "4", "--design-snr", "0"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("K = 4") && stdout.contains("R = 0.5"), "{stdout}");
    assert_eq!(frozen_lines(&read(dir.path(), "frozen.txt")), bhattacharyya_worst(3, 0.5, 0.0, 4));
}

#[test]
fn construct_load_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("code84.txt"), "0 1 2 4\n").unwrap();
    let out = polar(dir.path(), &["construct", "--n", "8", "--load", "code84.txt", "--out", "o"]);
    assert_eq!(code(&out), 0);
    assert_eq!(frozen_lines(&read(&dir.path().join("o"), "frozen.txt")), [0, 1, 2, 4]);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&polar(dir.path(), &["construct", "--n", "7", "--k", "3"])), 2);
    assert_eq!(code(&polar(dir.path(), &["construct", "--n", "8"])), 2);
    assert_eq!(code(&polar(dir.path(), &["bogus"])), 2);
    std::fs::write(dir.path().join("f.txt"), "# N=8\n0 1 2 4\n").unwrap();
    assert_eq!(code(&polar(dir.path(), &["compile", "--frozen", "f.txt", "--cap-repspc", "3"])), 2);
    assert_eq!(code(&polar(dir.path(), &["compile", "--frozen", "f.txt", "--quant", "fixed:1"])), 2);
    assert_eq!(code(&polar(dir.path(), &["ber", "--frozen", "f.txt", "--ebno-list", ""])), 2);
    assert_eq!(code(&polar(dir.path(), &["ber", "--frozen", "f.txt", "--ebno-list", "1", "--decoder", "ml"])), 2);
    std::fs::write(dir.path().join("bad.txt"), "# N=8\n0 9\n").unwrap();
    assert_eq!(code(&polar(dir.path(), &["compile", "--frozen", "bad.txt"])), 2);
    std::fs::write(dir.path().join("noheader.txt"), "0 1\n").unwrap();
    assert_eq!(code(&polar(dir.path(), &["compile", "--frozen", "noheader.txt"])), 2);
}

#[test]
fn missing_frozen_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = polar(dir.path(), &["compile", "--frozen", "nope.txt", "--n", "8"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
}

#[test]
fn compile_code84_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("code84.txt"), "0 1 2 4\n").unwrap();
    let out = polar(dir.path(), &["compile", "--frozen", "code84.txt", "--n", "8", "--freq-mhz", "231"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["latency_cycles"], 5);
    assert_eq!(report["throughput_model"]["info_bps"].as_f64().unwrap(), 8.0 * 231e6 * 0.5);
    let program: serde_json::Value = serde_json::from_str(&read(dir.path(), "program.json")).unwrap();
    let ops: Vec<&str> = program.as_array().unwrap().iter().map(|i| i["op"].as_str().unwrap()).collect();
    assert_eq!(ops, ["F", "Rep", "G", "SPC", "Combine"]);
    assert!(read(dir.path(), "netlist.dot").starts_with("digraph"));
    assert!(read(dir.path(), "tree.dot").starts_with("digraph"));
}

#[test]
fn compile_1024_throughput() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&polar(dir.path(), &["construct", "--n", "1024", "--k", "512"])), 0);
    assert_eq!(code(&polar(dir.path(), &["compile", "--frozen", "frozen.txt", "--freq-mhz", "231"])), 0);
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    let info = report["throughput_model"]["info_bps"].as_f64().unwrap();
    assert!((info - 118.5e9).abs() / 118.5e9 <= 0.003, "{info}");
}

#[test]
fn ber_identical_across_decoders() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&polar(dir.path(), &["construct", "--n", "64", "--k", "32"])), 0);
    let mut csvs = Vec::new();
    for decoder in ["sc", "fastssc", "pipeline"] {
        let out_dir = format!("out_{decoder}");
        let args = [
            "ber",
            "--frozen",
            "frozen.txt",
            "--ebno-list",
            "0,2",
            "--seed",
            "9",
            "--max-frames",
            "5000",
            "--decoder",
            decoder,
            "--check",
            "--out",
            &out_dir,
        ];
        assert_eq!(code(&polar(dir.path(), &args)), 0);
        csvs.push(read(&dir.path().join(&out_dir), "ber.csv"));
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
    assert!(csvs[0].starts_with("ebno_db,frames,bit_errors,frame_errors,ber,fer\n"));
}

#[test]
fn code84_ber_strictly_decreasing_over_1e5_frames() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("code84.txt"), "# N=8 K=4\n0 1 2 4\n").unwrap();
    let args = [
        "ber",
        "--frozen",
        "code84.txt",
        "--ebno-list",
        "0,2,4,6",
        "--max-frames",
        "100000",
        "--min-frame-errors",
        "100000000",
        "--seed",
        "3",
    ];
    assert_eq!(code(&polar(dir.path(), &args)), 0);
    let csv = read(dir.path(), "ber.csv");
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[1] == "100000"));
    let ber: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(ber.windows(2).all(|w| w[1] < w[0]), "{ber:?}");
}

#[test]
fn rate_one_fer_is_raw_hard_decision_fer() {
    // all-info N=2 code: a frame fails iff some hard decision fails; at 0 dB
    // with R = 1 the raw bit error probability is Q(sqrt(2)) ~ 0.0786
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r1.txt"), "# N=2\n").unwrap();
    let args = [
        "ber",
        "--frozen",
        "r1.txt",
        "--ebno-list",
        "0",
        "--max-frames",
        "40000",
        "--min-frame-errors",
        "100000000",
        "--quant",
        "float",
    ];
    assert_eq!(code(&polar(dir.path(), &args)), 0);
    let csv = read(dir.path(), "ber.csv");
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let fer: f64 = row[5].parse().unwrap();
    let p = 0.078_649_6;
    let want = 1.0 - (1.0 - p) * (1.0 - p);
    assert!((fer - want).abs() < 0.006, "fer {fer} vs {want}");
}

#[test]
fn sweep_rows_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = polar(dir.path(), &["sweep", "--n-list", "8"]);
    assert_eq!(code(&out), 0);
    let csv = read(dir.path(), "sweep.csv");
    assert_eq!(csv, "N,latency_cycles,register_bits,instruction_count\n8,5,168,5\n");

    assert_eq!(code(&polar(dir.path(), &["sweep", "--n-list", "64,128,256,512,1024"])), 0);
    let csv = read(dir.path(), "sweep.csv");
    let footer = csv.lines().last().unwrap();
    let e: f64 = footer.split("e = ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((1.7..=2.3).contains(&e), "{footer}");
    let latencies: Vec<usize> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(latencies.windows(2).all(|w| w[0] <= w[1]), "{latencies:?}");
}

#[test]
fn simulate_writes_trace_and_passes_timing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("code84.txt"), "# N=8\n0 1 2 4\n").unwrap();
    let out = polar(dir.path(), &["simulate", "--frozen", "code84.txt", "--frames", "3"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("frame 2 out at cycle 7"), "{stdout}");
    let trace = read(dir.path(), "trace.csv");
    assert_eq!(trace.lines().count(), 1 + 15);
    assert!(trace.contains("\n0,0,0,F8\n"));
    let timing: serde_json::Value = serde_json::from_str(&read(dir.path(), "timing.json")).unwrap();
    assert_eq!(timing["pass"], true);
}

#[test]
fn agree_reports_no_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&polar(dir.path(), &["construct", "--n", "128", "--k", "64"])), 0);
    let out = polar(dir.path(), &["agree", "--frozen", "frozen.txt", "--frames", "2000", "--ebno", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(dir.path(), "mismatches.jsonl"), "");
}

#[test]
fn config_file_supplies_flags_and_cli_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("code84.txt"), "# N=8\n0 1 2 4\n").unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "# ber settings\nfrozen = code84.txt\nebno_list = 1,2\nmax_frames = 500\nseed = 4\ncheck = true\nout = cfg_out\n",
    )
    .unwrap();
    assert_eq!(code(&polar(dir.path(), &["ber", "--config", "run.cfg"])), 0);
    let csv = read(&dir.path().join("cfg_out"), "ber.csv");
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("1,500,"));

    assert_eq!(code(&polar(dir.path(), &["ber", "--config", "run.cfg", "--max-frames", "200", "--out", "cli_out"])), 0);
    let csv = read(&dir.path().join("cli_out"), "ber.csv");
    assert!(csv.lines().nth(1).unwrap().starts_with("1,200,"));

    assert_eq!(code(&polar(dir.path(), &["ber", "--config", "missing.cfg"])), 2);
}
