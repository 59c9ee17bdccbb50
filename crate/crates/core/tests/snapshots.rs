//! Regression snapshots for the default (1024,512) code: design Eb/N0 0 dB,
//! caps (4, 1024), fixed:6. Update deliberately when the compiler changes.

use polar_unroll::code_model::{construct_frozen_set, QuantSpec};
use polar_unroll::tree_compiler::{compile, CompilerConfig, Opcode};
use polar_unroll::unroller::{latency_of, resource_report, unroll};

#[test]
fn default_1024_512_program_stats() {
    let spec = construct_frozen_set(1024, 512, 0.0).unwrap();
    let prog = compile(&spec, &CompilerConfig::new(4, 1024).unwrap());
    let stats = prog.stats();
    assert_eq!(stats.instruction_count, 461);
    assert_eq!(stats.max_span, 1024);
    let counts: Vec<(Opcode, usize)> = stats.count_by_opcode.into_iter().collect();
    assert_eq!(
        counts,
        [
            (Opcode::F, 115),
            (Opcode::G, 115),
            (Opcode::Combine, 115),
            (Opcode::Rate0, 39),
            (Opcode::Rate1, 33),
            (Opcode::Rep, 23),
            (Opcode::Spc, 21),
        ]
    );
}

#[test]
fn default_1024_512_resources() {
    let spec = construct_frozen_set(1024, 512, 0.0).unwrap();
    let netlist = unroll(&compile(&spec, &CompilerConfig::new(4, 1024).unwrap()), &QuantSpec::default()).unwrap();
    assert_eq!(latency_of(&netlist), 461);
    assert!((300..=900).contains(&latency_of(&netlist)));
    assert_eq!(resource_report(&netlist, 231e6).unwrap().register_bits, 3_120_352);
}

#[test]
fn latency_nondecreasing_in_block_length() {
    let mut prev = 0;
    for log_n in 1..=11 {
        let n = 1 << log_n;
        let spec = construct_frozen_set(n, n / 2, 0.0).unwrap();
        let latency = compile(&spec, &CompilerConfig::default_for(n)).len();
        assert!(latency >= prev, "N={n}: {latency} < {prev}");
        prev = latency;
    }
}
