//! The cycle-accurate pipeline against the interpreter on larger codes,
//! with bubbles and scrambled unit evaluation order.

use polar_unroll::code_model::{construct_frozen_set, ChannelConfig, QuantSpec};
use polar_unroll::pipeline_sim::{check_timing, run_stream, SimOptions};
use polar_unroll::reference_decoders::{fastssc_interpret, simulate_frame};
use polar_unroll::tree_compiler::{compile, CompilerConfig};
use polar_unroll::unroller::{latency_of, unroll};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bubbly_stream_matches_interpreter() {
    let quant = QuantSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (n, k, cap) in [(32, 16, 2), (128, 40, 4), (256, 200, 8)] {
        let spec = construct_frozen_set(n, k, 1.5).unwrap();
        let prog = compile(&spec, &CompilerConfig::new(cap, n).unwrap());
        let net = unroll(&prog, &quant).unwrap();
        let chan = ChannelConfig::new(1.0, 5);
        let frames: Vec<_> = (0..200).map(|i| simulate_frame(&spec, &chan, &quant, i)).collect();

        let mut stream = Vec::new();
        for f in &frames {
            while rng.gen_bool(0.3) {
                stream.push(None);
            }
            stream.push(Some(f.llrs.clone()));
        }
        let stages = latency_of(&net);
        let mut order: Vec<usize> = (0..stages).collect();
        order.shuffle(&mut rng);
        let sim = run_stream(&net, stream, SimOptions { eval_order: Some(order), record_occupancy: true }).unwrap();

        assert!(check_timing(&sim.trace, &net).pass);
        assert_eq!(sim.outputs.len(), frames.len());
        for (out, f) in sim.outputs.iter().zip(&frames) {
            let want = fastssc_interpret(&prog, &f.llrs, &quant, false).unwrap().x_hat;
            assert_eq!(out.x_hat, want, "N={n} frame {}", f.index);
            let slot = sim.trace.ingests[out.frame_id as usize];
            assert_eq!(out.output_cycle, slot.injected_cycle + stages as u64);
        }
    }
}
