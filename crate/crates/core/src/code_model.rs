//! Polar code parameters, frozen-set construction, encoding, and the
//! BPSK-AWGN channel with optional fixed-point LLR quantization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_ops::{Bit, Llr};

pub const MAX_BLOCK_LENGTH: usize = 1 << 20;

/// Design SNR used when none is given.
pub const DEFAULT_DESIGN_EBNO_DB: f64 = 0.0;

/// An `(N, K)` polar code with an explicit frozen set in natural
/// (non-bit-reversed) u-domain order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCodeSpec {
    n_block: usize,
    frozen: Vec<usize>,
    frozen_mask: Vec<bool>,
}

impl PolarCodeSpec {
    /// Builds a spec from an arbitrary collection of frozen indices.
    pub fn new(n_block: usize, frozen: impl IntoIterator<Item = usize>) -> Result<Self> {
        check_block_length(n_block)?;
        let mut frozen_mask = vec![false; n_block];
        let mut list = Vec::new();
        for index in frozen {
            if index >= n_block {
                return Err(Error::IndexOutOfRange { index, n: n_block });
            }
            if frozen_mask[index] {
                return Err(Error::DuplicateIndex(index));
            }
            frozen_mask[index] = true;
            list.push(index);
        }
        list.sort_unstable();
        Ok(Self { n_block, frozen: list, frozen_mask })
    }

    pub fn n_block(&self) -> usize {
        self.n_block
    }

    pub fn k_info(&self) -> usize {
        self.n_block - self.frozen.len()
    }

    /// Sorted frozen indices.
    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen
    }

    pub fn frozen_mask(&self) -> &[bool] {
        &self.frozen_mask
    }

    pub fn is_frozen(&self, index: usize) -> bool {
        self.frozen_mask[index]
    }

    /// Non-frozen indices in ascending order.
    pub fn info_positions(&self) -> Vec<usize> {
        (0..self.n_block).filter(|&i| !self.frozen_mask[i]).collect()
    }

    /// Code rate `K/N` as an exact `(K, N)` pair.
    pub fn rate_ratio(&self) -> (usize, usize) {
        (self.k_info(), self.n_block)
    }

    pub fn rate(&self) -> f64 {
        self.k_info() as f64 / self.n_block as f64
    }
}

fn check_block_length(n: usize) -> Result<()> {
    if !(2..=MAX_BLOCK_LENGTH).contains(&n) || !n.is_power_of_two() {
        return Err(Error::BadBlockLength(n));
    }
    Ok(())
}

/// Bhattacharyya parameters of the `N` synthetic channels, natural order.
///
/// Index bits are consumed MSB first: a 0 bit applies the degrading
/// transform `2z - z^2`, a 1 bit the upgrading transform `z^2`.
pub fn bhattacharyya_parameters(n_block: usize, rate: f64, design_ebno_db: f64) -> Vec<f64> {
    let z0 = (-rate * 10f64.powf(design_ebno_db / 10.0)).exp();
    let mut z = vec![z0];
    while z.len() < n_block {
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    z
}

/// Freezes the `N - K` least reliable synthetic channels.
pub fn construct_frozen_set(n_block: usize, k_info: usize, design_ebno_db: f64) -> Result<PolarCodeSpec> {
    check_block_length(n_block)?;
    if k_info == 0 || k_info > n_block {
        return Err(Error::BadInfoLength { n: n_block, k: k_info });
    }
    let z = bhattacharyya_parameters(n_block, k_info as f64 / n_block as f64, design_ebno_db);
    let mut order: Vec<usize> = (0..n_block).collect();
    // Worst first; equal parameters freeze the lower index first.
    order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    PolarCodeSpec::new(n_block, order.into_iter().take(n_block - k_info))
}

/// Parses the frozen-set text format: decimal indices separated by
/// whitespace or newlines, `#` starts a comment.
pub fn parse_frozen_set(text: &str, n_block: usize) -> Result<PolarCodeSpec> {
    let mut indices = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        for token in body.split_whitespace() {
            let index =
                token.parse::<usize>().map_err(|_| Error::Malformed { line: line_no + 1, token: token.to_string() })?;
            indices.push(index);
        }
    }
    PolarCodeSpec::new(n_block, indices)
}

pub fn load_frozen_set(path: impl AsRef<Path>, n_block: usize) -> Result<PolarCodeSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_frozen_set(&text, n_block)
}

/// Renders a spec in the frozen-set file format (one index per line).
pub fn format_frozen_set(spec: &PolarCodeSpec) -> String {
    let mut out = format!("# N={} K={}\n", spec.n_block(), spec.k_info());
    for index in spec.frozen_set() {
        out.push_str(&index.to_string());
        out.push('\n');
    }
    out
}

/// In-place `x = u * F^{(x)n}` over GF(2), no bit reversal. The transform is
/// its own inverse.
pub fn polar_transform_in_place(bits: &mut [Bit]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut half = n / 2;
    while half >= 1 {
        for block in bits.chunks_mut(2 * half) {
            let (left, right) = block.split_at_mut(half);
            for (l, r) in left.iter_mut().zip(right.iter()) {
                *l ^= *r;
            }
        }
        half /= 2;
    }
}

/// Places `info_bits` at the non-frozen positions and encodes.
pub fn encode(spec: &PolarCodeSpec, info_bits: &[Bit]) -> Result<Vec<Bit>> {
    if info_bits.len() != spec.k_info() {
        return Err(Error::LengthMismatch { expected: spec.k_info(), got: info_bits.len() });
    }
    let mut u = vec![0; spec.n_block()];
    for (pos, &bit) in spec.info_positions().iter().zip(info_bits) {
        u[*pos] = bit & 1;
    }
    polar_transform_in_place(&mut u);
    Ok(u)
}

/// LLR number format used along the decoder datapath.
///
/// Fixed mode is sign-magnitude: values are integers in units of one LSB,
/// clamped to `±(2^(total_bits-1) - 1)`, and zero keeps its sign bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum QuantSpec {
    Float,
    Fixed { total_bits: u32, frac_bits: u32 },
}

impl Default for QuantSpec {
    fn default() -> Self {
        QuantSpec::Fixed { total_bits: 6, frac_bits: 0 }
    }
}

impl QuantSpec {
    pub fn fixed(total_bits: u32) -> Result<Self> {
        Self::fixed_with_frac(total_bits, 0)
    }

    pub fn fixed_with_frac(total_bits: u32, frac_bits: u32) -> Result<Self> {
        if !(2..=24).contains(&total_bits) || frac_bits >= total_bits {
            return Err(Error::BadQuant(format!("fixed:{total_bits}:{frac_bits}")));
        }
        Ok(QuantSpec::Fixed { total_bits, frac_bits })
    }

    /// Largest representable magnitude, `None` in float mode.
    pub fn max_magnitude(&self) -> Option<Llr> {
        match *self {
            QuantSpec::Float => None,
            QuantSpec::Fixed { total_bits, .. } => Some(((1u32 << (total_bits - 1)) - 1) as Llr),
        }
    }

    /// Bits per stored LLR (32 for float).
    pub fn llr_width_bits(&self) -> u32 {
        match *self {
            QuantSpec::Float => 32,
            QuantSpec::Fixed { total_bits, .. } => total_bits,
        }
    }

    /// Symmetric clamp; identity in float mode. Preserves the sign of zero.
    #[inline]
    pub fn saturate(&self, x: Llr) -> Llr {
        match self.max_magnitude() {
            None => x,
            Some(m) => x.clamp(-m, m),
        }
    }

    /// Rounds to the integer grid and clamps. Idempotent.
    #[inline]
    pub fn quantize(&self, x: Llr) -> Llr {
        match self {
            QuantSpec::Float => x,
            QuantSpec::Fixed { .. } => self.saturate(x.round()),
        }
    }

    /// Converts a real-valued channel LLR into the datapath format.
    pub fn from_channel(&self, llr: f64) -> Llr {
        match *self {
            QuantSpec::Float => llr as Llr,
            QuantSpec::Fixed { frac_bits, .. } => self.quantize((llr * f64::from(1u32 << frac_bits)) as Llr),
        }
    }
}

impl fmt::Display for QuantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantSpec::Float => write!(f, "float"),
            QuantSpec::Fixed { total_bits, frac_bits: 0 } => write!(f, "fixed:{total_bits}"),
            QuantSpec::Fixed { total_bits, frac_bits } => write!(f, "fixed:{total_bits}:{frac_bits}"),
        }
    }
}

impl FromStr for QuantSpec {
    type Err = Error;

    /// Accepts `float`, `fixed:<bits>` or `fixed:<bits>:<frac_bits>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadQuant(s.to_string());
        let mut parts = s.trim().split(':');
        match parts.next() {
            Some("float") if parts.next().is_none() => Ok(QuantSpec::Float),
            Some("fixed") => {
                let total = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let frac = match parts.next() {
                    Some(p) => p.parse().map_err(|_| bad())?,
                    None => 0,
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                Self::fixed_with_frac(total, frac).map_err(|_| bad())
            }
            _ => Err(bad()),
        }
    }
}

/// BPSK over AWGN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub ebno_db: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(ebno_db: f64, seed: u64) -> Self {
        Self { ebno_db, seed }
    }

    /// `sigma^2 = 1 / (2 R 10^(EbN0/10))`.
    pub fn noise_variance(&self, rate: f64) -> f64 {
        1.0 / (2.0 * rate * 10f64.powf(self.ebno_db / 10.0))
    }
}

/// Per-frame RNG; each frame owns two independent ChaCha streams so that
/// results never depend on how frames are scheduled.
pub(crate) fn frame_rng(seed: u64, frame_index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_index.wrapping_mul(2).wrapping_add(purpose));
    rng
}

/// Modulates, adds noise and returns (quantized) channel LLRs `2y/sigma^2`.
pub fn transmit(codeword: &[Bit], chan: &ChannelConfig, rate: f64, quant: &QuantSpec, frame_index: u64) -> Vec<Llr> {
    let sigma2 = chan.noise_variance(rate);
    let sigma = sigma2.sqrt();
    let mut rng = frame_rng(chan.seed, frame_index, 1);
    codeword
        .iter()
        .map(|&bit| {
            let symbol = 1.0 - 2.0 * f64::from(bit);
            let noise: f64 = rng.sample(StandardNormal);
            quant.from_channel(2.0 * (symbol + sigma * noise) / sigma2)
        })
        .collect()
}

/// Magnitude standing in for an infinitely reliable LLR in float mode.
pub const NOISELESS_FLOAT_LLR: Llr = 1.0e6;

/// Noiseless channel: each LLR is the saturation value (or a large float)
/// with the sign of the transmitted symbol.
pub fn transmit_noiseless(codeword: &[Bit], quant: &QuantSpec) -> Vec<Llr> {
    let mag = quant.max_magnitude().unwrap_or(NOISELESS_FLOAT_LLR);
    codeword.iter().map(|&bit| if bit == 0 { mag } else { -mag }).collect()
}

/// Uniform random info word for frame `frame_index`.
pub fn random_info_bits(k_info: usize, seed: u64, frame_index: u64) -> Vec<Bit> {
    let mut rng = frame_rng(seed, frame_index, 0);
    (0..k_info).map(|_| rng.gen::<bool>() as Bit).collect()
}
