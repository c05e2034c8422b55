//! Exploration signals and persistency-of-excitation diagnostics.
//!
//! Every signal is a deterministic function of its [`SignalSpec`] and the
//! sample index, so the same seed always reproduces the same input sequence.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Threshold on the smallest eigenvalue of the equilibrated Gram matrix.
pub const PE_TOLERANCE: f64 = 1e-9;
/// Relative singular-value cutoff for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    #[default]
    Prbs,
    Gbn,
    SumOfSinusoids,
    FilteredWhiteNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    /// Cycles per step.
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_switch_probability() -> f64 {
    0.5
}

fn default_feedforward() -> Vec<f64> {
    vec![1.0]
}

/// Description of an exploration input signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    #[serde(default)]
    pub kind: SignalKind,
    /// Per-channel scale.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub channels: usize,
    #[serde(default)]
    pub seed: u64,
    /// GBN only.
    #[serde(default = "default_switch_probability")]
    pub switch_probability: f64,
    /// Sum of sinusoids only. Channel 0 uses the listed phases; other
    /// channels add a seeded phase offset per component.
    #[serde(default)]
    pub sinusoids: Vec<Sinusoid>,
    /// Filtered white noise only: numerator taps `b_0, b_1, …`.
    #[serde(default = "default_feedforward")]
    pub feedforward: Vec<f64>,
    /// Filtered white noise only: denominator taps `a_1, a_2, …`.
    #[serde(default)]
    pub feedback: Vec<f64>,
}

impl SignalSpec {
    pub fn new(kind: SignalKind, amplitude: f64, channels: usize, seed: u64) -> Self {
        Self {
            kind,
            amplitude,
            channels,
            seed,
            switch_probability: default_switch_probability(),
            sinusoids: Vec::new(),
            feedforward: default_feedforward(),
            feedback: Vec::new(),
        }
    }

    pub fn prbs(amplitude: f64, channels: usize, seed: u64) -> Self {
        Self::new(SignalKind::Prbs, amplitude, channels, seed)
    }

    pub fn gbn(amplitude: f64, channels: usize, seed: u64, switch_probability: f64) -> Self {
        Self {
            switch_probability,
            ..Self::new(SignalKind::Gbn, amplitude, channels, seed)
        }
    }

    pub fn sum_of_sinusoids(
        amplitude: f64,
        channels: usize,
        seed: u64,
        sinusoids: Vec<Sinusoid>,
    ) -> Self {
        Self {
            sinusoids,
            ..Self::new(SignalKind::SumOfSinusoids, amplitude, channels, seed)
        }
    }

    pub fn filtered_white_noise(
        amplitude: f64,
        channels: usize,
        seed: u64,
        feedforward: Vec<f64>,
        feedback: Vec<f64>,
    ) -> Self {
        Self {
            feedforward,
            feedback,
            ..Self::new(SignalKind::FilteredWhiteNoise, amplitude, channels, seed)
        }
    }

    /// `count` evenly spaced frequencies in `(0, 1/2)` with seeded phases.
    pub fn default_sinusoids(count: usize, seed: u64) -> Vec<Sinusoid> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5349_4e55_534f_4944);
        (1..=count)
            .map(|k| Sinusoid {
                frequency: k as f64 / (2 * count + 1) as f64,
                amplitude: 1.0,
                phase: rng.gen_range(0.0..2.0 * PI),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.channels == 0 {
            return Err(Error::InvalidArgument(
                "signal needs at least one channel".into(),
            ));
        }
        match self.kind {
            SignalKind::Prbs => {}
            SignalKind::Gbn => {
                let p = self.switch_probability;
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "GBN switch probability must lie in (0, 1), got {p}"
                    )));
                }
            }
            SignalKind::SumOfSinusoids => {
                if self.sinusoids.is_empty() {
                    return Err(Error::InvalidArgument(
                        "sum of sinusoids needs at least one component".into(),
                    ));
                }
                let finite = self.sinusoids.iter().all(|s| {
                    s.frequency.is_finite() && s.amplitude.is_finite() && s.phase.is_finite()
                });
                if !finite {
                    return Err(Error::InvalidArgument(
                        "sinusoid parameters must be finite".into(),
                    ));
                }
            }
            SignalKind::FilteredWhiteNoise => {
                if self.feedforward.is_empty()
                    || !self
                        .feedforward
                        .iter()
                        .chain(&self.feedback)
                        .all(|c| c.is_finite())
                {
                    return Err(Error::InvalidArgument(
                        "filter needs finite coefficients and at least one feedforward tap".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Checks the richness heuristic for a lifted dimension `order`: a sum of
    /// sinusoids must carry at least `⌈order/2⌉` distinct frequencies.
    pub fn validate_for_order(&self, order: usize) -> Result<()> {
        self.validate()?;
        if self.kind == SignalKind::SumOfSinusoids {
            let mut freqs: Vec<f64> = self.sinusoids.iter().map(|s| s.frequency).collect();
            freqs.sort_by(|a, b| a.total_cmp(b));
            freqs.dedup();
            let needed = order.div_ceil(2);
            if freqs.len() < needed {
                return Err(Error::InvalidArgument(format!(
                    "sum of sinusoids has {} distinct frequencies, at least {needed} required",
                    freqs.len()
                )));
            }
        }
        Ok(())
    }
}

/// Maximal-length 31-bit LFSR (`x³¹ + x²⁸ + 1`).
#[derive(Debug, Clone)]
struct Lfsr31(u32);

impl Lfsr31 {
    fn next_bit(&mut self) -> bool {
        let bit = ((self.0 >> 30) ^ (self.0 >> 27)) & 1;
        self.0 = ((self.0 << 1) | bit) & 0x7fff_ffff;
        bit == 1
    }
}

#[derive(Debug, Clone)]
enum ChannelState {
    Prbs(Lfsr31),
    Gbn {
        rng: ChaCha8Rng,
        sign: f64,
        started: bool,
    },
    Sinusoids {
        phase_offsets: Vec<f64>,
    },
    Noise {
        rng: ChaCha8Rng,
        inputs: Vec<f64>,
        outputs: Vec<f64>,
    },
}

fn channel_rng(seed: u64, channel: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel as u64 + 1);
    rng
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller with a fixed two-draw budget per sample.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

impl Default for SignalSpec {
    /// Unit-amplitude PRBS; a zero channel count is filled in from the plant.
    fn default() -> Self {
        Self::prbs(1.0, 0, 0)
    }
}

/// Sequential generator for a [`SignalSpec`].
#[derive(Debug, Clone)]
pub struct SignalSource {
    spec: SignalSpec,
    channels: Vec<ChannelState>,
    t: u64,
}

impl SignalSource {
    pub fn new(spec: &SignalSpec) -> Result<Self> {
        spec.validate()?;
        let channels = (0..spec.channels)
            .map(|c| {
                let mut rng = channel_rng(spec.seed, c);
                match spec.kind {
                    SignalKind::Prbs => {
                        let mut state = rng.gen::<u32>() & 0x7fff_ffff;
                        if state == 0 {
                            state = 1;
                        }
                        ChannelState::Prbs(Lfsr31(state))
                    }
                    SignalKind::Gbn => ChannelState::Gbn {
                        rng,
                        sign: 1.0,
                        started: false,
                    },
                    SignalKind::SumOfSinusoids => ChannelState::Sinusoids {
                        phase_offsets: spec
                            .sinusoids
                            .iter()
                            .map(|_| {
                                if c == 0 {
                                    0.0
                                } else {
                                    rng.gen_range(0.0..2.0 * PI)
                                }
                            })
                            .collect(),
                    },
                    SignalKind::FilteredWhiteNoise => ChannelState::Noise {
                        rng,
                        inputs: vec![0.0; spec.feedforward.len()],
                        outputs: vec![0.0; spec.feedback.len()],
                    },
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            channels,
            t: 0,
        })
    }

    /// Index of the next sample to be produced.
    pub fn position(&self) -> u64 {
        self.t
    }

    pub fn next_input(&mut self) -> DVector<f64> {
        let t = self.t;
        self.t += 1;
        let spec = &self.spec;
        let values = self.channels.iter_mut().map(|state| match state {
            ChannelState::Prbs(lfsr) => {
                if lfsr.next_bit() {
                    1.0
                } else {
                    -1.0
                }
            }
            ChannelState::Gbn { rng, sign, started } => {
                if !*started {
                    *started = true;
                    *sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                } else if rng.gen::<f64>() < spec.switch_probability {
                    *sign = -*sign;
                }
                *sign
            }
            ChannelState::Sinusoids { phase_offsets } => spec
                .sinusoids
                .iter()
                .zip(phase_offsets.iter())
                .map(|(s, off)| {
                    s.amplitude * (2.0 * PI * s.frequency * t as f64 + s.phase + off).sin()
                })
                .sum(),
            ChannelState::Noise {
                rng,
                inputs,
                outputs,
            } => {
                inputs.rotate_right(1);
                inputs[0] = standard_normal(rng);
                let forward: f64 = spec
                    .feedforward
                    .iter()
                    .zip(inputs.iter())
                    .map(|(b, e)| b * e)
                    .sum();
                let back: f64 = spec
                    .feedback
                    .iter()
                    .zip(outputs.iter())
                    .map(|(a, y)| a * y)
                    .sum();
                let y = forward - back;
                if !outputs.is_empty() {
                    outputs.rotate_right(1);
                    outputs[0] = y;
                }
                y
            }
        });
        DVector::from_iterator(spec.channels, values.collect::<Vec<_>>()) * spec.amplitude
    }

    /// Discards `count` samples.
    pub fn skip(&mut self, count: u64) {
        for _ in 0..count {
            self.next_input();
        }
    }

    pub fn take_inputs(&mut self, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|_| self.next_input()).collect()
    }
}

/// The `t`-th exploration input of `spec`.
pub fn generate(spec: &SignalSpec, t: u64) -> Result<DVector<f64>> {
    let mut src = SignalSource::new(spec)?;
    src.skip(t);
    Ok(src.next_input())
}

fn check_samples(samples: &[DVector<f64>]) -> Result<usize> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("sample list is empty".into()))?;
    let d = first.len();
    if let Some(bad) = samples.iter().find(|v| v.len() != d) {
        return Err(Error::dims("samples", d, bad.len()));
    }
    Ok(d)
}

fn columns(samples: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_columns(samples)
}

/// Gram matrix `Σ v vᵀ` over a list of equal-length vectors.
pub fn gram(samples: &[DVector<f64>]) -> DMatrix<f64> {
    let c = columns(samples);
    &c * c.transpose()
}

/// Persistency of excitation over the first `k` samples.
///
/// Returns the verdict (equilibrated Gram matrix has smallest eigenvalue above
/// [`PE_TOLERANCE`]) together with the smallest eigenvalue of `Σ v vᵀ` itself.
pub fn is_pe(samples: &[DVector<f64>], k: usize) -> Result<(bool, f64)> {
    check_samples(samples)?;
    if k == 0 || samples.len() < k {
        return Err(Error::InvalidArgument(format!(
            "need at least k = {k} samples, have {}",
            samples.len()
        )));
    }
    let x = gram(&samples[..k]);
    let raw_min = linalg::sym_eig_extremes(&x).0;
    Ok((
        linalg::normalized_min_eigenvalue(&x) > PE_TOLERANCE,
        raw_min,
    ))
}

/// Stacked regressors `[v(t); …; v(t+p−1)]` for `t = 0..k`.
pub fn stacked_regressors(
    inputs: &[DVector<f64>],
    p: usize,
    k: usize,
) -> Result<Vec<DVector<f64>>> {
    let d = check_samples(inputs)?;
    if p == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "order p and window k must be positive".into(),
        ));
    }
    if inputs.len() < k + p - 1 {
        return Err(Error::InvalidArgument(format!(
            "sufficient richness of order {p} over {k} steps needs {} samples, have {}",
            k + p - 1,
            inputs.len()
        )));
    }
    Ok((0..k)
        .map(|t| {
            let mut v = DVector::zeros(d * p);
            for (i, sample) in inputs[t..t + p].iter().enumerate() {
                v.rows_mut(i * d, d).copy_from(sample);
            }
            v
        })
        .collect())
}

/// Sufficient richness of order `p` in `k` steps.
pub fn is_sufficiently_rich(inputs: &[DVector<f64>], p: usize, k: usize) -> Result<bool> {
    let regressors = stacked_regressors(inputs, p, k)?;
    Ok(is_pe(&regressors, k)?.0)
}

/// Largest `p` for which `inputs` is sufficiently rich using every available window.
pub fn richness_order(inputs: &[DVector<f64>]) -> Result<usize> {
    check_samples(inputs)?;
    let mut best = 0;
    for p in 1..=inputs.len() {
        let k = inputs.len() + 1 - p;
        if is_sufficiently_rich(inputs, p, k)? {
            best = p;
        }
    }
    Ok(best)
}

/// Numerical rank of the matrix whose columns are `samples`.
pub fn count_independent(samples: &[DVector<f64>]) -> Result<usize> {
    check_samples(samples)?;
    Ok(linalg::numerical_rank(&columns(samples), RANK_TOLERANCE))
}

/// Number of directions excited well enough to survive the PE test.
///
/// Rows (coordinates) of the sample matrix are scaled to unit norm and the
/// singular values above `√PE_TOLERANCE` are counted. With `d` samples of
/// dimension `d` this equals `d` exactly when [`is_pe`] accepts them, since
/// `σ_min²` of the row-normalized matrix is `λ_min` of the equilibrated Gram
/// matrix.
pub fn count_well_excited(samples: &[DVector<f64>]) -> Result<usize> {
    let threshold = PE_TOLERANCE.sqrt();
    Ok(row_normalized_singular_values(samples)?
        .iter()
        .filter(|&&sv| sv > threshold)
        .count())
}

/// Smallest singular value of the row-normalized sample matrix: how well
/// the least excited direction among the samples is covered.
pub fn weakest_direction(samples: &[DVector<f64>]) -> Result<f64> {
    Ok(row_normalized_singular_values(samples)?.min())
}

fn row_normalized_singular_values(samples: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_samples(samples)?;
    let mut s = columns(samples);
    for mut row in s.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(s.singular_values())
}
