//! Monte Carlo estimates of expected DEP, outage and ergodic capacity.
//!
//! Samples are drawn in fixed-size batches. Batch `i` uses a ChaCha8
//! generator seeded from the caller's seed with stream `i`, and the
//! per-batch statistics are merged in batch order, so the result depends
//! only on `(seed, n)` and never on how rayon schedules the batches.

use crate::channel::{
    path_loss, rician_factor, sample_nakagami_power, sample_noise_power, sample_rician_power, ChannelState,
    NoiseModel,
};
use crate::detection::min_dep_value;
use crate::error::{Error, Result};
use crate::geometry::{alice_lobe_toward_willie, link_geometry, lobe_gains, Lobe, NodePosition};
use crate::scenario::{Mode, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

/// Draws per RNG stream.
pub const BATCH: u64 = 1 << 14;

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Welford, b: Welford) -> Welford {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let (na, nb) = (a.n as f64, b.n as f64);
        Welford {
            n,
            mean: a.mean + d * nb / n as f64,
            m2: a.m2 + b.m2 + d * d * na * nb / n as f64,
        }
    }
}

/// Merges adjacent halves recursively so the reduction tree is fixed by
/// the number of batches alone.
fn merge_pairwise(parts: &[Welford]) -> Welford {
    match parts.len() {
        0 => Welford::default(),
        1 => parts[0],
        len => {
            let (l, r) = parts.split_at(len / 2);
            Welford::merge(merge_pairwise(l), merge_pairwise(r))
        }
    }
}

fn batch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run<F>(n: u64, seed: u64, batch: u64, draw: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let batches = n.div_ceil(batch);
    let parts: Vec<Welford> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let count = batch.min(n - b * batch);
            let mut w = Welford::default();
            for _ in 0..count {
                w.push(draw(&mut rng));
            }
            w
        })
        .collect();
    let w = merge_pairwise(&parts);
    let var = if w.n > 1 { w.m2 / (w.n - 1) as f64 } else { 0.0 };
    McEstimate {
        mean: w.mean,
        std_error: (var / w.n as f64).sqrt(),
        n_samples: w.n,
        seed,
    }
}

fn check_inputs(n: u64, noise: &NoiseModel) -> Result<()> {
    if n == 0 {
        return Err(Error::Validation {
            field: "samples".into(),
            reason: "need at least one Monte Carlo sample".into(),
        });
    }
    if noise.rho <= 1.0 {
        return Err(Error::DegenerateNoise { rho: noise.rho });
    }
    Ok(())
}

fn constant(value: f64, n: u64, seed: u64) -> McEstimate {
    McEstimate {
        mean: value,
        std_error: 0.0,
        n_samples: n,
        seed,
    }
}

#[derive(Clone, Copy)]
enum Law {
    Rician([f64; 2]),
    Gamma([u32; 2]),
}

/// Everything needed to draw a received power (per unit transmit power)
/// on one Alice-to-ground link.
#[derive(Clone, Copy)]
struct LinkSampler {
    p_los: f64,
    /// Path loss times fixed antenna gain, indexed by state.
    gain: [f64; 2],
    law: Law,
    /// Random receive-lobe gains `(p_main, g_main, g_side)`, directional only.
    rx_lobe: Option<(f64, f64, f64)>,
}

impl LinkSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = usize::from(rng.random::<f64>() >= self.p_los);
        let lobe = match self.rx_lobe {
            Some((p_main, g_main, g_side)) => {
                if rng.random::<f64>() < p_main {
                    g_main
                } else {
                    g_side
                }
            }
            None => 1.0,
        };
        let h = match self.law {
            Law::Rician(k) => sample_rician_power(k[s], rng),
            Law::Gamma(shape) => sample_nakagami_power(shape[s], rng),
        };
        self.gain[s] * lobe * h
    }
}

const STATES: [ChannelState; 2] = [ChannelState::Los, ChannelState::Nlos];

fn link_sampler(sc: &Scenario, uav: NodePosition, ground: NodePosition, mode: Mode, to_bob: bool) -> Result<LinkSampler> {
    let link = link_geometry(uav, ground, sc.scurve)?;
    let band = sc.band(mode);
    let pl = STATES.map(|st| path_loss(link.distance, band.path_loss(st)));
    Ok(match mode {
        Mode::Om => LinkSampler {
            p_los: link.p_los,
            gain: pl,
            law: Law::Rician(STATES.map(|st| rician_factor(link.elevation_rad, &sc.rician, st))),
            rx_lobe: None,
        },
        Mode::Dm => {
            let alice = lobe_gains(&sc.antennas.alice)?;
            let (rx_ant, tx_lobe) = if to_bob {
                (&sc.antennas.bob, Lobe::Main)
            } else {
                (
                    &sc.antennas.willie,
                    alice_lobe_toward_willie(uav, sc.bob, sc.willie, &sc.antennas.alice),
                )
            };
            let rx = lobe_gains(rx_ant)?;
            let ga = alice.gain(tx_lobe);
            LinkSampler {
                p_los: link.p_los,
                gain: pl.map(|l| l * ga),
                law: Law::Gamma(STATES.map(|st| sc.nakagami.shape(st))),
                rx_lobe: Some((rx.p_main, rx.g_main, rx.g_side)),
            }
        }
    })
}

/// Expected minimum DEP: per draw the channel state, Willie's lobe (DM) and
/// fading are sampled and the exact conditional minimum DEP is evaluated.
///
/// # Errors
/// Geometry, antenna and degenerate-noise errors, or `n == 0`.
pub fn mc_expected_min_dep(
    sc: &Scenario,
    uav: NodePosition,
    p_a: f64,
    mode: Mode,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(n, &sc.noise)?;
    if p_a <= 0.0 {
        return Ok(constant(1.0, n, seed));
    }
    let link = link_sampler(sc, uav, sc.willie, mode, false)?;
    let noise = sc.noise;
    Ok(run(n, seed, BATCH, |rng| min_dep_value(p_a * link.draw(rng), &noise)))
}

/// Outage probability: per draw the state, Bob's lobe (DM), fading and
/// Bob's noise power are sampled and `SNR < γ_th` is counted.
///
/// # Errors
/// Geometry, antenna and degenerate-noise errors, or `n == 0`.
pub fn mc_outage(
    sc: &Scenario,
    uav: NodePosition,
    p_a: f64,
    gamma_th: f64,
    mode: Mode,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(n, &sc.noise)?;
    if gamma_th <= 0.0 {
        return Ok(constant(0.0, n, seed));
    }
    let link = link_sampler(sc, uav, sc.bob, mode, true)?;
    let noise = sc.noise;
    Ok(run(n, seed, BATCH, |rng| {
        let rx = p_a * link.draw(rng);
        let sigma2 = sample_noise_power(&noise, rng);
        if rx / sigma2 < gamma_th {
            1.0
        } else {
            0.0
        }
    }))
}

/// Ergodic capacity `E[W log2(1 + SNR)]` in bit/s, sampled as in [`mc_outage`].
///
/// # Errors
/// Geometry, antenna and degenerate-noise errors, or `n == 0`.
pub fn mc_ergodic_capacity(
    sc: &Scenario,
    uav: NodePosition,
    p_a: f64,
    mode: Mode,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(n, &sc.noise)?;
    if p_a <= 0.0 {
        return Ok(constant(0.0, n, seed));
    }
    let link = link_sampler(sc, uav, sc.bob, mode, true)?;
    let noise = sc.noise;
    let w = sc.band(mode).bandwidth;
    Ok(run(n, seed, BATCH, |rng| {
        let rx = p_a * link.draw(rng);
        let sigma2 = sample_noise_power(&noise, rng);
        w * (rx / sigma2).ln_1p() / std::f64::consts::LN_2
    }))
}

/// Settings for the finite-sample radiometer check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiometerConfig {
    /// Channel uses averaged by Willie per decision.
    pub n_obs: u32,
    /// Decisions simulated under each hypothesis per channel draw.
    pub trials: usize,
}

impl Default for RadiometerConfig {
    fn default() -> Self {
        Self {
            n_obs: 10_000,
            trials: 10_000,
        }
    }
}

/// Smallest empirical `P_FA + P_MD` over all thresholds. `h0` and `h1`
/// must be sorted ascending.
fn empirical_min_dep(h0: &[f64], h1: &[f64]) -> f64 {
    let (n0, n1) = (h0.len() as f64, h1.len() as f64);
    // Threshold below everything: FA = 1, MD = 0.
    let mut best = 1.0f64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < h0.len() || j < h1.len() {
        // Move the threshold past the next smallest statistic (ties together).
        let next = match (h0.get(i), h1.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < h0.len() && h0[i] <= next {
            i += 1;
        }
        while j < h1.len() && h1[j] <= next {
            j += 1;
        }
        let fa = 1.0 - i as f64 / n0;
        let md = j as f64 / n1;
        best = best.min(fa + md);
    }
    best
}

/// Expected minimum DEP of a finite-sample radiometer. For each of `n`
/// channel draws, `trials` energy statistics are simulated under each
/// hypothesis (with an independent noise power per decision) and the
/// empirical error sum is minimised over thresholds.
///
/// The estimate carries the downward bias of an in-sample threshold
/// search, which shrinks as `trials` grows.
///
/// # Errors
/// Geometry, antenna and degenerate-noise errors, or `n == 0`.
pub fn mc_radiometer_dep(
    sc: &Scenario,
    uav: NodePosition,
    p_a: f64,
    mode: Mode,
    cfg: RadiometerConfig,
    n: u64,
    seed: u64,
) -> Result<McEstimate> {
    check_inputs(n, &sc.noise)?;
    if cfg.n_obs == 0 || cfg.trials == 0 {
        return Err(Error::Validation {
            field: "radiometer".into(),
            reason: "observation and trial counts must be positive".into(),
        });
    }
    let link = link_sampler(sc, uav, sc.willie, mode, false)?;
    let noise = sc.noise;
    let nf = f64::from(cfg.n_obs);
    let energy = Gamma::new(nf, 1.0 / nf).expect("positive shape and scale");
    // One channel draw per sample, so use small batches to spread the work.
    Ok(run(n, seed, 16, |rng| {
        let k_a = p_a * link.draw(rng);
        let mut h0: Vec<f64> = (0..cfg.trials)
            .map(|_| sample_noise_power(&noise, rng) * energy.sample(rng))
            .collect();
        let mut h1: Vec<f64> = (0..cfg.trials)
            .map(|_| (k_a + sample_noise_power(&noise, rng)) * energy.sample(rng))
            .collect();
        h0.sort_by(f64::total_cmp);
        h1.sort_by(f64::total_cmp);
        empirical_min_dep(&h0, &h1)
    }))
}
