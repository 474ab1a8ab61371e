//! Warden-side analysis: the radiometer's optimal threshold, the minimum
//! detection error probability (DEP) given the received power, truncated
//! fading means and the expected minimum DEP for both modes.

use crate::channel::{
    gamma_power_pdf, nakagami_power_cdf, nakagami_xi, path_loss, rician_factor, rician_power_pdf, ChannelState,
    NoiseModel,
};
use crate::error::{Error, Result};
use crate::geometry::{alice_lobe_toward_willie, lobe_gains, link_geometry, Lobe, NodePosition};
use crate::scenario::{Mode, Scenario};
use crate::specfun::quadrature::{integrate_with_breaks, Tolerance};
use crate::specfun::{binomial, lower_inc_gamma, marcum_mu_nu_extended};

/// Optimal threshold interval and the resulting minimum DEP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepResult {
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub p_ew_min: f64,
}

fn check_noise(n: &NoiseModel) -> Result<()> {
    if n.rho > 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateNoise { rho: n.rho })
    }
}

/// Minimum DEP when Willie receives signal power `k_a` (mW) on top of
/// log-uniform noise.
///
/// When `ρσ̂² < k_a + σ̂²/ρ` the signal and noise supports separate and
/// any threshold in between gives a perfect detector. Otherwise the best
/// threshold is `k_a + σ̂²/ρ` and the DEP is
/// `1 - ln(1 + ρ k_a / σ̂²) / (2 ln ρ)`.
///
/// # Errors
/// [`Error::DegenerateNoise`] when `ρ ≤ 1`.
pub fn min_dep_given_received_power(k_a: f64, n: &NoiseModel) -> Result<DepResult> {
    check_noise(n)?;
    let (lo, hi) = n.support();
    let edge = k_a + lo;
    if hi < edge {
        return Ok(DepResult {
            tau_lo: hi,
            tau_hi: edge,
            p_ew_min: 0.0,
        });
    }
    Ok(DepResult {
        tau_lo: edge,
        tau_hi: edge,
        p_ew_min: 1.0 - (n.rho * k_a / n.sigma_n2).ln_1p() / (2.0 * n.rho.ln()),
    })
}

/// Minimum DEP only, skipping the threshold bookkeeping. `ρ > 1` is assumed.
#[must_use]
pub(crate) fn min_dep_value(k_a: f64, n: &NoiseModel) -> f64 {
    if n.sigma_n2 * n.rho < k_a + n.sigma_n2 / n.rho {
        0.0
    } else {
        1.0 - (n.rho * k_a / n.sigma_n2).ln_1p() / (2.0 * n.rho.ln())
    }
}

/// False-alarm probability `P(σ_w² > τ)` of the radiometer.
#[must_use]
pub fn false_alarm_probability(tau: f64, n: &NoiseModel) -> f64 {
    let (lo, hi) = n.support();
    if tau < lo {
        1.0
    } else if tau > hi {
        0.0
    } else {
        1.0 - (n.rho * tau / n.sigma_n2).ln() / (2.0 * n.rho.ln())
    }
}

/// Missed-detection probability `P(k_a + σ_w² ≤ τ)` of the radiometer.
#[must_use]
pub fn missed_detection_probability(tau: f64, k_a: f64, n: &NoiseModel) -> f64 {
    let (lo, hi) = n.support();
    if tau > k_a + hi {
        1.0
    } else if tau < k_a + lo {
        0.0
    } else {
        (n.rho * (tau - k_a) / n.sigma_n2).ln() / (2.0 * n.rho.ln())
    }
}

/// `∫₀ᵃ x f(x) dx` for the unit-mean Rician power with factor `k`, via the
/// exponential Marcum-Q approximation:
/// `γ(2/ν, z) / ((k+1) ν e^{2μ/ν}) - a e^{-z}`, `z = [2a(k+1)]^{ν/2} e^μ`.
///
/// # Errors
/// Propagates μ/ν domain errors.
pub fn truncated_mean_rician(a: f64, k: f64) -> Result<f64> {
    if a <= 0.0 {
        return Ok(0.0);
    }
    let c = marcum_mu_nu_extended((2.0 * k).sqrt())?;
    let z = (c.mu + 0.5 * c.nu * (2.0 * a * (k + 1.0)).ln()).exp();
    let head = lower_inc_gamma(2.0 / c.nu, z) / ((k + 1.0) * c.nu * (2.0 * c.mu / c.nu).exp());
    Ok((head - a * (-z).exp()).max(0.0))
}

/// `∫₀ᵃ x f(x) dx` for the normalized gamma power with integer shape `s`,
/// from the Alzer CDF:
/// `Σ_{r=1}^{S} C(S,r) (-1)^r [a e^{-rξa} - (1 - e^{-rξa}) / (rξ)]`.
#[must_use]
pub fn truncated_mean_nakagami(a: f64, s: u32) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let xi = nakagami_xi(s);
    let sum: f64 = (1..=s)
        .map(|r| {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let rx = f64::from(r) * xi;
            let e = (-rx * a).exp();
            let one_minus = -(-rx * a).exp_m1();
            sign * binomial(s, r) * (a * e - one_minus / rx)
        })
        .sum();
    sum.max(0.0)
}

/// One (lobe, state) component of an expected DEP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepTerm {
    /// Willie's receive lobe; `None` in omnidirectional mode.
    pub lobe: Option<Lobe>,
    pub state: ChannelState,
    /// Mixture weight (lobe probability times state probability).
    pub weight: f64,
    /// Conditional expected DEP of this component.
    pub value: f64,
}

/// Expected minimum DEP from Alice's point of view.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedDep {
    pub value: f64,
    pub mode: Mode,
    pub breakdown: Vec<DepTerm>,
}

fn clamp_probability(v: f64, what: &str) -> f64 {
    if !(-1e-12..=1.0 + 1e-12).contains(&v) {
        log::debug!("{what}: closed form gave {v}, clamped to [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

fn finish(mode: Mode, breakdown: Vec<DepTerm>) -> ExpectedDep {
    let raw: f64 = breakdown.iter().map(|t| t.weight * t.value).sum();
    ExpectedDep {
        value: clamp_probability(raw, "expected minimum DEP"),
        mode,
        breakdown,
    }
}

/// `mass · (1 - ln(1 + ρ P L m / σ̂²) / (2 ln ρ))`, where `mass` is the
/// probability of the undetectable region and `m = truncated / mass` is the
/// conditional mean fading power inside it.
fn conditional_term(mass: f64, truncated: f64, received_per_unit: f64, n: &NoiseModel) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    let m = truncated / mass;
    mass * (1.0 - (n.rho * received_per_unit * m / n.sigma_n2).ln_1p() / (2.0 * n.rho.ln()))
}

/// Upper edge of the fading power for which Willie cannot be perfect:
/// `ϱ = (ρ² - 1) σ̂² / (ρ P)` where `P` is received power per unit fading.
fn undetectable_edge(received_per_unit: f64, n: &NoiseModel) -> f64 {
    (n.rho * n.rho - 1.0) * n.sigma_n2 / (n.rho * received_per_unit)
}

fn trivial(mode: Mode, lobes: &[Option<Lobe>]) -> ExpectedDep {
    let mut b = Vec::new();
    for &lobe in lobes {
        for state in ChannelState::BOTH {
            b.push(DepTerm {
                lobe,
                state,
                weight: f64::NAN,
                value: 1.0,
            });
        }
    }
    ExpectedDep {
        value: 1.0,
        mode,
        breakdown: b,
    }
}

/// Expected minimum DEP, omnidirectional mode, Rician fading.
///
/// # Errors
/// Geometry, degenerate-noise and μ/ν domain errors.
pub fn expected_min_dep_om(sc: &Scenario, uav: NodePosition, p_a: f64) -> Result<ExpectedDep> {
    check_noise(&sc.noise)?;
    let link = link_geometry(uav, sc.willie, sc.scurve)?;
    if p_a <= 0.0 {
        let mut t = trivial(Mode::Om, &[None]);
        for term in &mut t.breakdown {
            term.weight = term.state.weight(link.p_los);
        }
        return Ok(t);
    }
    let mut breakdown = Vec::with_capacity(2);
    for state in ChannelState::BOTH {
        let l = path_loss(link.distance, sc.om.path_loss(state));
        let k = rician_factor(link.elevation_rad, &sc.rician, state);
        let per_unit = p_a * l;
        let edge = undetectable_edge(per_unit, &sc.noise);
        let c = marcum_mu_nu_extended((2.0 * k).sqrt())?;
        let z = (c.mu + 0.5 * c.nu * (2.0 * edge * (k + 1.0)).ln()).exp();
        let mass = -(-z).exp_m1();
        let truncated = truncated_mean_rician(edge, k)?;
        breakdown.push(DepTerm {
            lobe: None,
            state,
            weight: state.weight(link.p_los),
            value: conditional_term(mass, truncated, per_unit, &sc.noise),
        });
    }
    Ok(finish(Mode::Om, breakdown))
}

/// Expected minimum DEP, directional mode, Nakagami fading. Alice's lobe
/// toward Willie is fixed by geometry; Willie's receive lobe is random.
///
/// # Errors
/// Geometry, degenerate-noise and antenna errors.
pub fn expected_min_dep_dm(sc: &Scenario, uav: NodePosition, p_a: f64) -> Result<ExpectedDep> {
    check_noise(&sc.noise)?;
    let link = link_geometry(uav, sc.willie, sc.scurve)?;
    let alice = lobe_gains(&sc.antennas.alice)?;
    let willie = lobe_gains(&sc.antennas.willie)?;
    if p_a <= 0.0 {
        let mut t = trivial(Mode::Dm, &[Some(Lobe::Main), Some(Lobe::Side)]);
        for term in &mut t.breakdown {
            term.weight = willie.probability(term.lobe.expect("lobe")) * term.state.weight(link.p_los);
        }
        return Ok(t);
    }
    let ga = alice.gain(alice_lobe_toward_willie(uav, sc.bob, sc.willie, &sc.antennas.alice));
    let mut breakdown = Vec::with_capacity(4);
    for lobe in Lobe::BOTH {
        for state in ChannelState::BOTH {
            let l = path_loss(link.distance, sc.dm.path_loss(state));
            let per_unit = p_a * l * ga * willie.gain(lobe);
            let s = sc.nakagami.shape(state);
            let edge = undetectable_edge(per_unit, &sc.noise);
            let mass = nakagami_power_cdf(edge, s);
            let truncated = truncated_mean_nakagami(edge, s);
            breakdown.push(DepTerm {
                lobe: Some(lobe),
                state,
                weight: willie.probability(lobe) * state.weight(link.p_los),
                value: conditional_term(mass, truncated, per_unit, &sc.noise),
            });
        }
    }
    Ok(finish(Mode::Dm, breakdown))
}

/// Dispatches on `mode`.
///
/// # Errors
/// See the per-mode functions.
pub fn expected_min_dep(sc: &Scenario, uav: NodePosition, p_a: f64, mode: Mode) -> Result<ExpectedDep> {
    match mode {
        Mode::Om => expected_min_dep_om(sc, uav, p_a),
        Mode::Dm => expected_min_dep_dm(sc, uav, p_a),
    }
}

type Density = Box<dyn Fn(f64) -> f64>;

/// Expected minimum DEP by direct quadrature of the exact conditional DEP
/// against the exact fading densities. No Marcum-Q, Alzer or mean-value
/// approximation is involved; used as a deterministic reference.
///
/// # Errors
/// Geometry and degenerate-noise errors, or [`Error::Quadrature`].
pub fn expected_min_dep_reference(sc: &Scenario, uav: NodePosition, p_a: f64, mode: Mode) -> Result<f64> {
    check_noise(&sc.noise)?;
    if p_a <= 0.0 {
        return Ok(1.0);
    }
    let link = link_geometry(uav, sc.willie, sc.scurve)?;
    let mut components: Vec<(f64, f64, Density)> = Vec::new();
    match mode {
        Mode::Om => {
            for state in ChannelState::BOTH {
                let l = path_loss(link.distance, sc.om.path_loss(state));
                let k = rician_factor(link.elevation_rad, &sc.rician, state);
                components.push((state.weight(link.p_los), p_a * l, Box::new(move |x| rician_power_pdf(x, k))));
            }
        }
        Mode::Dm => {
            let alice = lobe_gains(&sc.antennas.alice)?;
            let willie = lobe_gains(&sc.antennas.willie)?;
            let ga = alice.gain(alice_lobe_toward_willie(uav, sc.bob, sc.willie, &sc.antennas.alice));
            for lobe in Lobe::BOTH {
                for state in ChannelState::BOTH {
                    let l = path_loss(link.distance, sc.dm.path_loss(state));
                    let s = sc.nakagami.shape(state);
                    components.push((
                        willie.probability(lobe) * state.weight(link.p_los),
                        p_a * l * ga * willie.gain(lobe),
                        Box::new(move |x| gamma_power_pdf(x, s)),
                    ));
                }
            }
        }
    }
    let mut total = 0.0;
    for (w, per_unit, pdf) in components {
        let edge = undetectable_edge(per_unit, &sc.noise);
        let noise = sc.noise;
        let f = |x: f64| min_dep_value(per_unit * x, &noise) * pdf(x);
        let breaks: Vec<f64> = if edge > 1.0 { vec![0.0, 1.0, edge] } else { vec![0.0, edge] };
        let est = integrate_with_breaks(f, &breaks, Tolerance { abs: 1e-11, rel: 1e-10, max_intervals: 4000 });
        if !est.converged {
            return Err(Error::Quadrature {
                a: 0.0,
                b: edge,
                value: est.value,
                abs_error: est.abs_error,
                intervals: est.intervals,
            });
        }
        total += w * est.value;
    }
    Ok(total.clamp(0.0, 1.0))
}
