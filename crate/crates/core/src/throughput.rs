//! Receiver-side metrics: SNR threshold, outage, effective covert rate
//! (ECR) and covert Shannon capacity (CSC).

use crate::channel::{
    gamma_power_pdf, nakagami_xi, path_loss, rician_factor, rician_power_pdf, ChannelState, NoiseModel,
};
use crate::error::{Error, Result};
use crate::geometry::{lobe_gains, link_geometry, Lobe, NodePosition};
use crate::scenario::{Mode, Scenario};
use crate::specfun::quadrature::{integrate_with_breaks, Tolerance};
use crate::specfun::{
    binomial, dilog_li2, exp_integral_ei, marcum_mu_nu_extended, marcum_q1_exact, reg_upper_inc_gamma, EULER_GAMMA,
};
use std::f64::consts::LN_2;

/// Outage, ECR and CSC at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub p_out: f64,
    /// bit/s
    pub ecr: f64,
    /// bit/s
    pub csc: f64,
    pub mode: Mode,
}

/// `γ_th = 2^{R_b / W} - 1`.
#[must_use]
pub fn snr_threshold(r_b: f64, w: f64) -> f64 {
    (r_b / w * LN_2).exp_m1()
}

/// `R_b (1 - P_out)`.
#[must_use]
pub fn ecr(r_b: f64, p_out: f64) -> f64 {
    r_b * (1.0 - p_out)
}

/// `Ei(-e^{log_t})`, falling back to `γ + log_t` when `e^{log_t}`
/// underflows (the leading terms of the small-argument series).
fn ei_neg_exp(log_t: f64) -> Result<f64> {
    if log_t < -700.0 {
        return Ok(EULER_GAMMA + log_t);
    }
    exp_integral_ei(-log_t.exp())
}

/// Received power at Bob per unit fading for one (lobe, state) component.
struct Component {
    weight: f64,
    per_unit: f64,
    fading: Fading,
}

#[derive(Clone, Copy)]
enum Fading {
    Rician(f64),
    Gamma(u32),
}

fn bob_components(sc: &Scenario, uav: NodePosition, p_a: f64, mode: Mode) -> Result<Vec<Component>> {
    let link = link_geometry(uav, sc.bob, sc.scurve)?;
    let mut out = Vec::with_capacity(4);
    match mode {
        Mode::Om => {
            for state in ChannelState::BOTH {
                out.push(Component {
                    weight: state.weight(link.p_los),
                    per_unit: p_a * path_loss(link.distance, sc.om.path_loss(state)),
                    fading: Fading::Rician(rician_factor(link.elevation_rad, &sc.rician, state)),
                });
            }
        }
        Mode::Dm => {
            // Alice steers her main lobe at Bob; Bob's receive lobe is random.
            let ga = lobe_gains(&sc.antennas.alice)?.g_main;
            let bob = lobe_gains(&sc.antennas.bob)?;
            for lobe in Lobe::BOTH {
                for state in ChannelState::BOTH {
                    out.push(Component {
                        weight: bob.probability(lobe) * state.weight(link.p_los),
                        per_unit: p_a * ga * bob.gain(lobe) * path_loss(link.distance, sc.dm.path_loss(state)),
                        fading: Fading::Gamma(sc.nakagami.shape(state)),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn check_noise(n: &NoiseModel) -> Result<()> {
    if n.rho > 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateNoise { rho: n.rho })
    }
}

fn clamp_probability(v: f64) -> f64 {
    if !(-1e-12..=1.0 + 1e-12).contains(&v) {
        log::debug!("outage closed form gave {v}, clamped to [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

/// Outage probability in omnidirectional mode, averaged over Bob's noise
/// uncertainty: per state, `1 - F_Ei(ρσ̂²) + F_Ei(σ̂²/ρ)` with
/// `F_Ei(x) = Ei(-e^μ (2(k+1) γ x / (P L))^{ν/2}) / (ν ln ρ)`.
///
/// # Errors
/// Geometry, degenerate-noise and μ/ν domain errors.
pub fn outage_om(sc: &Scenario, uav: NodePosition, p_a: f64, gamma_th: f64) -> Result<f64> {
    check_noise(&sc.noise)?;
    if gamma_th <= 0.0 {
        return Ok(0.0);
    }
    if p_a <= 0.0 {
        return Ok(1.0);
    }
    let n = sc.noise;
    let mut total = 0.0;
    for c in bob_components(sc, uav, p_a, Mode::Om)? {
        let Fading::Rician(k) = c.fading else { unreachable!() };
        let co = marcum_mu_nu_extended((2.0 * k).sqrt())?;
        let f_ei = |x: f64| -> Result<f64> {
            let log_t = co.mu + 0.5 * co.nu * (2.0 * (k + 1.0) * gamma_th * x / c.per_unit).ln();
            Ok(ei_neg_exp(log_t)? / (co.nu * n.rho.ln()))
        };
        let (lo, hi) = n.support();
        total += c.weight * (1.0 - f_ei(hi)? + f_ei(lo)?);
    }
    Ok(clamp_probability(total))
}

/// Outage probability in directional mode: per (Bob lobe, state),
/// `1 + Σ_r C(S,r)(-1)^r [Ei(-rξγρσ̂²/P) - Ei(-rξγσ̂²/(ρP))] / (2 ln ρ)`
/// with `P` the received power per unit fading.
///
/// # Errors
/// Geometry, degenerate-noise and antenna errors.
pub fn outage_dm(sc: &Scenario, uav: NodePosition, p_a: f64, gamma_th: f64) -> Result<f64> {
    check_noise(&sc.noise)?;
    if gamma_th <= 0.0 {
        return Ok(0.0);
    }
    if p_a <= 0.0 {
        return Ok(1.0);
    }
    let n = sc.noise;
    let (lo, hi) = n.support();
    let mut total = 0.0;
    for c in bob_components(sc, uav, p_a, Mode::Dm)? {
        let Fading::Gamma(s) = c.fading else { unreachable!() };
        let xi = nakagami_xi(s);
        let mut v = 1.0;
        for r in 1..=s {
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            let base = (f64::from(r) * xi * gamma_th / c.per_unit).ln();
            let diff = ei_neg_exp(base + hi.ln())? - ei_neg_exp(base + lo.ln())?;
            v += sign * binomial(s, r) * diff / (2.0 * n.rho.ln());
        }
        total += c.weight * v;
    }
    Ok(clamp_probability(total))
}

/// Dispatches on `mode`.
///
/// # Errors
/// See the per-mode functions.
pub fn outage(sc: &Scenario, uav: NodePosition, p_a: f64, gamma_th: f64, mode: Mode) -> Result<f64> {
    match mode {
        Mode::Om => outage_om(sc, uav, p_a, gamma_th),
        Mode::Dm => outage_dm(sc, uav, p_a, gamma_th),
    }
}

const TAIL: f64 = 1e-10;

/// Smallest `y` (on a geometric ladder) beyond which the fading power has
/// less than 1e-10 probability mass.
fn tail_cutoff(f: Fading) -> f64 {
    let mut y = 2.0;
    loop {
        let tail = match f {
            Fading::Rician(k) => marcum_q1_exact((2.0 * k).sqrt(), (2.0 * (k + 1.0) * y).sqrt()),
            Fading::Gamma(s) => reg_upper_inc_gamma(f64::from(s), f64::from(s) * y),
        };
        if tail < TAIL {
            return y;
        }
        y *= 1.5;
    }
}

fn csc(sc: &Scenario, uav: NodePosition, p_a: f64, mode: Mode) -> Result<f64> {
    check_noise(&sc.noise)?;
    if p_a <= 0.0 {
        return Ok(0.0);
    }
    let n = sc.noise;
    let w = sc.band(mode).bandwidth;
    let mut total = 0.0;
    for c in bob_components(sc, uav, p_a, mode)? {
        let snr_unit = c.per_unit / n.sigma_n2;
        let bracket = |y: f64| {
            let a = dilog_li2(-snr_unit * y / n.rho).unwrap_or(f64::NAN);
            let b = dilog_li2(-snr_unit * y * n.rho).unwrap_or(f64::NAN);
            a - b
        };
        let fading = c.fading;
        let pdf = move |y: f64| match fading {
            Fading::Rician(k) => rician_power_pdf(y, k),
            Fading::Gamma(s) => gamma_power_pdf(y, s),
        };
        let y_max = tail_cutoff(fading);
        let est = integrate_with_breaks(
            |y| bracket(y) * pdf(y),
            &[0.0, 1.0, y_max],
            Tolerance {
                abs: 1e-12,
                rel: 1e-10,
                max_intervals: 4000,
            },
        );
        if !est.converged || !est.value.is_finite() {
            return Err(Error::Quadrature {
                a: 0.0,
                b: y_max,
                value: est.value,
                abs_error: est.abs_error,
                intervals: est.intervals,
            });
        }
        total += c.weight * est.value;
    }
    Ok((w / (2.0 * LN_2 * n.rho.ln()) * total).max(0.0))
}

/// Covert Shannon capacity, omnidirectional mode (bit/s).
///
/// # Errors
/// Geometry, degenerate-noise or [`Error::Quadrature`].
pub fn csc_om(sc: &Scenario, uav: NodePosition, p_a: f64) -> Result<f64> {
    csc(sc, uav, p_a, Mode::Om)
}

/// Covert Shannon capacity, directional mode (bit/s).
///
/// # Errors
/// Geometry, degenerate-noise, antenna or [`Error::Quadrature`].
pub fn csc_dm(sc: &Scenario, uav: NodePosition, p_a: f64) -> Result<f64> {
    csc(sc, uav, p_a, Mode::Dm)
}

/// Dispatches on `mode`.
///
/// # Errors
/// See [`csc_om`] and [`csc_dm`].
pub fn covert_capacity(sc: &Scenario, uav: NodePosition, p_a: f64, mode: Mode) -> Result<f64> {
    csc(sc, uav, p_a, mode)
}

/// Outage, ECR and CSC for one operating point.
///
/// # Errors
/// Propagates the underlying errors.
pub fn link_metrics(sc: &Scenario, uav: NodePosition, p_a: f64, r_b: f64, mode: Mode) -> Result<LinkMetrics> {
    let gamma_th = snr_threshold(r_b, sc.band(mode).bandwidth);
    let p_out = outage(sc, uav, p_a, gamma_th, mode)?;
    Ok(LinkMetrics {
        p_out,
        ecr: ecr(r_b, p_out),
        csc: covert_capacity(sc, uav, p_a, mode)?,
        mode,
    })
}

/// Outage by quadrature of the exact fading CDFs over the noise law; a
/// deterministic reference with no Marcum-Q or Alzer approximation.
///
/// # Errors
/// Geometry, degenerate-noise and antenna errors.
pub fn outage_reference(sc: &Scenario, uav: NodePosition, p_a: f64, gamma_th: f64, mode: Mode) -> Result<f64> {
    check_noise(&sc.noise)?;
    if gamma_th <= 0.0 {
        return Ok(0.0);
    }
    if p_a <= 0.0 {
        return Ok(1.0);
    }
    let n = sc.noise;
    let mut total = 0.0;
    for c in bob_components(sc, uav, p_a, mode)? {
        let cdf = |u: f64| {
            let x = gamma_th * n.sigma_n2 * n.rho.powf(u) / c.per_unit;
            match c.fading {
                Fading::Rician(k) => 1.0 - marcum_q1_exact((2.0 * k).sqrt(), (2.0 * (k + 1.0) * x).sqrt()),
                Fading::Gamma(s) => crate::channel::gamma_power_cdf(x, s),
            }
        };
        let est = integrate_with_breaks(cdf, &[-1.0, 0.0, 1.0], Tolerance::default());
        total += c.weight * 0.5 * est.value;
    }
    Ok(total.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::db_to_linear;
    use proptest::prelude::*;

    fn at(x: f64) -> (Scenario, NodePosition) {
        let sc = Scenario::default().with_alice_x(x);
        let uav = sc.alice;
        (sc, uav)
    }

    #[test]
    fn threshold_values() {
        assert_eq!(snr_threshold(0.0, 40e6), 0.0);
        assert!((snr_threshold(40e6, 40e6) - 1.0).abs() < 1e-15);
        assert!((snr_threshold(1e6, 40e6) - (2f64.powf(0.025) - 1.0)).abs() < 1e-16);
    }

    #[test]
    fn ecr_values() {
        assert_eq!(ecr(1e6, 1.0), 0.0);
        assert_eq!(ecr(1e6, 0.0), 1e6);
        assert_eq!(ecr(1e6, 0.25), 0.75e6);
    }

    #[test]
    fn zero_threshold_never_outages() {
        let (sc, uav) = at(1000.0);
        for mode in Mode::BOTH {
            assert_eq!(outage(&sc, uav, db_to_linear(15.0), 0.0, mode).unwrap(), 0.0);
        }
    }

    #[test]
    fn outage_close_to_reference() {
        let (sc, uav) = at(1000.0);
        let p = db_to_linear(15.0);
        let om = outage_om(&sc, uav, p, snr_threshold(1e6, 40e6)).unwrap();
        let om_ref = outage_reference(&sc, uav, p, snr_threshold(1e6, 40e6), Mode::Om).unwrap();
        assert!((om - om_ref).abs() < 0.02, "{om} {om_ref}");
        let dm = outage_dm(&sc, uav, p, snr_threshold(1e6, 100e6)).unwrap();
        let dm_ref = outage_reference(&sc, uav, p, snr_threshold(1e6, 100e6), Mode::Dm).unwrap();
        assert!((dm - dm_ref).abs() < 0.05, "{dm} {dm_ref}");
    }

    #[test]
    fn outage_with_shape_one_is_exact() {
        // With S = 1 the Alzer CDF is the exact exponential law, so the
        // closed form must match the reference to quadrature accuracy.
        let (mut sc, uav) = at(1000.0);
        sc.nakagami.s_los = 1;
        sc.nakagami.s_nlos = 1;
        for dbm in [-10.0, 5.0, 20.0] {
            let g = snr_threshold(2e6, 100e6);
            let a = outage_dm(&sc, uav, db_to_linear(dbm), g).unwrap();
            let r = outage_reference(&sc, uav, db_to_linear(dbm), g, Mode::Dm).unwrap();
            assert!((a - r).abs() < 1e-8, "{dbm}: {a} {r}");
        }
    }

    #[test]
    fn capacity_zero_at_zero_power() {
        let (sc, uav) = at(1000.0);
        assert_eq!(csc_om(&sc, uav, 0.0).unwrap(), 0.0);
        assert_eq!(csc_dm(&sc, uav, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn capacity_matches_direct_double_integral() {
        // E[W log2(1 + P y / σ²)] with σ² log-uniform, by nested quadrature.
        let (sc, uav) = at(1000.0);
        let p = db_to_linear(15.0);
        for mode in Mode::BOTH {
            let comps = bob_components(&sc, uav, p, mode).unwrap();
            let n = sc.noise;
            let mut total = 0.0;
            for c in comps {
                let pdf = |y: f64| match c.fading {
                    Fading::Rician(k) => rician_power_pdf(y, k),
                    Fading::Gamma(s) => gamma_power_pdf(y, s),
                };
                let inner = |y: f64| {
                    integrate_with_breaks(
                        |u: f64| (c.per_unit * y / (n.sigma_n2 * n.rho.powf(u))).ln_1p() / LN_2,
                        &[-1.0, 1.0],
                        Tolerance::default(),
                    )
                    .value
                        * 0.5
                };
                let est = integrate_with_breaks(|y| inner(y) * pdf(y), &[0.0, 1.0, 40.0], Tolerance::default());
                total += c.weight * est.value;
            }
            let direct = total * sc.band(mode).bandwidth;
            let closed = covert_capacity(&sc, uav, p, mode).unwrap();
            assert!(((closed - direct) / direct).abs() < 1e-7, "{mode}: {closed} {direct}");
        }
    }

    #[test]
    fn capacity_scales_with_bandwidth() {
        let (mut sc, uav) = at(1000.0);
        let p = db_to_linear(15.0);
        let base = csc_dm(&sc, uav, p).unwrap();
        sc.dm.bandwidth *= 2.5;
        let scaled = csc_dm(&sc, uav, p).unwrap();
        assert!((scaled / base - 2.5).abs() < 1e-12);
    }

    #[test]
    fn metrics_bundle() {
        let (sc, uav) = at(1360.0);
        let m = link_metrics(&sc, uav, db_to_linear(15.0), 1e6, Mode::Om).unwrap();
        assert!((m.ecr - 1e6 * (1.0 - m.p_out)).abs() < 1e-6);
        assert!(m.csc > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn outage_monotone(x in -200.0f64..2200.0, p in 0.0f64..30.0, dp in 0.1f64..5.0, rb in 1e5f64..5e6, drb in 1e4f64..1e6) {
            let (sc, uav) = at(x);
            for mode in Mode::BOTH {
                let w = sc.band(mode).bandwidth;
                let base = outage(&sc, uav, db_to_linear(p), snr_threshold(rb, w), mode).unwrap();
                let more_power = outage(&sc, uav, db_to_linear(p + dp), snr_threshold(rb, w), mode).unwrap();
                let more_rate = outage(&sc, uav, db_to_linear(p), snr_threshold(rb + drb, w), mode).unwrap();
                prop_assert!((0.0..=1.0).contains(&base));
                prop_assert!(more_power <= base + 1e-9);
                prop_assert!(more_rate >= base - 1e-9);
            }
        }

        #[test]
        fn capacity_increasing_in_power(x in -200.0f64..2200.0, p in 0.0f64..30.0, dp in 0.5f64..5.0) {
            let (sc, uav) = at(x);
            for mode in Mode::BOTH {
                let a = covert_capacity(&sc, uav, db_to_linear(p), mode).unwrap();
                let b = covert_capacity(&sc, uav, db_to_linear(p + dp), mode).unwrap();
                prop_assert!(b > a);
            }
        }
    }
}
