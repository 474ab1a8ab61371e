//! First-order Marcum-Q: exact quadrature and the exponential-type
//! approximation `Q₁(x, y) ≈ exp(-e^{μ(x)} y^{ν(x)})`.

use super::bessel_i0e;
use super::quadrature::{integrate_with_breaks, Tolerance};
use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Coefficients of the exponential Marcum-Q approximation at one `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarcumApproxCoeffs {
    pub mu: f64,
    pub nu: f64,
}

/// Exact `Q₁(a, b) = ∫_b^∞ x I₀(ax) exp(-(x² + a²)/2) dx`.
///
/// The integrand is evaluated as `x · i0e(ax) · exp(-(x - a)²/2)`, which
/// cannot overflow. Beyond `max(a, b) + 40` the Gaussian factor is below
/// 1e-340 so the range is truncated there.
#[must_use]
pub fn marcum_q1_exact(a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let upper = a.max(b) + 40.0;
    let integrand = |x: f64| {
        let d = x - a;
        x * bessel_i0e(a * x) * (-0.5 * d * d).exp()
    };
    let tol = Tolerance {
        abs: 1e-13,
        rel: 1e-13,
        max_intervals: 4000,
    };
    let est = if b < a {
        integrate_with_breaks(integrand, &[b, a, upper], tol)
    } else {
        integrate_with_breaks(integrand, &[b, upper], tol)
    };
    if !est.converged {
        log::warn!(
            "marcum_q1_exact({a}, {b}) stopped at error {:e}",
            est.abs_error
        );
    }
    est.value.clamp(0.0, 1.0)
}

const MU: [f64; 7] = [
    0.7409, -1.4318, -0.1624, 3.4103e-3, -3.7185e-5, 1.8362e-7, -3.0888e-10,
];
const NU: [f64; 7] = [
    0.9439, 0.9044, 1.9833e-2, -5.4159e-4, 6.3859e-6, -3.1961e-8, 5.1546e-11,
];

/// Lower end of the polynomial range.
pub const POLY_MIN: f64 = 10.0;
/// Upper end of the polynomial range.
pub const POLY_MAX: f64 = 8000.0;

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// μ and ν exactly as published: the `x = 0` branch or the sixth-degree
/// polynomials on `[10, 8000]`.
///
/// # Errors
/// [`Error::Domain`] anywhere else, including the gap `(0, 10)`.
pub fn marcum_mu_nu(x: f64) -> Result<MarcumApproxCoeffs> {
    if x == 0.0 {
        return Ok(MarcumApproxCoeffs {
            mu: -std::f64::consts::LN_2,
            nu: 2.0,
        });
    }
    if (POLY_MIN..=POLY_MAX).contains(&x) {
        let nu = horner(&NU, x);
        // The printed ν polynomial dips below zero on roughly [192, 326],
        // where the approximation would grow with b. Refuse those points.
        if nu <= 0.0 {
            return Err(Error::Domain {
                function: "marcum_mu_nu",
                arg: x,
                detail: "published nu polynomial is non-positive here",
            });
        }
        return Ok(MarcumApproxCoeffs {
            mu: horner(&MU, x),
            nu,
        });
    }
    Err(Error::Domain {
        function: "marcum_mu_nu",
        arg: x,
        detail: "polynomials are defined only at 0 and on [10, 8000]",
    })
}

const GAP_STEP: f64 = 0.1;
const GAP_NODES: usize = 100;
const FIT_POINTS: usize = 200;

/// Least-squares fit of (μ, ν) against exact Q₁(x, ·) on 200 points of
/// `(0, x + 10]`, by Levenberg-Marquardt started from `start`.
fn fit_node(x: f64, start: MarcumApproxCoeffs) -> MarcumApproxCoeffs {
    let hi = x + 10.0;
    let data: Vec<(f64, f64)> = (1..=FIT_POINTS)
        .map(|i| {
            let b = hi * i as f64 / FIT_POINTS as f64;
            (b.ln(), marcum_q1_exact(x, b))
        })
        .collect();
    let cost = |mu: f64, nu: f64| -> f64 {
        data.iter()
            .map(|&(lb, q)| {
                let r = (-(mu + nu * lb).exp()).exp() - q;
                r * r
            })
            .sum()
    };

    let (mut mu, mut nu) = (start.mu, start.nu);
    let mut current = cost(mu, nu);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(lb, q) in &data {
            let t = (mu + nu * lb).exp();
            let model = (-t).exp();
            let r = model - q;
            let j1 = -model * t;
            let j2 = j1 * lb;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let d11 = a11 * (1.0 + lambda);
            let d22 = a22 * (1.0 + lambda);
            let det = d11 * d22 - a12 * a12;
            if det <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let dmu = -(d22 * g1 - a12 * g2) / det;
            let dnu = -(d11 * g2 - a12 * g1) / det;
            let trial = cost(mu + dmu, nu + dnu);
            if trial < current {
                let small = dmu.abs() < 1e-12 * (1.0 + mu.abs()) && dnu.abs() < 1e-12 * (1.0 + nu.abs());
                mu += dmu;
                nu += dnu;
                current = trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    MarcumApproxCoeffs { mu, nu }
}

fn gap_table() -> &'static [MarcumApproxCoeffs] {
    static TABLE: OnceLock<Vec<MarcumApproxCoeffs>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut nodes = Vec::with_capacity(GAP_NODES + 1);
        let mut prev = marcum_mu_nu(0.0).expect("x = 0 is in range");
        nodes.push(prev);
        for i in 1..GAP_NODES {
            prev = fit_node(i as f64 * GAP_STEP, prev);
            nodes.push(prev);
        }
        nodes.push(marcum_mu_nu(POLY_MIN).expect("x = 10 is in range"));
        nodes
    })
}

/// μ and ν over `[0, 8000]`, filling the gap `(0, 10)` from a table of
/// least-squares fits to the exact Q₁ taken every 0.1 and interpolated
/// linearly. The last node is the published polynomial at 10, so the
/// result is continuous.
///
/// # Errors
/// [`Error::Domain`] for negative `x` or `x > 8000`.
pub fn marcum_mu_nu_extended(x: f64) -> Result<MarcumApproxCoeffs> {
    if x > 0.0 && x < POLY_MIN {
        log::debug!("marcum_mu_nu: x = {x} is in the gap, using fitted table");
        let table = gap_table();
        let pos = x / GAP_STEP;
        let i = (pos.floor() as usize).min(GAP_NODES - 1);
        let t = pos - i as f64;
        let (lo, hi) = (table[i], table[i + 1]);
        return Ok(MarcumApproxCoeffs {
            mu: lo.mu + t * (hi.mu - lo.mu),
            nu: lo.nu + t * (hi.nu - lo.nu),
        });
    }
    marcum_mu_nu(x)
}

/// `exp(-e^{μ(a)} b^{ν(a)})` clamped to `[0, 1]`, with μ, ν from
/// [`marcum_mu_nu_extended`].
///
/// # Errors
/// Propagates the domain error for `a` outside `[0, 8000]`.
pub fn marcum_q1_approx(a: f64, b: f64) -> Result<f64> {
    let c = marcum_mu_nu_extended(a)?;
    Ok(q1_from_coeffs(c, b))
}

/// Evaluates the approximation for precomputed coefficients.
#[must_use]
pub fn q1_from_coeffs(c: MarcumApproxCoeffs, b: f64) -> f64 {
    if b <= 0.0 {
        return 1.0;
    }
    (-(c.mu + c.nu * b.ln()).exp()).exp().clamp(0.0, 1.0)
}

/// Root-mean-square gap between the approximation and the exact Q₁ for
/// one `a`, on `n` evenly spaced `b` in `[0, a + 10]`.
///
/// # Errors
/// Propagates domain errors from the coefficients.
pub fn approx_rmse(a: f64, n: usize) -> Result<f64> {
    let c = marcum_mu_nu_extended(a)?;
    let hi = a + 10.0;
    let sum: f64 = (0..n)
        .map(|i| {
            let b = hi * i as f64 / (n - 1) as f64;
            let d = q1_from_coeffs(c, b) - marcum_q1_exact(a, b);
            d * d
        })
        .sum();
    Ok((sum / n as f64).sqrt())
}
