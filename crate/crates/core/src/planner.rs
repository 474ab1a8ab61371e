//! Covert power/rate planning and OM/DM mode selection.

use crate::detection::expected_min_dep;
use crate::error::Result;
use crate::geometry::{distance, lobe_gains, NodePosition};
use crate::channel::path_loss;
use crate::scenario::{Mode, Scenario};
use crate::throughput::{covert_capacity, ecr, outage, snr_threshold};
use rayon::prelude::*;
use std::fmt;

/// Slack on the covertness constraint for floating-point noise.
pub const CONSTRAINT_SLACK: f64 = 1e-9;
/// Relative width at which the covertness-boundary bisection stops.
pub const BISECTION_REL_TOL: f64 = 1e-6;

/// Which constraint pins the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Covertness,
    Power,
    None,
}

impl Binding {
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Binding::Covertness => "covertness",
            Binding::Power => "power",
            Binding::None => "none",
        }
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ecr,
    Csc,
}

impl Metric {
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ecr => "ECR",
            Metric::Csc => "CSC",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    /// mW
    pub p_a_opt: f64,
    /// bit/s; `None` for capacity problems.
    pub r_b_opt: Option<f64>,
    /// bit/s
    pub objective: f64,
    pub binding: Binding,
    pub feasible: bool,
}

impl OptimizationResult {
    fn infeasible(with_rate: bool) -> Self {
        Self {
            p_a_opt: 0.0,
            r_b_opt: with_rate.then_some(0.0),
            objective: 0.0,
            binding: Binding::None,
            feasible: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub indicator: Mode,
    pub objective_om: f64,
    pub objective_dm: f64,
    pub metric: Metric,
    pub om: OptimizationResult,
    pub dm: OptimizationResult,
}

impl ModeDecision {
    /// Objective of the selected mode.
    #[must_use]
    pub fn hybrid(&self) -> f64 {
        self.objective_om.max(self.objective_dm)
    }
}

fn is_covert(sc: &Scenario, uav: NodePosition, p: f64, mode: Mode) -> Result<bool> {
    Ok(expected_min_dep(sc, uav, p, mode)?.value >= 1.0 - sc.epsilon - CONSTRAINT_SLACK)
}

/// Largest covert power in `(0, P_max]`, or `None` when even powers 300 dB
/// below the budget are detectable.
///
/// # Errors
/// Geometry and antenna errors.
pub fn covertness_boundary(sc: &Scenario, uav: NodePosition, mode: Mode) -> Result<Option<f64>> {
    let hi_cap = sc.p_max;
    if is_covert(sc, uav, hi_cap, mode)? {
        return Ok(Some(hi_cap));
    }
    let mut hi = hi_cap;
    let mut lo = hi / 10.0;
    while !is_covert(sc, uav, lo, mode)? {
        hi = lo;
        lo /= 10.0;
        if lo < hi_cap * 1e-30 {
            return Ok(None);
        }
    }
    while hi / lo > 1.0 + BISECTION_REL_TOL {
        let mid = (lo * hi).sqrt();
        if is_covert(sc, uav, mid, mode)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Upper end of the rate grid: the capacity at `P_max` with unit fading and
/// line-of-sight path loss to Bob (main-lobe gains in DM).
///
/// # Errors
/// Antenna errors.
pub fn rate_ceiling(sc: &Scenario, uav: NodePosition, mode: Mode) -> Result<f64> {
    let band = sc.band(mode);
    let g = match mode {
        Mode::Om => 1.0,
        Mode::Dm => lobe_gains(&sc.antennas.alice)?.g_main * lobe_gains(&sc.antennas.bob)?.g_main,
    };
    let snr = sc.p_max * path_loss(distance(uav, sc.bob), &band.los) * g / sc.noise.sigma_n2;
    Ok(band.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

fn power_grid(sc: &Scenario) -> Vec<f64> {
    let n = sc.grid.power_points.max(1);
    let span = sc.grid.power_span_db / 10.0;
    (0..n)
        .map(|i| {
            let frac = (i + 1) as f64 / n as f64;
            if i + 1 == n {
                sc.p_max
            } else {
                sc.p_max * 10f64.powf(-span * (1.0 - frac))
            }
        })
        .collect()
}

/// Grid search of `R_b (1 - P_out)` over transmit power and target rate
/// subject to the covertness constraint. The power grid is log-spaced over
/// the configured span below `P_max` and also contains the covertness
/// boundary power; the rate grid is linear up to [`rate_ceiling`]. Ties go
/// to the lowest power, then the lowest rate.
///
/// # Errors
/// Geometry and antenna errors.
pub fn maximize_ecr(sc: &Scenario, uav: NodePosition, mode: Mode) -> Result<OptimizationResult> {
    let boundary = covertness_boundary(sc, uav, mode)?;
    let mut powers = power_grid(sc);
    if let Some(b) = boundary {
        if b < sc.p_max {
            powers.push(b);
        }
    }
    powers.sort_by(f64::total_cmp);
    powers.dedup();

    let r_max = rate_ceiling(sc, uav, mode)?;
    let m = sc.grid.rate_points.max(1);
    let rates: Vec<f64> = (1..=m).map(|j| r_max * j as f64 / m as f64).collect();
    let w = sc.band(mode).bandwidth;

    let per_power: Vec<Option<(f64, f64)>> = powers
        .par_iter()
        .map(|&p| -> Result<Option<(f64, f64)>> {
            if !is_covert(sc, uav, p, mode)? {
                return Ok(None);
            }
            let mut best: Option<(f64, f64)> = None;
            for &r in &rates {
                let v = ecr(r, outage(sc, uav, p, snr_threshold(r, w), mode)?);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((r, v));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64, f64)> = None;
    for (i, cand) in per_power.iter().enumerate() {
        if let Some((r, v)) = *cand {
            if best.is_none_or(|(_, _, bv)| v > bv) {
                best = Some((i, r, v));
            }
        }
    }
    let Some((i, r, v)) = best else {
        return Ok(OptimizationResult::infeasible(true));
    };
    let p = powers[i];
    let binding = if p == sc.p_max {
        Binding::Power
    } else if Some(p) == boundary {
        Binding::Covertness
    } else {
        Binding::None
    };
    Ok(OptimizationResult {
        p_a_opt: p,
        r_b_opt: Some(r),
        objective: v,
        binding,
        feasible: true,
    })
}

/// Maximises the covert capacity over transmit power. Capacity increases
/// with power and the DEP does not, so the optimum is the smaller of
/// `P_max` and the covertness boundary.
///
/// # Errors
/// Geometry, antenna and quadrature errors.
pub fn maximize_csc(sc: &Scenario, uav: NodePosition, mode: Mode) -> Result<OptimizationResult> {
    let Some(p) = covertness_boundary(sc, uav, mode)? else {
        return Ok(OptimizationResult::infeasible(false));
    };
    Ok(OptimizationResult {
        p_a_opt: p,
        r_b_opt: None,
        objective: covert_capacity(sc, uav, p, mode)?,
        binding: if p == sc.p_max { Binding::Power } else { Binding::Covertness },
        feasible: true,
    })
}

fn pick(objective_om: f64, objective_dm: f64) -> Mode {
    if objective_om >= objective_dm {
        Mode::Om
    } else {
        Mode::Dm
    }
}

/// Optimises both modes for `metric` and picks the better one; ties go to
/// OM.
///
/// # Errors
/// Propagates optimiser errors.
pub fn select_mode(sc: &Scenario, uav: NodePosition, metric: Metric) -> Result<ModeDecision> {
    let solve = |mode| match metric {
        Metric::Ecr => maximize_ecr(sc, uav, mode),
        Metric::Csc => maximize_csc(sc, uav, mode),
    };
    let om = solve(Mode::Om)?;
    let dm = solve(Mode::Dm)?;
    Ok(ModeDecision {
        indicator: pick(om.objective, dm.objective),
        objective_om: om.objective,
        objective_dm: dm.objective,
        metric,
        om,
        dm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::db_to_linear;

    fn at(x: f64) -> (Scenario, NodePosition) {
        let sc = Scenario::default().with_alice_x(x);
        let uav = sc.alice;
        (sc, uav)
    }

    fn small(mut sc: Scenario) -> Scenario {
        sc.grid.power_points = 40;
        sc.grid.rate_points = 40;
        sc
    }

    #[test]
    fn power_grid_shape() {
        let sc = Scenario::default();
        let g = power_grid(&sc);
        assert_eq!(g.len(), 200);
        assert_eq!(*g.last().unwrap(), sc.p_max);
        assert!(g[0] > sc.p_max * 1e-4 && g[0] < sc.p_max * 1.1e-4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn vacuous_constraint_uses_full_power() {
        let (mut sc, uav) = at(1000.0);
        sc.epsilon = 1.0;
        for mode in Mode::BOTH {
            let c = maximize_csc(&sc, uav, mode).unwrap();
            assert_eq!((c.p_a_opt, c.binding), (sc.p_max, Binding::Power));
            let e = maximize_ecr(&small(sc.clone()), uav, mode).unwrap();
            assert!(e.feasible);
            assert_eq!(e.p_a_opt, sc.p_max);
            assert_ne!(e.binding, Binding::Covertness);
        }
    }

    #[test]
    fn tight_constraint_forces_silence() {
        let (mut sc, uav) = at(1000.0);
        sc.epsilon = 1e-12;
        for mode in Mode::BOTH {
            let c = maximize_csc(&sc, uav, mode).unwrap();
            assert!(c.objective < 1e-3 * covert_capacity(&sc, uav, sc.p_max, mode).unwrap());
            let e = maximize_ecr(&small(sc.clone()), uav, mode).unwrap();
            assert!(e.objective < 1e3, "{mode}: {}", e.objective);
        }
    }

    #[test]
    fn boundary_is_on_the_constraint() {
        let (mut sc, uav) = at(1360.0);
        sc.p_max = db_to_linear(40.0);
        for mode in Mode::BOTH {
            let c = maximize_csc(&sc, uav, mode).unwrap();
            assert_eq!(c.binding, Binding::Covertness);
            let dep = expected_min_dep(&sc, uav, c.p_a_opt, mode).unwrap().value;
            assert!((dep - (1.0 - sc.epsilon)).abs() < 1e-4, "{mode}: {dep}");
        }
    }

    #[test]
    fn bisection_agrees_with_linear_scan() {
        let (mut sc, uav) = at(1360.0);
        sc.p_max = db_to_linear(40.0);
        let c = maximize_csc(&sc, uav, Mode::Om).unwrap();
        let n = 10_000;
        let step = sc.p_max / n as f64;
        let scan = (1..=n)
            .map(|i| i as f64 * step)
            .filter(|&p| is_covert(&sc, uav, p, Mode::Om).unwrap())
            .fold(0.0, f64::max);
        assert!((c.p_a_opt - scan).abs() <= step, "{} {scan}", c.p_a_opt);
    }

    #[test]
    fn ecr_objective_is_self_consistent() {
        let (sc, uav) = at(1000.0);
        let sc = small(sc);
        for mode in Mode::BOTH {
            let e = maximize_ecr(&sc, uav, mode).unwrap();
            let r = e.r_b_opt.unwrap();
            let again = ecr(r, outage(&sc, uav, e.p_a_opt, snr_threshold(r, sc.band(mode).bandwidth), mode).unwrap());
            assert_eq!(e.objective, again);
            assert!(is_covert(&sc, uav, e.p_a_opt, mode).unwrap());
            assert!(e.p_a_opt <= sc.p_max);
        }
    }

    #[test]
    fn dm_tolerates_more_power_at_1360() {
        let (sc, uav) = at(1360.0);
        let om = maximize_csc(&sc, uav, Mode::Om).unwrap();
        let dm = maximize_csc(&sc, uav, Mode::Dm).unwrap();
        assert!(dm.p_a_opt > om.p_a_opt, "{} {}", dm.p_a_opt, om.p_a_opt);
    }

    #[test]
    fn ties_go_to_omnidirectional() {
        assert_eq!(pick(0.0, 0.0), Mode::Om);
        assert_eq!(pick(5e6, 5e6), Mode::Om);
        assert_eq!(pick(5e6, 5e6 + 1.0), Mode::Dm);
        let (sc, uav) = at(1000.0);
        let d = select_mode(&small(sc), uav, Metric::Ecr).unwrap();
        assert_eq!(d.hybrid(), d.objective_om.max(d.objective_dm));
        assert_eq!(d.indicator == Mode::Om, d.objective_om >= d.objective_dm);
    }
}
