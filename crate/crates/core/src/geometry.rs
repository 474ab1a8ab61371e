//! Node positions, elevation angles, the LoS S-curve and UPA lobe gains.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// A point in metres; `h` is height above ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePosition {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl NodePosition {
    #[must_use]
    pub const fn new(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, h }
    }

    fn minus(self, o: Self) -> [f64; 3] {
        [self.x - o.x, self.y - o.y, self.h - o.h]
    }
}

/// Euclidean distance in metres.
#[must_use]
pub fn distance(p: NodePosition, q: NodePosition) -> f64 {
    let [dx, dy, dh] = p.minus(q);
    (dx * dx + dy * dy + dh * dh).sqrt()
}

/// Elevation angle in radians from a ground node up to the UAV,
/// `asin(h / d)` where `h` is the height difference.
///
/// # Errors
/// [`Error::Geometry`] when the UAV is not above the ground node.
pub fn elevation_angle_rad(uav: NodePosition, ground: NodePosition) -> Result<f64> {
    let dh = uav.h - ground.h;
    let d = distance(uav, ground);
    if !(dh > 0.0) || d < dh {
        return Err(Error::Geometry(format!(
            "UAV at height {} is not above ground node at height {}",
            uav.h, ground.h
        )));
    }
    Ok((dh / d).min(1.0).asin())
}

/// Elevation angle in degrees; 90 when directly overhead.
///
/// # Errors
/// Same as [`elevation_angle_rad`].
pub fn elevation_angle_deg(uav: NodePosition, ground: NodePosition) -> Result<f64> {
    elevation_angle_rad(uav, ground).map(f64::to_degrees)
}

/// Environment-dependent S-curve parameters of the LoS probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SCurveParams {
    pub sigma: f64,
    pub f: f64,
}

impl Default for SCurveParams {
    fn default() -> Self {
        Self {
            sigma: 4.88,
            f: 0.429,
        }
    }
}

/// LoS probability `1 / (1 + σ exp(-f (θ - σ)))` with θ in degrees.
#[must_use]
pub fn los_probability(theta_deg: f64, s: SCurveParams) -> f64 {
    1.0 / (1.0 + s.sigma * (-s.f * (theta_deg - s.sigma)).exp())
}

/// Everything the channel layer needs about one UAV-to-ground link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    pub elevation_rad: f64,
    pub p_los: f64,
}

/// Distance, elevation and LoS probability of the UAV-to-`ground` link.
///
/// # Errors
/// Propagates [`elevation_angle_rad`] errors.
pub fn link_geometry(uav: NodePosition, ground: NodePosition, s: SCurveParams) -> Result<LinkGeometry> {
    let elevation_rad = elevation_angle_rad(uav, ground)?;
    Ok(LinkGeometry {
        distance: distance(uav, ground),
        elevation_rad,
        p_los: los_probability(elevation_rad.to_degrees(), s),
    })
}

/// Uniform planar array description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaSpec {
    pub n_elements: u32,
    /// Half-power azimuth beamwidth, radians.
    pub theta_h: f64,
    /// Half-power elevation (or depression) beamwidth, radians.
    pub theta_ed: f64,
}

impl AntennaSpec {
    /// Default half-power beamwidth `√3 / √N` radians in both planes.
    #[must_use]
    pub fn default_beamwidth(n_elements: u32) -> f64 {
        3f64.sqrt() / f64::from(n_elements).sqrt()
    }

    #[must_use]
    pub fn with_default_beamwidths(n_elements: u32) -> Self {
        let bw = Self::default_beamwidth(n_elements);
        Self {
            n_elements,
            theta_h: bw,
            theta_ed: bw,
        }
    }
}

/// Main and side lobe gains with their probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobeGainTable {
    pub g_main: f64,
    pub g_side: f64,
    pub p_main: f64,
    pub p_side: f64,
}

impl LobeGainTable {
    #[must_use]
    pub fn gain(&self, lobe: Lobe) -> f64 {
        match lobe {
            Lobe::Main => self.g_main,
            Lobe::Side => self.g_side,
        }
    }

    #[must_use]
    pub fn probability(&self, lobe: Lobe) -> f64 {
        match lobe {
            Lobe::Main => self.p_main,
            Lobe::Side => self.p_side,
        }
    }
}

/// Which lobe of an array a link falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lobe {
    Main,
    Side,
}

impl Lobe {
    pub const BOTH: [Lobe; 2] = [Lobe::Main, Lobe::Side];
}

/// UPA lobe gains.
///
/// The side-lobe gain is the ratio
/// `(√N - (√3/2π) N sin(3π/2√N)) / (√N - (√3/2π) sin(3π/2√N))`.
/// For larger arrays (N = 18 among them) the numerator turns negative; the
/// gain then falls back to `1 / sin²(3π/2√N)`, the usual UPA side-lobe
/// level, capped at the main-lobe gain.
///
/// # Errors
/// [`Error::DegenerateArray`] if the ratio's denominator is not positive
/// or the array is empty.
pub fn lobe_gains(a: &AntennaSpec) -> Result<LobeGainTable> {
    if a.n_elements == 0 {
        return Err(Error::DegenerateArray { n: 0 });
    }
    let n = f64::from(a.n_elements);
    let root = n.sqrt();
    let c = 3f64.sqrt() / (2.0 * PI);
    let s = (3.0 * PI / (2.0 * root)).sin();
    let den = root - c * s;
    if den <= 0.0 {
        return Err(Error::DegenerateArray { n: a.n_elements });
    }
    let ratio = (root - c * n * s) / den;
    let g_side = if ratio > 0.0 { ratio } else { 1.0 / (s * s) }.min(n);
    let p_main = ((a.theta_h / (2.0 * PI)) * (a.theta_ed / PI)).clamp(0.0, 1.0);
    Ok(LobeGainTable {
        g_main: n,
        g_side,
        p_main,
        p_side: 1.0 - p_main,
    })
}

fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0).acos()
}

/// Angle at Alice between her boresight (towards Bob) and the ray to Willie.
#[must_use]
pub fn boresight_separation(alice: NodePosition, bob: NodePosition, willie: NodePosition) -> f64 {
    angle_between(bob.minus(alice), willie.minus(alice))
}

/// Lobe of Alice's array (steered at Bob) that Willie sits in.
#[must_use]
pub fn alice_lobe_toward_willie(
    alice: NodePosition,
    bob: NodePosition,
    willie: NodePosition,
    alice_ant: &AntennaSpec,
) -> Lobe {
    if boresight_separation(alice, bob, willie) <= alice_ant.theta_ed {
        Lobe::Main
    } else {
        Lobe::Side
    }
}

/// Alice-to-Willie antenna gain `G_a · G_w` for a given Willie receive lobe.
///
/// # Errors
/// Propagates [`lobe_gains`] errors.
pub fn alice_willie_gain(
    alice: NodePosition,
    bob: NodePosition,
    willie: NodePosition,
    alice_ant: &AntennaSpec,
    willie_ant: &AntennaSpec,
    willie_lobe: Lobe,
) -> Result<f64> {
    let ga = lobe_gains(alice_ant)?.gain(alice_lobe_toward_willie(alice, bob, willie, alice_ant));
    let gw = lobe_gains(willie_ant)?.gain(willie_lobe);
    Ok(ga * gw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BOB: NodePosition = NodePosition::new(-500.0, 0.0, 0.0);
    const WILLIE: NodePosition = NodePosition::new(1000.0, 0.0, 0.0);

    #[test]
    fn distances() {
        assert_eq!(distance(NodePosition::new(0.0, 0.0, 500.0), NodePosition::new(0.0, 0.0, 0.0)), 500.0);
        let d = distance(NodePosition::new(1360.0, 0.0, 500.0), WILLIE);
        assert!((d - (360f64.powi(2) + 500f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((d - 616.12).abs() < 0.01);
    }

    #[test]
    fn elevation_angles() {
        let g = NodePosition::new(0.0, 0.0, 0.0);
        assert!((elevation_angle_deg(NodePosition::new(0.0, 0.0, 500.0), g).unwrap() - 90.0).abs() < 1e-12);
        assert!((elevation_angle_deg(NodePosition::new(500.0, 0.0, 500.0), g).unwrap() - 45.0).abs() < 1e-12);
        let t = elevation_angle_deg(NodePosition::new(1360.0, 0.0, 500.0), WILLIE).unwrap();
        assert!((t - 54.25).abs() < 0.01, "{t}");
        assert!(elevation_angle_deg(g, NodePosition::new(0.0, 0.0, 10.0)).is_err());
    }

    #[test]
    fn s_curve() {
        let s = SCurveParams::default();
        assert!((los_probability(s.sigma, s) - 1.0 / (1.0 + s.sigma)).abs() < 1e-15);
        assert!((los_probability(90.0, s) - 1.0).abs() < 1e-10);
        let direct = 1.0 / (1.0 + 4.88 * (0.429f64 * (4.88 - 10.0)).exp());
        assert!((los_probability(10.0, s) - direct).abs() < 1e-15);
    }

    #[test]
    fn lobe_table_for_table_ii_arrays() {
        let g6 = lobe_gains(&AntennaSpec::with_default_beamwidths(6)).unwrap();
        assert_eq!(g6.g_main, 6.0);
        assert!((g6.g_side - 0.4097).abs() < 1e-4);

        let g18 = lobe_gains(&AntennaSpec::with_default_beamwidths(18)).unwrap();
        assert_eq!(g18.g_main, 18.0);
        // Recompute the printed ratio independently: its numerator is negative.
        let n = 18f64;
        let s = (3.0 * PI / (2.0 * n.sqrt())).sin();
        let num = n.sqrt() - 3f64.sqrt() / (2.0 * PI) * n * s;
        assert!(num < 0.0);
        assert!((g18.g_side - 1.0 / (s * s)).abs() < 1e-12);
        assert!((g18.g_side - 1.2456).abs() < 1e-4);
        assert!((g18.p_main - 0.00844).abs() < 1e-5);
    }

    #[test]
    fn full_coverage_lobe_probability() {
        let a = AntennaSpec { n_elements: 4, theta_h: 2.0 * PI, theta_ed: PI };
        let t = lobe_gains(&a).unwrap();
        assert_eq!(t.p_main, 1.0);
        assert_eq!(t.p_side, 0.0);
    }

    #[test]
    fn empty_array_is_degenerate() {
        let a = AntennaSpec { n_elements: 0, theta_h: 1.0, theta_ed: 1.0 };
        assert!(lobe_gains(&a).is_err());
    }

    #[test]
    fn willie_lobe_membership() {
        let alice_ant = AntennaSpec::with_default_beamwidths(6);
        let willie_ant = AntennaSpec::with_default_beamwidths(18);
        let a6 = lobe_gains(&alice_ant).unwrap();
        let a18 = lobe_gains(&willie_ant).unwrap();

        // Willie on the ray from Alice through Bob.
        let alice = NodePosition::new(0.0, 0.0, 500.0);
        let bob = NodePosition::new(-500.0, 0.0, 0.0);
        let on_ray = NodePosition::new(-1000.0, 0.0, -500.0);
        let g = alice_willie_gain(alice, bob, on_ray, &alice_ant, &willie_ant, Lobe::Main).unwrap();
        assert_eq!(g, a6.g_main * a18.g_main);

        // Willie behind Alice, opposite Bob.
        let behind = NodePosition::new(500.0, 0.0, 1000.0);
        let g = alice_willie_gain(alice, bob, behind, &alice_ant, &willie_ant, Lobe::Side).unwrap();
        assert_eq!(g, a6.g_side * a18.g_side);

        // Coplanar, Bob and Willie on opposite sides: separation is π - θ_w - θ_b.
        let between = NodePosition::new(200.0, 0.0, 500.0);
        let sep = boresight_separation(between, BOB, WILLIE);
        let tw = elevation_angle_rad(between, WILLIE).unwrap();
        let tb = elevation_angle_rad(between, BOB).unwrap();
        assert!((sep - (PI - tw - tb)).abs() < 1e-12);

        // Same side: separation is θ_w - θ_b.
        let alice = NodePosition::new(1360.0, 0.0, 500.0);
        let sep = boresight_separation(alice, BOB, WILLIE);
        let tw = elevation_angle_rad(alice, WILLIE).unwrap();
        let tb = elevation_angle_rad(alice, BOB).unwrap();
        assert!((sep - (tw - tb)).abs() < 1e-12);
        let just_above = AntennaSpec { theta_ed: sep + 1e-6, ..alice_ant };
        assert_eq!(alice_lobe_toward_willie(alice, BOB, WILLIE, &just_above), Lobe::Main);
        // With the default √3/√6 beamwidth Willie is just inside at x = 1360 ...
        assert_eq!(alice_lobe_toward_willie(alice, BOB, WILLIE, &alice_ant), Lobe::Main);
        // ... and outside at x = 1000.
        let alice = NodePosition::new(1000.0, 0.0, 500.0);
        assert_eq!(alice_lobe_toward_willie(alice, BOB, WILLIE, &alice_ant), Lobe::Side);
    }

    fn rotate(p: NodePosition, phi: f64) -> NodePosition {
        NodePosition::new(p.x * phi.cos() - p.y * phi.sin(), p.x * phi.sin() + p.y * phi.cos(), p.h)
    }

    fn pos() -> impl Strategy<Value = NodePosition> {
        (-3000.0f64..3000.0, -3000.0f64..3000.0, 0.0f64..1000.0).prop_map(|(x, y, h)| NodePosition::new(x, y, h))
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in pos(), b in pos(), c in pos()) {
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            prop_assert!((distance(a, b) - distance(b, a)).abs() < 1e-12);
        }

        #[test]
        fn los_probability_increasing(t in 0.01f64..89.0, dt in 0.001f64..1.0) {
            let s = SCurveParams::default();
            let p = los_probability(t, s);
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert!(los_probability(t + dt, s) >= p);
            // Strictly increasing until the curve saturates in double precision.
            if t < 60.0 {
                prop_assert!(los_probability(t + dt, s) > p);
            }
        }

        #[test]
        fn gain_rotation_invariant(a in pos(), b in pos(), w in pos(), phi in 0.0f64..std::f64::consts::TAU) {
            prop_assume!(distance(a, b) > 1.0 && distance(a, w) > 1.0);
            let ant = AntennaSpec::with_default_beamwidths(6);
            let sep = boresight_separation(a, b, w);
            let sep_r = boresight_separation(rotate(a, phi), rotate(b, phi), rotate(w, phi));
            prop_assert!((sep - sep_r).abs() < 1e-9);
            prop_assume!((sep - ant.theta_ed).abs() > 1e-8);
            let wa = AntennaSpec::with_default_beamwidths(18);
            let g = alice_willie_gain(a, b, w, &ant, &wa, Lobe::Main).unwrap();
            let gr = alice_willie_gain(rotate(a, phi), rotate(b, phi), rotate(w, phi), &ant, &wa, Lobe::Main).unwrap();
            prop_assert_eq!(g, gr);
        }

        #[test]
        fn lobe_table_consistent(n in 1u32..256) {
            let t = lobe_gains(&AntennaSpec::with_default_beamwidths(n)).unwrap();
            prop_assert_eq!(t.p_main + t.p_side, 1.0);
            prop_assert!(t.g_main >= t.g_side && t.g_side > 0.0);
        }
    }
}
