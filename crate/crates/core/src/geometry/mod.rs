//! Closed curves sampled on a uniform periodic grid, their derivatives,
//! curvature, and Frenet frames.

mod resample;
mod spectral;

pub use resample::{resample_uniform_arclength, resample_uniform_arclength_with, Interpolant};
pub use spectral::{differentiate_periodic, DiffScheme};
pub(crate) use spectral::remove_nyquist;

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Smallest admissible node speed |u′|.
pub const SPEED_EPS: f64 = 1e-12;

/// The frame is refused where |u″×u′| < FRAME_EPS·|u′|³.
pub const FRAME_EPS: f64 = 1e-10;

/// Smallest admissible node count.
pub const MIN_NODES: usize = 16;

/// N uniform samples uᵢ = u(2πi/n) of a closed curve.
///
/// Construction enforces the grid invariants (power-of-two size, finite
/// coordinates). Regularity is checked by the operations that divide by
/// the speed.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurve {
    nodes: Vec<Vec3>,
}

impl DiscreteCurve {
    pub fn new(nodes: Vec<Vec3>) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES || !n.is_power_of_two() {
            return Err(Error::InvalidCurve(format!(
                "node count must be a power of two >= {MIN_NODES}, got {n}"
            )));
        }
        if let Some(i) = nodes.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite coordinate at node {i}")));
        }
        Ok(Self { nodes })
    }

    /// Samples `f` at the grid parameters xᵢ = 2πi/n.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        Self::new((0..n).map(|i| f(grid_parameter(i, n))).collect())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Vec3> {
        self.nodes
    }

    /// Parameter value of node `i`.
    #[inline]
    pub fn parameter(&self, i: usize) -> f64 {
        grid_parameter(i, self.n())
    }

    /// Applies `f` to every node, revalidating the result.
    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.nodes.iter().map(|&p| f(p)).collect())
    }

    pub fn translated(&self, offset: Vec3) -> Result<Self> {
        self.map(|p| p + offset)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map(|p| p * factor)
    }

    pub fn centroid(&self) -> Vec3 {
        self.nodes.iter().copied().sum::<Vec3>() / self.n() as f64
    }

    /// Largest node displacement between two curves of equal size.
    pub fn max_node_distance(&self, other: &DiscreteCurve) -> f64 {
        assert_eq!(self.n(), other.n(), "node counts differ");
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max)
    }

    /// Length of the closed polygon through the nodes.
    pub fn polyline_length(&self) -> f64 {
        let n = self.n();
        (0..n).map(|i| (self.nodes[(i + 1) % n] - self.nodes[i]).norm()).sum()
    }

    /// Shortest chord between consecutive nodes.
    /// The trigonometric interpolant sampled on `m` uniform points, `m` a
    /// power of two no smaller than `n`.
    pub fn refine(&self, m: usize) -> Result<Self> {
        if m < self.n() || !m.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "refined size {m} must be a power of two ≥ {}",
                self.n()
            )));
        }
        Self::new(spectral::refine_nodes(&self.nodes, m))
    }

    pub fn min_spacing(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| (self.nodes[(i + 1) % n] - self.nodes[i]).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[inline]
pub(crate) fn grid_parameter(i: usize, n: usize) -> f64 {
    TAU * i as f64 / n as f64
}

/// Periodic trapezoid rule over one period for samples on the uniform grid.
///
/// Uses compensated summation so that differences of nearby integrals stay
/// accurate.
pub fn periodic_integral(samples: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut count = 0usize;
    for v in samples {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    (sum + comp) * TAU / count as f64
}

/// Order-th derivative (1 or 2) with respect to the grid parameter, by
/// spectral differentiation.
pub fn derivative(curve: &DiscreteCurve, order: u32) -> Result<Vec<Vec3>> {
    derivative_with(curve, order, DiffScheme::Spectral)
}

pub fn derivative_with(curve: &DiscreteCurve, order: u32, scheme: DiffScheme) -> Result<Vec<Vec3>> {
    spectral::check_order(order)?;
    let (d1, d2) = spectral::curve_derivatives(curve.nodes(), scheme);
    Ok(if order == 1 { d1 } else { d2 })
}

/// Positions with first and second parameter derivatives at every node.
#[derive(Clone, Debug)]
pub struct CurveJet {
    pub position: Vec<Vec3>,
    pub first: Vec<Vec3>,
    pub second: Vec<Vec3>,
}

impl CurveJet {
    pub fn new(curve: &DiscreteCurve) -> Self {
        Self::with_scheme(curve, DiffScheme::Spectral)
    }

    pub fn with_scheme(curve: &DiscreteCurve, scheme: DiffScheme) -> Self {
        let (first, second) = spectral::curve_derivatives(curve.nodes(), scheme);
        Self {
            position: curve.nodes().to_vec(),
            first,
            second,
        }
    }

    /// Jet with filtered spectral derivatives, as used by the flow.
    pub(crate) fn filtered(curve: &DiscreteCurve, scheme: DiffScheme) -> Self {
        let (first, second) = spectral::curve_derivatives_filtered(curve.nodes(), scheme);
        Self {
            position: curve.nodes().to_vec(),
            first,
            second,
        }
    }

    pub fn n(&self) -> usize {
        self.position.len()
    }

    /// Per-node |u′|, failing on the first node slower than [`SPEED_EPS`].
    pub fn speeds(&self) -> Result<Vec<f64>> {
        self.first
            .iter()
            .enumerate()
            .map(|(node, d)| {
                let speed = d.norm();
                if speed.is_finite() && speed >= SPEED_EPS {
                    Ok(speed)
                } else {
                    Err(Error::DegenerateParametrization { node, speed })
                }
            })
            .collect()
    }

    pub fn min_speed(&self) -> f64 {
        self.first.iter().map(|d| d.norm()).fold(f64::INFINITY, f64::min)
    }

    /// H = |u″×u′| / |u′|³.
    pub fn curvature(&self) -> Result<Vec<f64>> {
        let speeds = self.speeds()?;
        Ok(self
            .first
            .iter()
            .zip(&self.second)
            .zip(&speeds)
            .map(|((d1, d2), s)| d2.cross(*d1).norm() / (s * s * s))
            .collect())
    }

    /// u′×(u″×u′)/|u′|⁴, the curvature vector Hν written without dividing
    /// by |u″×u′|. It vanishes where u″ ∥ u′.
    pub fn curvature_vector(&self) -> Result<Vec<Vec3>> {
        let speeds = self.speeds()?;
        Ok(self
            .first
            .iter()
            .zip(&self.second)
            .zip(&speeds)
            .map(|((d1, d2), s)| {
                let s2 = s * s;
                d1.cross(d2.cross(*d1)) / (s2 * s2)
            })
            .collect())
    }

    pub fn frenet_frame(&self) -> Result<FrenetData> {
        let n = self.n();
        let speeds = self.speeds()?;
        let mut frame = FrenetData {
            speed: speeds,
            curvature: Vec::with_capacity(n),
            tangent: Vec::with_capacity(n),
            normal: Vec::with_capacity(n),
            binormal: Vec::with_capacity(n),
        };
        for node in 0..n {
            let (d1, d2) = (self.first[node], self.second[node]);
            let s = frame.speed[node];
            let b = d2.cross(d1);
            let cross = b.norm();
            let threshold = FRAME_EPS * s * s * s;
            if !(cross >= threshold) || cross == 0.0 {
                return Err(Error::InflectionDegeneracy {
                    node,
                    cross,
                    threshold,
                });
            }
            frame.curvature.push(cross / (s * s * s));
            frame.tangent.push(d1 / s);
            frame.normal.push(d1.cross(b) / (s * cross));
            frame.binormal.push(b / cross);
        }
        Ok(frame)
    }
}

/// Per-node speed, curvature, and Frenet triple.
///
/// The binormal is (u″×u′)/|u″×u′|, so it flips with the orientation of the
/// parametrization; normal = tangent × binormal.
#[derive(Clone, Debug)]
pub struct FrenetData {
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
    pub tangent: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub binormal: Vec<Vec3>,
}

impl FrenetData {
    /// Largest deviation of the frame Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.tangent.len() {
            let (t, n, b) = (self.tangent[i], self.normal[i], self.binormal[i]);
            for d in [
                t.dot(t) - 1.0,
                n.dot(n) - 1.0,
                b.dot(b) - 1.0,
                t.dot(n),
                t.dot(b),
                n.dot(b),
            ] {
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

/// Per-node curvature H = |u″×u′|/|u′|³.
pub fn curvature(curve: &DiscreteCurve) -> Result<Vec<f64>> {
    CurveJet::new(curve).curvature()
}

pub fn curvature_with(curve: &DiscreteCurve, scheme: DiffScheme) -> Result<Vec<f64>> {
    CurveJet::with_scheme(curve, scheme).curvature()
}

pub fn max_curvature(curve: &DiscreteCurve) -> Result<f64> {
    Ok(curvature(curve)?.into_iter().fold(0.0, f64::max))
}

/// Frenet data at every node; refuses curves with an inflection-like node.
pub fn frenet_frame(curve: &DiscreteCurve) -> Result<FrenetData> {
    CurveJet::new(curve).frenet_frame()
}

pub fn frenet_frame_with(curve: &DiscreteCurve, scheme: DiffScheme) -> Result<FrenetData> {
    CurveJet::with_scheme(curve, scheme).frenet_frame()
}

/// ∫|u′|dx by the periodic trapezoid rule on spectral derivatives.
pub fn length(curve: &DiscreteCurve) -> f64 {
    let jet = CurveJet::new(curve);
    periodic_integral(jet.first.iter().map(|d| d.norm()))
}

/// Smallest |u′| over the nodes.
pub fn min_speed(curve: &DiscreteCurve) -> f64 {
    CurveJet::new(curve).min_speed()
}
