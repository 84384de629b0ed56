//! Redistribution of nodes to equal arclength spacing along the curve.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;

use super::spectral::{self, wavenumber};
use super::{grid_parameter, CurveJet, DiscreteCurve};
use crate::error::Result;
use crate::vec3::Vec3;

/// Interpolant used to evaluate the curve between nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Interpolant {
    /// Trigonometric interpolation of the samples; consistent with the
    /// spectral derivatives used everywhere else.
    #[default]
    Trigonometric,
    /// Periodic cubic spline with uniform knots at the grid parameters.
    CubicSpline,
}

/// Resamples the curve so consecutive nodes are equally spaced in arclength,
/// keeping node 0 fixed.
pub fn resample_uniform_arclength(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    resample_uniform_arclength_with(curve, Interpolant::default())
}

pub fn resample_uniform_arclength_with(
    curve: &DiscreteCurve,
    interpolant: Interpolant,
) -> Result<DiscreteCurve> {
    match interpolant {
        Interpolant::Trigonometric => resample_trigonometric(curve),
        Interpolant::CubicSpline => resample_spline(curve),
    }
}

/// Half-spectrum of a real periodic signal: Σ wₖ cₖ e^{ikx} with real part taken.
struct HalfSpectrum {
    coeffs: Vec<Complex64>,
}

impl HalfSpectrum {
    fn new(values: impl Iterator<Item = f64>, n: usize) -> Self {
        let mut buf: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
        debug_assert_eq!(buf.len(), n);
        spectral::forward(&mut buf);
        let half = n / 2;
        let coeffs = buf[..=half]
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let w = if k == 0 || k == half { 1.0 } else { 2.0 };
                c * (w / n as f64)
            })
            .collect();
        Self { coeffs }
    }

    fn nyquist(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Value and first derivative at parameter `x`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let step = Complex64::new(x.cos(), x.sin());
        let mut phase = Complex64::new(1.0, 0.0);
        let (mut value, mut slope) = (0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            let term = c * phase;
            value += term.re;
            if k != self.nyquist() {
                // d/dx Re(c e^{ikx}) = -k Im(c e^{ikx})
                slope -= k as f64 * term.im;
            }
            phase *= step;
        }
        (value, slope)
    }

    /// (∫₀ˣ, value at x) of the interpolant in one pass.
    fn primitive_and_value(&self, x: f64) -> (f64, f64) {
        let step = Complex64::new(x.cos(), x.sin());
        let mut phase = step;
        let c0 = self.coeffs[0].re;
        let (mut acc, mut value) = (c0 * x, c0);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            let term = c * phase;
            value += term.re;
            if k == self.nyquist() {
                acc += c.re * (kf * x).sin() / kf;
            } else {
                acc += (term.im - c.im) / kf;
            }
            phase *= step;
        }
        (acc, value)
    }

    /// ∫₀ˣ of the interpolant.
    fn antiderivative(&self, x: f64) -> f64 {
        let step = Complex64::new(x.cos(), x.sin());
        let mut phase = step;
        let mut acc = self.coeffs[0].re * x;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let kf = k as f64;
            if k == self.nyquist() {
                acc += c.re * (kf * x).sin() / kf;
            } else {
                // Re(c (e^{ikx} - 1) / (ik))
                let z = c * (phase - 1.0);
                acc += z.im / kf;
            }
            phase *= step;
        }
        acc
    }
}

/// Solves s(x) = target for x inside the bracket [lo, hi] by safeguarded
/// Newton. `eval` returns (s(x), s′(x)); `s_lo` and `s_hi` are the bracket
/// values.
fn invert_monotone(
    target: f64,
    (mut lo, mut hi): (f64, f64),
    (s_lo, s_hi): (f64, f64),
    eval: impl Fn(f64) -> (f64, f64),
) -> f64 {
    let mut x = if s_hi > s_lo {
        lo + (target - s_lo) / (s_hi - s_lo) * (hi - lo)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..60 {
        let (v, d) = eval(x);
        let r = v - target;
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - r / d;
        if !(d > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let converged = (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0);
        x = next;
        if converged || hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    x
}

fn resample_trigonometric(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let n = curve.n();
    let jet = CurveJet::new(curve);
    let speeds = jet.speeds()?;
    let speed = HalfSpectrum::new(speeds.iter().copied(), n);
    let comps: Vec<HalfSpectrum> = (0..3)
        .map(|c| HalfSpectrum::new(curve.nodes().iter().map(|p| p[c]), n))
        .collect();

    let total = speed.coeffs[0].re * TAU;
    let node_arclength: Vec<f64> = (0..=n)
        .map(|i| speed.antiderivative(grid_parameter(i, n)))
        .collect();

    let mut nodes = Vec::with_capacity(n);
    nodes.push(curve.nodes()[0]);
    let mut seg = 0;
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        while seg + 1 < n && node_arclength[seg + 1] < target {
            seg += 1;
        }
        let x = invert_monotone(
            target,
            (grid_parameter(seg, n), grid_parameter(seg + 1, n)),
            (node_arclength[seg], node_arclength[seg + 1]),
            |x| speed.primitive_and_value(x),
        );
        nodes.push(Vec3::new(comps[0].eval(x).0, comps[1].eval(x).0, comps[2].eval(x).0));
    }
    DiscreteCurve::new(nodes)
}

/// Component-wise periodic cubic spline on uniform knots xᵢ = ih.
struct PeriodicSpline {
    values: Vec<Vec3>,
    moments: Vec<Vec3>,
    h: f64,
}

impl PeriodicSpline {
    fn new(nodes: &[Vec3]) -> Self {
        let n = nodes.len();
        let h = TAU / n as f64;
        // M_{i-1} + 4M_i + M_{i+1} = 6(y_{i+1} - 2y_i + y_{i-1})/h² is circulant,
        // so it diagonalizes under the DFT.
        let mut moments = vec![Vec3::ZERO; n];
        for c in 0..3 {
            let mut buf: Vec<Complex64> = nodes.iter().map(|p| Complex64::new(p[c], 0.0)).collect();
            spectral::forward(&mut buf);
            for (i, b) in buf.iter_mut().enumerate() {
                let cos = (wavenumber(i, n) * h).cos();
                *b *= 6.0 * (2.0 * cos - 2.0) / (h * h * (4.0 + 2.0 * cos));
            }
            spectral::inverse(&mut buf);
            for (m, b) in moments.iter_mut().zip(&buf) {
                match c {
                    0 => m.x = b.re / n as f64,
                    1 => m.y = b.re / n as f64,
                    _ => m.z = b.re / n as f64,
                }
            }
        }
        Self {
            values: nodes.to_vec(),
            moments,
            h,
        }
    }

    fn segment(&self, i: usize) -> (Vec3, Vec3, Vec3, Vec3) {
        let j = (i + 1) % self.values.len();
        (self.values[i], self.values[j], self.moments[i], self.moments[j])
    }

    fn eval(&self, i: usize, t: f64) -> Vec3 {
        let (y0, y1, m0, m1) = self.segment(i);
        let h = self.h;
        let u = h - t;
        m0 * (u * u * u / (6.0 * h))
            + m1 * (t * t * t / (6.0 * h))
            + (y0 / h - m0 * (h / 6.0)) * u
            + (y1 / h - m1 * (h / 6.0)) * t
    }

    fn slope(&self, i: usize, t: f64) -> Vec3 {
        let (y0, y1, m0, m1) = self.segment(i);
        let h = self.h;
        let u = h - t;
        m1 * (t * t / (2.0 * h)) - m0 * (u * u / (2.0 * h)) + (y1 - y0) / h - (m1 - m0) * (h / 6.0)
    }

    /// Arclength of segment `i` from its start to local parameter `t`.
    fn arclength(&self, i: usize, t: f64) -> f64 {
        const NODES: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let half = 0.5 * t;
        NODES
            .iter()
            .zip(WEIGHTS)
            .map(|(&z, w)| w * self.slope(i, half * (z + 1.0)).norm())
            .sum::<f64>()
            * half
    }
}

fn resample_spline(curve: &DiscreteCurve) -> Result<DiscreteCurve> {
    let n = curve.n();
    CurveJet::new(curve).speeds()?;
    let spline = PeriodicSpline::new(curve.nodes());
    let seg_len: Vec<f64> = (0..n).map(|i| spline.arclength(i, spline.h)).collect();
    let total: f64 = seg_len.iter().sum();

    let mut nodes = Vec::with_capacity(n);
    nodes.push(curve.nodes()[0]);
    let (mut seg, mut start) = (0, 0.0);
    for j in 1..n {
        let target = total * j as f64 / n as f64;
        while seg + 1 < n && start + seg_len[seg] < target {
            start += seg_len[seg];
            seg += 1;
        }
        let t = invert_monotone(
            target - start,
            (0.0, spline.h),
            (0.0, seg_len[seg]),
            |t| (spline.arclength(seg, t), spline.slope(seg, t).norm()),
        );
        nodes.push(spline.eval(seg, t));
    }
    DiscreteCurve::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::length;

    fn circle(n: usize) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, |x| Vec3::new(x.cos(), x.sin(), 0.0)).unwrap()
    }

    /// Circle traversed with a non-uniform speed φ(x) = x + 0.3 sin x.
    fn warped_circle(n: usize) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, |x| {
            let phi = x + 0.3 * x.sin();
            Vec3::new(phi.cos(), phi.sin(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn uniform_circle_is_a_fixed_point() {
        for interp in [Interpolant::Trigonometric, Interpolant::CubicSpline] {
            let c = circle(64);
            let r = resample_uniform_arclength_with(&c, interp).unwrap();
            assert!(r.max_node_distance(&c) < 1e-10, "{interp:?}");
        }
    }

    #[test]
    fn warped_circle_nodes_become_equispaced() {
        let c = warped_circle(128);
        let r = resample_uniform_arclength(&c).unwrap();
        for (i, p) in r.nodes().iter().enumerate() {
            let angle = TAU * i as f64 / 128.0;
            let exact = Vec3::new(angle.cos(), angle.sin(), 0.0);
            assert!((*p - exact).norm() < 1e-9, "node {i}: {p}");
        }
    }

    #[test]
    fn spline_variant_tracks_the_circle() {
        let c = warped_circle(128);
        let r = resample_uniform_arclength_with(&c, Interpolant::CubicSpline).unwrap();
        for (i, p) in r.nodes().iter().enumerate() {
            let angle = TAU * i as f64 / 128.0;
            let exact = Vec3::new(angle.cos(), angle.sin(), 0.0);
            assert!((*p - exact).norm() < 1e-5, "node {i}: {p}");
        }
    }

    #[test]
    fn length_is_preserved() {
        let c = DiscreteCurve::from_fn(128, |x| {
            let phi = x + 0.2 * (2.0 * x).sin();
            Vec3::new(1.5 * phi.cos(), phi.sin(), 0.3 * (3.0 * phi).cos())
        })
        .unwrap();
        let r = resample_uniform_arclength(&c).unwrap();
        let (a, b) = (length(&c), length(&r));
        assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn antiderivative_of_constant_is_linear() {
        let s = HalfSpectrum::new(std::iter::repeat(2.0).take(16), 16);
        assert!((s.antiderivative(1.0) - 2.0).abs() < 1e-14);
        assert!((s.eval(0.3).0 - 2.0).abs() < 1e-14);
    }
}
