//! Differentiation of periodic samples on the uniform grid xᵢ = 2πi/n.
//!
//! The default scheme multiplies discrete Fourier coefficients by (ik)^p.
//! The Nyquist mode is dropped from both derivatives, so the first
//! derivative is exactly skew-adjoint under the trapezoid inner product and
//! the second derivative equals the first applied twice.

use std::cell::RefCell;
use std::f64::consts::TAU;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Differentiation scheme used on the periodic grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiffScheme {
    /// Discrete Fourier differentiation, exact for trigonometric polynomials
    /// of degree below n/2.
    #[default]
    Spectral,
    /// Fourth-order central differences.
    CentralFd4,
}

impl DiffScheme {
    pub fn name(self) -> &'static str {
        match self {
            DiffScheme::Spectral => "spectral",
            DiffScheme::CentralFd4 => "fd4",
        }
    }
}

impl std::str::FromStr for DiffScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(DiffScheme::Spectral),
            "fd4" => Ok(DiffScheme::CentralFd4),
            other => Err(Error::InvalidArgument(format!(
                "unknown differentiation scheme '{other}' (expected spectral or fd4)"
            ))),
        }
    }
}

/// Signed wavenumber of FFT bin `i` for an `n`-point transform.
#[inline]
pub(crate) fn wavenumber(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

pub(crate) fn check_order(order: u32) -> Result<()> {
    match order {
        1 | 2 => Ok(()),
        _ => Err(Error::InvalidArgument(format!(
            "derivative order must be 1 or 2, got {order}"
        ))),
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 4 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "periodic grid size must be a power of two >= 4, got {n}"
        )));
    }
    Ok(())
}

pub(crate) fn forward(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(buf);
}

pub(crate) fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(buf);
}

/// Applies the spectral multiplier for `order` to a spectrum in place.
fn apply_multiplier(spec: &mut [Complex64], order: u32) {
    let n = spec.len();
    for (i, c) in spec.iter_mut().enumerate() {
        let k = wavenumber(i, n);
        *c = match order {
            _ if i == n / 2 => Complex64::new(0.0, 0.0),
            1 => Complex64::new(-k * c.im, k * c.re),
            _ => *c * (-k * k),
        };
    }
}

/// Derivative of a real periodic sequence sampled on the uniform grid.
pub fn differentiate_periodic(values: &[f64], order: u32, scheme: DiffScheme) -> Result<Vec<f64>> {
    check_order(order)?;
    check_len(values.len())?;
    Ok(match scheme {
        DiffScheme::Spectral => {
            let n = values.len();
            let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            forward(&mut buf);
            apply_multiplier(&mut buf, order);
            inverse(&mut buf);
            let scale = 1.0 / n as f64;
            buf.iter().map(|c| c.re * scale).collect()
        }
        DiffScheme::CentralFd4 => fd4(values, order),
    })
}

fn fd4<T>(values: &[T], order: u32) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    let h = TAU / n as f64;
    let at = |i: isize| values[i.rem_euclid(n as isize) as usize];
    (0..n as isize)
        .map(|i| {
            let (m2, m1, c, p1, p2) = (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
            if order == 1 {
                ((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * h))
            } else {
                ((p1 + m1) * 16.0 - (p2 + m2) - c * 30.0) * (1.0 / (12.0 * h * h))
            }
        })
        .collect()
}

/// First and second parameter derivatives of a sampled closed space curve.
///
/// Both derivatives of a component are real, so one inverse transform of
/// D₁f̂ + i·D₂f̂ yields them together. Components stay independent, which
/// keeps an identically zero coordinate exactly zero.
pub(crate) fn curve_derivatives(nodes: &[Vec3], scheme: DiffScheme) -> (Vec<Vec3>, Vec<Vec3>) {
    derivative_pair(nodes, scheme, false)
}

/// Order and strength of the exponential filter exp(−α (|k|/k_max)^p).
const FILTER_ORDER: i32 = 36;
const FILTER_STRENGTH: f64 = 36.0;

/// Like [`curve_derivatives`], with the spectral coefficients damped by a
/// high-order exponential filter. Modes below half the Nyquist wavenumber
/// change by less than 1e-9 relative; the top few are removed. Without it
/// aliasing lets near-Nyquist parametrization modes grow from roundoff.
pub(crate) fn curve_derivatives_filtered(nodes: &[Vec3], scheme: DiffScheme) -> (Vec<Vec3>, Vec<Vec3>) {
    derivative_pair(nodes, scheme, true)
}

fn filter_factor(k: f64, n: usize) -> f64 {
    let r = k.abs() / (n / 2) as f64;
    (-FILTER_STRENGTH * r.powi(FILTER_ORDER)).exp()
}

fn derivative_pair(nodes: &[Vec3], scheme: DiffScheme, filtered: bool) -> (Vec<Vec3>, Vec<Vec3>) {
    match scheme {
        DiffScheme::CentralFd4 => (fd4(nodes, 1), fd4(nodes, 2)),
        DiffScheme::Spectral => {
            let n = nodes.len();
            let scale = 1.0 / n as f64;
            let mut first = vec![Vec3::ZERO; n];
            let mut second = vec![Vec3::ZERO; n];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..3 {
                for (b, p) in buf.iter_mut().zip(nodes) {
                    *b = Complex64::new(p[c], 0.0);
                }
                forward(&mut buf);
                for (i, b) in buf.iter_mut().enumerate() {
                    if i == n / 2 {
                        *b = Complex64::new(0.0, 0.0);
                        continue;
                    }
                    let k = wavenumber(i, n);
                    if filtered {
                        *b *= filter_factor(k, n);
                    }
                    let d1 = Complex64::new(-k * b.im, k * b.re);
                    let d2 = *b * (-k * k);
                    *b = d1 + Complex64::new(-d2.im, d2.re);
                }
                inverse(&mut buf);
                for ((f, s), b) in first.iter_mut().zip(second.iter_mut()).zip(&buf) {
                    set_component(f, c, b.re * scale);
                    set_component(s, c, b.im * scale);
                }
            }
            (first, second)
        }
    }
}

/// Removes the Nyquist (sawtooth) component from every coordinate.
///
/// Derivatives ignore this mode, so nothing else controls it.
pub(crate) fn remove_nyquist(nodes: &mut [Vec3]) {
    let n = nodes.len();
    let amplitude = nodes
        .iter()
        .enumerate()
        .map(|(i, &p)| if i % 2 == 0 { p } else { -p })
        .sum::<Vec3>()
        / n as f64;
    if amplitude == Vec3::ZERO {
        return;
    }
    for (i, p) in nodes.iter_mut().enumerate() {
        if i % 2 == 0 {
            *p -= amplitude;
        } else {
            *p += amplitude;
        }
    }
}

/// Trigonometric interpolant of `nodes` sampled on a grid of `m ≥ n` points
/// (zero padding; the Nyquist coefficient is split between ±n/2).
pub(crate) fn refine_nodes(nodes: &[Vec3], m: usize) -> Vec<Vec3> {
    let n = nodes.len();
    let mut out = vec![Vec3::ZERO; m];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut wide = vec![Complex64::new(0.0, 0.0); m];
    for c in 0..3 {
        for (b, p) in buf.iter_mut().zip(nodes) {
            *b = Complex64::new(p[c], 0.0);
        }
        forward(&mut buf);
        wide.fill(Complex64::new(0.0, 0.0));
        let half = n / 2;
        for i in 0..half {
            wide[i] = buf[i];
        }
        for i in half + 1..n {
            wide[m - n + i] = buf[i];
        }
        if m > n {
            wide[half] = buf[half] * 0.5;
            wide[m - half] = buf[half] * 0.5;
        } else {
            wide[half] = buf[half];
        }
        inverse(&mut wide);
        for (o, w) in out.iter_mut().zip(&wide) {
            set_component(o, c, w.re / n as f64);
        }
    }
    out
}

#[inline]
fn set_component(v: &mut Vec3, c: usize, value: f64) {
    match c {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
}
