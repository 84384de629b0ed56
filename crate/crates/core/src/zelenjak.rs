//! Pointwise checks of the weight F(ξ, η) = ρ(ξ, η) = |η| e^{−|ξ|²/4}.
//!
//! * Hessian requirement: D²_η F = ρ |η|^{−4} (|η|² I − η ηᵀ).
//! * Gradient identity: ∇_ξ F − (D_ξ D_η F) η = −(ρ/2)[ξ − (ξ·η/|η|²) η].
//! * Inequality: −(ρ/4)(ξ·ν)² ≥ −(ρ/4)|ξ|² + (ρ/4)(ξ·η)²/|η|², with gap
//!   (ρ/4)(ξ·γ)² for an orthogonal frame (η, ν, γ).
//!
//! Derivatives are central differences. Stencil values are differenced
//! without cancellation: |p| − |q| = (p − q)·(p + q)/(|p| + |q|) and the
//! Gaussian factor through `expm1`, so second differences lose only ε/h.

use crate::error::{Error, Result};
use crate::vec3::Vec3;
use rand::Rng;
use rand_distr::StandardNormal;

/// Invariant tolerance for [`PointFrame`].
pub const FRAME_TOL: f64 = 1e-12;

fn gauss(xi: Vec3) -> f64 {
    (-0.25 * xi.norm_squared()).exp()
}

fn check_eta(eta: Vec3) -> Result<f64> {
    let n = eta.norm();
    if !(n > 0.0) || !n.is_finite() || !eta.is_finite() {
        return Err(Error::InvalidArgument(format!("η must be finite and nonzero, got {eta}")));
    }
    Ok(n)
}

/// F(ξ, η) = |η| e^{−|ξ|²/4}.
pub fn weight(xi: Vec3, eta: Vec3) -> Result<f64> {
    Ok(check_eta(eta)? * gauss(xi))
}

/// ρ |η|^{−4} (|η|² I − η ηᵀ), row-major.
pub fn hessian_closed_form(xi: Vec3, eta: Vec3) -> Result<[[f64; 3]; 3]> {
    let rho = weight(xi, eta)?;
    let n2 = eta.norm_squared();
    let scale = rho / (n2 * n2);
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let delta = if i == j { n2 } else { 0.0 };
            *entry = scale * (delta - eta[i] * eta[j]);
        }
    }
    Ok(m)
}

/// −(ρ/2)[ξ − (ξ·η/|η|²) η].
///
/// Derivations of this vector sometimes carry the normalization e^{+|ξ|²/4}
/// in an intermediate step; with F = |η|e^{−|ξ|²/4} the sign must be
/// negative, and this closed form is what the finite differences confirm.
pub fn gradient_closed_form(xi: Vec3, eta: Vec3) -> Result<Vec3> {
    let rho = weight(xi, eta)?;
    Ok((xi - eta * (xi.dot(eta) / eta.norm_squared())) * (-0.5 * rho))
}

/// A stencil point (ξ + a, η + b) around a base point.
#[derive(Clone, Copy)]
struct Offset {
    a: Vec3,
    b: Vec3,
}

impl Offset {
    fn new(a: Vec3, b: Vec3) -> Self {
        Self { a, b }
    }
}

/// F(ξ + p.a, η + p.b) − F(ξ + q.a, η + q.b) without cancellation.
fn delta(xi: Vec3, eta: Vec3, p: Offset, q: Offset) -> f64 {
    let (x1, x2) = (xi + p.a, xi + q.a);
    let (e1, e2) = (eta + p.b, eta + q.b);
    let (n1, n2) = (e1.norm(), e2.norm());
    let dn = (p.b - q.b).dot(e1 + e2) / (n1 + n2);
    let g2 = gauss(x2);
    let dg = g2 * (-0.25 * (p.a - q.a).dot(x1 + x2)).exp_m1();
    (g2 + dg) * dn + n2 * dg
}

/// Default finite-difference step for a given η.
pub fn default_step(eta: Vec3) -> f64 {
    1e-5 * eta.norm().max(1.0)
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    Ok(())
}

/// D²_η F by central differences with step h.
pub fn hessian_fd(xi: Vec3, eta: Vec3, h: f64) -> Result<[[f64; 3]; 3]> {
    check_eta(eta)?;
    check_step(h)?;
    let z = Vec3::ZERO;
    let at = |b: Vec3| Offset::new(z, b);
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        let ei = Vec3::axis(i) * h;
        m[i][i] = (delta(xi, eta, at(ei), at(z)) - delta(xi, eta, at(z), at(-ei))) / (h * h);
        for j in 0..i {
            let ej = Vec3::axis(j) * h;
            let upper = delta(xi, eta, at(ei + ej), at(ei - ej));
            let lower = delta(xi, eta, at(-ei + ej), at(-ei - ej));
            m[i][j] = (upper - lower) / (4.0 * h * h);
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// ∇_ξ F − (D_ξ D_η F) η by central differences with step h.
pub fn gradient_fd(xi: Vec3, eta: Vec3, h: f64) -> Result<Vec3> {
    check_eta(eta)?;
    check_step(h)?;
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let ei = Vec3::axis(i) * h;
        let grad = delta(xi, eta, Offset::new(ei, Vec3::ZERO), Offset::new(-ei, Vec3::ZERO)) / (2.0 * h);
        let mut mixed = 0.0;
        for j in 0..3 {
            let ej = Vec3::axis(j) * h;
            let upper = delta(xi, eta, Offset::new(ej, ei), Offset::new(ej, -ei));
            let lower = delta(xi, eta, Offset::new(-ej, ei), Offset::new(-ej, -ei));
            mixed += (upper - lower) / (4.0 * h * h) * eta[j];
        }
        *o = grad - mixed;
    }
    Ok(out.into())
}

/// Max absolute entry difference between the finite-difference Hessian in η
/// and its closed form, at the default step.
pub fn hessian_identity_check(xi: Vec3, eta: Vec3) -> Result<f64> {
    hessian_identity_check_with_step(xi, eta, default_step(eta))
}

pub fn hessian_identity_check_with_step(xi: Vec3, eta: Vec3, h: f64) -> Result<f64> {
    let fd = hessian_fd(xi, eta, h)?;
    let exact = hessian_closed_form(xi, eta)?;
    Ok(fd
        .iter()
        .flatten()
        .zip(exact.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Max component difference between the finite-difference gradient vector
/// and −(ρ/2)[ξ − (ξ·η/|η|²) η].
pub fn gradient_vector_identity(xi: Vec3, eta: Vec3) -> Result<f64> {
    gradient_vector_identity_with_step(xi, eta, default_step(eta))
}

pub fn gradient_vector_identity_with_step(xi: Vec3, eta: Vec3, h: f64) -> Result<f64> {
    Ok((gradient_fd(xi, eta, h)? - gradient_closed_form(xi, eta)?).max_abs())
}

/// Sample point ξ with an orthogonal frame: η (any nonzero length), unit
/// normal ν and unit binormal γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFrame {
    xi: Vec3,
    eta: Vec3,
    nu: Vec3,
    gamma: Vec3,
}

impl PointFrame {
    pub fn new(xi: Vec3, eta: Vec3, nu: Vec3, gamma: Vec3) -> Result<Self> {
        let bad = |what: String| Err(Error::InvalidFrame(what));
        if !(xi.is_finite() && eta.is_finite() && nu.is_finite() && gamma.is_finite()) {
            return bad("non-finite frame entry".into());
        }
        let n = eta.norm();
        if !(n > 0.0) {
            return bad("η must be nonzero".into());
        }
        for (name, v) in [("ν", nu), ("γ", gamma)] {
            if (v.norm() - 1.0).abs() > FRAME_TOL {
                return bad(format!("|{name}| = {} is not 1", v.norm()));
            }
        }
        let t = eta / n;
        for (name, d) in [("ν·η", nu.dot(t)), ("ν·γ", nu.dot(gamma)), ("γ·η", gamma.dot(t))] {
            if d.abs() > FRAME_TOL {
                return bad(format!("{name} = {d:e} is not 0"));
            }
        }
        Ok(Self { xi, eta, nu, gamma })
    }

    pub fn xi(&self) -> Vec3 {
        self.xi
    }

    pub fn eta(&self) -> Vec3 {
        self.eta
    }

    pub fn nu(&self) -> Vec3 {
        self.nu
    }

    pub fn gamma(&self) -> Vec3 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.eta.norm() * gauss(self.xi)
    }

    pub fn with_xi(&self, xi: Vec3) -> Result<Self> {
        Self::new(xi, self.eta, self.nu, self.gamma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalityGap {
    /// −(ρ/4)(ξ·ν)².
    pub lhs: f64,
    /// −(ρ/4)|ξ|² + (ρ/4)(ξ·η)²/|η|².
    pub rhs: f64,
    /// lhs − rhs.
    pub gap: f64,
    /// (ρ/4)(ξ·γ)², which the gap should equal.
    pub expected: f64,
}

/// Both sides of the pointwise inequality, with the curvature terms
/// cancelled.
pub fn inequality_gap(frame: &PointFrame) -> InequalityGap {
    let (xi, eta) = (frame.xi, frame.eta);
    let q = 0.25 * frame.rho();
    let xn = xi.dot(frame.nu);
    let xe = xi.dot(eta);
    let xg = xi.dot(frame.gamma);
    let lhs = -q * xn * xn;
    let rhs = -q * xi.norm_squared() + q * xe * xe / eta.norm_squared();
    InequalityGap {
        lhs,
        rhs,
        gap: lhs - rhs,
        expected: q * xg * xg,
    }
}

/// | |ξ|² − (ξ·ν)² − (ξ·η)²/|η|² − (ξ·γ)² |.
pub fn pythagoras_check(xi: Vec3, frame: &PointFrame) -> f64 {
    let xn = xi.dot(frame.nu);
    let xe = xi.dot(frame.eta);
    let xg = xi.dot(frame.gamma);
    (xi.norm_squared() - (xn * xn + xe * xe / frame.eta.norm_squared() + xg * xg)).abs()
}

/// Largest |ξ| drawn by the samplers.
pub const XI_RADIUS: f64 = 3.0;
/// Range of |η| drawn by the samplers.
pub const ETA_RANGE: (f64, f64) = (0.5, 2.0);

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = v.normalized() {
            if v.norm() > 1e-3 {
                return u;
            }
        }
    }
}

/// (ξ, η) with ξ uniform in the ball of radius [`XI_RADIUS`] and η of
/// uniform length in [`ETA_RANGE`] and uniform direction.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R) -> (Vec3, Vec3) {
    let r = XI_RADIUS * rng.random::<f64>().cbrt();
    let xi = unit_vector(rng) * r;
    let eta = unit_vector(rng) * rng.random_range(ETA_RANGE.0..=ETA_RANGE.1);
    (xi, eta)
}

/// A random point with a uniformly rotated orthogonal frame around η.
pub fn random_frame<R: Rng + ?Sized>(rng: &mut R) -> PointFrame {
    let (xi, eta) = random_point(rng);
    let t = eta.normalized().expect("η has length at least 0.5");
    let nu = loop {
        let w = unit_vector(rng);
        if let Some(n) = (w - t * w.dot(t)).normalized() {
            if w.cross(t).norm() > 0.1 {
                break n;
            }
        }
    };
    let gamma = t.cross(nu);
    PointFrame::new(xi, eta, nu, gamma).expect("constructed orthonormal")
}

/// Pass thresholds for [`run_suite`], each normalized as documented on
/// [`SuiteReport`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub hessian: f64,
    pub gradient: f64,
    pub gap: f64,
    pub pythagoras: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hessian: 1e-6,
            gradient: 1e-6,
            gap: 1e-12,
            pythagoras: 1e-12,
        }
    }
}

/// Worst deviations over a random sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteReport {
    pub samples: usize,
    /// Hessian deviation divided by ρ/|η|.
    pub hessian: f64,
    /// Gradient deviation divided by ρ.
    pub gradient: f64,
    /// |gap − (ρ/4)(ξ·γ)²| divided by ρ.
    pub gap: f64,
    /// Smallest gap seen; negative values fail.
    pub min_gap: f64,
    /// Pythagoras deviation divided by max(1, |ξ|²).
    pub pythagoras: f64,
}

impl SuiteReport {
    pub fn hessian_ok(&self, tol: &Tolerances) -> bool {
        self.hessian <= tol.hessian
    }

    pub fn gradient_ok(&self, tol: &Tolerances) -> bool {
        self.gradient <= tol.gradient
    }

    pub fn gap_ok(&self, tol: &Tolerances) -> bool {
        self.gap <= tol.gap && self.min_gap >= 0.0
    }

    pub fn pythagoras_ok(&self, tol: &Tolerances) -> bool {
        self.pythagoras <= tol.pythagoras
    }

    pub fn passed(&self, tol: &Tolerances) -> bool {
        self.hessian_ok(tol) && self.gradient_ok(tol) && self.gap_ok(tol) && self.pythagoras_ok(tol)
    }
}

/// Runs all four checks on `samples` random points and frames drawn from
/// `rng`.
pub fn run_suite<R: Rng + ?Sized>(samples: usize, rng: &mut R) -> Result<SuiteReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("the suite needs at least one sample".into()));
    }
    let mut report = SuiteReport {
        samples,
        hessian: 0.0,
        gradient: 0.0,
        gap: 0.0,
        min_gap: f64::INFINITY,
        pythagoras: 0.0,
    };
    for _ in 0..samples {
        let (xi, eta) = random_point(rng);
        let rho = weight(xi, eta)?;
        report.hessian = report.hessian.max(hessian_identity_check(xi, eta)? / (rho / eta.norm()));
        report.gradient = report.gradient.max(gradient_vector_identity(xi, eta)? / rho);
        let frame = random_frame(rng);
        let g = inequality_gap(&frame);
        report.gap = report.gap.max((g.gap - g.expected).abs() / frame.rho());
        report.min_gap = report.min_gap.min(g.gap);
        report.pythagoras = report
            .pythagoras
            .max(pythagoras_check(frame.xi, &frame) / frame.xi.norm_squared().max(1.0));
    }
    Ok(report)
}
