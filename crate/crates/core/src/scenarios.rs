//! Named initial curves and closed-form circle solutions.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::flow::Mode;
use crate::geometry::DiscreteCurve;
use crate::vec3::Vec3;

/// A registered generator and its parameters with default values.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, f64)],
}

const REGISTRY: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "circle",
        summary: "circle of radius r centred at (cx, cy, cz), parallel to the xy-plane",
        params: &[("r", 1.0), ("cx", 0.0), ("cy", 0.0), ("cz", 0.0)],
    },
    ScenarioInfo {
        name: "ellipse",
        summary: "origin-centred ellipse with semi-axes a (x) and b (y)",
        params: &[("a", 1.5), ("b", 1.0)],
    },
    ScenarioInfo {
        name: "offset_circle",
        summary: "circle of radius r about the z-axis in the plane z = c",
        params: &[("r", SQRT_2), ("c", 1.0)],
    },
    ScenarioInfo {
        name: "twisted_circle",
        summary: "(cos x, sin x, eps sin 2x)",
        params: &[("eps", 0.2)],
    },
    ScenarioInfo {
        name: "fourier_random",
        summary: "unit circle plus random Fourier modes 1..modes with amplitudes e^{-decay k}",
        params: &[("seed", 7.0), ("modes", 5.0), ("decay", 2.0)],
    },
    ScenarioInfo {
        name: "planar_random",
        summary: "fourier_random confined to the plane z = 0",
        params: &[("seed", 7.0), ("modes", 5.0), ("decay", 2.0)],
    },
];

pub fn registry() -> &'static [ScenarioInfo] {
    REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static ScenarioInfo> {
    REGISTRY.iter().find(|s| s.name == name).ok_or_else(|| {
        let known: Vec<_> = REGISTRY.iter().map(|s| s.name).collect();
        Error::Scenario(format!("unknown scenario '{name}' (known: {})", known.join(", ")))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub mode: Mode,
}

impl ScenarioSpec {
    /// A spec with every parameter at its registered default.
    pub fn with_defaults(name: &str, n: usize, mode: Mode) -> Result<Self> {
        let info = lookup(name)?;
        Ok(Self {
            name: info.name.to_string(),
            params: info.params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            n,
            mode,
        })
    }

    /// Sets one parameter, rejecting names the scenario does not take.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let info = lookup(&self.name)?;
        if !info.params.iter().any(|&(k, _)| k == key) {
            return Err(Error::Scenario(format!(
                "scenario '{}' has no parameter '{key}'",
                self.name
            )));
        }
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }

    pub fn param(&self, key: &str) -> Result<f64> {
        let v = *self.params.get(key).ok_or_else(|| {
            Error::Scenario(format!("scenario '{}' is missing parameter '{key}'", self.name))
        })?;
        if !v.is_finite() {
            return Err(Error::Scenario(format!("parameter '{key}' must be finite, got {v}")));
        }
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        let info = lookup(&self.name)?;
        for key in self.params.keys() {
            if !info.params.iter().any(|&(k, _)| k == key) {
                return Err(Error::Scenario(format!(
                    "scenario '{}' has no parameter '{key}'",
                    self.name
                )));
            }
        }
        for &(key, _) in info.params {
            self.param(key)?;
        }
        Ok(())
    }
}

fn positive(spec: &ScenarioSpec, key: &str) -> Result<f64> {
    let v = spec.param(key)?;
    if !(v > 0.0) {
        return Err(Error::Scenario(format!("parameter '{key}' must be positive, got {v}")));
    }
    Ok(v)
}

fn whole(spec: &ScenarioSpec, key: &str, min: f64) -> Result<u64> {
    let v = spec.param(key)?;
    if v.fract() != 0.0 || v < min || v > 2f64.powi(53) {
        return Err(Error::Scenario(format!(
            "parameter '{key}' must be an integer ≥ {min}, got {v}"
        )));
    }
    Ok(v as u64)
}

/// Generates the initial curve. Random scenarios may advance their seed,
/// see [`make_curve_with_seed`].
pub fn make_curve(spec: &ScenarioSpec) -> Result<DiscreteCurve> {
    make_curve_with_seed(spec).map(|(c, _)| c)
}

/// As [`make_curve`], also returning the seed a random scenario settled on.
pub fn make_curve_with_seed(spec: &ScenarioSpec) -> Result<(DiscreteCurve, Option<u64>)> {
    spec.validate()?;
    let n = spec.n;
    let curve = |f: &dyn Fn(f64) -> Vec3| {
        DiscreteCurve::from_fn(n, f).map_err(|e| Error::Scenario(format!("scenario '{}': {e}", spec.name)))
    };
    match spec.name.as_str() {
        "circle" => {
            let r = positive(spec, "r")?;
            let c = Vec3::new(spec.param("cx")?, spec.param("cy")?, spec.param("cz")?);
            Ok((curve(&|x| c + Vec3::new(r * x.cos(), r * x.sin(), 0.0))?, None))
        }
        "ellipse" => {
            let (a, b) = (positive(spec, "a")?, positive(spec, "b")?);
            Ok((curve(&|x| Vec3::new(a * x.cos(), b * x.sin(), 0.0))?, None))
        }
        "offset_circle" => {
            let (r, c) = (positive(spec, "r")?, spec.param("c")?);
            Ok((curve(&|x| Vec3::new(r * x.cos(), r * x.sin(), c))?, None))
        }
        "twisted_circle" => {
            let eps = spec.param("eps")?;
            Ok((curve(&|x| Vec3::new(x.cos(), x.sin(), eps * (2.0 * x).sin()))?, None))
        }
        "fourier_random" | "planar_random" => {
            let planar = spec.name == "planar_random";
            let seed = whole(spec, "seed", 0.0)?;
            let modes = whole(spec, "modes", 1.0)? as usize;
            let decay = spec.param("decay")?;
            if decay < 0.0 {
                return Err(Error::Scenario(format!("parameter 'decay' must be non-negative, got {decay}")));
            }
            if modes >= n / 4 {
                return Err(Error::Scenario(format!(
                    "{modes} modes are too many for {n} nodes (need modes < n/4)"
                )));
            }
            let (series, used) = random_series(seed, modes, decay, planar)?;
            Ok((curve(&|x| series.eval(x).0)?, Some(used)))
        }
        _ => unreachable!("validated against the registry"),
    }
}

/// Attempts before the random generators give up.
const MAX_DRAWS: u64 = 1000;
/// Regularity demanded of random curves.
const MIN_SPEED: f64 = 0.1;
const MIN_CROSS: f64 = 1e-3;

struct FourierSeries {
    cos: Vec<Vec3>,
    sin: Vec<Vec3>,
}

impl FourierSeries {
    /// Position, first and second derivative at x.
    fn eval(&self, x: f64) -> (Vec3, Vec3, Vec3) {
        let mut p = Vec3::new(x.cos(), x.sin(), 0.0);
        let mut d1 = Vec3::new(-x.sin(), x.cos(), 0.0);
        let mut d2 = -p;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kf = (k + 1) as f64;
            let (s, c) = (kf * x).sin_cos();
            p += *a * c + *b * s;
            d1 += (*b * c - *a * s) * kf;
            d2 -= (*a * c + *b * s) * (kf * kf);
        }
        (p, d1, d2)
    }

    /// Checks speed and |u″×u′| on a grid fine enough to resolve every mode.
    fn is_regular(&self) -> bool {
        let m = 64 * (self.cos.len() + 1);
        (0..m).all(|i| {
            let x = std::f64::consts::TAU * i as f64 / m as f64;
            let (_, d1, d2) = self.eval(x);
            d1.norm() >= MIN_SPEED && d2.cross(d1).norm() >= MIN_CROSS
        })
    }
}

fn random_series(seed: u64, modes: usize, decay: f64, planar: bool) -> Result<(FourierSeries, u64)> {
    for attempt in 0..MAX_DRAWS {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut draw = |amp: f64| {
            let mut v = || -> f64 { StandardNormal.sample(&mut rng) };
            let (x, y, z) = (v(), v(), v());
            Vec3::new(x, y, if planar { 0.0 } else { z }) * amp
        };
        let mut cos = Vec::with_capacity(modes);
        let mut sin = Vec::with_capacity(modes);
        for k in 1..=modes {
            let amp = (-decay * k as f64).exp();
            cos.push(draw(amp));
            sin.push(draw(amp));
        }
        let series = FourierSeries { cos, sin };
        if series.is_regular() {
            return Ok((series, s));
        }
    }
    Err(Error::Scenario(format!(
        "no regular curve in {MAX_DRAWS} draws from seed {seed}"
    )))
}

/// Radius √(r0² − 2t) of a circle of initial radius r0 under curve
/// shortening flow.
pub fn circle_oracle(r0: f64, t: f64) -> Result<f64> {
    if !(r0 > 0.0) || !r0.is_finite() || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "circle oracle needs finite r0 > 0 and finite t, got r0 = {r0}, t = {t}"
        )));
    }
    let blowup = 0.5 * r0 * r0;
    if t >= blowup {
        return Err(Error::PastSingularity { t, blowup });
    }
    Ok((r0 * r0 - 2.0 * t).sqrt())
}

/// dR/dτ = R/2 − 1/R for origin-centred circles under the rescaled flow.
pub fn rescaled_circle_ode(r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    Ok(0.5 * r - 1.0 / r)
}
