//! Parametric bivariate families: Normal, elliptical Student t and three
//! bivariate Pareto-II constructions built from exponential idiosyncratic
//! risks divided by gamma background risks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quad::{self, QuadratureSpec};
use crate::sample::{PairedSample, Provenance};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Pareto distribution of the second kind, `P[X > x] = (1 + (x - μ)/σ)^{-δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoIIMargin {
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl ParetoIIMargin {
    pub fn new(mu: f64, sigma: f64, delta: f64) -> Result<Self> {
        finite("mu", mu)?;
        positive("sigma", sigma)?;
        positive("delta", delta)?;
        Ok(ParetoIIMargin { mu, sigma, delta })
    }

    pub fn standard(delta: f64) -> Result<Self> {
        ParetoIIMargin::new(0.0, 1.0, delta)
    }

    /// De-cumulative distribution function; 1 at and below the location.
    pub fn ddf(&self, x: f64) -> f64 {
        let z = ((x - self.mu) / self.sigma).max(0.0);
        (1.0 + z).powf(-self.delta)
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!(
                "Pareto quantile needs u in [0, 1), got {u}"
            )));
        }
        Ok(self.upper_quantile_unchecked(1.0 - u))
    }

    /// Inverse of the d.d.f.: the `x` with `P[X > x] = t`, for `t` in `(0, 1]`.
    pub fn upper_quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Domain(format!(
                "Pareto upper quantile needs t in (0, 1], got {t}"
            )));
        }
        Ok(self.upper_quantile_unchecked(t))
    }

    fn upper_quantile_unchecked(&self, t: f64) -> f64 {
        self.mu + self.sigma * (t.powf(-1.0 / self.delta) - 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        if self.delta <= 1.0 {
            return Err(Error::InfiniteMoment(format!(
                "Pareto-II mean needs tail index > 1, got {}",
                self.delta
            )));
        }
        Ok(self.mu + self.sigma / (self.delta - 1.0))
    }

    pub fn variance(&self) -> Result<f64> {
        let d = self.delta;
        if d <= 2.0 {
            return Err(Error::InfiniteMoment(format!(
                "Pareto-II variance needs tail index > 2, got {d}"
            )));
        }
        Ok(self.sigma * self.sigma * d / ((d - 1.0) * (d - 1.0) * (d - 2.0)))
    }
}

/// A univariate margin with the operations the oracles and pricing need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MarginLaw {
    ParetoII(ParetoIIMargin),
    Normal { mu: f64, sigma: f64 },
    /// Location-scale Student t; `scale` is the dispersion, not the s.d.
    StudentT { mu: f64, scale: f64, nu: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl MarginLaw {
    /// `x` with `P[X > x] = t`.
    pub fn upper_quantile(&self, t: f64) -> f64 {
        match *self {
            MarginLaw::ParetoII(m) => m.upper_quantile_unchecked(t),
            MarginLaw::Normal { mu, sigma } => {
                mu - sigma * standard_normal().inverse_cdf(t)
            }
            MarginLaw::StudentT { mu, scale, nu } => {
                let t_dist = StudentsT::new(0.0, 1.0, nu).expect("validated nu");
                mu - scale * t_dist.inverse_cdf(t)
            }
            MarginLaw::Uniform { lo, hi } => hi - (hi - lo) * t,
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match *self {
            MarginLaw::ParetoII(m) => m.mean(),
            MarginLaw::Normal { mu, .. } => Ok(mu),
            MarginLaw::StudentT { mu, nu, .. } => {
                if nu > 1.0 {
                    Ok(mu)
                } else {
                    Err(Error::InfiniteMoment(format!(
                        "Student t mean needs nu > 1, got {nu}"
                    )))
                }
            }
            MarginLaw::Uniform { lo, hi } => Ok(0.5 * (lo + hi)),
        }
    }

    pub fn variance(&self) -> Result<f64> {
        match *self {
            MarginLaw::ParetoII(m) => m.variance(),
            MarginLaw::Normal { sigma, .. } => Ok(sigma * sigma),
            MarginLaw::StudentT { scale, nu, .. } => {
                if nu > 2.0 {
                    Ok(scale * scale * nu / (nu - 2.0))
                } else {
                    Err(Error::InfiniteMoment(format!(
                        "Student t variance needs nu > 2, got {nu}"
                    )))
                }
            }
            MarginLaw::Uniform { lo, hi } => Ok((hi - lo) * (hi - lo) / 12.0),
        }
    }

    /// `P[X > x]`.
    pub fn ddf(&self, x: f64) -> f64 {
        match *self {
            MarginLaw::ParetoII(m) => m.ddf(x),
            MarginLaw::Normal { mu, sigma } => normal_sf((x - mu) / sigma),
            MarginLaw::StudentT { mu, scale, nu } => {
                let t_dist = StudentsT::new(0.0, 1.0, nu).expect("validated nu");
                t_dist.sf((x - mu) / scale)
            }
            MarginLaw::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
        }
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `P[Z1 > h, Z2 > k]` for standard normals with correlation `rho`
/// (Plackett's integral over the correlation).
fn bivariate_normal_upper(h: f64, k: f64, rho: f64) -> Result<f64> {
    let base = normal_sf(h) * normal_sf(k);
    if rho == 0.0 {
        return Ok(base);
    }
    let integrand = |r: f64| {
        let one_minus = 1.0 - r * r;
        (-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)).exp() / one_minus.sqrt()
    };
    let spec = QuadratureSpec {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_subdivisions: 2_000,
    };
    let est = quad::integrate(integrand, 0.0, rho, &spec)?;
    Ok((base + est.value / (2.0 * std::f64::consts::PI)).clamp(0.0, 1.0))
}

/// Location and scale parameters shared by every family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frame {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl Frame {
    pub fn new(mu_x: f64, mu_y: f64, sigma_x: f64, sigma_y: f64) -> Result<Self> {
        finite("mu_x", mu_x)?;
        finite("mu_y", mu_y)?;
        positive("sigma_x", sigma_x)?;
        positive("sigma_y", sigma_y)?;
        Ok(Frame {
            mu_x,
            mu_y,
            sigma_x,
            sigma_y,
        })
    }

    pub fn standard() -> Self {
        Frame {
            mu_x: 0.0,
            mu_y: 0.0,
            sigma_x: 1.0,
            sigma_y: 1.0,
        }
    }

    fn standardize(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.mu_x) / self.sigma_x, (y - self.mu_y) / self.sigma_y)
    }
}

/// One of the supported bivariate laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BivariateFamily {
    Normal { frame: Frame, rho: f64 },
    /// Elliptical Student t; `sigma_x`, `sigma_y`, `sigma_xy` are entries of
    /// the dispersion matrix.
    EllipticalT { frame: Frame, sigma_xy: f64, nu: f64 },
    /// Exchangeable bivariate Pareto: `(E_X/G, E_Y/G)`.
    Bvp1 { frame: Frame, delta: f64 },
    /// `(E_X/G, E_Y/(G_Y + G))`.
    Bvp2 { frame: Frame, delta: f64, delta_y: f64 },
    /// `(E_X/(G_X + G), E_Y/(G_Y + G))`.
    Bvp3 {
        frame: Frame,
        delta: f64,
        delta_x: f64,
        delta_y: f64,
    },
}

/// Coefficients of `E[X | Y] = alpha + beta Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionLine {
    pub alpha: f64,
    pub beta: f64,
}

/// One term `d_i (1+x)^{-(δ_X+i1)} (1+y)^{-(δ_Y+i2)} (1+x+y)^{-(δ+i3)}` of the
/// standardized BVP3 density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bvp3Term {
    pub index: [u32; 3],
    pub coefficient: f64,
}

/// Triplets `(i1, i2, i3)` of non-negative integers summing to two.
pub const BVP3_TRIPLETS: [[u32; 3]; 6] = [
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
    [1, 0, 1],
    [0, 1, 1],
];

const CHUNK: usize = 1 << 14;

impl BivariateFamily {
    pub fn normal(frame: Frame, rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "normal correlation must satisfy |rho| < 1, got {rho}"
            )));
        }
        Ok(BivariateFamily::Normal { frame, rho })
    }

    pub fn elliptical_t(frame: Frame, sigma_xy: f64, nu: f64) -> Result<Self> {
        finite("sigma_xy", sigma_xy)?;
        if !(sigma_xy.abs() < frame.sigma_x * frame.sigma_y) {
            return Err(Error::InvalidParameter(format!(
                "dispersion matrix not positive definite: |sigma_xy| = {} >= sigma_x sigma_y = {}",
                sigma_xy.abs(),
                frame.sigma_x * frame.sigma_y
            )));
        }
        if !(nu > 1.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "elliptical t needs degrees of freedom nu > 1, got {nu}"
            )));
        }
        Ok(BivariateFamily::EllipticalT {
            frame,
            sigma_xy,
            nu,
        })
    }

    pub fn bvp1(frame: Frame, delta: f64) -> Result<Self> {
        positive("delta", delta)?;
        Ok(BivariateFamily::Bvp1 { frame, delta })
    }

    pub fn bvp2(frame: Frame, delta: f64, delta_y: f64) -> Result<Self> {
        positive("delta", delta)?;
        positive("delta_y", delta_y)?;
        Ok(BivariateFamily::Bvp2 {
            frame,
            delta,
            delta_y,
        })
    }

    pub fn bvp3(frame: Frame, delta: f64, delta_x: f64, delta_y: f64) -> Result<Self> {
        positive("delta", delta)?;
        positive("delta_x", delta_x)?;
        positive("delta_y", delta_y)?;
        Ok(BivariateFamily::Bvp3 {
            frame,
            delta,
            delta_x,
            delta_y,
        })
    }

    pub fn frame(&self) -> Frame {
        match *self {
            BivariateFamily::Normal { frame, .. }
            | BivariateFamily::EllipticalT { frame, .. }
            | BivariateFamily::Bvp1 { frame, .. }
            | BivariateFamily::Bvp2 { frame, .. }
            | BivariateFamily::Bvp3 { frame, .. } => frame,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BivariateFamily::Normal { .. } => "normal",
            BivariateFamily::EllipticalT { .. } => "t",
            BivariateFamily::Bvp1 { .. } => "bvp1",
            BivariateFamily::Bvp2 { .. } => "bvp2",
            BivariateFamily::Bvp3 { .. } => "bvp3",
        }
    }

    pub fn is_pareto(&self) -> bool {
        matches!(
            self,
            BivariateFamily::Bvp1 { .. } | BivariateFamily::Bvp2 { .. } | BivariateFamily::Bvp3 { .. }
        )
    }

    /// Tail indices of the standardized margins (`δ_X*`, `δ_Y*`) for the Pareto families.
    pub fn marginal_tail_indices(&self) -> Option<(f64, f64)> {
        match *self {
            BivariateFamily::Bvp1 { delta, .. } => Some((delta, delta)),
            BivariateFamily::Bvp2 { delta, delta_y, .. } => Some((delta, delta + delta_y)),
            BivariateFamily::Bvp3 {
                delta,
                delta_x,
                delta_y,
                ..
            } => Some((delta + delta_x, delta + delta_y)),
            _ => None,
        }
    }

    pub fn margin_x(&self) -> MarginLaw {
        let f = self.frame();
        match *self {
            BivariateFamily::Normal { .. } => MarginLaw::Normal {
                mu: f.mu_x,
                sigma: f.sigma_x,
            },
            BivariateFamily::EllipticalT { nu, .. } => MarginLaw::StudentT {
                mu: f.mu_x,
                scale: f.sigma_x,
                nu,
            },
            _ => {
                let (dx, _) = self.marginal_tail_indices().expect("pareto family");
                MarginLaw::ParetoII(ParetoIIMargin {
                    mu: f.mu_x,
                    sigma: f.sigma_x,
                    delta: dx,
                })
            }
        }
    }

    pub fn margin_y(&self) -> MarginLaw {
        let f = self.frame();
        match *self {
            BivariateFamily::Normal { .. } => MarginLaw::Normal {
                mu: f.mu_y,
                sigma: f.sigma_y,
            },
            BivariateFamily::EllipticalT { nu, .. } => MarginLaw::StudentT {
                mu: f.mu_y,
                scale: f.sigma_y,
                nu,
            },
            _ => {
                let (_, dy) = self.marginal_tail_indices().expect("pareto family");
                MarginLaw::ParetoII(ParetoIIMargin {
                    mu: f.mu_y,
                    sigma: f.sigma_y,
                    delta: dy,
                })
            }
        }
    }

    /// `P[X > x, Y > y]`. For the Pareto families points below the support
    /// are clamped to its lower boundary, where the value is the marginal d.d.f.
    pub fn joint_ddf(&self, x: f64, y: f64) -> Result<f64> {
        let frame = self.frame();
        let (sx, sy) = frame.standardize(x, y);
        match *self {
            BivariateFamily::Normal { rho, .. } => bivariate_normal_upper(sx, sy, rho),
            BivariateFamily::EllipticalT { sigma_xy, nu, .. } => {
                let rho = sigma_xy / (frame.sigma_x * frame.sigma_y);
                bivariate_t_upper(sx, sy, rho, nu)
            }
            BivariateFamily::Bvp1 { delta, .. } => {
                let (a, b) = (sx.max(0.0), sy.max(0.0));
                Ok((1.0 + a + b).powf(-delta))
            }
            BivariateFamily::Bvp2 { delta, delta_y, .. } => {
                let (a, b) = (sx.max(0.0), sy.max(0.0));
                Ok((1.0 + a + b).powf(-delta) * (1.0 + b).powf(-delta_y))
            }
            BivariateFamily::Bvp3 {
                delta,
                delta_x,
                delta_y,
                ..
            } => {
                let (a, b) = (sx.max(0.0), sy.max(0.0));
                Ok((1.0 + a + b).powf(-delta) * (1.0 + a).powf(-delta_x) * (1.0 + b).powf(-delta_y))
            }
        }
    }

    /// Draws `n` i.i.d. pairs. Generation is split into fixed-size chunks,
    /// each on its own ChaCha stream of the seed, so the output depends only
    /// on `(seed, n)` and not on the number of worker threads.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PairedSample> {
        let (xs, ys) = self.sample_columns(n, seed)?;
        PairedSample::new(
            xs,
            ys,
            Provenance {
                seed: Some(seed),
                source: self.to_string(),
            },
        )
    }

    pub(crate) fn sample_columns(&self, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let sampler = PairSampler::new(self)?;
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c as u64);
                let len = CHUNK.min(n - c * CHUNK);
                let mut xs = Vec::with_capacity(len);
                let mut ys = Vec::with_capacity(len);
                for _ in 0..len {
                    let (x, y) = sampler.draw(&mut rng);
                    xs.push(x);
                    ys.push(y);
                }
                (xs, ys)
            })
            .collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for (px, py) in parts {
            xs.extend(px);
            ys.extend(py);
        }
        Ok((xs, ys))
    }

    /// `E[X | Y] = alpha + beta Y` for the families where it is linear.
    pub fn regression_line(&self) -> Result<RegressionLine> {
        let f = self.frame();
        match *self {
            BivariateFamily::Normal { rho, .. } => {
                let beta = rho * f.sigma_x / f.sigma_y;
                Ok(RegressionLine {
                    alpha: f.mu_x - beta * f.mu_y,
                    beta,
                })
            }
            BivariateFamily::EllipticalT { sigma_xy, .. } => {
                let beta = sigma_xy / (f.sigma_y * f.sigma_y);
                Ok(RegressionLine {
                    alpha: f.mu_x - beta * f.mu_y,
                    beta,
                })
            }
            BivariateFamily::Bvp1 { delta, .. } => {
                require_mean(delta, "BVP1 regression")?;
                Ok(RegressionLine {
                    alpha: f.mu_x + f.sigma_x / delta * (1.0 - f.mu_y / f.sigma_y),
                    beta: f.sigma_x / (delta * f.sigma_y),
                })
            }
            BivariateFamily::Bvp2 { delta, delta_y, .. } => {
                require_mean(delta, "BVP2 regression")?;
                let dys = delta + delta_y;
                // intercept for standardized locations, then shifted
                let alpha0 = f.sigma_x * (dys - 1.0) / (dys * (delta - 1.0));
                let beta = f.sigma_x * (dys - 1.0) / (f.sigma_y * dys * (delta - 1.0));
                Ok(RegressionLine {
                    alpha: f.mu_x + alpha0 - beta * f.mu_y,
                    beta,
                })
            }
            BivariateFamily::Bvp3 { .. } => Err(Error::NoLinearRegression(
                "BVP3 with separate background risks for X and Y; use the empirical or oracle route".into(),
            )),
        }
    }

    /// Population Pearson correlation where a closed form is available.
    pub fn pearson_closed_form(&self) -> Result<f64> {
        let f = self.frame();
        match *self {
            BivariateFamily::Normal { rho, .. } => Ok(rho),
            BivariateFamily::EllipticalT { sigma_xy, nu, .. } => {
                if nu <= 2.0 {
                    return Err(Error::InfiniteMoment(format!(
                        "elliptical t variance needs nu > 2, got {nu}"
                    )));
                }
                Ok(sigma_xy / (f.sigma_x * f.sigma_y))
            }
            BivariateFamily::Bvp1 { delta, .. } => {
                require_variance(delta, "BVP1 Pearson correlation")?;
                Ok(1.0 / delta)
            }
            BivariateFamily::Bvp2 { delta, delta_y, .. } => {
                require_variance(delta, "BVP2 Pearson correlation")?;
                let dys = delta + delta_y;
                Ok(((delta - 2.0) / (delta * dys * (dys - 2.0))).sqrt())
            }
            BivariateFamily::Bvp3 { .. } => Err(Error::Unsupported {
                what: "closed-form Pearson correlation for BVP3".into(),
                alternatives: "Monte-Carlo estimate (oracle mc_reference with the pearson statistic)".into(),
            }),
        }
    }

    /// Coefficients of the standardized BVP3 density, the mixed partial
    /// derivative of the joint d.d.f., over all six index triplets.
    pub fn bvp3_pdf_terms(&self) -> Result<Vec<Bvp3Term>> {
        match *self {
            BivariateFamily::Bvp3 {
                delta,
                delta_x,
                delta_y,
                ..
            } => Ok(bvp3_terms(delta, delta_x, delta_y)),
            _ => Err(Error::InvalidParameter(format!(
                "bvp3_pdf_terms needs a BVP3 family, got {}",
                self.tag()
            ))),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        let f = self.frame();
        let mut out = vec![
            ("mu_x", f.mu_x),
            ("mu_y", f.mu_y),
            ("sigma_x", f.sigma_x),
            ("sigma_y", f.sigma_y),
        ];
        match *self {
            BivariateFamily::Normal { rho, .. } => out.push(("rho", rho)),
            BivariateFamily::EllipticalT { sigma_xy, nu, .. } => {
                out.push(("sigma_xy", sigma_xy));
                out.push(("nu", nu));
            }
            BivariateFamily::Bvp1 { delta, .. } => out.push(("delta", delta)),
            BivariateFamily::Bvp2 { delta, delta_y, .. } => {
                out.push(("delta", delta));
                out.push(("delta_y", delta_y));
            }
            BivariateFamily::Bvp3 {
                delta,
                delta_x,
                delta_y,
                ..
            } => {
                out.push(("delta", delta));
                out.push(("delta_x", delta_x));
                out.push(("delta_y", delta_y));
            }
        }
        out
    }

    /// Builds a family from a tag and `key -> value` parameters. Locations
    /// default to 0 and scales to 1; unknown keys are rejected.
    pub fn from_params(tag: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match tag {
            "normal" => &["rho"],
            "t" | "elliptical_t" => &["sigma_xy", "nu"],
            "bvp1" => &["delta"],
            "bvp2" => &["delta", "delta_y"],
            "bvp3" => &["delta", "delta_x", "delta_y"],
            other => {
                return Err(Error::Parse(format!(
                    "unknown family {other:?} (expected normal, t, bvp1, bvp2, bvp3)"
                )))
            }
        };
        const FRAME_KEYS: [&str; 4] = ["mu_x", "mu_y", "sigma_x", "sigma_y"];
        for key in params.keys() {
            if !FRAME_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
                return Err(Error::Parse(format!(
                    "parameter {key:?} does not apply to family {tag}"
                )));
            }
        }
        let get = |k: &str, default: Option<f64>| -> Result<f64> {
            params
                .get(k)
                .copied()
                .or(default)
                .ok_or_else(|| Error::Parse(format!("family {tag} requires parameter {k}")))
        };
        let frame = Frame::new(
            get("mu_x", Some(0.0))?,
            get("mu_y", Some(0.0))?,
            get("sigma_x", Some(1.0))?,
            get("sigma_y", Some(1.0))?,
        )?;
        match tag {
            "normal" => BivariateFamily::normal(frame, get("rho", None)?),
            "t" | "elliptical_t" => {
                BivariateFamily::elliptical_t(frame, get("sigma_xy", None)?, get("nu", None)?)
            }
            "bvp1" => BivariateFamily::bvp1(frame, get("delta", None)?),
            "bvp2" => BivariateFamily::bvp2(frame, get("delta", None)?, get("delta_y", None)?),
            _ => BivariateFamily::bvp3(
                frame,
                get("delta", None)?,
                get("delta_x", None)?,
                get("delta_y", None)?,
            ),
        }
    }
}

fn require_mean(delta: f64, what: &str) -> Result<()> {
    if delta > 1.0 {
        Ok(())
    } else {
        Err(Error::InfiniteMoment(format!(
            "{what} needs finite means (tail index > 1), got delta = {delta}"
        )))
    }
}

fn require_variance(delta: f64, what: &str) -> Result<()> {
    if delta > 2.0 {
        Ok(())
    } else {
        Err(Error::InfiniteMoment(format!(
            "{what} needs finite variances (tail index > 2), got delta = {delta}"
        )))
    }
}

pub(crate) fn bvp3_terms(delta: f64, delta_x: f64, delta_y: f64) -> Vec<Bvp3Term> {
    BVP3_TRIPLETS
        .iter()
        .map(|&index| {
            let coefficient = match index {
                [0, 0, 2] => delta * (delta + 1.0),
                [1, 0, 1] => delta * delta_x,
                [0, 1, 1] => delta * delta_y,
                [1, 1, 0] => delta_x * delta_y,
                _ => 0.0,
            };
            Bvp3Term { index, coefficient }
        })
        .collect()
}

/// Standardized BVP3 density at `(x, y)` in the positive quadrant.
pub fn bvp3_density(terms: &[Bvp3Term], delta: f64, delta_x: f64, delta_y: f64, x: f64, y: f64) -> f64 {
    let (lx, ly, lxy) = ((1.0 + x).ln(), (1.0 + y).ln(), (1.0 + x + y).ln());
    terms
        .iter()
        .filter(|t| t.coefficient != 0.0)
        .map(|t| {
            let [i1, i2, i3] = t.index;
            let e = -(delta_x + i1 as f64) * lx - (delta_y + i2 as f64) * ly - (delta + i3 as f64) * lxy;
            t.coefficient * e.exp()
        })
        .sum()
}

/// `P[T1 > h, T2 > k]` for a standard bivariate t: mixes the normal
/// orthant probability over `W ~ χ²_ν`, `T = Z / sqrt(W/ν)`.
fn bivariate_t_upper(h: f64, k: f64, rho: f64, nu: f64) -> Result<f64> {
    let shape = 0.5 * nu;
    let ln_norm = shape * 2f64.ln() + crate::specfun::ln_gamma(shape)?;
    let spec = QuadratureSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-9,
        max_subdivisions: 2_000,
    };
    let failure = std::cell::RefCell::new(None);
    let est = quad::integrate_half_line(
        |w| {
            if w <= 0.0 {
                return 0.0;
            }
            let density = ((shape - 1.0) * w.ln() - 0.5 * w - ln_norm).exp();
            if density == 0.0 {
                return 0.0;
            }
            let s = (w / nu).sqrt();
            match bivariate_normal_upper(h * s, k * s, rho) {
                Ok(p) => p * density,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        &spec,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(est.value.clamp(0.0, 1.0))
}

struct PairSampler {
    family: BivariateFamily,
    g: Option<Gamma<f64>>,
    gx: Option<Gamma<f64>>,
    gy: Option<Gamma<f64>>,
}

fn gamma(shape: f64, scale: f64) -> Result<Gamma<f64>> {
    Gamma::new(shape, scale)
        .map_err(|e| Error::InvalidParameter(format!("gamma({shape}, {scale}): {e}")))
}

impl PairSampler {
    fn new(family: &BivariateFamily) -> Result<Self> {
        let (g, gx, gy) = match *family {
            BivariateFamily::Normal { .. } => (None, None, None),
            BivariateFamily::EllipticalT { nu, .. } => (Some(gamma(0.5 * nu, 2.0)?), None, None),
            BivariateFamily::Bvp1 { delta, .. } => (Some(gamma(delta, 1.0)?), None, None),
            BivariateFamily::Bvp2 { delta, delta_y, .. } => {
                (Some(gamma(delta, 1.0)?), None, Some(gamma(delta_y, 1.0)?))
            }
            BivariateFamily::Bvp3 {
                delta,
                delta_x,
                delta_y,
                ..
            } => (
                Some(gamma(delta, 1.0)?),
                Some(gamma(delta_x, 1.0)?),
                Some(gamma(delta_y, 1.0)?),
            ),
        };
        Ok(PairSampler {
            family: *family,
            g,
            gx,
            gy,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let f = self.family.frame();
        match self.family {
            BivariateFamily::Normal { rho, .. } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let zy = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                (f.mu_x + f.sigma_x * z1, f.mu_y + f.sigma_y * zy)
            }
            BivariateFamily::EllipticalT { sigma_xy, nu, .. } => {
                let rho = sigma_xy / (f.sigma_x * f.sigma_y);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let w = self.g.as_ref().expect("chi-square").sample(rng);
                let s = (w / nu).sqrt();
                let zy = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                (f.mu_x + f.sigma_x * z1 / s, f.mu_y + f.sigma_y * zy / s)
            }
            _ => {
                let ex: f64 = rng.sample(Exp1);
                let ey: f64 = rng.sample(Exp1);
                let g = self.g.as_ref().expect("background gamma").sample(rng);
                let gx = self.gx.as_ref().map_or(0.0, |d| d.sample(rng));
                let gy = self.gy.as_ref().map_or(0.0, |d| d.sample(rng));
                (
                    f.mu_x + f.sigma_x * ex / (gx + g),
                    f.mu_y + f.sigma_y * ey / (gy + g),
                )
            }
        }
    }
}

impl fmt::Display for BivariateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "family={}", self.tag())?;
        for (k, v) in self.params() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Parses a `key=value` block (whitespace- or newline-separated, `#`
/// comments) that must contain `family=<tag>`.
impl FromStr for BivariateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tag = None;
        let mut params = BTreeMap::new();
        for line in s.lines() {
            let line = line.split('#').next().unwrap_or("");
            for item in line.split_whitespace() {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))?;
                let k = k.trim().replace('-', "_");
                if k == "family" {
                    tag = Some(v.trim().to_string());
                    continue;
                }
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number for {k}: {v:?}")))?;
                if params.insert(k.clone(), v).is_some() {
                    return Err(Error::Parse(format!("parameter {k} given twice")));
                }
            }
        }
        let tag = tag.ok_or_else(|| Error::Parse("missing family=<tag>".into()))?;
        BivariateFamily::from_params(&tag, &params)
    }
}
