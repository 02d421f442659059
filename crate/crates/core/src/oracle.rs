//! Brute-force reference computations used to check the closed forms:
//! quantile-domain quadrature, nested 2-D quadrature over the BVP3 density,
//! and replicated Monte-Carlo estimates.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{bvp3_density, BivariateFamily, MarginLaw};
use crate::error::{Error, Result};
use crate::gini;
use crate::quad::{self, QuadratureSpec};
use crate::weights::WeightFunction;
use crate::wipm;

/// `Cov[X, g(1 - F_X(X))] = ∫_0^1 Q̄(t) (g(t) - ḡ) dt`, where `Q̄` is the upper
/// quantile (`P[X > Q̄(t)] = t`) and `ḡ = ∫ g`. Heavy right tails become an
/// integrable singularity at `t = 0`.
pub fn quad_cov_fn<G: Fn(f64) -> f64>(m: &MarginLaw, g: G, q: &QuadratureSpec) -> Result<f64> {
    m.mean()?;
    let g_bar = quad::integrate(&g, 0.0, 1.0, &q.tightened(1e-3))?.value;
    let est = quad::integrate(|t| m.upper_quantile(t) * (g(t) - g_bar), 0.0, 1.0, q)?;
    Ok(est.value)
}

/// `Cov[X, w(1 - F_X(X))]` by quantile-domain quadrature.
pub fn quad_cov_margin(m: &MarginLaw, w: &WeightFunction, q: &QuadratureSpec) -> Result<f64> {
    quad_cov_fn(m, |t| w.eval_unchecked(t), q)
}

fn bvp3_params(f: &BivariateFamily) -> Result<(f64, f64, f64)> {
    match *f {
        BivariateFamily::Bvp3 {
            delta,
            delta_x,
            delta_y,
            ..
        } => Ok((delta, delta_x, delta_y)),
        _ => Err(Error::InvalidParameter(format!(
            "BVP3 oracle needs a bvp3 family, got {}",
            f.tag()
        ))),
    }
}

/// `∫∫ h(x, y) p(x, y) dx dy` over the positive quadrant for the standardized
/// BVP3 density, by nested adaptive quadrature on the mapped unit square.
fn bvp3_double_integral<H>(f: &BivariateFamily, h: H, q: &QuadratureSpec) -> Result<f64>
where
    H: Fn(f64, f64) -> f64,
{
    let (d, dx, dy) = bvp3_params(f)?;
    let terms = f.bvp3_pdf_terms()?;
    let inner_spec = q.tightened(1e-2);
    let failure = RefCell::new(None);
    let outer = quad::integrate_half_line(
        |y| {
            let inner = quad::integrate_half_line(
                |x| h(x, y) * bvp3_density(&terms, d, dx, dy, x, y),
                &inner_spec,
            );
            match inner {
                Ok(e) => e.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        q,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer.value)
}

/// Total mass of the standardized BVP3 density.
pub fn bvp3_density_mass(f: &BivariateFamily, q: &QuadratureSpec) -> Result<f64> {
    bvp3_double_integral(f, |_, _| 1.0, q)
}

/// `E[(X - μ_X)(1 - F_Y(Y))^γ] / σ_X` for a BVP3 family.
pub fn quad2_bvp3_moment(f: &BivariateFamily, gamma: f64, q: &QuadratureSpec) -> Result<f64> {
    let (_, dy_star) = f.marginal_tail_indices().expect("bvp3 family");
    let (dx_star, _) = f.marginal_tail_indices().expect("bvp3 family");
    if dx_star <= 1.0 {
        return Err(Error::InfiniteMoment(format!(
            "BVP3 oracle needs tail index of X above 1, got {dx_star}"
        )));
    }
    bvp3_double_integral(f, |x, y| x * (1.0 + y).powf(-dy_star * gamma), q)
}

/// Oracle value of `Γ_γ` for a BVP3 family: the 2-D moment combined with
/// `E[X - μ_X] = σ_X/(δ_X* - 1)`, `E[(1 - F_X)^γ] = 1/(γ+1)` and the margin
/// covariance from [`quad_cov_margin`].
pub fn quad2_bvp3_gamma(f: &BivariateFamily, gamma: f64, q: &QuadratureSpec) -> Result<f64> {
    let m = quad2_bvp3_moment(f, gamma, q)?;
    let (dx_star, _) = f.marginal_tail_indices().expect("bvp3 family");
    let num = m - 1.0 / ((dx_star - 1.0) * (gamma + 1.0));
    let margin = MarginLaw::ParetoII(crate::distributions::ParetoIIMargin::standard(dx_star)?);
    let den = quad_cov_margin(&margin, &WeightFunction::power(gamma)?, q)?;
    Ok(num / den)
}

/// Statistic evaluated on each Monte-Carlo replication.
#[derive(Debug, Clone, PartialEq)]
pub enum McStatistic {
    Cw(WeightFunction),
    Pearson,
    GiniPremium(WeightFunction),
    /// `Cov[X, w(1 - F_X(X))]` using the family's exact X margin.
    MarginCov(WeightFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub replications: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` derived from the master seed.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    splitmix64(seed ^ splitmix64(rep as u64))
}

fn evaluate(f: &BivariateFamily, stat: &McStatistic, xs: &[f64], ys: &[f64]) -> Result<f64> {
    match stat {
        McStatistic::Cw(w) => gini::cw_value(xs, ys, w),
        McStatistic::Pearson => gini::pearson_value(xs, ys),
        McStatistic::GiniPremium(w) => wipm::gini_premium_value(xs, ys, w, wipm::Orientation::Survival),
        McStatistic::MarginCov(w) => {
            let m = f.margin_x();
            let n = xs.len() as f64;
            let x_bar = xs.iter().sum::<f64>() / n;
            let s: f64 = xs
                .iter()
                .map(|&x| (x - x_bar) * w.eval_unchecked(m.ddf(x)))
                .sum();
            Ok(s / (n - 1.0))
        }
    }
}

/// Mean and standard error of `stat` over independent replications of size
/// `n`. The standard error comes from the spread between replications.
pub fn mc_reference(
    f: &BivariateFamily,
    stat: &McStatistic,
    n: usize,
    seed: u64,
    replications: usize,
) -> Result<McEstimate> {
    if n < 1000 {
        return Err(Error::InvalidParameter(format!(
            "Monte-Carlo reference needs n >= 1000, got {n}"
        )));
    }
    if replications < 10 {
        return Err(Error::InvalidParameter(format!(
            "Monte-Carlo reference needs at least 10 replications, got {replications}"
        )));
    }
    let values: Vec<Result<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let (xs, ys) = f.sample_columns(n, replication_seed(seed, r))?;
            evaluate(f, stat, &xs, &ys)
        })
        .collect();
    let mut reps = Vec::with_capacity(replications);
    for (r, v) in values.into_iter().enumerate() {
        match v {
            Ok(x) if x.is_finite() => reps.push(x),
            Ok(x) => {
                return Err(Error::Replication {
                    replication: r,
                    source: Box::new(Error::Degenerate(format!("non-finite statistic {x}"))),
                })
            }
            Err(e) => {
                return Err(Error::Replication {
                    replication: r,
                    source: Box::new(e),
                })
            }
        }
    }
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let std_error = gini::std_dev(&reps) / (reps.len() as f64).sqrt();
    Ok(McEstimate {
        mean,
        std_error,
        replications: reps,
    })
}
