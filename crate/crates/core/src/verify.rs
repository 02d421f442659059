//! Named numerical self-checks, grouped into suites, for the `verify` command.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::distributions::{BivariateFamily, Frame, MarginLaw, ParetoIIMargin};
use crate::error::{Error, Result};
use crate::gini::{self, Bootstrap, DConvention};
use crate::oracle;
use crate::quad::QuadratureSpec;
use crate::specfun::{self, HypergeometricSpec};
use crate::weights::WeightFunction;
use crate::wipm::{self, Orientation, Portfolio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Specfun,
    Distributions,
    Gini,
    Wipm,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Specfun => "specfun",
            Suite::Distributions => "distributions",
            Suite::Gini => "gini",
            Suite::Wipm => "wipm",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "specfun" => Ok(Suite::Specfun),
            "distributions" => Ok(Suite::Distributions),
            "gini" => Ok(Suite::Gini),
            "wipm" => Ok(Suite::Wipm),
            "all" => Ok(Suite::All),
            _ => Err(Error::Parse(format!(
                "unknown suite {s:?} (expected specfun, distributions, gini, wipm, all)"
            ))),
        }
    }
}

/// `|got - want| <= tol` is a pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub got: f64,
    pub want: f64,
    pub tol: f64,
}

pub struct Check {
    pub name: &'static str,
    pub suite: Suite,
    pub run: fn() -> Result<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub suite: Suite,
    pub passed: bool,
    pub got: Option<f64>,
    pub want: Option<f64>,
    pub tol: Option<f64>,
    pub error: Option<String>,
}

fn cmp(got: f64, want: f64, tol: f64) -> Result<Comparison> {
    Ok(Comparison { got, want, tol })
}

fn std() -> Frame {
    Frame::standard()
}

fn gauss_2f1(c: f64) -> Result<Comparison> {
    let spec = HypergeometricSpec::new(vec![2.0, 1.0], vec![c], 1.0)?;
    cmp(specfun::hyp_pfq(&spec, 1e-12)?, (c - 1.0) / (c - 3.0), 1e-9)
}

fn quick_boot() -> Bootstrap {
    Bootstrap {
        resamples: 50,
        seed: 42,
    }
}

/// Sample mean of `n` BVP1 draws against the margin mean, tolerance 3 SE.
fn sampler_mean() -> Result<Comparison> {
    let f = BivariateFamily::bvp1(std(), 3.0)?;
    let s = f.sample(200_000, 42)?;
    let n = s.len() as f64;
    let m = s.xs().iter().sum::<f64>() / n;
    let se = (f.margin_x().variance()? / n).sqrt();
    cmp(m, f.margin_x().mean()?, 3.0 * se)
}

fn empirical_bvp2() -> Result<Comparison> {
    let f = BivariateFamily::bvp2(std(), 2.1, 0.5254)?;
    let w = WeightFunction::power(1.0)?;
    let s = f.sample(200_000, 42)?;
    let r = gini::empirical_cw_with(&s, &w, &quick_boot())?;
    let se = r.std_error.unwrap_or(0.0);
    cmp(r.value, gini::closed_cw(&f, &w)?.value, 3.0 * se)
}

fn beta_reduction() -> Result<Comparison> {
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0, 3.5] {
        for d in [1.5, 2.1, 4.0] {
            let p = gini::bvp2_cw_power(d, d + 0.5254, a)?;
            let b = gini::bvp2_cw_beta(d, d + 0.5254, a, 1.0)?;
            worst = worst.max((p - b).abs());
        }
    }
    cmp(worst, 0.0, 1e-10)
}

fn cov_vs_quad(delta: f64, w: WeightFunction) -> Result<Comparison> {
    let m = ParetoIIMargin::standard(delta)?;
    let closed = gini::cov_x_weighted(&m, &w)?;
    let quad = oracle::quad_cov_margin(&MarginLaw::ParetoII(m), &w, &QuadratureSpec::default())?;
    cmp(closed, quad, 1e-7)
}

fn bvp3_vs_oracle() -> Result<Comparison> {
    let f = BivariateFamily::bvp3(std(), 1.25, 1.75, 1.25)?;
    let closed = gini::bvp3_gamma_closed(1.25, 1.75, 1.25, 1.0, DConvention::Raw)?;
    cmp(closed, oracle::quad2_bvp3_gamma(&f, 1.0, &QuadratureSpec::default())?, 1e-4)
}

fn wipm_identity_bvp2() -> Result<Comparison> {
    let f = BivariateFamily::bvp2(std(), 2.1, 0.5254)?;
    let w = WeightFunction::power(2.0)?;
    let s = f.sample(200_000, 42)?;
    let p = wipm::gini_premium_with(&s, &w, Orientation::Survival, &quick_boot())?;
    let rhs = wipm::gini_wipm_rhs(&f, &w)?;
    cmp(p.premium, rhs.rhs.premium, 3.0 * p.std_error.unwrap_or(0.0))
}

fn allocation_gap() -> Result<Comparison> {
    let s = BivariateFamily::bvp1(std(), 3.0)?.sample(50_000, 42)?;
    let (xs, ys) = s.into_columns();
    let p = Portfolio::new(vec!["x".into(), "y".into()], vec![xs, ys])?;
    let r = wipm::allocate(&p, &WeightFunction::power(1.0)?)?;
    cmp(r.additivity_gap, 0.0, 1e-10)
}

pub fn checks() -> Vec<Check> {
    use Suite::*;
    vec![
        Check { name: "2f1_gauss_c4.5", suite: Specfun, run: || gauss_2f1(4.5) },
        Check { name: "2f1_gauss_c6", suite: Specfun, run: || gauss_2f1(6.0) },
        Check { name: "2f1_gauss_c10", suite: Specfun, run: || gauss_2f1(10.0) },
        Check {
            name: "3f2_reference_value",
            suite: Specfun,
            run: || {
                let spec = HypergeometricSpec::new(vec![1.5, 2.0, 1.0], vec![4.0, 5.0], 1.0)?;
                cmp(specfun::hyp_pfq(&spec, 1e-12)?, 1.210_189_327_433_504_1, 1e-10)
            },
        },
        Check {
            name: "inc_beta_power_reduction",
            suite: Specfun,
            run: || {
                let mut worst: f64 = 0.0;
                for t in [0.01, 0.3, 0.77, 0.99] {
                    worst = worst.max((specfun::reg_inc_beta(t, 2.7, 1.0)? - t.powf(2.7)).abs());
                }
                cmp(worst, 0.0, 1e-10)
            },
        },
        Check {
            name: "inc_beta_reflection",
            suite: Specfun,
            run: || {
                let mut worst: f64 = 0.0;
                for t in [0.05, 0.4, 0.9] {
                    let l = specfun::reg_inc_beta(t, 2.0, 3.5)?;
                    let r = 1.0 - specfun::reg_inc_beta(1.0 - t, 3.5, 2.0)?;
                    worst = worst.max((l - r).abs());
                }
                cmp(worst, 0.0, 1e-10)
            },
        },
        Check {
            name: "pareto_quantile_example",
            suite: Distributions,
            run: || cmp(ParetoIIMargin::standard(2.0)?.quantile(0.75)?, 1.0, 1e-14),
        },
        Check {
            name: "pareto_mean_example",
            suite: Distributions,
            run: || cmp(ParetoIIMargin::new(3.0, 2.0, 5.0)?.mean()?, 3.5, 1e-14),
        },
        Check {
            name: "bvp2_joint_ddf_example",
            suite: Distributions,
            run: || {
                let f = BivariateFamily::bvp2(std(), 2.1, 0.5254)?;
                cmp(f.joint_ddf(1.0, 1.0)?, 3f64.powf(-2.1) * 2f64.powf(-0.5254), 1e-14)
            },
        },
        Check {
            name: "bvp1_regression_slope",
            suite: Distributions,
            run: || cmp(BivariateFamily::bvp1(std(), 5.87)?.regression_line()?.beta, 1.0 / 5.87, 1e-14),
        },
        Check {
            name: "bvp2_pearson_closed",
            suite: Distributions,
            run: || cmp(BivariateFamily::bvp2(std(), 2.1, 0.5254)?.pearson_closed_form()?, 0.1703, 5e-4),
        },
        Check {
            name: "bvp3_density_mass",
            suite: Distributions,
            run: || {
                let f = BivariateFamily::bvp3(std(), 1.0, 2.0, 1.5)?;
                cmp(oracle::bvp3_density_mass(&f, &QuadratureSpec::default())?, 1.0, 1e-6)
            },
        },
        Check { name: "sampler_margin_mean", suite: Distributions, run: sampler_mean },
        Check {
            name: "cw_normal_closed",
            suite: Gini,
            run: || {
                let f = BivariateFamily::normal(std(), 0.37)?;
                cmp(gini::closed_cw(&f, &WeightFunction::beta_cdf(2.0, 3.0)?)?.value, 0.37, 0.0)
            },
        },
        Check {
            name: "cw_bvp1_closed",
            suite: Gini,
            run: || {
                let f = BivariateFamily::bvp1(std(), 5.87)?;
                cmp(gini::closed_cw(&f, &WeightFunction::power(2.0)?)?.value, 0.17036, 5e-6)
            },
        },
        Check {
            name: "cw_bvp2_power_closed",
            suite: Gini,
            run: || {
                let f = BivariateFamily::bvp2(std(), 2.1, 0.5254)?;
                cmp(gini::closed_cw(&f, &WeightFunction::power(1.0)?)?.value, 0.35847, 1e-5)
            },
        },
        Check { name: "bvp2_beta_reduction_b1", suite: Gini, run: beta_reduction },
        Check {
            name: "regression_route_bvp2_beta22",
            suite: Gini,
            run: || {
                let f = BivariateFamily::bvp2(std(), 2.1, 0.5254)?;
                let w = WeightFunction::beta_cdf(2.0, 2.0)?;
                cmp(gini::cw_via_regression(&f, &w)?.value, gini::closed_cw(&f, &w)?.value, 1e-9)
            },
        },
        Check { name: "cov_xx_vs_quadrature", suite: Gini, run: || cov_vs_quad(2.0, WeightFunction::power(1.0)?) },
        Check {
            name: "cov_xx2_vs_quadrature",
            suite: Gini,
            run: || cov_vs_quad(3.0, WeightFunction::beta_cdf(2.0, 3.0)?),
        },
        Check { name: "bvp3_closed_vs_oracle", suite: Gini, run: bvp3_vs_oracle },
        Check {
            name: "bvp3_limit_bvp1",
            suite: Gini,
            run: || cmp(gini::bvp3_gamma_closed(3.0, 1e-6, 1e-6, 1.0, DConvention::Raw)?, 1.0 / 3.0, 1e-3),
        },
        Check {
            name: "lambda_identity",
            suite: Gini,
            run: || {
                let m = MarginLaw::ParetoII(ParetoIIMargin::standard(3.0)?);
                cmp(gini::lambda_w(&m, &WeightFunction::identity())?, 1.0, 1e-7)
            },
        },
        Check {
            name: "cw_self_is_one",
            suite: Gini,
            run: || {
                let s = BivariateFamily::bvp1(std(), 2.5)?.sample(10_000, 42)?;
                cmp(gini::cw_value(s.xs(), s.xs(), &WeightFunction::power(2.0)?)?, 1.0, 0.0)
            },
        },
        Check { name: "empirical_cw_bvp2", suite: Gini, run: empirical_bvp2 },
        Check {
            name: "gini_premium_pareto_self",
            suite: Wipm,
            run: || {
                // π = σ/(δ(γ+1) - 1) above μ; plotting-position sample of the margin
                let m = ParetoIIMargin::standard(3.0)?;
                let n = 200_000;
                let xs: Vec<f64> = (1..=n)
                    .map(|i| m.quantile(i as f64 / (n as f64 + 1.0)))
                    .collect::<Result<_>>()?;
                let w = WeightFunction::power(1.0)?;
                cmp(wipm::gini_premium_value(&xs, &xs, &w, Orientation::Survival)?, 0.2, 1e-3)
            },
        },
        Check {
            name: "wipm_normal_specialization",
            suite: Wipm,
            run: || {
                let f = BivariateFamily::normal(Frame::new(1.0, 2.0, 1.5, 0.5)?, 0.5)?;
                let d = wipm::gini_wipm_rhs(&f, &WeightFunction::power(2.0)?)?;
                cmp(d.rhs.premium, d.specialized_rhs.unwrap_or(f64::NAN), 1e-9)
            },
        },
        Check { name: "wipm_identity_bvp2", suite: Wipm, run: wipm_identity_bvp2 },
        Check { name: "allocation_additivity", suite: Wipm, run: allocation_gap },
    ]
}

/// Runs the checks belonging to `suite` in table order.
pub fn run_checks(checks: &[Check], suite: Suite) -> Vec<CheckOutcome> {
    checks
        .iter()
        .filter(|c| suite.includes(c.suite))
        .map(|c| match (c.run)() {
            Ok(Comparison { got, want, tol }) => CheckOutcome {
                name: c.name.to_string(),
                suite: c.suite,
                passed: (got - want).abs() <= tol,
                got: Some(got),
                want: Some(want),
                tol: Some(tol),
                error: None,
            },
            Err(e) => CheckOutcome {
                name: c.name.to_string(),
                suite: c.suite,
                passed: false,
                got: None,
                want: None,
                tol: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}
