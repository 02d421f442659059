//! Premium principles built on weighted expectations, the Gini form of the
//! weighted insurance pricing model, and capital allocation against an
//! aggregate risk.

use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::BivariateFamily;
use crate::error::{Error, Result};
use crate::gini::{self, Bootstrap, PositionTable, RankedColumn};
use crate::sample::PairedSample;
use crate::weights::WeightFunction;

/// Non-decreasing value function `v` applied to the raw reference risk.
#[derive(Clone)]
pub enum ValueFunction {
    Constant,
    Identity,
    /// `exp(θ y)` (Esscher-type).
    Exponential { theta: f64 },
    /// `1{y > threshold}`.
    Indicator { threshold: f64 },
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ValueFunction {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ValueFunction::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            ValueFunction::Constant => 1.0,
            ValueFunction::Identity => y,
            ValueFunction::Exponential { theta } => (theta * y).exp(),
            ValueFunction::Indicator { threshold } => {
                if y > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            ValueFunction::Custom { f, .. } => f(y),
        }
    }
}

impl fmt::Debug for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValueFunction({self})")
    }
}

impl fmt::Display for ValueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueFunction::Constant => write!(f, "constant"),
            ValueFunction::Identity => write!(f, "identity"),
            ValueFunction::Exponential { theta } => write!(f, "exp:{theta}"),
            ValueFunction::Indicator { threshold } => write!(f, "indicator:{threshold}"),
            ValueFunction::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PremiumMethod {
    Empirical,
    ClosedIdentity,
}

/// Which side of the rank scale the weight is applied to.
///
/// `Survival` prices with `w(1 - F_Y(Y))`, which puts the most weight on the
/// smallest values of `Y`; comonotone risks then get a non-positive loading.
/// `Dual` prices with `w*(F_Y(Y)) = 1 - w(1 - F_Y(Y))`, increasing in `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Survival,
    Dual,
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Survival => "survival",
            Orientation::Dual => "dual",
        })
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "survival" => Ok(Orientation::Survival),
            "dual" => Ok(Orientation::Dual),
            _ => Err(Error::Parse(format!(
                "unknown orientation {s:?} (expected survival or dual)"
            ))),
        }
    }
}

/// A premium split into the expected loss and a loading; `premium` is stored
/// as `base + loading`, so the decomposition holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumResult {
    pub premium: f64,
    pub base: f64,
    pub loading: f64,
    pub method: PremiumMethod,
    pub std_error: Option<f64>,
}

impl PremiumResult {
    pub fn new(base: f64, premium: f64, method: PremiumMethod, std_error: Option<f64>) -> Self {
        let loading = premium - base;
        PremiumResult {
            premium: base + loading,
            base,
            loading,
            method,
            std_error,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `Σ x_i v(y_i) / Σ v(y_i)`.
pub fn weighted_premium(s: &PairedSample, v: &ValueFunction) -> Result<PremiumResult> {
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &y) in s.xs().iter().zip(s.ys()) {
        let vy = v.eval(y);
        num += x * vy;
        den += vy;
    }
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::Degenerate(format!(
            "value function {v} has non-positive total weight {den} on the sample"
        )));
    }
    Ok(PremiumResult::new(
        mean(s.xs()),
        num / den,
        PremiumMethod::Empirical,
        None,
    ))
}

/// Weight at survival plotting position `a/(n+1)` under the orientation.
fn orientation_weight(w: &WeightFunction, orient: Orientation, n: usize) -> impl Fn(u64) -> f64 + Sync + '_ {
    let m = (n + 1) as f64;
    move |a| {
        let v = w.eval_unchecked(a as f64 / m);
        match orient {
            Orientation::Survival => v,
            Orientation::Dual => 1.0 - v,
        }
    }
}

fn check_varies(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|&y| y == v[0]) {
        Err(Error::Degenerate(format!("{what} is constant; ranks carry no information")))
    } else {
        Ok(())
    }
}

/// Rank-based `Π_{G,w}[X, Y]` without a standard error.
pub fn gini_premium_value(xs: &[f64], ys: &[f64], w: &WeightFunction, orient: Orientation) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need two columns of equal length >= 3, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    check_varies(ys, "reference risk")?;
    let weights = gini::survival_block_means(ys, orientation_weight(w, orient, ys.len()));
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &v) in xs.iter().zip(&weights) {
        num += x * v;
        den += v;
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!("weight {w} vanishes on every rank")));
    }
    Ok(num / den)
}

/// `Π_{G,w}[X, Y] = E[X w(1 - F_Y(Y))] / E[w(1 - F_Y(Y))]` from ranks, with a
/// bootstrap standard error.
pub fn gini_premium(s: &PairedSample, w: &WeightFunction) -> Result<PremiumResult> {
    gini_premium_with(s, w, Orientation::default(), &Bootstrap::default())
}

pub fn gini_premium_with(
    s: &PairedSample,
    w: &WeightFunction,
    orient: Orientation,
    boot: &Bootstrap,
) -> Result<PremiumResult> {
    let (xs, ys) = (s.xs(), s.ys());
    let premium = gini_premium_value(xs, ys, w, orient)?;
    let std_error = bootstrap_premium(xs, ys, w, orient, boot)?;
    Ok(PremiumResult::new(
        mean(xs),
        premium,
        PremiumMethod::Empirical,
        std_error,
    ))
}

fn bootstrap_premium(
    xs: &[f64],
    ys: &[f64],
    w: &WeightFunction,
    orient: Orientation,
    boot: &Bootstrap,
) -> Result<Option<f64>> {
    if boot.resamples < 2 {
        return Ok(None);
    }
    let n = xs.len();
    let table = PositionTable::new(n, orientation_weight(w, orient, n));
    let cy = RankedColumn::new(ys);
    gini::bootstrap_se(n, boot, |counts| {
        let mut a = vec![0.0; n];
        cy.resample_weights(counts, |cum, m| table.survival_block(cum, m), &mut a);
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            if counts[i] > 0 {
                let v = counts[i] as f64 * a[i];
                num += xs[i] * v;
                den += v;
            }
        }
        (den > 0.0).then(|| num / den)
    })
}

/// Right-hand side of the Gini WIPM identity with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WipmDecomposition {
    pub rhs: PremiumResult,
    /// `C_w[X, Y]`
    pub cw: f64,
    /// `Cov[X, w(1 - F_X(X))] / Cov[Y, w(1 - F_Y(Y))]`
    pub cov_ratio: f64,
    /// `π_{G,w}[Y] - E[Y]`
    pub excess_y: f64,
    /// Slope of the elliptical specialisation, `ρ σ_X/σ_Y` or `σ_XY/σ_Y²`.
    pub slope: Option<f64>,
    pub specialized_rhs: Option<f64>,
}

/// `E[X] + C_w · Cov_X/Cov_Y · (π_{G,w}[Y] - E[Y])` from population quantities.
/// Requires a linear regression of X on Y.
pub fn gini_wipm_rhs(f: &BivariateFamily, w: &WeightFunction) -> Result<WipmDecomposition> {
    if let BivariateFamily::Bvp3 { .. } = f {
        return Err(Error::NoLinearRegression(
            "the Gini WIPM identity assumes E[X|Y] linear in Y; BVP3 violates it".into(),
        ));
    }
    f.regression_line()?;
    let (mx, my) = (f.margin_x(), f.margin_y());
    let ex = mx.mean()?;
    my.mean()?;
    let cw = gini::closed_cw(f, w)?.value;
    let cov_x = gini::margin_weighted_cov(&mx, w)?;
    let cov_y = gini::margin_weighted_cov(&my, w)?;
    // E[Y w(1-F_Y)] = Cov + E[Y] E[w], and E[w(1-F_Y)] = ∫ w
    let excess_y = cov_y / w.mean();
    let cov_ratio = cov_x / cov_y;
    let rhs = ex + cw * cov_ratio * excess_y;
    let frame = f.frame();
    let slope = match *f {
        BivariateFamily::Normal { rho, .. } => Some(rho * frame.sigma_x / frame.sigma_y),
        BivariateFamily::EllipticalT { sigma_xy, .. } => Some(sigma_xy / (frame.sigma_y * frame.sigma_y)),
        _ => None,
    };
    Ok(WipmDecomposition {
        rhs: PremiumResult::new(ex, rhs, PremiumMethod::ClosedIdentity, None),
        cw,
        cov_ratio,
        excess_y,
        specialized_rhs: slope.map(|b| ex + b * excess_y),
        slope,
    })
}

/// Sample version of [`gini_wipm_rhs`] assembled from rank-based pieces.
pub fn gini_wipm_rhs_sample(s: &PairedSample, w: &WeightFunction) -> Result<WipmDecomposition> {
    let (xs, ys) = (s.xs(), s.ys());
    let n = xs.len();
    let cw = gini::cw_value(xs, ys, w)?;
    let cov = |v: &[f64]| {
        let a = gini::survival_weights(v, w);
        let m = mean(v);
        v.iter()
            .zip(&a)
            .map(|(&x, &ai)| (x - m) * ai)
            .sum::<f64>()
            / n as f64
    };
    let cov_x = cov(xs);
    let cov_y = cov(ys);
    if cov_y == 0.0 {
        return Err(Error::Degenerate("reference risk has zero weighted covariance".into()));
    }
    let ex = mean(xs);
    let excess_y = gini_premium_value(ys, ys, w, Orientation::Survival)? - mean(ys);
    let cov_ratio = cov_x / cov_y;
    Ok(WipmDecomposition {
        rhs: PremiumResult::new(ex, ex + cw * cov_ratio * excess_y, PremiumMethod::Empirical, None),
        cw,
        cov_ratio,
        excess_y,
        slope: None,
        specialized_rhs: None,
    })
}

/// `E[X] + ρ √(Var X / Var Y) (π_v[Y] - E[Y])` on a sample. Meaningless for
/// infinite-variance populations, where the sample variances do not settle.
pub fn classical_wipm_rhs(s: &PairedSample, v: &ValueFunction) -> Result<PremiumResult> {
    let (xs, ys) = (s.xs(), s.ys());
    let rho = gini::pearson_value(xs, ys)?;
    let var = |a: &[f64]| {
        let m = mean(a);
        a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (a.len() as f64 - 1.0)
    };
    let swapped = s.swapped();
    let pi_y = weighted_premium(&swapped, v)?;
    let (ex, ey) = (mean(xs), mean(ys));
    let rhs = ex + rho * (var(xs) / var(ys)).sqrt() * (pi_y.premium - ey);
    Ok(PremiumResult::new(ex, rhs, PremiumMethod::Empirical, None))
}

/// Named loss columns of equal length; the aggregate is their row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Portfolio {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidParameter(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if columns.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "portfolio needs at least 2 columns, got {}",
                columns.len()
            )));
        }
        let n = columns[0].len();
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "portfolio needs at least 3 rows, got {n}"
            )));
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "column {name:?} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|x| !x.is_finite()) {
                return Err(Error::Degenerate(format!(
                    "column {name:?} has a non-finite value at row {i}"
                )));
            }
        }
        Ok(Portfolio { names, columns })
    }

    /// One column per risk, header row with names.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!("row {}: bad number {field:?} in column {:?}", row + 1, names[j]))
                })?;
                columns[j].push(v);
            }
        }
        Portfolio::new(names, columns)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn aggregate(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.columns.iter().map(|c| c[i]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub column: String,
    #[serde(flatten)]
    pub result: PremiumResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub allocations: Vec<Allocation>,
    pub aggregate: PremiumResult,
    /// `Σ allocations - aggregate premium`; zero up to rounding.
    pub additivity_gap: f64,
}

/// Prices every column against the aggregate `S`.
pub fn allocate(p: &Portfolio, w: &WeightFunction) -> Result<AllocationReport> {
    allocate_with(p, w, Orientation::default())
}

pub fn allocate_with(p: &Portfolio, w: &WeightFunction, orient: Orientation) -> Result<AllocationReport> {
    let s = p.aggregate();
    check_varies(&s, "aggregate risk")?;
    let v = gini::survival_block_means(&s, orientation_weight(w, orient, s.len()));
    let den: f64 = v.iter().sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!("weight {w} vanishes on every rank")));
    }
    let price = |col: &[f64]| col.iter().zip(&v).map(|(x, vi)| x * vi).sum::<f64>() / den;
    let allocations: Vec<Allocation> = p
        .names
        .par_iter()
        .zip(p.columns.par_iter())
        .map(|(name, col)| Allocation {
            column: name.clone(),
            result: PremiumResult::new(mean(col), price(col), PremiumMethod::Empirical, None),
        })
        .collect();
    let aggregate = PremiumResult::new(mean(&s), price(&s), PremiumMethod::Empirical, None);
    let total: f64 = allocations.iter().map(|a| a.result.premium).sum();
    Ok(AllocationReport {
        additivity_gap: total - aggregate.premium,
        allocations,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Frame, ParetoIIMargin};

    fn sample(n: usize, seed: u64) -> PairedSample {
        BivariateFamily::bvp1(Frame::standard(), 3.0)
            .unwrap()
            .sample(n, seed)
            .unwrap()
    }

    #[test]
    fn weighted_premium_examples() {
        let s = sample(500, 1);
        let p = weighted_premium(&s, &ValueFunction::Constant).unwrap();
        assert!((p.premium - mean(s.xs())).abs() < 1e-12);
        assert_eq!(p.premium, p.base + p.loading);
        let same = PairedSample::from_columns(s.xs().to_vec(), s.xs().to_vec()).unwrap();
        let p = weighted_premium(&same, &ValueFunction::Identity).unwrap();
        assert!(p.loading >= 0.0);
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [10.0, 20.0, 30.0, 40.0];
        let s = PairedSample::from_columns(xs.to_vec(), ys.to_vec()).unwrap();
        let p = weighted_premium(&s, &ValueFunction::Indicator { threshold: 25.0 }).unwrap();
        assert_eq!(p.premium, 3.5);
        let p = weighted_premium(&s, &ValueFunction::Indicator { threshold: 99.0 });
        assert!(matches!(p, Err(Error::Degenerate(_))));
    }

    #[test]
    fn gini_premium_of_pareto_margin() {
        // π = σ/(δ(γ+1) - 1) above the location for Y = X
        let m = ParetoIIMargin::standard(3.0).unwrap();
        let n = 400_000;
        let xs: Vec<f64> = (1..=n)
            .map(|i| m.quantile(i as f64 / (n as f64 + 1.0)).unwrap())
            .collect();
        let p = gini_premium_value(&xs, &xs, &WeightFunction::power(1.0).unwrap(), Orientation::Survival)
            .unwrap();
        assert!((p - 1.0 / 5.0).abs() < 1e-4, "{p}");
    }

    #[test]
    fn orientation_flips_loading_sign() {
        let s = sample(5000, 3);
        let w = WeightFunction::power(2.0).unwrap();
        let surv = gini_premium_with(&s, &w, Orientation::Survival, &Bootstrap { resamples: 0, seed: 0 })
            .unwrap();
        let dual =
            gini_premium_with(&s, &w, Orientation::Dual, &Bootstrap { resamples: 0, seed: 0 }).unwrap();
        assert!(surv.loading < 0.0);
        assert!(dual.loading > 0.0);
        assert_eq!(surv.std_error, None);
    }

    #[test]
    fn wipm_rhs_independent_normal_is_mean() {
        let f = BivariateFamily::normal(Frame::new(2.0, 1.0, 1.0, 3.0).unwrap(), 0.0).unwrap();
        let d = gini_wipm_rhs(&f, &WeightFunction::power(2.0).unwrap()).unwrap();
        assert_eq!(d.rhs.premium, 2.0);
        let t = BivariateFamily::bvp3(Frame::standard(), 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            gini_wipm_rhs(&t, &WeightFunction::identity()),
            Err(Error::NoLinearRegression(_))
        ));
    }

    #[test]
    fn wipm_rhs_normal_specialisation_agrees() {
        let f = BivariateFamily::normal(Frame::new(2.0, 1.0, 1.5, 3.0).unwrap(), 0.6).unwrap();
        let d = gini_wipm_rhs(&f, &WeightFunction::beta_cdf(2.0, 2.0).unwrap()).unwrap();
        assert!((d.rhs.premium - d.specialized_rhs.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn wipm_rhs_sample_self_pair_equals_premium() {
        let s = sample(3000, 5);
        let same = PairedSample::from_columns(s.xs().to_vec(), s.xs().to_vec()).unwrap();
        let w = WeightFunction::power(2.0).unwrap();
        let d = gini_wipm_rhs_sample(&same, &w).unwrap();
        let p = gini_premium_value(same.xs(), same.ys(), &w, Orientation::Survival).unwrap();
        assert!((d.rhs.premium - p).abs() < 1e-12);
        assert_eq!(d.cw, 1.0);
    }

    #[test]
    fn allocation_examples() {
        let s = sample(1000, 11);
        let w = WeightFunction::power(1.0).unwrap();
        let p = Portfolio::new(
            vec!["a".into(), "b".into()],
            vec![s.xs().to_vec(), s.xs().to_vec()],
        )
        .unwrap();
        let r = allocate(&p, &w).unwrap();
        assert_eq!(r.allocations[0].result.premium, r.allocations[1].result.premium);
        assert!((r.allocations[0].result.premium - r.aggregate.premium / 2.0).abs() < 1e-12);
        let p = Portfolio::new(
            vec!["x".into(), "c".into()],
            vec![s.xs().to_vec(), vec![2.5; 1000]],
        )
        .unwrap();
        let r = allocate(&p, &w).unwrap();
        assert!((r.allocations[1].result.premium - 2.5).abs() < 1e-12);
        let p = Portfolio::new(vec!["x".into(), "y".into()], vec![s.xs().to_vec(), s.ys().to_vec()])
            .unwrap();
        let r = allocate(&p, &w).unwrap();
        assert!(r.additivity_gap.abs() < 1e-10);
        let bad = Portfolio::new(vec!["x".into(), "y".into()], vec![vec![1.0, 2.0, 3.0], vec![1.0, f64::NAN, 2.0]]);
        assert!(matches!(bad, Err(Error::Degenerate(m)) if m.contains("\"y\"")));
    }

    #[test]
    fn portfolio_csv() {
        let text = "# comment\nx, y\n1,2\n3,4\n5,7\n";
        let p = Portfolio::from_csv(text.as_bytes()).unwrap();
        assert_eq!(p.names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(p.aggregate(), vec![3.0, 7.0, 12.0]);
        assert!(Portfolio::from_csv("x,y\n1,a\n2,3\n4,5\n".as_bytes()).is_err());
    }
}
