//! Weighted Gini correlation: the rank-based estimator, closed forms for the
//! supported families, the regression route and the lower-bound factor λ_w.
//!
//! Ranks are carried as integers `k = 2r` (twice the average rank), so the
//! weight arguments `(n + 1 - r)/(n + 1)` are formed from exact integers and
//! reflections such as `Y = -X` reproduce the same floating-point values.

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{BivariateFamily, MarginLaw, ParetoIIMargin};
use crate::error::{Error, Result};
use crate::oracle;
use crate::quad::QuadratureSpec;
use crate::sample::PairedSample;
use crate::specfun::{self, HypergeometricSpec};
use crate::weights::{WeightFunction, WeightKind};

/// How a correlation value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Empirical,
    ClosedForm,
    RegressionRoute,
    Oracle,
}

impl Method {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Empirical | Method::Oracle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Empirical => "empirical",
            Method::ClosedForm => "closed_form",
            Method::RegressionRoute => "regression_route",
            Method::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
    /// Weight description, `pearson` for the product-moment coefficient.
    pub weight: String,
    pub note: Option<String>,
}

impl CorrelationReport {
    fn exact(value: f64, method: Method, w: &WeightFunction) -> Self {
        CorrelationReport {
            value,
            method,
            std_error: None,
            weight: w.to_string(),
            note: None,
        }
    }
}

/// Nonparametric bootstrap settings for sample standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Bootstrap {
            resamples: 200,
            seed: 42,
        }
    }
}

fn sorted_order(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    order
}

/// Twice the average rank of each value (ranks start at 1).
pub fn twice_ranks(v: &[f64]) -> Vec<u64> {
    let order = sorted_order(v);
    let mut out = vec![0u64; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let k = (i + j + 1) as u64;
        for &idx in &order[i..j] {
            out[idx] = k;
        }
        i = j;
    }
    out
}

/// Average ranks, 1-based; ties share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    twice_ranks(v).into_iter().map(|k| k as f64 / 2.0).collect()
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Survival,
    Distribution,
}

/// Mean of `h(a)` over each tie block, where `a/(n+1)` is the plotting
/// position counted from the given side (`a = n + 1 - r` for survival,
/// `a = r` for distribution). Untied observations get `h` at their own
/// position. Block sums run in increasing `a`, so a reflected sample
/// reproduces the same sums bit for bit.
fn block_means(v: &[f64], side: Side, h: impl Fn(u64) -> f64) -> Vec<f64> {
    let n = v.len() as u64;
    let order = sorted_order(v);
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let (lo, hi) = match side {
            Side::Distribution => (i as u64 + 1, j as u64),
            Side::Survival => (n + 1 - j as u64, n - i as u64),
        };
        let value = if lo == hi {
            h(lo)
        } else {
            (lo..=hi).map(&h).sum::<f64>() / (hi - lo + 1) as f64
        };
        for &idx in &order[i..j] {
            out[idx] = value;
        }
        i = j;
    }
    out
}

fn plotting_weight(w: &WeightFunction, n: usize) -> impl Fn(u64) -> f64 + '_ {
    let m = (n + 1) as f64;
    move |a| w.eval_unchecked(a as f64 / m)
}

/// `w(1 - F̂)` per observation, up to a common affine change that cancels in
/// ratios of centred sums. The identity weight uses the integer form
/// `(n + 1) - 2r` so that reflected samples negate exactly.
fn survival_ratio_weights(v: &[f64], w: &WeightFunction) -> Vec<f64> {
    let n = v.len();
    if w.is_identity() {
        twice_ranks(v).into_iter().map(|k| (n as f64 + 1.0) - k as f64).collect()
    } else {
        block_means(v, Side::Survival, plotting_weight(w, n))
    }
}

/// `w(F̂)`, in the same normalisation as [`survival_ratio_weights`].
fn distribution_ratio_weights(v: &[f64], w: &WeightFunction) -> Vec<f64> {
    let n = v.len();
    if w.is_identity() {
        twice_ranks(v).into_iter().map(|k| k as f64 - (n as f64 + 1.0)).collect()
    } else {
        block_means(v, Side::Distribution, plotting_weight(w, n))
    }
}

/// `h(a)` averaged over tie blocks on the survival side, `a = n + 1 - r`.
pub(crate) fn survival_block_means(v: &[f64], h: impl Fn(u64) -> f64) -> Vec<f64> {
    block_means(v, Side::Survival, h)
}

/// `w(1 - F̂)` on its natural scale, tie blocks averaged.
pub(crate) fn survival_weights(v: &[f64], w: &WeightFunction) -> Vec<f64> {
    block_means(v, Side::Survival, plotting_weight(w, v.len()))
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "columns differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 observations, got {}",
            xs.len()
        )));
    }
    Ok(())
}

fn check_varies(v: &[f64], what: &str) -> Result<()> {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo == hi {
        Err(Error::Degenerate(format!("{what} is constant")))
    } else {
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Σ (x_i - x̄) a_i and Σ |x_i - x̄| |a_i| in a fixed left-to-right order.
fn centred_dot(xs: &[f64], x_bar: f64, a: impl Fn(usize) -> f64) -> (f64, f64) {
    let mut s = 0.0;
    let mut scale = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let d = x - x_bar;
        let ai = a(i);
        s += d * ai;
        scale += (d * ai).abs();
    }
    (s, scale)
}

fn guarded_ratio(num: f64, den: f64, den_scale: f64) -> Result<f64> {
    if !(den.abs() > 1e-12 * den_scale) {
        return Err(Error::Degenerate(format!(
            "denominator covariance {den:e} is negligible against its scale {den_scale:e}"
        )));
    }
    Ok(num / den)
}

/// Point value of the rank-based `C_w[X, Y]`.
pub fn cw_value(xs: &[f64], ys: &[f64], w: &WeightFunction) -> Result<f64> {
    check_pair(xs, ys)?;
    check_varies(xs, "x column")?;
    let ax = survival_ratio_weights(xs, w);
    let ay = if xs == ys { ax.clone() } else { survival_ratio_weights(ys, w) };
    let x_bar = mean(xs);
    let (num, _) = centred_dot(xs, x_bar, |i| ay[i]);
    let (den, scale) = centred_dot(xs, x_bar, |i| ax[i]);
    guarded_ratio(num, den, scale)
}

/// Rank-based `C_w[X, Y]` with a bootstrap standard error.
pub fn empirical_cw(s: &PairedSample, w: &WeightFunction) -> Result<CorrelationReport> {
    empirical_cw_with(s, w, &Bootstrap::default())
}

pub fn empirical_cw_with(
    s: &PairedSample,
    w: &WeightFunction,
    boot: &Bootstrap,
) -> Result<CorrelationReport> {
    let value = cw_value(s.xs(), s.ys(), w)?;
    let std_error = bootstrap_cw(s.xs(), s.ys(), w, boot)?;
    Ok(CorrelationReport {
        value,
        method: Method::Empirical,
        std_error,
        weight: w.to_string(),
        note: None,
    })
}

/// Sample analogue of `λ_w[X]`. Uses the same centred sums as [`cw_value`], so
/// `cw_value(xs, -xs, w) == -lambda_w_sample(xs, w)` holds bit for bit.
pub fn lambda_w_sample(xs: &[f64], w: &WeightFunction) -> Result<f64> {
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 observations, got {}",
            xs.len()
        )));
    }
    check_varies(xs, "sample")?;
    let dist = distribution_ratio_weights(xs, w);
    let surv = survival_ratio_weights(xs, w);
    let x_bar = mean(xs);
    let (num, _) = centred_dot(xs, x_bar, |i| dist[i]);
    let (den, scale) = centred_dot(xs, x_bar, |i| surv[i]);
    // Cov[X, w*(F)] = -Cov[X, w(1 - F)]
    Ok(-guarded_ratio(num, den, scale)?)
}

pub fn pearson_value(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys)?;
    check_varies(xs, "x column")?;
    check_varies(ys, "y column")?;
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn empirical_pearson(s: &PairedSample) -> Result<CorrelationReport> {
    empirical_pearson_with(s, &Bootstrap::default())
}

pub fn empirical_pearson_with(s: &PairedSample, boot: &Bootstrap) -> Result<CorrelationReport> {
    let value = pearson_value(s.xs(), s.ys())?;
    let (xs, ys) = (s.xs(), s.ys());
    let std_error = bootstrap_se(xs.len(), boot, |counts| {
        let total: f64 = counts.iter().map(|&c| c as f64).sum();
        let (mut mx, mut my) = (0.0, 0.0);
        for ((&x, &y), &c) in xs.iter().zip(ys).zip(counts) {
            mx += c as f64 * x;
            my += c as f64 * y;
        }
        mx /= total;
        my /= total;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for ((&x, &y), &c) in xs.iter().zip(ys).zip(counts) {
            let (dx, dy, c) = (x - mx, y - my, c as f64);
            sxy += c * dx * dy;
            sxx += c * dx * dx;
            syy += c * dy * dy;
        }
        let r = sxy / (sxx.sqrt() * syy.sqrt());
        r.is_finite().then_some(r)
    })?;
    Ok(CorrelationReport {
        value,
        method: Method::Empirical,
        std_error,
        weight: "pearson".into(),
        note: None,
    })
}

// ---------------------------------------------------------------------------
// bootstrap

/// Pre-sorted column for recomputing ranks under resampling weights.
pub(crate) struct RankedColumn<'a> {
    values: &'a [f64],
    order: Vec<usize>,
}

impl<'a> RankedColumn<'a> {
    pub(crate) fn new(values: &'a [f64]) -> Self {
        RankedColumn {
            values,
            order: sorted_order(values),
        }
    }

    /// Calls `f(block, cum, m)` for each tie block present in the resample
    /// where observation `i` appears `counts[i]` times: `block` lists the
    /// distinct observations, `cum` counts resampled values below the block
    /// and `m` its multiplicity.
    fn for_each_block(&self, counts: &[u32], mut f: impl FnMut(&[usize], u64, u64)) {
        let order = &self.order;
        let mut cum = 0u64;
        let mut i = 0;
        while i < order.len() {
            let v = self.values[order[i]];
            let mut j = i;
            let mut m = 0u64;
            while j < order.len() && self.values[order[j]] == v {
                m += counts[order[j]] as u64;
                j += 1;
            }
            if m > 0 {
                f(&order[i..j], cum, m);
                cum += m;
            }
            i = j;
        }
    }

    /// Twice the average rank of each observation in the resample. Entries
    /// with zero count are left untouched.
    #[cfg(test)]
    pub(crate) fn resample_twice_ranks(&self, counts: &[u32], out: &mut [u64]) {
        self.for_each_block(counts, |block, cum, m| {
            for &idx in block {
                out[idx] = 2 * cum + m + 1;
            }
        });
    }

    /// Per-observation weight `block(cum, m)` in the resample. Entries with
    /// zero count are left untouched.
    pub(crate) fn resample_weights(&self, counts: &[u32], block: impl Fn(u64, u64) -> f64, out: &mut [f64]) {
        self.for_each_block(counts, |idx, cum, m| {
            let v = block(cum, m);
            for &i in idx {
                out[i] = v;
            }
        });
    }
}

/// `h(a)` for `a = 1..=n` with prefix sums, giving survival-side block means
/// in bootstrap resamples of size `n`.
pub(crate) struct PositionTable {
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl PositionTable {
    pub(crate) fn new(n: usize, h: impl Fn(u64) -> f64 + Sync) -> Self {
        let values: Vec<f64> = (0..=n as u64).into_par_iter().map(|a| if a == 0 { 0.0 } else { h(a) }).collect();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for &v in &values {
            acc += v;
            prefix.push(acc);
        }
        PositionTable { values, prefix }
    }

    /// Mean of `h` over the survival positions of ranks `cum+1 ..= cum+m`.
    pub(crate) fn survival_block(&self, cum: u64, m: u64) -> f64 {
        let n = (self.values.len() - 1) as u64;
        let hi = (n - cum) as usize;
        let lo = hi + 1 - m as usize;
        if m <= 16 {
            self.values[lo..=hi].iter().sum::<f64>() / m as f64
        } else {
            (self.prefix[hi] - self.prefix[lo - 1]) / m as f64
        }
    }
}

pub(crate) fn resample_counts(n: usize, seed: u64, index: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

/// Standard deviation of `stat` over bootstrap resamples; `None` when fewer
/// than two resamples are requested.
pub(crate) fn bootstrap_se<F>(n: usize, boot: &Bootstrap, stat: F) -> Result<Option<f64>>
where
    F: Fn(&[u32]) -> Option<f64> + Sync,
{
    if boot.resamples < 2 {
        return Ok(None);
    }
    let values: Vec<Option<f64>> = (0..boot.resamples)
        .into_par_iter()
        .map(|b| stat(&resample_counts(n, boot.seed, b)))
        .collect();
    let ok: Vec<f64> = values.into_iter().flatten().collect();
    if ok.len() * 2 < boot.resamples {
        return Err(Error::Degenerate(format!(
            "statistic undefined on {} of {} bootstrap resamples",
            boot.resamples - ok.len(),
            boot.resamples
        )));
    }
    Ok(Some(std_dev(&ok)))
}

pub(crate) fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() as f64 - 1.0)).sqrt()
}

fn bootstrap_cw(xs: &[f64], ys: &[f64], w: &WeightFunction, boot: &Bootstrap) -> Result<Option<f64>> {
    if boot.resamples < 2 {
        return Ok(None);
    }
    let n = xs.len();
    let table = PositionTable::new(n, plotting_weight(w, n));
    let identity = w.is_identity();
    let block = |cum: u64, m: u64| {
        if identity {
            n as f64 - (2 * cum + m) as f64
        } else {
            table.survival_block(cum, m)
        }
    };
    let cx = RankedColumn::new(xs);
    let cy = RankedColumn::new(ys);
    bootstrap_se(n, boot, |counts| {
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        cx.resample_weights(counts, block, &mut ax);
        cy.resample_weights(counts, block, &mut ay);
        let x_bar = xs
            .iter()
            .zip(counts)
            .map(|(&x, &c)| c as f64 * x)
            .sum::<f64>()
            / n as f64;
        let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
        for i in 0..n {
            if counts[i] == 0 {
                continue;
            }
            let d = counts[i] as f64 * (xs[i] - x_bar);
            num += d * ay[i];
            let t = d * ax[i];
            den += t;
            scale += t.abs();
        }
        guarded_ratio(num, den, scale).ok()
    })
}

// ---------------------------------------------------------------------------
// closed forms

fn require_finite_mean(delta: f64, what: &str) -> Result<()> {
    if delta > 1.0 {
        Ok(())
    } else {
        Err(Error::InfiniteMoment(format!(
            "{what} needs a finite mean (tail index > 1), got {delta}"
        )))
    }
}

/// `1 - B(a + 1 - 1/δ, b)/B(a, b) - b/(a + b)`, the shape factor shared by the
/// beta-weight covariance and correlation formulas.
fn beta_shape_factor(delta: f64, a: f64, b: f64) -> Result<f64> {
    let ratio = (specfun::ln_beta(a + 1.0 - 1.0 / delta, b)? - specfun::ln_beta(a, b)?).exp();
    Ok(1.0 - ratio - b / (a + b))
}

/// Extended Gini correlation of BVP2 with `w(t) = t^γ`.
pub fn bvp2_cw_power(delta: f64, delta_y_star: f64, gamma: f64) -> Result<f64> {
    require_finite_mean(delta, "BVP2 Gini correlation")?;
    Ok((delta * (gamma + 1.0) - 1.0) / (delta * (delta_y_star * (gamma + 1.0) - 1.0)))
}

/// Weighted Gini correlation of BVP2 with a Beta(a, b) c.d.f. weight.
pub fn bvp2_cw_beta(delta: f64, delta_y_star: f64, a: f64, b: f64) -> Result<f64> {
    require_finite_mean(delta, "BVP2 Gini correlation")?;
    Ok(beta_shape_factor(delta_y_star, a, b)? / (delta * beta_shape_factor(delta, a, b)?))
}

/// `Cov[X, w(1 - F_X(X))]` for a Pareto-II margin: closed forms for power and
/// beta weights, quadrature for tabulated weights.
pub fn cov_x_weighted(m: &ParetoIIMargin, w: &WeightFunction) -> Result<f64> {
    require_finite_mean(m.delta, "weighted covariance")?;
    let (s, d) = (m.sigma, m.delta);
    match w.kind() {
        WeightKind::Identity => Ok(power_cov(s, d, 1.0)),
        WeightKind::Power { gamma } => Ok(power_cov(s, d, *gamma)),
        WeightKind::DualPower { .. } | WeightKind::BetaCdf { .. } => {
            let (a, b) = w.as_beta().expect("beta-representable weight");
            Ok(s * d / (d - 1.0) * beta_shape_factor(d, a, b)?)
        }
        WeightKind::Table(_) => {
            oracle::quad_cov_margin(&MarginLaw::ParetoII(*m), w, &QuadratureSpec::default())
        }
    }
}

fn power_cov(sigma: f64, delta: f64, gamma: f64) -> f64 {
    -gamma / (gamma + 1.0) * sigma * delta / ((delta - 1.0) * (delta * (gamma + 1.0) - 1.0))
}

/// `Cov[X, w(1 - F_X(X))]` for any supported margin. Location-scale margins
/// are reduced to their standard member so that ratios of covariances of the
/// same law are exact.
pub fn margin_weighted_cov(m: &MarginLaw, w: &WeightFunction) -> Result<f64> {
    let q = QuadratureSpec::default();
    match *m {
        MarginLaw::ParetoII(p) => cov_x_weighted(&p, w),
        MarginLaw::Normal { sigma, .. } => {
            Ok(sigma * oracle::quad_cov_margin(&MarginLaw::Normal { mu: 0.0, sigma: 1.0 }, w, &q)?)
        }
        MarginLaw::StudentT { scale, nu, .. } => {
            if nu <= 1.0 {
                return Err(Error::InfiniteMoment(format!(
                    "Student t mean needs nu > 1, got {nu}"
                )));
            }
            let std = MarginLaw::StudentT {
                mu: 0.0,
                scale: 1.0,
                nu,
            };
            Ok(scale * oracle::quad_cov_margin(&std, w, &q)?)
        }
        MarginLaw::Uniform { lo, hi } => {
            Ok((hi - lo) * oracle::quad_cov_margin(&MarginLaw::Uniform { lo: 0.0, hi: 1.0 }, w, &q)?)
        }
    }
}

/// `λ_w[X] = Cov[X, w(F_X(X))] / Cov[X, w*(F_X(X))]` by quantile-domain quadrature.
pub fn lambda_w(m: &MarginLaw, w: &WeightFunction) -> Result<f64> {
    m.mean()?;
    let q = QuadratureSpec::default();
    // with t = 1 - F: w(F) = w(1 - t) and w*(F) = 1 - w(t)
    let num = oracle::quad_cov_fn(m, |t| w.eval_unchecked(1.0 - t), &q)?;
    let den = oracle::quad_cov_fn(m, |t| w.eval_unchecked(t), &q)?;
    if den == 0.0 {
        return Err(Error::Degenerate("margin has zero weighted covariance".into()));
    }
    Ok(-num / den)
}

/// Population `C_w[X, Y]` from the family's closed form.
pub fn closed_cw(f: &BivariateFamily, w: &WeightFunction) -> Result<CorrelationReport> {
    let frame = f.frame();
    let value = match *f {
        BivariateFamily::Normal { rho, .. } => rho,
        BivariateFamily::EllipticalT { sigma_xy, nu, .. } => {
            if nu <= 1.0 {
                return Err(Error::InfiniteMoment(format!(
                    "elliptical t mean needs nu > 1, got {nu}"
                )));
            }
            sigma_xy / (frame.sigma_x * frame.sigma_y)
        }
        BivariateFamily::Bvp1 { delta, .. } => {
            require_finite_mean(delta, "BVP1 Gini correlation")?;
            1.0 / delta
        }
        BivariateFamily::Bvp2 { delta, delta_y, .. } => {
            let dys = delta + delta_y;
            match w.kind() {
                WeightKind::Identity => bvp2_cw_power(delta, dys, 1.0)?,
                WeightKind::Power { gamma } => bvp2_cw_power(delta, dys, *gamma)?,
                WeightKind::DualPower { .. } | WeightKind::BetaCdf { .. } => {
                    let (a, b) = w.as_beta().expect("beta-representable weight");
                    bvp2_cw_beta(delta, dys, a, b)?
                }
                WeightKind::Table(_) => {
                    return Err(Error::Unsupported {
                        what: format!("closed-form C_w for bvp2 with weight {w}"),
                        alternatives: "empirical estimate (method empirical) or Monte-Carlo oracle (method oracle)".into(),
                    })
                }
            }
        }
        BivariateFamily::Bvp3 {
            delta,
            delta_x,
            delta_y,
            ..
        } => {
            let gamma = match w.kind() {
                WeightKind::Identity => 1.0,
                WeightKind::Power { gamma } => *gamma,
                _ => {
                    return Err(Error::Unsupported {
                        what: format!("closed-form C_w for bvp3 with weight {w} (power weights only)"),
                        alternatives: "empirical estimate (method empirical) or Monte-Carlo oracle (method oracle)".into(),
                    })
                }
            };
            let resolution = bvp3_resolution()?;
            let value = bvp3_gamma_closed(delta, delta_x, delta_y, gamma, resolution.convention)?;
            let mut report = CorrelationReport::exact(value, Method::ClosedForm, w);
            report.note = Some(resolution.describe());
            return Ok(report);
        }
    };
    Ok(CorrelationReport::exact(value, Method::ClosedForm, w))
}

/// `C_w = β · Cov[Y, w(1 - F_Y(Y))] / Cov[X, w(1 - F_X(X))]` for families with a
/// linear regression of X on Y.
pub fn cw_via_regression(f: &BivariateFamily, w: &WeightFunction) -> Result<CorrelationReport> {
    let line = f.regression_line()?;
    let cov_y = margin_weighted_cov(&f.margin_y(), w)?;
    let cov_x = margin_weighted_cov(&f.margin_x(), w)?;
    if cov_x == 0.0 {
        return Err(Error::Degenerate("X has zero weighted covariance".into()));
    }
    Ok(CorrelationReport::exact(
        line.beta * cov_y / cov_x,
        Method::RegressionRoute,
        w,
    ))
}

// ---------------------------------------------------------------------------
// BVP3

/// Normalisation of the density constants `d_i` in the BVP3 Gini formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DConvention {
    /// Coefficients of the mixed partial derivative of the joint d.d.f.
    Raw,
    /// Every present term carries `d_i = 1`.
    Unit,
}

impl fmt::Display for DConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DConvention::Raw => "raw mixed-partial",
            DConvention::Unit => "unit",
        })
    }
}

/// Outcome of pinning the `d_i` convention against the 2-D quadrature oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bvp3Resolution {
    pub convention: DConvention,
    /// Largest |closed - oracle| over the check grid, per candidate.
    pub raw_discrepancy: f64,
    pub unit_discrepancy: f64,
}

impl Bvp3Resolution {
    pub fn describe(&self) -> String {
        format!(
            "d_i convention: {} (max oracle discrepancy {:.1e}; other candidate {:.1e})",
            self.convention,
            self.raw_discrepancy.min(self.unit_discrepancy),
            self.raw_discrepancy.max(self.unit_discrepancy)
        )
    }
}

/// Parameter points `(δ, δ_X, δ_Y, γ)` used to pin the convention.
pub const BVP3_CHECK_GRID: [(f64, f64, f64, f64); 3] = [
    (1.0, 2.0, 1.5, 1.0),
    (0.5, 2.5, 2.0, 2.0),
    (1.5, 1.5, 1.0, 0.5),
];

/// Tolerance for a candidate convention to count as matching the oracle.
pub const BVP3_MATCH_TOL: f64 = 1e-4;

/// Resolves the convention once per process.
pub fn bvp3_resolution() -> Result<&'static Bvp3Resolution> {
    static CELL: OnceLock<std::result::Result<Bvp3Resolution, Error>> = OnceLock::new();
    CELL.get_or_init(resolve_bvp3_convention)
        .as_ref()
        .map_err(Clone::clone)
}

fn resolve_bvp3_convention() -> Result<Bvp3Resolution> {
    let mut raw: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for &(d, dx, dy, g) in &BVP3_CHECK_GRID {
        let fam = BivariateFamily::bvp3(crate::distributions::Frame::standard(), d, dx, dy)?;
        let reference = oracle::quad2_bvp3_gamma(&fam, g, &QuadratureSpec::default())?;
        raw = raw.max((bvp3_gamma_closed(d, dx, dy, g, DConvention::Raw)? - reference).abs());
        unit = unit.max((bvp3_gamma_closed(d, dx, dy, g, DConvention::Unit)? - reference).abs());
    }
    let convention = match (raw < BVP3_MATCH_TOL, unit < BVP3_MATCH_TOL) {
        (true, false) => DConvention::Raw,
        (false, true) => DConvention::Unit,
        _ => {
            return Err(Error::Unsupported {
                what: format!(
                    "BVP3 closed form: d_i convention not uniquely pinned (raw {raw:e}, unit {unit:e})"
                ),
                alternatives: "empirical estimate or quadrature oracle".into(),
            })
        }
    };
    Ok(Bvp3Resolution {
        convention,
        raw_discrepancy: raw,
        unit_discrepancy: unit,
    })
}

/// `E[X (1 - F_Y(Y))^γ]` for the standardized BVP3 pair, summed term by term
/// through `₃F₂(δ+i₃, 2, 1; δ_X*+i₁+i₃, (γ+1)δ_Y*+i₂+i₃; 1)`.
pub fn bvp3_weighted_moment(
    delta: f64,
    delta_x: f64,
    delta_y: f64,
    gamma: f64,
    convention: DConvention,
) -> Result<f64> {
    let dxs = delta + delta_x;
    let dys = delta + delta_y;
    require_finite_mean(dxs, "BVP3 Gini correlation")?;
    let margin = delta_x + (gamma + 1.0) * dys - 1.0;
    if margin <= 0.0 {
        return Err(Error::Divergent { margin });
    }
    let mut total = 0.0;
    for term in crate::distributions::bvp3_terms(delta, delta_x, delta_y) {
        if term.coefficient == 0.0 {
            continue;
        }
        let d = match convention {
            DConvention::Raw => term.coefficient,
            DConvention::Unit => 1.0,
        };
        let [i1, i2, i3] = term.index.map(|i| i as f64);
        let dx13 = dxs + i1 + i3;
        let c = (gamma + 1.0) * dys + i2 + i3;
        let spec = HypergeometricSpec::new(vec![delta + i3, 2.0, 1.0], vec![dx13, c], 1.0)?;
        let f = specfun::hyp_pfq(&spec, 1e-11)?;
        total += d * f / ((dx13 - 2.0) * (dx13 - 1.0) * (c - 1.0));
    }
    Ok(total)
}

/// Extended Gini correlation `Γ_γ` of BVP3.
///
/// `Γ_γ = (δ_X*(γ+1) - 1)/(δ_X* γ) - (δ_X*-1)(γ+1)(δ_X*(γ+1)-1)/(δ_X* γ) · M`
/// where `M` is [`bvp3_weighted_moment`].
pub fn bvp3_gamma_closed(
    delta: f64,
    delta_x: f64,
    delta_y: f64,
    gamma: f64,
    convention: DConvention,
) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let dxs = delta + delta_x;
    let m = bvp3_weighted_moment(delta, delta_x, delta_y, gamma, convention)?;
    let k = dxs * (gamma + 1.0) - 1.0;
    Ok(k / (dxs * gamma) - (dxs - 1.0) * (gamma + 1.0) * k / (dxs * gamma) * m)
}
