//! Admissible weight functions: non-decreasing maps `[0, 1] -> [0, 1]`.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::specfun;

/// Piecewise-linear weight through monotone knots, flat outside the knot range.
#[derive(Debug, Clone, PartialEq)]
pub struct TableWeight {
    ts: Vec<f64>,
    ws: Vec<f64>,
}

impl TableWeight {
    pub fn new(ts: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        if ts.len() != ws.len() {
            return Err(Error::InvalidParameter(format!(
                "table weight needs equal numbers of t and w values ({} vs {})",
                ts.len(),
                ws.len()
            )));
        }
        if ts.len() < 2 {
            return Err(Error::InvalidParameter(
                "table weight needs at least two knots".into(),
            ));
        }
        for (i, (&t, &w)) in ts.iter().zip(&ws).enumerate() {
            if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidParameter(format!(
                    "knot {i} = ({t}, {w}) lies outside [0, 1] x [0, 1]"
                )));
            }
            if i > 0 {
                if t <= ts[i - 1] {
                    return Err(Error::InvalidParameter(format!(
                        "knot abscissae must be strictly increasing (knot {i})"
                    )));
                }
                if w < ws[i - 1] {
                    return Err(Error::InvalidParameter(format!(
                        "weight decreases at knot {i}; weights must be non-decreasing"
                    )));
                }
            }
        }
        Ok(TableWeight { ts, ws })
    }

    /// Reads two-column `t,w` CSV. A non-numeric first row is taken as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut ts = Vec::new();
        let mut ws = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!(
                    "weight table row {} has {} columns, expected 2",
                    line + 1,
                    rec.len()
                )));
            }
            let t = rec[0].parse::<f64>();
            let w = rec[1].parse::<f64>();
            match (t, w) {
                (Ok(t), Ok(w)) => {
                    ts.push(t);
                    ws.push(w);
                }
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "weight table row {} is not numeric",
                        line + 1
                    )))
                }
            }
        }
        TableWeight::new(ts, ws)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts.iter().copied().zip(self.ws.iter().copied())
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t <= self.ts[0] {
            return self.ws[0];
        }
        if t >= self.ts[n - 1] {
            return self.ws[n - 1];
        }
        let hi = self.ts.partition_point(|&k| k <= t);
        let lo = hi - 1;
        let frac = (t - self.ts[lo]) / (self.ts[hi] - self.ts[lo]);
        self.ws[lo] + frac * (self.ws[hi] - self.ws[lo])
    }

    fn reflect(&self) -> TableWeight {
        let ts = self.ts.iter().rev().map(|t| 1.0 - t).collect();
        let ws = self.ws.iter().rev().map(|w| 1.0 - w).collect();
        TableWeight { ts, ws }
    }

    // exact integral of the interpolant over [0, 1]
    fn mean(&self) -> f64 {
        let n = self.ts.len();
        let mut acc = self.ws[0] * self.ts[0] + self.ws[n - 1] * (1.0 - self.ts[n - 1]);
        for i in 1..n {
            acc += 0.5 * (self.ws[i] + self.ws[i - 1]) * (self.ts[i] - self.ts[i - 1]);
        }
        acc
    }
}

/// Shape of a weight function.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Identity,
    /// `t^γ`
    Power { gamma: f64 },
    /// `1 - (1 - t)^γ`, the reflection of `Power`.
    DualPower { gamma: f64 },
    /// Beta(a, b) c.d.f., the regularized incomplete beta function.
    BetaCdf { a: f64, b: f64 },
    Table(TableWeight),
}

/// A validated member of the admissible weight class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    kind: WeightKind,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "weight parameter {name} must be positive and finite, got {v}"
        )))
    }
}

impl WeightFunction {
    pub fn identity() -> Self {
        WeightFunction {
            kind: WeightKind::Identity,
        }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(WeightFunction {
            kind: WeightKind::Power { gamma },
        })
    }

    pub fn dual_power(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(WeightFunction {
            kind: WeightKind::DualPower { gamma },
        })
    }

    pub fn beta_cdf(a: f64, b: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("b", b)?;
        Ok(WeightFunction {
            kind: WeightKind::BetaCdf { a, b },
        })
    }

    pub fn table(table: TableWeight) -> Self {
        WeightFunction {
            kind: WeightKind::Table(table),
        }
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// `w(t)` for `t` in `[0, 1]`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!(
                "weight argument must lie in [0, 1], got {t}"
            )));
        }
        Ok(self.eval_unchecked(t))
    }

    /// Hot-path evaluation; the caller guarantees `t` is in `[0, 1]`.
    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            WeightKind::Identity => t,
            WeightKind::Power { gamma } => t.powf(*gamma),
            WeightKind::DualPower { gamma } => 1.0 - (1.0 - t).powf(*gamma),
            WeightKind::BetaCdf { a, b } => specfun::reg_inc_beta_unchecked(t, *a, *b),
            WeightKind::Table(tab) => tab.eval(t),
        }
    }

    /// The reflected weight `w*(t) = 1 - w(1 - t)`.
    pub fn reflect(&self) -> WeightFunction {
        let kind = match &self.kind {
            WeightKind::Identity => WeightKind::Identity,
            WeightKind::Power { gamma } => WeightKind::DualPower { gamma: *gamma },
            WeightKind::DualPower { gamma } => WeightKind::Power { gamma: *gamma },
            WeightKind::BetaCdf { a, b } => WeightKind::BetaCdf { a: *b, b: *a },
            WeightKind::Table(tab) => WeightKind::Table(tab.reflect()),
        };
        WeightFunction { kind }
    }

    /// `∫_0^1 w(t) dt`, i.e. `E[w(U)]` for uniform `U`.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            WeightKind::Identity => 0.5,
            WeightKind::Power { gamma } => 1.0 / (gamma + 1.0),
            WeightKind::DualPower { gamma } => gamma / (gamma + 1.0),
            WeightKind::BetaCdf { a, b } => b / (a + b),
            WeightKind::Table(tab) => tab.mean(),
        }
    }

    /// Beta-c.d.f. parameters when the weight is one (identity, powers, beta).
    pub fn as_beta(&self) -> Option<(f64, f64)> {
        match &self.kind {
            WeightKind::Identity => Some((1.0, 1.0)),
            WeightKind::Power { gamma } => Some((*gamma, 1.0)),
            WeightKind::DualPower { gamma } => Some((1.0, *gamma)),
            WeightKind::BetaCdf { a, b } => Some((*a, *b)),
            WeightKind::Table(_) => None,
        }
    }

    /// Exponent `γ` when the weight is `t^γ`.
    pub fn as_power(&self) -> Option<f64> {
        match &self.kind {
            WeightKind::Identity => Some(1.0),
            WeightKind::Power { gamma } => Some(*gamma),
            WeightKind::BetaCdf { a, b } if *b == 1.0 => Some(*a),
            WeightKind::DualPower { gamma } if *gamma == 1.0 => Some(1.0),
            _ => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.kind {
            WeightKind::Identity => true,
            WeightKind::Power { gamma } | WeightKind::DualPower { gamma } => *gamma == 1.0,
            WeightKind::BetaCdf { a, b } => *a == 1.0 && *b == 1.0,
            WeightKind::Table(_) => false,
        }
    }
}

impl fmt::Display for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            WeightKind::Identity => write!(f, "identity"),
            WeightKind::Power { gamma } => write!(f, "power:{gamma}"),
            WeightKind::DualPower { gamma } => write!(f, "dual-power:{gamma}"),
            WeightKind::BetaCdf { a, b } => write!(f, "beta:{a},{b}"),
            WeightKind::Table(tab) => write!(f, "table:{}-knots", tab.ts.len()),
        }
    }
}

impl Serialize for WeightFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Parses `identity`, `power:γ`, `dual-power:γ` or `beta:a,b`.
/// Table weights come from files; see [`TableWeight::from_csv`].
impl FromStr for WeightFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (s, ""),
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {v:?} in weight {s:?}")))
        };
        match name {
            "identity" | "id" if args.is_empty() => Ok(WeightFunction::identity()),
            "power" => WeightFunction::power(num(args)?),
            "dual-power" => WeightFunction::dual_power(num(args)?),
            "beta" => {
                let (a, b) = args
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("beta weight needs a,b: {s:?}")))?;
                WeightFunction::beta_cdf(num(a)?, num(b)?)
            }
            _ => Err(Error::Parse(format!(
                "unknown weight {s:?} (expected identity, power:g, dual-power:g, beta:a,b)"
            ))),
        }
    }
}
