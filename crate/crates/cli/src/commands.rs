use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use wgini::gini::{self, Bootstrap};
use wgini::io::{read_pairs_csv, VERSION};
use wgini::oracle::{self, McStatistic};
use wgini::verify;
use wgini::wipm::{self, Portfolio};
use wgini::{BivariateFamily, CorrelationReport, Error, Frame, Method, PairedSample, Result, TableWeight, WeightFunction};

use crate::output::{Cell, Table};
use crate::{CorrArgs, CurvesArgs, FamilyArgs, MethodArg, PriceArgs, SampleArgs, SurfaceArgs, VerifyArgs, WeightArgs};

pub struct Context {
    pub seed: u64,
    pub invocation: String,
}

impl Context {
    fn table(&self, columns: Vec<&'static str>) -> Table {
        let mut t = Table::new(columns);
        t.meta("version", Cell::Text(VERSION.into()));
        t.meta("command", Cell::Text(self.invocation.clone()));
        t.meta("seed", Cell::Int(self.seed));
        t
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl FamilyArgs {
    fn flag_params(&self) -> BTreeMap<String, f64> {
        [
            ("rho", self.rho),
            ("sigma_xy", self.sigma_xy),
            ("nu", self.nu),
            ("delta", self.delta),
            ("delta_x", self.delta_x),
            ("delta_y", self.delta_y),
            ("mu_x", self.mu_x),
            ("mu_y", self.mu_y),
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect()
    }

    fn resolve(&self) -> Result<Option<BivariateFamily>> {
        let params = self.flag_params();
        if let Some(path) = &self.config {
            if !params.is_empty() {
                return Err(Error::InvalidParameter(
                    "give family parameters either in --config or as flags, not both".into(),
                ));
            }
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            return text.parse().map(Some);
        }
        match &self.family {
            Some(tag) => BivariateFamily::from_params(tag, &params).map(Some),
            None if params.is_empty() => Ok(None),
            None => Err(Error::InvalidParameter("family parameters need --family".into())),
        }
    }

    fn require(&self, what: &str) -> Result<BivariateFamily> {
        self.resolve()?.ok_or_else(|| {
            Error::InvalidParameter(format!("{what} needs --family <tag> with its parameters, or --config"))
        })
    }
}

impl WeightArgs {
    fn resolve(&self) -> Result<WeightFunction> {
        match &self.weight_table {
            Some(path) => Ok(WeightFunction::table(TableWeight::from_csv(open(path)?)?)),
            None => Ok(self.weight.clone()),
        }
    }
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Empirical => "empirical",
        MethodArg::Closed => "closed",
        MethodArg::Regression => "regression",
        MethodArg::Oracle => "oracle",
        MethodArg::All => "all",
    }
}

fn corr_row(r: &CorrelationReport, n: Option<usize>) -> Vec<Cell> {
    vec![
        Cell::Text(r.method.to_string()),
        Cell::Text(r.weight.clone()),
        Cell::Num(r.value),
        Cell::opt(r.std_error),
        n.map_or(Cell::Empty, |n| Cell::Int(n as u64)),
        r.note.clone().map_or(Cell::Empty, Cell::Text),
    ]
}

fn corr_on_family(
    ctx: &Context,
    a: &CorrArgs,
    f: &BivariateFamily,
    w: &WeightFunction,
    m: MethodArg,
) -> Result<(CorrelationReport, Option<usize>)> {
    match m {
        MethodArg::Closed => Ok((gini::closed_cw(f, w)?, None)),
        MethodArg::Regression => match gini::cw_via_regression(f, w) {
            Err(Error::NoLinearRegression(why)) => Err(Error::Unsupported {
                what: format!("regression route for {} ({why})", f.tag()),
                alternatives: "closed, empirical, oracle".into(),
            }),
            r => Ok((r?, None)),
        },
        MethodArg::Empirical => {
            let s = f.sample(a.n, ctx.seed)?;
            let boot = Bootstrap {
                resamples: a.resamples,
                seed: ctx.seed,
            };
            Ok((gini::empirical_cw_with(&s, w, &boot)?, Some(a.n)))
        }
        MethodArg::Oracle => {
            let est = oracle::mc_reference(f, &McStatistic::Cw(w.clone()), a.n, ctx.seed, a.replications)?;
            let report = CorrelationReport {
                value: est.mean,
                method: Method::Oracle,
                std_error: Some(est.std_error),
                weight: w.to_string(),
                note: Some(format!("{} replications", est.replications.len())),
            };
            Ok((report, Some(a.n)))
        }
        MethodArg::All => unreachable!("expanded by caller"),
    }
}

pub fn corr(ctx: &Context, a: &CorrArgs) -> Result<Table> {
    let w = a.weight.resolve()?;
    let mut t = ctx.table(vec!["method", "weight", "value", "std_error", "n", "note"]);
    t.meta("weight", Cell::Text(w.to_string()));
    if let Some(path) = &a.data {
        let method = a.method.unwrap_or(MethodArg::Empirical);
        if method != MethodArg::Empirical {
            return Err(Error::Unsupported {
                what: format!("method {} on --data input", method_name(method)),
                alternatives: "empirical (or give family parameters for closed, regression, oracle, all)".into(),
            });
        }
        let s = read_pairs_csv(open(path)?, &path.display().to_string())?;
        let boot = Bootstrap {
            resamples: a.resamples,
            seed: ctx.seed,
        };
        t.meta("data", Cell::Text(path.display().to_string()));
        let r = gini::empirical_cw_with(&s, &w, &boot)?;
        t.push(corr_row(&r, Some(s.len())));
        return Ok(t);
    }
    let f = a.family.require("corr without --data")?;
    t.meta("family", Cell::Text(f.to_string()));
    match a.method.unwrap_or(MethodArg::Closed) {
        MethodArg::All => {
            for m in [MethodArg::Closed, MethodArg::Regression, MethodArg::Empirical] {
                match corr_on_family(ctx, a, &f, &w, m) {
                    Ok((r, n)) => t.push(corr_row(&r, n)),
                    Err(e @ Error::Unsupported { .. }) => {
                        let method = match m {
                            MethodArg::Closed => Method::ClosedForm,
                            _ => Method::RegressionRoute,
                        };
                        t.push(vec![
                            Cell::Text(method.to_string()),
                            Cell::Text(w.to_string()),
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Empty,
                            Cell::Text(e.to_string()),
                        ]);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        m => {
            let (r, n) = corr_on_family(ctx, a, &f, &w, m)?;
            t.push(corr_row(&r, n));
        }
    }
    Ok(t)
}

pub fn sample(ctx: &Context, a: &SampleArgs) -> Result<Table> {
    let f = a.family.require("sample")?;
    let s: PairedSample = f.sample(a.n, ctx.seed)?;
    let mut t = ctx.table(vec!["x", "y"]);
    t.meta("family", Cell::Text(f.to_string()));
    t.meta("n", Cell::Int(a.n as u64));
    for (&x, &y) in s.xs().iter().zip(s.ys()) {
        t.push(vec![Cell::Num(x), Cell::Num(y)]);
    }
    Ok(t)
}

/// True when some interior value strictly exceeds every value before and
/// after it.
fn has_interior_max(v: &[f64]) -> bool {
    let Some((arg, &max)) = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    arg > 0 && arg + 1 < v.len() && v[0] < max && v[v.len() - 1] < max
}

pub fn curves(ctx: &Context, a: &CurvesArgs) -> Result<Table> {
    let finite = [a.delta_min, a.delta_max, a.delta_y, a.gamma].iter().all(|x| x.is_finite());
    if !finite || a.steps < 2 || a.delta_min >= a.delta_max {
        return Err(Error::InvalidParameter(format!(
            "empty delta range [{}, {}] with {} steps (need delta_min < delta_max and steps >= 2)",
            a.delta_min, a.delta_max, a.steps
        )));
    }
    if a.delta_min <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "the extended Gini correlation needs delta > 1, got delta_min = {}",
            a.delta_min
        )));
    }
    let mut t = ctx.table(vec!["delta", "gamma_cw", "pearson"]);
    t.meta("family", Cell::Text("bvp2".into()));
    t.meta("delta_y", Cell::Num(a.delta_y));
    t.meta("gamma", Cell::Num(a.gamma));
    let mut gammas = Vec::with_capacity(a.steps);
    let mut pearsons = Vec::new();
    let mut rows = Vec::with_capacity(a.steps);
    for i in 0..a.steps {
        let d = if i + 1 == a.steps {
            a.delta_max
        } else {
            a.delta_min + (a.delta_max - a.delta_min) * i as f64 / (a.steps - 1) as f64
        };
        let g = gini::bvp2_cw_power(d, d + a.delta_y, a.gamma)?;
        let rho = if d > 2.0 {
            let f = BivariateFamily::bvp2(Frame::standard(), d, a.delta_y)?;
            Some(f.pearson_closed_form()?)
        } else {
            None
        };
        gammas.push(g);
        pearsons.extend(rho);
        rows.push(vec![Cell::Num(d), Cell::Num(g), Cell::opt(rho)]);
    }
    let decreasing = gammas.windows(2).all(|p| p[1] < p[0]);
    t.meta("gamma_decreasing", Cell::Bool(decreasing));
    t.meta("pearson_interior_max", Cell::Bool(has_interior_max(&pearsons)));
    for r in rows {
        t.push(r);
    }
    Ok(t)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

pub fn surface(ctx: &Context, a: &SurfaceArgs) -> Result<Table> {
    let f = a.family.require("surface")?;
    let fr = f.frame();
    let (span_lo, span_hi) = if f.is_pareto() { (0.0, 10.0) } else { (-3.0, 3.0) };
    let x_min = a.x_min.unwrap_or(fr.mu_x + span_lo * fr.sigma_x);
    let x_max = a.x_max.unwrap_or(fr.mu_x + span_hi * fr.sigma_x);
    let y_min = a.y_min.unwrap_or(fr.mu_y + span_lo * fr.sigma_y);
    let y_max = a.y_max.unwrap_or(fr.mu_y + span_hi * fr.sigma_y);
    let bounds = [x_min, x_max, y_min, y_max];
    if bounds.iter().any(|v| !v.is_finite()) || a.nx == 0 || a.ny == 0 || x_max < x_min || y_max < y_min {
        return Err(Error::InvalidParameter(format!(
            "bad grid x [{x_min}, {x_max}] x {}, y [{y_min}, {y_max}] x {}",
            a.nx, a.ny
        )));
    }
    if f.is_pareto() && (x_min < fr.mu_x || y_min < fr.mu_y) {
        return Err(Error::InvalidParameter(format!(
            "grid starts below the support: need x >= {} and y >= {}, got x_min = {x_min}, y_min = {y_min}",
            fr.mu_x, fr.mu_y
        )));
    }
    let mut t = ctx.table(vec!["x", "y", "ddf"]);
    t.meta("family", Cell::Text(f.to_string()));
    for x in grid(x_min, x_max, a.nx) {
        for y in grid(y_min, y_max, a.ny) {
            t.push(vec![Cell::Num(x), Cell::Num(y), Cell::Num(f.joint_ddf(x, y)?)]);
        }
    }
    Ok(t)
}

fn premium_row(name: &str, p: &wipm::PremiumResult) -> Vec<Cell> {
    vec![
        Cell::Text(name.to_string()),
        Cell::Num(p.premium),
        Cell::Num(p.base),
        Cell::Num(p.loading),
        Cell::opt(p.std_error),
    ]
}

pub fn price(ctx: &Context, a: &PriceArgs) -> Result<Table> {
    let w = a.weight.resolve()?;
    let p = Portfolio::from_csv(open(&a.portfolio)?)?;
    let mut t = ctx.table(vec!["column", "premium", "base", "loading", "std_error"]);
    t.meta("portfolio", Cell::Text(a.portfolio.display().to_string()));
    t.meta("weight", Cell::Text(w.to_string()));
    t.meta("orientation", Cell::Text(a.orientation.to_string()));
    if a.allocate {
        let r = wipm::allocate_with(&p, &w, a.orientation)?;
        let scale = r.aggregate.premium.abs().max(1.0);
        t.meta("mode", Cell::Text("allocation".into()));
        t.meta("additivity_gap", Cell::Num(r.additivity_gap));
        t.meta("additive", Cell::Bool(r.additivity_gap.abs() <= 1e-10 * scale));
        for al in &r.allocations {
            t.push(premium_row(&al.column, &al.result));
        }
        t.push(premium_row("aggregate", &r.aggregate));
    } else {
        let boot = Bootstrap {
            resamples: a.resamples,
            seed: ctx.seed,
        };
        t.meta("mode", Cell::Text("standalone".into()));
        let columns = p.names().iter().cloned().zip(p.columns().iter().cloned());
        for (name, col) in columns.chain(std::iter::once(("aggregate".to_string(), p.aggregate()))) {
            let s = PairedSample::from_columns(col.clone(), col)?;
            let r = wipm::gini_premium_with(&s, &w, a.orientation, &boot)?;
            t.push(premium_row(&name, &r));
        }
    }
    Ok(t)
}

/// The table plus whether every check passed.
pub fn verify(ctx: &Context, a: &VerifyArgs) -> Result<(Table, bool)> {
    let outcomes = verify::run_checks(&verify::checks(), a.suite);
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let mut t = ctx.table(vec!["check", "suite", "passed", "got", "want", "tol", "error"]);
    t.meta("suite", Cell::Text(a.suite.to_string()));
    t.meta("passed", Cell::Int(passed as u64));
    t.meta("total", Cell::Int(outcomes.len() as u64));
    for o in &outcomes {
        t.push(vec![
            Cell::Text(o.name.clone()),
            Cell::Text(o.suite.to_string()),
            Cell::Bool(o.passed),
            Cell::opt(o.got),
            Cell::opt(o.want),
            Cell::opt(o.tol),
            o.error.clone().map_or(Cell::Empty, Cell::Text),
        ]);
    }
    for o in outcomes.iter().filter(|o| !o.passed) {
        eprintln!("FAILED {}: {}", o.name, o.error.as_deref().unwrap_or("outside tolerance"));
    }
    let all_ok = passed == outcomes.len();
    Ok((t, all_ok))
}
