//! Number formatting and CSV input shared by the command-line tools.

use std::io::Read;

use crate::error::{Error, Result};
use crate::sample::{PairedSample, Provenance};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// Decimal text with 12 significant digits; scientific notation outside
/// `[1e-5, 1e15)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Reads paired observations from CSV. Lines starting with `#` are skipped.
/// With a header row, columns named `x` and `y` are used when present,
/// otherwise the first two columns.
pub fn read_pairs_csv<R: Read>(reader: R, source: &str) -> Result<PairedSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut cols = (0usize, 1usize);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if row == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            let find = |name: &str| rec.iter().position(|f| f.eq_ignore_ascii_case(name));
            if let (Some(x), Some(y)) = (find("x"), find("y")) {
                cols = (x, y);
            }
            continue;
        }
        let get = |j: usize| -> Result<f64> {
            let field = rec
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {}: missing column {}", row + 1, j + 1)))?;
            field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", row + 1)))
        };
        xs.push(get(cols.0)?);
        ys.push(get(cols.1)?);
    }
    PairedSample::new(
        xs,
        ys,
        Provenance {
            seed: None,
            source: source.to_string(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting() {
        assert_eq!(fmt_num(1.0 / 5.87), "0.170357751278");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-3.0), "-3");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.234e-9), "1.234e-9");
        assert_eq!(fmt_num(2.0 / 3.0), "0.666666666667");
    }

    #[test]
    fn pairs_with_and_without_header() {
        let s = read_pairs_csv("# c\ny,x\n1,2\n3,4\n5,6\n".as_bytes(), "t").unwrap();
        assert_eq!(s.xs(), &[2.0, 4.0, 6.0]);
        let s = read_pairs_csv("1,2\n3,4\n5,6\n".as_bytes(), "t").unwrap();
        assert_eq!(s.ys(), &[2.0, 4.0, 6.0]);
        assert!(read_pairs_csv("x,y\n1,2\n3,oops\n5,6\n".as_bytes(), "t").is_err());
        assert!(read_pairs_csv("x,y\n1,2\n".as_bytes(), "t").is_err());
    }
}
