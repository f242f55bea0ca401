//! CSV ingestion of return samples and option quotes.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use regclock::infer::ReturnSample;
use regclock::price::{OptionKind, OptionQuote};

use crate::error::{CliError, CliResult};
use crate::format::fmt_num;

/// Days per year used to convert quote maturities.
pub const DAYS_PER_YEAR: f64 = 365.0;

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input)
}

fn open(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn csv_error(e: csv::Error) -> CliError {
    let line = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    CliError::Data(format!("{line}{e}"))
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn number(record: &csv::StringRecord, idx: usize, name: &str) -> CliResult<f64> {
    let cell = record.get(idx).unwrap_or("");
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Data(format!("line {}: {name} '{cell}' is not a finite number", line_of(record)))),
    }
}

/// Log-returns from a `log_return` column, or from consecutive closes in
/// `date,close` columns. No minimum length is imposed here.
pub fn parse_returns<R: Read>(input: R) -> CliResult<Vec<f64>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut records = rdr.records();
    if let Some(idx) = column(&headers, "log_return") {
        return records.map(|r| r.map_err(csv_error).and_then(|r| number(&r, idx, "log_return"))).collect();
    }
    let (Some(_), Some(idx)) = (column(&headers, "date"), column(&headers, "close")) else {
        return Err(CliError::Data("returns file needs a log_return column or date,close columns".into()));
    };
    let mut out = Vec::new();
    let mut prev: Option<f64> = None;
    for r in records.by_ref() {
        let r = r.map_err(csv_error)?;
        let close = number(&r, idx, "close")?;
        if close <= 0.0 {
            return Err(CliError::Data(format!("line {}: close must be positive, got {close}", line_of(&r))));
        }
        if let Some(p) = prev {
            out.push((close / p).ln());
        }
        prev = Some(close);
    }
    Ok(out)
}

/// Reads a returns file and checks it forms a usable sample.
pub fn ingest_returns(path: &Path, delta: f64) -> CliResult<ReturnSample> {
    let values = parse_returns(open(path)?)?;
    ReturnSample::new(values, delta).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// A `log_return` CSV that `parse_returns` reads back unchanged.
pub fn write_returns(values: &[f64]) -> String {
    let mut s = String::from("log_return\n");
    for v in values {
        s.push_str(&fmt_num(*v));
        s.push('\n');
    }
    s
}

/// Quotes from `strike,maturity_days,mid_price[,kind]` with maturities in
/// years. Duplicate (strike, maturity) pairs are kept with a warning.
pub fn parse_quotes<R: Read>(input: R) -> CliResult<(Vec<OptionQuote>, Vec<String>)> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut idx = [0usize; 3];
    for (slot, name) in idx.iter_mut().zip(["strike", "maturity_days", "mid_price"]) {
        *slot = column(&headers, name)
            .ok_or_else(|| CliError::Data(format!("quotes file is missing column '{name}' (need strike,maturity_days,mid_price[,kind])")))?;
    }
    let kind_idx = column(&headers, "kind");
    let mut quotes = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashMap<(u64, u64), u64> = HashMap::new();
    for r in rdr.records() {
        let r = r.map_err(csv_error)?;
        let line = line_of(&r);
        let [strike, days, mid] = [
            number(&r, idx[0], "strike")?,
            number(&r, idx[1], "maturity_days")?,
            number(&r, idx[2], "mid_price")?,
        ];
        for (name, v) in [("strike", strike), ("maturity_days", days), ("mid_price", mid)] {
            if v <= 0.0 {
                return Err(CliError::Data(format!("line {line}: {name} must be positive, got {v}")));
            }
        }
        let kind = match kind_idx.and_then(|i| r.get(i)).unwrap_or("").to_ascii_lowercase().as_str() {
            "" | "call" | "c" => OptionKind::Call,
            "put" | "p" => OptionKind::Put,
            other => return Err(CliError::Data(format!("line {line}: kind '{other}' is neither call nor put"))),
        };
        if let Some(first) = seen.insert((strike.to_bits(), days.to_bits()), line) {
            warnings.push(format!("lines {first} and {line} repeat strike {strike} at {days} days"));
        }
        quotes.push(OptionQuote { strike, maturity: days / DAYS_PER_YEAR, mid_price: mid, kind });
    }
    if quotes.is_empty() {
        return Err(CliError::Data("quotes file has no rows".into()));
    }
    Ok((quotes, warnings))
}

pub fn ingest_quotes(path: &Path) -> CliResult<(Vec<OptionQuote>, Vec<String>)> {
    parse_quotes(open(path)?).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}
