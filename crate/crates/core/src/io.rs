//! Plain-text spike files and event-time ingestion.
//!
//! A spike file is a header `# delta=<seconds> p=<int> n=<int>` followed by
//! `p + n` lines holding 0 or 1, prehistory first.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::SpikeTrain;

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

struct Header {
    delta: f64,
    p: usize,
    n: usize,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let Some(rest) = line.trim().strip_prefix('#') else {
        return parse_err(lineno, "expected header '# delta=<s> p=<int> n=<int>'");
    };
    let (mut delta, mut p, mut n) = (None, None, None);
    for tok in rest.split_whitespace() {
        let Some((key, value)) = tok.split_once('=') else {
            return parse_err(lineno, format!("malformed header field {tok:?}"));
        };
        let bad = || Error::Parse { line: lineno, msg: format!("bad value for {key}: {value:?}") };
        match key {
            "delta" => delta = Some(value.parse::<f64>().map_err(|_| bad())?),
            "p" => p = Some(value.parse::<usize>().map_err(|_| bad())?),
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            _ => return parse_err(lineno, format!("unknown header field {key:?}")),
        }
    }
    match (delta, p, n) {
        (Some(delta), Some(p), Some(n)) if delta > 0.0 && n > 0 => Ok(Header { delta, p, n }),
        (Some(_), Some(_), Some(_)) => parse_err(lineno, "delta must be positive and n at least 1"),
        _ => parse_err(lineno, "header must set delta, p and n"),
    }
}

pub fn read_spike_file<R: BufRead>(reader: R) -> Result<SpikeTrain> {
    let mut header = None;
    let mut bins = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if header.is_none() {
            header = Some(parse_header(&line, lineno)?);
            continue;
        }
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        match s {
            "0" => bins.push(0),
            "1" => bins.push(1),
            _ => return parse_err(lineno, format!("expected 0 or 1, found {s:?}")),
        }
    }
    let Some(h) = header else {
        return parse_err(1, "empty spike file");
    };
    if bins.len() != h.p + h.n {
        return Err(Error::InvalidInput(format!(
            "header announces {} bins (p + n) but the file holds {}",
            h.p + h.n,
            bins.len()
        )));
    }
    SpikeTrain::from_bins(bins, h.p, h.delta)
}

pub fn write_spike_file<W: Write>(train: &SpikeTrain, mut out: W) -> Result<()> {
    writeln!(out, "# delta={} p={} n={}", train.delta(), train.p(), train.n())?;
    for &b in train.bins() {
        writeln!(out, "{b}")?;
    }
    Ok(())
}

/// One timestamp (seconds) per line, optionally in the first column of a
/// CSV. Blank lines and `#` comments are skipped, as is a non-numeric
/// first line (a column header).
pub fn read_event_times<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut times = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let field = s.split(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => times.push(t),
            Ok(t) => return parse_err(i + 1, format!("event time must be finite and non-negative, got {t}")),
            Err(_) if i == 0 => continue,
            Err(_) => return parse_err(i + 1, format!("expected a timestamp, found {field:?}")),
        }
    }
    Ok(times)
}

/// Bins events by `floor(t / delta)`; several events in one bin count once.
/// The first `p` bins become prehistory. `total` defaults to one past the
/// bin of the last event.
pub fn bin_events(times: &[f64], delta: f64, p: usize, total: Option<usize>) -> Result<SpikeTrain> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("bin width must be positive".into()));
    }
    let index = |t: f64| (t / delta).floor() as usize;
    let len = total.unwrap_or_else(|| times.iter().map(|&t| index(t) + 1).max().unwrap_or(0));
    if len <= p {
        return Err(Error::InvalidInput(format!("{len} bins leave no observations after {p} prehistory bins")));
    }
    let mut bins = vec![0u8; len];
    for &t in times {
        if let Some(b) = bins.get_mut(index(t)) {
            *b = 1;
        }
    }
    SpikeTrain::from_bins(bins, p, delta)
}
