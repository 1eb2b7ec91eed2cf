//! CSV emission and parsing. Numbers carry 12 significant digits.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use crate::experiment::{CdfRow, ResultRow, RowMode, StandardErrors};

pub const HEADER: &str = "sweep_param,sweep_value,mode,epsilon,throughput,p_out,reliability,se_epsilon,se_throughput,se_p_out";
pub const CDF_HEADER: &str = "u_a,gamma,cdf_analytic,cdf_empirical";

fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv<W: Write>(mut w: W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in rows {
        let se = r.standard_errors;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.sweep_param,
            opt(r.sweep_value),
            r.mode.tag(),
            num(r.epsilon),
            num(r.throughput),
            num(r.p_out),
            num(r.reliability),
            opt(se.map(|s| s.epsilon)),
            opt(se.map(|s| s.throughput)),
            opt(se.map(|s| s.p_out)),
        )?;
    }
    w.flush()
}

/// Writes `rows` to `path`.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        bail!("no rows to write to {}", path.display());
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(file), rows).with_context(|| format!("writing {}", path.display()))
}

pub fn write_cdf_csv<W: Write>(mut w: W, rows: &[CdfRow]) -> io::Result<()> {
    writeln!(w, "{CDF_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.u_a, num(r.gamma), opt(r.analytic), opt(r.empirical))?;
    }
    w.flush()
}

/// Parses text produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        bail!("missing or unexpected header");
    }
    lines
        .enumerate()
        .map(|(i, line)| parse_row(line).with_context(|| format!("line {}", i + 2)))
        .collect()
}

fn parse_row(line: &str) -> Result<ResultRow> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 10 {
        bail!("expected 10 columns, found {}", cols.len());
    }
    let f = |s: &str| s.parse::<f64>().with_context(|| format!("bad number `{s}`"));
    let o = |s: &str| if s.is_empty() { Ok(None) } else { f(s).map(Some) };
    let se = match (o(cols[7])?, o(cols[8])?, o(cols[9])?) {
        (Some(epsilon), Some(throughput), Some(p_out)) => Some(StandardErrors { epsilon, throughput, p_out }),
        (None, None, None) => None,
        _ => bail!("standard errors must be all present or all empty"),
    };
    Ok(ResultRow {
        sweep_param: cols[0].to_owned(),
        sweep_value: o(cols[1])?,
        mode: RowMode::from_tag(cols[2]).ok_or_else(|| anyhow!("unknown mode `{}`", cols[2]))?,
        epsilon: f(cols[3])?,
        throughput: f(cols[4])?,
        p_out: f(cols[5])?,
        reliability: f(cols[6])?,
        standard_errors: se,
    })
}
