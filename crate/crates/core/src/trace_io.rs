//! CSV trace files, event sidecars and the servo stream line format.
//!
//! Trace header: `t,theta_1..theta_n,phi_1..phi_n,r_1..r_n,x_1..x_n`.
//! `phi` is radians, `theta`, `r` and `x` are degrees; every value is
//! printed with six decimals.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::sim::{EventMarker, Trace};

pub const EVENTS_HEADER: &str = "time_s,kind,details";

pub fn trace_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    for prefix in ["theta", "phi", "r", "x"] {
        cols.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    cols.join(",")
}

fn fixed6(v: f64) -> String {
    // + 0.0 folds -0.0 into 0.0
    format!("{:.6}", v + 0.0)
}

pub fn write_trace<W: Write>(trace: &Trace, mut out: W) -> Result<()> {
    let n = trace.n();
    writeln!(out, "{}", trace_header(n))?;
    let mut line = String::new();
    for k in 0..trace.len() {
        line.clear();
        line.push_str(&fixed6(trace.times[k]));
        for channel in [&trace.theta, &trace.phi, &trace.r, &trace.x] {
            for col in channel.iter() {
                line.push(',');
                line.push_str(&fixed6(col[k]));
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a trace written by [`write_trace`]. Rate channels are left empty.
pub fn read_trace<R: BufRead>(input: R) -> Result<Trace> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("trace file is empty".into()))??;
    let header = header.trim_end();
    let cols = header.split(',').count();
    if cols < 5 || (cols - 1) % 4 != 0 {
        return Err(Error::Parse(format!("trace header has {cols} columns")));
    }
    let n = (cols - 1) / 4;
    if header != trace_header(n) {
        return Err(Error::Parse(format!(
            "unexpected trace header `{header}`, expected `{}`",
            trace_header(n)
        )));
    }
    let mut trace = Trace {
        theta: vec![Vec::new(); n],
        phi: vec![Vec::new(); n],
        r: vec![Vec::new(); n],
        x: vec![Vec::new(); n],
        ..Default::default()
    };
    for (row, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", row + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != cols {
            return Err(Error::Parse(format!(
                "line {}: {} values, expected {cols}",
                row + 2,
                values.len()
            )));
        }
        trace.times.push(values[0]);
        for (c, channel) in [&mut trace.theta, &mut trace.phi, &mut trace.r, &mut trace.x]
            .into_iter()
            .enumerate()
        {
            for (i, col) in channel.iter_mut().enumerate() {
                col.push(values[1 + c * n + i]);
            }
        }
    }
    Ok(trace)
}

pub fn write_events<W: Write>(markers: &[EventMarker], mut out: W) -> Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for m in markers {
        writeln!(out, "{},{},{}", fixed6(m.time), m.kind, m.details)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_events<R: BufRead>(input: R) -> Result<Vec<EventMarker>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == EVENTS_HEADER => {}
        _ => return Err(Error::Parse(format!("events file must start with `{EVENTS_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.trim_end().splitn(3, ',');
        let (Some(t), Some(kind), details) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!("events line {}: too few fields", row + 2)));
        };
        out.push(EventMarker {
            time: t
                .parse()
                .map_err(|e| Error::Parse(format!("events line {}: {e}", row + 2)))?,
            kind: kind.to_string(),
            details: details.unwrap_or_default().to_string(),
        });
    }
    Ok(out)
}

/// One stream line: `t_s,theta1_deg,...` with three decimals.
pub fn stream_line(t: f64, theta_deg: &[f64]) -> String {
    let mut line = format!("{:.3}", t + 0.0);
    for v in theta_deg {
        line.push_str(&format!(",{:.3}", v + 0.0));
    }
    line
}

/// Parses a stream line, tolerating a trailing `\r`.
pub fn parse_stream_line(line: &str) -> Result<(f64, Vec<f64>)> {
    let mut values = line
        .trim_end_matches(['\r', '\n'])
        .split(',')
        .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}"))));
    let t = values
        .next()
        .ok_or_else(|| Error::Parse("empty stream line".into()))??;
    Ok((t, values.collect::<Result<_>>()?))
}
