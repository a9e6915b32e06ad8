//! Per-run trajectory tables.
//!
//! One row per time step `t = 0..=T`. Columns: `t`, `x_true_1..n`,
//! `z_1..n_y`, `xbar_1..n`, `trace_P`, `u_1..m`, `h_true`, `h_belief`,
//! `belief_risk`, `relaxed`, `delta`. The measurement cells are empty at
//! `t = 0` and the input cells (`u_*`, `relaxed`, `delta`) on the last row.
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::io::{Read, Write};

use nalgebra::DVector;
use riskcbf::simulate::TrajectoryRecord;

use crate::CliError;

/// Header for the given state, measurement and input dimensions.
pub fn header(n: usize, ny: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_true_{i}")));
    cols.extend((1..=ny).map(|i| format!("z_{i}")));
    cols.extend((1..=n).map(|i| format!("xbar_{i}")));
    cols.push("trace_P".into());
    cols.extend((1..=m).map(|i| format!("u_{i}")));
    for c in ["h_true", "h_belief", "belief_risk", "relaxed", "delta"] {
        cols.push(c.into());
    }
    cols
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_vec(row: &mut Vec<String>, v: Option<&DVector<f64>>, len: usize) {
    match v {
        Some(v) => row.extend(v.iter().map(|x| real(*x))),
        None => row.extend(std::iter::repeat_n(String::new(), len)),
    }
}

/// Writes `rec` as CSV. `ny` and `m` fix the column count even where the
/// record has no measurement or input to show.
pub fn write<W: Write>(rec: &TrajectoryRecord, ny: usize, m: usize, out: W) -> Result<(), CliError> {
    let n = rec.x_true.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n, ny, m))?;
    for t in 0..rec.x_true.len() {
        let mut row = vec![t.to_string()];
        push_vec(&mut row, Some(&rec.x_true[t]), n);
        push_vec(&mut row, rec.z[t].as_ref(), ny);
        push_vec(&mut row, Some(&rec.belief_mean[t]), n);
        row.push(real(rec.trace_p[t]));
        push_vec(&mut row, rec.u.get(t), m);
        row.push(real(rec.h_true[t]));
        row.push(real(rec.h_belief[t]));
        row.push(real(rec.belief_risk[t]));
        match (rec.relaxed.get(t), rec.delta.get(t)) {
            (Some(r), Some(d)) => {
                row.push(u8::from(*r).to_string());
                row.push(real(*d));
            }
            _ => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::Data(format!("csv: {e}")))?;
    Ok(())
}

fn count_prefixed(header: &csv::StringRecord, prefix: &str) -> usize {
    header
        .iter()
        .filter(|h| h.strip_prefix(prefix).is_some_and(|rest| rest.parse::<usize>().is_ok()))
        .count()
}

/// Parses a table written by [`write`]. The controller name and stream
/// seed are not part of the table and are taken from the caller.
pub fn read<R: Read>(input: R, controller: &str, seed: u64) -> Result<TrajectoryRecord, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let head = r.headers()?.clone();
    let n = count_prefixed(&head, "x_true_");
    let ny = count_prefixed(&head, "z_");
    let m = count_prefixed(&head, "u_");
    let expected = header(n, ny, m);
    if head.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Data("trajectory header does not match the expected column layout".into()));
    }

    let mut rec = TrajectoryRecord {
        controller: controller.to_string(),
        seed,
        x_true: Vec::new(),
        z: Vec::new(),
        belief_mean: Vec::new(),
        trace_p: Vec::new(),
        u: Vec::new(),
        h_true: Vec::new(),
        h_belief: Vec::new(),
        belief_risk: Vec::new(),
        relaxed: Vec::new(),
        delta: Vec::new(),
    };
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let cell = |i: usize| -> Result<Option<f64>, CliError> {
            let s = row.get(i).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| CliError::Data(format!("row {line}, column {}: {e}", expected[i])))
        };
        let required = |i: usize| cell(i)?.ok_or_else(|| CliError::Data(format!("row {line}: empty {}", expected[i])));
        let vector = |start: usize, len: usize| -> Result<Option<DVector<f64>>, CliError> {
            let cells = (start..start + len).map(&cell).collect::<Result<Vec<_>, _>>()?;
            if cells.iter().all(Option::is_none) && len > 0 {
                return Ok(None);
            }
            let values = cells
                .into_iter()
                .enumerate()
                .map(|(k, c)| c.ok_or_else(|| CliError::Data(format!("row {line}: empty {}", expected[start + k]))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Some(DVector::from_vec(values)))
        };

        let mut col = 1;
        let x = vector(col, n)?.ok_or_else(|| CliError::Data(format!("row {line}: missing state")))?;
        col += n;
        let z = vector(col, ny)?;
        col += ny;
        let xbar = vector(col, n)?.ok_or_else(|| CliError::Data(format!("row {line}: missing belief mean")))?;
        col += n;
        let trace = required(col)?;
        col += 1;
        let u = vector(col, m)?;
        col += m;
        rec.x_true.push(x);
        rec.z.push(z);
        rec.belief_mean.push(xbar);
        rec.trace_p.push(trace);
        rec.h_true.push(required(col)?);
        rec.h_belief.push(required(col + 1)?);
        rec.belief_risk.push(required(col + 2)?);
        if let Some(u) = u {
            rec.u.push(u);
            let flag = row.get(col + 3).unwrap_or("");
            rec.relaxed.push(match flag {
                "1" => true,
                "0" => false,
                other => return Err(CliError::Data(format!("row {line}: relaxed flag `{other}`"))),
            });
            rec.delta.push(required(col + 4)?);
        }
    }
    Ok(rec)
}
