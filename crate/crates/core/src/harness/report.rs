use std::io::Write;

use super::{ExperimentReport, SweepParam};
use crate::error::Result;

pub const CSV_HEADER: [&str; 21] = [
    "param",
    "value",
    "algorithm",
    "n",
    "m",
    "budget",
    "epsilon",
    "trials",
    "opt",
    "sample_size",
    "mean_value",
    "std_value",
    "mean_ratio",
    "std_ratio",
    "stderr_ratio",
    "min_ratio",
    "max_ratio",
    "feasibility_rate",
    "halt_rate",
    "mean_halt_index",
    "mean_accepted",
];

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write>(mut out: W, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// One row per (swept value, algorithm). Report metadata goes first as
/// `#`-prefixed comment lines.
pub fn write_csv<W: Write>(mut out: W, param: Option<SweepParam>, reports: &[(f64, ExperimentReport)]) -> Result<()> {
    if let Some((_, first)) = reports.first() {
        writeln!(out, "# prng: {}", first.metadata.prng)?;
        writeln!(out, "# permutation: {}", first.metadata.permutation)?;
        writeln!(out, "# flags: {}", serde_json::to_string(&first.metadata.flags)?)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (value, r) in reports {
        for s in &r.algorithms {
            w.write_record([
                param.map_or("", SweepParam::name).to_string(),
                if param.is_some() { value.to_string() } else { String::new() },
                s.algorithm.to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.budget.to_string(),
                r.epsilon.to_string(),
                r.trials.to_string(),
                r.opt.to_string(),
                opt(s.sample_size.map(|k| k.to_string())),
                s.mean_value.to_string(),
                s.std_value.to_string(),
                s.mean_ratio.to_string(),
                s.std_ratio.to_string(),
                s.stderr_ratio.to_string(),
                s.min_ratio.to_string(),
                s.max_ratio.to_string(),
                s.feasibility_rate.to_string(),
                s.halt_rate.to_string(),
                opt(s.mean_halt_index.map(|h| h.to_string())),
                s.mean_accepted.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
