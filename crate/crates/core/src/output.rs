//! CSV persistence for traces, verification reports and sweeps.
//!
//! Member lists and `S_k` columns number units from 1. Reals are written in
//! the shortest form that parses back to the same value, so output is
//! byte-identical for identical inputs.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use crate::analysis::VerificationReport;
use crate::engine::Trace;
use crate::sweep::SweepCell;

pub const EVENTS_FILE: &str = "events.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

fn real(x: f64) -> String {
    format!("{x}")
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn finish<W: Write>(mut wtr: csv::Writer<W>) -> io::Result<()> {
    wtr.flush()
}

fn create(path: &Path) -> io::Result<io::BufWriter<File>> {
    Ok(io::BufWriter::new(File::create(path)?))
}

/// Columns `n, t, coalition_size, members`.
pub fn write_events<W: Write>(w: W, trace: &Trace) -> io::Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(["n", "t", "coalition_size", "members"])?;
    for e in &trace.events {
        let members = e
            .coalition
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(";");
        wtr.write_record([e.n.to_string(), real(e.t), e.size().to_string(), members])?;
    }
    finish(wtr)
}

/// Columns `t, S_1, ..., S_m`. Writes only the header when the trace has no
/// samples.
pub fn write_samples<W: Write>(w: W, trace: &Trace) -> io::Result<()> {
    let mut wtr = writer(w);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=trace.m).map(|k| format!("S_{k}")))
        .collect();
    wtr.write_record(&header)?;
    for row in trace.samples.iter().flatten() {
        let record: Vec<String> = std::iter::once(real(row.t))
            .chain(row.satisfactions.iter().map(|&s| real(s)))
            .collect();
        wtr.write_record(&record)?;
    }
    finish(wtr)
}

pub const REPORT_HEADER: [&str; 27] = [
    "trial",
    "m",
    "is_cooperative",
    "is_complete",
    "is_large",
    "is_weak",
    "is_similar",
    "similarity_lhs",
    "r_value",
    "waiting_bound",
    "bounds_estimated",
    "n_events",
    "end_time",
    "first_grand_coalition",
    "grand_coalition_count",
    "post_gc_pure",
    "min_recurrences",
    "theorem1",
    "theorem1_detail",
    "waiting_time",
    "waiting_time_detail",
    "theorem2",
    "theorem2_detail",
    "assertion_a",
    "assertion_a_detail",
    "assertion_b",
    "assertion_b_detail",
];

/// One row per `(trial, report)`.
pub fn write_report<W: Write>(
    w: W,
    min_recurrences: usize,
    rows: &[(usize, VerificationReport)],
) -> io::Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(REPORT_HEADER)?;
    for (trial, r) in rows {
        let p = &r.predicates;
        let s = &r.summary;
        let mut record = vec![
            trial.to_string(),
            p.m.to_string(),
            p.is_cooperative.to_string(),
            p.is_complete.to_string(),
            p.is_large.to_string(),
            p.is_weak.to_string(),
            p.is_similar.to_string(),
            real(p.similarity_lhs),
            opt(p.r_value),
            real(p.waiting_bound),
            p.bounds_estimated.to_string(),
            s.n_events.to_string(),
            real(s.end_time),
            opt(s.first_grand_coalition),
            s.grand_coalition_count.to_string(),
            opt(s.post_gc_pure),
            min_recurrences.to_string(),
        ];
        for v in r.verdicts.all() {
            record.push(v.label().to_string());
            record.push(v.detail().to_string());
        }
        wtr.write_record(&record)?;
    }
    finish(wtr)
}

pub const SWEEP_HEADER: [&str; 18] = [
    "m",
    "delta",
    "theta",
    "spread",
    "is_complete",
    "is_large",
    "is_similar",
    "similarity_lhs",
    "r_value",
    "waiting_bound",
    "trials",
    "failures",
    "gc_found",
    "wait_mean",
    "wait_max",
    "purity",
    "violations",
    "bounds_estimated",
];

pub fn write_sweep<W: Write>(w: W, cells: &[SweepCell]) -> io::Result<()> {
    let mut wtr = writer(w);
    wtr.write_record(SWEEP_HEADER)?;
    for c in cells {
        let p = &c.predicates;
        wtr.write_record([
            c.m.to_string(),
            opt(c.delta),
            real(c.theta),
            real(c.spread),
            p.is_complete.to_string(),
            p.is_large.to_string(),
            p.is_similar.to_string(),
            real(p.similarity_lhs),
            opt(p.r_value),
            real(p.waiting_bound),
            c.trials.to_string(),
            c.failures.to_string(),
            c.gc_found.to_string(),
            opt(c.wait_mean),
            opt(c.wait_max),
            opt(c.purity),
            c.violations.to_string(),
            p.bounds_estimated.to_string(),
        ])?;
    }
    finish(wtr)
}

pub fn save_events(path: &Path, trace: &Trace) -> io::Result<()> {
    write_events(create(path)?, trace)
}

pub fn save_samples(path: &Path, trace: &Trace) -> io::Result<()> {
    write_samples(create(path)?, trace)
}

pub fn save_report(
    path: &Path,
    min_recurrences: usize,
    rows: &[(usize, VerificationReport)],
) -> io::Result<()> {
    write_report(create(path)?, min_recurrences, rows)
}

pub fn save_sweep(path: &Path, cells: &[SweepCell]) -> io::Result<()> {
    write_sweep(create(path)?, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Stop};
    use crate::models::Model;
    use crate::network::{NetworkConfig, WeightMatrix};

    fn e1_at_rest() -> NetworkConfig {
        NetworkConfig::new(
            vec![Model::linear(1.0, 1.0).unwrap(); 19],
            WeightMatrix::uniform(19, 0.3).unwrap(),
            vec![vec![0.0]; 19],
        )
        .unwrap()
    }

    fn text(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn events_rows_for_grand_coalitions() {
        let trace = run(&e1_at_rest(), Stop::MaxTime(20.0), None).unwrap();
        let out = text(|b| write_events(b, &trace));
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "n,t,coalition_size,members");
        assert_eq!(lines.len(), 21);
        let members = (1..=19).map(|k| k.to_string()).collect::<Vec<_>>().join(";");
        assert_eq!(lines[1], format!("0,1,19,{members}"));
    }

    #[test]
    fn samples_header_and_rows() {
        let cfg = NetworkConfig::new(
            vec![Model::linear(1.0, 1.0).unwrap(); 2],
            WeightMatrix::uniform(2, 0.0).unwrap(),
            vec![vec![0.0], vec![0.5]],
        )
        .unwrap();
        let trace = run(&cfg, Stop::MaxTime(0.25), Some(0.25)).unwrap();
        let out = text(|b| write_samples(b, &trace));
        assert_eq!(out, "t,S_1,S_2\n0,0,0.5\n0.25,0.25,0.75\n");
    }

    #[test]
    fn report_has_one_row_per_trace() {
        let cfg = e1_at_rest();
        let trace = run(&cfg, Stop::MaxTime(20.0), None).unwrap();
        let report = VerificationReport::new(&cfg, &trace, 10);
        let out = text(|b| write_report(b, 10, &[(0, report.clone()), (1, report)]));
        let mut rdr = csv::Reader::from_reader(out.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), REPORT_HEADER.len());
        let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(&rows[0][17], "CONFIRMED");
        assert_eq!(&rows[1][0], "1");
    }
}
