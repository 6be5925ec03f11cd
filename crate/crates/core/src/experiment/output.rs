use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optimizer::ConvergenceRecord;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub const CSV_HEADER: [&str; 13] = [
    "k",
    "J",
    "J_data_phi",
    "J_data_sigma",
    "J_reg_phi",
    "J_reg_sigma",
    "v_phi_norm",
    "v_sigma_norm",
    "m_k",
    "step",
    "cells",
    "newton_iters",
    "wall_s",
];

/// CSV text of a convergence record. `wall_s` is left empty unless `timing`
/// is set, so that reruns are byte-identical.
pub fn convergence_csv(record: &ConvergenceRecord, timing: bool) -> Result<String> {
    if record.rows.is_empty() {
        return Err(Error::Config("empty convergence record".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &record.rows {
        let b = &r.breakdown;
        w.write_record([
            r.k.to_string(),
            r.cost.to_string(),
            b.data_phi.to_string(),
            b.data_sigma.to_string(),
            b.reg_phi.to_string(),
            b.reg_sigma.to_string(),
            r.v_phi_norm.to_string(),
            r.v_sigma_norm.to_string(),
            r.m.map(|m| m.to_string()).unwrap_or_default(),
            r.step.map(|s| s.to_string()).unwrap_or_default(),
            r.cells.to_string(),
            r.newton_iters.to_string(),
            if timing { format!("{:.3}", r.wall_s) } else { String::new() },
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

pub fn write_convergence_csv(record: &ConvergenceRecord, path: &Path, timing: bool) -> Result<()> {
    atomic_write(path, convergence_csv(record, timing)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{CostBreakdown, IterationRecord, StopReason};

    fn row(k: usize, m: Option<u32>) -> IterationRecord {
        let breakdown = CostBreakdown { data_phi: 0.5 / k as f64, data_sigma: 0.0, reg_phi: 0.1, reg_sigma: 0.0 };
        IterationRecord {
            k,
            cost: breakdown.total(),
            breakdown,
            v_phi_norm: 1.0 / k as f64,
            v_sigma_norm: 0.0,
            m,
            step: m.map(|m| 0.9f64.powi(m as i32)),
            cells: 8,
            newton_iters: 3,
            wall_s: 0.25,
        }
    }

    #[test]
    fn one_row_record() {
        let rec = ConvergenceRecord { rows: vec![row(1, None)], stop: StopReason::Tolerance };
        let s = convergence_csv(&rec, false).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(lines[1].ends_with(",,,8,3,"), "{}", lines[1]);
        assert!(convergence_csv(&rec, true).unwrap().ends_with(",0.250\n"));
        let empty = ConvergenceRecord { rows: vec![], stop: StopReason::Tolerance };
        assert!(convergence_csv(&empty, false).is_err());
    }

    #[test]
    fn columns_sum_to_cost() {
        let rec = ConvergenceRecord { rows: vec![row(1, Some(2)), row(2, Some(0)), row(3, None)], stop: StopReason::Tolerance };
        let s = convergence_csv(&rec, false).unwrap();
        for line in s.lines().skip(1) {
            let v: Vec<f64> = line.split(',').take(6).map(|x| x.parse().unwrap()).collect();
            assert!((v[1] - (v[2] + v[3] + v[4] + v[5])).abs() <= 1e-12);
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
