//! Configuration-driven grid scans across the exact, iMPS and Monte Carlo
//! engines, with resumable streaming output.

pub mod config;
pub mod report;
pub mod run;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

pub use config::{load_config, parse_label, Engine, Family, Label, Point, ScanConfig};
pub use report::{
    classify_at_phase, critical_onsets, emit_report, fmt_num, phase_table, read_csv, AtPhase, CsvSink, Format,
    ObsValue, Onset, ScanRecord, CODE_VERSION,
};
pub use run::{build_model, collect_scan, row_key, run_scan, unit_keys, units, RunOptions, Unit};

use crate::error::{Error, Result};

/// Files written by [`run_to_dir`].
#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub csv: PathBuf,
    pub json: Option<PathBuf>,
    /// All rows, including those recovered from a resumed file.
    pub rows: Vec<ScanRecord>,
    /// Rows computed in this invocation.
    pub computed: usize,
}

/// Drops a trailing partial line left by an interrupted write.
fn repair_tail(path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = std::fs::read(path).map_err(io)?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    std::fs::write(path, &bytes[..keep]).map_err(io)
}

/// Streams rows to `<dir>/<stem>.csv` and, when enabled, writes
/// `<dir>/<stem>.json` at the end. With `resume`, rows already present in
/// the CSV are kept and their keys skipped; the file must come from the
/// same configuration.
pub fn run_to_dir(cfg: &ScanConfig, opts: &RunOptions, dir: &Path, resume: bool) -> Result<ScanOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let csv = dir.join(format!("{}.csv", cfg.output.stem));
    let mut rows = Vec::new();
    if resume && csv.exists() {
        repair_tail(&csv)?;
        rows = read_csv(&csv)?;
        let hash = cfg.hash();
        if let Some(r) = rows.iter().find(|r| r.config_hash != hash) {
            return Err(Error::Validation {
                field: "resume".into(),
                msg: format!(
                    "{} holds rows of configuration {} but this configuration hashes to {hash}",
                    csv.display(),
                    r.config_hash
                ),
            });
        }
    } else if csv.exists() {
        std::fs::remove_file(&csv).map_err(|source| Error::Io {
            path: csv.display().to_string(),
            source,
        })?;
    }
    let skip: HashSet<String> = rows.iter().map(|r| r.key.clone()).collect();
    let mut sink = CsvSink::open(&csv, &cfg.observables, cfg.engine.contains(&Engine::Mc))?;
    let before = rows.len();
    run_scan(cfg, opts, &skip, |r| {
        sink.write(&r)?;
        rows.push(r);
        Ok(())
    })?;
    let computed = rows.len() - before;
    let json = if cfg.output.json && !rows.is_empty() {
        let p = dir.join(format!("{}.json", cfg.output.stem));
        emit_report(&rows, cfg, Format::Json, &p)?;
        Some(p)
    } else {
        None
    };
    Ok(ScanOutput {
        csv,
        json,
        rows,
        computed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip_seconds(text: &str) -> String {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().unwrap().clone();
        let sec = header.iter().position(|h| h == "seconds").unwrap();
        let mut out = vec![header.iter().collect::<Vec<_>>().join(",")];
        for rec in rd.records() {
            let rec = rec.unwrap();
            out.push(rec.iter().enumerate().filter(|(i, _)| *i != sec).map(|(_, f)| f).collect::<Vec<_>>().join(","));
        }
        out.join("\n")
    }

    fn selfdual() -> ScanConfig {
        ScanConfig::parse(
            "family = \"selfdual-at\"\np = [0.0, 0.25, 0.5]\nengine = \"exact\"\n\
             observables = [\"e.I|e.I\", \"I.I|m.m\"]\n[exact]\nlx = [4]\n[output]\njson = true\n",
        )
        .unwrap()
    }

    #[test]
    fn xi_increases_along_the_self_dual_line() {
        let rows = collect_scan(&selfdual(), &RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        let xi: Vec<f64> = rows.iter().map(|r| r.xi.unwrap()).collect();
        assert!(xi[0] < xi[1] && xi[1] < xi[2], "{xi:?}");
        assert!(rows.iter().all(|r| r.converged && r.error.is_none()));
        assert!(rows.iter().all(|r| r.observables.iter().all(|o| o.value.is_some())));
    }

    #[test]
    fn p_independence_at_h_one() {
        let cfg = ScanConfig::parse(
            "family = \"coupled\"\nh = [1.0]\np = [0.0, 0.3]\nengine = \"exact\"\n\
             observables = [\"e.I|e.I\", \"I.I|e.e\"]\n[exact]\nlx = [3]\n",
        )
        .unwrap();
        let rows = collect_scan(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        let (a, b) = (&rows[0], &rows[1]);
        assert!(a.error.is_none(), "{:?}", a.error);
        assert!((a.xi.unwrap() - b.xi.unwrap()).abs() < 1e-10);
        for (x, y) in a.observables.iter().zip(&b.observables) {
            assert!((x.value.unwrap() - y.value.unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn failures_stay_in_their_rows() {
        let cfg = ScanConfig::parse(
            "family = \"nflavor\"\nh = [0.3, 1.0]\np = [0.1]\nn = [2]\nengine = [\"exact\", \"mc\"]\n\
             observables = [\"e.I|e.I\"]\nseparation = 2\n[exact]\nlx = [2]\n[mc]\nlx = 4\nly = 4\nsweeps = 400\nthermalization = 80\n",
        )
        .unwrap();
        let rows = collect_scan(&cfg, &RunOptions { workers: 2, cache: None }).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].error.is_none() && rows[1].error.is_none());
        assert!(rows[1].observables[0].error.is_some());
        assert!(rows[2].error.is_some() && !rows[2].converged);
        assert!(rows[3].error.is_some());
    }

    #[test]
    fn deterministic_and_resumable() {
        let cfg = selfdual();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let full = run_to_dir(&cfg, &RunOptions { workers: 3, cache: None }, d1.path(), false).unwrap();
        assert_eq!(full.computed, 3);
        let again = run_to_dir(&cfg, &RunOptions::default(), d2.path(), false).unwrap();
        let text1 = std::fs::read_to_string(&full.csv).unwrap();
        let text2 = std::fs::read_to_string(&again.csv).unwrap();
        assert_eq!(strip_seconds(&text1), strip_seconds(&text2));

        // Keep the header and one row plus half of the next line.
        let lines: Vec<&str> = text1.lines().collect();
        let partial = format!("{}\n{}\n{}", lines[0], lines[1], &lines[2][..10]);
        std::fs::write(&again.csv, partial).unwrap();
        let resumed = run_to_dir(&cfg, &RunOptions::default(), d2.path(), true).unwrap();
        assert_eq!(resumed.computed, 2);
        let text3 = std::fs::read_to_string(&resumed.csv).unwrap();
        assert_eq!(strip_seconds(&text1), strip_seconds(&text3));
        assert!(resumed.json.is_some());

        let done = run_to_dir(&cfg, &RunOptions::default(), d2.path(), true).unwrap();
        assert_eq!(done.computed, 0);

        let mut other = cfg.clone();
        other.seed = 7;
        assert!(run_to_dir(&other, &RunOptions::default(), d2.path(), true).is_err());
    }

    #[test]
    fn fes_ladder_rows_and_summary() {
        let cfg = ScanConfig::parse(
            "family = \"selfdual-at\"\np = [0.2]\nengine = \"imps\"\nobservables = [\"e.I|e.I\", \"I.I|m.m\"]\n\
             [imps]\nchi = [2, 3, 4, 6]\nfit_min_chi = 2\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cache = dir.path().join("cache");
        let opts = RunOptions {
            workers: 1,
            cache: Some(cache.clone()),
        };
        let rows = collect_scan(&cfg, &opts).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows[..4].iter().all(|r| r.size_param.is_some() && r.c_fit.is_none() && r.s_vn.is_some()));
        assert!(rows[4].size_param.is_none() && rows[4].c_fit.is_some());
        assert!(rows[0].observables[0].value.is_some());
        assert!(rows[0].observables[1].value.is_none());
        assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 4);
        let warm = collect_scan(&cfg, &opts).unwrap();
        for (a, b) in rows.iter().zip(&warm) {
            if let (Some(x), Some(y)) = (a.xi, b.xi) {
                assert!((x - y).abs() < 1e-6 * x.max(1.0));
            }
        }
    }
}
