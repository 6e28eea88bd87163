//! Scan rows and their CSV/JSON serialization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ScanConfig;
use crate::error::{Error, Result};

/// Version string stamped into every row.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsValue {
    pub label: String,
    pub value: Option<f64>,
    /// Statistical error bar, for sampled estimates.
    pub error: Option<f64>,
}

/// One output row. `size_param` is the width for the exact engine, the bond
/// dimension for the iMPS engine and the torus side for Monte Carlo. An
/// iMPS ladder closes with a summary row that has no `size_param` and
/// carries `c_fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub key: String,
    pub h: Option<f64>,
    pub p: f64,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub engine: String,
    pub size_param: Option<usize>,
    pub xi: Option<f64>,
    pub s_vn: Option<f64>,
    pub free_energy: Option<f64>,
    pub c_fit: Option<f64>,
    pub observables: Vec<ObsValue>,
    pub converged: bool,
    pub seconds: f64,
    pub error: Option<String>,
    pub config_hash: String,
    pub code_version: String,
}

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Scientific notation with 17 significant digits; empty for a missing value.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:.16e}"),
    }
}

fn parse_num(s: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|e| format!("bad number `{s}`: {e}"))
}

/// Column names in their fixed order. Error columns for observables appear
/// only when `with_errors` is set.
pub fn csv_header(labels: &[String], with_errors: bool) -> Vec<String> {
    let mut h: Vec<String> = ["h", "p", "theta", "engine", "size_param", "xi", "S_vn", "free_energy", "c_fit"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for l in labels {
        h.push(format!("obs_{l}"));
        if with_errors {
            h.push(format!("obs_{l}_err"));
        }
    }
    for s in ["converged", "seconds", "n", "key", "error", "config_hash", "code_version"] {
        h.push(s.into());
    }
    h
}

pub fn csv_fields(r: &ScanRecord, with_errors: bool) -> Vec<String> {
    let mut f = vec![
        fmt_num(r.h),
        fmt_num(Some(r.p)),
        fmt_num(r.theta),
        r.engine.clone(),
        r.size_param.map(|s| s.to_string()).unwrap_or_default(),
        fmt_num(r.xi),
        fmt_num(r.s_vn),
        fmt_num(r.free_energy),
        fmt_num(r.c_fit),
    ];
    for o in &r.observables {
        f.push(fmt_num(o.value));
        if with_errors {
            f.push(fmt_num(o.error));
        }
    }
    f.push(r.converged.to_string());
    f.push(format!("{:.3}", r.seconds));
    f.push(r.n.map(|n| n.to_string()).unwrap_or_default());
    f.push(r.key.clone());
    f.push(r.error.clone().unwrap_or_default());
    f.push(r.config_hash.clone());
    f.push(r.code_version.clone());
    f
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Streaming CSV writer that flushes after every row.
pub struct CsvSink {
    inner: csv::Writer<File>,
    path: std::path::PathBuf,
    with_errors: bool,
}

impl CsvSink {
    /// Opens `path` for appending; writes the header when the file is new
    /// or empty.
    pub fn open(path: &Path, labels: &[String], with_errors: bool) -> Result<Self> {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut inner = csv::Writer::from_writer(file);
        if fresh {
            inner
                .write_record(csv_header(labels, with_errors))
                .map_err(|e| csv_err(path, e))?;
            inner.flush().map_err(io_err(path))?;
        }
        Ok(Self {
            inner,
            path: path.to_path_buf(),
            with_errors,
        })
    }

    pub fn write(&mut self, r: &ScanRecord) -> Result<()> {
        self.inner
            .write_record(csv_fields(r, self.with_errors))
            .map_err(|e| csv_err(&self.path, e))?;
        self.inner.flush().map_err(io_err(&self.path))
    }
}

/// Reads rows written by [`CsvSink`] or [`emit_report`].
pub fn read_csv(path: &Path) -> Result<Vec<ScanRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| {
        col(name).ok_or_else(|| Error::Invalid(format!("{}: missing column `{name}`", path.display())))
    };
    let idx: BTreeMap<&str, usize> = [
        "h", "p", "theta", "engine", "size_param", "xi", "S_vn", "free_energy", "c_fit", "converged", "seconds",
        "n", "key", "error", "config_hash", "code_version",
    ]
    .into_iter()
    .map(|n| need(n).map(|i| (n, i)))
    .collect::<Result<_>>()?;
    let obs: Vec<(String, usize, Option<usize>)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let l = h.strip_prefix("obs_")?;
            if l.ends_with("_err") && col(&format!("obs_{}", &l[..l.len() - 4])).is_some() {
                return None;
            }
            Some((l.to_string(), i, col(&format!("obs_{l}_err"))))
        })
        .collect();
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |m: String| Error::Invalid(format!("{} row {}: {m}", path.display(), line + 2));
        let get = |n: &str| rec.get(idx[n]).unwrap_or("");
        let num = |n: &str| parse_num(get(n)).map_err(bad);
        let opt_usize = |n: &str| -> Result<Option<usize>> {
            let s = get(n);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| bad(format!("bad integer `{s}`: {e}")))
            }
        };
        let observables = obs
            .iter()
            .map(|(l, i, e)| {
                Ok(ObsValue {
                    label: l.clone(),
                    value: parse_num(rec.get(*i).unwrap_or("")).map_err(bad)?,
                    error: match e {
                        Some(j) => parse_num(rec.get(*j).unwrap_or("")).map_err(bad)?,
                        None => None,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let error = get("error");
        out.push(ScanRecord {
            key: get("key").into(),
            h: num("h")?,
            p: num("p")?.ok_or_else(|| bad("missing p".into()))?,
            theta: num("theta")?,
            n: opt_usize("n")?,
            engine: get("engine").into(),
            size_param: opt_usize("size_param")?,
            xi: num("xi")?,
            s_vn: num("S_vn")?,
            free_energy: num("free_energy")?,
            c_fit: num("c_fit")?,
            observables,
            converged: get("converged") == "true",
            seconds: num("seconds")?.unwrap_or(0.0),
            error: (!error.is_empty()).then(|| error.to_string()),
            config_hash: get("config_hash").into(),
            code_version: get("code_version").into(),
        });
    }
    Ok(out)
}

/// First `p` along each `(h, engine, size)` cut where `1/ξ` drops below the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Onset {
    pub h: Option<f64>,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub engine: String,
    pub size_param: Option<usize>,
    pub threshold: f64,
    pub p: Option<f64>,
}

pub fn critical_onsets(rows: &[ScanRecord], threshold: f64) -> Vec<Onset> {
    type Cut = (Option<u64>, Option<u64>, Option<usize>, String, Option<usize>);
    let mut cuts: BTreeMap<Cut, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let (Some(xi), Some(_)) = (r.xi, r.size_param) {
            let k = (r.h.map(f64::to_bits), r.theta.map(f64::to_bits), r.n, r.engine.clone(), r.size_param);
            cuts.entry(k).or_default().push((r.p, xi));
        }
    }
    cuts.into_iter()
        .map(|((h, theta, n, engine, size_param), mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let p = pts.iter().find(|(_, xi)| 1.0 / xi < threshold).map(|q| q.0);
            Onset {
                h: h.map(f64::from_bits),
                theta: theta.map(f64::from_bits),
                n,
                engine,
                size_param,
                threshold,
                p,
            }
        })
        .collect()
}

/// Ashkin–Teller phase read off the flavor-`s` and composite `sτ`
/// two-point functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtPhase {
    /// Both `s` and `sτ` long-range ordered.
    Ordered,
    /// Only `sτ` ordered.
    PartialOrdered,
    Disordered,
}

pub fn classify_at_phase(g_s: f64, g_st: f64, threshold: f64) -> AtPhase {
    match (g_s.abs() > threshold, g_st.abs() > threshold) {
        (true, _) => AtPhase::Ordered,
        (false, true) => AtPhase::PartialOrdered,
        (false, false) => AtPhase::Disordered,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseCell {
    pub key: String,
    pub p: f64,
    pub theta: Option<f64>,
    pub phase: AtPhase,
}

/// Classifies rows that carry both `I.I|e.e` and `e.I|e.I`.
pub fn phase_table(rows: &[ScanRecord], threshold: f64) -> Vec<PhaseCell> {
    let value = |r: &ScanRecord, l: &str| r.observables.iter().find(|o| o.label == l).and_then(|o| o.value);
    rows.iter()
        .filter_map(|r| {
            let phase = classify_at_phase(value(r, "I.I|e.e")?, value(r, "e.I|e.I")?, threshold);
            Some(PhaseCell {
                key: r.key.clone(),
                p: r.p,
                theta: r.theta,
                phase,
            })
        })
        .collect()
}

/// Writes `rows` as CSV, or as JSON together with the configuration and
/// the derived onset and phase tables.
pub fn emit_report(rows: &[ScanRecord], cfg: &ScanConfig, format: Format, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Invalid("report needs at least one row".into()));
    }
    match format {
        Format::Csv => {
            if path.exists() {
                std::fs::remove_file(path).map_err(io_err(path))?;
            }
            let with_errors = cfg.engine.contains(&super::config::Engine::Mc);
            let mut sink = CsvSink::open(path, &cfg.observables, with_errors)?;
            for r in rows {
                sink.write(r)?;
            }
            Ok(())
        }
        Format::Json => {
            let doc = serde_json::json!({
                "config": cfg,
                "config_hash": cfg.hash(),
                "code_version": CODE_VERSION,
                "rows": rows,
                "onsets": critical_onsets(rows, cfg.inv_xi_threshold),
                "phases": phase_table(rows, cfg.order_threshold),
            });
            let mut f = File::create(path).map_err(io_err(path))?;
            serde_json::to_writer_pretty(&mut f, &doc)
                .map_err(|e| io_err(path)(std::io::Error::other(e.to_string())))?;
            f.write_all(b"\n").map_err(io_err(path))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: f64, xi: f64) -> ScanRecord {
        ScanRecord {
            key: format!("k{p}"),
            h: Some(0.2),
            p,
            theta: Some(0.25),
            n: None,
            engine: "exact".into(),
            size_param: Some(4),
            xi: Some(xi),
            s_vn: None,
            free_energy: Some(-1.0 / 3.0),
            c_fit: None,
            observables: vec![ObsValue {
                label: "e.I|e.I".into(),
                value: Some(std::f64::consts::PI),
                error: Some(1e-3),
            }],
            converged: true,
            seconds: 0.5,
            error: Some("note, with comma".into()),
            config_hash: "abc".into(),
            code_version: CODE_VERSION.into(),
        }
    }

    fn cfg() -> ScanConfig {
        let mut c = ScanConfig::parse(
            "family = \"coupled\"\nh = [0.2]\np = [0.1]\nengine = [\"exact\", \"mc\"]\nobservables = [\"e.I|e.I\"]\n",
        )
        .unwrap();
        c.mc.rotate = true;
        c
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_num(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(parse_num(&fmt_num(Some(1.0 / 3.0))).unwrap(), Some(1.0 / 3.0));
        assert_eq!(fmt_num(None), "");
        assert_eq!(fmt_num(Some(f64::INFINITY)), "inf");
    }

    #[test]
    fn one_row_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let r = row(0.1, 2.0);
        emit_report(std::slice::from_ref(&r), &cfg(), Format::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("h,p,theta,engine,size_param,xi,S_vn,free_energy,c_fit,obs_e.I|e.I,"));
        let back = read_csv(&path).unwrap();
        let mut expect = r;
        expect.seconds = 0.5;
        assert_eq!(back, vec![expect]);
    }

    #[test]
    fn json_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&[row(0.1, 2.0), row(0.2, 40.0)], &cfg(), Format::Json, &path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 2);
        assert_eq!(v["config"]["family"], "coupled");
        assert_eq!(v["onsets"][0]["p"], 0.2);
        assert!(emit_report(&[], &cfg(), Format::Json, &path).is_err());
        let e = emit_report(&[row(0.1, 1.0)], &cfg(), Format::Json, Path::new("/nonexistent/dir/r.json")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/dir/r.json"));
    }

    #[test]
    fn phases() {
        assert_eq!(classify_at_phase(0.5, 0.6, 0.1), AtPhase::Ordered);
        assert_eq!(classify_at_phase(0.01, 0.6, 0.1), AtPhase::PartialOrdered);
        assert_eq!(classify_at_phase(0.01, 0.02, 0.1), AtPhase::Disordered);
    }
}
