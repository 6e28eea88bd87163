//! Grid enumeration, dispatch to the engines and ordered row emission.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use sha2::{Digest, Sha256};

use super::config::{parse_label, Engine, Family, Label, Point, ScanConfig};
use super::report::{ObsValue, ScanRecord, CODE_VERSION};
use crate::couplings::{general_couplings, selfdual_couplings};
use crate::error::{Error, Result};
use crate::imps::{
    build_row_mpo, entanglement_entropy, fit_central_charge, fixed_point_from, log_eigenvalue_per_site,
    mps_correlation_length, row_correlator, FesSample, FitWindow, MpsOptions, RowMPO, VidalCell,
};
use crate::mc::mc_run;
use crate::statmech::{
    anyon_observable, at_model, column_path, coupled_model, nflavor_model, ObservableKind, ObservableSpec,
    StatMechModel,
};
use crate::transfer::{build_transfer, evaluate, fixed_point, sector_correlation_length};

/// Execution settings that do not change the results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; zero means one.
    pub workers: usize,
    /// Directory of warm-start tensors for the iMPS engine.
    pub cache: Option<PathBuf>,
}

/// One dispatchable piece of work. Exact widths are separate units; an
/// iMPS ladder is one unit because its summary row needs every rung.
#[derive(Debug, Clone)]
pub struct Unit {
    pub point: Point,
    pub engine: Engine,
    pub size: Option<usize>,
}

pub fn units(cfg: &ScanConfig) -> Vec<Unit> {
    let mut out = Vec::new();
    for point in cfg.points() {
        for &engine in &cfg.engine {
            match engine {
                Engine::Exact => out.extend(cfg.exact.lx.iter().map(|&lx| Unit {
                    point,
                    engine,
                    size: Some(lx),
                })),
                Engine::Imps => out.push(Unit {
                    point,
                    engine,
                    size: None,
                }),
                Engine::Mc => out.push(Unit {
                    point,
                    engine,
                    size: Some(cfg.mc.lx),
                }),
            }
        }
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:?}"))
}

/// Idempotent row key: identical grid coordinates give identical keys.
pub fn row_key(cfg: &ScanConfig, pt: &Point, engine: Engine, size: Option<usize>) -> String {
    format!(
        "{}|h={}|p={:?}|theta={}|n={}|{}|{}",
        cfg.family.name(),
        opt(pt.h),
        pt.p,
        opt(pt.theta),
        pt.n.map_or("-".into(), |n| n.to_string()),
        engine.name(),
        size.map_or("fit".into(), |s| s.to_string())
    )
}

/// Keys of the rows a unit produces, in emission order.
pub fn unit_keys(cfg: &ScanConfig, u: &Unit) -> Vec<String> {
    match u.engine {
        Engine::Imps => {
            let mut k: Vec<String> = cfg.imps.chi.iter().map(|&c| row_key(cfg, &u.point, u.engine, Some(c))).collect();
            if cfg.imps.has_fit() {
                k.push(row_key(cfg, &u.point, u.engine, None));
            }
            k
        }
        _ => vec![row_key(cfg, &u.point, u.engine, u.size)],
    }
}

/// Model at a grid point. The coupled family at `h = 0` is the self-dual
/// Ashkin–Teller model in the reduced `(s, τ)` variables.
pub fn build_model(family: Family, pt: &Point) -> Result<StatMechModel> {
    let h = || pt.h.ok_or_else(|| Error::Invalid("grid point lacks h".into()));
    match family {
        Family::SelfdualAt => at_model(selfdual_couplings(pt.p)?),
        Family::GeneralAt => at_model(general_couplings(pt.p, pt.theta.unwrap_or(std::f64::consts::FRAC_PI_4))?),
        Family::Coupled if h()? == 0.0 => at_model(selfdual_couplings(pt.p)?),
        Family::Coupled => coupled_model(h()?, pt.p),
        Family::Nflavor => nflavor_model(h()?, pt.p, pt.n.unwrap_or(2)),
    }
}

/// Whether the separation runs along the transfer direction or inside a row.
#[derive(Clone, Copy)]
enum Axis {
    Column,
    Row,
}

/// Observable between `(0, 0)` and the site `r` steps along `axis`.
fn observable_spec(label: &str, m: &StatMechModel, r: usize, axis: Axis) -> Result<ObservableSpec> {
    let j = match axis {
        Axis::Column => (0, r as isize),
        Axis::Row => (r as isize, 0),
    };
    match parse_label(label)? {
        Label::Order(mask) => ObservableSpec::order(label, mask, (0, 0), j),
        Label::Disorder(mask) => match axis {
            Axis::Column => ObservableSpec::disorder(label, mask, column_path(0, 0, r)),
            Axis::Row => Err(Error::Geometry("disorder seams are evaluated along columns only".into())),
        },
        Label::Anyon(l) => anyon_observable(&l, m, (0, 0), j, None),
    }
}

struct Base<'a> {
    cfg: &'a ScanConfig,
    hash: &'a str,
}

impl Base<'_> {
    fn record(&self, pt: &Point, engine: Engine, size: Option<usize>) -> ScanRecord {
        ScanRecord {
            key: row_key(self.cfg, pt, engine, size),
            h: pt.h,
            p: pt.p,
            theta: pt.theta,
            n: pt.n,
            engine: engine.name().into(),
            size_param: size,
            xi: None,
            s_vn: None,
            free_energy: None,
            c_fit: None,
            observables: self
                .cfg
                .observables
                .iter()
                .map(|l| ObsValue {
                    label: l.clone(),
                    value: None,
                    error: None,
                })
                .collect(),
            converged: false,
            seconds: 0.0,
            error: None,
            config_hash: self.hash.to_string(),
            code_version: CODE_VERSION.into(),
        }
    }
}

fn note(r: &mut ScanRecord, msg: String) {
    r.error = Some(match r.error.take() {
        Some(prev) => format!("{prev}; {msg}"),
        None => msg,
    });
}

fn exact_row(b: &Base, pt: &Point, lx: usize) -> ScanRecord {
    let t0 = Instant::now();
    let mut r = b.record(pt, Engine::Exact, Some(lx));
    let res = (|| -> Result<()> {
        let m = build_model(b.cfg.family, pt)?;
        let t = build_transfer(&m, lx, None)?;
        let fp = fixed_point(&t)?;
        r.xi = Some(sector_correlation_length(&t)?.xi);
        r.free_energy = Some(-fp.lambda0.ln() / lx as f64);
        r.converged = true;
        for o in r.observables.iter_mut() {
            match observable_spec(&o.label, &m, b.cfg.separation, Axis::Column).and_then(|s| evaluate(&t, &fp, &s)) {
                Ok(v) => o.value = Some(v),
                Err(e) => {
                    let msg = format!("{}: {e}", o.label);
                    r.error = Some(r.error.take().map_or(msg.clone(), |p| format!("{p}; {msg}")));
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = res {
        r.converged = false;
        note(&mut r, e.to_string());
    }
    r.seconds = t0.elapsed().as_secs_f64();
    r
}

fn cache_path(dir: &Path, m: &StatMechModel, chi: usize, opts: &MpsOptions) -> PathBuf {
    let tag = serde_json::json!({ "kind": m.kind, "weights": m.weights, "chi": chi, "seed": opts.seed });
    let digest = Sha256::digest(tag.to_string().as_bytes());
    let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
    dir.join(format!("mps-{hex}.json"))
}

fn imps_rows(b: &Base, pt: &Point, cache: Option<&Path>) -> Vec<ScanRecord> {
    let cfg = b.cfg;
    let opts = MpsOptions {
        tol: cfg.imps.tol,
        max_iters: cfg.imps.max_iters,
        seed: cfg.seed,
        ..MpsOptions::default()
    };
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let start = Instant::now();
    let setup = build_model(cfg.family, pt).and_then(|m| build_row_mpo(&m).map(|mpo| (m, mpo)));
    for &chi in &cfg.imps.chi {
        let t0 = Instant::now();
        let mut r = b.record(pt, Engine::Imps, Some(chi));
        match &setup {
            Err(e) => note(&mut r, e.to_string()),
            Ok((m, mpo)) => match imps_point(cfg, m, mpo, chi, &opts, cache, &mut r) {
                Ok(s) => samples.push(s),
                Err(e) => note(&mut r, e.to_string()),
            },
        }
        r.seconds = t0.elapsed().as_secs_f64();
        rows.push(r);
    }
    if cfg.imps.has_fit() {
        let mut r = b.record(pt, Engine::Imps, None);
        match fit_central_charge(&samples, FitWindow::from_min(cfg.imps.fit_min_chi)) {
            Ok(f) => {
                r.c_fit = Some(f.c);
                r.converged = f.samples.iter().all(|s| s.converged);
            }
            Err(e) => note(&mut r, e.to_string()),
        }
        r.seconds = start.elapsed().as_secs_f64();
        rows.push(r);
    }
    rows
}

fn imps_point(
    cfg: &ScanConfig,
    m: &StatMechModel,
    mpo: &RowMPO,
    chi: usize,
    opts: &MpsOptions,
    cache: Option<&Path>,
    r: &mut ScanRecord,
) -> Result<FesSample> {
    let cached = cache.map(|d| cache_path(d, m, chi, opts));
    let warm: Option<VidalCell> = cached
        .as_ref()
        .and_then(|p| std::fs::read(p).ok())
        .and_then(|bytes| serde_json::from_slice(&bytes).ok());
    let psi = fixed_point_from(mpo, chi, *opts, warm.as_ref())?;
    if let Some(p) = &cached {
        // A failed cache write only costs the next run its warm start.
        if let Ok(text) = serde_json::to_vec(&psi.tensors) {
            let _ = std::fs::write(p, text);
        }
    }
    let s = FesSample {
        chi,
        xi: mps_correlation_length(&psi),
        s: entanglement_entropy(&psi),
        free_energy: -log_eigenvalue_per_site(&psi, mpo.weights())?,
        iters: psi.iterations,
        converged: psi.converged,
    };
    r.xi = Some(s.xi);
    r.s_vn = Some(s.s);
    r.free_energy = Some(s.free_energy);
    r.converged = s.converged;
    let sep = cfg.separation;
    for o in r.observables.iter_mut() {
        let spec = match observable_spec(&o.label, m, sep, Axis::Row) {
            Ok(s) if s.kind() == ObservableKind::Order && sep % 2 == 0 => s,
            _ => continue,
        };
        o.value = Some(row_correlator(&psi, spec.order_mask, sep)?);
    }
    Ok(s)
}

fn mc_row(b: &Base, pt: &Point) -> ScanRecord {
    let t0 = Instant::now();
    let cfg = b.cfg;
    let mut r = b.record(pt, Engine::Mc, Some(cfg.mc.lx));
    let res = (|| -> Result<()> {
        let m = build_model(cfg.family, pt)?;
        let mut specs = Vec::new();
        let mut slots = Vec::new();
        for (i, l) in cfg.observables.iter().enumerate() {
            if let Ok(s) = observable_spec(l, &m, cfg.separation, Axis::Row) {
                if s.kind() == ObservableKind::Order {
                    specs.push(s);
                    slots.push(i);
                }
            }
        }
        let est = mc_run(&m, &cfg.mc.to_config(cfg.seed), &specs)?;
        for (i, e) in slots.into_iter().zip(est) {
            r.observables[i].value = Some(e.mean);
            r.observables[i].error = Some(e.error);
        }
        r.converged = true;
        Ok(())
    })();
    if let Err(e) = res {
        note(&mut r, e.to_string());
    }
    r.seconds = t0.elapsed().as_secs_f64();
    r
}

fn run_unit(b: &Base, u: &Unit, cache: Option<&Path>) -> Vec<ScanRecord> {
    match u.engine {
        Engine::Exact => vec![exact_row(b, &u.point, u.size.unwrap_or(1))],
        Engine::Imps => imps_rows(b, &u.point, cache),
        Engine::Mc => vec![mc_row(b, &u.point)],
    }
}

/// Runs every unit whose rows are not all in `skip` and hands rows to
/// `sink` in grid order. Per-point failures are recorded in the rows; only
/// a sink error stops the scan.
pub fn run_scan<F>(cfg: &ScanConfig, opts: &RunOptions, skip: &HashSet<String>, mut sink: F) -> Result<()>
where
    F: FnMut(ScanRecord) -> Result<()>,
{
    cfg.validate()?;
    let hash = cfg.hash();
    let todo: Vec<Unit> = units(cfg)
        .into_iter()
        .filter(|u| unit_keys(cfg, u).iter().any(|k| !skip.contains(k)))
        .collect();
    let base = Base { cfg, hash: &hash };
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = opts.workers.max(1).min(todo.len().max(1));
    let cache = opts.cache.as_deref();
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let (tx, rx) = mpsc::channel::<(usize, Vec<ScanRecord>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (todo, next, stop, base) = (&todo, &next, &stop, &base);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(u) = todo.get(i) else { break };
                if tx.send((i, run_unit(base, u, cache))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: completed units are buffered until every earlier
        // unit has been emitted.
        let mut pending: BTreeMap<usize, Vec<ScanRecord>> = BTreeMap::new();
        let mut emit = 0usize;
        for (i, rows) in rx {
            pending.insert(i, rows);
            while let Some(rows) = pending.remove(&emit) {
                emit += 1;
                for r in rows.into_iter().filter(|r| !skip.contains(&r.key)) {
                    if let Err(e) = sink(r) {
                        stop.store(true, Ordering::Relaxed);
                        return Err(e);
                    }
                }
            }
        }
        Ok(())
    })
}

/// Runs the whole scan and collects the rows.
pub fn collect_scan(cfg: &ScanConfig, opts: &RunOptions) -> Result<Vec<ScanRecord>> {
    let mut rows = Vec::new();
    run_scan(cfg, opts, &HashSet::new(), |r| {
        rows.push(r);
        Ok(())
    })?;
    Ok(rows)
}
