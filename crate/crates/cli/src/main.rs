use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use decotopo::channel::{
    build_edge_channel, compose_check, emd_kraus_check, emd_string_checks, partial_transpose_check, y_kraus_channel,
    TorusLattice,
};
use decotopo::couplings::{
    chamon_couplings, general_couplings, lambda_of_p, perturbed_params, selfdual_couplings, selfduality_residual,
};
use decotopo::imps::window_sensitivity;
use decotopo::scan::{
    collect_scan, load_config, run_to_dir, Engine, Family, RunOptions, ScanConfig, ScanRecord,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "decotopo", version, about = "Phase-structure numerics for decohered toric codes")]
struct Cli {
    /// Worker threads for grid scans.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory of warm-start tensors for the iMPS engine.
    #[arg(long, global = true, env = "DECOTOPO_CACHE", hide_env_values = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Couplings of the self-dual, general-angle and phase-flip mappings.
    Couplings {
        #[arg(long)]
        p: f64,
        /// Kraus angle; π/4 is the self-dual line.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        h: Option<f64>,
    },
    /// Algebraic checks of the single-edge channel.
    VerifyChannel {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        theta: f64,
    },
    /// Cylinder transfer-operator evaluation at one point.
    Exact {
        #[command(flatten)]
        point: PointArgs,
        /// Cylinder widths.
        #[arg(long, value_delimiter = ',', default_value = "4")]
        lx: Vec<usize>,
    },
    /// Boundary iMPS at one point and a list of bond dimensions.
    Imps {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        chi: Vec<usize>,
    },
    /// Monte Carlo two-point functions on a torus.
    Mc {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, default_value_t = 8)]
        lx: usize,
        #[arg(long)]
        ly: Option<usize>,
        #[arg(long, default_value_t = 110_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 10_000)]
        thermalization: usize,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// Also average over the rotated displacement.
        #[arg(long)]
        rotate: bool,
    },
    /// Finite-entanglement scaling ladder and central-charge fit.
    Fes {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_delimiter = ',', default_value = "8,12,16,24,32,48")]
        chi: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        fit_min_chi: usize,
    },
    /// Grid scan from a configuration file or a named preset.
    Scan {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// fig3c, fig3b or fig2b.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory; defaults to the configuration's `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep rows already in the output and compute only the rest.
        #[arg(long)]
        resume: bool,
        /// Print the effective configuration and exit.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Args)]
struct PointArgs {
    /// selfdual-at, general-at, coupled or nflavor.
    #[arg(long, default_value = "selfdual-at")]
    family: String,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Observable labels, e.g. `e.I|e.I` or `order:3`.
    #[arg(long = "obs", value_delimiter = ',')]
    observables: Vec<String>,
    #[arg(long, default_value_t = 4)]
    separation: usize,
    /// Write CSV and JSON into this directory instead of printing JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn family(name: &str) -> Result<Family> {
    Ok(match name {
        "selfdual-at" => Family::SelfdualAt,
        "general-at" => Family::GeneralAt,
        "coupled" => Family::Coupled,
        "nflavor" => Family::Nflavor,
        other => bail!("unknown family `{other}`"),
    })
}

/// Single-point configuration for the standalone engine subcommands.
fn point_config(a: &PointArgs, engine: Engine, seed: Option<u64>) -> Result<ScanConfig> {
    let fam = family(&a.family)?;
    let mut text = format!("family = \"{}\"\nengine = \"{}\"\np = [{:?}]\n", fam.name(), engine.name(), a.p);
    if let Some(h) = a.h {
        text += &format!("h = [{h:?}]\n");
    }
    if let Some(t) = a.theta {
        text += &format!("theta = [{t:?}]\n");
    }
    if let Some(n) = a.n {
        text += &format!("n = [{n}]\n");
    }
    let mut cfg = ScanConfig::parse(&text)?;
    cfg.observables = a.observables.clone();
    cfg.separation = a.separation;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn finish(cfg: &ScanConfig, opts: &RunOptions, out: &Option<PathBuf>) -> Result<Vec<ScanRecord>> {
    cfg.validate()?;
    match out {
        Some(dir) => {
            let res = run_to_dir(cfg, opts, dir, false)?;
            eprintln!("wrote {}", res.csv.display());
            Ok(res.rows)
        }
        None => Ok(collect_scan(cfg, opts)?),
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print(v: &serde_json::Value) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(v)?))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let opts = RunOptions {
        workers: cli.workers,
        cache: cli.cache.clone(),
    };
    match cli.cmd {
        Cmd::Couplings { p, theta, h } => {
            let theta = theta.unwrap_or(std::f64::consts::FRAC_PI_4);
            let general = general_couplings(p, theta)?;
            let mut v = json!({
                "p": p,
                "theta": theta,
                "lambda": lambda_of_p(p)?,
                "general": general,
                "general_selfduality_residual": selfduality_residual(&general),
            });
            if (theta - std::f64::consts::FRAC_PI_4).abs() < 1e-15 {
                let sd = selfdual_couplings(p)?;
                v["selfdual"] = json!(sd);
                v["selfduality_residual"] = json!(selfduality_residual(&sd));
            }
            if let Some(h) = h {
                v["h"] = json!(h);
                v["perturbed"] = json!(perturbed_params(h, p).ok());
                v["phase_flip"] = json!(chamon_couplings(h, p).ok());
            }
            print(&v)
        }
        Cmd::VerifyChannel { p, theta } => {
            let e = build_edge_channel(p, theta, 2)?;
            let lat = TorusLattice::new(4, 4)?;
            let strings = emd_string_checks(&lat, &[(0, 0), (1, 0), (2, 0), (2, 1)])?;
            print(&json!({
                "p": p,
                "theta": theta,
                "compose_residual": compose_check(p, theta)?,
                "partial_transpose_residual": partial_transpose_check(&e)?,
                "y_kraus_partial_transpose_residual": partial_transpose_check(&y_kraus_channel(p)?)?,
                "emd_kraus_residual": emd_kraus_check(p, theta)?,
                "emd_strings": strings,
            }))
        }
        Cmd::Exact { point, lx } => {
            let mut cfg = point_config(&point, Engine::Exact, cli.seed)?;
            cfg.exact.lx = lx;
            let rows = finish(&cfg, &opts, &point.out)?;
            print(&json!(rows))
        }
        Cmd::Imps { point, chi } => {
            let mut cfg = point_config(&point, Engine::Imps, cli.seed)?;
            cfg.imps.chi = chi;
            cfg.imps.fit_min_chi = usize::MAX;
            let rows = finish(&cfg, &opts, &point.out)?;
            print(&json!(rows))
        }
        Cmd::Mc {
            point,
            lx,
            ly,
            sweeps,
            thermalization,
            bins,
            rotate,
        } => {
            let mut cfg = point_config(&point, Engine::Mc, cli.seed)?;
            cfg.mc.lx = lx;
            cfg.mc.ly = ly.unwrap_or(lx);
            cfg.mc.sweeps = sweeps;
            cfg.mc.thermalization = thermalization;
            cfg.mc.bins = bins;
            cfg.mc.rotate = rotate;
            let rows = finish(&cfg, &opts, &point.out)?;
            print(&json!(rows))
        }
        Cmd::Fes { point, chi, fit_min_chi } => {
            let mut cfg = point_config(&point, Engine::Imps, cli.seed)?;
            cfg.imps.chi = chi;
            cfg.imps.fit_min_chi = fit_min_chi;
            let rows = finish(&cfg, &opts, &point.out)?;
            let samples: Vec<_> = rows
                .iter()
                .filter_map(|r| {
                    Some(decotopo::imps::FesSample {
                        chi: r.size_param?,
                        xi: r.xi?,
                        s: r.s_vn?,
                        free_energy: r.free_energy?,
                        iters: 0,
                        converged: r.converged,
                    })
                })
                .collect();
            print(&json!({
                "rows": rows,
                "window_sensitivity": window_sensitivity(&samples),
            }))
        }
        Cmd::Scan {
            config,
            preset,
            out,
            resume,
            dry_run,
        } => {
            let mut cfg = match (&config, &preset) {
                (Some(path), _) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
                (None, Some(name)) => ScanConfig::preset(name)?,
                (None, None) => bail!("give --config or --preset"),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if dry_run {
                return emit(&cfg.to_toml());
            }
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let res = run_to_dir(&cfg, &opts, &dir, resume)?;
            eprintln!(
                "{} rows computed, {} total; wrote {}{}",
                res.computed,
                res.rows.len(),
                res.csv.display(),
                res.json.map(|p| format!(" and {}", p.display())).unwrap_or_default()
            );
            Ok(())
        }
    }
}
