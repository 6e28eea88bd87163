//! Scan configuration: a TOML document with a parameter grid, engine
//! settings and output location.
//!
//! ```toml
//! family = "selfdual-at"      # selfdual-at | general-at | coupled | nflavor
//! engine = "exact"            # or a list, e.g. ["exact", "imps"]
//! p = [0.0, 0.25, 0.5]
//!
//! [exact]
//! lx = [4]
//! ```
//!
//! Defaults: `seed = 1`, `separation = 4`, `inv_xi_threshold = 0.05`,
//! `order_threshold = 0.1`, no observables, `[exact] lx = [4]`,
//! `[imps] chi = [8, 12, 16, 24, 32, 48]` with `fit_min_chi = 16`,
//! `tol = 1e-10`, `max_iters = 5000`, `[mc]` an 8×8 torus with 110000 sweeps
//! of which 10000 thermalize, 32 bins, and `[output] dir = "scan-out"`,
//! `stem = "scan"`, `json = true`.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::imps::{DEFAULT_LADDER, DEFAULT_MIN_CHI};
use crate::mc::MCConfig;
use crate::statmech::model::MAX_FLAVORS;
use crate::transfer::STATE_CAP;

/// Largest bond dimension a scan may request.
pub const CHI_CAP: usize = 256;
/// Largest two-point separation.
pub const SEPARATION_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SelfdualAt,
    GeneralAt,
    Coupled,
    Nflavor,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::SelfdualAt => "selfdual-at",
            Family::GeneralAt => "general-at",
            Family::Coupled => "coupled",
            Family::Nflavor => "nflavor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Imps,
    Mc,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::Imps => "imps",
            Engine::Mc => "mc",
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Engine>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        One(Engine),
        Many(Vec<Engine>),
    }
    Ok(match Either::deserialize(d)? {
        Either::One(e) => vec![e],
        Either::Many(v) => v,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactSettings {
    pub lx: Vec<usize>,
}

impl Default for ExactSettings {
    fn default() -> Self {
        Self { lx: vec![4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpsSettings {
    pub chi: Vec<usize>,
    /// Smallest χ entering the central-charge fit.
    pub fit_min_chi: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ImpsSettings {
    fn default() -> Self {
        Self {
            chi: DEFAULT_LADDER.to_vec(),
            fit_min_chi: DEFAULT_MIN_CHI,
            tol: 1e-10,
            max_iters: 5000,
        }
    }
}

impl ImpsSettings {
    /// Whether the ladder admits a central-charge fit (four or more rungs).
    pub fn has_fit(&self) -> bool {
        self.chi.iter().filter(|&&c| c >= self.fit_min_chi).count() >= 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub lx: usize,
    pub ly: usize,
    pub sweeps: usize,
    pub thermalization: usize,
    pub stride: usize,
    pub bins: usize,
    pub rotate: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        let d = MCConfig::default();
        Self {
            lx: d.lx,
            ly: d.ly,
            sweeps: d.sweeps,
            thermalization: d.thermalization,
            stride: d.stride,
            bins: d.bins,
            rotate: d.rotate,
        }
    }
}

impl McSettings {
    pub fn to_config(&self, seed: u64) -> MCConfig {
        MCConfig {
            lx: self.lx,
            ly: self.ly,
            sweeps: self.sweeps,
            thermalization: self.thermalization,
            stride: self.stride,
            seed,
            bins: self.bins,
            rotate: self.rotate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    pub dir: String,
    /// File stem for `<stem>.csv` and `<stem>.json`.
    pub stem: String,
    pub json: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: "scan-out".into(),
            stem: "scan".into(),
            json: true,
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_separation() -> usize {
    4
}
fn default_inv_xi_threshold() -> f64 {
    0.05
}
fn default_order_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub family: Family,
    #[serde(deserialize_with = "one_or_many")]
    pub engine: Vec<Engine>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<usize>,
    /// Explicit `(h, p)` pairs, used instead of the `h × p` product.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<[f64; 2]>,
    /// Anyon overlap labels such as `"e.I|e.I"`, or raw `order:<mask>` and
    /// `disorder:<mask>` insertions.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default = "default_separation")]
    pub separation: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// A grid point counts as critical once `1/ξ` falls below this value.
    #[serde(default = "default_inv_xi_threshold")]
    pub inv_xi_threshold: f64,
    /// Two-point values above this count as long-range order.
    #[serde(default = "default_order_threshold")]
    pub order_threshold: f64,
    #[serde(default)]
    pub exact: ExactSettings,
    #[serde(default)]
    pub imps: ImpsSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub h: Option<f64>,
    pub p: f64,
    pub theta: Option<f64>,
    pub n: Option<usize>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn invalid(field: &str, msg: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        msg: msg.into(),
    }
}

impl ScanConfig {
    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScanConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Error::Parse {
                line,
                col,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scan configuration is always representable in TOML")
    }

    /// Hex SHA-256 prefix of the configuration without its output section.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSettings::default();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family;
        let needs_h = matches!(fam, Family::Coupled | Family::Nflavor);
        if !self.points.is_empty() {
            if !needs_h {
                return Err(invalid("points", format!("not used by family {}", fam.name())));
            }
            if !self.h.is_empty() || !self.p.is_empty() {
                return Err(invalid("points", "give either `points` or the `h`/`p` lists"));
            }
        } else {
            if self.p.is_empty() {
                return Err(invalid("p", "grid must be nonempty"));
            }
            if needs_h && self.h.is_empty() {
                return Err(invalid("h", "grid must be nonempty"));
            }
            if !needs_h && !self.h.is_empty() {
                return Err(invalid("h", format!("not used by family {}", fam.name())));
            }
        }
        let (hs, ps): (Vec<f64>, Vec<f64>) = if self.points.is_empty() {
            (self.h.clone(), self.p.clone())
        } else {
            self.points.iter().map(|q| (q[0], q[1])).unzip()
        };
        for &p in &ps {
            if !(0.0..=0.5).contains(&p) {
                return Err(invalid("p", format!("p out of [0, 0.5]: {p}")));
            }
        }
        for &h in &hs {
            if !(0.0..=1.0).contains(&h) {
                return Err(invalid("h", format!("h out of [0, 1]: {h}")));
            }
        }
        if fam == Family::GeneralAt {
            if self.theta.is_empty() {
                return Err(invalid("theta", "grid must be nonempty"));
            }
            for &t in &self.theta {
                if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&t) {
                    return Err(invalid("theta", format!("theta out of [0, π/2]: {t}")));
                }
            }
        } else if !self.theta.is_empty() {
            return Err(invalid("theta", format!("not used by family {}", fam.name())));
        }
        if fam == Family::Nflavor {
            if self.n.is_empty() {
                return Err(invalid("n", "grid must be nonempty"));
            }
            if let Some(n) = self.n.iter().find(|n| !(2..=MAX_FLAVORS).contains(n)) {
                return Err(invalid("n", format!("n out of [2, {MAX_FLAVORS}]: {n}")));
            }
        } else if !self.n.is_empty() {
            return Err(invalid("n", format!("not used by family {}", fam.name())));
        }
        if self.engine.is_empty() {
            return Err(invalid("engine", "select at least one engine"));
        }
        let mut seen = self.engine.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.engine.len() {
            return Err(invalid("engine", "engines must not repeat"));
        }
        if !(1..=SEPARATION_CAP).contains(&self.separation) {
            return Err(invalid("separation", format!("must lie in [1, {SEPARATION_CAP}]")));
        }
        if !(self.inv_xi_threshold > 0.0 && self.inv_xi_threshold.is_finite()) {
            return Err(invalid("inv_xi_threshold", "must be positive"));
        }
        if !(self.order_threshold > 0.0 && self.order_threshold.is_finite()) {
            return Err(invalid("order_threshold", "must be positive"));
        }
        for label in &self.observables {
            parse_label(label).map_err(|e| invalid("observables", e.to_string()))?;
        }
        let d = self.max_local_dim();
        if self.engine.contains(&Engine::Exact) {
            if self.exact.lx.is_empty() {
                return Err(invalid("exact.lx", "list must be nonempty"));
            }
            for &lx in &self.exact.lx {
                let fits = lx >= 1 && d.checked_pow(lx as u32).is_some_and(|n| n <= STATE_CAP);
                if !fits {
                    return Err(invalid("exact.lx", format!("{d}^{lx} states exceed the cap {STATE_CAP}")));
                }
            }
        }
        if self.engine.contains(&Engine::Imps) {
            let c = &self.imps.chi;
            if c.is_empty() {
                return Err(invalid("imps.chi", "ladder must be nonempty"));
            }
            if c.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("imps.chi", "ladder must be strictly increasing"));
            }
            if c.iter().any(|&x| !(1..=CHI_CAP).contains(&x)) {
                return Err(invalid("imps.chi", format!("bond dimensions must lie in [1, {CHI_CAP}]")));
            }
            if !(self.imps.tol > 0.0) || self.imps.max_iters == 0 {
                return Err(invalid("imps", "tol and max_iters must be positive"));
            }
        }
        if self.engine.contains(&Engine::Mc) {
            if 2 * self.separation > self.mc.lx {
                return Err(invalid("separation", format!("must not exceed half the torus side {}", self.mc.lx)));
            }
            self.mc.to_config(self.seed).validate().map_err(|e| match e {
                Error::Validation { field, msg } => invalid(&format!("mc.{field}"), msg),
                other => other,
            })?;
        }
        Ok(())
    }

    fn max_local_dim(&self) -> usize {
        match self.family {
            Family::SelfdualAt | Family::GeneralAt => 4,
            Family::Coupled => 16,
            Family::Nflavor => 1 << self.n.iter().copied().max().unwrap_or(2),
        }
    }

    /// Grid points in emission order: `h`, then `p`, then `theta`, then `n`.
    pub fn points(&self) -> Vec<Point> {
        let hp: Vec<(Option<f64>, f64)> = match self.family {
            Family::SelfdualAt | Family::GeneralAt => self.p.iter().map(|&p| (None, p)).collect(),
            Family::Coupled | Family::Nflavor if !self.points.is_empty() => {
                self.points.iter().map(|q| (Some(q[0]), q[1])).collect()
            }
            Family::Coupled | Family::Nflavor => self
                .h
                .iter()
                .flat_map(|&h| self.p.iter().map(move |&p| (Some(h), p)))
                .collect(),
        };
        let thetas: Vec<Option<f64>> = match self.family {
            Family::GeneralAt => self.theta.iter().map(|&t| Some(t)).collect(),
            Family::SelfdualAt | Family::Coupled => vec![Some(FRAC_PI_4)],
            Family::Nflavor => vec![Some(0.0)],
        };
        let ns: Vec<Option<usize>> = if self.family == Family::Nflavor {
            self.n.iter().map(|&n| Some(n)).collect()
        } else {
            vec![None]
        };
        let mut out = Vec::new();
        for &(h, p) in &hp {
            for &theta in &thetas {
                for &n in &ns {
                    out.push(Point { h, p, theta, n });
                }
            }
        }
        out
    }

    /// Named reproduction presets: `fig3c`, `fig3b`, `fig2b`.
    pub fn preset(name: &str) -> Result<Self> {
        let base = |family: Family, engine: Engine| ScanConfig {
            family,
            engine: vec![engine],
            h: Vec::new(),
            p: Vec::new(),
            theta: Vec::new(),
            n: Vec::new(),
            points: Vec::new(),
            observables: Vec::new(),
            separation: default_separation(),
            seed: default_seed(),
            inv_xi_threshold: default_inv_xi_threshold(),
            order_threshold: default_order_threshold(),
            exact: ExactSettings::default(),
            imps: ImpsSettings::default(),
            mc: McSettings::default(),
            output: OutputSettings {
                stem: name.into(),
                ..OutputSettings::default()
            },
        };
        let cfg = match name {
            // 1/ξ against p along three horizontal cuts of the (h, p) plane.
            "fig3c" => ScanConfig {
                h: vec![0.1, 0.2, 0.3],
                p: (0..=20).map(|i| i as f64 * 0.025).collect(),
                imps: ImpsSettings {
                    chi: vec![48],
                    ..ImpsSettings::default()
                },
                ..base(Family::Coupled, Engine::Imps)
            },
            // Central-charge table: the two benchmark points and two
            // interior points of the critical region.
            "fig3b" => ScanConfig {
                points: vec![[0.0, 0.5], [0.5, 0.0], [0.2, 0.45], [0.5, 0.3]],
                ..base(Family::Coupled, Engine::Imps)
            },
            // Order and disorder correlators across the (θ, p) plane of
            // the Ashkin–Teller family.
            "fig2b" => ScanConfig {
                p: (0..=10).map(|i| i as f64 * 0.05).collect(),
                theta: (0..=4).map(|i| i as f64 * std::f64::consts::FRAC_PI_8).collect(),
                observables: vec!["I.I|e.e".into(), "e.I|e.I".into(), "I.I|m.m".into()],
                exact: ExactSettings { lx: vec![4, 6] },
                ..base(Family::GeneralAt, Engine::Exact)
            },
            other => {
                return Err(Error::Invalid(format!(
                    "unknown preset `{other}` (expected fig3c, fig3b or fig2b)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Observable label syntax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Label {
    Anyon(String),
    Order(u8),
    Disorder(u8),
}

pub fn parse_label(label: &str) -> Result<Label> {
    let mask = |s: &str| {
        s.trim()
            .parse::<u8>()
            .ok()
            .filter(|&m| m > 0 && (m as usize) < (1 << MAX_FLAVORS))
            .ok_or_else(|| Error::Invalid(format!("bad flavor mask in `{label}`")))
    };
    if let Some(m) = label.strip_prefix("order:") {
        return Ok(Label::Order(mask(m)?));
    }
    if let Some(m) = label.strip_prefix("disorder:") {
        return Ok(Label::Disorder(mask(m)?));
    }
    let (bra, ket) = label
        .split_once('|')
        .ok_or_else(|| Error::Invalid(format!("observable `{label}` must look like `I.I|e.e`")))?;
    for side in [bra, ket] {
        let (a, b) = side
            .split_once('.')
            .ok_or_else(|| Error::Invalid(format!("anyon pair `{side}` must look like `e.I`")))?;
        for x in [a, b] {
            if !matches!(x, "I" | "1" | "e" | "m" | "f") {
                return Err(Error::Invalid(format!("unknown anyon label `{x}` in `{label}`")));
            }
        }
    }
    Ok(Label::Anyon(label.into()))
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ScanConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScanConfig::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "family = \"selfdual-at\"\np = [0.5]\nengine = \"exact\"\n\n[exact]\nlx = [4]\n";

    #[test]
    fn minimal_config() {
        let c = ScanConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.engine, vec![Engine::Exact]);
        assert_eq!(c.points().len(), 1);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn p_out_of_range() {
        let e = ScanConfig::parse(&MINIMAL.replace("0.5]", "0.7]")).unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Validation { ref field, .. } if field == "p"));
        assert!(msg.contains("p out of [0, 0.5]"), "{msg}");
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = ScanConfig::parse(&format!("{MINIMAL}bogus = 3\n")).unwrap_err();
        match e {
            Error::Parse { line, col, .. } => assert!(line >= 1 && col >= 1),
            other => panic!("{other}"),
        }
        let e = ScanConfig::parse("family = \"selfdual-at\"\np = [0.5,\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn validation_names_fields() {
        let field = |text: &str| match ScanConfig::parse(text).unwrap_err() {
            Error::Validation { field, .. } => field,
            other => panic!("{other}"),
        };
        assert_eq!(field("family = \"coupled\"\np = [0.1]\nengine = \"exact\"\n"), "h");
        assert_eq!(field("family = \"selfdual-at\"\np = []\nengine = \"exact\"\n"), "p");
        assert_eq!(field("family = \"selfdual-at\"\np = [0.1]\ntheta = [0.1]\nengine = \"exact\"\n"), "theta");
        assert_eq!(
            field("family = \"coupled\"\nh = [0.1]\np = [0.1]\nengine = \"exact\"\n[exact]\nlx = [7]\n"),
            "exact.lx"
        );
        assert_eq!(field("family = \"selfdual-at\"\np = [0.1]\nengine = \"imps\"\n[imps]\nchi = [8, 4]\n"), "imps.chi");
        assert_eq!(field("family = \"selfdual-at\"\np = [0.1]\nengine = \"exact\"\nobservables = [\"x|y\"]\n"), "observables");
        assert_eq!(field("family = \"selfdual-at\"\np = [0.1]\nengine = [\"mc\"]\n[mc]\nbins = 2\n"), "mc.bins");
    }

    #[test]
    fn presets() {
        let c = ScanConfig::preset("fig3c").unwrap();
        assert_eq!(c.points().len(), 63);
        assert_eq!(c.imps.chi, vec![48]);
        assert!(!c.imps.has_fit());
        let b = ScanConfig::preset("fig3b").unwrap();
        assert_eq!(b.points().len(), 4);
        assert!(b.imps.has_fit());
        assert_eq!(ScanConfig::preset("fig2b").unwrap().points().len(), 55);
        assert!(ScanConfig::preset("fig9").is_err());
    }

    #[test]
    fn round_trip() {
        for c in [
            ScanConfig::parse(MINIMAL).unwrap(),
            ScanConfig::preset("fig3c").unwrap(),
            ScanConfig::preset("fig3b").unwrap(),
            ScanConfig::preset("fig2b").unwrap(),
        ] {
            let again = ScanConfig::parse(&c.to_toml()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.hash(), c.hash());
        }
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ScanConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output.dir = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn grid_order() {
        let c = ScanConfig::parse("family = \"nflavor\"\nh = [0.1, 0.2]\np = [0.0, 0.3]\nn = [2, 3]\nengine = \"exact\"\n").unwrap();
        let pts = c.points();
        assert_eq!(pts.len(), 8);
        assert_eq!((pts[0].h, pts[0].p, pts[0].n), (Some(0.1), 0.0, Some(2)));
        assert_eq!((pts[1].h, pts[1].p, pts[1].n), (Some(0.1), 0.0, Some(3)));
        assert_eq!((pts[7].h, pts[7].p, pts[7].n), (Some(0.2), 0.3, Some(3)));
    }
}
