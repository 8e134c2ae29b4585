//! Scenario documents: a flat, sectioned key-value format that fully
//! determines one simulation run.
//!
//! The format is INI-style (`[section]` headers, `key = value` lines,
//! `#`/`;` comments). Values are SI numbers with optional `u`, `m`, `k`
//! suffixes parsed as exact decimal scalings (`30u` is `30 * 1e-6`). Unknown
//! sections and keys are rejected, and validation reports every violated
//! invariant, not just the first. Sweep overrides edit the document itself
//! (`section.key=value`), so overridden runs go through the same parser and
//! validator as hand-written files.

use crate::backend::{BackendConfig, MAX_MODULES};
use crate::circuit::{FilterParams, LoadKind, LoadSpec};
use crate::metrics::DeviceLossParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario:\n{}", violations.join("\n"))]
    Validation { violations: Vec<String> },
}

/// Modulation strategy of a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Proposed,
    Svpwm,
    Dpwm,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::Svpwm => "svpwm",
            Strategy::Dpwm => "dpwm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "proposed" => Some(Strategy::Proposed),
            "svpwm" => Some(Strategy::Svpwm),
            "dpwm" => Some(Strategy::Dpwm),
            _ => None,
        }
    }
}

/// `[reference]` section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSettings {
    /// Modulation index relative to the strategy's maximum linear amplitude.
    pub m: f64,
    /// Fundamental frequency in Hz.
    pub f: f64,
    /// Initial electrical angle in radians.
    pub theta0: f64,
}

/// `[backend]` section (proposed strategy only).
#[derive(Clone, Debug, PartialEq)]
pub struct BackendSettings {
    pub n_mdl: usize,
    pub v_mdl: f64,
    pub f_mdl: f64,
    pub r_int: f64,
    pub capacity_ah: f64,
    /// Sum-zero balancing duty offsets, one per module.
    pub offsets: Vec<f64>,
    /// Initial state of charge shared by all modules.
    pub soc0: f64,
    /// Per-module battery filter inductance. Recorded for documentation;
    /// the battery bus is treated as stiff behind it, so its state is not
    /// simulated.
    pub l_mdl: f64,
    /// Per-module battery filter capacitance; recorded, not simulated.
    pub c_mdl: f64,
}

/// `[timing]` section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingSettings {
    /// Solver step; `None` selects the automatic step (at least 200 samples
    /// per effective switching period, snapped to an integer number of steps
    /// per fundamental).
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub settle: Option<f64>,
    /// Linear amplitude/back-emf ramp time from zero (spin-up surrogate).
    pub ramp: f64,
    /// Reserved; the core is deterministic and ignores it.
    pub seed: u64,
}

impl Default for TimingSettings {
    fn default() -> Self {
        Self {
            dt: None,
            duration: None,
            settle: None,
            ramp: 0.0,
            seed: 0,
        }
    }
}

/// Device loss parameters for both classes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Devices {
    pub igbt: DeviceLossParams,
    pub fet: DeviceLossParams,
}

impl Default for Devices {
    fn default() -> Self {
        Self {
            igbt: DeviceLossParams::reference_igbt(),
            fet: DeviceLossParams::reference_fet(),
        }
    }
}

/// `[compare]` section settings for matched-current strategy comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareSettings {
    /// Peak phase current held constant across the compared cases.
    pub i_pk: f64,
}

/// A fully validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub strategy: Strategy,
    pub reference: ReferenceSettings,
    /// Frontend carrier frequency in Hz.
    pub f_inv: f64,
    pub backend: Option<BackendSettings>,
    /// Fixed dc-link voltage for the SVPWM/DPWM baselines.
    pub vdc_fixed: Option<f64>,
    pub filter: FilterParams,
    pub load: LoadSpec,
    pub devices: Devices,
    pub timing: TimingSettings,
    pub compare: Option<CompareSettings>,
}

impl Scenario {
    /// Total dc bus voltage: the full string for the proposed strategy, the
    /// fixed link otherwise.
    pub fn vdc_total(&self) -> f64 {
        match self.strategy {
            Strategy::Proposed => {
                let b = self.backend.as_ref().expect("validated");
                b.n_mdl as f64 * b.v_mdl
            }
            _ => self.vdc_fixed.expect("validated"),
        }
    }

    /// Peak phase amplitude `m * v_dc / sqrt(3)`; every strategy's linear
    /// range tops out at `v_dc / sqrt(3)`, so matched `m` means matched
    /// output voltage.
    pub fn amplitude(&self) -> f64 {
        self.reference.m * self.vdc_total() / 3.0f64.sqrt()
    }

    /// Degeneracy threshold for the reference envelope.
    pub fn eps_env(&self) -> f64 {
        1e-9 * self.amplitude()
    }

    /// Upper bound on the solver step: at least 200 samples per effective
    /// switching period of both stages.
    pub fn dt_max(&self) -> f64 {
        let front = 1.0 / (200.0 * self.f_inv);
        match &self.backend {
            Some(b) if self.strategy == Strategy::Proposed => {
                front.min(1.0 / (200.0 * b.n_mdl as f64 * b.f_mdl))
            }
            _ => front,
        }
    }

    /// Solver step actually used: the configured value, or the automatic one
    /// snapped so a fundamental period is an integer number of steps.
    pub fn dt(&self) -> f64 {
        match self.timing.dt {
            Some(dt) => dt,
            None => {
                let steps = (1.0 / (self.reference.f * self.dt_max())).ceil();
                1.0 / (self.reference.f * steps)
            }
        }
    }

    /// Start of the metrics window (start-up transients excluded); defaults
    /// to three fundamental periods.
    pub fn settle(&self) -> f64 {
        self.timing.settle.unwrap_or(3.0 / self.reference.f)
    }

    /// Total simulated time; defaults to the settle window plus two
    /// fundamental periods of steady state.
    pub fn duration(&self) -> f64 {
        self.timing
            .duration
            .unwrap_or_else(|| self.settle() + 2.0 / self.reference.f)
    }

    pub fn backend_config(&self) -> Option<BackendConfig> {
        self.backend
            .as_ref()
            .map(|b| BackendConfig::uniform(b.n_mdl, b.v_mdl, b.r_int, b.capacity_ah, b.f_mdl))
    }

    /// Canonical document form; parsing it back yields an identical scenario.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        out.push_str("[strategy]\n");
        kv(&mut out, "kind", self.strategy.label().to_string());
        out.push_str("\n[reference]\n");
        kv(&mut out, "m", fmt(self.reference.m));
        kv(&mut out, "f", fmt(self.reference.f));
        kv(&mut out, "theta0", fmt(self.reference.theta0));
        out.push_str("\n[frontend]\n");
        kv(&mut out, "f_inv", fmt(self.f_inv));
        if let Some(b) = &self.backend {
            out.push_str("\n[backend]\n");
            kv(&mut out, "n_mdl", b.n_mdl.to_string());
            kv(&mut out, "v_mdl", fmt(b.v_mdl));
            kv(&mut out, "f_mdl", fmt(b.f_mdl));
            kv(&mut out, "r_int", fmt(b.r_int));
            kv(&mut out, "capacity_ah", fmt(b.capacity_ah));
            kv(
                &mut out,
                "offsets",
                b.offsets
                    .iter()
                    .map(|x| fmt(*x))
                    .collect::<Vec<_>>()
                    .join(","),
            );
            kv(&mut out, "soc0", fmt(b.soc0));
            kv(&mut out, "l_mdl", fmt(b.l_mdl));
            kv(&mut out, "c_mdl", fmt(b.c_mdl));
        }
        if let Some(v) = self.vdc_fixed {
            out.push_str("\n[dclink]\n");
            kv(&mut out, "vdc", fmt(v));
        }
        out.push_str("\n[filter]\n");
        kv(&mut out, "l", fmt(self.filter.l));
        kv(&mut out, "c", fmt(self.filter.c));
        kv(&mut out, "r_l", fmt(self.filter.r_l));
        out.push_str("\n[load]\n");
        kv(
            &mut out,
            "kind",
            match self.load.kind {
                LoadKind::SeriesRl => "series_rl".to_string(),
                LoadKind::RlBackEmf => "rl_backemf".to_string(),
            },
        );
        kv(&mut out, "r", fmt(self.load.r));
        kv(&mut out, "l", fmt(self.load.l));
        kv(&mut out, "backemf", fmt(self.load.backemf));
        kv(&mut out, "backemf_phase", fmt(self.load.backemf_phase));
        for (name, d) in [
            ("devices.igbt", &self.devices.igbt),
            ("devices.fet", &self.devices.fet),
        ] {
            out.push_str("\n[");
            out.push_str(name);
            out.push_str("]\n");
            kv(&mut out, "v_on0", fmt(d.v_on0));
            kv(&mut out, "r_on", fmt(d.r_on));
            kv(&mut out, "e_on", fmt(d.e_on));
            kv(&mut out, "e_off", fmt(d.e_off));
            kv(&mut out, "e_rr", fmt(d.e_rr));
            kv(&mut out, "v_ref", fmt(d.v_ref));
            kv(&mut out, "i_ref", fmt(d.i_ref));
        }
        out.push_str("\n[timing]\n");
        if let Some(dt) = self.timing.dt {
            kv(&mut out, "dt", fmt(dt));
        }
        if let Some(d) = self.timing.duration {
            kv(&mut out, "duration", fmt(d));
        }
        if let Some(s) = self.timing.settle {
            kv(&mut out, "settle", fmt(s));
        }
        kv(&mut out, "ramp", fmt(self.timing.ramp));
        kv(&mut out, "seed", self.timing.seed.to_string());
        if let Some(c) = &self.compare {
            out.push_str("\n[compare]\n");
            kv(&mut out, "i_pk", fmt(c.i_pk));
        }
        out
    }
}

/// Shortest round-trip decimal form.
fn fmt(x: f64) -> String {
    format!("{x}")
}

// ---------------------------------------------------------------------------
// Raw document handling
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Clone, Debug)]
struct Section {
    name: String,
    entries: Vec<Entry>,
}

/// A parsed but unvalidated document. Sweep overrides operate on this level
/// so every run re-enters the same validation path.
#[derive(Clone, Debug, Default)]
pub struct Document {
    sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = Document::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            if let Some(name) = trimmed.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                    line,
                    message: format!("unterminated section header `{trimmed}`"),
                })?;
                doc.sections.push(Section {
                    name: name.trim().to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or(ConfigError::Parse {
                line,
                message: format!("expected `key = value`, got `{trimmed}`"),
            })?;
            let section = doc.sections.last_mut().ok_or(ConfigError::Parse {
                line,
                message: "key before any [section] header".to_string(),
            })?;
            let value = value.split(['#', ';']).next().unwrap_or("").trim();
            section.entries.push(Entry {
                line,
                key: key.trim().to_string(),
                value: value.to_string(),
            });
        }
        Ok(doc)
    }

    /// Sets `section.key = value`, appending the section or key if absent.
    pub fn set(&mut self, path: &str, value: &str) -> Result<(), ConfigError> {
        let (section_name, key) = path.rsplit_once('.').ok_or(ConfigError::Parse {
            line: 0,
            message: format!("override path `{path}` must be `section.key`"),
        })?;
        let section = match self.sections.iter_mut().find(|s| s.name == section_name) {
            Some(s) => s,
            None => {
                self.sections.push(Section {
                    name: section_name.to_string(),
                    entries: Vec::new(),
                });
                self.sections.last_mut().unwrap()
            }
        };
        if let Some(e) = section.entries.iter_mut().find(|e| e.key == key) {
            e.value = value.to_string();
        } else {
            section.entries.push(Entry {
                line: 0,
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

/// Parses a number with an optional `u`/`m`/`k` decimal suffix.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".to_string());
    }
    let (body, scale) = match s.as_bytes()[s.len() - 1] {
        b'u' => (&s[..s.len() - 1], 1e-6),
        b'm' => (&s[..s.len() - 1], 1e-3),
        b'k' => (&s[..s.len() - 1], 1e3),
        _ => (s, 1.0),
    };
    body.trim()
        .parse::<f64>()
        .map(|x| x * scale)
        .map_err(|_| format!("`{s}` is not a number"))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_number).collect()
}

// ---------------------------------------------------------------------------
// Scenario extraction with full validation
// ---------------------------------------------------------------------------

struct Checker<'a> {
    doc: &'a Document,
    violations: Vec<String>,
}

impl<'a> Checker<'a> {
    fn new(doc: &'a Document) -> Self {
        Self {
            doc,
            violations: Vec::new(),
        }
    }

    fn violation(&mut self, path: &str, message: &str) {
        self.violations.push(format!("{path}: {message}"));
    }

    fn raw(&mut self, section: &str, key: &str) -> Option<String> {
        let mut found = None;
        for s in self.doc.sections.iter().filter(|s| s.name == section) {
            for e in &s.entries {
                if e.key == key {
                    found = Some(e.value.clone());
                }
            }
        }
        found
    }

    fn number(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.raw(section, key)?;
        match parse_number(&raw) {
            Ok(x) => Some(x),
            Err(e) => {
                self.violation(&format!("{section}.{key}"), &e);
                None
            }
        }
    }

    fn required_number(&mut self, section: &str, key: &str) -> Option<f64> {
        if self.raw(section, key).is_none() {
            self.violation(&format!("{section}.{key}"), "required key missing");
            return None;
        }
        self.number(section, key)
    }

    fn finish_unknown_checks(&mut self, known_sections: &[&str], known_keys: &[(&str, &str)]) {
        for s in &self.doc.sections {
            if !known_sections.contains(&s.name.as_str()) {
                self.violations.push(format!("{}: unknown section", s.name));
                continue;
            }
            for e in &s.entries {
                let known = known_keys
                    .iter()
                    .any(|(sec, key)| *sec == s.name && *key == e.key);
                if !known {
                    self.violations.push(format!(
                        "{}.{}: unknown key (line {})",
                        s.name, e.key, e.line
                    ));
                }
            }
        }
    }
}

const KNOWN_SECTIONS: &[&str] = &[
    "strategy",
    "reference",
    "frontend",
    "backend",
    "dclink",
    "filter",
    "load",
    "devices.igbt",
    "devices.fet",
    "timing",
    "compare",
];

const KNOWN_KEYS: &[(&str, &str)] = &[
    ("strategy", "kind"),
    ("reference", "m"),
    ("reference", "f"),
    ("reference", "theta0"),
    ("frontend", "f_inv"),
    ("backend", "n_mdl"),
    ("backend", "v_mdl"),
    ("backend", "f_mdl"),
    ("backend", "r_int"),
    ("backend", "capacity_ah"),
    ("backend", "offsets"),
    ("backend", "soc0"),
    ("backend", "l_mdl"),
    ("backend", "c_mdl"),
    ("dclink", "vdc"),
    ("filter", "l"),
    ("filter", "c"),
    ("filter", "r_l"),
    ("load", "kind"),
    ("load", "r"),
    ("load", "l"),
    ("load", "backemf"),
    ("load", "backemf_phase"),
    ("devices.igbt", "v_on0"),
    ("devices.igbt", "r_on"),
    ("devices.igbt", "e_on"),
    ("devices.igbt", "e_off"),
    ("devices.igbt", "e_rr"),
    ("devices.igbt", "v_ref"),
    ("devices.igbt", "i_ref"),
    ("devices.fet", "v_on0"),
    ("devices.fet", "r_on"),
    ("devices.fet", "e_on"),
    ("devices.fet", "e_off"),
    ("devices.fet", "e_rr"),
    ("devices.fet", "v_ref"),
    ("devices.fet", "i_ref"),
    ("timing", "dt"),
    ("timing", "duration"),
    ("timing", "settle"),
    ("timing", "ramp"),
    ("timing", "seed"),
    ("compare", "i_pk"),
];

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let doc = Document::parse(text)?;
    scenario_from_document(&doc)
}

/// Validates an already parsed document.
pub fn scenario_from_document(doc: &Document) -> Result<Scenario, ConfigError> {
    let mut ck = Checker::new(doc);

    let strategy = match ck.raw("strategy", "kind") {
        Some(s) => match Strategy::parse(&s) {
            Some(k) => Some(k),
            None => {
                ck.violation(
                    "strategy.kind",
                    &format!("`{s}` is not one of proposed|svpwm|dpwm"),
                );
                None
            }
        },
        None => {
            ck.violation("strategy.kind", "required key missing");
            None
        }
    };

    let m = ck.required_number("reference", "m");
    let f = ck.required_number("reference", "f");
    let theta0 = ck.number("reference", "theta0").unwrap_or(0.0);
    if let Some(m) = m {
        if !(0.0..=1.5).contains(&m) {
            ck.violation("reference.m", "must lie in [0, 1.5]");
        }
    }
    if let Some(f) = f {
        if f <= 0.0 {
            ck.violation("reference.f", "must be > 0");
        }
    }

    let f_inv = ck.required_number("frontend", "f_inv");
    if let Some(fi) = f_inv {
        if fi <= 0.0 {
            ck.violation("frontend.f_inv", "must be > 0");
        }
    }

    // Backend (proposed only).
    let has_backend_section = doc.sections.iter().any(|s| s.name == "backend");
    let backend = if has_backend_section {
        let n_mdl = ck.required_number("backend", "n_mdl");
        let v_mdl = ck.required_number("backend", "v_mdl");
        let f_mdl = ck.required_number("backend", "f_mdl");
        let r_int = ck.number("backend", "r_int").unwrap_or(0.0);
        let capacity_ah = ck.number("backend", "capacity_ah").unwrap_or(1.0);
        let soc0 = ck.number("backend", "soc0").unwrap_or(0.5);
        let l_mdl = ck.number("backend", "l_mdl").unwrap_or(0.0);
        let c_mdl = ck.number("backend", "c_mdl").unwrap_or(0.0);
        if l_mdl < 0.0 {
            ck.violation("backend.l_mdl", "must be >= 0");
        }
        if c_mdl < 0.0 {
            ck.violation("backend.c_mdl", "must be >= 0");
        }
        let n = n_mdl.map(|x| x as usize).unwrap_or(0);
        if let Some(nm) = n_mdl {
            if nm.fract() != 0.0 || !(1.0..=MAX_MODULES as f64).contains(&nm) {
                ck.violation(
                    "backend.n_mdl",
                    &format!("must be an integer in [1, {MAX_MODULES}]"),
                );
            }
        }
        if let Some(v) = v_mdl {
            if v <= 0.0 {
                ck.violation("backend.v_mdl", "must be > 0");
            }
        }
        if let Some(fm) = f_mdl {
            if fm <= 0.0 {
                ck.violation("backend.f_mdl", "must be > 0");
            }
        }
        if r_int < 0.0 {
            ck.violation("backend.r_int", "must be >= 0");
        }
        if capacity_ah <= 0.0 {
            ck.violation("backend.capacity_ah", "must be > 0");
        }
        if !(0.0..=1.0).contains(&soc0) {
            ck.violation("backend.soc0", "must lie in [0, 1]");
        }
        let offsets = match ck.raw("backend", "offsets") {
            Some(s) => match parse_list(&s) {
                Ok(v) => v,
                Err(e) => {
                    ck.violation("backend.offsets", &e);
                    vec![0.0; n.max(1)]
                }
            },
            None => vec![0.0; n.max(1)],
        };
        if n > 0 && offsets.len() != n {
            ck.violation(
                "backend.offsets",
                &format!("expected {n} entries, got {}", offsets.len()),
            );
        }
        let sum: f64 = offsets.iter().sum();
        if sum.abs() > 1e-12 {
            ck.violation(
                "backend.offsets",
                &format!("must sum to zero (sum = {sum:e})"),
            );
        }
        Some(BackendSettings {
            n_mdl: n.max(1),
            v_mdl: v_mdl.unwrap_or(1.0),
            f_mdl: f_mdl.unwrap_or(1.0),
            r_int,
            capacity_ah,
            offsets: if offsets.len() == n.max(1) {
                offsets
            } else {
                vec![0.0; n.max(1)]
            },
            soc0,
            l_mdl,
            c_mdl,
        })
    } else {
        None
    };

    let vdc_fixed = ck.number("dclink", "vdc");
    if let Some(v) = vdc_fixed {
        if v <= 0.0 {
            ck.violation("dclink.vdc", "must be > 0");
        }
    }
    match strategy {
        Some(Strategy::Proposed) if backend.is_none() => {
            ck.violation("backend", "section required for the proposed strategy");
        }
        Some(Strategy::Svpwm) | Some(Strategy::Dpwm) if vdc_fixed.is_none() => {
            ck.violation("dclink.vdc", "required for svpwm/dpwm (fixed dc link)");
        }
        _ => {}
    }

    let fl = ck.required_number("filter", "l");
    let fc = ck.required_number("filter", "c");
    let r_l = ck.number("filter", "r_l").unwrap_or(0.0);
    if let Some(l) = fl {
        if l <= 0.0 {
            ck.violation("filter.l", "must be > 0");
        }
    }
    if let Some(c) = fc {
        if c <= 0.0 {
            ck.violation("filter.c", "must be > 0");
        }
    }
    if r_l < 0.0 {
        ck.violation("filter.r_l", "must be >= 0");
    }

    let load_kind = match ck.raw("load", "kind") {
        Some(s) => match s.as_str() {
            "series_rl" => Some(LoadKind::SeriesRl),
            "rl_backemf" => Some(LoadKind::RlBackEmf),
            other => {
                ck.violation(
                    "load.kind",
                    &format!("`{other}` is not one of series_rl|rl_backemf"),
                );
                None
            }
        },
        None => Some(LoadKind::SeriesRl),
    };
    let load_r = ck.required_number("load", "r");
    let load_l = ck.required_number("load", "l");
    let backemf = ck.number("load", "backemf").unwrap_or(0.0);
    let backemf_phase = ck.number("load", "backemf_phase").unwrap_or(0.0);
    if let Some(r) = load_r {
        if r < 0.0 {
            ck.violation("load.r", "must be >= 0");
        }
    }
    if let Some(l) = load_l {
        if l < 0.0 {
            ck.violation("load.l", "must be >= 0");
        }
    }
    if let (Some(r), Some(l)) = (load_r, load_l) {
        if r == 0.0 && l == 0.0 {
            ck.violation("load", "r and l must not both be zero");
        }
    }
    if backemf < 0.0 {
        ck.violation("load.backemf", "must be >= 0");
    }

    let mut devices = Devices::default();
    for (section, params) in [
        ("devices.igbt", &mut devices.igbt),
        ("devices.fet", &mut devices.fet),
    ] {
        let fields: [(&str, &mut f64); 7] = [
            ("v_on0", &mut params.v_on0),
            ("r_on", &mut params.r_on),
            ("e_on", &mut params.e_on),
            ("e_off", &mut params.e_off),
            ("e_rr", &mut params.e_rr),
            ("v_ref", &mut params.v_ref),
            ("i_ref", &mut params.i_ref),
        ];
        for (key, slot) in fields {
            if let Some(v) = ck.number(section, key) {
                *slot = v;
            }
        }
        if params.v_ref <= 0.0 {
            ck.violation(&format!("{section}.v_ref"), "must be > 0");
        }
        if params.i_ref <= 0.0 {
            ck.violation(&format!("{section}.i_ref"), "must be > 0");
        }
        for (key, v) in [
            ("v_on0", params.v_on0),
            ("r_on", params.r_on),
            ("e_on", params.e_on),
            ("e_off", params.e_off),
            ("e_rr", params.e_rr),
        ] {
            if v < 0.0 {
                ck.violation(&format!("{section}.{key}"), "must be >= 0");
            }
        }
    }

    let timing = TimingSettings {
        dt: ck.number("timing", "dt"),
        duration: ck.number("timing", "duration"),
        settle: ck.number("timing", "settle"),
        ramp: ck.number("timing", "ramp").unwrap_or(0.0),
        seed: ck.number("timing", "seed").unwrap_or(0.0) as u64,
    };
    if let Some(dt) = timing.dt {
        if dt <= 0.0 {
            ck.violation("timing.dt", "must be > 0");
        }
    }
    if timing.ramp < 0.0 {
        ck.violation("timing.ramp", "must be >= 0");
    }

    let compare = ck
        .number("compare", "i_pk")
        .map(|i_pk| CompareSettings { i_pk });
    if let Some(c) = &compare {
        if c.i_pk <= 0.0 {
            ck.violation("compare.i_pk", "must be > 0");
        }
    }

    ck.finish_unknown_checks(KNOWN_SECTIONS, KNOWN_KEYS);

    // Cross-field checks that need the assembled scenario.
    if ck.violations.is_empty() {
        let scenario = Scenario {
            strategy: strategy.unwrap(),
            reference: ReferenceSettings {
                m: m.unwrap(),
                f: f.unwrap(),
                theta0,
            },
            f_inv: f_inv.unwrap(),
            backend,
            vdc_fixed,
            filter: FilterParams {
                l: fl.unwrap(),
                c: fc.unwrap(),
                r_l,
                r_eq: 0.0,
            },
            load: LoadSpec {
                kind: load_kind.unwrap(),
                r: load_r.unwrap(),
                l: load_l.unwrap(),
                backemf,
                backemf_phase,
            },
            devices,
            timing,
            compare,
        };
        if let Some(dt) = scenario.timing.dt {
            if dt > scenario.dt_max() {
                return Err(ConfigError::Validation {
                    violations: vec![format!(
                        "timing.dt: {dt:e} exceeds the maximum step {:e} (200 samples per switching period)",
                        scenario.dt_max()
                    )],
                });
            }
        }
        if scenario.duration() < scenario.settle() + 1.0 / scenario.reference.f {
            return Err(ConfigError::Validation {
                violations: vec![
                    "timing.duration: must leave at least one fundamental period after the settle window"
                        .to_string(),
                ],
            });
        }
        Ok(scenario)
    } else {
        Err(ConfigError::Validation {
            violations: ck.violations,
        })
    }
}
