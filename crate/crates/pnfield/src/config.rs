//! Flat key = value configuration with section headers, plus the semantic
//! validation pass that reports violations without running anything.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::AnisotropyKernel;
use crate::fields::{DomainKind, DomainSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    pub section: String,
    pub name: String,
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.section, self.name)
    }
}

/// Parsed but untyped configuration: values with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<Key, (String, usize)>,
    pub text: String,
    pub base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(i) => &raw_line[..i],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(Error::BadConfig(format!(
                        "line {}: malformed section header '{raw_line}'",
                        lineno + 1
                    )));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::BadConfig(format!(
                    "line {}: expected 'key = value', got '{raw_line}'",
                    lineno + 1
                )));
            };
            let name = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if name.is_empty() {
                return Err(Error::BadConfig(format!("line {}: empty key", lineno + 1)));
            }
            let key = Key { section: section.clone(), name };
            if entries.contains_key(&key) {
                return Err(Error::BadConfig(format!(
                    "line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
            entries.insert(key, (value, lineno + 1));
        }
        Ok(RawConfig { entries, text: text.to_string(), base_dir: base_dir.to_path_buf() })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(&path)?;
        let base = path
            .as_ref()
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        Self::parse(&text, &base)
    }

    pub fn get(&self, section: &str, name: &str) -> Option<&str> {
        self.entries
            .get(&Key { section: section.into(), name: name.into() })
            .map(|(v, _)| v.as_str())
    }

    pub fn require(&self, section: &str, name: &str) -> Result<&str> {
        self.get(section, name).ok_or_else(|| {
            Error::BadConfig(format!("missing required key [{section}] {name}"))
        })
    }

    pub fn parse_value<T: std::str::FromStr>(&self, section: &str, name: &str) -> Result<T> {
        let v = self.require(section, name)?;
        v.parse().map_err(|_| {
            let line = self
                .entries
                .get(&Key { section: section.into(), name: name.into() })
                .map(|(_, l)| *l)
                .unwrap_or(0);
            Error::BadConfig(format!(
                "line {line}: cannot parse [{section}] {name} = '{v}'"
            ))
        })
    }

    pub fn parse_or<T: std::str::FromStr>(
        &self,
        section: &str,
        name: &str,
        default: T,
    ) -> Result<T> {
        match self.get(section, name) {
            None => Ok(default),
            Some(_) => self.parse_value(section, name),
        }
    }

    pub fn vector(&self, section: &str, name: &str) -> Result<Vec<f64>> {
        let v = self.require(section, name)?;
        v.split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::BadConfig(format!("[{section}] {name}: bad number '{t}'"))
                })
            })
            .collect()
    }

    /// Resolve a path value relative to the config file's directory.
    pub fn path(&self, section: &str, name: &str) -> Result<PathBuf> {
        let v = self.require(section, name)?;
        let p = PathBuf::from(v);
        Ok(if p.is_absolute() { p } else { self.base_dir.join(p) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    PsiTable,
    Envelope,
    Energy,
    Minimize,
    SweepLineTension,
    SweepGamma,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "psi-table" => Self::PsiTable,
            "envelope" => Self::Envelope,
            "energy" => Self::Energy,
            "minimize" => Self::Minimize,
            "sweep-linetension" => Self::SweepLineTension,
            "sweep-gamma" => Self::SweepGamma,
            other => {
                return Err(Error::BadConfig(format!("unknown experiment kind '{other}'")))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PsiTable => "psi-table",
            Self::Envelope => "envelope",
            Self::Energy => "energy",
            Self::Minimize => "minimize",
            Self::SweepLineTension => "sweep-linetension",
            Self::SweepGamma => "sweep-gamma",
        }
    }
}

/// Build the kernel named by the [kernel] section.
pub fn kernel_from_config(cfg: &RawConfig) -> Result<AnisotropyKernel> {
    match cfg.require("kernel", "variant")? {
        "cubic" => {
            let mu: f64 = cfg.parse_value("kernel", "mu")?;
            let nu: f64 = cfg.parse_value("kernel", "nu")?;
            AnisotropyKernel::cubic(mu, nu)
        }
        "tabulated" => {
            let path = cfg.path("kernel", "table")?;
            AnisotropyKernel::from_table_file(path)
        }
        other => Err(Error::BadConfig(format!("unknown kernel variant '{other}'"))),
    }
}

pub fn domain_from_config(cfg: &RawConfig) -> Result<DomainSpec> {
    let kind = match cfg.parse_or::<String>("domain", "kind", "torus".into())?.as_str() {
        "torus" => DomainKind::Torus,
        "box" => DomainKind::Box,
        other => return Err(Error::BadConfig(format!("unknown domain kind '{other}'"))),
    };
    let s1: f64 = cfg.parse_or("domain", "side1", 1.0)?;
    let s2: f64 = cfg.parse_or("domain", "side2", 1.0)?;
    match kind {
        DomainKind::Torus => DomainSpec::torus(s1, s2),
        DomainKind::Box => DomainSpec::rect(s1, s2),
    }
    .map_err(|e| Error::BadConfig(e.to_string()))
}

/// Semantic validation: collect every violation the experiment would hit,
/// without running it.
pub fn validate(cfg: &RawConfig) -> Vec<String> {
    let mut diags = Vec::new();

    let kind = match cfg.require("experiment", "kind").and_then(ExperimentKind::parse) {
        Ok(k) => Some(k),
        Err(e) => {
            diags.push(e.to_string());
            None
        }
    };

    if let Err(e) = domain_from_config(cfg) {
        diags.push(e.to_string());
    }
    match kernel_from_config(cfg) {
        Err(Error::NotElliptic(_)) => diags.push("kernel not elliptic".into()),
        Err(e) => diags.push(e.to_string()),
        Ok(_) => {}
    }

    let Some(kind) = kind else { return diags };

    match kind {
        ExperimentKind::PsiTable | ExperimentKind::Envelope => {
            match cfg.parse_or::<i64>("experiment", "b_max", 1) {
                Ok(b) if b < 1 => diags.push(format!("b_max must be >= 1, got {b}")),
                Err(e) => diags.push(e.to_string()),
                _ => {}
            }
            match cfg.parse_or::<usize>("experiment", "k_directions", 32) {
                Ok(k) if k < 8 => diags.push(format!("k_directions must be >= 8, got {k}")),
                Err(e) => diags.push(e.to_string()),
                _ => {}
            }
        }
        ExperimentKind::Energy | ExperimentKind::Minimize => {
            match cfg.path("experiment", "field") {
                Ok(p) if !p.exists() => {
                    diags.push(format!("field file does not exist: {}", p.display()))
                }
                Err(e) => diags.push(e.to_string()),
                _ => {}
            }
            match cfg.parse_value::<f64>("experiment", "eps") {
                Ok(e) if e <= 0.0 => diags.push(format!("eps must be positive, got {e}")),
                Err(e) => diags.push(e.to_string()),
                _ => {}
            }
        }
        ExperimentKind::SweepLineTension | ExperimentKind::SweepGamma => {
            match cfg.path("experiment", "geometry") {
                Ok(p) if !p.exists() => {
                    diags.push(format!("geometry file does not exist: {}", p.display()))
                }
                Err(e) => diags.push(e.to_string()),
                _ => {}
            }
            let p_min = cfg.parse_or::<i32>("experiment", "p_min", 6);
            let p_max = cfg.parse_or::<i32>("experiment", "p_max", 10);
            match (&p_min, &p_max) {
                (Ok(a), Ok(b)) if a > b => {
                    diags.push(format!("empty eps list: p_min = {a} > p_max = {b}"))
                }
                _ => {
                    if let Err(e) = p_min {
                        diags.push(e.to_string());
                    }
                    if let Err(e) = p_max {
                        diags.push(e.to_string());
                    }
                }
            }
            // Grid-resolution policy: a dims cap must still resolve the
            // mollifier at the smallest eps.
            if cfg.get("experiment", "max_dims").is_some() {
                if let (Ok(cap), Ok(pmax)) = (
                    cfg.parse_value::<usize>("experiment", "max_dims"),
                    cfg.parse_or::<i32>("experiment", "p_max", 10),
                ) {
                    let eps = (2.0f64).powi(-pmax);
                    let side = cfg.parse_or("domain", "side1", 1.0).unwrap_or(1.0);
                    if cap >= 1 && side / cap as f64 > eps {
                        diags.push(format!(
                            "max_dims = {cap} leaves h = {:.3e} above eps = {eps:.3e}",
                            side / cap as f64
                        ));
                    }
                }
            }
            if kind == ExperimentKind::SweepGamma {
                match cfg.parse_value::<f64>("experiment", "alpha") {
                    Ok(a) if !(a > 0.0 && a < 0.5) => {
                        diags.push(format!("alpha outside (0, 1/2): {a}"))
                    }
                    Err(e) => diags.push(e.to_string()),
                    _ => {}
                }
                match cfg.parse_value::<f64>("experiment", "rho") {
                    Ok(r) if r <= 0.0 => diags.push(format!("rho must be positive, got {r}")),
                    Err(e) => diags.push(e.to_string()),
                    _ => {}
                }
                // Shift-margin constraint on a box domain.
                if let (Ok(rho), Ok(alpha), Ok(margin), Ok(kind_str)) = (
                    cfg.parse_or::<f64>("experiment", "rho", 0.0),
                    cfg.parse_or::<f64>("experiment", "alpha", 0.25),
                    cfg.parse_or::<f64>("experiment", "margin", 0.0),
                    cfg.parse_or::<String>("domain", "kind", "torus".into()),
                ) {
                    if kind_str == "box"
                        && rho > 0.0
                        && alpha > 0.0
                        && 3.0 * rho.powf(alpha) >= margin
                    {
                        diags.push(format!(
                            "margin violation: 3 rho^alpha = {:.6} >= margin = {margin}",
                            3.0 * rho.powf(alpha)
                        ));
                    }
                }
            }
        }
    }
    diags
}
