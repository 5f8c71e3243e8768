//! Flat `key=value` settings and the validated experiment configuration built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use irregular_levy::grid::DEFAULT_DU;
use irregular_levy::spectral::DEFAULT_KAPPA;
use irregular_levy::weights::DEFAULT_MAX_ITERS;
use irregular_levy::{LevyModel, SamplingScheme, WeightKind};

use crate::error::{BenchError, Result};

/// Recognised setting keys.
pub const KEYS: &[&str] = &[
    "model", "n", "gap_upper", "gap_file", "reps", "seed", "target", "kappa", "grid_umax", "grid_du",
    "max_iters", "weights", "out_dir",
];

/// Ordered `key=value` pairs; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Parses `key = value` lines; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| BenchError::config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(BenchError::config(format!("unknown setting {key:?}")));
        }
        self.0.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| BenchError::config(format!("cannot parse {key} = {v:?}")))
            })
            .transpose()
    }
}

/// Quantity the risks refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    Jump,
    Density,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Jump => "jump",
            Target::Density => "density",
        })
    }
}

impl FromStr for Target {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jump" => Ok(Target::Jump),
            "density" => Ok(Target::Density),
            _ => Err(BenchError::config(format!("unknown target {s:?}"))),
        }
    }
}

/// Where observation gaps come from.
#[derive(Debug, Clone, PartialEq)]
pub enum GapLaw {
    /// I.i.d. uniform on `(0, upper]`, fresh for every replication.
    Uniform(f64),
    /// A fixed scheme read from a file, shared by all replications.
    Fixed { path: PathBuf, scheme: SamplingScheme },
}

impl GapLaw {
    /// Upper gap bound reported in outputs.
    pub fn upper(&self) -> f64 {
        match self {
            GapLaw::Uniform(u) => *u,
            GapLaw::Fixed { scheme, .. } => scheme.delta_max(),
        }
    }
}

/// Splits on commas outside parentheses, so `gamma(3,2),cpois_normal(3)` gives two items.
pub fn split_list(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if c == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Reads gaps from a text file: one value per line, or the `delta` column of a CSV with a
/// header row.
pub fn read_gap_file(path: &Path) -> Result<SamplingScheme> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let column = match lines.peek() {
        Some(first) if first.parse::<f64>().is_err() => {
            let header: Vec<&str> = first.split(',').map(str::trim).collect();
            let col = header
                .iter()
                .position(|h| *h == "delta")
                .ok_or_else(|| BenchError::config(format!("{}: no delta column", path.display())))?;
            lines.next();
            Some(col)
        }
        _ => None,
    };
    let mut gaps = Vec::new();
    for (i, line) in lines.enumerate() {
        let field = match column {
            Some(c) => line.split(',').nth(c),
            None => Some(line),
        };
        // a written scheme starts with the origin row, whose delta is empty
        if column.is_some() && field.is_some_and(|f| f.trim().is_empty()) {
            continue;
        }
        let v: f64 = field
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| BenchError::config(format!("{}: bad gap on data row {}", path.display(), i + 1)))?;
        gaps.push(v);
    }
    let max = gaps.iter().cloned().fold(0.0, f64::max);
    SamplingScheme::from_gaps(gaps, max).map_err(|e| BenchError::config(format!("{}: {e}", path.display())))
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub models: Vec<LevyModel>,
    pub ns: Vec<usize>,
    pub gaps: GapLaw,
    pub reps: usize,
    pub seed: u64,
    pub targets: Vec<Target>,
    pub kappa: f64,
    pub grid_umax: Option<f64>,
    pub grid_du: f64,
    pub max_iters: usize,
    pub weights: WeightKind,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: vec![LevyModel::Gamma { shape: 3.0, rate: 2.0 }],
            ns: vec![1000],
            gaps: GapLaw::Uniform(6.0),
            reps: 100,
            seed: 1,
            targets: vec![Target::Jump],
            kappa: DEFAULT_KAPPA,
            grid_umax: None,
            grid_du: DEFAULT_DU,
            max_iters: DEFAULT_MAX_ITERS,
            weights: WeightKind::Iterative,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Defaults overridden by `settings`, then validated.
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        let mut c = Self::default();
        if let Some(v) = settings.get("model") {
            c.models = split_list(v)
                .iter()
                .map(|m| m.parse().map_err(|e| BenchError::config(format!("{e}"))))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = settings.get("n") {
            c.ns = split_list(v)
                .iter()
                .map(|x| x.parse().map_err(|_| BenchError::config(format!("cannot parse n = {x:?}"))))
                .collect::<Result<_>>()?;
        }
        if let Some(v) = settings.get("target") {
            c.targets = split_list(v).iter().map(|t| t.parse()).collect::<Result<_>>()?;
            c.targets.sort();
            c.targets.dedup();
        }
        if let Some(u) = settings.parsed::<f64>("gap_upper")? {
            c.gaps = GapLaw::Uniform(u);
        }
        if let Some(path) = settings.get("gap_file") {
            if settings.get("gap_upper").is_some() {
                return Err(BenchError::config("gap_upper and gap_file are mutually exclusive"));
            }
            let path = PathBuf::from(path);
            let scheme = read_gap_file(&path)?;
            if settings.get("n").is_some() && c.ns != [scheme.len()] {
                return Err(BenchError::config(format!(
                    "gap file has {} gaps but n = {:?}",
                    scheme.len(),
                    c.ns
                )));
            }
            c.ns = vec![scheme.len()];
            c.gaps = GapLaw::Fixed { path, scheme };
        }
        if let Some(v) = settings.parsed("reps")? {
            c.reps = v;
        }
        if let Some(v) = settings.parsed("seed")? {
            c.seed = v;
        }
        if let Some(v) = settings.parsed("kappa")? {
            c.kappa = v;
        }
        if let Some(v) = settings.parsed("grid_umax")? {
            c.grid_umax = Some(v);
        }
        if let Some(v) = settings.parsed("grid_du")? {
            c.grid_du = v;
        }
        if let Some(v) = settings.parsed("max_iters")? {
            c.max_iters = v;
        }
        if let Some(v) = settings.get("weights") {
            c.weights = v.parse().map_err(|e| BenchError::config(format!("{e}")))?;
        }
        if let Some(v) = settings.get("out_dir") {
            c.out_dir = PathBuf::from(v);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::config(m));
        if self.models.is_empty() || self.ns.is_empty() || self.targets.is_empty() {
            return fail("model, n and target lists must be nonempty".into());
        }
        if self.ns.iter().any(|&n| n == 0) {
            return fail("n must be positive".into());
        }
        if self.reps == 0 {
            return fail("reps must be positive".into());
        }
        if let GapLaw::Uniform(u) = self.gaps {
            if !(u.is_finite() && u > 0.0) {
                return fail(format!("gap_upper must be positive, got {u}"));
            }
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return fail(format!("kappa must be >= 0, got {}", self.kappa));
        }
        if !(self.grid_du.is_finite() && self.grid_du > 0.0) {
            return fail(format!("grid_du must be positive, got {}", self.grid_du));
        }
        if let Some(u) = self.grid_umax {
            if !(u.is_finite() && u > 0.0) {
                return fail(format!("grid_umax must be positive, got {u}"));
            }
        }
        if self.max_iters == 0 {
            return fail("max_iters must be >= 1".into());
        }
        if matches!(self.weights, WeightKind::Explicit) {
            return fail("explicit weights cannot be configured".into());
        }
        for m in &self.models {
            for t in &self.targets {
                match t {
                    Target::Jump if !m.has_jump_part() => {
                        return fail(format!("{m} has no jump function to estimate"));
                    }
                    Target::Density if m.char_function_tail_mass(1.0, 0.0).is_err() => {
                        return fail(format!("{m} has no square-integrable density"));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// `key=value` lines describing every field, in a fixed order.
    pub fn echo(&self) -> String {
        let list = |v: Vec<String>| v.join(",");
        let mut lines = vec![
            format!("model={}", list(self.models.iter().map(|m| m.to_string()).collect())),
            format!("n={}", list(self.ns.iter().map(|n| n.to_string()).collect())),
        ];
        match &self.gaps {
            GapLaw::Uniform(u) => lines.push(format!("gap_upper={u}")),
            GapLaw::Fixed { path, .. } => lines.push(format!("gap_file={}", path.display())),
        }
        lines.extend([
            format!("reps={}", self.reps),
            format!("seed={}", self.seed),
            format!("target={}", list(self.targets.iter().map(|t| t.to_string()).collect())),
            format!("kappa={}", self.kappa),
        ]);
        if let Some(u) = self.grid_umax {
            lines.push(format!("grid_umax={u}"));
        }
        lines.extend([
            format!("grid_du={}", self.grid_du),
            format!("max_iters={}", self.max_iters),
            format!("weights={}", self.weights),
            format!("out_dir={}", self.out_dir.display()),
        ]);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_respects_parentheses() {
        assert_eq!(split_list("gamma(3,2), cpois_normal(3)"), vec!["gamma(3,2)", "cpois_normal(3)"]);
        assert_eq!(split_list("1000,10000"), vec!["1000", "10000"]);
        assert!(split_list("").is_empty());
    }

    #[test]
    fn settings_parse_and_override() {
        let mut s = Settings::parse("# comment\nmodel = gamma(3,2)\n\nreps=5\n").unwrap();
        s.set("reps", "7").unwrap();
        s.set("gap-upper", "2").unwrap();
        let c = ExperimentConfig::from_settings(&s).unwrap();
        assert_eq!(c.reps, 7);
        assert_eq!(c.gaps, GapLaw::Uniform(2.0));
        assert!(Settings::parse("reps").is_err());
        assert!(Settings::parse("colour=blue").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let s = Settings::parse("model=gamma(3,2),bgamma(2,4)\nn=1000,5000\ntarget=density,jump\nweights=binned:3\ngrid_umax=50").unwrap();
        let c = ExperimentConfig::from_settings(&s).unwrap();
        let again = ExperimentConfig::from_settings(&Settings::parse(&c.echo()).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.targets, vec![Target::Jump, Target::Density]);
    }

    #[test]
    fn validation_rejects_bad_values() {
        for text in [
            "reps=0",
            "kappa=-1",
            "gap_upper=0",
            "n=0",
            "model=cpois_normal(3)\ntarget=density",
            "model=bm(0,1)",
            "weights=heavy",
            "target=both",
            "max_iters=0",
        ] {
            let s = Settings::parse(text).unwrap();
            let err = ExperimentConfig::from_settings(&s).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
