//! Experiment registry, configuration, CSV tables and the pass/fail bookkeeping behind the
//! `magflow` binary.
//!
//! A config file holds one flat section per experiment, keyed by the experiment name:
//!
//! ```text
//! [converge-fixed]
//! epsilons = 0.1, 0.03, 0.01, 0.003, 0.001
//! t_final = 0.5
//! ```
//!
//! Keys not declared by the experiment are rejected; missing keys take the defaults listed by
//! `magflow --list`.

mod experiments;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ini::Ini;

use crate::{Error, Result};

/// A configurable parameter and its default, as text.
#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// A registered experiment.
#[derive(Clone, Copy)]
pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    pub columns: &'static [&'static str],
    pub params: &'static [Param],
    run: fn(&ExperimentSpec) -> Result<Outcome>,
}

pub fn registry() -> &'static [Experiment] {
    experiments::REGISTRY
}

pub fn find(name: &str) -> Result<&'static Experiment> {
    registry().iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

/// Parameters of one run: the experiment name and every declared key with its value.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    values: BTreeMap<String, String>,
}

impl ExperimentSpec {
    pub fn defaults(name: &str) -> Result<Self> {
        let exp = find(name)?;
        let values = exp.params.iter().map(|p| (p.key.to_string(), p.default.to_string())).collect();
        Ok(Self { name: name.to_string(), values })
    }

    /// Defaults overridden by the section `[name]` of an INI document; other sections are ignored.
    pub fn from_ini_str(name: &str, text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_ini(name, &ini)
    }

    pub fn from_ini_file(name: &str, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_ini_str(name, &text)
    }

    fn from_ini(name: &str, ini: &Ini) -> Result<Self> {
        let mut spec = Self::defaults(name)?;
        if let Some(section) = ini.section(Some(name)) {
            for (k, v) in section.iter() {
                spec.set(k, v)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("experiment `{}` has no parameter `{key}`", self.name))),
        }
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("experiment `{}` has no parameter `{key}`", self.name)))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.get(key)?)
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| Error::Config(format!("`{key}` must be a non-negative integer, got `{raw}`")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.get(key)?;
        let items: Vec<f64> = raw.split(',').map(|s| parse_f64(key, s.trim())).collect::<Result<_>>()?;
        if items.is_empty() {
            return Err(Error::Config(format!("`{key}` must not be empty")));
        }
        Ok(items)
    }

    /// A list of ε values: strictly decreasing, each in (0, 1].
    pub fn epsilons(&self, key: &str) -> Result<Vec<f64>> {
        let eps = self.list(key)?;
        if eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!("`{key}` must be strictly decreasing values in (0, 1]")));
        }
        Ok(eps)
    }

    /// Parses every declared parameter once, so a bad value fails before any work starts.
    pub fn validate(&self) -> Result<()> {
        for (k, v) in &self.values {
            if k.contains("epsilons") {
                self.epsilons(k)?;
            } else {
                for item in v.split(',') {
                    parse_f64(k, item.trim())?;
                }
            }
        }
        Ok(())
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("`{key}` expects finite numbers, got `{raw}`"))),
    }
}

/// Rectangular table of numbers with `# key = value` footer records.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub footer: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), footer: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.footer.push((key.to_string(), value.into()));
    }

    pub fn note_f64(&mut self, key: &str, value: f64) {
        self.note(key, format!("{value:.16e}"));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Header, rows formatted `{:.16e}`, LF line endings, then the footer.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let mut out = String::from_utf8(bytes).expect("csv output is ASCII");
        for (k, v) in &self.footer {
            writeln!(out, "# {k} = {v}").expect("writing to a String cannot fail");
        }
        Ok(out)
    }
}

/// One asserted property of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub table: ResultTable,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn new(table: ResultTable) -> Self {
        Self { table, checks: Vec::new() }
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// The CSV with one footer record per check appended.
    pub fn to_csv(&self) -> Result<String> {
        let mut table = self.table.clone();
        for c in &self.checks {
            table.note(
                &format!("check.{}", c.name),
                format!("{} ({})", if c.passed { "pass" } else { "fail" }, c.detail),
            );
        }
        table.to_csv()
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let exp = find(&spec.name)?;
    spec.validate()?;
    let out = (exp.run)(spec)?;
    debug_assert_eq!(out.table.columns, exp.columns.iter().map(|c| c.to_string()).collect::<Vec<_>>());
    Ok(out)
}

/// Process exit status for an error: 2 for usage problems, 1 for everything else.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownExperiment(_) => 2,
        _ => 1,
    }
}

/// Text for `--list`.
pub fn describe_registry() -> String {
    let mut s = String::new();
    for e in registry() {
        let _ = writeln!(s, "{:<18} {}", e.name, e.summary);
        for p in e.params {
            let _ = writeln!(s, "    {} = {}    ; {}", p.key, p.default, p.help);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_complete() {
        let names: Vec<_> = registry().iter().map(|e| e.name).collect();
        let expected = [
            "validate-field",
            "oracle-homogeneous",
            "converge-fixed",
            "converge-general",
            "symbols",
            "shell",
            "transfer-identity",
            "osc-scaling",
            "prepared-vs-ill",
            "volume",
            "diffeo-margin",
        ];
        assert_eq!(names, expected);
        for e in registry() {
            ExperimentSpec::defaults(e.name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn config_overrides_and_rejections() {
        let text = "[converge-fixed]\nepsilons = 0.1, 0.01, 0.001\nt_final = 0.25\n[other]\nfoo = 1\n";
        let spec = ExperimentSpec::from_ini_str("converge-fixed", text).unwrap();
        assert_eq!(spec.epsilons("epsilons").unwrap(), vec![0.1, 0.01, 0.001]);
        assert_eq!(spec.f64("t_final").unwrap(), 0.25);
        let bad_key = "[converge-fixed]\nunknown = 3\n";
        assert!(matches!(ExperimentSpec::from_ini_str("converge-fixed", bad_key), Err(Error::Config(_))));
        let increasing = "[converge-fixed]\nepsilons = 0.01, 0.1, 0.001\n";
        assert!(matches!(ExperimentSpec::from_ini_str("converge-fixed", increasing), Err(Error::Config(_))));
        let nan = "[converge-fixed]\nt_final = nan\n";
        assert!(matches!(ExperimentSpec::from_ini_str("converge-fixed", nan), Err(Error::Config(_))));
        assert!(matches!(ExperimentSpec::defaults("nope"), Err(Error::UnknownExperiment(_))));
        assert_eq!(error_exit_code(&Error::UnknownExperiment("x".into())), 2);
        assert_eq!(error_exit_code(&Error::Domain("x".into())), 1);
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.push(vec![1.0, -0.1]);
        t.note_f64("slope", 2.0);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "a,b\n1.0000000000000000e0,-1.0000000000000001e-1\n# slope = 2.0000000000000000e0\n");
        let back: f64 = "-1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, -0.1);
    }
}
