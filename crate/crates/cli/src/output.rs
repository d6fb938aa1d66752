//! Scenario reports and their CSV/JSON serialisation. Everything written
//! here is a pure function of the report, so reruns are byte-identical.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

/// One declared check: `value` against `bound` under `relation`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            bound,
            passed: value <= bound,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<",
            bound,
            passed: value < bound,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">",
            bound,
            passed: value > bound,
        }
    }

    /// A yes/no property recorded as `value = 1` (true) against `bound = 1`.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            relation: "==",
            bound: 1.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Guard {
    pub name: String,
    pub value: f64,
}

/// Rows of numbers; `suffix` distinguishes several tables of one scenario.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub suffix: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            suffix: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn named(suffix: &str, columns: &[&str]) -> Self {
        Self {
            suffix: Some(suffix.to_string()),
            ..Self::new(columns)
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: &'static str,
    pub config: Value,
    pub guards: Vec<Guard>,
    pub checks: Vec<Check>,
    pub results: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub error: Option<String>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn new(name: &str, kind: &'static str, config: Value) -> Self {
        Self {
            name: name.to_string(),
            kind,
            config,
            guards: Vec::new(),
            checks: Vec::new(),
            results: Value::Null,
            tables: Vec::new(),
            error: None,
            passed: true,
        }
    }

    pub fn guard(&mut self, name: &str, value: f64) {
        self.guards.push(Guard {
            name: name.to_string(),
            value,
        });
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn fail(&mut self, message: String) {
        self.error = Some(message);
    }

    pub fn finish(mut self) -> Self {
        self.passed = self.error.is_none() && self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Shortest representation that round-trips, in scientific notation for
/// very small or large magnitudes; stable across runs.
pub fn number(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes `table` with every guard appended as a constant column.
pub fn write_table(path: &Path, table: &Table, guards: &[Guard]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let header: Vec<String> = table
        .columns
        .iter()
        .cloned()
        .chain(guards.iter().map(|g| format!("guard_{}", g.name)))
        .collect();
    w.write_record(&header)?;
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .chain(guards.iter().map(|g| &g.value))
            .map(|v| number(*v))
            .collect();
        w.write_record(&cells)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `<dir>/<name>.json`, `<dir>/<name>.csv` and `<dir>/<name>_<suffix>.csv`.
pub fn write_report(dir: &Path, report: &ScenarioReport) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join(format!("{}.json", report.name)), report)?;
    for table in &report.tables {
        let file = match &table.suffix {
            None => format!("{}.csv", report.name),
            Some(s) => format!("{}_{s}.csv", report.name),
        };
        write_table(&dir.join(file), table, &report.guards)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryEntry {
    pub name: String,
    pub kind: &'static str,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub passed: bool,
    pub scenarios: Vec<SummaryEntry>,
}

impl Summary {
    pub fn from_reports(experiment: &str, reports: &[ScenarioReport]) -> Self {
        let scenarios: Vec<SummaryEntry> = reports
            .iter()
            .map(|r| SummaryEntry {
                name: r.name.clone(),
                kind: r.kind,
                passed: r.passed,
                failed_checks: r.failed_checks().iter().map(|c| c.name.clone()).collect(),
                error: r.error.clone(),
            })
            .collect();
        Self {
            experiment: experiment.to_string(),
            passed: scenarios.iter().all(|s| s.passed),
            scenarios,
        }
    }
}
