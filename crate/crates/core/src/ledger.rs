//! Append-only record of every constant used by the perturbation
//! machinery, each tagged with how it was obtained.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Measured,
    GammaCeiling,
    DerivedFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub alpha: f64,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub value: f64,
    pub provenance: Provenance,
    /// Named inputs for derived entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    entries: Vec<LedgerEntry>,
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, _) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(1.0),
        (Some(_), None) => false,
    }
}

impl ConstantsLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        name: &str,
        alpha: f64,
        delta: Option<f64>,
        r: Option<f64>,
        lambda: Option<f64>,
        value: f64,
        provenance: Provenance,
        inputs: Vec<(String, f64)>,
    ) -> f64 {
        self.push(LedgerEntry {
            name: name.to_string(),
            alpha,
            delta,
            r,
            lambda,
            value,
            provenance,
            inputs,
        });
        value
    }

    /// Most recent entry called `name` matching the given keys (`None`
    /// matches anything).
    pub fn get(&self, name: &str, delta: Option<f64>, lambda: Option<f64>) -> Result<&LedgerEntry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.name == name && same(delta, e.delta) && same(lambda, e.lambda))
            .ok_or_else(|| {
                Error::MissingLedgerEntry(format!(
                    "{name} (delta {}, lambda {})",
                    delta.map_or("any".into(), |d| d.to_string()),
                    lambda.map_or("any".into(), |l| l.to_string())
                ))
            })
    }

    /// `k_λ = (C_λ + 2/λ) B_M` from the stored modulus (`C_lambda` or
    /// `C_hat_lambda`), recorded as a derived entry.
    pub fn k_lambda(&mut self, lambda: f64, delta: f64, gradient: bool, b_m: f64) -> Result<f64> {
        let name = if gradient { "C_hat_lambda" } else { "C_lambda" };
        let entry = self.get(name, Some(delta), Some(lambda))?.clone();
        let k = crate::perturb::k_lambda(entry.value, lambda, b_m);
        Ok(self.record(
            "k_lambda",
            entry.alpha,
            Some(delta),
            None,
            Some(lambda),
            k,
            Provenance::DerivedFormula,
            vec![(name.to_string(), entry.value), ("B_M".into(), b_m)],
        ))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serialises")
    }
}
