use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Outcome of one verifier, serialized as a JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check_name: String,
    pub params: serde_json::Value,
    pub fitted_constants: BTreeMap<String, f64>,
    pub max_ratio: f64,
    pub pass: bool,
    pub details_csv_path: Option<String>,
}

impl Report {
    pub fn new(check_name: impl Into<String>, params: serde_json::Value) -> Self {
        Self {
            check_name: check_name.into(),
            params,
            fitted_constants: BTreeMap::new(),
            max_ratio: 0.0,
            pass: true,
            details_csv_path: None,
        }
    }

    pub fn constant(mut self, name: &str, value: f64) -> Self {
        self.fitted_constants.insert(name.to_string(), value);
        self
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = Report::new("lemma42", serde_json::json!({"m": 2})).constant("bound", 2.0);
        r.max_ratio = 0.99;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        r.write_json(&p).unwrap();
        let back: Report = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
