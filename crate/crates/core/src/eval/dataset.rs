use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::{Claim, VeracityLabel};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// Native label vocabulary of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// `True` / `False`.
    TrueFalse,
    /// `SUPPORTED` / `REFUTED`, mapped to TRUE / FALSE.
    SupportedRefuted,
}

impl LabelScheme {
    pub fn map(self, raw: &str) -> Option<VeracityLabel> {
        let l = raw.trim().to_ascii_uppercase();
        match self {
            LabelScheme::TrueFalse => match l.as_str() {
                "TRUE" => Some(VeracityLabel::True),
                "FALSE" => Some(VeracityLabel::False),
                _ => None,
            },
            LabelScheme::SupportedRefuted => match l.as_str() {
                "SUPPORTED" | "SUPPORTS" | "SUPPORT" => Some(VeracityLabel::True),
                "REFUTED" | "REFUTES" | "REFUTE" => Some(VeracityLabel::False),
                _ => None,
            },
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::TrueFalse => "true_false",
            LabelScheme::SupportedRefuted => "supported_refuted",
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "true_false" => Ok(LabelScheme::TrueFalse),
            "supported_refuted" => Ok(LabelScheme::SupportedRefuted),
            other => Err(format!(
                "unknown label scheme '{other}' (true_false, supported_refuted)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub claim: String,
    pub gold: VeracityLabel,
    /// Label as written in the file.
    pub native_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hops: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl DatasetRecord {
    pub fn to_claim(&self, dataset: &str) -> Claim {
        Claim {
            id: self.id.clone(),
            text: self.claim.clone(),
            gold_label: Some(self.gold),
            dataset: dataset.to_string(),
        }
    }

    /// The JSON-lines form read by [`load_dataset`].
    pub fn to_line(&self) -> String {
        let mut v = serde_json::json!({
            "id": self.id,
            "claim": self.claim,
            "label": self.native_label,
        });
        if let Some(h) = self.hops {
            v["hops"] = h.into();
        }
        if let Some(d) = &self.domain {
            v["domain"] = d.clone().into();
        }
        v.to_string()
    }
}

pub fn load_dataset(path: &Path, scheme: LabelScheme) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, scheme)
}

/// Parses JSON lines of `{"id", "claim", "label"}` plus optional `hops` and
/// `domain`. File order is preserved; blank lines are skipped.
pub fn parse_dataset(text: &str, scheme: LabelScheme) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| DatasetError::Schema {
            line: line_no,
            message,
        };
        let v: Value = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        let id = match v.get("id") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(schema("missing 'id'".into())),
        };
        let claim = match v.get("claim") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            _ => return Err(schema(format!("record '{id}' is missing 'claim'"))),
        };
        let native_label = match v.get("label") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Bool(b)) => if *b { "True" } else { "False" }.to_string(),
            _ => return Err(schema(format!("record '{id}' is missing 'label'"))),
        };
        let gold = scheme.map(&native_label).ok_or_else(|| {
            schema(format!(
                "record '{id}' has label '{native_label}' outside the {scheme} scheme"
            ))
        })?;
        if !ids.insert(id.clone()) {
            return Err(schema(format!("duplicate id '{id}'")));
        }
        let hops = v
            .get("hops")
            .or_else(|| v.get("num_hops"))
            .and_then(Value::as_u64)
            .map(|h| h as u32);
        let domain = v.get("domain").and_then(Value::as_str).map(str::to_string);
        out.push(DatasetRecord {
            id,
            claim,
            gold,
            native_label,
            hops,
            domain,
        });
    }
    Ok(out)
}

/// Draws up to `n` records with the two labels as balanced as the data
/// allows. The result keeps file order. Same seed, same sample.
pub fn stratified_sample(records: &[DatasetRecord], n: usize, seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_label: BTreeMap<VeracityLabel, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.gold).or_default().push(i);
    }
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
    }
    let n = n.min(records.len());
    let available = |l| by_label.get(&l).map_or(0, Vec::len);
    let (t_avail, f_avail) = (
        available(VeracityLabel::True),
        available(VeracityLabel::False),
    );
    let mut t_take = n.div_ceil(2).min(t_avail);
    let f_take = (n - t_take).min(f_avail);
    t_take = (n - f_take).min(t_avail);

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    if let Some(v) = by_label.get(&VeracityLabel::True) {
        chosen.extend(&v[..t_take]);
    }
    if let Some(v) = by_label.get(&VeracityLabel::False) {
        chosen.extend(&v[..f_take]);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| records[i].clone()).collect()
}
