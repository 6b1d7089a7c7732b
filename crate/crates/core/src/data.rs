//! One-way ANOVA datasets and CSV ingestion.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?} in header")]
    MissingColumn(&'static str),
    #[error("line {line}: response {value:?} is not a number")]
    NonNumeric { line: u64, value: String },
    #[error("line {line}: empty group label")]
    EmptyLabel { line: u64 },
    #[error("group {0} has no observations")]
    EmptyGroup(usize),
    #[error("dataset has no observations")]
    Empty,
    #[error("response and group vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("response {0} is not finite")]
    NonFinite(f64),
}

/// Responses with 1-based group labels. Observations are kept sorted by
/// group (stable within a group), matching the row layout of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct AnovaData {
    responses: Vec<f64>,
    groups: Vec<usize>,
    group_sizes: Vec<usize>,
}

impl AnovaData {
    /// `groups[i]` is the 1-based group of `responses[i]`; every group in
    /// `1..=J` (J = max label) must be nonempty.
    pub fn new(responses: Vec<f64>, groups: Vec<usize>) -> Result<Self, DataError> {
        if responses.len() != groups.len() {
            return Err(DataError::LengthMismatch(responses.len(), groups.len()));
        }
        if responses.is_empty() {
            return Err(DataError::Empty);
        }
        if let Some(&bad) = responses.iter().find(|v| !v.is_finite()) {
            return Err(DataError::NonFinite(bad));
        }
        if groups.contains(&0) {
            return Err(DataError::EmptyGroup(0));
        }
        let j = *groups.iter().max().unwrap();
        let mut group_sizes = vec![0; j];
        for &g in &groups {
            group_sizes[g - 1] += 1;
        }
        if let Some(g) = group_sizes.iter().position(|&s| s == 0) {
            return Err(DataError::EmptyGroup(g + 1));
        }
        let mut idx: Vec<usize> = (0..responses.len()).collect();
        idx.sort_by_key(|&i| groups[i]);
        Ok(Self {
            responses: idx.iter().map(|&i| responses[i]).collect(),
            groups: idx.iter().map(|&i| groups[i]).collect(),
            group_sizes,
        })
    }

    /// Build from per-group samples, group 1 first.
    pub fn from_groups(samples: &[Vec<f64>]) -> Result<Self, DataError> {
        let mut y = Vec::new();
        let mut g = Vec::new();
        for (j, s) in samples.iter().enumerate() {
            if s.is_empty() {
                return Err(DataError::EmptyGroup(j + 1));
            }
            y.extend_from_slice(s);
            g.extend(std::iter::repeat(j + 1).take(s.len()));
        }
        Self::new(y, g)
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn y(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.responses)
    }

    pub fn group_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.num_groups()];
        for (&v, &g) in self.responses.iter().zip(&self.groups) {
            sums[g - 1] += v;
        }
        sums.iter()
            .zip(&self.group_sizes)
            .map(|(s, &n)| s / n as f64)
            .collect()
    }

    /// Apply y → c·y + d.
    pub fn affine(&self, c: f64, d: f64) -> Self {
        Self {
            responses: self.responses.iter().map(|v| c * v + d).collect(),
            groups: self.groups.clone(),
            group_sizes: self.group_sizes.clone(),
        }
    }
}

/// Dataset read from CSV plus the label → group-number mapping applied.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: AnovaData,
    /// (original label, assigned 1-based group)
    pub mapping: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

fn label_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Parse CSV text with a `group,response` header. Group labels are mapped to
/// contiguous numbers 1..J in numeric order (lexicographic for non-numeric
/// labels).
pub fn parse_csv(text: &str) -> Result<Ingested, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(DataError::MissingColumn(name))
    };
    let gcol = find("group")?;
    let rcol = find("response")?;

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let label = rec.get(gcol).unwrap_or("").to_string();
        if label.is_empty() {
            return Err(DataError::EmptyLabel { line });
        }
        let raw = rec.get(rcol).unwrap_or("");
        let value: f64 = raw.parse().map_err(|_| DataError::NonNumeric {
            line,
            value: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(DataError::NonNumeric {
                line,
                value: raw.to_string(),
            });
        }
        labels.push(label);
        values.push(value);
    }
    if values.is_empty() {
        return Err(DataError::Empty);
    }

    let mut distinct: Vec<String> = labels.clone();
    distinct.sort_by(|a, b| label_order(a, b));
    distinct.dedup();
    let index: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i + 1))
        .collect();
    let mut warnings = Vec::new();
    for (l, &g) in &index {
        if l.parse::<usize>().ok() != Some(g) {
            warnings.push(format!("group label {l} relabeled as {g}"));
        }
    }
    let groups = labels.iter().map(|l| index[l.as_str()]).collect();
    let mapping = distinct.iter().map(|l| (l.clone(), index[l.as_str()])).collect();
    Ok(Ingested {
        data: AnovaData::new(values, groups)?,
        mapping,
        warnings,
    })
}

pub fn ingest_csv(path: &Path) -> Result<Ingested, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text)
}

/// CSV text in the `group,response` layout.
pub fn to_csv(data: &AnovaData) -> String {
    let mut s = String::from("group,response\n");
    for (g, y) in data.groups().iter().zip(data.responses()) {
        s.push_str(&format!("{g},{y}\n"));
    }
    s
}
