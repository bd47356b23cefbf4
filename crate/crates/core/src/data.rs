//! Binary response data, the matching criterion and the group split.

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{DifError, Result};

/// Reference (g = 0) or focal (g = 1) group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Reference = 0,
    Focal = 1,
}

impl Group {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Group::Reference
        } else {
            Group::Focal
        }
    }
}

/// Binary responses of `n` respondents to `I` items, with a group label per
/// respondent. Stored item-major: `responses[i][p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    responses: Vec<Vec<u8>>,
    item_names: Vec<String>,
    group: Vec<u8>,
}

impl ResponseMatrix {
    /// Builds a validated matrix from item-major columns.
    pub fn new(responses: Vec<Vec<u8>>, item_names: Vec<String>, group: Vec<u8>) -> Result<Self> {
        if responses.len() != item_names.len() {
            return Err(DifError::LengthMismatch {
                what: "item columns vs item names",
                left: responses.len(),
                right: item_names.len(),
            });
        }
        if responses.is_empty() {
            return Err(DifError::InvalidData("no items".into()));
        }
        let n = group.len();
        let mut seen = HashSet::new();
        for (col, name) in responses.iter().zip(&item_names) {
            if !seen.insert(name.as_str()) {
                return Err(DifError::InvalidData(format!("duplicate item name `{name}`")));
            }
            if col.len() != n {
                return Err(DifError::LengthMismatch {
                    what: "item column vs group vector",
                    left: col.len(),
                    right: n,
                });
            }
            if let Some(row) = col.iter().position(|&v| v > 1) {
                return Err(DifError::Schema {
                    row: row + 1,
                    column: name.clone(),
                    message: format!("value {} is not binary", col[row]),
                });
            }
        }
        if let Some(row) = group.iter().position(|&g| g > 1) {
            return Err(DifError::Schema {
                row: row + 1,
                column: "group".into(),
                message: "group label must be 0 or 1".into(),
            });
        }
        let n1 = group.iter().filter(|&&g| g == 1).count();
        let n0 = n - n1;
        if n0 < 2 || n1 < 2 {
            return Err(DifError::InvalidData(format!(
                "both groups need at least two respondents (reference {n0}, focal {n1})"
            )));
        }
        Ok(Self {
            responses,
            item_names,
            group,
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.group.len()
    }

    pub fn n_items(&self) -> usize {
        self.responses.len()
    }

    pub fn item(&self, i: usize) -> &[u8] {
        &self.responses[i]
    }

    pub fn item_names(&self) -> &[String] {
        &self.item_names
    }

    pub fn group(&self) -> &[u8] {
        &self.group
    }

    /// Respondent sizes `(n0, n1)`.
    pub fn group_sizes(&self) -> (usize, usize) {
        let n1 = self.group.iter().filter(|&&g| g == 1).count();
        (self.group.len() - n1, n1)
    }

    /// Copy of the matrix with one item column replaced.
    pub fn with_item(&self, i: usize, column: Vec<u8>) -> Result<Self> {
        let mut responses = self.responses.clone();
        responses[i] = column;
        Self::new(responses, self.item_names.clone(), self.group.clone())
    }
}

/// How group labels map to reference / focal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ReferenceCoding {
    /// The more frequent label is the reference group. Ties go to the
    /// lexicographically smaller label.
    #[default]
    LargerGroup,
    /// The given label is the reference group; the other label is focal.
    Label(String),
}

/// Column layout of a response CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub group_column: String,
    pub reference: ReferenceCoding,
}

impl ColumnSpec {
    pub fn new(group_column: impl Into<String>) -> Self {
        Self {
            group_column: group_column.into(),
            reference: ReferenceCoding::LargerGroup,
        }
    }
}

/// Parses a header-led, comma-separated response file. Every column other
/// than the group column is treated as a binary item.
pub fn load_response_csv<R: Read>(source: R, schema: &ColumnSpec) -> Result<ResponseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let group_idx = header
        .iter()
        .position(|h| *h == schema.group_column)
        .ok_or_else(|| DifError::MissingGroupColumn(schema.group_column.clone()))?;
    let item_cols: Vec<usize> = (0..header.len()).filter(|&c| c != group_idx).collect();
    let mut columns: Vec<Vec<u8>> = vec![Vec::new(); item_cols.len()];
    let mut labels: Vec<String> = Vec::new();

    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let label = record.get(group_idx).unwrap_or("");
        if label.is_empty() {
            return Err(DifError::Schema {
                row,
                column: schema.group_column.clone(),
                message: "missing group label".into(),
            });
        }
        labels.push(label.to_owned());
        for (k, &c) in item_cols.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            let value = match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(DifError::Schema {
                        row,
                        column: header[c].clone(),
                        message: format!("expected 0 or 1, found `{other}`"),
                    })
                }
            };
            columns[k].push(value);
        }
    }

    let group = code_groups(&labels, &schema.reference)?;
    let names = item_cols.iter().map(|&c| header[c].clone()).collect();
    ResponseMatrix::new(columns, names, group)
}

fn code_groups(labels: &[String], coding: &ReferenceCoding) -> Result<Vec<u8>> {
    let mut distinct: Vec<&str> = labels.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(DifError::InvalidData(
            "group column contains a single group".into(),
        ));
    }
    if distinct.len() > 2 {
        return Err(DifError::InvalidData(format!(
            "group column has {} distinct labels, expected 2",
            distinct.len()
        )));
    }
    let reference = match coding {
        ReferenceCoding::Label(l) => {
            if !distinct.contains(&l.as_str()) {
                return Err(DifError::InvalidData(format!(
                    "reference label `{l}` does not occur in the group column"
                )));
            }
            l.clone()
        }
        ReferenceCoding::LargerGroup => {
            let count = |l: &str| labels.iter().filter(|x| x.as_str() == l).count();
            let (a, b) = (distinct[0], distinct[1]);
            if count(b) > count(a) { b } else { a }.to_owned()
        }
    };
    Ok(labels.iter().map(|l| u8::from(*l != reference)).collect())
}

/// Per-respondent total score over all items (the studied item included),
/// standardized over the pooled sample with the `n - 1` divisor.
pub fn standardized_total_score(rm: &ResponseMatrix) -> Result<Vec<f64>> {
    let n = rm.n_respondents();
    if n < 2 {
        return Err(DifError::InvalidData("need at least two respondents".into()));
    }
    let mut totals = vec![0.0f64; n];
    for i in 0..rm.n_items() {
        for (t, &y) in totals.iter_mut().zip(rm.item(i)) {
            *t += f64::from(y);
        }
    }
    let mean = totals.iter().sum::<f64>() / n as f64;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(DifError::DegenerateCriterion);
    }
    let sd = var.sqrt();
    Ok(totals.into_iter().map(|t| (t - mean) / sd).collect())
}

/// Matching-criterion values split by group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedScores {
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
    pub lambda_hat: f64,
    /// Row indices of the respondents behind `theta0` / `theta1`.
    pub members: [Vec<usize>; 2],
}

impl GroupedScores {
    pub fn from_parts(theta0: Vec<f64>, theta1: Vec<f64>) -> Result<Self> {
        if theta0.is_empty() || theta1.is_empty() {
            return Err(DifError::EmptySample);
        }
        if theta0.iter().chain(&theta1).any(|t| !t.is_finite()) {
            return Err(DifError::InvalidData("non-finite matching score".into()));
        }
        let (n0, n1) = (theta0.len(), theta1.len());
        Ok(Self {
            members: [(0..n0).collect(), (n0..n0 + n1).collect()],
            theta0,
            theta1,
            lambda_hat: n0 as f64 / (n0 + n1) as f64,
        })
    }

    pub fn n0(&self) -> usize {
        self.theta0.len()
    }

    pub fn n1(&self) -> usize {
        self.theta1.len()
    }

    pub fn theta(&self, g: Group) -> &[f64] {
        match g {
            Group::Reference => &self.theta0,
            Group::Focal => &self.theta1,
        }
    }

    /// `N = n0 n1 / (n0 + n1)`.
    pub fn effective_size(&self) -> f64 {
        let (n0, n1) = (self.n0() as f64, self.n1() as f64);
        n0 * n1 / (n0 + n1)
    }

    /// Splits a per-respondent vector (e.g. an item column) by group.
    pub fn split<T: Copy>(&self, values: &[T]) -> [Vec<T>; 2] {
        [
            self.members[0].iter().map(|&p| values[p]).collect(),
            self.members[1].iter().map(|&p| values[p]).collect(),
        ]
    }
}

/// Partitions the scores by the matrix's group labels.
pub fn split_groups(rm: &ResponseMatrix, scores: &[f64]) -> Result<GroupedScores> {
    if scores.len() != rm.n_respondents() {
        return Err(DifError::LengthMismatch {
            what: "scores vs respondents",
            left: scores.len(),
            right: rm.n_respondents(),
        });
    }
    let mut members = [Vec::new(), Vec::new()];
    for (p, &g) in rm.group().iter().enumerate() {
        members[usize::from(g)].push(p);
    }
    let mut gs = GroupedScores::from_parts(
        members[0].iter().map(|&p| scores[p]).collect(),
        members[1].iter().map(|&p| scores[p]).collect(),
    )?;
    gs.members = members;
    Ok(gs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "i1,i2,sex\n1,0,a\n0,1,b\n1,1,a\n0,0,b\n";

    #[test]
    fn parses_small_csv() {
        let rm = load_response_csv(SMALL.as_bytes(), &ColumnSpec::new("sex")).unwrap();
        assert_eq!(rm.n_respondents(), 4);
        assert_eq!(rm.n_items(), 2);
        assert_eq!(rm.item(0), &[1, 0, 1, 0]);
        assert_eq!(rm.item(1), &[0, 1, 1, 0]);
        // tie -> lexicographically smaller label is reference
        assert_eq!(rm.group(), &[0, 1, 0, 1]);
    }

    #[test]
    fn three_rows_two_items() {
        let csv = "i1,i2,g\n1,0,x\n0,1,y\n1,1,x\n";
        // only one `y` respondent: rejected by the n1 >= 2 invariant
        assert!(load_response_csv(csv.as_bytes(), &ColumnSpec::new("g")).is_err());
        let csv = "i1,g,i2\n1,x,0\n0,y,1\n1,x,1\n0,y,1\n";
        let rm = load_response_csv(csv.as_bytes(), &ColumnSpec::new("g")).unwrap();
        assert_eq!(rm.item_names(), &["i1".to_string(), "i2".to_string()]);
        assert_eq!(rm.item(1), &[0, 1, 1, 1]);
    }

    #[test]
    fn non_binary_cell_is_named() {
        let csv = "i1,i2,g\n1,0,a\n0,2,b\n1,1,a\n0,0,b\n";
        let err = load_response_csv(csv.as_bytes(), &ColumnSpec::new("g")).unwrap_err();
        match err {
            DifError::Schema { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "i2");
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn group_errors() {
        let missing = "i1,g\n1,a\n0,\n1,b\n0,b\n";
        assert!(matches!(
            load_response_csv(missing.as_bytes(), &ColumnSpec::new("g")),
            Err(DifError::Schema { .. })
        ));
        let single = "i1,g\n1,a\n0,a\n1,a\n";
        assert!(load_response_csv(single.as_bytes(), &ColumnSpec::new("g")).is_err());
        assert!(matches!(
            load_response_csv(SMALL.as_bytes(), &ColumnSpec::new("nope")),
            Err(DifError::MissingGroupColumn(_))
        ));
    }

    #[test]
    fn explicit_reference_label() {
        let spec = ColumnSpec {
            group_column: "sex".into(),
            reference: ReferenceCoding::Label("b".into()),
        };
        let rm = load_response_csv(SMALL.as_bytes(), &spec).unwrap();
        assert_eq!(rm.group(), &[1, 0, 1, 0]);
    }

    #[test]
    fn standardized_two_respondents() {
        let rm = ResponseMatrix::new(
            vec![vec![1, 0, 1, 0], vec![1, 0, 1, 0]],
            vec!["a".into(), "b".into()],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let z = standardized_total_score(&rm).unwrap();
        // totals {2,0,2,0}: mean 1, sample sd sqrt(4/3)
        let s = (4.0f64 / 3.0).sqrt();
        for (zi, t) in z.iter().zip([2.0, 0.0, 2.0, 0.0]) {
            assert!((zi - (t - 1.0) / s).abs() < 1e-12);
        }
    }

    #[test]
    fn standardized_hand_value() {
        // totals {2, 0}: mean 1, sd sqrt(2) -> +-0.70710678
        let totals = [2.0f64, 0.0];
        let mean = 1.0;
        let sd = ((totals[0] - mean).powi(2) + (totals[1] - mean).powi(2)).sqrt();
        assert!(((totals[0] - mean) / sd - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn identical_respondents_are_degenerate() {
        let rm = ResponseMatrix::new(
            vec![vec![1, 1, 1, 1]],
            vec!["a".into()],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        assert!(matches!(
            standardized_total_score(&rm),
            Err(DifError::DegenerateCriterion)
        ));
    }

    #[test]
    fn split_lambda() {
        let rm = ResponseMatrix::new(
            vec![vec![1, 0, 1, 0]],
            vec!["a".into()],
            vec![1, 0, 0, 1],
        )
        .unwrap();
        let gs = split_groups(&rm, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(gs.lambda_hat, 0.5);
        assert_eq!(gs.theta0, vec![0.2, 0.3]);
        assert_eq!(gs.theta1, vec![0.1, 0.4]);
        assert_eq!(gs.split(rm.item(0)), [vec![0, 1], vec![1, 0]]);

        let gs = GroupedScores::from_parts(vec![0.0; 243], vec![0.0; 73]).unwrap();
        assert!((gs.lambda_hat - 243.0 / 316.0).abs() < 1e-15);
        assert!((gs.lambda_hat - 0.769).abs() < 1e-3);
    }
}
