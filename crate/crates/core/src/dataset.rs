//! Case data: schema, CSV interchange, scaling, splitting, balancing and a
//! synthetic generator with right-skewed features.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary solvency label. Insolvent is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Solvent,
    Insolvent,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Solvent => 0,
            Label::Insolvent => 1,
        }
    }

    pub fn is_insolvent(self) -> bool {
        self == Label::Insolvent
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Solvent),
            1 => Some(Label::Insolvent),
            _ => None,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        Label::from_u8(v).ok_or_else(|| format!("label must be 0 or 1, got {v}"))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Solvent => f.write_str("solvent"),
            Label::Insolvent => f.write_str("insolvent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    /// 1-based position in the schema.
    pub index: usize,
    /// Column code, e.g. `VAR16`.
    pub name: String,
    /// Human-readable name, e.g. `Sales`.
    pub description: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureDef>", into = "Vec<FeatureDef>")]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
}

const FINANCIAL_FEATURES: [&str; 28] = [
    "Cash",
    "Inventories",
    "Current assets",
    "Tangible assets",
    "Intangible assets",
    "Total assets",
    "Accounts receivable (A.R.)",
    "Lands and buildings",
    "Equity",
    "Shareholder loan",
    "Accrual for pension liabilities",
    "Total current liabilities",
    "Total long-term liabilities",
    "Bank debt",
    "Accounts payable (A.P.)",
    "Sales",
    "Administrative expenses",
    "Amortization depreciation",
    "Interest expenses",
    "EBIT",
    "Operating income",
    "Net income",
    "Increase inventories",
    "Increase liabilities",
    "Increase cash",
    "A.R. against affiliated companies",
    "A.P. against affiliated companies",
    "Number of employees",
];

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidSchema("schema needs at least one feature".into()));
        }
        let mut seen = HashMap::new();
        for (pos, f) in features.iter().enumerate() {
            if f.index != pos + 1 {
                return Err(Error::InvalidSchema(format!(
                    "feature `{}` has index {}, expected {}",
                    f.name,
                    f.index,
                    pos + 1
                )));
            }
            if seen.insert(f.name.to_ascii_lowercase(), pos).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
        }
        Ok(FeatureSchema { features })
    }

    /// `VAR1..VARn` with no descriptions.
    pub fn generic(n: usize) -> Result<Self> {
        FeatureSchema::new(
            (1..=n)
                .map(|i| FeatureDef {
                    index: i,
                    name: format!("VAR{i}"),
                    description: format!("VAR{i}"),
                    unit: String::new(),
                })
                .collect(),
        )
    }

    /// The 28 balance-sheet and income-statement variables of the German
    /// company-year panel (`VAR1` cash .. `VAR28` number of employees).
    pub fn financial() -> Self {
        let features = FINANCIAL_FEATURES
            .iter()
            .enumerate()
            .map(|(i, d)| FeatureDef {
                index: i + 1,
                name: format!("VAR{}", i + 1),
                description: (*d).to_string(),
                unit: if i == 27 { "thousand".into() } else { "thousand EUR".into() },
            })
            .collect();
        FeatureSchema { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn name(&self, j: usize) -> &str {
        &self.features[j].name
    }

    pub fn description(&self, j: usize) -> &str {
        &self.features[j].description
    }

    /// Zero-based position of a feature given by code, description or
    /// 1-based index; codes and descriptions match case-insensitively.
    pub fn position(&self, key: &str) -> Option<usize> {
        let key = key.trim();
        self.features
            .iter()
            .position(|f| f.name.eq_ignore_ascii_case(key) || f.description.eq_ignore_ascii_case(key))
            .or_else(|| {
                key.parse::<usize>()
                    .ok()
                    .filter(|&i| i >= 1 && i <= self.len())
                    .map(|i| i - 1)
            })
    }
}

impl TryFrom<Vec<FeatureDef>> for FeatureSchema {
    type Error = Error;

    fn try_from(v: Vec<FeatureDef>) -> Result<Self> {
        FeatureSchema::new(v)
    }
}

impl From<FeatureSchema> for Vec<FeatureDef> {
    fn from(s: FeatureSchema) -> Self {
        s.features
    }
}

/// One company-year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    /// One slot per schema feature; `None` is a missing value.
    pub features: Vec<Option<f64>>,
    pub label: Option<Label>,
    pub period: Option<i32>,
}

impl Case {
    pub fn new(id: impl Into<String>, features: Vec<Option<f64>>, label: Option<Label>) -> Self {
        Case { id: id.into(), features, label, period: None }
    }

    pub fn missing_count(&self) -> usize {
        self.features.iter().filter(|v| v.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub cases: Vec<Case>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, cases: Vec<Case>, provenance: impl Into<String>) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::EmptyData);
        }
        for c in &cases {
            if c.features.len() != schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "case `{}` has {} features, schema has {}",
                    c.id,
                    c.features.len(),
                    schema.len()
                )));
            }
        }
        Ok(Dataset { schema, cases, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn missing_count(&self) -> usize {
        self.cases.iter().map(Case::missing_count).sum()
    }

    /// All labels, failing on the first unlabeled case.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.cases
            .iter()
            .map(|c| c.label.ok_or_else(|| Error::Unlabeled(c.id.clone())))
            .collect()
    }

    /// `(solvent, insolvent)` counts; unlabeled cases are skipped.
    pub fn class_counts(&self) -> (usize, usize) {
        self.cases.iter().fold((0, 0), |(s, i), c| match c.label {
            Some(Label::Solvent) => (s + 1, i),
            Some(Label::Insolvent) => (s, i + 1),
            None => (s, i),
        })
    }

    pub fn find(&self, id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.id == id)
    }

    /// Cases at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize], provenance: impl Into<String>) -> Result<Dataset> {
        Dataset::new(
            self.schema.clone(),
            indices.iter().map(|&i| self.cases[i].clone()).collect(),
            provenance,
        )
    }

    fn ensure_schema(&self, schema: &FeatureSchema) -> Result<()> {
        if self.schema.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, found {}",
                schema.len(),
                self.schema.len()
            )));
        }
        for (a, b) in self.schema.features().iter().zip(schema.features()) {
            if !a.name.eq_ignore_ascii_case(&b.name) {
                return Err(Error::SchemaMismatch(format!(
                    "feature {} is `{}`, expected `{}`",
                    a.index, a.name, b.name
                )));
            }
        }
        Ok(())
    }

    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        self.ensure_schema(schema)
    }
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Clone)]
pub struct ParseOptions {
    /// Fail when the `label` column is absent or a label cell is empty.
    pub require_labels: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { require_labels: true }
    }
}

pub const MISSING_SENTINELS: [&str; 4] = ["", "-", "NA", "NaN"];

fn is_missing(cell: &str) -> bool {
    MISSING_SENTINELS.iter().any(|s| s.eq_ignore_ascii_case(cell))
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema, options: &ParseOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file, schema, options, path.display().to_string())
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    options: &ParseOptions,
    provenance: impl Into<String>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));

    let columns = schema
        .features()
        .iter()
        .map(|f| {
            find(&f.name)
                .or_else(|| find(&f.description))
                .ok_or_else(|| Error::MissingColumn(f.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_col = find("label");
    if options.require_labels && label_col.is_none() {
        return Err(Error::MissingColumn("label".into()));
    }
    let id_col = find("id");
    let year_col = find("year");

    let mut cases = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = row + 2;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let bad = |col: usize| Error::BadCell { row: line, column: headers[col].to_string(), value: cell(col).into() };

        let features = columns
            .iter()
            .map(|&col| {
                let v = cell(col);
                if is_missing(v) {
                    Ok(None)
                } else {
                    match v.parse::<f64>() {
                        Ok(x) if x.is_finite() => Ok(Some(x)),
                        _ => Err(bad(col)),
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;

        let id = match id_col {
            Some(col) if !cell(col).is_empty() => cell(col).to_string(),
            _ => format!("row{}", row + 1),
        };
        let label = match label_col {
            Some(col) if !cell(col).is_empty() => match cell(col) {
                "0" | "0.0" => Some(Label::Solvent),
                "1" | "1.0" => Some(Label::Insolvent),
                _ => return Err(bad(col)),
            },
            _ if options.require_labels => return Err(Error::Unlabeled(id)),
            _ => None,
        };
        let period = match year_col {
            Some(col) if !cell(col).is_empty() => Some(cell(col).parse::<i32>().map_err(|_| bad(col))?),
            _ => None,
        };
        cases.push(Case { id, features, label, period });
    }
    Dataset::new(schema.clone(), cases, provenance)
}

/// Columns that never hold features.
pub const RESERVED_COLUMNS: [&str; 3] = ["id", "year", "label"];

/// Schema for a CSV header. When the non-reserved columns name exactly the
/// 28 financial variables (by code or description, any order) the result is
/// [`FeatureSchema::financial`]; otherwise each column becomes a feature
/// named after its header.
pub fn infer_schema<'a>(headers: impl IntoIterator<Item = &'a str>) -> Result<FeatureSchema> {
    let columns: Vec<&str> = headers
        .into_iter()
        .map(str::trim)
        .filter(|h| !RESERVED_COLUMNS.iter().any(|r| r.eq_ignore_ascii_case(h)))
        .collect();
    let financial = FeatureSchema::financial();
    if columns.len() == financial.len() {
        let mut seen = vec![false; financial.len()];
        for h in &columns {
            if let Some(j) = financial.position(h).filter(|_| h.parse::<usize>().is_err()) {
                seen[j] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            return Ok(financial);
        }
    }
    FeatureSchema::new(
        columns
            .iter()
            .enumerate()
            .map(|(i, h)| FeatureDef { index: i + 1, name: h.to_string(), description: h.to_string(), unit: String::new() })
            .collect(),
    )
}

/// Reads only the header of a CSV file and infers its schema.
pub fn sniff_schema(path: impl AsRef<Path>) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = rdr.headers()?.clone();
    infer_schema(headers.iter())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(data, file)
}

/// Writes `id[,year],<features>,label`. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let with_year = data.cases.iter().any(|c| c.period.is_some());
    let mut header = vec!["id".to_string()];
    if with_year {
        header.push("year".into());
    }
    header.extend(data.schema.features().iter().map(|f| f.name.clone()));
    header.push("label".into());
    w.write_record(&header)?;
    for c in &data.cases {
        let mut rec = vec![c.id.clone()];
        if with_year {
            rec.push(c.period.map(|y| y.to_string()).unwrap_or_default());
        }
        rec.extend(c.features.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        rec.push(c.label.map(|l| l.as_u8().to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io { path: "<csv writer>".into(), source })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scaling

/// Per-feature min/max fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingParams {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// `D_j = max - min` in original units.
    pub fn range(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    /// Maps into `[0, 1]`; out-of-range values are clipped and constant
    /// features map to 0.5.
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        let d = self.range(j);
        if d > 0.0 {
            ((v - self.min[j]) / d).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn scale_case(&self, case: &Case) -> Case {
        Case {
            features: case
                .features
                .iter()
                .enumerate()
                .map(|(j, v)| v.map(|x| self.scale_value(j, x)))
                .collect(),
            ..case.clone()
        }
    }
}

pub fn fit_scaler(train: &Dataset) -> Result<ScalingParams> {
    let l = train.n_features();
    let mut min = vec![f64::INFINITY; l];
    let mut max = vec![f64::NEG_INFINITY; l];
    for c in &train.cases {
        for (j, v) in c.features.iter().enumerate() {
            if let Some(x) = *v {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
    }
    if let Some(j) = (0..l).find(|&j| min[j] > max[j]) {
        return Err(Error::FeatureAllMissing(train.schema.name(j).to_string()));
    }
    Ok(ScalingParams { min, max })
}

pub fn apply_scaler(data: &Dataset, params: &ScalingParams) -> Result<Dataset> {
    if params.len() != data.n_features() {
        return Err(Error::SchemaMismatch(format!(
            "scaler has {} features, data has {}",
            params.len(),
            data.n_features()
        )));
    }
    Ok(Dataset {
        schema: data.schema.clone(),
        cases: data.cases.iter().map(|c| params.scale_case(c)).collect(),
        provenance: format!("{} (scaled)", data.provenance),
    })
}

// ---------------------------------------------------------------------------
// Splitting and balancing

fn indices_by_class(data: &Dataset) -> Result<[Vec<usize>; 2]> {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, l) in data.labels()?.into_iter().enumerate() {
        by_class[l.as_u8() as usize].push(i);
    }
    Ok(by_class)
}

/// Stratified train/test partition. Each class contributes
/// `round(n_class * test_fraction)` cases to the test set; both outputs keep
/// the original case order.
pub fn stratified_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; data.len()];
    for mut members in indices_by_class(data)? {
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        for &i in &members[..n_test] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_test[i]);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} leaves an empty partition for {} cases",
            data.len()
        )));
    }
    Ok((
        data.subset(&train, format!("{} (train)", data.provenance))?,
        data.subset(&test, format!("{} (test)", data.provenance))?,
    ))
}

/// Random undersampling of the majority class down to the minority count.
pub fn random_undersample(data: &Dataset, seed: u64) -> Result<Dataset> {
    let [solvent, insolvent] = indices_by_class(data)?;
    if solvent.is_empty() || insolvent.is_empty() {
        return Err(Error::SingleClass);
    }
    if solvent.len() == insolvent.len() {
        return Ok(data.clone());
    }
    let (majority, minority) =
        if solvent.len() > insolvent.len() { (solvent, insolvent) } else { (insolvent, solvent) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = rand::seq::index::sample(&mut rng, majority.len(), minority.len())
        .into_iter()
        .map(|i| majority[i])
        .chain(minority)
        .collect();
    keep.sort_unstable();
    data.subset(&keep, format!("{} (undersampled)", data.provenance))
}

/// Stratified assignment of `labels` to `folds` groups. Returns the query
/// indices of each fold in ascending order.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::InvalidParameter(format!("{} cases cannot fill {folds} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in [Label::Solvent, Label::Insolvent] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Synthetic generator

/// Configuration of the synthetic generator.
///
/// Each feature is `skew_transform(z, skew_j)` with `z ~ N(0, 1)` clipped
/// to `[-3, 3]`; skew 0 is a symmetric bump around 0.5, larger skews pile
/// mass near 0 with a long right tail. A latent risk score
/// `sum_j coefficients[j] * (x_j - median_j) + noise * e`, `e ~ N(0, 1)`,
/// labels a case insolvent when it exceeds the threshold that makes the
/// requested insolvent share the expected share. Cases are drawn until both
/// class quotas are filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub solvent: usize,
    pub insolvent: usize,
    /// One skew parameter per feature; its length sets the feature count.
    pub skew: Vec<f64>,
    /// Risk-score coefficient per feature; zero marks a pure noise feature.
    pub coefficients: Vec<f64>,
    pub noise: f64,
    /// Fraction of features left missing, uniformly at random.
    pub missing_rate: f64,
}

impl SynthConfig {
    /// `features` right-skewed features with equal `skew`, the first
    /// `informative` of which drive the label.
    pub fn new(features: usize, solvent: usize, insolvent: usize, skew: f64) -> Self {
        SynthConfig {
            solvent,
            insolvent,
            skew: vec![skew; features],
            coefficients: (0..features).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect(),
            noise: 0.1,
            missing_rate: 0.0,
        }
    }

    /// The benchmark generator: 2,000 cases (1,000 per class) over eight
    /// right-skewed features; three carry the signal with differing
    /// strengths and five are noise.
    pub fn asymmetric_benchmark() -> Self {
        SynthConfig {
            solvent: 1000,
            insolvent: 1000,
            skew: vec![2.0, 1.5, 2.5, 1.0, 2.0, 1.5, 2.5, 1.0],
            coefficients: vec![-4.0, 3.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            noise: 0.05,
            missing_rate: 0.0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.skew.len()
    }
}

pub fn skew_transform(z: f64, skew: f64) -> f64 {
    let z = z.clamp(-3.0, 3.0);
    if skew.abs() < 1e-9 {
        return (z + 3.0) / 6.0;
    }
    let lo = (-3.0 * skew).exp();
    let hi = (3.0 * skew).exp();
    ((skew * z).exp() - lo) / (hi - lo)
}

pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    let l = config.n_features();
    if config.solvent == 0 || config.insolvent == 0 || l == 0 {
        return Err(Error::InvalidParameter("synthetic class sizes and feature count must be positive".into()));
    }
    if config.coefficients.len() != l {
        return Err(Error::LengthMismatch { expected: l, actual: config.coefficients.len() });
    }
    if !(0.0..1.0).contains(&config.missing_rate) {
        return Err(Error::InvalidParameter(format!("missing rate {} not in [0, 1)", config.missing_rate)));
    }
    let medians: Vec<f64> = config.skew.iter().map(|&s| skew_transform(0.0, s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> (Vec<f64>, f64) {
        let x: Vec<f64> = config
            .skew
            .iter()
            .map(|&s| skew_transform(StandardNormal.sample(rng), s))
            .collect();
        let e: f64 = StandardNormal.sample(rng);
        let score = x
            .iter()
            .zip(&config.coefficients)
            .zip(&medians)
            .map(|((v, c), m)| c * (v - m))
            .sum::<f64>()
            + config.noise * e;
        (x, score)
    };

    // Pilot sample fixes the threshold at the requested insolvent quantile.
    let mut pilot: Vec<f64> = (0..4096).map(|_| draw(&mut rng).1).collect();
    pilot.sort_by(f64::total_cmp);
    let share = config.insolvent as f64 / (config.solvent + config.insolvent) as f64;
    let pos = ((1.0 - share) * (pilot.len() - 1) as f64).round() as usize;
    let threshold = pilot[pos];

    let total = config.solvent + config.insolvent;
    let mut quota = [config.solvent, config.insolvent];
    let mut cases = Vec::with_capacity(total);
    let max_draws = 1000 * total;
    for _ in 0..max_draws {
        if cases.len() == total {
            break;
        }
        let (x, score) = draw(&mut rng);
        let label = if score > threshold { Label::Insolvent } else { Label::Solvent };
        let slot = label.as_u8() as usize;
        if quota[slot] == 0 {
            continue;
        }
        quota[slot] -= 1;
        let features = x
            .into_iter()
            .map(|v| {
                if config.missing_rate > 0.0 && rand::Rng::random::<f64>(&mut rng) < config.missing_rate {
                    None
                } else {
                    Some(v)
                }
            })
            .collect();
        cases.push(Case::new(format!("S{:05}", cases.len() + 1), features, Some(label)));
    }
    if cases.len() < total {
        return Err(Error::InvalidParameter("class quotas unreachable under the label rule".into()));
    }
    Dataset::new(FeatureSchema::generic(l)?, cases, format!("synthetic(seed={seed})"))
}
