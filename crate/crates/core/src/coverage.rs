//! Test coverage with outcomes, and the ground-truth fault assignment used
//! for scoring.
//!
//! A [`CoverageMatrix`] is the binary N×M relation between tests and program
//! components. Tests and components keep their input order; every index used
//! elsewhere in the crate refers to that order. Component identifiers are
//! opaque strings (lines, methods, files, ...).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn is_fail(self) -> bool {
        matches!(self, Outcome::Fail)
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "pass" => Some(Outcome::Pass),
            "fail" => Some(Outcome::Fail),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestCase {
    pub name: String,
    pub outcome: Outcome,
}

/// On-disk encodings of a coverage matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverageFormat {
    Json,
    Csv,
}

/// Immutable, validated coverage of a test suite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageMatrix {
    components: Vec<String>,
    tests: Vec<TestCase>,
    /// Sorted, deduplicated component indices covered by each test.
    rows: Vec<Vec<usize>>,
}

/// What `load_coverage` had to discard to produce a valid matrix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_tests: Vec<String>,
}

#[derive(Debug)]
pub struct LoadedCoverage {
    pub matrix: CoverageMatrix,
    pub report: LoadReport,
}

impl CoverageMatrix {
    /// Builds a matrix, rejecting any test that covers no component.
    pub fn new(
        components: Vec<String>,
        tests: Vec<TestCase>,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let (matrix, report) = Self::build(components, tests, rows)?;
        if let Some(name) = report.dropped_tests.first() {
            return Err(Error::validation(format!(
                "test `{name}` covers no component"
            )));
        }
        Ok(matrix)
    }

    /// Builds a matrix, dropping tests that cover no component.
    pub fn with_dropped(
        components: Vec<String>,
        tests: Vec<TestCase>,
        rows: Vec<Vec<usize>>,
    ) -> Result<(Self, LoadReport)> {
        Self::build(components, tests, rows)
    }

    fn build(
        components: Vec<String>,
        tests: Vec<TestCase>,
        rows: Vec<Vec<usize>>,
    ) -> Result<(Self, LoadReport)> {
        if tests.len() != rows.len() {
            return Err(Error::validation(format!(
                "{} tests but {} coverage rows",
                tests.len(),
                rows.len()
            )));
        }
        let m = components.len();
        let mut seen = HashSet::with_capacity(tests.len());
        for test in &tests {
            if !seen.insert(test.name.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate test name `{}`",
                    test.name
                )));
            }
        }

        let mut report = LoadReport::default();
        let mut kept_tests = Vec::with_capacity(tests.len());
        let mut kept_rows = Vec::with_capacity(rows.len());
        for (test, mut row) in tests.into_iter().zip(rows) {
            if let Some(&bad) = row.iter().find(|&&j| j >= m) {
                return Err(Error::validation(format!(
                    "test `{}` covers component index {bad}, but there are only {m} components",
                    test.name
                )));
            }
            row.sort_unstable();
            row.dedup();
            if row.is_empty() {
                log::warn!("dropping test `{}`: it covers no component", test.name);
                report.dropped_tests.push(test.name);
                continue;
            }
            kept_tests.push(test);
            kept_rows.push(row);
        }

        Ok((
            CoverageMatrix {
                components,
                tests: kept_tests,
                rows: kept_rows,
            },
            report,
        ))
    }

    pub fn components(&self) -> &[String] {
        &self.components
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    pub fn n_tests(&self) -> usize {
        self.tests.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Sorted component indices covered by test `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn covers(&self, test: usize, component: usize) -> bool {
        self.rows[test].binary_search(&component).is_ok()
    }

    pub fn test_index(&self, name: &str) -> Option<usize> {
        self.tests.iter().position(|t| t.name == name)
    }

    /// Indices of failing tests, in suite order.
    pub fn failing_tests(&self) -> Vec<usize> {
        self.indices_with(Outcome::Fail)
    }

    pub fn passing_tests(&self) -> Vec<usize> {
        self.indices_with(Outcome::Pass)
    }

    fn indices_with(&self, outcome: Outcome) -> Vec<usize> {
        self.tests
            .iter()
            .enumerate()
            .filter(|(_, t)| t.outcome == outcome)
            .map(|(i, _)| i)
            .collect()
    }

    /// Fails unless the suite has at least `min` failing tests.
    pub fn require_failures(&self, min: usize) -> Result<Vec<usize>> {
        let failing = self.failing_tests();
        if failing.len() < min {
            return Err(Error::validation(format!(
                "at least {min} failing test(s) required, found {}",
                failing.len()
            )));
        }
        Ok(failing)
    }

    /// Component indices covered by at least one of `tests`, ascending.
    pub fn columns_covered_by(&self, tests: &[usize]) -> Vec<usize> {
        let mut covered = vec![false; self.n_components()];
        for &i in tests {
            for &j in &self.rows[i] {
                covered[j] = true;
            }
        }
        (0..self.n_components()).filter(|&j| covered[j]).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = CoverageDoc {
            components: self.components.clone(),
            tests: self
                .tests
                .iter()
                .zip(&self.rows)
                .map(|(t, row)| TestDoc {
                    name: t.name.clone(),
                    outcome: t.outcome,
                    covered: row.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("coverage serialises");
        text.push('\n');
        text
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,outcome");
        for c in &self.components {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (t, row) in self.tests.iter().zip(&self.rows) {
            out.push_str(&t.name);
            out.push_str(if t.outcome.is_fail() {
                ",fail"
            } else {
                ",pass"
            });
            let mut cells = vec!["0"; self.components.len()];
            for &j in row {
                cells[j] = "1";
            }
            for cell in cells {
                out.push(',');
                out.push_str(cell);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageDoc {
    components: Vec<String>,
    tests: Vec<TestDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestDoc {
    name: String,
    outcome: Outcome,
    covered: Vec<usize>,
}

/// Parses and validates coverage. Tests covering nothing are dropped and
/// listed in the returned report.
pub fn load_coverage<R: Read>(source: R, format: CoverageFormat) -> Result<LoadedCoverage> {
    let (components, tests, rows) = match format {
        CoverageFormat::Json => parse_json(source)?,
        CoverageFormat::Csv => parse_csv(source)?,
    };
    let (matrix, report) = CoverageMatrix::with_dropped(components, tests, rows)?;
    Ok(LoadedCoverage { matrix, report })
}

type Parsed = (Vec<String>, Vec<TestCase>, Vec<Vec<usize>>);

fn parse_json<R: Read>(source: R) -> Result<Parsed> {
    let doc: CoverageDoc = serde_json::from_reader(source)?;
    let mut tests = Vec::with_capacity(doc.tests.len());
    let mut rows = Vec::with_capacity(doc.tests.len());
    for t in doc.tests {
        tests.push(TestCase {
            name: t.name,
            outcome: t.outcome,
        });
        rows.push(t.covered);
    }
    Ok((doc.components, tests, rows))
}

fn parse_csv<R: Read>(source: R) -> Result<Parsed> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.get(0) != Some("name") || header.get(1) != Some("outcome") {
        return Err(Error::parse(
            "line 1",
            "header must start with `name,outcome`",
        ));
    }
    let components: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();

    let mut tests = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != components.len() + 2 {
            return Err(Error::parse(
                format!("line {line}"),
                format!(
                    "expected {} fields, found {}",
                    components.len() + 2,
                    record.len()
                ),
            ));
        }
        let outcome = Outcome::parse(&record[1]).ok_or_else(|| {
            Error::parse(
                format!("line {line}, field outcome"),
                format!("expected `pass` or `fail`, found `{}`", &record[1]),
            )
        })?;
        let mut row = Vec::new();
        for (j, cell) in record.iter().skip(2).enumerate() {
            match cell {
                "1" => row.push(j),
                "0" => {}
                other => {
                    return Err(Error::parse(
                        format!("line {line}, field {}", components[j]),
                        format!("expected 0 or 1, found `{other}`"),
                    ))
                }
            }
        }
        tests.push(TestCase {
            name: record[0].to_owned(),
            outcome,
        });
        rows.push(row);
    }
    Ok((components, tests, rows))
}

fn csv_error(err: csv::Error) -> Error {
    let locus = err
        .position()
        .map_or_else(|| "input".to_owned(), |p| format!("line {}", p.line()));
    if err.is_io_error() {
        if let csv::ErrorKind::Io(io) = err.into_kind() {
            return Error::Io(io);
        }
        unreachable!("is_io_error implies ErrorKind::Io");
    }
    Error::parse(locus, err.to_string())
}

/// A single root cause: the components it lives in and the failures it causes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fault {
    pub id: String,
    pub components: BTreeSet<usize>,
    pub failing_tests: Vec<String>,
}

/// Known fault-to-failure assignment. Failing-test sets of distinct faults
/// are pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    faults: Vec<Fault>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthDoc {
    faults: Vec<Fault>,
}

impl GroundTruth {
    pub fn new(faults: Vec<Fault>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for fault in &faults {
            if !ids.insert(fault.id.as_str()) {
                return Err(Error::validation(format!(
                    "duplicate fault id `{}`",
                    fault.id
                )));
            }
            if fault.failing_tests.is_empty() {
                return Err(Error::validation(format!(
                    "fault `{}` has no failing tests",
                    fault.id
                )));
            }
            for test in &fault.failing_tests {
                if let Some(prev) = owner.insert(test.as_str(), fault.id.as_str()) {
                    let msg = if prev == fault.id {
                        format!("fault `{prev}` lists test `{test}` twice")
                    } else {
                        format!(
                            "test `{test}` is attributed to both `{prev}` and `{}` \
                             (each failing test must have a single root cause)",
                            fault.id
                        )
                    };
                    return Err(Error::validation(msg));
                }
            }
        }
        Ok(GroundTruth { faults })
    }

    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    /// Number of actual faults.
    pub fn fault_count(&self) -> usize {
        self.faults.len()
    }

    /// Checks referential integrity against a suite: every named test exists
    /// and fails, every component index is in range.
    pub fn validate_against(&self, cov: &CoverageMatrix) -> Result<()> {
        for fault in &self.faults {
            for name in &fault.failing_tests {
                match cov.test_index(name) {
                    None => {
                        return Err(Error::validation(format!(
                            "fault `{}` references unknown test `{name}`",
                            fault.id
                        )))
                    }
                    Some(i) if !cov.tests()[i].outcome.is_fail() => {
                        return Err(Error::validation(format!(
                            "fault `{}` references test `{name}`, which passes",
                            fault.id
                        )))
                    }
                    Some(_) => {}
                }
            }
            if let Some(&bad) = fault.components.iter().find(|&&j| j >= cov.n_components()) {
                return Err(Error::validation(format!(
                    "fault `{}` references component index {bad} out of range",
                    fault.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("ground truth serialises");
        text.push('\n');
        text
    }
}

pub fn load_ground_truth<R: Read>(source: R) -> Result<GroundTruth> {
    let doc: GroundTruthDoc = serde_json::from_reader(source)?;
    GroundTruth::new(doc.faults)
}
