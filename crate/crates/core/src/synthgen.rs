//! Seeded generator of multi-fault coverage matrices with ground truth.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(spec.seed)`; draws use `rand` 0.9's `random_bool`,
//! `random_range` and `SliceRandom::shuffle`, in this order:
//!
//! 1. shuffle the component indices; the first `faulty_components` of fault
//!    1 belong to it, the next block to fault 2, and so on; the rest are
//!    background components;
//! 2. for each passing test, then each failing test of fault 1, 2, ...:
//!    failing tests keep each of their fault's components with probability
//!    `1 - fault_coverage_noise` (at least one is kept), then every test
//!    covers each background component with probability
//!    `background_density` (a test left empty gets one random background
//!    component);
//! 3. shuffle the test order and name tests `t1..tN` in the final order.
//!
//! Passing tests never cover faulty components and failing tests never
//! cover another fault's components, so every failure has one root cause.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageMatrix, Fault, GroundTruth, Outcome, TestCase};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub failing_tests: usize,
    pub faulty_components: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub components: usize,
    pub passing_tests: usize,
    pub faults: Vec<FaultSpec>,
    pub background_density: f64,
    pub fault_coverage_noise: f64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.faults.is_empty() {
            return Err(Error::invalid("at least one fault is required"));
        }
        for (i, f) in self.faults.iter().enumerate() {
            if f.failing_tests == 0 || f.faulty_components == 0 {
                return Err(Error::invalid(format!(
                    "fault {} needs at least one failing test and one faulty component",
                    i + 1
                )));
            }
        }
        if !(0.0..1.0).contains(&self.background_density) {
            return Err(Error::invalid("background_density must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.fault_coverage_noise) {
            return Err(Error::invalid("fault_coverage_noise must be in [0, 1)"));
        }
        let faulty: usize = self.faults.iter().map(|f| f.faulty_components).sum();
        if faulty > self.components {
            return Err(Error::invalid(format!(
                "{faulty} faulty components requested but only {} components exist",
                self.components
            )));
        }
        if self.passing_tests > 0 && faulty == self.components {
            return Err(Error::invalid(
                "passing tests need at least one non-faulty component to cover",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GenSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub coverage: CoverageMatrix,
    pub ground_truth: GroundTruth,
}

pub fn generate(spec: &GenSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut order: Vec<usize> = (0..spec.components).collect();
    order.shuffle(&mut rng);
    let mut fault_components = Vec::with_capacity(spec.faults.len());
    let mut offset = 0;
    for f in &spec.faults {
        let mut own = order[offset..offset + f.faulty_components].to_vec();
        own.sort_unstable();
        fault_components.push(own);
        offset += f.faulty_components;
    }
    let mut background = order[offset..].to_vec();
    background.sort_unstable();

    // (owning fault, covered components) per test, before shuffling.
    let mut drafts: Vec<(Option<usize>, Vec<usize>)> = Vec::new();
    for _ in 0..spec.passing_tests {
        let row = cover_background(&mut rng, &background, spec.background_density, Vec::new());
        drafts.push((None, row));
    }
    for (fi, f) in spec.faults.iter().enumerate() {
        let own = &fault_components[fi];
        for _ in 0..f.failing_tests {
            let mut row: Vec<usize> = own
                .iter()
                .copied()
                .filter(|_| rng.random_bool(1.0 - spec.fault_coverage_noise))
                .collect();
            if row.is_empty() {
                row.push(own[rng.random_range(0..own.len())]);
            }
            let row = cover_background(&mut rng, &background, spec.background_density, row);
            drafts.push((Some(fi), row));
        }
    }
    drafts.shuffle(&mut rng);

    let mut tests = Vec::with_capacity(drafts.len());
    let mut rows = Vec::with_capacity(drafts.len());
    let mut failing_names = vec![Vec::new(); spec.faults.len()];
    for (i, (owner, row)) in drafts.into_iter().enumerate() {
        let name = format!("t{}", i + 1);
        if let Some(fi) = owner {
            failing_names[fi].push(name.clone());
        }
        tests.push(TestCase {
            name,
            outcome: if owner.is_some() {
                Outcome::Fail
            } else {
                Outcome::Pass
            },
        });
        rows.push(row);
    }

    let components = (0..spec.components).map(|j| format!("c{j}")).collect();
    let coverage = CoverageMatrix::new(components, tests, rows)?;
    let faults = fault_components
        .into_iter()
        .zip(failing_names)
        .enumerate()
        .map(|(fi, (components, failing_tests))| Fault {
            id: format!("F{}", fi + 1),
            components: components.into_iter().collect(),
            failing_tests,
        })
        .collect();
    let ground_truth = GroundTruth::new(faults)?;
    ground_truth.validate_against(&coverage)?;
    Ok(Generated {
        coverage,
        ground_truth,
    })
}

/// A family of generated subjects. Per subject, the fault count and each
/// fault's failing-test and faulty-component counts are drawn uniformly from
/// the inclusive `[min, max]` ranges, together with the subject seed, from a
/// ChaCha8 stream seeded with `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub seed: u64,
    pub subjects: usize,
    pub components: usize,
    pub passing_tests: usize,
    pub faults: [usize; 2],
    pub failing_tests_per_fault: [usize; 2],
    pub faulty_components_per_fault: [usize; 2],
    pub background_density: f64,
    pub fault_coverage_noise: f64,
}

impl SuiteSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SuiteSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("faults", self.faults),
            ("failing_tests_per_fault", self.failing_tests_per_fault),
            (
                "faulty_components_per_fault",
                self.faulty_components_per_fault,
            ),
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::invalid(format!(
                    "{name} range [{lo}, {hi}] must be nonempty and start at 1 or more"
                )));
            }
        }
        if self.faults[1] * self.faulty_components_per_fault[1] > self.components {
            return Err(Error::invalid(
                "the largest possible subject has more faulty components than components",
            ));
        }
        Ok(())
    }

    /// `(name, spec)` per subject; names are `s001`, `s002`, ... padded to
    /// the width of the subject count.
    pub fn subject_specs(&self) -> Result<Vec<(String, GenSpec)>> {
        self.validate()?;
        let width = self.subjects.to_string().len().max(3);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.subjects);
        for i in 0..self.subjects {
            let n_faults = rng.random_range(self.faults[0]..=self.faults[1]);
            let faults = (0..n_faults)
                .map(|_| FaultSpec {
                    failing_tests: rng.random_range(
                        self.failing_tests_per_fault[0]..=self.failing_tests_per_fault[1],
                    ),
                    faulty_components: rng.random_range(
                        self.faulty_components_per_fault[0]..=self.faulty_components_per_fault[1],
                    ),
                })
                .collect();
            let spec = GenSpec {
                seed: rng.random(),
                components: self.components,
                passing_tests: self.passing_tests,
                faults,
                background_density: self.background_density,
                fault_coverage_noise: self.fault_coverage_noise,
            };
            spec.validate()?;
            out.push((format!("s{:0width$}", i + 1), spec));
        }
        Ok(out)
    }
}

fn cover_background(
    rng: &mut ChaCha8Rng,
    background: &[usize],
    density: f64,
    mut row: Vec<usize>,
) -> Vec<usize> {
    for &c in background {
        if rng.random_bool(density) {
            row.push(c);
        }
    }
    if row.is_empty() {
        row.push(background[rng.random_range(0..background.len())]);
    }
    row.sort_unstable();
    row
}
