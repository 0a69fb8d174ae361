//! Day-based train / validation / test partition.
//!
//! The test set holds every window whose target falls in the final
//! `test_days` days. Validation days are drawn without replacement from
//! `validation_range` (clipped to the non-test days that actually occur), and
//! all windows targeting those days go to validation. Everything else trains.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::windows::Window;
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_days: u32,
    pub validation_days: u32,
    /// Inclusive day-index range validation days are drawn from.
    pub validation_range: (u32, u32),
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_days: 30,
            validation_days: 60,
            validation_range: (8, 506),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayAssignment {
    pub validation: BTreeSet<u32>,
    pub test: BTreeSet<u32>,
}

impl DayAssignment {
    pub fn role(&self, day: u32) -> Role {
        if self.test.contains(&day) {
            Role::Test
        } else if self.validation.contains(&day) {
            Role::Validation
        } else {
            Role::Train
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validation,
    Test,
}

/// Chooses the test and validation days for a set of target days.
pub fn assign_days(target_days: &BTreeSet<u32>, spec: &SplitSpec) -> Result<DayAssignment, DataError> {
    let (&first, &last) = match (target_days.first(), target_days.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(DataError::InfeasibleSplit("no windows to split".into())),
    };
    let span = last - first + 1;
    if spec.test_days >= span {
        return Err(DataError::InfeasibleSplit(format!(
            "test_days {} leaves nothing of a {span}-day span",
            spec.test_days
        )));
    }
    let test_start = last - spec.test_days + 1;
    let test: BTreeSet<u32> = (test_start..=last).collect();

    let (lo, hi) = spec.validation_range;
    let candidates: Vec<u32> = target_days
        .iter()
        .copied()
        .filter(|&d| d >= lo && d <= hi && d < test_start)
        .collect();
    if (candidates.len() as u32) < spec.validation_days {
        return Err(DataError::InfeasibleSplit(format!(
            "need {} validation days but only {} target days fall in {lo}..={hi} before the test period",
            spec.validation_days,
            candidates.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let validation = sample(&mut rng, candidates.len(), spec.validation_days as usize)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    Ok(DayAssignment { validation, test })
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Window>,
    pub validation: Vec<Window>,
    pub test: Vec<Window>,
    pub days: DayAssignment,
}

/// Partitions windows by target day. Order within each part follows input order.
pub fn split(windows: Vec<Window>, spec: &SplitSpec) -> Result<Split, DataError> {
    let target_days: BTreeSet<u32> = windows.iter().map(|w| w.target_day).collect();
    let days = assign_days(&target_days, spec)?;
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for w in windows {
        match days.role(w.target_day) {
            Role::Train => train.push(w),
            Role::Validation => validation.push(w),
            Role::Test => test.push(w),
        }
    }
    Ok(Split {
        train,
        validation,
        test,
        days,
    })
}
