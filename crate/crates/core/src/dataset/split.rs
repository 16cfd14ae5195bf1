use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SegmentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.67,
            val_frac: 0.08,
            test_frac: 0.25,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Validation(format!(
                "split fractions must lie in [0, 1], got {fracs:?}"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "split fractions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSubset {
    Train,
    Val,
    Test,
}

impl FromStr for SplitSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            other => Err(Error::Validation(format!("unknown split subset {other:?}"))),
        }
    }
}

impl fmt::Display for SplitSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        })
    }
}

/// Disjoint video-id sets. Each list is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn subset(&self, which: SplitSubset) -> &[String] {
        match which {
            SplitSubset::Train => &self.train,
            SplitSubset::Val => &self.val,
            SplitSubset::Test => &self.test,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Splits by video: every segment of a video lands in the same subset.
///
/// Train gets `round(train_frac * V)` videos, val `round(val_frac * V)`, test
/// the remainder. With four or more videos, val and test are each given at
/// least one video, taken from train.
pub fn split_dataset(records: &[SegmentRecord], spec: &SplitSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let videos: BTreeSet<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
    if videos.is_empty() {
        return Err(Error::Domain("cannot split a corpus with no videos".into()));
    }
    let mut videos: Vec<String> = videos.into_iter().map(str::to_owned).collect();
    let v = videos.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    videos.shuffle(&mut rng);

    let mut n_train = round_half_up(spec.train_frac * v as f64).min(v);
    let mut n_val = round_half_up(spec.val_frac * v as f64).min(v - n_train);
    if v >= 4 {
        if n_val == 0 {
            n_val = 1;
            n_train -= 1;
        }
        if n_train + n_val == v {
            n_train -= 1;
        }
    }

    let mut test = videos.split_off(n_train + n_val);
    let mut val = videos.split_off(n_train);
    let mut train = videos;
    train.sort();
    val.sort();
    test.sort();

    if val.is_empty() || test.is_empty() {
        log::warn!(
            "split of {v} videos leaves empty subsets (train {}, val {}, test {})",
            train.len(),
            val.len(),
            test.len()
        );
    }
    Ok(DatasetSplit { train, val, test })
}
