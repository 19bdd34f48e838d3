use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    /// Roughly 50/33/17.
    fn default() -> Self {
        Self {
            train: 0.5,
            val: 0.33,
            test: 0.17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Seeded Fisher–Yates shuffle, then contiguous train/val/test slices.
/// Val and test get `floor(fraction * n)`; train takes the remainder.
pub fn split_dataset(ids: &[String], fractions: SplitFractions, seed: u64) -> Result<Split> {
    if ids.is_empty() {
        return Err(Error::Domain("cannot split an empty id list".into()));
    }
    let SplitFractions { train, val, test } = fractions;
    if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f))
        || (train + val + test - 1.0).abs() > 1e-9
    {
        return Err(Error::Domain(format!(
            "split fractions must be in [0, 1] and sum to 1, got {train}/{val}/{test}"
        )));
    }
    let n = ids.len();
    // guard against products like 0.33 * 15000 = 4949.999...
    let n_val = (val * n as f64 + 1e-9).floor() as usize;
    let n_test = (test * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test;
    let mut order = ids.to_vec();
    rng::shuffle(&mut order, &mut rng::keyed(seed, "split"));
    let test_ids = order.split_off(n_train + n_val);
    let val_ids = order.split_off(n_train);
    Ok(Split {
        train: order,
        val: val_ids,
        test: test_ids,
    })
}
