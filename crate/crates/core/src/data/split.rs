use rand::seq::SliceRandom;

use super::cascade::Cascade;
use crate::error::{invalid, Result};
use crate::numerics::{RngState, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Cascade>,
    pub valid: Vec<Cascade>,
    pub test: Vec<Cascade>,
    pub split_seed: u64,
}

impl DatasetSplit {
    pub fn total(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }
}

/// Shuffles with `seed`, then takes `floor(M/10)` cascades each for
/// validation and test; the remainder goes to training.
pub fn split_dataset(cascades: Vec<Cascade>, seed: u64) -> Result<DatasetSplit> {
    let m = cascades.len();
    if m < 10 {
        return Err(invalid(format!("need at least 10 cascades to split, got {m}")));
    }
    let mut cascades = cascades;
    cascades.shuffle(&mut RngState::for_stream(seed, Stream::Split));
    let held_out = m / 10;
    let test = cascades.split_off(m - held_out);
    let valid = cascades.split_off(m - 2 * held_out);
    Ok(DatasetSplit {
        train: cascades,
        valid,
        test,
        split_seed: seed,
    })
}
