use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Class, Session, Trial};
use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Trial indices of a stratified train/test split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn train_trials(&self, session: &Session) -> Vec<Trial> {
        self.train.iter().map(|&i| session.trials()[i].clone()).collect()
    }

    pub fn test_trials(&self, session: &Session) -> Vec<Trial> {
        self.test.iter().map(|&i| session.trials()[i].clone()).collect()
    }
}

/// Per class, `floor(train_fraction * n_class)` randomly chosen trials go to
/// training and the rest to test.
pub fn split_calibration(session: &Session, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in Class::ALL {
        let mut idx: Vec<usize> = session
            .trials()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.label() == class)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < 2 {
            return Err(Error::InvalidSession(format!(
                "class {class} has {} trials, need at least 2 to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        // 1e-9 keeps e.g. 0.7 * 20 from flooring to 13
        let n_train = ((train_fraction * idx.len() as f64) + 1e-9).floor() as usize;
        let n_train = n_train.clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Percentage of matching labels.
pub fn accuracy(predicted: &[Class], truth: &[Class]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Degenerate("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / truth.len() as f64)
}
