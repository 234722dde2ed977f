use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabelMap;
use crate::error::{Error, Result};

/// `(row, col)` of a pixel.
pub type Coord = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    PerClassCount(usize),
    PerClassFraction(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            SplitMode::PerClassCount(n) if n >= 1 => Ok(()),
            SplitMode::PerClassFraction(f) if f > 0.0 && f < 1.0 => Ok(()),
            m => Err(Error::config(format!("invalid split mode {m:?}"))),
        }
    }

    /// Training pixels drawn from a class of `size` labeled pixels.
    pub fn train_count(&self, size: usize) -> usize {
        match self.mode {
            SplitMode::PerClassCount(n) => n.min(size.saturating_sub(1)),
            SplitMode::PerClassFraction(f) => ((f * size as f64).round() as usize).min(size),
        }
    }
}

/// Coordinates of every labeled pixel, grouped by class (index 0 = class 1),
/// each group in raster order.
pub fn class_coords(labels: &LabelMap) -> Vec<Vec<Coord>> {
    let mut by_class = vec![Vec::new(); labels.num_classes()];
    for r in 0..labels.height() {
        for c in 0..labels.width() {
            let l = labels.get(r, c) as usize;
            if l > 0 {
                by_class[l - 1].push((r, c));
            }
        }
    }
    by_class
}

/// Per-class random split. Training coordinates come out class by class in
/// shuffled order; test coordinates in raster order.
pub fn stratified_split(labels: &LabelMap, spec: &SplitSpec) -> Result<(Vec<Coord>, Vec<Coord>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, mut coords) in class_coords(labels).into_iter().enumerate() {
        if coords.is_empty() {
            return Err(Error::data(format!(
                "class {} has no labeled pixels",
                k + 1
            )));
        }
        coords.shuffle(&mut rng);
        let n = spec.train_count(coords.len());
        train.extend_from_slice(&coords[..n]);
        test.extend_from_slice(&coords[n..]);
    }
    test.sort_unstable();
    Ok((train, test))
}
