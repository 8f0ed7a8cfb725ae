use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Persistent initial value `M` carried across batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub m: Vec<f64>,
    pub alpha: f64,
    /// Inference mode: `m` is never updated.
    #[serde(default)]
    pub frozen: bool,
}

impl InitialState {
    pub fn new(m: Vec<f64>, alpha: f64, frozen: bool) -> Result<Self> {
        let s = Self { m, alpha, frozen };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.is_empty() {
            return Err(Error::Empty("initial state needs K >= 1 entries"));
        }
        if self.m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial state".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!(
                "momentum alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Untrained state for out-of-the-box use: `m_k ~ N(0, 1) / sqrt(num_rows)`
    /// drawn from a seeded stream.
    pub fn cold_start(k: usize, num_rows: usize, alpha: f64, seed: u64) -> Result<Self> {
        if k == 0 || num_rows == 0 {
            return Err(Error::InvalidArgument(
                "cold start needs k >= 1 and num_rows >= 1".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let scale = 1.0 / (num_rows as f64).sqrt();
        let m = (0..k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self::new(m, alpha, false)
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }
}
