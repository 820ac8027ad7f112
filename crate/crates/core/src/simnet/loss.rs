use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SimError, TraceHeartbeat};

/// Burst packet loss: on a packet outside a burst, a burst starts with
/// probability `burst_rate`; the following `L ~ U{burst_len_min..=burst_len_max}`
/// packets are then dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstLossModel {
    pub burst_rate: f64,
    pub burst_len_min: u32,
    pub burst_len_max: u32,
    pub seed: u64,
}

impl Default for BurstLossModel {
    fn default() -> Self {
        Self { burst_rate: 0.01, burst_len_min: 1, burst_len_max: 4, seed: 0 }
    }
}

impl BurstLossModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.burst_rate) {
            return Err(SimError::InvalidSpec {
                field: "burst_rate".into(),
                msg: format!("must lie in [0, 1], got {}", self.burst_rate),
            });
        }
        if self.burst_len_min < 1 || self.burst_len_min > self.burst_len_max {
            return Err(SimError::InvalidSpec {
                field: "burst_len_min".into(),
                msg: format!(
                    "need 1 <= burst_len_min <= burst_len_max, got {}..{}",
                    self.burst_len_min, self.burst_len_max
                ),
            });
        }
        Ok(())
    }
}

/// Streaming state of a [`BurstLossModel`] for one link.
#[derive(Debug, Clone)]
pub struct BurstLossProcess {
    model: BurstLossModel,
    rng: ChaCha8Rng,
    remaining: u32,
}

impl BurstLossProcess {
    pub fn new(model: BurstLossModel) -> Result<Self, SimError> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.seed);
        Ok(Self { model, rng, remaining: 0 })
    }

    /// Whether the next packet on the link gets through.
    pub fn admit(&mut self) -> bool {
        if self.remaining > 0 {
            self.remaining -= 1;
            return false;
        }
        if self.rng.random::<f64>() < self.model.burst_rate {
            self.remaining = self.rng.random_range(self.model.burst_len_min..=self.model.burst_len_max);
        }
        true
    }
}

/// Delivered subsequence of `trace`. Order is preserved; packets are only removed.
pub fn apply_burst_loss(trace: &[TraceHeartbeat], model: &BurstLossModel) -> Result<Vec<TraceHeartbeat>, SimError> {
    let mut process = BurstLossProcess::new(model.clone())?;
    Ok(trace.iter().filter(|_| process.admit()).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: u64) -> Vec<TraceHeartbeat> {
        (0..n).map(|i| TraceHeartbeat { seq: i, time: i as f64, millis: i * 1000 }).collect()
    }

    #[test]
    fn zero_rate_is_identity() {
        let t = trace(50);
        let m = BurstLossModel { burst_rate: 0.0, ..BurstLossModel::default() };
        assert_eq!(apply_burst_loss(&t, &m).unwrap(), t);
    }

    #[test]
    fn certain_unit_bursts_alternate() {
        // packet 0 starts a burst and passes, packet 1 is dropped, packet 2
        // starts the next burst, and so on
        let m = BurstLossModel { burst_rate: 1.0, burst_len_min: 1, burst_len_max: 1, seed: 3 };
        let kept: Vec<u64> = apply_burst_loss(&trace(6), &m).unwrap().iter().map(|h| h.seq).collect();
        assert_eq!(kept, vec![0, 2, 4]);
    }

    #[test]
    fn seeded_drops_repeat() {
        let t = trace(5000);
        let m = BurstLossModel { burst_rate: 0.05, seed: 11, ..BurstLossModel::default() };
        let a = apply_burst_loss(&t, &m).unwrap();
        assert_eq!(a, apply_burst_loss(&t, &m).unwrap());
        assert!(a.len() < t.len());
        assert!(a.windows(2).all(|w| w[0].seq < w[1].seq));
    }

    #[test]
    fn burst_lengths_respect_bounds() {
        let t = trace(20_000);
        let m = BurstLossModel { burst_rate: 0.02, burst_len_min: 2, burst_len_max: 3, seed: 8 };
        let kept = apply_burst_loss(&t, &m).unwrap();
        for w in kept.windows(2) {
            let gap = w[1].seq - w[0].seq - 1;
            assert!(gap == 0 || (2..=3).contains(&gap), "gap {gap}");
        }
    }

    #[test]
    fn rejects_invalid_models() {
        let m = BurstLossModel { burst_len_min: 0, ..BurstLossModel::default() };
        assert!(apply_burst_loss(&trace(3), &m).is_err());
        let m = BurstLossModel { burst_rate: 1.5, ..BurstLossModel::default() };
        assert!(apply_burst_loss(&trace(3), &m).is_err());
    }
}
