use serde::{Deserialize, Serialize};

/// Recursive sum / sum-of-squares accumulator over inter-arrival times.
///
/// Holds two 128-bit accumulators and a count, nothing else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunningMoments {
    pub rho_sum: u128,
    pub kappa_sum: u128,
    pub n: u64,
}

impl RunningMoments {
    /// Adds one interval. Returns `false` (leaving `self` untouched) if an
    /// accumulator would overflow.
    #[must_use]
    pub fn push(&mut self, delta: u64) -> bool {
        let d = u128::from(delta);
        let (Some(rho), Some(kappa)) =
            (self.rho_sum.checked_add(d), d.checked_mul(d).and_then(|sq| self.kappa_sum.checked_add(sq)))
        else {
            return false;
        };
        self.rho_sum = rho;
        self.kappa_sum = kappa;
        self.n += 1;
        true
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.rho_sum as f64 / self.n as f64)
    }

    /// Sample variance `(κ/n − (ρ/n)²)·n/(n−1)`, evaluated as
    /// `(n·κ − ρ²) / (n·(n−1))` with an exact integer numerator when it fits.
    pub fn sample_variance(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = u128::from(self.n);
        let exact = n
            .checked_mul(self.kappa_sum)
            .zip(self.rho_sum.checked_mul(self.rho_sum))
            .map(|(nk, rr)| nk.saturating_sub(rr) as f64 / (n * (n - 1)) as f64);
        Some(exact.unwrap_or_else(|| {
            let nf = self.n as f64;
            let m = self.rho_sum as f64 / nf;
            ((self.kappa_sum as f64 / nf - m * m) * nf / (nf - 1.0)).max(0.0)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateSource {
    Live,
    Frozen,
    Bootstrap,
}

/// Inter-arrival mean and variance as used by a suspicion function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
    /// Intervals in the current learning window.
    pub n: u64,
    pub source: EstimateSource,
}
