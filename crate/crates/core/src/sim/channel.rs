//! Per-slot fragment success models.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::model::{FieldConfig, LinkConfig, RateLadder};
use crate::sim::field::{exact_tsp_from_gains, relative_gains, FieldRealization};

/// Decides whether the fragment sent at rate `n` (1-based) in this slot is
/// decoded.
pub trait Channel {
    fn num_rates(&self) -> usize;
    fn attempt<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> bool;
}

/// Fixed success probability per rate, independent across slots.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliChannel {
    pub success: Vec<f64>,
}

impl BernoulliChannel {
    pub fn new(success: Vec<f64>) -> Self {
        assert!(
            success.iter().all(|p| (0.0..=1.0).contains(p)),
            "success probabilities must lie in [0, 1]"
        );
        BernoulliChannel { success }
    }
}

impl Channel for BernoulliChannel {
    fn num_rates(&self) -> usize {
        self.success.len()
    }

    fn attempt<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> bool {
        rng.random_bool(self.success[n - 1])
    }
}

/// Literal SIR test on a frozen realization: fresh Rayleigh fading on every
/// link and fresh activity marks on every interferer, each slot.
#[derive(Debug, Clone)]
pub struct SirChannel {
    gains: Vec<f64>,
    activities: Vec<f64>,
    thresholds: Vec<f64>,
    /// Fading-averaged success probability per rate, for reference.
    pub exact: Vec<f64>,
}

impl SirChannel {
    pub fn new(real: &FieldRealization, link: &LinkConfig, field: &FieldConfig, ladder: &RateLadder) -> Self {
        let gains = relative_gains(real, link, field);
        let exact = ladder
            .thresholds
            .iter()
            .map(|&theta| exact_tsp_from_gains(real, &gains, field, theta))
            .collect();
        SirChannel {
            activities: real.points.iter().map(|p| field.activities[p.kind]).collect(),
            gains,
            thresholds: ladder.thresholds.clone(),
            exact,
        }
    }
}

impl Channel for SirChannel {
    fn num_rates(&self) -> usize {
        self.thresholds.len()
    }

    fn attempt<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> bool {
        let signal: f64 = Exp1.sample(rng);
        // SIR >= theta  <=>  sum_i h_i a_i g_i <= h_0 / theta.
        let budget = signal / self.thresholds[n - 1];
        let mut interference = 0.0;
        for (&g, &kappa) in self.gains.iter().zip(&self.activities) {
            if rng.random_bool(kappa) {
                let fade: f64 = Exp1.sample(rng);
                interference += fade * g;
                if interference > budget {
                    return false;
                }
            }
        }
        true
    }
}
