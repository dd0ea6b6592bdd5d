//! Empirical meta distribution over independent field realizations.

use std::io::Write;

use rayon::prelude::*;

use crate::meta::TspLaw;
use crate::model::{FieldConfig, LinkConfig, RateLadder};
use crate::sim::field::{exact_tsp_from_gains, relative_gains, sample_field};
use crate::sim::stream_rng;

/// Number of steps of the reporting grid on `[0, 1]`.
pub const GAMMA_STEPS: usize = 100;

pub fn gamma_grid() -> Vec<f64> {
    (0..=GAMMA_STEPS).map(|i| i as f64 / GAMMA_STEPS as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeta {
    pub seed: u64,
    pub window_radius: f64,
    /// Interferer count of every realization.
    pub point_counts: Vec<usize>,
    /// Exact TSPs, `tsp[n - 1][k]` for rate `n` and realization `k`.
    pub tsp: Vec<Vec<f64>>,
}

/// Sample moments with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    pub mean_se: f64,
    pub second: f64,
    pub second_se: f64,
}

fn mean_and_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let k = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / k;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

impl EmpiricalMeta {
    pub fn realizations(&self) -> usize {
        self.point_counts.len()
    }

    pub fn num_rates(&self) -> usize {
        self.tsp.len()
    }

    /// Fraction of realizations with TSP above `gamma` at rate `n`.
    pub fn ccdf(&self, n: usize, gamma: f64) -> f64 {
        let s = &self.tsp[n - 1];
        s.iter().filter(|&&p| p > gamma).count() as f64 / s.len() as f64
    }

    pub fn ccdf_on_grid(&self, n: usize) -> Vec<f64> {
        let mut sorted = self.tsp[n - 1].clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len() as f64;
        gamma_grid()
            .into_iter()
            .map(|g| (sorted.len() - sorted.partition_point(|&p| p <= g)) as f64 / k)
            .collect()
    }

    /// Supremum over `gamma` of `|empirical - law|`, checked on both sides of
    /// every sample jump and on the reporting grid.
    pub fn sup_distance(&self, n: usize, law: &TspLaw) -> f64 {
        let mut sorted = self.tsp[n - 1].clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len() as f64;
        let mut sup: f64 = 0.0;
        for (i, &x) in sorted.iter().enumerate() {
            let model = law.ccdf(x);
            let before = (k - i as f64) / k;
            let after = (k - i as f64 - 1.0) / k;
            sup = sup.max((before - model).abs()).max((after - model).abs());
        }
        for (g, emp) in gamma_grid().into_iter().zip(self.ccdf_on_grid(n)) {
            sup = sup.max((emp - law.ccdf(g)).abs());
        }
        sup
    }

    pub fn moments(&self, n: usize) -> SampleMoments {
        let s = &self.tsp[n - 1];
        let (mean, mean_se) = mean_and_se(s.iter().copied());
        let (second, second_se) = mean_and_se(s.iter().map(|p| p * p));
        SampleMoments {
            mean,
            mean_se,
            second,
            second_se,
        }
    }

    /// Rows of `rate_index,gamma,empirical_ccdf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rate_index", "gamma", "empirical_ccdf"])?;
        for n in 1..=self.num_rates() {
            for (g, c) in gamma_grid().into_iter().zip(self.ccdf_on_grid(n)) {
                w.write_record([n.to_string(), g.to_string(), c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact TSPs of `realizations` independent fields; realization `k` draws
/// from stream `k` of `seed`.
pub fn empirical_meta(
    link: &LinkConfig,
    field: &FieldConfig,
    ladder: &RateLadder,
    realizations: usize,
    window_radius: f64,
    seed: u64,
) -> EmpiricalMeta {
    assert!(realizations >= 1, "at least one realization is needed");
    let per_realization: Vec<(usize, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let real = sample_field(field, window_radius, &mut rng);
            let gains = relative_gains(&real, link, field);
            let tsp = ladder
                .thresholds
                .iter()
                .map(|&theta| exact_tsp_from_gains(&real, &gains, field, theta))
                .collect();
            (real.len(), tsp)
        })
        .collect();
    let tsp = (0..ladder.len())
        .map(|n| per_realization.iter().map(|(_, t)| t[n]).collect())
        .collect();
    EmpiricalMeta {
        seed,
        window_radius,
        point_counts: per_realization.iter().map(|(c, _)| *c).collect(),
        tsp,
    }
}
