//! Marked Poisson field of interferers around the receiver at the origin.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;

use crate::model::{FieldConfig, LinkConfig};

/// Default simulation window radius in meters.
pub const DEFAULT_WINDOW_RADIUS: f64 = 5_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub x: f64,
    pub y: f64,
    /// Device type, 0-based.
    pub kind: usize,
}

impl Interferer {
    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub points: Vec<Interferer>,
    pub window_radius: f64,
}

impl FieldRealization {
    pub fn empty(window_radius: f64) -> Self {
        FieldRealization {
            points: Vec::new(),
            window_radius,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Poisson count in the disk, uniform positions, independent type marks.
pub fn sample_field<R: Rng + ?Sized>(field: &FieldConfig, window_radius: f64, rng: &mut R) -> FieldRealization {
    assert!(window_radius > 0.0, "window radius must be positive");
    let mean = field.density * std::f64::consts::PI * window_radius * window_radius;
    if mean <= 0.0 {
        return FieldRealization::empty(window_radius);
    }
    let count = Poisson::new(mean).expect("positive Poisson mean").sample(rng) as usize;
    let kinds = WeightedIndex::new(&field.type_probs).expect("validated type probabilities");
    let r2 = window_radius * window_radius;
    let points = (0..count)
        .map(|_| {
            // Rejection from the bounding square.
            let (x, y) = loop {
                let x = window_radius * (2.0 * rng.random::<f64>() - 1.0);
                let y = window_radius * (2.0 * rng.random::<f64>() - 1.0);
                if x * x + y * y <= r2 {
                    break (x, y);
                }
            };
            Interferer {
                x,
                y,
                kind: kinds.sample(rng),
            }
        })
        .collect();
    FieldRealization { points, window_radius }
}

/// Per-point interference-to-signal ratios `w_v R_o^eta / (w_t |x|^eta)`,
/// the threshold-free part of every success factor.
pub fn relative_gains(real: &FieldRealization, link: &LinkConfig, field: &FieldConfig) -> Vec<f64> {
    let half = link.path_loss_exp / 2.0;
    let scale = link.link_distance.powf(link.path_loss_exp) / link.tx_power;
    let integral = half.fract() == 0.0 && half <= i32::MAX as f64;
    real.points
        .iter()
        .map(|pt| {
            let d2 = pt.x * pt.x + pt.y * pt.y;
            let path = if integral { d2.powi(half as i32) } else { d2.powf(half) };
            field.powers[pt.kind] * scale / path
        })
        .collect()
}

/// Success probability of the realization, averaged over fading and
/// activity: `prod_i (kappa_i / (1 + theta g_i) + 1 - kappa_i)`.
pub fn exact_tsp(real: &FieldRealization, link: &LinkConfig, field: &FieldConfig, theta: f64) -> f64 {
    exact_tsp_from_gains(real, &relative_gains(real, link, field), field, theta)
}

pub(crate) fn exact_tsp_from_gains(real: &FieldRealization, gains: &[f64], field: &FieldConfig, theta: f64) -> f64 {
    real.points
        .iter()
        .zip(gains)
        .map(|(pt, &g)| {
            let kappa = field.activities[pt.kind];
            kappa / (1.0 + theta * g) + 1.0 - kappa
        })
        .product()
}
