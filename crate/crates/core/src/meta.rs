//! Meta distribution of the transmission success probability (TSP).
//!
//! For each rate the TSP across field realizations is approximated by a beta
//! law matched to its first two moments. That law is then split into `M`
//! equiprobable classes, each represented by its within-class median
//! `p_{n,m}`. Class 1 holds the worst realizations and class `M` the best.

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::model::{FieldConfig, LinkConfig, RateLadder};
use crate::special::{beta_reg, bisect_increasing};

/// Below this variance the TSP is treated as a point mass at its mean.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Absolute tolerance of the quantile bisection.
pub const QUANTILE_TOL: f64 = 1e-10;
pub const QUANTILE_MAX_ITER: usize = 200;

#[derive(Debug, Error)]
pub enum MetaError {
    #[error("quantile search did not converge for rate {n}, class {m}")]
    NoConvergence { n: usize, m: usize },
    #[error("rate index {n} outside 1..={num_rates}")]
    RateIndex { n: usize, num_rates: usize },
    #[error("class count must be positive")]
    NoClasses,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `Upsilon = 2 pi^2 R_o^2 / (eta sin(2 pi / eta))`.
pub fn upsilon(link: &LinkConfig) -> f64 {
    let eta = link.path_loss_exp;
    2.0 * PI * PI * link.link_distance.powi(2) / (eta * (2.0 * PI / eta).sin())
}

/// First and second moment of the TSP at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TspMoments {
    pub mean: f64,
    pub second: f64,
}

impl TspMoments {
    pub fn variance(&self) -> f64 {
        self.second - self.mean * self.mean
    }
}

/// Closed-form moments of the TSP for decoding threshold `theta`.
pub fn tsp_moments(link: &LinkConfig, field: &FieldConfig, theta: f64) -> TspMoments {
    let delta = 2.0 / link.path_loss_exp;
    let scale = upsilon(link) * theta.powf(delta);
    let (mut first, mut second) = (0.0, 0.0);
    for v in 0..field.num_types() {
        let kappa = field.activities[v];
        let weight = (field.powers[v] / link.tx_power).powf(delta) * kappa * field.type_density(v);
        first += weight;
        second += weight * (2.0 - (1.0 - delta) * kappa);
    }
    TspMoments {
        mean: (-scale * first).exp(),
        second: (-scale * second).exp(),
    }
}

/// Beta approximation of the TSP law at one rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TspLaw {
    Beta {
        a: f64,
        b: f64,
    },
    /// Variance below [`DEGENERATE_VARIANCE`]: the TSP is deterministic.
    PointMass(f64),
}

impl TspLaw {
    pub fn from_moments(m: TspMoments) -> Self {
        let var = m.variance();
        if var < DEGENERATE_VARIANCE {
            return TspLaw::PointMass(m.mean);
        }
        let common = (m.mean - m.second) / var;
        TspLaw::Beta {
            a: m.mean * common,
            b: (1.0 - m.mean) * common,
        }
    }

    pub fn cdf(&self, gamma: f64) -> f64 {
        match *self {
            TspLaw::Beta { a, b } => beta_reg(a, b, gamma.clamp(0.0, 1.0)),
            TspLaw::PointMass(p) => {
                if gamma >= p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P{TSP > gamma}`.
    pub fn ccdf(&self, gamma: f64) -> f64 {
        1.0 - self.cdf(gamma)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            TspLaw::Beta { a, b } => a / (a + b),
            TspLaw::PointMass(p) => p,
        }
    }

    /// Inverse CDF at `level` by bisection on `[0, 1]`.
    pub fn quantile(&self, level: f64) -> Option<f64> {
        match *self {
            TspLaw::PointMass(p) => Some(p),
            TspLaw::Beta { a, b } => {
                let r = bisect_increasing(|x| beta_reg(a, b, x), level, 0.0, 1.0, QUANTILE_TOL, QUANTILE_MAX_ITER);
                r.converged.then_some(r.root)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMeta {
    pub theta: f64,
    pub moments: TspMoments,
    pub law: TspLaw,
}

/// Per-rate moments and beta laws for the whole ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDistribution {
    pub rates: Vec<RateMeta>,
}

impl MetaDistribution {
    pub fn new(link: &LinkConfig, field: &FieldConfig, ladder: &RateLadder) -> Self {
        let rates = ladder
            .thresholds
            .iter()
            .map(|&theta| {
                let moments = tsp_moments(link, field, theta);
                RateMeta {
                    theta,
                    moments,
                    law: TspLaw::from_moments(moments),
                }
            })
            .collect();
        MetaDistribution { rates }
    }

    pub fn num_rates(&self) -> usize {
        self.rates.len()
    }

    /// Rate `n` (1-based).
    pub fn rate(&self, n: usize) -> Result<&RateMeta, MetaError> {
        n.checked_sub(1)
            .and_then(|i| self.rates.get(i))
            .ok_or(MetaError::RateIndex {
                n,
                num_rates: self.rates.len(),
            })
    }

    /// `P{p_n > gamma}` under the beta approximation.
    pub fn ccdf(&self, n: usize, gamma: f64) -> Result<f64, MetaError> {
        Ok(self.rate(n)?.law.ccdf(gamma))
    }
}

/// `M` equiprobable classes of one rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    /// `omega_0 = 0, ..., omega_M = 1`.
    pub edges: Vec<f64>,
    /// Within-class medians `p_{n,1} < ... < p_{n,M}`.
    pub representatives: Vec<f64>,
}

/// Splits rate `n` into `num_classes` classes of mass `1/M` each.
///
/// Edge `omega_m` is the `m/M` quantile and the representative of class `m`
/// is the `(2m - 1)/(2M)` quantile, i.e. the median of the class.
pub fn discretize(dist: &MetaDistribution, n: usize, num_classes: usize) -> Result<ClassRow, MetaError> {
    if num_classes == 0 {
        return Err(MetaError::NoClasses);
    }
    let law = dist.rate(n)?.law;
    let big_m = num_classes as f64;
    let mut edges = Vec::with_capacity(num_classes + 1);
    edges.push(0.0);
    for m in 1..num_classes {
        let edge = law
            .quantile(m as f64 / big_m)
            .ok_or(MetaError::NoConvergence { n, m })?;
        edges.push(edge);
    }
    edges.push(1.0);
    let representatives = (1..=num_classes)
        .map(|m| {
            law.quantile((2 * m - 1) as f64 / (2.0 * big_m))
                .ok_or(MetaError::NoConvergence { n, m })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassRow { edges, representatives })
}

/// Class representatives `p_{n,m}` for every rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TspGrid {
    pub rows: Vec<ClassRow>,
}

impl TspGrid {
    pub fn build(dist: &MetaDistribution, num_classes: usize) -> Result<Self, MetaError> {
        let rows = (1..=dist.num_rates())
            .map(|n| discretize(dist, n, num_classes))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TspGrid { rows })
    }

    pub fn num_rates(&self) -> usize {
        self.rows.len()
    }

    pub fn num_classes(&self) -> usize {
        self.rows.first().map_or(0, |r| r.representatives.len())
    }

    /// `p_{n,m}`, both indices 1-based.
    pub fn p(&self, n: usize, m: usize) -> f64 {
        self.rows[n - 1].representatives[m - 1]
    }

    /// `p_{1..N, m}`: what the dynamic chain of class `m` sees.
    pub fn class_column(&self, m: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.representatives[m - 1]).collect()
    }

    /// Writes `rate_index,class_index,omega_lo,omega_hi,p_nm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetaError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rate_index", "class_index", "omega_lo", "omega_hi", "p_nm"])?;
        for (i, row) in self.rows.iter().enumerate() {
            for (j, p) in row.representatives.iter().enumerate() {
                w.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    row.edges[j].to_string(),
                    row.edges[j + 1].to_string(),
                    p.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl MetaDistribution {
    /// Writes `rate_index,theta,mu,nu,beta_a,beta_b`; a point-mass law is
    /// written with empty shape columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MetaError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rate_index", "theta", "mu", "nu", "beta_a", "beta_b"])?;
        for (i, r) in self.rates.iter().enumerate() {
            let (a, b) = match r.law {
                TspLaw::Beta { a, b } => (a.to_string(), b.to_string()),
                TspLaw::PointMass(_) => (String::new(), String::new()),
            };
            w.write_record([
                (i + 1).to_string(),
                r.theta.to_string(),
                r.moments.mean.to_string(),
                r.moments.second.to_string(),
                a,
                b,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_rate_ladder, default_config};
    use proptest::prelude::*;

    fn uniform_dist() -> MetaDistribution {
        MetaDistribution {
            rates: vec![RateMeta {
                theta: 1.0,
                moments: TspMoments {
                    mean: 0.5,
                    second: 1.0 / 3.0,
                },
                law: TspLaw::Beta { a: 1.0, b: 1.0 },
            }],
        }
    }

    #[test]
    fn empty_field_and_tiny_threshold() {
        let (link, mut field, _) = default_config(10e-3);
        let m = tsp_moments(&link, &field, 1e-300);
        assert!((m.mean - 1.0).abs() < 1e-12 && (m.second - 1.0).abs() < 1e-12);
        field.density = 0.0;
        let m = tsp_moments(&link, &field, 15.0);
        assert_eq!((m.mean, m.second), (1.0, 1.0));
        assert_eq!(TspLaw::from_moments(m), TspLaw::PointMass(1.0));
    }

    #[test]
    fn first_moment_at_defaults() {
        let (link, field, _) = default_config(10e-3);
        assert!((upsilon(&link) - 200.0 * PI * PI).abs() < 1e-9);
        let m = tsp_moments(&link, &field, 15.0);
        // Hand evaluation: exp(-200 pi^2 sqrt(15) * 1e-3/3 * (0.1 + 0.3 sqrt(0.7) + 0.5 sqrt(0.5))).
        let hand =
            (-200.0 * PI * PI * 15f64.sqrt() * 1e-3 / 3.0 * (0.1 + 0.3 * 0.7f64.sqrt() + 0.5 * 0.5f64.sqrt())).exp();
        assert!((m.mean - hand).abs() < 1e-14);
        assert!((m.mean - 0.166).abs() < 5e-4);
    }

    #[test]
    fn ccdf_endpoints_and_uniform() {
        let d = uniform_dist();
        assert_eq!(d.ccdf(1, 0.0).unwrap(), 1.0);
        assert_eq!(d.ccdf(1, 1.0).unwrap(), 0.0);
        assert!((d.ccdf(1, 0.25).unwrap() - 0.75).abs() < 1e-14);
        assert!(matches!(d.ccdf(2, 0.5), Err(MetaError::RateIndex { .. })));
    }

    #[test]
    fn degenerate_is_a_step() {
        let law = TspLaw::from_moments(TspMoments {
            mean: 0.7,
            second: 0.49 + 1e-14,
        });
        assert_eq!(law, TspLaw::PointMass(0.7));
        assert_eq!(law.ccdf(0.69), 1.0);
        assert_eq!(law.ccdf(0.7), 0.0);
    }

    #[test]
    fn uniform_classes() {
        let row = discretize(&uniform_dist(), 1, 4).unwrap();
        let want_edges = [0.0, 0.25, 0.5, 0.75, 1.0];
        let want_reps = [0.125, 0.375, 0.625, 0.875];
        for (got, want) in row.edges.iter().zip(want_edges) {
            assert!((got - want).abs() < 1e-9);
        }
        for (got, want) in row.representatives.iter().zip(want_reps) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_is_the_median() {
        let law = TspLaw::Beta { a: 2.0, b: 5.0 };
        let dist = MetaDistribution {
            rates: vec![RateMeta {
                theta: 1.0,
                moments: TspMoments { mean: 0.0, second: 0.0 },
                law,
            }],
        };
        let row = discretize(&dist, 1, 1).unwrap();
        assert_eq!(row.edges, vec![0.0, 1.0]);
        assert!((law.cdf(row.representatives[0]) - 0.5).abs() < 1e-9);
        assert!(matches!(discretize(&dist, 1, 0), Err(MetaError::NoClasses)));
    }

    #[test]
    fn defaults_grid_properties() {
        let (link, field, _) = default_config(50e-3);
        let ladder = build_rate_ladder(&link).unwrap();
        let dist = MetaDistribution::new(&link, &field, &ladder);
        let grid = TspGrid::build(&dist, 8).unwrap();
        for n in 1..=5 {
            let row = &grid.rows[n - 1];
            let law = dist.rates[n - 1].law;
            for m in 1..=8 {
                let p = grid.p(n, m);
                assert!(row.edges[m - 1] <= p && p <= row.edges[m]);
                let mass = law.ccdf(row.edges[m - 1]) - law.ccdf(row.edges[m]);
                assert!((mass - 1.0 / 8.0).abs() < 1e-8);
                assert!((law.cdf(p) - (2 * m - 1) as f64 / 16.0).abs() < 1e-8);
                if m > 1 {
                    assert!(p > grid.p(n, m - 1));
                }
                if n > 1 {
                    assert!(p > grid.p(n - 1, m));
                }
            }
        }
    }

    #[test]
    fn csv_layout() {
        let grid = TspGrid::build(&uniform_dist(), 2).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("rate_index,class_index,omega_lo,omega_hi,p_nm"));
        assert!(lines.next().unwrap().starts_with("1,1,0,"));
        assert_eq!(text.lines().count(), 3);
    }

    fn arb_config() -> impl Strategy<Value = (LinkConfig, FieldConfig)> {
        (
            1e-3f64..1.0,
            5.0f64..100.0,
            2.1f64..6.0,
            0.0f64..5e-3,
            prop::collection::vec((0.01f64..1.0, 1e-3f64..1.0, 0.0f64..1.0), 1..5),
        )
            .prop_map(|(wt, ro, eta, lambda, types)| {
                let (mut link, _, _) = default_config(wt);
                link.link_distance = ro;
                link.path_loss_exp = eta;
                let total: f64 = types.iter().map(|t| t.0).sum();
                let field = FieldConfig {
                    density: lambda,
                    type_probs: types.iter().map(|t| t.0 / total).collect(),
                    powers: types.iter().map(|t| t.1).collect(),
                    activities: types.iter().map(|t| t.2).collect(),
                };
                (link, field)
            })
    }

    proptest! {
        #[test]
        fn moment_ordering_and_rate_ordering((link, field) in arb_config(), gamma in 0.0f64..1.0) {
            let ladder = build_rate_ladder(&link).unwrap();
            let dist = MetaDistribution::new(&link, &field, &ladder);
            for (i, r) in dist.rates.iter().enumerate() {
                let (mu, nu) = (r.moments.mean, r.moments.second);
                prop_assert!(mu * mu <= nu * (1.0 + 1e-12) && nu <= mu * (1.0 + 1e-12));
                prop_assert!((0.0..=1.0).contains(&mu));
                prop_assert!((r.law.mean() - mu).abs() < 1e-9);
                if let TspLaw::Beta { a, b } = r.law {
                    prop_assert!(a > 0.0 && b > 0.0);
                }
                if i > 0 {
                    let lower = dist.ccdf(i, gamma).unwrap();
                    let here = dist.ccdf(i + 1, gamma).unwrap();
                    prop_assert!(here >= lower - 1e-9);
                }
            }
        }

        #[test]
        fn ccdf_nonincreasing(a in 0.1f64..30.0, b in 0.1f64..30.0, g1 in 0.0f64..1.0, g2 in 0.0f64..1.0) {
            let law = TspLaw::Beta { a, b };
            let (lo, hi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
            prop_assert!(law.ccdf(lo) >= law.ccdf(hi));
        }
    }
}
