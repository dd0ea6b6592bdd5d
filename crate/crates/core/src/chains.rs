//! Queueing chains for the two rate-adaptation schemes.
//!
//! * Static rate `n`: a Geo/PH/1 queue whose service time is the number of
//!   slots needed to deliver `n` fragments, each succeeding with `p_{n,m}`.
//! * Dynamic rate: a QBD whose phase tracks both the current rate and the
//!   fragment in flight. The rate drops to `n + 1` with probability `d` after a
//!   failed first fragment and rises to `n - 1` with probability `u` after a
//!   delivered packet. Phases are laid out rate by rate, `n` phases for rate
//!   `n`, for `N (N + 1) / 2` phases in total.

use std::io::Write;

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

use crate::meta::TspGrid;
use crate::model::LinkConfig;
use crate::qbd::{stationary_vector, QbdError, QbdSpec, SteadyState};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("success probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("adaptation probability {name}={value} outside [0, 1]")]
    Adaptation { name: &'static str, value: f64 },
    #[error("fragment count must be at least 1")]
    NoFragments,
    #[error("grid column has {actual} rates, expected {expected}")]
    GridLength { expected: usize, actual: usize },
    #[error(transparent)]
    Qbd(#[from] QbdError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_probability(p: f64) -> Result<(), ChainError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ChainError::Probability(p))
    }
}

/// PH representation `(beta, T)` of the delivery time of one packet split
/// into `n` fragments.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticChain {
    pub fragments: usize,
    pub success: f64,
    pub beta: RowDVector<f64>,
    pub t: DMatrix<f64>,
    pub s: DVector<f64>,
}

impl StaticChain {
    pub fn new(success: f64, fragments: usize) -> Result<Self, ChainError> {
        check_probability(success)?;
        if fragments == 0 {
            return Err(ChainError::NoFragments);
        }
        let n = fragments;
        let mut beta = RowDVector::zeros(n);
        beta[0] = 1.0;
        let t = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 - success
            } else if j == i + 1 {
                success
            } else {
                0.0
            }
        });
        let s = DVector::from_element(n, 1.0) - &t * DVector::from_element(n, 1.0);
        Ok(StaticChain {
            fragments,
            success,
            beta,
            t,
            s,
        })
    }

    /// Blocks of the Geo/PH/1 queue with arrival probability `alpha`.
    pub fn qbd(&self, alpha: f64) -> QbdSpec {
        let ab = 1.0 - alpha;
        let s_beta = &self.s * &self.beta;
        QbdSpec {
            b: DMatrix::from_element(1, 1, ab),
            c: DMatrix::from_row_slice(1, self.fragments, (&self.beta * alpha).as_slice()),
            e: DMatrix::from_column_slice(self.fragments, 1, (&self.s * ab).as_slice()),
            a0: &self.t * alpha,
            a1: &s_beta * alpha + &self.t * ab,
            a2: s_beta * ab,
        }
    }

    /// `P{k slots to deliver the packet}` from the PH form, `beta T^{k-1} s`.
    pub fn absorption_pmf(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let mut v = self.beta.clone();
        for _ in 1..k {
            v = &v * &self.t;
        }
        (v * &self.s)[0]
    }

    /// Mean delivery time `beta (I - T)^{-1} 1`, equal to `n / p`.
    pub fn mean_absorption(&self) -> f64 {
        if self.success == 0.0 {
            return f64::INFINITY;
        }
        let n = self.fragments;
        let inv = (DMatrix::identity(n, n) - &self.t)
            .try_inverse()
            .expect("I - T is upper triangular with positive diagonal");
        (&self.beta * inv).sum()
    }

    /// Stability iff the departure rate `p / n` exceeds `alpha`.
    pub fn is_stable(&self, alpha: f64) -> bool {
        self.success / self.fragments as f64 > alpha
    }

    /// Closed-form Geo/PH/1 rate matrix
    /// `R = alpha T (I - alpha s beta - ab T - alpha T 1 beta)^{-1}`.
    ///
    /// Only meaningful for stable chains, where the level-down matrix
    /// being rank one pins `G = 1 beta`.
    pub fn explicit_rate_matrix(&self, alpha: f64) -> Result<DMatrix<f64>, QbdError> {
        let n = self.fragments;
        let ab = 1.0 - alpha;
        let ones = DVector::from_element(n, 1.0);
        let s_beta = &self.s * &self.beta;
        let t_e_beta = &self.t * &ones * &self.beta;
        let inner = DMatrix::identity(n, n) - &s_beta * alpha - &self.t * ab - t_e_beta * alpha;
        let inv = inner.try_inverse().ok_or(QbdError::Singular("Geo/PH/1 rate matrix"))?;
        Ok(&self.t * alpha * inv)
    }

    /// Closed-form Geo/PH/1 steady state:
    /// `pi_0 = (1 + alpha beta Z (I - R)^{-1} 1)^{-1}`, `pi_1 = pi_0 alpha beta Z`
    /// with `Z = (I - alpha s beta - ab T - R ab s beta)^{-1}`.
    pub fn explicit_steady_state(&self, alpha: f64) -> Result<SteadyState, QbdError> {
        let n = self.fragments;
        let ab = 1.0 - alpha;
        let r = self.explicit_rate_matrix(alpha)?;
        let s_beta = &self.s * &self.beta;
        let z = (DMatrix::identity(n, n) - &s_beta * alpha - &self.t * ab - &r * &s_beta * ab)
            .try_inverse()
            .ok_or(QbdError::Singular("Z"))?;
        let fundamental = (DMatrix::identity(n, n) - &r)
            .try_inverse()
            .ok_or(QbdError::Singular("I - R"))?;
        let beta_z = &self.beta * &z * alpha;
        let pi0 = 1.0 / (1.0 + (&beta_z * fundamental).sum());
        Ok(SteadyState {
            pi0: RowDVector::from_element(1, pi0),
            pi1: beta_z * pi0,
            rate_matrix: r,
        })
    }
}

/// Static-rate QBD for one class, `p` per fragment and `n` fragments.
pub fn build_static(p: f64, n: usize, alpha: f64) -> Result<QbdSpec, ChainError> {
    Ok(StaticChain::new(p, n)?.qbd(alpha))
}

/// First phase of the rate-`n` block (both 1-based `n`, 0-based phase).
pub fn phase_offset(n: usize) -> usize {
    (n - 1) * n / 2
}

/// Phase process of the dynamic scheme for one TSP class.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicChain {
    pub num_rates: usize,
    /// Transitions that do not complete a packet, including rate decrements.
    pub t: DMatrix<f64>,
    /// Packet completions, including rate increments for the next packet.
    pub s: DMatrix<f64>,
    /// Completion into the idle state that remembers the next rate (`Delta x N`).
    pub e: DMatrix<f64>,
    /// Start of a new packet from idle with remembered rate `n` (`N x Delta`).
    pub c: DMatrix<f64>,
}

impl DynamicChain {
    /// `success[n - 1]` is `p_{n,m}` for the class being modeled.
    pub fn new(success: &[f64], decrement: f64, increment: f64) -> Result<Self, ChainError> {
        if success.is_empty() {
            return Err(ChainError::NoFragments);
        }
        for &p in success {
            check_probability(p)?;
        }
        for (name, value) in [("d", decrement), ("u", increment)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ChainError::Adaptation { name, value });
            }
        }
        let big_n = success.len();
        let phases = big_n * (big_n + 1) / 2;
        let mut t = DMatrix::zeros(phases, phases);
        let mut s = DMatrix::zeros(phases, phases);
        for n in 1..=big_n {
            let p = success[n - 1];
            let q = 1.0 - p;
            let first = phase_offset(n);
            for j in 1..=n {
                let i = first + j - 1;
                // Failed fragment. Only a failed first fragment may move to
                // the slower rate, and the slowest rate has nowhere to go.
                if j == 1 && n < big_n {
                    t[(i, i)] += (1.0 - decrement) * q;
                    t[(i, phase_offset(n + 1))] += decrement * q;
                } else {
                    t[(i, i)] += q;
                }
                // Delivered fragment.
                if j < n {
                    t[(i, i + 1)] += p;
                } else if n > 1 {
                    s[(i, phase_offset(n - 1))] += increment * p;
                    s[(i, first)] += (1.0 - increment) * p;
                } else {
                    s[(i, first)] += p;
                }
            }
        }
        let e = DMatrix::from_fn(phases, big_n, |i, r| s[(i, phase_offset(r + 1))]);
        let c = DMatrix::from_fn(big_n, phases, |r, j| if j == phase_offset(r + 1) { 1.0 } else { 0.0 });
        Ok(DynamicChain {
            num_rates: big_n,
            t,
            s,
            e,
            c,
        })
    }

    pub fn phases(&self) -> usize {
        self.t.nrows()
    }

    /// Rate (1-based) that owns phase `i`.
    pub fn rate_of_phase(&self, i: usize) -> usize {
        (1..=self.num_rates)
            .find(|&n| i < phase_offset(n + 1))
            .expect("phase index within the chain")
    }

    /// `B = ab I`, `C = alpha C`, `E = ab E`, `A0 = alpha T`,
    /// `A1 = ab T + alpha S`, `A2 = ab S`.
    pub fn qbd(&self, alpha: f64) -> QbdSpec {
        let ab = 1.0 - alpha;
        QbdSpec {
            b: DMatrix::identity(self.num_rates, self.num_rates) * ab,
            c: &self.c * alpha,
            e: &self.e * ab,
            a0: &self.t * alpha,
            a1: &self.t * ab + &self.s * alpha,
            a2: &self.s * ab,
        }
    }

    /// Stationary phase law `Pi` of `T + S`.
    pub fn phase_law(&self) -> Result<RowDVector<f64>, QbdError> {
        stationary_vector(&(&self.t + &self.s))
    }

    /// Packets completed per slot under permanent backlog, `Pi S 1`.
    pub fn service_rate(&self) -> Result<f64, QbdError> {
        Ok((self.phase_law()? * &self.s).sum())
    }

    /// Stability iff `ab Pi S 1 > alpha Pi T 1`.
    pub fn is_stable(&self, alpha: f64) -> Result<bool, QbdError> {
        let pi = self.phase_law()?;
        let done = (&pi * &self.s).sum();
        let pending = (&pi * &self.t).sum();
        Ok((1.0 - alpha) * done > alpha * pending)
    }

    /// Boundary and level phase indices of the closed class of rate `n`
    /// when `d = u = 0`.
    pub fn pinned_phases(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        (vec![n - 1], (phase_offset(n)..phase_offset(n + 1)).collect())
    }
}

/// Dynamic-rate QBD for one class column `p_{1..N,m}`.
pub fn build_dynamic(column: &[f64], alpha: f64, decrement: f64, increment: f64) -> Result<QbdSpec, ChainError> {
    Ok(DynamicChain::new(column, decrement, increment)?.qbd(alpha))
}

/// Latency of one (scheme, class) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassLatency {
    pub class: usize,
    pub stable: bool,
    /// Mean slots spent transmitting one packet under permanent backlog.
    pub tx_latency: f64,
    /// Mean slots from generation to delivery; infinite if unstable.
    pub total_latency: f64,
}

/// Per-class latencies of one scheme and their spatial averages.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeLatency {
    pub classes: Vec<ClassLatency>,
}

impl SchemeLatency {
    /// Mean over all classes; infinite as soon as one class is unstable.
    pub fn spatial_average(&self) -> f64 {
        self.classes.iter().map(|c| c.total_latency).sum::<f64>() / self.classes.len() as f64
    }

    /// Mean over stable classes only (NaN if none is stable).
    pub fn stable_average(&self) -> f64 {
        let stable: Vec<f64> = self
            .classes
            .iter()
            .filter(|c| c.stable)
            .map(|c| c.total_latency)
            .collect();
        stable.iter().sum::<f64>() / stable.len() as f64
    }

    pub fn unstable_fraction(&self) -> f64 {
        self.classes.iter().filter(|c| !c.stable).count() as f64 / self.classes.len() as f64
    }
}

/// Static rate `n` for one success probability, through the closed-form
/// Geo/PH/1 solution.
pub fn static_class_latency(p: f64, n: usize, alpha: f64, class: usize) -> Result<ClassLatency, ChainError> {
    let chain = StaticChain::new(p, n)?;
    let tx_latency = chain.mean_absorption();
    if !chain.is_stable(alpha) {
        return Ok(ClassLatency {
            class,
            stable: false,
            tx_latency,
            total_latency: f64::INFINITY,
        });
    }
    let ss = chain.explicit_steady_state(alpha)?;
    Ok(ClassLatency {
        class,
        stable: true,
        tx_latency,
        total_latency: ss.mean_latency(alpha)?,
    })
}

/// Static rate `n` across all classes of the grid.
pub fn latency_static(grid: &TspGrid, link: &LinkConfig, n: usize) -> Result<SchemeLatency, ChainError> {
    let classes = (1..=grid.num_classes())
        .map(|m| static_class_latency(grid.p(n, m), n, link.arrival_prob, m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SchemeLatency { classes })
}

/// Dynamic scheme for one class column, through the generic QBD solver.
pub fn dynamic_class_latency(
    column: &[f64],
    alpha: f64,
    decrement: f64,
    increment: f64,
    class: usize,
) -> Result<ClassLatency, ChainError> {
    let chain = DynamicChain::new(column, decrement, increment)?;
    let tx_latency = 1.0 / chain.service_rate()?;
    let unstable = ClassLatency {
        class,
        stable: false,
        tx_latency,
        total_latency: f64::INFINITY,
    };
    if !chain.is_stable(alpha)? {
        return Ok(unstable);
    }
    let ss = match chain.qbd(alpha).solve() {
        Ok(ss) => ss,
        // Drift says stable but R sits on the unit circle to working
        // precision: critically loaded.
        Err(QbdError::NotPositiveRecurrent { .. }) => return Ok(unstable),
        Err(e) => return Err(e.into()),
    };
    Ok(ClassLatency {
        class,
        stable: true,
        tx_latency,
        total_latency: ss.mean_latency(alpha)?,
    })
}

pub fn latency_dynamic(
    grid: &TspGrid,
    link: &LinkConfig,
    decrement: f64,
    increment: f64,
) -> Result<SchemeLatency, ChainError> {
    if grid.num_rates() != link.num_rates {
        return Err(ChainError::GridLength {
            expected: link.num_rates,
            actual: grid.num_rates(),
        });
    }
    let classes = (1..=grid.num_classes())
        .map(|m| dynamic_class_latency(&grid.class_column(m), link.arrival_prob, decrement, increment, m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SchemeLatency { classes })
}

/// Which scheme a latency row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeLabel {
    Static(usize),
    Dynamic,
}

/// Rows of `scheme,rate_index_or_dyn,class_index,stable_flag,tx_latency,total_latency`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyTable {
    pub rows: Vec<(SchemeLabel, ClassLatency)>,
}

pub const LATENCY_HEADER: [&str; 6] = [
    "scheme",
    "rate_index_or_dyn",
    "class_index",
    "stable_flag",
    "tx_latency",
    "total_latency",
];

impl LatencyTable {
    pub fn push(&mut self, label: SchemeLabel, latency: &SchemeLatency) {
        self.rows.extend(latency.classes.iter().map(|c| (label, *c)));
    }

    /// The six latency columns for one row.
    pub fn record(label: SchemeLabel, c: &ClassLatency) -> [String; 6] {
        let (scheme, index) = match label {
            SchemeLabel::Static(n) => ("static", n.to_string()),
            SchemeLabel::Dynamic => ("dynamic", "dyn".to_string()),
        };
        [
            scheme.to_string(),
            index,
            c.class.to_string(),
            u8::from(c.stable).to_string(),
            c.tx_latency.to_string(),
            c.total_latency.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ChainError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LATENCY_HEADER)?;
        for (label, c) in &self.rows {
            w.write_record(Self::record(*label, c))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binomial(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    fn negative_binomial(k: usize, n: usize, p: f64) -> f64 {
        if k < n {
            return 0.0;
        }
        binomial(k as u64 - 1, n as u64 - 1) * p.powi(n as i32) * (1.0 - p).powi((k - n) as i32)
    }

    fn assert_blocks_close(x: &QbdSpec, y: &QbdSpec) {
        let pairs = [
            (&x.b, &y.b),
            (&x.c, &y.c),
            (&x.e, &y.e),
            (&x.a0, &y.a0),
            (&x.a1, &y.a1),
            (&x.a2, &y.a2),
        ];
        for (u, v) in pairs {
            assert_eq!(u.shape(), v.shape());
            assert!((u - v).amax() < 1e-15, "{u} vs {v}");
        }
    }

    #[test]
    fn single_fragment_blocks() {
        let (p, a) = (0.7, 0.04);
        let q = build_static(p, 1, a).unwrap();
        q.validate().unwrap();
        assert!((q.a0[(0, 0)] - a * (1.0 - p)).abs() < 1e-15);
        assert!((q.a1[(0, 0)] - (a * p + (1.0 - a) * (1.0 - p))).abs() < 1e-15);
        assert!((q.a2[(0, 0)] - (1.0 - a) * p).abs() < 1e-15);
    }

    #[test]
    fn ph_law_and_mean() {
        let chain = StaticChain::new(0.5, 3).unwrap();
        assert!((chain.absorption_pmf(3) - 0.125).abs() < 1e-15);
        assert_eq!(chain.absorption_pmf(2), 0.0);
        let chain = StaticChain::new(0.8, 2).unwrap();
        assert!((chain.mean_absorption() - 2.5).abs() < 1e-12);
        assert_eq!(chain.beta.as_slice(), &[1.0, 0.0]);
        assert_eq!(chain.s.as_slice(), &[0.0, 0.8]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(StaticChain::new(1.5, 2), Err(ChainError::Probability(_))));
        assert!(matches!(StaticChain::new(0.5, 0), Err(ChainError::NoFragments)));
        assert!(matches!(
            DynamicChain::new(&[0.5, 0.6], 1.5, 0.1),
            Err(ChainError::Adaptation { name: "d", .. })
        ));
    }

    #[test]
    fn dynamic_shapes() {
        let chain = DynamicChain::new(&[0.2, 0.4, 0.6, 0.7, 0.8], 0.3, 0.1).unwrap();
        assert_eq!(chain.t.shape(), (15, 15));
        assert_eq!(chain.s.shape(), (15, 15));
        assert_eq!(chain.e.shape(), (15, 5));
        assert_eq!(chain.c.shape(), (5, 15));
        let q = chain.qbd(0.04);
        q.validate().unwrap();
        assert_eq!(q.b.shape(), (5, 5));
        for i in 0..15 {
            let sum = chain.t.row(i).sum() + chain.s.row(i).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        // Boundary corrections.
        assert!((chain.t[(0, 0)] - 0.7 * 0.8).abs() < 1e-15);
        assert!((chain.t[(0, 1)] - 0.3 * 0.8).abs() < 1e-15);
        assert!((chain.s[(0, 0)] - 0.2).abs() < 1e-15);
        assert!((chain.t[(10, 10)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rate_memory_is_kept_by_arrivals() {
        let chain = DynamicChain::new(&[0.2, 0.4, 0.6, 0.7], 0.3, 0.1).unwrap();
        for r in 1..=4 {
            let row = chain.c.row(r - 1);
            assert_eq!(row.sum(), 1.0);
            for (j, &x) in row.iter().enumerate() {
                if x > 0.0 {
                    assert_eq!(chain.rate_of_phase(j), r);
                    assert_eq!(j, phase_offset(r));
                }
            }
        }
        // Completions into idle carry exactly the completion mass.
        for i in 0..chain.phases() {
            assert!((chain.e.row(i).sum() - chain.s.row(i).sum()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_rate_dynamic_is_static() {
        for &(d, u) in &[(0.0, 0.0), (0.3, 0.1), (1.0, 1.0)] {
            let dynamic = build_dynamic(&[0.6], 0.04, d, u).unwrap();
            let fixed = build_static(0.6, 1, 0.04).unwrap();
            assert_blocks_close(&dynamic, &fixed);
        }
    }

    #[test]
    fn frozen_adaptation_restricts_to_static() {
        let column = [0.3, 0.5, 0.6, 0.75, 0.8];
        let chain = DynamicChain::new(&column, 0.0, 0.0).unwrap();
        let full = chain.qbd(0.04);
        for n in 1..=5 {
            let (b, l) = chain.pinned_phases(n);
            let restricted = full.restrict(&b, &l);
            let fixed = build_static(column[n - 1], n, 0.04).unwrap();
            assert_blocks_close(&restricted, &fixed);
        }
    }

    fn irreducible(m: &DMatrix<f64>) -> bool {
        let n = m.nrows();
        (0..n).all(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if m[(i, j)] > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&s| s)
        })
    }

    #[test]
    fn latency_floor_and_perfect_channel() {
        let c = static_class_latency(1.0, 1, 0.04, 1).unwrap();
        assert!(c.stable);
        assert!((c.total_latency - 1.0).abs() < 1e-12);
        let c = static_class_latency(0.9, 2, 0.04, 1).unwrap();
        assert!(c.total_latency >= 2.0 / 0.9);
        let c = static_class_latency(0.03, 1, 0.04, 1).unwrap();
        assert!(!c.stable && c.total_latency.is_infinite());
        assert!((c.tx_latency - 1.0 / 0.03).abs() < 1e-9);
    }

    #[test]
    fn silent_channel() {
        let c = static_class_latency(0.0, 2, 0.04, 1).unwrap();
        assert!(!c.stable && c.tx_latency.is_infinite());
        // A dead fastest rate is left after a failed first fragment.
        let c = dynamic_class_latency(&[0.0, 0.6, 0.8], 0.04, 0.3, 0.1, 1).unwrap();
        assert!(c.stable && c.total_latency.is_finite());
        build_dynamic(&[0.0, 0.0], 0.04, 0.0, 0.0).unwrap().validate().unwrap();
    }

    #[test]
    fn latency_table_csv() {
        let mut table = LatencyTable::default();
        table.push(
            SchemeLabel::Static(2),
            &SchemeLatency {
                classes: vec![ClassLatency {
                    class: 1,
                    stable: false,
                    tx_latency: 30.0,
                    total_latency: f64::INFINITY,
                }],
            },
        );
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "scheme,rate_index_or_dyn,class_index,stable_flag,tx_latency,total_latency\nstatic,2,1,0,30,inf\n"
        );
    }

    proptest! {
        #[test]
        fn ph_matches_negative_binomial(n in 1usize..8, p in 0.01f64..1.0) {
            let chain = StaticChain::new(p, n).unwrap();
            for k in n..=n + 50 {
                let ph = chain.absorption_pmf(k);
                prop_assert!((ph - negative_binomial(k, n, p)).abs() < 1e-12);
            }
            prop_assert!((chain.mean_absorption() - n as f64 / p).abs() < 1e-9);
        }

        #[test]
        fn dynamic_rows_and_reachability(
            column in prop::collection::vec(0.01f64..1.0, 1..7),
            d in 0.01f64..0.99,
            u in 0.01f64..0.99,
            alpha in 0.001f64..0.2,
        ) {
            let chain = DynamicChain::new(&column, d, u).unwrap();
            chain.qbd(alpha).validate().unwrap();
            prop_assert!(irreducible(&(&chain.t + &chain.s)));
        }

        #[test]
        fn lemma_one_matches_drift(n in 1usize..6, p in 0.01f64..1.0, alpha in 0.001f64..0.3) {
            let spec = build_static(p, n, alpha).unwrap();
            let drift = spec.drift().unwrap();
            prop_assume!((p / n as f64 - alpha).abs() > 1e-9);
            prop_assert_eq!(drift.is_stable(), p / n as f64 > alpha);
        }
    }
}
