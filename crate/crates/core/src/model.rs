//! Link, interference-field and adaptation-scheme configuration, plus the
//! rate ladder `R_n = L / (n T_s)` and its SIR decoding thresholds.
//!
//! Everything in here is SI: meters, seconds, Watts, Hz and bits. Conversion
//! from the file units happens in [`crate::config`].

use thiserror::Error;

/// Tolerance on `Σ type_probs == 1`.
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("field vectors must all have length V={expected}: {field} has {actual}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("type probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),
    #[error("N={num_rates} rates with arrival probability {arrival_prob}: N must stay below 1/alpha")]
    TooManyRates { num_rates: usize, arrival_prob: f64 },
    #[error("static rate index {index} outside 1..={num_rates}")]
    StaticIndex { index: usize, num_rates: usize },
    #[error("infeasible rate ladder: threshold exponent {exponent} overflows at n={n}")]
    InfeasibleLadder { n: usize, exponent: f64 },
}

fn require(ok: bool, field: &'static str, requirement: &'static str, value: f64) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement,
            value,
        })
    }
}

/// The intended link and its traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    /// Transmit power `w_t` in Watts.
    pub tx_power: f64,
    /// Transmitter-receiver distance `R_o` in meters.
    pub link_distance: f64,
    /// Path-loss exponent `eta > 2`.
    pub path_loss_exp: f64,
    /// Per-slot packet generation probability `alpha`.
    pub arrival_prob: f64,
    /// Packet size `L` in bits.
    pub packet_bits: f64,
    /// Bandwidth `W` in Hz.
    pub bandwidth: f64,
    /// Fraction `zeta` of Shannon capacity achievable in practice.
    pub capacity_gap: f64,
    /// Slot duration `T_s` in seconds.
    pub slot_duration: f64,
    /// Number of rates `N`; rate `n` splits a packet into `n` fragments.
    pub num_rates: usize,
    /// Number of TSP classes `M`.
    pub num_classes: usize,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        require(self.tx_power > 0.0, "tx_power", "> 0", self.tx_power)?;
        require(self.link_distance > 0.0, "link_distance", "> 0", self.link_distance)?;
        require(self.path_loss_exp > 2.0, "path_loss_exp", "> 2", self.path_loss_exp)?;
        require(
            self.arrival_prob > 0.0 && self.arrival_prob < 1.0,
            "arrival_prob",
            "in (0, 1)",
            self.arrival_prob,
        )?;
        require(self.packet_bits > 0.0, "packet_bits", "> 0", self.packet_bits)?;
        require(self.bandwidth > 0.0, "bandwidth", "> 0", self.bandwidth)?;
        require(
            self.capacity_gap > 0.0 && self.capacity_gap <= 1.0,
            "capacity_gap",
            "in (0, 1]",
            self.capacity_gap,
        )?;
        require(self.slot_duration > 0.0, "slot_duration", "> 0", self.slot_duration)?;
        require(self.num_rates >= 1, "num_rates", ">= 1", self.num_rates as f64)?;
        require(self.num_classes >= 1, "num_classes", ">= 1", self.num_classes as f64)?;
        if self.num_rates as f64 * self.arrival_prob >= 1.0 {
            return Err(ConfigError::TooManyRates {
                num_rates: self.num_rates,
                arrival_prob: self.arrival_prob,
            });
        }
        Ok(())
    }

    /// Number of phases of the dynamic chain, `N (N + 1) / 2`.
    pub fn dynamic_phase_count(&self) -> usize {
        self.num_rates * (self.num_rates + 1) / 2
    }
}

/// The heterogeneous Poisson field of interferers.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    /// Interferer density `lambda` in devices per square meter.
    pub density: f64,
    /// Mark law `f_v`, one entry per device type.
    pub type_probs: Vec<f64>,
    /// Per-type transmit power `w_v` in Watts.
    pub powers: Vec<f64>,
    /// Per-type activity factor `kappa_v`.
    pub activities: Vec<f64>,
}

impl FieldConfig {
    pub fn num_types(&self) -> usize {
        self.type_probs.len()
    }

    /// Density of type-`v` devices (0-based `v`), `lambda_v = f_v(v) lambda`.
    pub fn type_density(&self, v: usize) -> f64 {
        self.type_probs[v] * self.density
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.type_probs.len();
        require(v >= 1, "type_probs", "non-empty", 0.0)?;
        require(
            self.density >= 0.0 && self.density.is_finite(),
            "density",
            ">= 0",
            self.density,
        )?;
        for (field, len) in [("powers", self.powers.len()), ("activities", self.activities.len())] {
            if len != v {
                return Err(ConfigError::LengthMismatch {
                    field,
                    expected: v,
                    actual: len,
                });
            }
        }
        for &p in &self.type_probs {
            require(p >= 0.0, "type_probs", ">= 0", p)?;
        }
        let sum: f64 = self.type_probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(ConfigError::ProbabilitySum(sum));
        }
        for &w in &self.powers {
            require(w > 0.0, "powers", "> 0", w)?;
        }
        for &k in &self.activities {
            require((0.0..=1.0).contains(&k), "activities", "in [0, 1]", k)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    /// Fixed rate index `n` (1-based, equal to the fragment count).
    Static(usize),
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Probability `d` of moving to the next slower rate after a failed first fragment.
    pub decrement: f64,
    /// Probability `u` of trying the next faster rate after a delivered packet.
    pub increment: f64,
}

impl SchemeConfig {
    pub fn validate(&self, num_rates: usize) -> Result<(), ConfigError> {
        match self.kind {
            SchemeKind::Static(index) if index < 1 || index > num_rates => {
                Err(ConfigError::StaticIndex { index, num_rates })
            }
            SchemeKind::Static(_) => Ok(()),
            SchemeKind::Dynamic => {
                require(
                    (0.0..=1.0).contains(&self.decrement),
                    "decrement",
                    "in [0, 1]",
                    self.decrement,
                )?;
                require(
                    (0.0..=1.0).contains(&self.increment),
                    "increment",
                    "in [0, 1]",
                    self.increment,
                )
            }
        }
    }
}

/// Rates `R_1 > ... > R_N` and their thresholds `theta_1 > ... > theta_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLadder {
    pub rates: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl RateLadder {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Threshold of rate `n` (1-based).
    pub fn threshold(&self, n: usize) -> f64 {
        self.thresholds[n - 1]
    }

    /// Rate of index `n` (1-based) in bits per second.
    pub fn rate(&self, n: usize) -> f64 {
        self.rates[n - 1]
    }
}

/// Builds `R_n = L/(n T_s)` and `theta_n = 2^{L/(n zeta W T_s)} - 1` for `n = 1..=N`.
///
/// The exponent uses the exact `L/n`; the `ceil(L/n)` fragment size only
/// matters for framing and is not modeled.
pub fn build_rate_ladder(link: &LinkConfig) -> Result<RateLadder, ConfigError> {
    link.validate()?;
    let per_slot_capacity = link.capacity_gap * link.bandwidth * link.slot_duration;
    let mut rates = Vec::with_capacity(link.num_rates);
    let mut thresholds = Vec::with_capacity(link.num_rates);
    for n in 1..=link.num_rates {
        let exponent = link.packet_bits / (n as f64 * per_slot_capacity);
        let theta = exponent.exp2() - 1.0;
        if !theta.is_finite() {
            return Err(ConfigError::InfeasibleLadder { n, exponent });
        }
        rates.push(link.packet_bits / (n as f64 * link.slot_duration));
        thresholds.push(theta);
    }
    Ok(RateLadder { rates, thresholds })
}

/// Numerical-study defaults with the caller's transmit power (Watts).
///
/// 10 mW reproduces the meta-distribution curves; 50 mW the latency studies.
pub fn default_config(tx_power: f64) -> (LinkConfig, FieldConfig, SchemeConfig) {
    let link = LinkConfig {
        tx_power,
        link_distance: 20.0,
        path_loss_exp: 4.0,
        arrival_prob: 0.04,
        packet_bits: 40.0 * 8.0,
        bandwidth: 100.0 * 1e3,
        capacity_gap: 0.8,
        slot_duration: 1.0 * 1e-3,
        num_rates: 5,
        num_classes: 8,
    };
    let field = FieldConfig {
        density: 1e3 * 1e-6,
        type_probs: vec![1.0 / 3.0; 3],
        powers: vec![10e-3, 7e-3, 5e-3],
        activities: vec![0.1, 0.3, 0.5],
    };
    let scheme = SchemeConfig {
        kind: SchemeKind::Dynamic,
        decrement: 0.3,
        increment: 0.1,
    };
    (link, field, scheme)
}
