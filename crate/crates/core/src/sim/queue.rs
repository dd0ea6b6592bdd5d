//! Slot-by-slot queue with fragmentation and rate adaptation.
//!
//! Within a slot the head-of-line fragment is sent first and the new
//! arrival, if any, joins the buffer afterwards, so a packet generated in
//! slot `a` is first served in slot `a + 1`. A packet completed in slot `c`
//! has latency `c - a`.

use std::collections::VecDeque;

use rand::Rng;

use crate::model::{SchemeConfig, SchemeKind};
use crate::sim::channel::Channel;

/// One delivered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub arrival: u64,
    pub departure: u64,
    /// Rate (1-based) at which the packet's last fragment was delivered.
    pub rate: usize,
}

impl PacketRecord {
    pub fn latency(&self) -> u64 {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueRun {
    /// Packets generated after warm-up and delivered before the horizon,
    /// in departure order.
    pub packets: Vec<PacketRecord>,
    pub arrivals: u64,
    pub departures: u64,
    /// Time-averaged number in system after warm-up.
    pub mean_queue_length: f64,
    pub max_queue_length: usize,
    pub final_queue_length: usize,
    pub divergent: bool,
}

impl QueueRun {
    pub fn mean_latency(&self) -> f64 {
        self.packets.iter().map(|p| p.latency() as f64).sum::<f64>() / self.packets.len() as f64
    }
}

/// Queue length beyond which a run is flagged as divergent.
pub fn divergence_threshold(alpha: f64, horizon: u64) -> f64 {
    100.0 * alpha * (horizon as f64).sqrt() + 100.0
}

/// First rate of the dynamic scheme.
pub fn initial_rate(num_rates: usize) -> usize {
    num_rates.div_ceil(2)
}

/// Runs `horizon` slots; packets generated before `warmup` are served but
/// not recorded.
pub fn run_queue<C: Channel, R: Rng + ?Sized>(
    channel: &mut C,
    alpha: f64,
    scheme: &SchemeConfig,
    horizon: u64,
    warmup: u64,
    rng: &mut R,
) -> QueueRun {
    assert!(horizon > warmup, "horizon must exceed warm-up");
    let big_n = channel.num_rates();
    let (mut rate, adaptive) = match scheme.kind {
        SchemeKind::Static(n) => (n, false),
        SchemeKind::Dynamic => (initial_rate(big_n), true),
    };
    let mut fragment = 1;
    let mut buffer: VecDeque<u64> = VecDeque::new();
    let mut run = QueueRun {
        packets: Vec::new(),
        arrivals: 0,
        departures: 0,
        mean_queue_length: 0.0,
        max_queue_length: 0,
        final_queue_length: 0,
        divergent: false,
    };
    let mut occupancy = 0u128;

    for slot in 0..horizon {
        if let Some(&arrival) = buffer.front() {
            if channel.attempt(rate, rng) {
                if fragment < rate {
                    fragment += 1;
                } else {
                    buffer.pop_front();
                    run.departures += 1;
                    if arrival >= warmup {
                        run.packets.push(PacketRecord {
                            arrival,
                            departure: slot,
                            rate,
                        });
                    }
                    if adaptive && rate > 1 && rng.random_bool(scheme.increment) {
                        rate -= 1;
                    }
                    fragment = 1;
                }
            } else if adaptive && fragment == 1 && rate < big_n && rng.random_bool(scheme.decrement) {
                rate += 1;
            }
        }
        if rng.random_bool(alpha) {
            buffer.push_back(slot);
            run.arrivals += 1;
        }
        if slot >= warmup {
            occupancy += buffer.len() as u128;
        }
        run.max_queue_length = run.max_queue_length.max(buffer.len());
    }
    run.mean_queue_length = occupancy as f64 / (horizon - warmup) as f64;
    run.final_queue_length = buffer.len();
    run.divergent = run.final_queue_length as f64 > divergence_threshold(alpha, horizon);
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::channel::BernoulliChannel;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scheme(kind: SchemeKind) -> SchemeConfig {
        SchemeConfig {
            kind,
            decrement: 0.3,
            increment: 0.1,
        }
    }

    #[test]
    fn perfect_channel_single_fragment() {
        let mut ch = BernoulliChannel::new(vec![1.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let run = run_queue(&mut ch, 0.04, &scheme(SchemeKind::Static(1)), 100_000, 0, &mut rng);
        assert!(run.packets.iter().all(|p| p.latency() == 1));
        assert!(!run.divergent);
    }

    #[test]
    fn fragmentation_floor() {
        let mut ch = BernoulliChannel::new(vec![1.0; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = run_queue(&mut ch, 0.04, &scheme(SchemeKind::Static(3)), 100_000, 0, &mut rng);
        assert_eq!(run.packets.iter().map(|p| p.latency()).min(), Some(3));
    }

    #[test]
    fn overloaded_queue_is_flagged() {
        let mut ch = BernoulliChannel::new(vec![0.02; 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = run_queue(&mut ch, 0.04, &scheme(SchemeKind::Static(1)), 1_000_000, 0, &mut rng);
        assert!(run.divergent);
    }

    #[test]
    fn geometric_service_matches_closed_form() {
        // Single fragment with success p: mean latency (1 - alpha) / (p - alpha).
        let (alpha, p) = (0.04, 0.5);
        let mut ch = BernoulliChannel::new(vec![p]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = run_queue(
            &mut ch,
            alpha,
            &scheme(SchemeKind::Static(1)),
            2_000_000,
            200_000,
            &mut rng,
        );
        let expected = (1.0 - alpha) / (p - alpha);
        assert!(
            (run.mean_latency() / expected - 1.0).abs() < 0.02,
            "{}",
            run.mean_latency()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn fifo_floor_and_determinism(
            column in prop::collection::vec(0.05f64..1.0, 1..6),
            dynamic in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let kind = if dynamic { SchemeKind::Dynamic } else { SchemeKind::Static(column.len()) };
            let s = scheme(kind);
            let mut ch = BernoulliChannel::new(column.clone());
            let a = run_queue(&mut ch, 0.04, &s, 20_000, 1_000, &mut ChaCha8Rng::seed_from_u64(seed));
            let b = run_queue(&mut ch, 0.04, &s, 20_000, 1_000, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(&a, &b);
            prop_assert!(a.departures <= a.arrivals);
            for w in a.packets.windows(2) {
                prop_assert!(w[0].arrival < w[1].arrival && w[0].departure < w[1].departure);
            }
            for p in &a.packets {
                prop_assert!(p.latency() >= p.rate as u64);
                prop_assert!(p.arrival >= 1_000);
            }
        }
    }
}
