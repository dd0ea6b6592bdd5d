//! Monte Carlo counterpart of the analytic pipeline.

pub mod channel;
pub mod empirical;
pub mod field;
pub mod queue;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{FieldConfig, LinkConfig, RateLadder, SchemeConfig};
pub use channel::{BernoulliChannel, Channel, SirChannel};
pub use empirical::{empirical_meta, gamma_grid, EmpiricalMeta, SampleMoments};
pub use field::{exact_tsp, sample_field, FieldRealization, Interferer, DEFAULT_WINDOW_RADIUS};
pub use queue::{run_queue, PacketRecord, QueueRun};

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fraction of the horizon discarded as warm-up.
pub const WARMUP_FRACTION: f64 = 0.1;

pub fn default_warmup(horizon: u64) -> u64 {
    (horizon as f64 * WARMUP_FRACTION) as u64
}

/// One realization run with the literal SIR channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub seed: u64,
    pub realization: u64,
    pub point_count: usize,
    pub window_radius: f64,
    /// Exact TSP of the realization per rate.
    pub tsp: Vec<f64>,
    pub run: QueueRun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSettings {
    pub horizon: u64,
    pub warmup: u64,
    pub window_radius: f64,
}

/// Samples realization `realization` of `seed`, then drives the queue with
/// per-slot SIR tests on it.
pub fn simulate(
    link: &LinkConfig,
    field: &FieldConfig,
    ladder: &RateLadder,
    scheme: &SchemeConfig,
    settings: QueueSettings,
    seed: u64,
    realization: u64,
) -> SimResult {
    let mut rng = stream_rng(seed, realization);
    let real = sample_field(field, settings.window_radius, &mut rng);
    let mut channel = SirChannel::new(&real, link, field, ladder);
    let run = run_queue(
        &mut channel,
        link.arrival_prob,
        scheme,
        settings.horizon,
        settings.warmup,
        &mut rng,
    );
    SimResult {
        seed,
        realization,
        point_count: real.len(),
        window_radius: settings.window_radius,
        tsp: channel.exact.clone(),
        run,
    }
}

/// Rows of `realization,arrival_slot,departure_slot,rate_index,latency`.
pub fn write_latency_samples<W: Write>(results: &[SimResult], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["realization", "arrival_slot", "departure_slot", "rate_index", "latency"])?;
    for r in results {
        for p in &r.run.packets {
            w.write_record([
                r.realization.to_string(),
                p.arrival.to_string(),
                p.departure.to_string(),
                p.rate.to_string(),
                p.latency().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct RealizationMeta {
    realization: u64,
    point_count: usize,
    tsp: Vec<f64>,
    packets: usize,
    mean_latency: f64,
    mean_queue_length: f64,
    max_queue_length: usize,
    final_queue_length: usize,
    divergent: bool,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    seed: u64,
    window_radius_m: f64,
    horizon_slots: u64,
    warmup_slots: u64,
    realization: Vec<RealizationMeta>,
}

/// Realization metadata as TOML.
pub fn sidecar_toml(results: &[SimResult], settings: QueueSettings) -> String {
    let sidecar = Sidecar {
        seed: results.first().map_or(0, |r| r.seed),
        window_radius_m: settings.window_radius,
        horizon_slots: settings.horizon,
        warmup_slots: settings.warmup,
        realization: results
            .iter()
            .map(|r| RealizationMeta {
                realization: r.realization,
                point_count: r.point_count,
                tsp: r.tsp.clone(),
                packets: r.run.packets.len(),
                mean_latency: if r.run.packets.is_empty() {
                    0.0
                } else {
                    r.run.mean_latency()
                },
                mean_queue_length: r.run.mean_queue_length,
                max_queue_length: r.run.max_queue_length,
                final_queue_length: r.run.final_queue_length,
                divergent: r.run.divergent,
            })
            .collect(),
    };
    toml::to_string(&sidecar).expect("sidecar fields serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_rate_ladder, default_config, SchemeKind};

    fn settings() -> QueueSettings {
        QueueSettings {
            horizon: 20_000,
            warmup: 2_000,
            window_radius: 300.0,
        }
    }

    #[test]
    fn seeded_simulation_repeats() {
        let (link, field, scheme) = default_config(50e-3);
        let ladder = build_rate_ladder(&link).unwrap();
        let a = simulate(&link, &field, &ladder, &scheme, settings(), 17, 3);
        let b = simulate(&link, &field, &ladder, &scheme, settings(), 17, 3);
        assert_eq!(a, b);
        assert!(a.tsp.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(a.run.packets.iter().all(|p| p.latency() >= p.rate as u64));
    }

    #[test]
    fn empty_field_static_service_is_one_slot() {
        let (link, mut field, mut scheme) = default_config(50e-3);
        field.density = 0.0;
        scheme.kind = SchemeKind::Static(1);
        let ladder = build_rate_ladder(&link).unwrap();
        let r = simulate(&link, &field, &ladder, &scheme, settings(), 1, 0);
        assert!(!r.run.packets.is_empty());
        assert!(r.run.packets.iter().all(|p| p.latency() == 1));
    }

    #[test]
    fn outputs() {
        let (link, field, scheme) = default_config(50e-3);
        let ladder = build_rate_ladder(&link).unwrap();
        let r = simulate(&link, &field, &ladder, &scheme, settings(), 2, 0);
        let mut buf = Vec::new();
        write_latency_samples(std::slice::from_ref(&r), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("realization,arrival_slot,departure_slot,rate_index,latency\n"));
        assert_eq!(text.lines().count(), r.run.packets.len() + 1);
        let sidecar: toml::Value = toml::from_str(&sidecar_toml(&[r], settings())).unwrap();
        assert_eq!(sidecar["seed"].as_integer(), Some(2));
        assert!(sidecar["realization"][0]["point_count"].as_integer().is_some());
    }
}
