//! Experiment orchestration behind the `ratelat` binary.
//!
//! Every experiment resolves one configuration, runs, and writes CSV files
//! whose leading `#` lines record the resolved configuration and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;

use ratelat::chains::{latency_dynamic, latency_static, LatencyTable, SchemeLabel, SchemeLatency, LATENCY_HEADER};
use ratelat::config::{FileConfig, Resolved};
use ratelat::meta::{MetaDistribution, TspGrid};
use ratelat::model::build_rate_ladder;
use ratelat::sim::{empirical_meta, gamma_grid, sidecar_toml, simulate, write_latency_samples};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    MetaCurves,
    LatencyPerClass,
    LatencyVsPacketSize,
    /// Slot-level simulation of the configured scheme.
    Custom,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MetaCurves => "meta",
            Experiment::LatencyPerClass => "latency-class",
            Experiment::LatencyVsPacketSize => "latency-size",
            Experiment::Custom => "simulate",
        }
    }

    /// Transmit power (mW) the experiment starts from before any file or
    /// override is applied.
    pub fn base_config(self) -> FileConfig {
        match self {
            Experiment::MetaCurves => FileConfig::defaults(10.0),
            _ => FileConfig::defaults(50.0),
        }
    }
}

/// One axis swept by an experiment: a config key and its values, kept as
/// TOML literals until applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Packet sizes 20..=120 bytes in steps of 5.
    pub fn default_packet_sizes() -> Self {
        SweepAxis {
            key: "link.packet_size_bytes".to_string(),
            values: (20..=120).step_by(5).map(|b: u32| b.to_string()).collect(),
        }
    }

    /// `key=v1,v2,...` or `key=start:stop:step` (inclusive).
    pub fn parse(text: &str) -> Result<Self> {
        let (key, spec) = text
            .split_once('=')
            .with_context(|| format!("sweep `{text}` is not of the form key=values"))?;
        let key = key.trim().to_string();
        let spec = spec.trim();
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
            ensure!(parts.len() == 3, "range `{spec}` must be start:stop:step");
            if let (Ok(start), Ok(stop), Ok(step)) = (
                parts[0].parse::<i64>(),
                parts[1].parse::<i64>(),
                parts[2].parse::<i64>(),
            ) {
                ensure!(step > 0, "sweep step must be positive");
                (start..=stop).step_by(step as usize).map(|v| v.to_string()).collect()
            } else {
                let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|p| p.parse::<f64>());
                let (start, stop, step) = (start?, stop?, step?);
                ensure!(step > 0.0, "sweep step must be positive");
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| (start + i as f64 * step).to_string()).collect()
            }
        } else {
            spec.split(',').map(|v| v.trim().to_string()).collect::<Vec<_>>()
        };
        ensure!(
            !values.is_empty() && values.iter().all(|v| !v.is_empty()),
            "sweep `{text}` has no values"
        );
        Ok(SweepAxis { key, values })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    /// Configuration before overrides: the experiment base merged with any file.
    pub config: FileConfig,
    pub overrides: Vec<String>,
    pub sweep: Option<SweepAxis>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            experiment,
            config: experiment.base_config(),
            overrides: Vec::new(),
            sweep: None,
            out_dir: out_dir.into(),
            seed: None,
        }
    }

    /// Layers a configuration file over the experiment's base.
    pub fn with_config_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.config = FileConfig::merge_toml(&self.config, &text).with_context(|| format!("in {}", path.display()))?;
        Ok(self)
    }

    /// The configuration after overrides and the seed flag.
    pub fn file_config(&self) -> Result<FileConfig> {
        let mut cfg = self.config.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Configuration of every sweep point, type-checked and validated.
    pub fn sweep_points(&self) -> Result<Vec<(String, FileConfig)>> {
        let base = self.file_config()?;
        let axis = self.sweep.clone().unwrap_or_else(SweepAxis::default_packet_sizes);
        axis.values
            .iter()
            .map(|v| {
                let cfg = base
                    .apply_override(&format!("{}={v}", axis.key))
                    .with_context(|| format!("sweep value `{v}`"))?;
                cfg.resolve().with_context(|| format!("sweep point {}={v}", axis.key))?;
                Ok((v.clone(), cfg))
            })
            .collect()
    }

    fn sweep_key(&self) -> String {
        self.sweep
            .as_ref()
            .map_or_else(|| SweepAxis::default_packet_sizes().key, |s| s.key.clone())
    }
}

/// `#`-prefixed provenance block: experiment, seed and the full configuration.
pub fn header_comment(experiment: Experiment, cfg: &FileConfig) -> String {
    let mut out = format!("# ratelat {}\n# seed = {}\n", experiment.name(), cfg.sim.seed);
    for line in cfg.to_toml().lines().filter(|l| !l.trim().is_empty()) {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn write_output(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn csv_with_header(header: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = header.as_bytes().to_vec();
    body(&mut buf)?;
    Ok(buf)
}

fn analytic_grid(r: &Resolved) -> Result<(MetaDistribution, TspGrid)> {
    let ladder = build_rate_ladder(&r.link)?;
    let dist = MetaDistribution::new(&r.link, &r.field, &ladder);
    let grid = TspGrid::build(&dist, r.link.num_classes)?;
    Ok((dist, grid))
}

/// Analytic and simulated meta distribution per rate on the reporting grid.
///
/// Writes `meta_curves.csv` (`rate_index,theta,gamma,analytic_ccdf,
/// empirical_ccdf,sup_distance`), `beta_params.csv`, `tsp_grid.csv` and the
/// realization sidecar `meta_realizations.toml`.
pub fn run_meta_curves(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let cfg = spec.file_config()?;
    let r = cfg.resolve()?;
    let header = header_comment(spec.experiment, &cfg);
    let ladder = build_rate_ladder(&r.link)?;
    let (dist, grid) = analytic_grid(&r)?;
    let emp = empirical_meta(
        &r.link,
        &r.field,
        &ladder,
        r.meta_realizations,
        r.queue.window_radius,
        r.seed,
    );

    let curves = csv_with_header(&header, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            "rate_index",
            "theta",
            "gamma",
            "analytic_ccdf",
            "empirical_ccdf",
            "sup_distance",
        ])?;
        for n in 1..=dist.num_rates() {
            let rate = dist.rate(n)?;
            let sup = emp.sup_distance(n, &rate.law);
            for (g, e) in gamma_grid().into_iter().zip(emp.ccdf_on_grid(n)) {
                w.write_record([
                    n.to_string(),
                    rate.theta.to_string(),
                    g.to_string(),
                    rate.law.ccdf(g).to_string(),
                    e.to_string(),
                    sup.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let beta = csv_with_header(&header, |buf| Ok(dist.write_csv(buf)?))?;
    let tsp = csv_with_header(&header, |buf| Ok(grid.write_csv(buf)?))?;
    let counts = &emp.point_counts;
    let sidecar = format!(
        "seed = {}\nwindow_radius_m = {}\nrealizations = {}\nmean_point_count = {}\nmin_point_count = {}\nmax_point_count = {}\n",
        emp.seed,
        emp.window_radius,
        counts.len(),
        counts.iter().sum::<usize>() as f64 / counts.len() as f64,
        counts.iter().min().unwrap_or(&0),
        counts.iter().max().unwrap_or(&0),
    );
    Ok(vec![
        write_output(&spec.out_dir, "meta_curves.csv", &curves)?,
        write_output(&spec.out_dir, "beta_params.csv", &beta)?,
        write_output(&spec.out_dir, "tsp_grid.csv", &tsp)?,
        write_output(&spec.out_dir, "meta_realizations.toml", sidecar.as_bytes())?,
    ])
}

fn all_schemes(r: &Resolved, grid: &TspGrid) -> Result<Vec<(SchemeLabel, SchemeLatency)>> {
    let mut out: Vec<(SchemeLabel, SchemeLatency)> = (1..=r.link.num_rates)
        .into_par_iter()
        .map(|n| Ok((SchemeLabel::Static(n), latency_static(grid, &r.link, n)?)))
        .collect::<Result<_>>()?;
    out.push((
        SchemeLabel::Dynamic,
        latency_dynamic(grid, &r.link, r.scheme.decrement, r.scheme.increment)?,
    ));
    Ok(out)
}

/// Per (scheme, class) latency with the `1/alpha` stability threshold.
///
/// Writes `latency_per_class.csv` and `tsp_grid.csv`.
pub fn run_latency_per_class(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let cfg = spec.file_config()?;
    let r = cfg.resolve()?;
    let header = header_comment(spec.experiment, &cfg);
    let (_, grid) = analytic_grid(&r)?;
    let schemes = all_schemes(&r, &grid)?;
    let threshold = (1.0 / r.link.arrival_prob).to_string();

    let latency = csv_with_header(&header, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let mut head: Vec<&str> = LATENCY_HEADER.to_vec();
        head.push("stability_threshold");
        w.write_record(&head)?;
        for (label, lat) in &schemes {
            for c in &lat.classes {
                let mut rec = LatencyTable::record(*label, c).to_vec();
                rec.push(threshold.clone());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    let tsp = csv_with_header(&header, |buf| Ok(grid.write_csv(buf)?))?;
    Ok(vec![
        write_output(&spec.out_dir, "latency_per_class.csv", &latency)?,
        write_output(&spec.out_dir, "tsp_grid.csv", &tsp)?,
    ])
}

/// Spatially averaged latency per scheme at every sweep point.
///
/// Writes `latency_vs_packet_size.csv` with columns `<sweep key>,scheme,
/// rate_index_or_dyn,spatial_average,stable_average,unstable_fraction`.
pub fn run_latency_vs_packet_size(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let cfg = spec.file_config()?;
    let points = spec.sweep_points()?;
    let header = header_comment(spec.experiment, &cfg);
    let rows: Vec<(String, Vec<(SchemeLabel, SchemeLatency)>)> = points
        .par_iter()
        .map(|(value, point)| {
            let r = point.resolve()?;
            let (_, grid) = analytic_grid(&r)?;
            Ok((value.clone(), all_schemes(&r, &grid)?))
        })
        .collect::<Result<_>>()?;

    let key = spec.sweep_key();
    let body = csv_with_header(&header, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record([
            key.as_str(),
            "scheme",
            "rate_index_or_dyn",
            "spatial_average",
            "stable_average",
            "unstable_fraction",
        ])?;
        for (value, schemes) in &rows {
            for (label, lat) in schemes {
                let (scheme, index) = match label {
                    SchemeLabel::Static(n) => ("static", n.to_string()),
                    SchemeLabel::Dynamic => ("dynamic", "dyn".to_string()),
                };
                w.write_record([
                    value.clone(),
                    scheme.to_string(),
                    index,
                    lat.spatial_average().to_string(),
                    lat.stable_average().to_string(),
                    lat.unstable_fraction().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(vec![write_output(&spec.out_dir, "latency_vs_packet_size.csv", &body)?])
}

/// Slot-level runs of the configured scheme on independent realizations.
///
/// Writes `sim_latency.csv` and `sim_realizations.toml`.
pub fn run_simulation(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let cfg = spec.file_config()?;
    let r = cfg.resolve()?;
    let header = header_comment(spec.experiment, &cfg);
    let ladder = build_rate_ladder(&r.link)?;
    let results: Vec<_> = (0..r.queue_realizations as u64)
        .into_par_iter()
        .map(|k| simulate(&r.link, &r.field, &ladder, &r.scheme, r.queue, r.seed, k))
        .collect();
    let samples = csv_with_header(&header, |buf| Ok(write_latency_samples(&results, buf)?))?;
    let sidecar = sidecar_toml(&results, r.queue);
    Ok(vec![
        write_output(&spec.out_dir, "sim_latency.csv", &samples)?,
        write_output(&spec.out_dir, "sim_realizations.toml", sidecar.as_bytes())?,
    ])
}

pub fn run(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    if spec.sweep.is_some() && spec.experiment != Experiment::LatencyVsPacketSize {
        bail!("only latency-size takes a sweep axis");
    }
    match spec.experiment {
        Experiment::MetaCurves => run_meta_curves(spec),
        Experiment::LatencyPerClass => run_latency_per_class(spec),
        Experiment::LatencyVsPacketSize => run_latency_vs_packet_size(spec),
        Experiment::Custom => run_simulation(spec),
    }
}
