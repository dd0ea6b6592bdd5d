//! Configuration file in human units (mW, m, km^-2, bytes, kHz, ms) and its
//! one-time conversion to the SI types of [`crate::model`].
//!
//! ```toml
//! [link]
//! tx_power_mw = 50.0
//! packet_size_bytes = 40
//! [scheme]
//! kind = "static"
//! static_rate = 2
//! ```
//!
//! Missing keys fall back to a base configuration, and single values can be
//! overridden with dotted keys such as `link.packet_size_bytes=50`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{default_config, ConfigError, FieldConfig, LinkConfig, SchemeConfig, SchemeKind};
use crate::sim::{QueueSettings, DEFAULT_WINDOW_RADIUS, WARMUP_FRACTION};

#[derive(Debug, Error)]
pub enum FileConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("override `{0}` is not of the form key=value")]
    OverrideSyntax(String),
    #[error("override `{key}` expects {expected}, got `{value}`")]
    OverrideType {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("unknown scheme kind `{0}`, expected \"static\" or \"dynamic\"")]
    SchemeKind(String),
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub tx_power_mw: f64,
    pub link_distance_m: f64,
    pub path_loss_exponent: f64,
    pub arrival_prob: f64,
    pub packet_size_bytes: u64,
    pub bandwidth_khz: f64,
    pub capacity_gap: f64,
    pub slot_ms: f64,
    pub num_rates: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub density_per_km2: f64,
    pub type_probs: Vec<f64>,
    pub powers_mw: Vec<f64>,
    pub activities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// `"static"` or `"dynamic"`.
    pub kind: String,
    /// Rate index used when `kind = "static"`.
    pub static_rate: usize,
    pub decrement: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub seed: u64,
    /// Field realizations behind each empirical meta distribution.
    pub meta_realizations: usize,
    /// Field realizations simulated slot by slot.
    pub queue_realizations: usize,
    pub window_radius_m: f64,
    pub horizon_slots: u64,
    pub warmup_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub link: LinkSection,
    pub field: FieldSection,
    pub scheme: SchemeSection,
    pub sim: SimSection,
}

/// SI configuration ready for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub link: LinkConfig,
    pub field: FieldConfig,
    pub scheme: SchemeConfig,
    pub queue: QueueSettings,
    pub meta_realizations: usize,
    pub queue_realizations: usize,
    pub seed: u64,
}

impl FileConfig {
    /// Defaults of the numerical study at the given transmit power (mW).
    pub fn defaults(tx_power_mw: f64) -> Self {
        let (link, field, scheme) = default_config(tx_power_mw * 1e-3);
        FileConfig {
            link: LinkSection {
                tx_power_mw,
                link_distance_m: link.link_distance,
                path_loss_exponent: link.path_loss_exp,
                arrival_prob: link.arrival_prob,
                packet_size_bytes: (link.packet_bits / 8.0) as u64,
                bandwidth_khz: link.bandwidth / 1e3,
                capacity_gap: link.capacity_gap,
                slot_ms: link.slot_duration * 1e3,
                num_rates: link.num_rates,
                num_classes: link.num_classes,
            },
            field: FieldSection {
                density_per_km2: field.density * 1e6,
                type_probs: field.type_probs,
                powers_mw: field.powers.iter().map(|w| w * 1e3).collect(),
                activities: field.activities,
            },
            scheme: SchemeSection {
                kind: "dynamic".to_string(),
                static_rate: 1,
                decrement: scheme.decrement,
                increment: scheme.increment,
            },
            sim: SimSection {
                seed: 1,
                meta_realizations: 10_000,
                queue_realizations: 4,
                window_radius_m: DEFAULT_WINDOW_RADIUS,
                horizon_slots: 1_000_000,
                warmup_fraction: WARMUP_FRACTION,
            },
        }
    }

    /// `text` layered over `base`: keys present in `text` win.
    pub fn merge_toml(base: &FileConfig, text: &str) -> Result<Self, FileConfigError> {
        let patch: toml::Table = toml::from_str(text)?;
        let mut value = base.to_value();
        merge(&mut value, "", toml::Value::Table(patch))?;
        Ok(value.try_into()?)
    }

    /// Applies `key=value`, where the value is TOML (strings may be bare).
    pub fn apply_override(&self, assignment: &str) -> Result<Self, FileConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| FileConfigError::OverrideSyntax(assignment.to_string()))?;
        let (key, raw) = (key.trim(), raw.trim());
        let mut value = self.to_value();
        let slot = key
            .split('.')
            .try_fold(&mut value, |v, part| v.get_mut(part))
            .ok_or_else(|| FileConfigError::UnknownKey(key.to_string()))?;
        if slot.is_table() {
            return Err(FileConfigError::UnknownKey(key.to_string()));
        }
        *slot = coerce(key, slot, parse_value(raw))?;
        Ok(value.try_into()?)
    }

    pub fn apply_overrides<S: AsRef<str>>(&self, assignments: &[S]) -> Result<Self, FileConfigError> {
        assignments
            .iter()
            .try_fold(self.clone(), |cfg, a| cfg.apply_override(a.as_ref()))
    }

    fn to_value(&self) -> toml::Value {
        toml::Value::try_from(self).expect("configuration serializes")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Converts to SI and validates every section.
    pub fn resolve(&self) -> Result<Resolved, FileConfigError> {
        let l = &self.link;
        let link = LinkConfig {
            tx_power: l.tx_power_mw * 1e-3,
            link_distance: l.link_distance_m,
            path_loss_exp: l.path_loss_exponent,
            arrival_prob: l.arrival_prob,
            packet_bits: l.packet_size_bytes as f64 * 8.0,
            bandwidth: l.bandwidth_khz * 1e3,
            capacity_gap: l.capacity_gap,
            slot_duration: l.slot_ms * 1e-3,
            num_rates: l.num_rates,
            num_classes: l.num_classes,
        };
        link.validate()?;
        let f = &self.field;
        let field = FieldConfig {
            density: f.density_per_km2 * 1e-6,
            type_probs: f.type_probs.clone(),
            powers: f.powers_mw.iter().map(|w| w * 1e-3).collect(),
            activities: f.activities.clone(),
        };
        field.validate()?;
        let s = &self.scheme;
        let kind = match s.kind.as_str() {
            "static" => SchemeKind::Static(s.static_rate),
            "dynamic" => SchemeKind::Dynamic,
            other => return Err(FileConfigError::SchemeKind(other.to_string())),
        };
        let scheme = SchemeConfig {
            kind,
            decrement: s.decrement,
            increment: s.increment,
        };
        scheme.validate(link.num_rates)?;
        let sim = &self.sim;
        if !(0.0..1.0).contains(&sim.warmup_fraction) {
            return Err(ConfigError::OutOfRange {
                field: "warmup_fraction",
                requirement: "in [0, 1)",
                value: sim.warmup_fraction,
            }
            .into());
        }
        if sim.window_radius_m.is_nan() || sim.window_radius_m <= 0.0 {
            return Err(ConfigError::OutOfRange {
                field: "window_radius_m",
                requirement: "> 0",
                value: sim.window_radius_m,
            }
            .into());
        }
        if sim.horizon_slots == 0 || sim.meta_realizations == 0 || sim.queue_realizations == 0 {
            return Err(ConfigError::OutOfRange {
                field: "sim",
                requirement: "positive horizon and realization counts",
                value: 0.0,
            }
            .into());
        }
        Ok(Resolved {
            link,
            field,
            scheme,
            queue: QueueSettings {
                horizon: sim.horizon_slots,
                warmup: (sim.horizon_slots as f64 * sim.warmup_fraction) as u64,
                window_radius: sim.window_radius_m,
            },
            meta_realizations: sim.meta_realizations,
            queue_realizations: sim.queue_realizations,
            seed: sim.seed,
        })
    }
}

fn merge(base: &mut toml::Value, path: &str, patch: toml::Value) -> Result<(), FileConfigError> {
    match (base, patch) {
        (toml::Value::Table(base), toml::Value::Table(patch)) => {
            for (k, v) in patch {
                let key = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                let slot = base
                    .get_mut(&k)
                    .ok_or_else(|| FileConfigError::UnknownKey(key.clone()))?;
                merge(slot, &key, v)?;
            }
            Ok(())
        }
        (slot, patch) => {
            let coerced = coerce(path, slot, patch)?;
            *slot = coerced;
            Ok(())
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Keeps the type of the field being replaced; integers widen to floats.
fn coerce(key: &str, current: &toml::Value, new: toml::Value) -> Result<toml::Value, FileConfigError> {
    use toml::Value as V;
    let mismatch = |expected: &'static str, new: &V| FileConfigError::OverrideType {
        key: key.to_string(),
        expected,
        value: new.to_string(),
    };
    match (current, new) {
        (V::Float(_), V::Integer(i)) => Ok(V::Float(i as f64)),
        (V::Float(_), v @ V::Float(_)) => Ok(v),
        (V::Float(_), v) => Err(mismatch("a number", &v)),
        (V::Integer(_), v @ V::Integer(_)) => Ok(v),
        (V::Integer(_), v) => Err(mismatch("an integer", &v)),
        (V::String(_), v @ V::String(_)) => Ok(v),
        (V::String(_), v) => Err(mismatch("a string", &v)),
        (V::Boolean(_), v @ V::Boolean(_)) => Ok(v),
        (V::Boolean(_), v) => Err(mismatch("a boolean", &v)),
        (V::Array(cur), V::Array(items)) => {
            let template = cur.first().cloned().unwrap_or(V::Float(0.0));
            let items = items
                .into_iter()
                .map(|item| coerce(key, &template, item))
                .collect::<Result<_, _>>()?;
            Ok(V::Array(items))
        }
        (V::Array(_), v) => Err(mismatch("an array", &v)),
        (_, v) => Err(mismatch("a scalar", &v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_si() {
        let r = FileConfig::defaults(50.0).resolve().unwrap();
        let (link, field, scheme) = default_config(50e-3);
        assert_eq!(r.link, link);
        assert_eq!(r.field.density, field.density);
        assert_eq!(r.field.powers, field.powers);
        assert_eq!(r.scheme, scheme);
        assert_eq!(r.queue.warmup, 100_000);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = FileConfig::defaults(10.0);
        let back: FileConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_merges_over_base() {
        let base = FileConfig::defaults(50.0);
        let cfg = FileConfig::merge_toml(
            &base,
            "[link]\ntx_power_mw = 10\n[scheme]\nkind = \"static\"\nstatic_rate = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.link.tx_power_mw, 10.0);
        assert_eq!(cfg.link.packet_size_bytes, 40);
        assert_eq!(cfg.resolve().unwrap().scheme.kind, SchemeKind::Static(3));
        assert!(matches!(
            FileConfig::merge_toml(&base, "[link]\npower = 3\n"),
            Err(FileConfigError::UnknownKey(k)) if k == "link.power"
        ));
    }

    #[test]
    fn overrides_are_type_checked() {
        let cfg = FileConfig::defaults(50.0);
        let c = cfg.apply_override("link.packet_size_bytes=50").unwrap();
        assert_eq!(c.link.packet_size_bytes, 50);
        let c = cfg.apply_override("field.density_per_km2 = 0").unwrap();
        assert_eq!(c.field.density_per_km2, 0.0);
        let c = cfg.apply_override("scheme.kind=static").unwrap();
        assert_eq!(c.scheme.kind, "static");
        let c = cfg.apply_override("field.activities=[1, 0.5, 0]").unwrap();
        assert_eq!(c.field.activities, vec![1.0, 0.5, 0.0]);
        assert!(matches!(
            cfg.apply_override("link.mtu=3"),
            Err(FileConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_override("link=3"),
            Err(FileConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_override("link.num_rates=2.5"),
            Err(FileConfigError::OverrideType { .. })
        ));
        assert!(matches!(
            cfg.apply_override("link.num_rates"),
            Err(FileConfigError::OverrideSyntax(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = FileConfig::defaults(50.0);
        for bad in [
            "link.arrival_prob=1.5",
            "link.num_rates=30",
            "scheme.kind=adaptive",
            "sim.warmup_fraction=1",
        ] {
            let c = cfg.apply_override(bad).unwrap();
            assert!(c.resolve().is_err(), "{bad}");
        }
    }
}
