//! Flat key-value configuration with sections mirroring the module names.
//!
//! Format: `[section]` headers, `key = value` lines, `#` comments, blank
//! lines ignored. Every key has a documented default; unknown keys are
//! errors. CLI `--override section.key=value` entries win over file values.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dynamics::Scheme;
use crate::kernel::{InteractionSign, KernelSpec};
use crate::meanfield::TransportInterp;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MissingEquals { line: usize, text: String },
    #[error("line {line}: malformed section header `{text}`")]
    BadSection { line: usize, text: String },
    #[error("line {line}: key `{key}` appears before any [section]")]
    KeyOutsideSection { line: usize, key: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}` as {kind}")]
    BadValue {
        key: String,
        value: String,
        kind: &'static str,
    },
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("override must look like section.key=value, got `{0}`")]
    BadOverride(String),
}

/// Parse the flat key-value format into `section.key -> value`.
pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').map(str::trim);
            match name {
                Some(n) if !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => {
                    section = Some(n.to_string());
                }
                _ => {
                    return Err(ConfigError::BadSection {
                        line: lineno + 1,
                        text: line.to_string(),
                    })
                }
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::MissingEquals {
                line: lineno + 1,
                text: line.to_string(),
            });
        };
        let key = key.trim();
        let Some(sec) = &section else {
            return Err(ConfigError::KeyOutsideSection {
                line: lineno + 1,
                key: key.to_string(),
            });
        };
        map.insert(format!("{sec}.{key}"), value.trim().to_string());
    }
    Ok(map)
}

/// Parse one `section.key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let Some((key, value)) = s.split_once('=') else {
        return Err(ConfigError::BadOverride(s.to_string()));
    };
    let key = key.trim();
    if key.is_empty() || !key.contains('.') {
        return Err(ConfigError::BadOverride(s.to_string()));
    }
    Ok((key.to_string(), value.trim().to_string()))
}

/// Fully resolved settings for one tool invocation.
#[derive(Debug, Clone)]
pub struct LabConfig {
    // [kernel]
    pub sign: InteractionSign,
    pub eta: f64,
    // [dynamics]
    pub dt: f64,
    pub scheme: Scheme,
    pub snapshot_stride: usize,
    pub series_stride: usize,
    // [meanfield]
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nx: usize,
    pub nv: usize,
    pub pde_dt: f64,
    pub pde_snapshot_stride: usize,
    pub boundary_tol: f64,
    pub interp: TransportInterp,
    // [experiments]
    pub sigma_x: f64,
    pub sigma_v: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub t: f64,
    pub lambda: f64,
    pub epsilon_grid: Vec<f64>,
    pub concentration_n: usize,
    pub concentration_replicas: usize,
    pub moment_copies: usize,
    pub w1_n_list: Vec<usize>,
    pub w1_replicas: usize,
    pub cauchy_eta: f64,
    pub cauchy_eta_prime: f64,
    pub cauchy_n: usize,
    pub cauchy_replicas: usize,
    pub lambda_check_n: usize,
    pub lambda_check_replicas: usize,
    pub gamma_check_n: usize,
    pub gamma_check_replicas: usize,
    pub binomial_replicas: usize,
    pub rope_samples: usize,
    // [run]
    pub seed: u64,
    pub threads: usize,
    pub out_dir: String,
}

impl Default for LabConfig {
    /// Smoke-scale defaults: every command completes in seconds.
    fn default() -> Self {
        LabConfig {
            sign: InteractionSign::Repulsive,
            eta: 0.0,
            dt: 2e-3,
            scheme: Scheme::SplittingExactOu,
            snapshot_stride: 0,
            series_stride: 0,
            x_min: -8.0,
            x_max: 8.0,
            v_min: -8.0,
            v_max: 8.0,
            nx: 96,
            nv: 96,
            pde_dt: 4e-3,
            pde_snapshot_stride: 25,
            boundary_tol: 1e-6,
            interp: TransportInterp::Cubic,
            sigma_x: 1.0,
            sigma_v: 1.0,
            n_list: vec![32, 64],
            replicas: 8,
            t: 0.5,
            lambda: 1.0,
            epsilon_grid: Vec::new(),
            concentration_n: 64,
            concentration_replicas: 64,
            moment_copies: 20_000,
            w1_n_list: vec![64, 128, 256],
            w1_replicas: 8,
            cauchy_eta: 0.2,
            cauchy_eta_prime: 0.1,
            cauchy_n: 64,
            cauchy_replicas: 16,
            lambda_check_n: 64,
            lambda_check_replicas: 200,
            gamma_check_n: 64,
            gamma_check_replicas: 50,
            binomial_replicas: 20_000,
            rope_samples: 100_000,
            seed: 0,
            threads: 0,
            out_dir: "out".to_string(),
        }
    }
}

fn parse_typed<T: std::str::FromStr>(
    key: &str,
    value: &str,
    kind: &'static str,
) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        kind,
    })
}

fn parse_list<T: std::str::FromStr>(
    key: &str,
    value: &str,
    kind: &'static str,
) -> Result<Vec<T>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| parse_typed::<T>(key, part.trim(), kind))
        .collect()
}

impl LabConfig {
    /// Apply parsed key-value pairs on top of the current settings.
    pub fn apply_kv(&mut self, kv: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (key, value) in kv {
            self.apply_one(key, value)?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let kv = parse_config_str(text)?;
        let mut cfg = LabConfig::default();
        cfg.apply_kv(&kv)?;
        Ok(cfg)
    }

    fn apply_one(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "kernel.sign" => {
                self.sign = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    kind: "kernel sign",
                })?
            }
            "kernel.eta" => self.eta = parse_typed(key, value, "float")?,
            "dynamics.dt" => self.dt = parse_typed(key, value, "float")?,
            "dynamics.scheme" => {
                self.scheme = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    kind: "scheme",
                })?
            }
            "dynamics.snapshot_stride" => {
                self.snapshot_stride = parse_typed(key, value, "integer")?
            }
            "dynamics.series_stride" => self.series_stride = parse_typed(key, value, "integer")?,
            "meanfield.x_min" => self.x_min = parse_typed(key, value, "float")?,
            "meanfield.x_max" => self.x_max = parse_typed(key, value, "float")?,
            "meanfield.v_min" => self.v_min = parse_typed(key, value, "float")?,
            "meanfield.v_max" => self.v_max = parse_typed(key, value, "float")?,
            "meanfield.nx" => self.nx = parse_typed(key, value, "integer")?,
            "meanfield.nv" => self.nv = parse_typed(key, value, "integer")?,
            "meanfield.dt" => self.pde_dt = parse_typed(key, value, "float")?,
            "meanfield.snapshot_stride" => {
                self.pde_snapshot_stride = parse_typed(key, value, "integer")?
            }
            "meanfield.boundary_tol" => self.boundary_tol = parse_typed(key, value, "float")?,
            "meanfield.interp" => {
                self.interp = match value {
                    "cubic" => TransportInterp::Cubic,
                    "linear" => TransportInterp::Linear,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            kind: "interpolation (cubic|linear)",
                        })
                    }
                }
            }
            "experiments.f0" => {
                if value != "gaussian" {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: value.into(),
                        kind: "initial family (gaussian)",
                    });
                }
            }
            "experiments.sigma_x" => self.sigma_x = parse_typed(key, value, "float")?,
            "experiments.sigma_v" => self.sigma_v = parse_typed(key, value, "float")?,
            "experiments.n_list" => self.n_list = parse_list(key, value, "integer")?,
            "experiments.replicas" => self.replicas = parse_typed(key, value, "integer")?,
            "experiments.t" => self.t = parse_typed(key, value, "float")?,
            "experiments.lambda" => self.lambda = parse_typed(key, value, "float")?,
            "experiments.epsilon_grid" => self.epsilon_grid = parse_list(key, value, "float")?,
            "experiments.concentration_n" => {
                self.concentration_n = parse_typed(key, value, "integer")?
            }
            "experiments.concentration_replicas" => {
                self.concentration_replicas = parse_typed(key, value, "integer")?
            }
            "experiments.moment_copies" => self.moment_copies = parse_typed(key, value, "integer")?,
            "experiments.w1_n_list" => self.w1_n_list = parse_list(key, value, "integer")?,
            "experiments.w1_replicas" => self.w1_replicas = parse_typed(key, value, "integer")?,
            "experiments.cauchy_eta" => self.cauchy_eta = parse_typed(key, value, "float")?,
            "experiments.cauchy_eta_prime" => {
                self.cauchy_eta_prime = parse_typed(key, value, "float")?
            }
            "experiments.cauchy_n" => self.cauchy_n = parse_typed(key, value, "integer")?,
            "experiments.cauchy_replicas" => {
                self.cauchy_replicas = parse_typed(key, value, "integer")?
            }
            "experiments.lambda_check_n" => {
                self.lambda_check_n = parse_typed(key, value, "integer")?
            }
            "experiments.lambda_check_replicas" => {
                self.lambda_check_replicas = parse_typed(key, value, "integer")?
            }
            "experiments.gamma_check_n" => self.gamma_check_n = parse_typed(key, value, "integer")?,
            "experiments.gamma_check_replicas" => {
                self.gamma_check_replicas = parse_typed(key, value, "integer")?
            }
            "experiments.binomial_replicas" => {
                self.binomial_replicas = parse_typed(key, value, "integer")?
            }
            "experiments.rope_samples" => self.rope_samples = parse_typed(key, value, "integer")?,
            "run.seed" => self.seed = parse_typed(key, value, "u64")?,
            "run.threads" => self.threads = parse_typed(key, value, "integer")?,
            "run.out_dir" => self.out_dir = value.to_string(),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    fn require(&self, ok: bool, key: &str, reason: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                reason: reason.to_string(),
            })
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.require(self.eta >= 0.0 && self.eta.is_finite(), "kernel.eta", "must be >= 0")?;
        self.require(self.dt > 0.0 && self.dt.is_finite(), "dynamics.dt", "must be > 0")?;
        self.require(self.t > 0.0 && self.t.is_finite(), "experiments.t", "must be > 0")?;
        self.require(self.dt <= self.t, "dynamics.dt", "must be <= experiments.t")?;
        self.require(
            self.x_min < self.x_max && self.v_min < self.v_max,
            "meanfield.x_min",
            "domain bounds must be ordered",
        )?;
        self.require(self.nx >= 4 && self.nv >= 4, "meanfield.nx", "grid must be >= 4 cells")?;
        self.require(
            self.pde_dt > 0.0 && self.pde_dt <= crate::meanfield::MAX_PDE_DT,
            "meanfield.dt",
            "must lie in (0, 0.1]",
        )?;
        self.require(self.boundary_tol > 0.0, "meanfield.boundary_tol", "must be > 0")?;
        self.require(
            self.sigma_x > 0.0 && self.sigma_v > 0.0,
            "experiments.sigma_x",
            "must be > 0",
        )?;
        self.require(!self.n_list.is_empty(), "experiments.n_list", "must be non-empty")?;
        self.require(
            self.n_list.iter().all(|&n| n >= 2),
            "experiments.n_list",
            "every N must be >= 2",
        )?;
        self.require(self.replicas >= 1, "experiments.replicas", "must be >= 1")?;
        self.require(self.lambda > 0.0, "experiments.lambda", "must be > 0")?;
        self.require(
            self.epsilon_grid.iter().all(|&e| e > 0.0),
            "experiments.epsilon_grid",
            "entries must be > 0",
        )?;
        self.require(
            self.cauchy_eta > 0.0 && self.cauchy_eta_prime > 0.0,
            "experiments.cauchy_eta",
            "must be > 0",
        )?;
        Ok(())
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec {
            sign: self.sign,
            eta: self.eta,
        }
    }

    /// Echo of the resolved configuration, in config-key form.
    pub fn resolved_kv(&self) -> BTreeMap<String, String> {
        let join_usize =
            |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let join_f64 = |v: &[f64]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("kernel.sign".into(), self.sign.to_string());
        m.insert("kernel.eta".into(), self.eta.to_string());
        m.insert("dynamics.dt".into(), self.dt.to_string());
        m.insert(
            "dynamics.scheme".into(),
            match self.scheme {
                Scheme::SplittingExactOu => "splitting_exact_ou".into(),
                Scheme::EulerMaruyama => "euler_maruyama".to_string(),
            },
        );
        m.insert("dynamics.snapshot_stride".into(), self.snapshot_stride.to_string());
        m.insert("dynamics.series_stride".into(), self.series_stride.to_string());
        m.insert("meanfield.x_min".into(), self.x_min.to_string());
        m.insert("meanfield.x_max".into(), self.x_max.to_string());
        m.insert("meanfield.v_min".into(), self.v_min.to_string());
        m.insert("meanfield.v_max".into(), self.v_max.to_string());
        m.insert("meanfield.nx".into(), self.nx.to_string());
        m.insert("meanfield.nv".into(), self.nv.to_string());
        m.insert("meanfield.dt".into(), self.pde_dt.to_string());
        m.insert(
            "meanfield.snapshot_stride".into(),
            self.pde_snapshot_stride.to_string(),
        );
        m.insert("meanfield.boundary_tol".into(), self.boundary_tol.to_string());
        m.insert(
            "meanfield.interp".into(),
            match self.interp {
                TransportInterp::Cubic => "cubic".to_string(),
                TransportInterp::Linear => "linear".to_string(),
            },
        );
        m.insert("experiments.f0".into(), "gaussian".into());
        m.insert("experiments.sigma_x".into(), self.sigma_x.to_string());
        m.insert("experiments.sigma_v".into(), self.sigma_v.to_string());
        m.insert("experiments.n_list".into(), join_usize(&self.n_list));
        m.insert("experiments.replicas".into(), self.replicas.to_string());
        m.insert("experiments.t".into(), self.t.to_string());
        m.insert("experiments.lambda".into(), self.lambda.to_string());
        m.insert("experiments.epsilon_grid".into(), join_f64(&self.epsilon_grid));
        m.insert(
            "experiments.concentration_n".into(),
            self.concentration_n.to_string(),
        );
        m.insert(
            "experiments.concentration_replicas".into(),
            self.concentration_replicas.to_string(),
        );
        m.insert("experiments.moment_copies".into(), self.moment_copies.to_string());
        m.insert("experiments.w1_n_list".into(), join_usize(&self.w1_n_list));
        m.insert("experiments.w1_replicas".into(), self.w1_replicas.to_string());
        m.insert("experiments.cauchy_eta".into(), self.cauchy_eta.to_string());
        m.insert(
            "experiments.cauchy_eta_prime".into(),
            self.cauchy_eta_prime.to_string(),
        );
        m.insert("experiments.cauchy_n".into(), self.cauchy_n.to_string());
        m.insert(
            "experiments.cauchy_replicas".into(),
            self.cauchy_replicas.to_string(),
        );
        m.insert("experiments.lambda_check_n".into(), self.lambda_check_n.to_string());
        m.insert(
            "experiments.lambda_check_replicas".into(),
            self.lambda_check_replicas.to_string(),
        );
        m.insert("experiments.gamma_check_n".into(), self.gamma_check_n.to_string());
        m.insert(
            "experiments.gamma_check_replicas".into(),
            self.gamma_check_replicas.to_string(),
        );
        m.insert(
            "experiments.binomial_replicas".into(),
            self.binomial_replicas.to_string(),
        );
        m.insert("experiments.rope_samples".into(), self.rope_samples.to_string());
        m.insert("run.seed".into(), self.seed.to_string());
        m.insert("run.threads".into(), self.threads.to_string());
        m.insert("run.out_dir".into(), self.out_dir.clone());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_values() {
        let text = "# comment\n[kernel]\nsign = attractive\neta = 0.25\n\n[run]\nseed = 99\n";
        let kv = parse_config_str(text).unwrap();
        assert_eq!(kv.get("kernel.sign").unwrap(), "attractive");
        assert_eq!(kv.get("run.seed").unwrap(), "99");
        let cfg = LabConfig::from_text(text).unwrap();
        assert_eq!(cfg.sign, InteractionSign::Attractive);
        assert_eq!(cfg.eta, 0.25);
        assert_eq!(cfg.seed, 99);
    }

    #[test]
    fn config_round_trips_through_its_echo() {
        let cfg = LabConfig {
            n_list: vec![100, 200],
            lambda: 0.5,
            ..LabConfig::default()
        };
        let echo = cfg.resolved_kv();
        let mut text = String::new();
        for (k, v) in &echo {
            let (sec, key) = k.split_once('.').unwrap();
            text.push_str(&format!("[{sec}]\n{key} = {v}\n"));
        }
        let parsed = LabConfig::from_text(&text).unwrap();
        assert_eq!(parsed.resolved_kv(), echo);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            parse_config_str("[kernel\nsign = repulsive"),
            Err(ConfigError::BadSection { line: 1, .. })
        ));
        assert!(matches!(
            parse_config_str("[kernel]\nsign repulsive"),
            Err(ConfigError::MissingEquals { line: 2, .. })
        ));
        assert!(matches!(
            parse_config_str("sign = repulsive"),
            Err(ConfigError::KeyOutsideSection { .. })
        ));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            LabConfig::from_text("[kernel]\ncolour = blue"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            LabConfig::from_text("[dynamics]\ndt = soon"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            LabConfig::from_text("[dynamics]\ndt = -0.5"),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn override_parsing() {
        assert_eq!(
            parse_override("run.seed=7").unwrap(),
            ("run.seed".into(), "7".into())
        );
        assert_eq!(
            parse_override(" experiments.t = 2.0 ").unwrap(),
            ("experiments.t".into(), "2.0".into())
        );
        assert!(parse_override("seed").is_err());
        assert!(parse_override("seed=7").is_err());
    }
}
