//! Run configuration: a strict TOML document with nested sections.
//!
//! Unknown keys are hard errors, every constraint violation names the field,
//! and a parsed config is a plain value that can be hashed for provenance.
//!
//! Minimal document:
//!
//! ```toml
//! [model]
//! n = 3
//! g = 1.0
//!
//! [grid]
//! t_end = 100.0
//! ```
//!
//! Defaults: dt = 1e-3, one replica, seed 0, stationary initial condition,
//! burn_in = 10% of t_end, thin = 1.0.

use crate::dynamics::SimGrid;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_THIN: f64 = 1.0;

/// Initial condition of each replica.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitCondition {
    /// Draw (v, z) from the analytic stationary law, one draw per replica.
    Stationary,
    /// Fixed starting point for every replica.
    Point { v: f64, z: Vec<f64> },
    /// Initial positions for the unranked simulator (inert particle first).
    Unranked { x: Vec<f64> },
}

/// The validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub g: f64,
    pub grid: SimGridConfig,
    pub replicas: usize,
    pub base_seed: u64,
    pub init: InitCondition,
    pub outputs: OutputsConfig,
    pub burn_in: f64,
    pub thin: f64,
}

/// Grid parameters as configured (validated; convertible to [`SimGrid`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimGridConfig {
    pub dt: f64,
    pub t_end: f64,
}

/// Parameters of the parameterized outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputsConfig {
    /// Output kinds requested when running the full config.
    pub kinds: Vec<String>,
    /// Level for the hitting-time output (defaults to 4g).
    pub hitting_level: Option<f64>,
    /// Slice times for the decay output.
    pub decay_slices: Vec<f64>,
    /// Keep every k-th row in trajectory CSV output.
    pub csv_stride: usize,
}

pub const OUTPUT_KINDS: &[&str] = &[
    "trajectory_csv",
    "lln",
    "stationary",
    "ordering",
    "hitting",
    "decay",
];

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams> {
        match &self.init {
            InitCondition::Point { v, z } => ModelParams::new(self.n, self.g, *v, z.clone()),
            // placeholder start; replica initial states are drawn separately
            _ => ModelParams::new(self.n, self.g, 0.0, vec![0.0; self.n]),
        }
    }

    pub fn sim_grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.grid.dt, self.grid.t_end)
    }
}

// ---- raw (serde) layer ----

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    grid: RawGrid,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    init: Option<RawInit>,
    #[serde(default)]
    outputs: Option<RawOutputs>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    n: usize,
    g: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default)]
    dt: Option<f64>,
    t_end: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(default)]
    replicas: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    burn_in: Option<f64>,
    #[serde(default)]
    thin: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInit {
    kind: String,
    #[serde(default)]
    v: Option<f64>,
    #[serde(default)]
    z: Option<Vec<f64>>,
    #[serde(default)]
    x: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    #[serde(default)]
    kinds: Vec<String>,
    #[serde(default)]
    hitting_level: Option<f64>,
    #[serde(default)]
    decay_slices: Option<Vec<f64>>,
    #[serde(default)]
    csv_stride: Option<usize>,
}

/// Parse and fully validate a configuration document.
pub fn validate_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    if raw.model.n == 0 {
        return Err(Error::Config("model.n must be at least 1".into()));
    }
    if !raw.model.g.is_finite() || raw.model.g <= 0.0 {
        return Err(Error::Config("model.g must be positive and finite".into()));
    }
    let dt = raw.grid.dt.unwrap_or(DEFAULT_DT);
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::Config("grid.dt must be positive".into()));
    }
    if raw.grid.t_end < dt {
        return Err(Error::Config("grid.t_end must be at least grid.dt".into()));
    }
    SimGrid::new(dt, raw.grid.t_end).map_err(|e| Error::Config(format!("grid: {e}")))?;

    let replicas = raw.run.replicas.unwrap_or(1);
    if replicas == 0 {
        return Err(Error::Config("run.replicas must be at least 1".into()));
    }
    let burn_in = raw.run.burn_in.unwrap_or(0.1 * raw.grid.t_end);
    if burn_in < 0.0 {
        return Err(Error::Config("run.burn_in must be nonnegative".into()));
    }
    if burn_in >= raw.grid.t_end {
        return Err(Error::Config("run.burn_in must be below grid.t_end".into()));
    }
    let thin = raw.run.thin.unwrap_or(DEFAULT_THIN);
    if !thin.is_finite() || thin <= 0.0 {
        return Err(Error::Config("run.thin must be positive".into()));
    }

    let n = raw.model.n;
    let init = match raw.init {
        None => InitCondition::Stationary,
        Some(raw_init) => match raw_init.kind.as_str() {
            "stationary" => {
                if raw_init.v.is_some() || raw_init.z.is_some() || raw_init.x.is_some() {
                    return Err(Error::Config(
                        "init.kind = \"stationary\" takes no v/z/x fields".into(),
                    ));
                }
                InitCondition::Stationary
            }
            "point" => {
                let v = raw_init.v.ok_or_else(|| {
                    Error::Config("init.v is required for kind = \"point\"".into())
                })?;
                let z = raw_init.z.ok_or_else(|| {
                    Error::Config("init.z is required for kind = \"point\"".into())
                })?;
                if raw_init.x.is_some() {
                    return Err(Error::Config(
                        "init.x is not valid for kind = \"point\"".into(),
                    ));
                }
                if z.len() != n {
                    return Err(Error::Config(format!(
                        "init.z must have model.n = {n} components, got {}",
                        z.len()
                    )));
                }
                if z.iter().any(|zi| *zi < 0.0) {
                    return Err(Error::Config(
                        "init.z components must be nonnegative".into(),
                    ));
                }
                InitCondition::Point { v, z }
            }
            "unranked" => {
                let x = raw_init.x.ok_or_else(|| {
                    Error::Config("init.x is required for kind = \"unranked\"".into())
                })?;
                if raw_init.v.is_some() || raw_init.z.is_some() {
                    return Err(Error::Config(
                        "init.v/init.z are not valid for kind = \"unranked\"".into(),
                    ));
                }
                if x.len() != n + 1 {
                    return Err(Error::Config(format!(
                        "init.x must have model.n + 1 = {} components, got {}",
                        n + 1,
                        x.len()
                    )));
                }
                if x.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::Config("init.x must be sorted ascending".into()));
                }
                InitCondition::Unranked { x }
            }
            other => {
                return Err(Error::Config(format!(
                    "init.kind must be one of stationary/point/unranked, got \"{other}\""
                )))
            }
        },
    };

    let outputs = match raw.outputs {
        None => OutputsConfig {
            kinds: Vec::new(),
            hitting_level: None,
            decay_slices: Vec::new(),
            csv_stride: 1,
        },
        Some(raw_out) => {
            for kind in &raw_out.kinds {
                if !OUTPUT_KINDS.contains(&kind.as_str()) {
                    return Err(Error::Config(format!(
                        "outputs.kinds entry \"{kind}\" is not one of {OUTPUT_KINDS:?}"
                    )));
                }
            }
            if let Some(level) = raw_out.hitting_level {
                if !level.is_finite() {
                    return Err(Error::Config(
                        "outputs.hitting_level must be finite".into(),
                    ));
                }
            }
            let decay_slices = raw_out.decay_slices.unwrap_or_default();
            if decay_slices.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(
                    "outputs.decay_slices must be strictly increasing".into(),
                ));
            }
            if decay_slices.iter().any(|t| *t <= 0.0 || *t > raw.grid.t_end) {
                return Err(Error::Config(
                    "outputs.decay_slices must lie in (0, grid.t_end]".into(),
                ));
            }
            let csv_stride = raw_out.csv_stride.unwrap_or(1);
            if csv_stride == 0 {
                return Err(Error::Config("outputs.csv_stride must be at least 1".into()));
            }
            OutputsConfig {
                kinds: raw_out.kinds,
                hitting_level: raw_out.hitting_level,
                decay_slices,
                csv_stride,
            }
        }
    };

    Ok(RunConfig {
        n,
        g: raw.model.g,
        grid: SimGridConfig {
            dt,
            t_end: raw.grid.t_end,
        },
        replicas,
        base_seed: raw.run.seed.unwrap_or(0),
        init,
        outputs,
        burn_in,
        thin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[model]
n = 3
g = 1.0

[grid]
t_end = 100.0
";

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = validate_config(MINIMAL).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.grid.dt, 1e-3);
        assert_eq!(cfg.replicas, 1);
        assert_eq!(cfg.base_seed, 0);
        assert_eq!(cfg.burn_in, 10.0); // 10% of t_end
        assert_eq!(cfg.thin, 1.0);
        assert_eq!(cfg.init, InitCondition::Stationary);
    }

    #[test]
    fn negative_g_rejected_naming_field() {
        let doc = MINIMAL.replace("g = 1.0", "g = -1.0");
        let err = validate_config(&doc).unwrap_err().to_string();
        assert!(err.contains("g"), "error does not name g: {err}");
    }

    #[test]
    fn unknown_key_rejected_naming_it() {
        let doc = format!("{MINIMAL}\n[run]\ngamma = 0.5\n");
        let err = validate_config(&doc).unwrap_err().to_string();
        assert!(err.contains("gamma"), "error does not name gamma: {err}");
    }

    #[test]
    fn point_init_roundtrip_and_errors() {
        let doc = format!("{MINIMAL}\n[init]\nkind = \"point\"\nv = 0.5\nz = [1.0, 2.0, 3.0]\n");
        let cfg = validate_config(&doc).unwrap();
        assert_eq!(
            cfg.init,
            InitCondition::Point {
                v: 0.5,
                z: vec![1.0, 2.0, 3.0]
            }
        );

        let bad = format!("{MINIMAL}\n[init]\nkind = \"point\"\nv = 0.5\nz = [1.0]\n");
        assert!(validate_config(&bad).is_err());

        let bad = format!("{MINIMAL}\n[init]\nkind = \"warp\"\n");
        let err = validate_config(&bad).unwrap_err().to_string();
        assert!(err.contains("warp"));
    }

    #[test]
    fn unranked_init_validation() {
        let doc = format!("{MINIMAL}\n[init]\nkind = \"unranked\"\nx = [0.0, 0.5, 1.0, 1.5]\n");
        let cfg = validate_config(&doc).unwrap();
        assert!(matches!(cfg.init, InitCondition::Unranked { .. }));

        let bad = format!("{MINIMAL}\n[init]\nkind = \"unranked\"\nx = [0.0, 1.0, 0.5, 1.5]\n");
        assert!(validate_config(&bad).is_err());
    }

    #[test]
    fn outputs_validation() {
        let doc = format!(
            "{MINIMAL}\n[outputs]\nkinds = [\"lln\", \"hitting\"]\nhitting_level = 4.0\ndecay_slices = [1.0, 5.0, 10.0]\n"
        );
        let cfg = validate_config(&doc).unwrap();
        assert_eq!(cfg.outputs.kinds, vec!["lln", "hitting"]);
        assert_eq!(cfg.outputs.hitting_level, Some(4.0));

        let bad = format!("{MINIMAL}\n[outputs]\nkinds = [\"plot\"]\n");
        let err = validate_config(&bad).unwrap_err().to_string();
        assert!(err.contains("plot"));

        let bad = format!("{MINIMAL}\n[outputs]\ndecay_slices = [5.0, 1.0]\n");
        assert!(validate_config(&bad).is_err());
    }

    #[test]
    fn burn_in_must_precede_horizon() {
        let doc = format!("{MINIMAL}\n[run]\nburn_in = 100.0\n");
        assert!(validate_config(&doc).is_err());
        let doc = format!("{MINIMAL}\n[run]\nburn_in = 99.0\n");
        assert!(validate_config(&doc).is_ok());
    }
}
