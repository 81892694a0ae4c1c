//! Run configuration: a named preset, then an optional TOML or JSON file,
//! then individual command-line overrides.

use std::fs;
use std::path::Path;

use amphase::scattering::Method;
use amphase::{IntegrationSettings, PotentialModel};
use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Multi-well cells in a repulsive surrounding, `(V0, D) = (-0.5, -0.22)`.
    #[default]
    RefA,
    /// Multi-barrier cells in an attractive surrounding, `(V0, D) = (0.5, 0.15)`.
    RefB,
}

impl Preset {
    pub fn model(self) -> PotentialModel {
        match self {
            Preset::RefA => PotentialModel::repulsive_reference(10),
            Preset::RefB => PotentialModel::attractive_reference(10),
        }
    }
}

/// `Lambda` route for scans; `auto` is the intrinsic route with the matrix
/// power at band edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Full,
    #[value(name = "matrix_power")]
    MatrixPower,
    Direct,
    Intrinsic,
    General,
}

impl MethodChoice {
    pub fn forced(self) -> Option<Method> {
        match self {
            MethodChoice::Auto => None,
            MethodChoice::Full => Some(Method::Full),
            MethodChoice::MatrixPower => Some(Method::MatrixPower),
            MethodChoice::Direct => Some(Method::Direct),
            MethodChoice::Intrinsic => Some(Method::Intrinsic),
            MethodChoice::General => Some(Method::General),
        }
    }
}

/// Optional settings shared by config files and command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    /// Reference model the other settings start from.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Cell strength V0.
    #[arg(long, allow_negative_numbers = true)]
    pub v0: Option<f64>,
    /// Exterior extreme energy D.
    #[arg(long, allow_negative_numbers = true)]
    pub d: Option<f64>,
    /// Number of period cells.
    #[arg(long)]
    pub n: Option<usize>,
    /// Even cell exponent q.
    #[arg(long)]
    pub q: Option<u32>,
    /// Lower end of the energy range.
    #[arg(long)]
    pub e_min: Option<f64>,
    /// Upper end of the energy range.
    #[arg(long)]
    pub e_max: Option<f64>,
    /// Number of grid energies.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodChoice>,
    /// Relative tolerance of the amplitude integrations.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Absolute tolerance of the amplitude integrations.
    #[arg(long)]
    pub abs_tol: Option<f64>,
}

impl Overrides {
    /// Reads a config file; `.json` files are JSON, everything else TOML.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            preset: other.preset.or(self.preset),
            v0: other.v0.or(self.v0),
            d: other.d.or(self.d),
            n: other.n.or(self.n),
            q: other.q.or(self.q),
            e_min: other.e_min.or(self.e_min),
            e_max: other.e_max.or(self.e_max),
            points: other.points.or(self.points),
            method: other.method.or(self.method),
            rel_tol: other.rel_tol.or(self.rel_tol),
            abs_tol: other.abs_tol.or(self.abs_tol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: PotentialModel,
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
    pub method: MethodChoice,
    pub settings: IntegrationSettings,
}

impl RunConfig {
    pub const DEFAULT_E_MIN: f64 = 0.01;
    pub const DEFAULT_E_MAX: f64 = 2.1;
    pub const DEFAULT_POINTS: usize = 2000;

    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self> {
        let layered = match file {
            Some(path) => Overrides::from_file(path)?.merged(flags),
            None => flags,
        };
        Self::from_overrides(&layered)
    }

    pub fn from_overrides(o: &Overrides) -> Result<Self> {
        let base = o.preset.unwrap_or_default().model();
        let model = PotentialModel {
            v0: o.v0.unwrap_or(base.v0),
            d: o.d.unwrap_or(base.d),
            n: o.n.unwrap_or(base.n),
            q: o.q.unwrap_or(base.q),
        };
        let defaults = IntegrationSettings::default();
        let config = RunConfig {
            model,
            e_min: o.e_min.unwrap_or(Self::DEFAULT_E_MIN),
            e_max: o.e_max.unwrap_or(Self::DEFAULT_E_MAX),
            points: o.points.unwrap_or(Self::DEFAULT_POINTS),
            method: o.method.unwrap_or_default(),
            settings: IntegrationSettings {
                rel_tol: o.rel_tol.unwrap_or(defaults.rel_tol),
                abs_tol: o.abs_tol.unwrap_or(defaults.abs_tol),
                ..defaults
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.settings.validate()?;
        if !(self.e_min > 0.0 && self.e_max > self.e_min && self.e_max.is_finite()) {
            bail!("energy range ({}, {}) must satisfy 0 < e_min < e_max", self.e_min, self.e_max);
        }
        if self.points < 2 {
            bail!("points = {} must be at least 2", self.points);
        }
        Ok(())
    }

    /// Evenly spaced energies including both ends.
    pub fn energies(&self) -> Vec<f64> {
        let step = (self.e_max - self.e_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.e_min + step * i as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_reference_models() {
        let a = RunConfig::from_overrides(&Overrides::default()).unwrap();
        assert_eq!(a.model, PotentialModel::repulsive_reference(10));
        let b = RunConfig::from_overrides(&Overrides {
            preset: Some(Preset::RefB),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(b.model, PotentialModel::attractive_reference(10));
        assert_eq!(b.points, 2000);
    }

    #[test]
    fn later_layers_win() {
        let file = Overrides {
            preset: Some(Preset::RefB),
            n: Some(4),
            points: Some(10),
            ..Default::default()
        };
        let flags = Overrides {
            n: Some(7),
            ..Default::default()
        };
        let c = RunConfig::from_overrides(&file.merged(flags)).unwrap();
        assert_eq!((c.model.v0, c.model.n, c.points), (0.5, 7, 10));
    }

    #[test]
    fn rejects_invalid_values() {
        for bad in [
            Overrides { q: Some(3), ..Default::default() },
            Overrides { e_min: Some(0.0), ..Default::default() },
            Overrides { e_min: Some(2.0), e_max: Some(1.0), ..Default::default() },
            Overrides { points: Some(1), ..Default::default() },
            Overrides { rel_tol: Some(0.5), ..Default::default() },
        ] {
            assert!(RunConfig::from_overrides(&bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn parses_toml_and_json() {
        let dir = std::env::temp_dir();
        let toml_path = dir.join(format!("amphase-config-{}.toml", std::process::id()));
        let json_path = dir.join(format!("amphase-config-{}.json", std::process::id()));
        fs::write(&toml_path, "preset = \"ref-b\"\nn = 3\nmethod = \"matrix_power\"\n").unwrap();
        fs::write(&json_path, r#"{"preset": "ref-b", "n": 3, "method": "matrix_power"}"#).unwrap();
        let a = Overrides::from_file(&toml_path).unwrap();
        let b = Overrides::from_file(&json_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.method, Some(MethodChoice::MatrixPower));
        fs::write(&toml_path, "nn = 3\n").unwrap();
        assert!(Overrides::from_file(&toml_path).is_err());
        fs::remove_file(toml_path).unwrap();
        fs::remove_file(json_path).unwrap();
    }

    #[test]
    fn energy_grid_spans_range() {
        let c = RunConfig::from_overrides(&Overrides::default()).unwrap();
        let e = c.energies();
        assert_eq!(e.len(), 2000);
        assert_eq!(e[0], 0.01);
        assert!((e[1999] - 2.1).abs() < 1e-12);
    }
}
