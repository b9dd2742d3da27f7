use std::path::{Path, PathBuf};

use serde::Deserialize;
use tauquant::grid::GridSpec;
use tauquant::presets::Preset;
use tauquant::reference::GaussianDatum;
use tauquant::symbols::{HamiltonSymbol, LevySpec, Point};

use crate::CliError;

/// Largest tolerated datum mass outside the computational box.
pub const MAX_MASS_OUTSIDE: f64 = 1e-8;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LevyAtom {
    pub y: f64,
    pub w: f64,
}

/// Raw experiment file as read from JSON.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: String,
    pub tau: f64,
    pub t: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub n_sweep: Vec<usize>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    #[serde(default)]
    pub levy: Vec<LevyAtom>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<Experiment, CliError> {
        let preset: Preset = self.preset.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(CliError::Config(format!("tau = {} is outside [0, 1]", self.tau)));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(CliError::Config(format!("t = {} must be positive and finite", self.t)));
        }
        let grid = GridSpec::uniform(self.grid.min, self.grid.max, self.grid.points)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(n) = self.n_sweep.iter().find(|&&n| n == 0) {
            return Err(CliError::Config(format!("n_sweep entry {n} must be at least 1")));
        }
        let levy = if self.levy.is_empty() {
            None
        } else {
            let atoms = self.levy.iter().map(|a| (Point::<1>::new(a.y), a.w)).collect();
            Some(LevySpec::new(atoms).map_err(|e| CliError::Config(e.to_string()))?)
        };
        let datum = GaussianDatum::<1>::standard();
        let outside = datum.mass_outside(&grid);
        if outside > MAX_MASS_OUTSIDE {
            return Err(CliError::Config(format!(
                "initial datum has mass {outside:e} outside the grid (limit {MAX_MASS_OUTSIDE:e})"
            )));
        }
        Ok(Experiment {
            preset,
            symbol: preset.symbol(levy),
            tau: self.tau,
            t: self.t,
            grid,
            datum,
            n_sweep: self.n_sweep.clone(),
            mc: self.mc.clone(),
            out: self.out.clone(),
        })
    }
}

/// A validated experiment ready to run.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub preset: Preset,
    pub symbol: HamiltonSymbol<1>,
    pub tau: f64,
    pub t: f64,
    pub grid: GridSpec<1>,
    pub datum: GaussianDatum<1>,
    pub n_sweep: Vec<usize>,
    pub mc: Option<McConfig>,
    pub out: Option<PathBuf>,
}

impl Experiment {
    pub fn require_sweep(&self) -> Result<&[usize], CliError> {
        if self.n_sweep.is_empty() {
            return Err(CliError::Config("n_sweep must list at least one iteration count".into()));
        }
        Ok(&self.n_sweep)
    }

    pub fn require_mc(&self) -> Result<&McConfig, CliError> {
        self.mc
            .as_ref()
            .ok_or_else(|| CliError::Config("mc-validate needs an `mc` section".into()))
    }

    /// Grid node closest to the origin.
    pub fn origin_node(&self) -> Point<1> {
        let h = self.grid.spacing(0);
        let last = self.grid.points()[0] - 1;
        let i = ((-self.grid.lo()[0] / h).round().max(0.0) as usize).min(last);
        self.grid.node(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"preset": "sin-mass", "tau": 0.5, "t": 0.5,
        "grid": {"min": -20, "max": 20, "points": 512}, "n_sweep": [1, 2, 4]}"#;

    #[test]
    fn parses_and_validates_minimal_config() {
        let cfg = ExperimentConfig::from_json(BASE).unwrap();
        let exp = cfg.validate().unwrap();
        assert_eq!(exp.preset, Preset::SinMass);
        assert_eq!(exp.n_sweep, vec![1, 2, 4]);
        assert!(exp.mc.is_none() && exp.symbol.levy().is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("\"tau\"", "\"theta\": 1, \"tau\"");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(CliError::Config(_))));
        let nested = BASE.replace("\"points\": 512", "\"points\": 512, \"step\": 0.1");
        assert!(ExperimentConfig::from_json(&nested).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("\"tau\": 0.5", "\"tau\": 1.5"),
            ("\"t\": 0.5", "\"t\": -1"),
            ("\"sin-mass\"", "\"cubic\""),
            ("[1, 2, 4]", "[1, 0]"),
            ("\"min\": -20", "\"min\": -3"),
        ] {
            let cfg = ExperimentConfig::from_json(&BASE.replace(from, to)).unwrap();
            assert!(matches!(cfg.validate(), Err(CliError::Config(_))), "{from} -> {to}");
        }
    }

    #[test]
    fn levy_atoms_are_attached() {
        let text = BASE.replace("\"n_sweep\"", "\"levy\": [{\"y\": 1.0, \"w\": 0.5}], \"n_sweep\"");
        let exp = ExperimentConfig::from_json(&text).unwrap().validate().unwrap();
        assert_eq!(exp.symbol.jumps().atoms().len(), 1);
        let bad = BASE.replace("\"n_sweep\"", "\"levy\": [{\"y\": 1.0, \"w\": -0.5}], \"n_sweep\"");
        assert!(ExperimentConfig::from_json(&bad).unwrap().validate().is_err());
    }

    #[test]
    fn origin_node_is_nearest_to_zero() {
        let exp = ExperimentConfig::from_json(BASE).unwrap().validate().unwrap();
        let x = exp.origin_node()[0];
        assert!(x.abs() <= exp.grid.spacing(0) / 2.0 + 1e-12);
        assert!(exp.grid.node_index(&exp.origin_node()).is_some());
    }
}
