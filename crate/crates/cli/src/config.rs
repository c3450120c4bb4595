//! JSON game configs.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use ugc_equilibrium::model::sort_types;
use ugc_equilibrium::{ActionProfile, Error, GameConfig, Mechanism, TypeDistribution};

/// A config problem tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mechanism: String,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "R")]
    reward: f64,
    #[serde(rename = "K")]
    k: Option<usize>,
    c: f64,
    types: Option<Vec<f64>>,
    #[serde(default)]
    sort: bool,
    distribution: Option<TypeDistribution>,
    epsilon: Option<f64>,
    profile: Option<Vec<f64>>,
}

/// A validated config plus the optional per-command extras.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameConfig,
    /// Action floor for the perturbed dynamics.
    pub epsilon: Option<f64>,
    /// Profile to verify, indexed like the (sorted) types.
    pub profile: Option<ActionProfile>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses and validates a config document.
///
/// ```
/// let cfg = ugc_eq_cli::parse_config_str(r#"{"mechanism":"M4","N":2,"R":2,"c":1,"types":[1.0,1.0]}"#).unwrap();
/// assert_eq!(cfg.game.n_users(), 2);
/// ```
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::new("document", e.to_string()))?;
    let mechanism: Mechanism = raw.mechanism.parse().map_err(|e: String| ConfigError::new("mechanism", e))?;
    let game = match mechanism {
        Mechanism::M1 | Mechanism::M2 | Mechanism::M3 | Mechanism::M4 => {
            if raw.distribution.is_some() {
                return Err(ConfigError::new("distribution", "only partial-information mechanisms (M5-M7) take a distribution"));
            }
            let mut types = raw.types.ok_or_else(|| ConfigError::new("types", "required for M1-M4"))?;
            if types.len() != raw.n {
                return Err(ConfigError::new("types", format!("has {} entries but N = {}", types.len(), raw.n)));
            }
            if raw.sort {
                sort_types(&mut types);
            }
            GameConfig::full_information(mechanism, types, raw.reward, raw.c, raw.k).map_err(field_error)?
        }
        _ => {
            if raw.types.is_some() {
                return Err(ConfigError::new("types", "partial-information mechanisms draw types from `distribution`"));
            }
            let dist = match raw.distribution.unwrap_or(TypeDistribution::Uniform) {
                TypeDistribution::Uniform => TypeDistribution::Uniform,
                TypeDistribution::Piecewise { knots } => TypeDistribution::piecewise(knots).map_err(field_error)?,
            };
            GameConfig::partial_information(mechanism, raw.n, dist, raw.reward, raw.c, raw.k).map_err(field_error)?
        }
    };
    if let Some(eps) = raw.epsilon {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ConfigError::new("epsilon", "must be a positive number"));
        }
    }
    let profile = match raw.profile {
        Some(p) if p.len() != game.n_users() => {
            return Err(ConfigError::new("profile", format!("has {} entries but N = {}", p.len(), game.n_users())))
        }
        p => p.map(ActionProfile::new),
    };
    Ok(RunConfig { game, epsilon: raw.epsilon, profile })
}

fn field_error(e: Error) -> ConfigError {
    let field = match &e {
        Error::InvalidType { .. } | Error::UnsortedTypes { .. } | Error::LengthMismatch { .. } => "types",
        Error::InvalidParameter { name, .. } => name,
        Error::MissingTopK(_) => "K",
        Error::InvalidDistribution(_) => "distribution",
        Error::WrongMechanism { .. } => "mechanism",
        _ => "document",
    };
    ConfigError::new(field, e.to_string())
}
