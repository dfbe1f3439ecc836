//! `key = value` instance files.
//!
//! ```text
//! # sqrt(2) demo
//! q0 = 41
//! gamma = 0.98
//! lambda1 = 1
//! lambda2 = 1.4142135623730951
//! lambda3 = -2
//! epsilon_user = 0.05
//! ```
//!
//! `#` starts a comment. `lambda0` defaults to 0.5 and `eta` to 0.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use psd_core::params::{
    derive_parameters, feasible_box_check, validate_coefficients, CoefficientReport, Coefficients,
    GammaExponent, RunParameters,
};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_LAMBDA0: f64 = 0.5;

const KEYS: [&str; 8] = [
    "q0",
    "gamma",
    "lambda0",
    "lambda1",
    "lambda2",
    "lambda3",
    "eta",
    "epsilon_user",
];
const REQUIRED: [&str; 5] = ["q0", "gamma", "lambda1", "lambda2", "lambda3"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` (expected one of {})", KEYS.join(", "))]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
}

/// Hypotheses the instance fails, all of them at once.
#[derive(Debug, Error)]
#[error("instance violates {} hypothesis(es):\n  - {}", .violations.len(), .violations.join("\n  - "))]
pub struct HypothesisError {
    pub violations: Vec<String>,
}

/// Values as written in the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawConfig {
    pub q0: u64,
    pub gamma: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub eta: f64,
    pub epsilon_user: Option<f64>,
}

impl RawConfig {
    pub fn coefficients(&self) -> Coefficients {
        Coefficients::new(self.lambda1, self.lambda2, self.lambda3, self.eta)
    }
}

/// A config that passed every check.
#[derive(Debug, Clone)]
pub struct Instance {
    pub raw: RawConfig,
    pub coefficients: Coefficients,
    /// Sign-normalized form with `lambda1, lambda2 > 0 > lambda3`.
    pub canonical: Coefficients,
    pub report: CoefficientReport,
    pub params: RunParameters,
    pub warnings: Vec<String>,
}

pub fn parse_config_str(text: &str) -> Result<RawConfig, ConfigError> {
    let mut seen: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, found `{content}`") });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, found `{content}`") });
        }
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        };
        if let Some(&(first, _)) = seen.get(known) {
            return Err(ConfigError::Duplicate { line, key: key.to_string(), first });
        }
        seen.insert(known, (line, value));
    }
    let real = |key: &str| -> Result<Option<f64>, ConfigError> {
        seen.get(key)
            .map(|&(line, v)| {
                v.parse::<f64>().map_err(|_| ConfigError::Syntax {
                    line,
                    message: format!("`{key}` needs a real number, found `{v}`"),
                })
            })
            .transpose()
    };
    let q0 = seen
        .get("q0")
        .map(|&(line, v)| {
            v.parse::<u64>().map_err(|_| ConfigError::Syntax {
                line,
                message: format!("`q0` needs a non-negative integer, found `{v}`"),
            })
        })
        .transpose()?;
    let mut values = BTreeMap::new();
    for key in &KEYS[1..] {
        values.insert(*key, real(key)?);
    }
    for key in REQUIRED {
        if !seen.contains_key(key) {
            return Err(ConfigError::MissingKey(key));
        }
    }
    let get = |key: &str| values[key];
    Ok(RawConfig {
        q0: q0.unwrap_or_default(),
        gamma: get("gamma").unwrap_or_default(),
        lambda0: get("lambda0").unwrap_or(DEFAULT_LAMBDA0),
        lambda1: get("lambda1").unwrap_or_default(),
        lambda2: get("lambda2").unwrap_or_default(),
        lambda3: get("lambda3").unwrap_or_default(),
        eta: get("eta").unwrap_or(0.0),
        epsilon_user: get("epsilon_user"),
    })
}

pub fn read_config(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Run every hypothesis check and collect the failures into one report.
///
/// With `exploratory`, a `gamma` in `(0, 37/38]` is accepted with a warning
/// instead of being rejected.
pub fn validate(raw: RawConfig, exploratory: bool) -> Result<Instance, HypothesisError> {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    let gamma = match GammaExponent::new(raw.gamma) {
        Ok(g) if g.theorem_range() => Some(g),
        Ok(g) if exploratory => {
            warnings.push(format!(
                "gamma = {} is outside 37/38 < gamma < 1; results do not bear on the triple theorem",
                raw.gamma
            ));
            Some(g)
        }
        _ => {
            violations.push(format!("gamma = {} violates 37/38 < gamma < 1", raw.gamma));
            None
        }
    };
    if !(raw.lambda0 > 0.0 && raw.lambda0 < 1.0) {
        violations.push(format!("lambda0 = {} violates 0 < lambda0 < 1", raw.lambda0));
    }
    if raw.q0 < 2 {
        violations.push(format!("q0 = {} violates q0 >= 2", raw.q0));
    }
    if let Some(e) = raw.epsilon_user {
        if !(e.is_finite() && e > 0.0) {
            violations.push(format!("epsilon_user = {e} must be finite and positive"));
        }
    }

    let coefficients = raw.coefficients();
    let report = validate_coefficients(&coefficients);
    violations.extend(report.failures().into_iter().map(str::to_string));

    let params = match gamma {
        Some(g) if violations.is_empty() => {
            match derive_parameters(raw.q0, g, raw.lambda0, raw.epsilon_user) {
                Ok(p) => Some(p),
                Err(e) => {
                    violations.push(e.to_string());
                    None
                }
            }
        }
        _ => None,
    };

    match (params, report.canonical) {
        (Some(params), Some(canonical)) if violations.is_empty() => {
            if !feasible_box_check(&coefficients, params.lambda0, params.x, params.epsilon()) {
                warnings.push(
                    "no point of the box (lambda0 X, X]^3 has |form| < epsilon; the box integral B vanishes"
                        .to_string(),
                );
            }
            Ok(Instance {
                raw,
                coefficients,
                canonical: canonical.coefficients,
                report,
                params,
                warnings,
            })
        }
        _ => Err(HypothesisError { violations }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = "\
# demo
q0 = 70
gamma = 0.98
lambda1 = 1
lambda2 = 1.4142135623730951   # sqrt 2
lambda3 = -2
epsilon_user = 0.05
";

    #[test]
    fn parses_demo() {
        let c = parse_config_str(DEMO).unwrap();
        assert_eq!(c.q0, 70);
        assert_eq!(c.lambda0, DEFAULT_LAMBDA0);
        assert_eq!(c.eta, 0.0);
        assert_eq!(c.epsilon_user, Some(0.05));
        let inst = validate(c, false).unwrap();
        assert!(inst.warnings.is_empty());
        assert_eq!(inst.canonical, inst.coefficients);
    }

    #[test]
    fn syntax_error_has_line_number() {
        let err = parse_config_str("q0 = 70\ngamma 0.98\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 2, .. }), "{err}");
        let err = parse_config_str("q0 = seventy\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = parse_config_str("q0 = 70\nlambda4 = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { line: 2, .. }));
        let err = parse_config_str("q0 = 70\nq0 = 71\n").unwrap_err();
        assert!(matches!(err, ConfigError::Duplicate { line: 2, first: 1, .. }));
    }

    #[test]
    fn missing_lambda3() {
        let text = DEMO.replace("lambda3 = -2\n", "");
        let err = parse_config_str(&text).unwrap_err();
        assert!(matches!(err, ConfigError::MissingKey("lambda3")));
        assert!(err.to_string().contains("required key"));
    }

    #[test]
    fn gamma_rule_is_named() {
        let c = parse_config_str(&DEMO.replace("0.98", "1.2")).unwrap();
        let err = validate(c, false).unwrap_err();
        assert!(err.to_string().contains("37/38 < gamma < 1"));
    }

    #[test]
    fn violations_are_aggregated() {
        let text = DEMO
            .replace("gamma = 0.98", "gamma = 0.5")
            .replace("lambda3 = -2", "lambda3 = 3")
            .replace("q0 = 70", "q0 = 1");
        let err = validate(parse_config_str(&text).unwrap(), false).unwrap_err();
        assert_eq!(err.violations.len(), 3, "{err}");
    }

    #[test]
    fn exploratory_gamma_warns() {
        let c = parse_config_str(&DEMO.replace("0.98", "0.9")).unwrap();
        assert!(validate(c, false).is_err());
        let inst = validate(c, true).unwrap();
        assert_eq!(inst.warnings.len(), 1);
    }

    #[test]
    fn formula_epsilon_instance_is_too_small() {
        let text = DEMO.replace("epsilon_user = 0.05\n", "");
        let err = validate(parse_config_str(&text).unwrap(), false).unwrap_err();
        assert!(err.to_string().contains("not below H"));
    }

    #[test]
    fn negated_input_is_canonicalized() {
        let text = DEMO
            .replace("lambda1 = 1", "lambda1 = -1")
            .replace("lambda2 = 1.4142135623730951", "lambda2 = -1.4142135623730951")
            .replace("lambda3 = -2", "lambda3 = 2");
        let inst = validate(parse_config_str(&text).unwrap(), false).unwrap();
        assert_eq!(inst.canonical.lambdas(), [1.0, 1.4142135623730951, -2.0]);
    }
}
