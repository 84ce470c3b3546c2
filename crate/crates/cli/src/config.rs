use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use hklab::checkers::{CheckConfig, CheckKind, GridSpec, Profile, Thresholds};
use hklab::linalg::SolverPolicy;
use hklab::GeneratorSpec;

use crate::{CliError, CliResult};

/// Everything a `check` run depends on. Re-running from the recorded copy
/// reproduces the reports byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Graph to build when no graph file is given.
    pub generator: Option<GeneratorSpec>,
    pub grid: GridSpec,
    pub checkers: Vec<CheckKind>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub trials: usize,
    pub comparison_cap: usize,
    pub extreme_cap: usize,
    pub horizon: u64,
    pub mc_walks: usize,
    pub profile: Profile,
    pub green_spread: f64,
    pub resolvent_powers: Vec<usize>,
    pub solver: SolverPolicy,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CheckConfig::default();
        Self {
            generator: None,
            grid: GridSpec::default(),
            checkers: CheckKind::ALL.to_vec(),
            output_dir: PathBuf::from("reports"),
            seed: c.seed,
            trials: c.trials,
            comparison_cap: c.comparison_cap,
            extreme_cap: c.extreme_cap,
            horizon: c.horizon,
            mc_walks: c.mc_walks,
            profile: c.profile,
            green_spread: c.green_spread,
            resolvent_powers: c.resolvent_powers,
            solver: c.solver,
            thresholds: c.thresholds,
        }
    }
}

impl RunConfig {
    pub fn check_config(&self) -> CheckConfig {
        CheckConfig {
            seed: self.seed,
            trials: self.trials,
            comparison_cap: self.comparison_cap,
            extreme_cap: self.extreme_cap,
            horizon: self.horizon,
            mc_walks: self.mc_walks,
            profile: self.profile,
            green_spread: self.green_spread,
            resolvent_powers: self.resolvent_powers.clone(),
            solver: self.solver,
            thresholds: self.thresholds.clone(),
        }
    }
}

/// A command-line value addressed by its config key path, e.g.
/// `["grid", "base_radius"]`.
#[derive(Debug, Clone)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
}

impl Override {
    pub fn new(path: &str, value: Value) -> Self {
        Self {
            path: path.split('.').map(str::to_string).collect(),
            value,
        }
    }
}

fn lookup<'a>(root: &'a Value, path: &[String]) -> Option<&'a Value> {
    path.iter().try_fold(root, |v, key| v.get(key))
}

fn insert(root: &mut Value, path: &[String], value: Value) -> CliResult<()> {
    let (last, parents) = path.split_last().expect("override paths are nonempty");
    let mut node = root;
    for key in parents {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("config key {key} is not an object")))?;
        node = map.entry(key.clone()).or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("config key {last} has a non-object parent")))?
        .insert(last.clone(), value);
    Ok(())
}

/// Applies flag values under the file's keys. The file wins every conflict;
/// each overridden flag is reported in the returned warnings.
pub fn resolve(file: Option<Value>, flags: &[Override]) -> CliResult<(RunConfig, Vec<String>)> {
    let mut root = file.unwrap_or_else(|| Value::Object(Map::new()));
    if !root.is_object() {
        return Err(CliError::Config("config file must hold a JSON object".into()));
    }
    let mut warnings = Vec::new();
    for flag in flags {
        match lookup(&root, &flag.path) {
            Some(existing) if *existing != flag.value => warnings.push(format!(
                "flag for {} ignored: config file sets {}",
                flag.path.join("."),
                existing
            )),
            Some(_) => {}
            None => insert(&mut root, &flag.path, flag.value.clone())?,
        }
    }
    let config = serde_json::from_value(root)
        .map_err(|e| CliError::Config(format!("invalid run config: {e}")))?;
    Ok((config, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert_eq!(c.check_config(), CheckConfig::default());
    }

    #[test]
    fn file_wins_with_a_warning() {
        let file = json!({"seed": 5, "grid": {"base_radius": 2}});
        let flags = [
            Override::new("seed", json!(9)),
            Override::new("horizon", json!(100)),
            Override::new("grid.base_radius", json!(2)),
            Override::new("grid.max_radius", json!(16)),
        ];
        let (c, warnings) = resolve(Some(file), &flags).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.horizon, 100);
        assert_eq!(c.grid.base_radius, 2);
        assert_eq!(c.grid.max_radius, Some(16));
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("seed"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(resolve(Some(json!({"sede": 1})), &[]).is_err());
        assert!(resolve(Some(json!({"grid": {"radius": 1}})), &[]).is_err());
        assert!(resolve(Some(json!({"checkers": ["volume"]})), &[]).is_err());
        assert!(resolve(Some(json!([1, 2])), &[]).is_err());
    }
}
