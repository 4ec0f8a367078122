//! Built-in scenarios and the user search path.

use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;
use crate::error::CliError;

/// Environment variable listing extra scenario directories.
pub const SCENARIO_PATH_VAR: &str = "DDCTL_SCENARIO_PATH";

const BUILTINS: &[(&str, &str)] = &[
    ("batch_reactor", include_str!("../scenarios/batch_reactor.json")),
    ("surface_vessel", include_str!("../scenarios/surface_vessel.json")),
];

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    BuiltIn,
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct ScenarioEntry {
    pub name: String,
    pub description: String,
    pub source: Source,
    /// Set when a file on the search path does not parse.
    pub problem: Option<String>,
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ScenarioConfig::parse(text, false).expect("built-in scenarios are valid"))
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// Directories named by the environment variable, in order.
pub fn search_path() -> Vec<PathBuf> {
    std::env::var_os(SCENARIO_PATH_VAR).map(|v| std::env::split_paths(&v).collect()).unwrap_or_default()
}

fn config_files(dir: &Path) -> Vec<PathBuf> {
    let Ok(rd) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json" || e == "toml"))
        .collect();
    files.sort();
    files
}

pub fn list_scenarios(dirs: &[PathBuf]) -> Vec<ScenarioEntry> {
    let mut out: Vec<ScenarioEntry> = BUILTINS
        .iter()
        .map(|(name, _)| {
            let cfg = builtin(name).expect("built-in");
            ScenarioEntry { name: cfg.name, description: cfg.description, source: Source::BuiltIn, problem: None }
        })
        .collect();
    for dir in dirs {
        for f in config_files(dir) {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            match ScenarioConfig::load(&f) {
                Ok(cfg) => out.push(ScenarioEntry {
                    name: cfg.name,
                    description: cfg.description,
                    source: Source::File(f),
                    problem: None,
                }),
                Err(e) => out.push(ScenarioEntry {
                    name: stem,
                    description: String::new(),
                    source: Source::File(f),
                    problem: Some(e.to_string()),
                }),
            }
        }
    }
    out
}

/// Looks a scenario up by name: built-ins first, then the search path by
/// config name or file stem. Returns the config and the directory relative
/// paths resolve against.
pub fn resolve(name: &str, dirs: &[PathBuf]) -> Result<(ScenarioConfig, PathBuf), CliError> {
    if let Some(cfg) = builtin(name) {
        return Ok((cfg, std::env::current_dir()?));
    }
    for dir in dirs {
        for f in config_files(dir) {
            let stem_match = f.file_stem().is_some_and(|s| s == name);
            if let Ok(cfg) = ScenarioConfig::load(&f) {
                if cfg.name == name || stem_match {
                    return Ok((cfg, dir.clone()));
                }
            } else if stem_match {
                return Err(ScenarioConfig::load(&f).unwrap_err());
            }
        }
    }
    Err(CliError::Config(format!("unknown scenario {name}; try `ddctl list`")))
}

/// Loads a config file; relative paths inside it resolve against its directory.
pub fn load_file(path: &Path) -> Result<(ScenarioConfig, PathBuf), CliError> {
    let cfg = ScenarioConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base }))
}
