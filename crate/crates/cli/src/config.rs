//! Layered settings. Precedence, highest first: command-line flags,
//! `SCHEMAKIT_*` environment variables, the TOML config file, defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use schemakit::inference::InferenceConfig;
use schemakit::intrusion::IntrusionConfig;
use schemakit::metrics::{parse_strata, Stratum};
use schemakit::mining::MiningConfig;
use schemakit::skeleton::BuilderConfig;
use schemakit::synth::SynthConfig;
use serde::{Deserialize, Serialize};

/// Environment variables read, each overriding the file value of the same
/// name. `SCHEMAKIT_CONFIG` names the file itself.
pub const ENV_CONFIG: &str = "SCHEMAKIT_CONFIG";
pub const ENV_ONTOLOGY: &str = "SCHEMAKIT_ONTOLOGY";
pub const ENV_LIBRARY: &str = "SCHEMAKIT_LIBRARY";
pub const ENV_SEED: &str = "SCHEMAKIT_SEED";
pub const ENV_BIND: &str = "SCHEMAKIT_BIND";
pub const ENV_WORKERS: &str = "SCHEMAKIT_WORKERS";
pub const ENV_DATA_DIR: &str = "SCHEMAKIT_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSettings {
    pub thresholds: Vec<f64>,
    /// `lo:hi` or `lo:` event-count intervals.
    pub strata: Vec<String>,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        CoverageSettings {
            thresholds: vec![0.5, 0.7, 0.9],
            strata: vec!["1:5".into(), "5:10".into(), "10:".into()],
        }
    }
}

impl CoverageSettings {
    pub fn strata(&self) -> anyhow::Result<Vec<Stratum>> {
        parse_strata(&self.strata.join(",")).map_err(Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSettings {
    pub ks: Vec<usize>,
}

impl Default for RankSettings {
    fn default() -> Self {
        RankSettings { ks: vec![1, 5, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub bind: String,
    /// Jobs running at once; further jobs wait as pending.
    pub workers: usize,
    /// Job outputs go under `<data_dir>/jobs/<job id>/`.
    pub data_dir: PathBuf,
    /// Skeletons offered for instantiation at startup.
    pub skeletons: Option<PathBuf>,
}

impl Default for ServerSettings {
    fn default() -> Self {
        ServerSettings {
            bind: "127.0.0.1:8080".into(),
            workers: 2,
            data_dir: PathBuf::from("schemakit-data"),
            skeletons: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub ontology: PathBuf,
    pub library: PathBuf,
    pub seed: u64,
    pub mining: MiningConfig,
    pub builder: BuilderConfig,
    pub inference: InferenceConfig,
    pub intrusion: IntrusionConfig,
    pub synth: SynthConfig,
    pub coverage: CoverageSettings,
    pub rank: RankSettings,
    pub server: ServerSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            ontology: PathBuf::from("ontology.json"),
            library: PathBuf::from("library"),
            seed: 0,
            mining: MiningConfig::default(),
            builder: BuilderConfig::default(),
            inference: InferenceConfig::default(),
            intrusion: IntrusionConfig::default(),
            synth: SynthConfig::default(),
            coverage: CoverageSettings::default(),
            rank: RankSettings::default(),
            server: ServerSettings::default(),
        }
    }
}

/// Values given on the command line; `None` defers to lower layers.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub library: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("environment variable {name}={value:?}: {e}"))
}

impl Settings {
    pub fn from_toml(text: &str) -> anyhow::Result<Settings> {
        Ok(toml::from_str(text)?)
    }

    pub fn load_file(path: &Path) -> anyhow::Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Settings::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Resolves all layers. `env` looks up one variable; the process
    /// environment in production, a map in tests. A config file named by a
    /// flag or the environment must exist.
    pub fn resolve(
        flags: &Overrides,
        env: impl Fn(&str) -> Option<String>,
    ) -> anyhow::Result<Settings> {
        let file = flags
            .config
            .clone()
            .or_else(|| env(ENV_CONFIG).map(PathBuf::from));
        let mut s = match &file {
            Some(path) => Settings::load_file(path)?,
            None => Settings::default(),
        };
        if let Some(v) = env(ENV_ONTOLOGY) {
            s.ontology = v.into();
        }
        if let Some(v) = env(ENV_LIBRARY) {
            s.library = v.into();
        }
        if let Some(v) = env(ENV_SEED) {
            s.seed = parse_env(ENV_SEED, &v)?;
        }
        if let Some(v) = env(ENV_BIND) {
            s.server.bind = v;
        }
        if let Some(v) = env(ENV_WORKERS) {
            s.server.workers = parse_env(ENV_WORKERS, &v)?;
        }
        if let Some(v) = env(ENV_DATA_DIR) {
            s.server.data_dir = v.into();
        }
        if let Some(v) = &flags.ontology {
            s.ontology = v.clone();
        }
        if let Some(v) = &flags.library {
            s.library = v.clone();
        }
        if let Some(v) = flags.seed {
            s.seed = v;
        }
        // One seed drives every seeded stage.
        s.intrusion.seed = s.seed;
        s.synth.seed = s.seed;
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> anyhow::Result<()> {
        self.mining.validate()?;
        self.coverage.strata()?;
        if self.server.workers == 0 {
            bail!("server.workers must be at least 1");
        }
        if self.rank.ks.contains(&0) {
            bail!("rank.ks entries must be at least 1");
        }
        Ok(())
    }
}
