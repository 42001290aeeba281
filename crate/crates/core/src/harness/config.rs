use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::instances::{instance_descriptor, ProblemDescriptor, DEFAULT_SEED};
use crate::error::{Result, ScpError};
use crate::exact::ExactOptions;
use crate::inexact::InexactOptions;
use crate::trace::Method;
use crate::variant::VariantOptions;

/// Where the problem comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    /// A bundled instance by name.
    Instance(String),
    /// A problem document on disk, relative to the config file.
    File(PathBuf),
    Inline(ProblemDescriptor),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    /// File stem of the written traces; defaults to `<problem>_<method>`.
    pub stem: Option<String>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub exact: ExactOptions,
    #[serde(default)]
    pub variant: VariantOptions,
    #[serde(default)]
    pub inexact: InexactOptions,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Overrides the problem's suggested starting point.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_method() -> Method {
    Method::Exact
}

impl ExperimentConfig {
    pub fn for_instance(name: &str, method: Method) -> Self {
        ExperimentConfig {
            problem: ProblemSource::Instance(name.to_string()),
            method,
            exact: ExactOptions::default(),
            variant: VariantOptions::default(),
            inexact: InexactOptions::default(),
            seed: DEFAULT_SEED,
            x0: None,
            output: OutputSpec::default(),
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ScpError::config(format!("config: {e}")))
    }

    /// Read a config; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScpError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// The problem document this config refers to.
    pub fn descriptor(&self) -> Result<ProblemDescriptor> {
        match &self.problem {
            ProblemSource::Instance(name) => instance_descriptor(name, self.seed),
            ProblemSource::Inline(d) => Ok(d.clone()),
            ProblemSource::File(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ScpError::config(format!("problem file {}: {e}", path.display()))
                })?;
                ProblemDescriptor::from_json(&text)
            }
        }
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.dir.as_deref().map(|d| self.resolve(d))
    }

    /// Check files and the options of the selected method.
    pub fn validate(&self) -> Result<()> {
        if let ProblemSource::File(p) = &self.problem {
            let path = self.resolve(p);
            if !path.is_file() {
                return Err(ScpError::config(format!("problem file {} does not exist", path.display())));
            }
        }
        match self.method {
            Method::Exact => self.exact.validate(),
            Method::Variant => self.variant.validate(),
            Method::Inexact => self.inexact.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_json(r#"{"problem": {"instance": "dc1d"}}"#).unwrap();
        assert_eq!(cfg.method, Method::Exact);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        cfg.validate().unwrap();
    }

    #[test]
    fn missing_file_is_config_error() {
        let cfg = ExperimentConfig::from_json(r#"{"problem": {"file": "/nonexistent.json"}}"#).unwrap();
        assert!(matches!(cfg.validate(), Err(ScpError::Config(_))));
    }

    #[test]
    fn bad_options_rejected() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": {"instance": "mba2d"}, "method": "variant", "variant": {"tau": 1.0}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(ScpError::Config(_))));
    }
}
