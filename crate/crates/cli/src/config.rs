use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cmir_core::corpus::InputFormat;
use cmir_core::propagation::PropagationConstants;
use cmir_core::ranking::RankMode;
use cmir_core::scorer::ProviderConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    #[default]
    Mock,
    Identity,
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(ProviderKind::Http),
            "mock" => Ok(ProviderKind::Mock),
            "identity" => Ok(ProviderKind::Identity),
            other => Err(format!(
                "unknown provider `{other}` (expected http, mock or identity)"
            )),
        }
    }
}

/// Which collections go through the translation prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslateScope {
    #[default]
    Both,
    Queries,
    Documents,
    None,
}

impl TranslateScope {
    pub fn queries(self) -> bool {
        matches!(self, TranslateScope::Both | TranslateScope::Queries)
    }

    pub fn documents(self) -> bool {
        matches!(self, TranslateScope::Both | TranslateScope::Documents)
    }
}

impl FromStr for TranslateScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(TranslateScope::Both),
            "queries" => Ok(TranslateScope::Queries),
            "documents" => Ok(TranslateScope::Documents),
            "none" => Ok(TranslateScope::None),
            other => Err(format!(
                "unknown translate scope `{other}` (expected both, queries, documents or none)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_path: Option<PathBuf>,
    pub queries_path: Option<PathBuf>,
    pub qrels_path: Option<PathBuf>,
    /// Defaults to a guess from the file extension.
    pub corpus_format: Option<InputFormat>,
    pub queries_format: Option<InputFormat>,
    pub provider: ProviderKind,
    /// JSON object of prompt digest to response, for `provider = "mock"`.
    pub mock_table: Option<PathBuf>,
    pub provider_config: ProviderConfig,
    pub translate: TranslateScope,
    pub propagation_constants: PropagationConstants,
    pub run_tag: String,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub mode: RankMode,
    pub depth: Option<usize>,
    /// Log scoring progress every this many pairs.
    pub progress_every: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_path: None,
            queries_path: None,
            qrels_path: None,
            corpus_format: None,
            queries_format: None,
            provider: ProviderKind::default(),
            mock_table: None,
            provider_config: ProviderConfig::default(),
            translate: TranslateScope::default(),
            propagation_constants: PropagationConstants::default(),
            run_tag: "cmir".into(),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            mode: RankMode::All,
            depth: None,
            progress_every: 1000,
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML config file; missing keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.provider_config
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.propagation_constants
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if self.run_tag.is_empty() || self.run_tag.chars().any(char::is_whitespace) {
            return Err(CliError::Usage(format!(
                "run tag `{}` must be non-empty without whitespace",
                self.run_tag
            )));
        }
        if self.depth == Some(0) {
            return Err(CliError::Usage("depth must be positive".into()));
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn corpus_path(&self) -> Result<&Path, CliError> {
        self.corpus_path
            .as_deref()
            .ok_or_else(|| CliError::Usage("corpus path is required (--corpus)".into()))
    }

    pub fn queries_path(&self) -> Result<&Path, CliError> {
        self.queries_path
            .as_deref()
            .ok_or_else(|| CliError::Usage("queries path is required (--queries)".into()))
    }

    pub fn qrels_path(&self) -> Result<&Path, CliError> {
        self.qrels_path
            .as_deref()
            .ok_or_else(|| CliError::Usage("qrels path is required (--qrels)".into()))
    }

    pub fn corpus_format(&self) -> InputFormat {
        self.corpus_format.unwrap_or_else(|| {
            InputFormat::from_path(self.corpus_path.as_deref().unwrap_or(Path::new("")))
        })
    }

    pub fn queries_format(&self) -> InputFormat {
        self.queries_format.unwrap_or_else(|| {
            InputFormat::from_path(self.queries_path.as_deref().unwrap_or(Path::new("")))
        })
    }

    /// Copy used for one temperature of a sweep.
    pub fn at_temperature(&self, temperature: f64) -> Self {
        let mut c = self.clone();
        c.provider_config.temperature = temperature;
        c.run_tag = sweep_tag(&self.run_tag, temperature);
        c
    }
}

pub fn sweep_tag(base: &str, temperature: f64) -> String {
    format!("{base}-t{temperature}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_hold_propagation_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.propagation_constants.boost, 0.2);
        assert_eq!(c.propagation_constants.boost_floor, 0.3);
        assert_eq!(c.propagation_constants.relevance_threshold, 0.5);
        assert_eq!(c.translate, TranslateScope::Both);
        assert_eq!(c.mode, RankMode::All);
        assert_eq!(c.depth, None);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_overrides_defaults() {
        let c: PipelineConfig = toml::from_str(
            r#"
            corpus_path = "docs.tsv"
            provider = "identity"
            translate = "none"
            run_tag = "exp1"

            [provider_config]
            temperature = 0.9
            timeout_secs = 5

            [propagation_constants]
            boost = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(c.provider, ProviderKind::Identity);
        assert_eq!(c.translate, TranslateScope::None);
        assert_eq!(c.provider_config.temperature, 0.9);
        assert_eq!(c.provider_config.timeout, std::time::Duration::from_secs(5));
        assert_eq!(c.provider_config.model_name, "gpt-3.5-turbo");
        assert_eq!(c.propagation_constants.boost, 0.1);
        assert_eq!(c.propagation_constants.boost_floor, 0.3);
        assert_eq!(c.corpus_format(), InputFormat::Tsv);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>("tempreature = 0.5").is_err());
    }

    #[test]
    fn validation_errors() {
        let c = PipelineConfig {
            run_tag: "has space".into(),
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.provider_config.temperature = 1.2;
        assert!(c.validate().is_err());
        let mut c = PipelineConfig::default();
        c.propagation_constants.relevance_threshold = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn sweep_tags() {
        assert_eq!(sweep_tag("run", 0.5), "run-t0.5");
        let c = PipelineConfig::default().at_temperature(0.8);
        assert_eq!(c.run_tag, "cmir-t0.8");
        assert_eq!(c.provider_config.temperature, 0.8);
    }

    #[test]
    fn scope_flags() {
        assert!(TranslateScope::Both.queries() && TranslateScope::Both.documents());
        assert!(TranslateScope::Queries.queries() && !TranslateScope::Queries.documents());
        assert!(!TranslateScope::None.queries() && !TranslateScope::None.documents());
        assert_eq!(
            "documents".parse::<TranslateScope>().unwrap(),
            TranslateScope::Documents
        );
    }
}
