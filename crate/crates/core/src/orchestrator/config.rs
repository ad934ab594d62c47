//! Main configuration file. Every key is optional; relative paths resolve
//! against the directory holding the file.
//!
//! ```toml
//! kb = "kb.nt"
//! index = "index.json"
//! strict = true
//! label_predicates = ["http://www.w3.org/2000/01/rdf-schema#label"]
//! budget_secs = 120
//! concurrency = 4
//!
//! [backend]
//! kind = "replay"            # or "live"
//! transcripts = "transcripts"
//! strict_replay = false
//! model = "gpt-4"
//! max_tokens = 512
//!
//! [prices.gpt-4]
//! prompt_price_per_1k = 0.03
//! completion_price_per_1k = 0.06
//!
//! [roles]
//! n_shots = 3
//! k_entity = 2
//! k_relation = 2
//! retries = 3
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use toml::{Table, Value};

use crate::kb::LoadOptions;
use crate::llm::Prices;
use crate::roles::RoleConfig;

/// Shots available in the few-shot prompts.
pub const MAX_SHOTS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid TOML: {0}")]
    Toml(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

fn field(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendKind {
    /// Recorded transcripts: one file for a single question, or a directory
    /// of `<item id>.jsonl` files.
    Replay { transcripts: Option<PathBuf>, strict: bool },
    Live {
        base_url: Option<String>,
        in_flight: usize,
        max_retries: u32,
        timeout: Duration,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model: String,
    pub max_tokens: u32,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Replay {
                transcripts: None,
                strict: false,
            },
            model: "gpt-4".into(),
            max_tokens: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub kb: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub load: LoadOptions,
    pub budget: Duration,
    pub concurrency: usize,
    pub backend: BackendConfig,
    pub prices: BTreeMap<String, Prices>,
    pub roles: RoleConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kb: None,
            index: None,
            load: LoadOptions::default(),
            budget: Duration::from_secs(120),
            concurrency: 4,
            backend: BackendConfig::default(),
            prices: BTreeMap::new(),
            roles: RoleConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))?;
        let mut cfg = Self::default();
        let r = Reader { base };
        for (key, value) in &table {
            match key.as_str() {
                "kb" => cfg.kb = Some(r.path(key, value)?),
                "index" => cfg.index = Some(r.path(key, value)?),
                "strict" => cfg.load.strict = r.boolean(key, value)?,
                "label_predicates" => cfg.load.label_predicates = r.strings(key, value)?,
                "budget_secs" => cfg.budget = Duration::from_secs_f64(r.positive_float(key, value)?),
                "concurrency" => cfg.concurrency = r.count(key, value, 1)?,
                "backend" => cfg.backend = r.backend(value)?,
                "prices" => cfg.prices = r.prices(value)?,
                "roles" => cfg.roles = r.roles(value)?,
                _ => return Err(field(key, "unknown key")),
            }
        }
        Ok(cfg)
    }

    /// Prices for the configured model; free when none are listed.
    pub fn model_prices(&self) -> Prices {
        self.prices.get(&self.backend.model).copied().unwrap_or_default()
    }
}

struct Reader<'a> {
    base: &'a Path,
}

impl Reader<'_> {
    fn table<'v>(&self, path: &str, v: &'v Value) -> Result<&'v Table, ConfigError> {
        v.as_table().ok_or_else(|| field(path, "expected a table"))
    }

    fn string<'v>(&self, path: &str, v: &'v Value) -> Result<&'v str, ConfigError> {
        v.as_str().ok_or_else(|| field(path, "expected a string"))
    }

    fn path(&self, path: &str, v: &Value) -> Result<PathBuf, ConfigError> {
        Ok(self.base.join(self.string(path, v)?))
    }

    fn boolean(&self, path: &str, v: &Value) -> Result<bool, ConfigError> {
        v.as_bool().ok_or_else(|| field(path, "expected true or false"))
    }

    fn strings(&self, path: &str, v: &Value) -> Result<Vec<String>, ConfigError> {
        let arr = v.as_array().ok_or_else(|| field(path, "expected an array of strings"))?;
        arr.iter()
            .enumerate()
            .map(|(i, x)| self.string(&format!("{path}[{i}]"), x).map(str::to_string))
            .collect()
    }

    /// Integer at least `min`.
    fn count(&self, path: &str, v: &Value, min: i64) -> Result<usize, ConfigError> {
        match v.as_integer() {
            Some(n) if n >= min => Ok(n as usize),
            Some(n) => Err(field(path, format!("must be at least {min}, got {n}"))),
            None => Err(field(path, "expected an integer")),
        }
    }

    fn number(&self, path: &str, v: &Value) -> Result<f64, ConfigError> {
        v.as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .ok_or_else(|| field(path, "expected a number"))
    }

    fn positive_float(&self, path: &str, v: &Value) -> Result<f64, ConfigError> {
        let x = self.number(path, v)?;
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(field(path, format!("must be positive, got {x}")))
        }
    }

    fn backend(&self, v: &Value) -> Result<BackendConfig, ConfigError> {
        let t = self.table("backend", v)?;
        let mut out = BackendConfig::default();
        let kind = match t.get("kind") {
            None => "replay",
            Some(k) => self.string("backend.kind", k)?,
        };
        let mut transcripts = None;
        let mut strict = false;
        let mut base_url = None;
        let mut in_flight = 4;
        let mut max_retries = 5;
        let mut timeout = Duration::from_secs(120);
        for (key, value) in t {
            let p = format!("backend.{key}");
            match (kind, key.as_str()) {
                (_, "kind") => {}
                (_, "model") => out.model = self.string(&p, value)?.to_string(),
                (_, "max_tokens") => out.max_tokens = self.count(&p, value, 1)? as u32,
                ("replay", "transcripts") => transcripts = Some(self.path(&p, value)?),
                ("replay", "strict_replay") => strict = self.boolean(&p, value)?,
                ("live", "base_url") => base_url = Some(self.string(&p, value)?.to_string()),
                ("live", "in_flight") => in_flight = self.count(&p, value, 1)?,
                ("live", "max_retries") => max_retries = self.count(&p, value, 0)? as u32,
                ("live", "timeout_secs") => timeout = Duration::from_secs_f64(self.positive_float(&p, value)?),
                ("replay" | "live", _) => return Err(field(&p, format!("unknown key for a {kind} backend"))),
                _ => return Err(field("backend.kind", format!("expected \"replay\" or \"live\", got {kind:?}"))),
            }
        }
        out.kind = match kind {
            "replay" => BackendKind::Replay { transcripts, strict },
            "live" => BackendKind::Live {
                base_url,
                in_flight,
                max_retries,
                timeout,
            },
            other => return Err(field("backend.kind", format!("expected \"replay\" or \"live\", got {other:?}"))),
        };
        Ok(out)
    }

    fn prices(&self, v: &Value) -> Result<BTreeMap<String, Prices>, ConfigError> {
        let mut out = BTreeMap::new();
        for (model, entry) in self.table("prices", v)? {
            let base = format!("prices.{model}");
            let t = self.table(&base, entry)?;
            let mut p = Prices::default();
            for (key, value) in t {
                let path = format!("{base}.{key}");
                let x = self.number(&path, value)?;
                if x < 0.0 || !x.is_finite() {
                    return Err(field(&path, format!("must be non-negative, got {x}")));
                }
                match key.as_str() {
                    "prompt_price_per_1k" => p.prompt_price_per_1k = x,
                    "completion_price_per_1k" => p.completion_price_per_1k = x,
                    _ => return Err(field(&path, "unknown key")),
                }
            }
            out.insert(model.clone(), p);
        }
        Ok(out)
    }

    fn roles(&self, v: &Value) -> Result<RoleConfig, ConfigError> {
        let mut c = RoleConfig::default();
        for (key, value) in self.table("roles", v)? {
            let p = format!("roles.{key}");
            match key.as_str() {
                "n_shots" => {
                    c.n_shots = self.count(&p, value, 0)?;
                    if c.n_shots > MAX_SHOTS {
                        return Err(field(&p, format!("at most {MAX_SHOTS} shots are available, got {}", c.n_shots)));
                    }
                }
                "k_entity" => c.k_entity = self.count(&p, value, 1)?,
                "k_relation" => c.k_relation = self.count(&p, value, 1)?,
                "retries" => c.retries = self.count(&p, value, 0)?,
                "filter_pool" => c.filter_pool = self.count(&p, value, 1)?,
                "enumeration_cap" => c.enumeration_cap = self.count(&p, value, 1)?,
                "relation_pool_cap" => c.relation_pool_cap = self.count(&p, value, 1)?,
                "retry_temperature" => {
                    let t = self.number(&p, value)?;
                    if !(0.0..=2.0).contains(&t) {
                        return Err(field(&p, format!("must lie in [0, 2], got {t}")));
                    }
                    c.retry_temperature = t;
                }
                "connect_boost" => c.connect_boost = self.boolean(&p, value)?,
                "reextract_final" => c.reextract_final = self.boolean(&p, value)?,
                "regenerate_final" => c.regenerate_final = self.boolean(&p, value)?,
                "fallback_boolean" => c.fallback_boolean = self.boolean(&p, value)?,
                "fallback_fact" => c.fallback_fact = self.boolean(&p, value)?,
                _ => return Err(field(&p, "unknown key")),
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_toml(text, Path::new("/cfg"))
    }

    fn err_path(text: &str) -> String {
        match parse(text) {
            Err(ConfigError::Field { path, .. }) => path,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse("").unwrap();
        let r = &c.roles;
        assert_eq!((r.n_shots, r.k_entity, r.k_relation, r.retries), (3, 2, 2, 3));
        assert_eq!((r.filter_pool, r.enumeration_cap), (10, 50));
        assert_eq!(c.budget, Duration::from_secs(120));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let c = parse("kb = \"kb.nt\"\n[backend]\ntranscripts = \"t\"").unwrap();
        assert_eq!(c.kb.unwrap(), Path::new("/cfg/kb.nt"));
        assert!(matches!(c.backend.kind, BackendKind::Replay { transcripts: Some(p), .. } if p == Path::new("/cfg/t")));
    }

    #[test]
    fn violations_name_the_field() {
        assert_eq!(err_path("[roles]\nretries = -1"), "roles.retries");
        assert_eq!(err_path("[roles]\nn_shots = 4"), "roles.n_shots");
        assert_eq!(err_path("[roles]\nk_entity = 0"), "roles.k_entity");
        assert_eq!(err_path("[roles]\nretry_temperature = 3.0"), "roles.retry_temperature");
        assert_eq!(err_path("[roles]\nshots = 1"), "roles.shots");
        assert_eq!(err_path("bogus = 1"), "bogus");
        assert_eq!(err_path("[backend]\nkind = \"grpc\""), "backend.kind");
        assert_eq!(err_path("[backend]\nkind = \"replay\"\nbase_url = \"x\""), "backend.base_url");
        assert_eq!(err_path("[prices.m]\nprompt_price_per_1k = -1"), "prices.m.prompt_price_per_1k");
        assert_eq!(err_path("label_predicates = [\"a\", 2]"), "label_predicates[1]");
    }

    #[test]
    fn one_shot_variant_and_prices() {
        let c = parse(
            "[roles]\nn_shots = 1\n[backend]\nkind = \"live\"\nmodel = \"m\"\n[prices.m]\nprompt_price_per_1k = 1.0\ncompletion_price_per_1k = 2",
        )
        .unwrap();
        assert_eq!(c.roles.n_shots, 1);
        assert_eq!(c.roles.retries, 3);
        assert_eq!(
            c.model_prices(),
            Prices {
                prompt_price_per_1k: 1.0,
                completion_price_per_1k: 2.0
            }
        );
        assert!(matches!(c.backend.kind, BackendKind::Live { in_flight: 4, .. }));
    }
}
