//! Merging of flags, config file, environment and defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const SEED_ENV: &str = "FRACRUIN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Flag,
    Config,
    Env,
    Default,
}

/// Resolves each setting as flag > config file > environment > default and
/// records the effective value and where it came from.
#[derive(Debug, Default)]
pub struct Resolver {
    file: Map<String, Value>,
    env_seed: Option<String>,
    echo: BTreeMap<String, Value>,
    provenance: BTreeMap<String, Source>,
}

impl Resolver {
    pub fn new(file: Map<String, Value>, env_seed: Option<String>) -> Self {
        Self { file, env_seed, ..Self::default() }
    }

    /// Loads a flat JSON object, or the `config` member of an earlier result
    /// document.
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        let mut file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("config file {}: {e}", p.display())))?;
                let Value::Object(mut obj) = v else {
                    return Err(Error::Config(format!("config file {} must hold a JSON object", p.display())));
                };
                if obj.contains_key("result") {
                    match obj.remove("config") {
                        Some(Value::Object(c)) => c,
                        _ => return Err(Error::Config("result document has no config object".into())),
                    }
                } else {
                    obj
                }
            }
        };
        if let Some(c) = file.remove("command") {
            if c.as_str() != Some(command) {
                return Err(Error::Config(format!("config file is for command {c}, not '{command}'")));
            }
        }
        Ok(Self::new(file, std::env::var(SEED_ENV).ok()))
    }

    fn record<T: Serialize>(&mut self, key: &str, v: &T, src: Source) -> Result<()> {
        self.echo.insert(key.into(), serde_json::to_value(v)?);
        self.provenance.insert(key.into(), src);
        Ok(())
    }

    fn take_file<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>> {
        match self.file.remove(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Error::Config(format!("config key '{key}' = {v}: {e}"))),
        }
    }

    /// Setting with a default.
    pub fn get<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let from_file = self.take_file(key)?;
        let (v, src) = match (flag, from_file) {
            (Some(v), _) => (v, Source::Flag),
            (None, Some(v)) => (v, Source::Config),
            (None, None) => (default, Source::Default),
        };
        self.record(key, &v, src)?;
        Ok(v)
    }

    /// Setting without a default.
    pub fn require<T: Serialize + DeserializeOwned>(&mut self, key: &str, flag: Option<T>) -> Result<T> {
        let from_file = self.take_file(key)?;
        let (v, src) = match (flag, from_file) {
            (Some(v), _) => (v, Source::Flag),
            (None, Some(v)) => (v, Source::Config),
            (None, None) => return Err(Error::Config(format!("missing required setting '{key}'"))),
        };
        self.record(key, &v, src)?;
        Ok(v)
    }

    /// Seed, which may also come from the environment.
    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let from_file = self.take_file("seed")?;
        let (v, src) = match (flag, from_file, self.env_seed.as_deref()) {
            (Some(v), _, _) => (v, Source::Flag),
            (None, Some(v), _) => (v, Source::Config),
            (None, None, Some(e)) => {
                let v = e
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}='{e}' is not an unsigned integer")))?;
                (v, Source::Env)
            }
            (None, None, None) => (0, Source::Default),
        };
        self.record("seed", &v, src)?;
        Ok(v)
    }

    /// Effective value of an already resolved setting.
    pub fn peek(&self, key: &str) -> Option<&Value> {
        self.echo.get(key)
    }

    /// Fails on config keys that no resolution consumed.
    pub fn check_unused(&self, command: &str) -> Result<()> {
        if !self.file.is_empty() {
            let keys: Vec<&str> = self.file.keys().map(String::as_str).collect();
            return Err(Error::Config(format!("unknown config keys for '{command}': {}", keys.join(", "))));
        }
        Ok(())
    }

    pub fn finish(self, command: &str) -> Result<(BTreeMap<String, Value>, BTreeMap<String, Source>)> {
        self.check_unused(command)?;
        Ok((self.echo, self.provenance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn file(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn precedence() {
        let mut r = Resolver::new(file(json!({"u": 2.0, "sigma": 0.3})), Some("11".into()));
        assert_eq!(r.get("u", Some(5.0), 1.0).unwrap(), 5.0);
        assert_eq!(r.get("sigma", None, 1.0).unwrap(), 0.3);
        assert_eq!(r.get("theta", None::<f64>, 1.0).unwrap(), 1.0);
        assert_eq!(r.seed(None).unwrap(), 11);
        let (echo, prov) = r.finish("ruin").unwrap();
        assert_eq!(prov["u"], Source::Flag);
        assert_eq!(prov["sigma"], Source::Config);
        assert_eq!(prov["theta"], Source::Default);
        assert_eq!(prov["seed"], Source::Env);
        assert_eq!(echo["u"], json!(5.0));
    }

    #[test]
    fn config_seed_beats_env() {
        let mut r = Resolver::new(file(json!({"seed": 3})), Some("11".into()));
        assert_eq!(r.seed(None).unwrap(), 3);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut r = Resolver::new(file(json!({"u": 1.0, "colour": "red"})), None);
        r.get("u", None, 0.0).unwrap();
        let e = r.finish("ruin").unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
    }

    #[test]
    fn bad_types_and_env() {
        let mut r = Resolver::new(file(json!({"paths": "many"})), None);
        assert!(matches!(r.get("paths", None, 1usize), Err(Error::Config(_))));
        let mut r = Resolver::new(Map::new(), Some("x".into()));
        assert!(matches!(r.seed(None), Err(Error::Config(_))));
        let mut r = Resolver::new(Map::new(), None);
        assert!(matches!(r.require::<String>("data", None), Err(Error::Config(_))));
    }
}
