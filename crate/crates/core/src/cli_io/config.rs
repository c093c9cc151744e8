use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{Beta, ChannelSpec, Engine, FIT_FLOOR};
use crate::model::{io::load_model, zoo, LocalHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Decay,
    LowTemperature,
    Certificates,
    ClusterEquivalence,
    Theorem3,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Decay => "decay",
            ExperimentKind::LowTemperature => "low_temperature",
            ExperimentKind::Certificates => "certificates",
            ExperimentKind::ClusterEquivalence => "cluster_equivalence",
            ExperimentKind::Theorem3 => "theorem3",
        }
    }

    fn default_engine(self) -> Engine {
        match self {
            ExperimentKind::Decay | ExperimentKind::LowTemperature => Engine::Classical,
            ExperimentKind::Certificates | ExperimentKind::ClusterEquivalence | ExperimentKind::Theorem3 => Engine::Dense,
        }
    }
}

/// Experiment config. After [`ExperimentConfig::resolve`] every optional
/// field is filled in, and the result is what manifests record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Builtin id such as `ising_chain_n6`, or a model file path.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub beta: Vec<Beta>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub distances: Vec<usize>,
    #[serde(default)]
    pub engine: Option<Engine>,
    /// Output file stem, relative to the output directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub boundary_width: Option<usize>,
    /// Sites carrying the channel in certificate runs; all sites when absent.
    #[serde(default)]
    pub channel_sites: Option<Vec<usize>>,
    #[serde(default)]
    pub max_weight: Option<usize>,
    #[serde(default)]
    pub fit_floor: Option<f64>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub error_rates: Vec<f64>,
}

pub const CONFIG_KEYS: &[&str] = &[
    "experiment",
    "model",
    "beta",
    "channel",
    "distances",
    "engine",
    "output",
    "boundary_width",
    "channel_sites",
    "max_weight",
    "fit_floor",
    "k",
    "error_rates",
];

/// Key under which manifests store the resolved config.
pub const MANIFEST_CONFIG_KEY: &str = "resolved_config";

/// Where a model comes from once the config is resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Builtin(zoo::Family, usize),
    File(PathBuf),
}

impl ExperimentConfig {
    /// Fills defaults and makes model file paths relative to `base_dir`
    /// absolute so the resolved config is usable from anywhere.
    pub fn resolve(mut self, base_dir: &Path) -> Result<Self> {
        let kind = self.experiment;
        if kind == ExperimentKind::LowTemperature {
            use crate::experiments::ChannelKindSpec as K;
            let family = self.model.as_deref().and_then(|m| zoo::parse_id(m).ok().map(|p| p.0).or_else(|| zoo_family(m)));
            let (engine, channel) = match family {
                Some(zoo::Family::BellChain) => (Engine::Pauli, K::BellMeasurement),
                _ => (Engine::Classical, K::Parity),
            };
            self.engine.get_or_insert(engine);
            self.channel.get_or_insert(ChannelSpec::simple(channel));
        }
        self.engine.get_or_insert(kind.default_engine());
        self.output.get_or_insert_with(|| kind.name().to_string());
        self.boundary_width.get_or_insert(1);
        self.max_weight.get_or_insert(4);
        self.fit_floor.get_or_insert(FIT_FLOOR);
        self.k.get_or_insert(1);
        if let Some(m) = &self.model {
            if zoo::parse_id(m).is_err() && zoo_family(m).is_none() {
                let p = Path::new(m);
                let p = if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
                self.model = Some(p.to_string_lossy().into_owned());
            }
        }
        Ok(self)
    }

    pub fn model_source(&self) -> Result<ModelSource> {
        let m = self.model.as_deref().ok_or_else(|| Error::Config(format!("{} needs \"model\"", self.experiment.name())))?;
        if let Ok((f, n)) = zoo::parse_id(m) {
            return Ok(ModelSource::Builtin(f, n));
        }
        if let Some(f) = zoo_family(m) {
            return Ok(ModelSource::Builtin(f, 0));
        }
        Ok(ModelSource::File(PathBuf::from(m)))
    }

    pub fn load_model(&self) -> Result<LocalHamiltonian> {
        match self.model_source()? {
            ModelSource::Builtin(_, 0) => Err(Error::Config(format!(
                "{} needs a sized model id such as \"ising_chain_n6\"",
                self.experiment.name()
            ))),
            ModelSource::Builtin(f, n) => f.build(n),
            ModelSource::File(p) => load_model(&p),
        }
    }

    pub fn engine(&self) -> Engine {
        self.engine.unwrap_or(self.experiment.default_engine())
    }

    pub fn output_stem(&self) -> &str {
        self.output.as_deref().unwrap_or(self.experiment.name())
    }
}

/// A bare family name such as `ising_chain`.
pub fn zoo_family(name: &str) -> Option<zoo::Family> {
    use zoo::Family::*;
    [IsingChain, ParityChain, BellChain, ClusterChain].into_iter().find(|f| f.name() == name)
}

/// Parses `key=value` and sets the dotted `key` path in `root`. Values are
/// read as JSON when possible and as plain strings otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        slot = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config(format!("empty override key in {assignment:?}")))
}

/// Reads a config or a manifest and applies the overrides. Returns the
/// unresolved value, so callers can report schema problems themselves.
pub fn read_config_value(path: &Path, overrides: &[String]) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    let mut v: Value = serde_json::from_str(&text)?;
    if let Some(inner) = v.get(MANIFEST_CONFIG_KEY) {
        v = inner.clone();
    }
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    Ok(v)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let v = read_config_value(path, overrides)?;
    let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
    cfg.resolve(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_parse_json_and_paths() {
        let mut v = json!({"experiment": "decay", "channel": {"kind": "bitflip", "p": 0.2}});
        apply_override(&mut v, "beta=[0.0, \"inf\"]").unwrap();
        apply_override(&mut v, "channel.p=0.3").unwrap();
        apply_override(&mut v, "model=ising_chain").unwrap();
        assert_eq!(v["beta"], json!([0.0, "inf"]));
        assert_eq!(v["channel"]["p"], json!(0.3));
        assert_eq!(v["model"], json!("ising_chain"));
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "model.x=1").is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_value::<ExperimentConfig>(json!({"experiment": "decay", "betas": [1]})).unwrap_err();
        assert!(err.to_string().contains("betas"));
    }

    #[test]
    fn resolve_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_value(json!({"experiment": "decay", "model": "ising_chain"})).unwrap();
        let r = cfg.resolve(Path::new("/tmp")).unwrap();
        assert_eq!(r.engine, Some(Engine::Classical));
        assert_eq!(r.output.as_deref(), Some("decay"));
        assert_eq!(r.model_source().unwrap(), ModelSource::Builtin(zoo::Family::IsingChain, 0));
        let f: ExperimentConfig = serde_json::from_value(json!({"experiment": "certificates", "model": "m.json"})).unwrap();
        let f = f.resolve(Path::new("/data")).unwrap();
        assert_eq!(f.model_source().unwrap(), ModelSource::File(PathBuf::from("/data/m.json")));
    }
}
