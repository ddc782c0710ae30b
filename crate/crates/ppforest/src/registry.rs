//! On-disk model registry: one directory per model under a root directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ppforest_core::{
    baseline_bundle, ppf_bundle, BaselineConfig, BaselineForestModel, BundleOptions, Dataset, DiagnosticsBundle,
    ForestConfig, PPForestModel,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{fit_baseline_parallel, fit_forest_parallel};

pub const REGISTRY_ENV: &str = "PPF_REGISTRY_DIR";
pub const DEFAULT_REGISTRY: &str = "ppf_registry";

const ENTRY_FILE: &str = "entry.json";
const DATASET_FILE: &str = "dataset.json";
const PPF_FILE: &str = "ppf.json";
const RF_FILE: &str = "rf.json";
const DIAGNOSTICS_FILE: &str = "diagnostics.json";
const RF_DIAGNOSTICS_FILE: &str = "rf_diagnostics.json";

/// Registry root from `PPF_REGISTRY_DIR`, else `./ppf_registry`.
pub fn default_root() -> PathBuf {
    std::env::var_os(REGISTRY_ENV).map_or_else(|| PathBuf::from(DEFAULT_REGISTRY), PathBuf::from)
}

/// Everything that determines a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub name: String,
    pub forest: ForestConfig,
    /// Baseline random forest fitted alongside, when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
}

impl TrainSpec {
    /// `<name>-<16 hex digits>`, a hash of the data fingerprint and the configuration.
    pub fn model_id(&self, d: &Dataset) -> String {
        let mut h = Fnv::new();
        h.write(&d.fingerprint().to_le_bytes());
        h.write(serde_json::to_string(&self.forest).expect("config serializes").as_bytes());
        if let Some(b) = &self.baseline {
            h.write(serde_json::to_string(b).expect("config serializes").as_bytes());
        }
        format!("{}-{:016x}", self.name, h.0)
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
            || self.name.starts_with('.')
        {
            return Err(Error::Config(format!(
                "model name `{}` must be non-empty and use only letters, digits, `_`, `-`, `.`",
                self.name
            )));
        }
        self.forest.validate(d.p())?;
        if let Some(b) = &self.baseline {
            if b.n_trees == 0 {
                return Err(Error::Config("baseline n_trees must be at least 1".into()));
            }
            if b.mtry == 0 || b.mtry > d.p() {
                return Err(Error::Config(format!("mtry must be in 1..={}, got {}", d.p(), b.mtry)));
            }
        }
        Ok(())
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRegistryEntry {
    pub model_id: String,
    pub name: String,
    pub created_unix: u64,
    pub n_cases: usize,
    pub n_vars: usize,
    pub class_names: Vec<String>,
    pub var_names: Vec<String>,
    /// Data fingerprint, 16 hex digits.
    pub fingerprint: String,
    pub config: ForestConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    pub oob_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_oob_error: Option<f64>,
    /// File names relative to the model directory, keyed by role.
    pub files: BTreeMap<String, String>,
}

/// A diagnostics bundle stored together with the fingerprint of the model it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedBundle {
    fingerprint: String,
    bundle: DiagnosticsBundle,
}

/// Options used for the diagnostics computed at training time.
pub fn bundle_options(spec_seed: u64) -> BundleOptions {
    BundleOptions { importance_seed: spec_seed, ..BundleOptions::default() }
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub entry: ModelRegistryEntry,
    pub dataset: Dataset,
    pub ppf: PPForestModel,
    pub rf: Option<BaselineForestModel>,
    pub diagnostics: DiagnosticsBundle,
    pub rf_diagnostics: Option<DiagnosticsBundle>,
}

/// Fits the forest (and the baseline when requested) and computes all diagnostics.
pub fn train(d: &Dataset, spec: &TrainSpec, threads: usize) -> Result<TrainedModel> {
    spec.validate(d)?;
    let ppf = fit_forest_parallel(d, spec.forest.clone(), threads)?;
    let opts = bundle_options(spec.forest.seed);
    let diagnostics = ppf_bundle(&ppf, d, &opts)?;
    let (rf, rf_diagnostics) = match &spec.baseline {
        Some(cfg) => {
            let rf = fit_baseline_parallel(d, cfg.clone(), threads)?;
            let bundle = baseline_bundle(&rf, d, &opts)?;
            (Some(rf), Some(bundle))
        }
        None => (None, None),
    };
    let mut files = BTreeMap::new();
    files.insert("dataset".to_string(), DATASET_FILE.to_string());
    files.insert("ppf".to_string(), PPF_FILE.to_string());
    files.insert("diagnostics".to_string(), DIAGNOSTICS_FILE.to_string());
    if rf.is_some() {
        files.insert("rf".to_string(), RF_FILE.to_string());
        files.insert("rf_diagnostics".to_string(), RF_DIAGNOSTICS_FILE.to_string());
    }
    let entry = ModelRegistryEntry {
        model_id: spec.model_id(d),
        name: spec.name.clone(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |t| t.as_secs()),
        n_cases: d.n(),
        n_vars: d.p(),
        class_names: d.class_names().to_vec(),
        var_names: d.var_names().to_vec(),
        fingerprint: format!("{:016x}", d.fingerprint()),
        config: spec.forest.clone(),
        baseline: spec.baseline.clone(),
        oob_error: diagnostics.oob_error,
        rf_oob_error: rf_diagnostics.as_ref().and_then(|b| b.oob_error),
        files,
    };
    Ok(TrainedModel { entry, dataset: d.clone(), ppf, rf, diagnostics, rf_diagnostics })
}

#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
}

impl Registry {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Registry { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn model_dir(&self, id: &str) -> Result<PathBuf> {
        // ids are used as directory names
        if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
            return Err(Error::UnknownModel(id.into()));
        }
        Ok(self.root.join(id))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.model_dir(id).is_ok_and(|p| p.join(ENTRY_FILE).is_file())
    }

    /// All entries, sorted by id.
    pub fn list(&self) -> Result<Vec<ModelRegistryEntry>> {
        let mut out = Vec::new();
        for item in fs::read_dir(&self.root)? {
            let item = item?;
            let name = item.file_name();
            let Some(id) = name.to_str() else { continue };
            if self.contains(id) {
                out.push(self.entry(id)?);
            }
        }
        out.sort_by(|a, b| a.model_id.cmp(&b.model_id));
        Ok(out)
    }

    fn read<T: DeserializeOwned>(&self, id: &str, file: &str) -> Result<T> {
        let path = self.model_dir(id)?.join(file);
        let bytes = fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound && !self.contains(id) {
                Error::UnknownModel(id.into())
            } else {
                Error::ReadFile { path: path.clone(), source: e }
            }
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn entry(&self, id: &str) -> Result<ModelRegistryEntry> {
        self.read(id, ENTRY_FILE)
    }

    pub fn dataset(&self, id: &str) -> Result<Dataset> {
        self.read(id, DATASET_FILE)
    }

    pub fn ppf(&self, id: &str) -> Result<PPForestModel> {
        self.read(id, PPF_FILE)
    }

    pub fn rf(&self, id: &str) -> Result<Option<BaselineForestModel>> {
        if self.entry(id)?.baseline.is_none() {
            return Ok(None);
        }
        self.read(id, RF_FILE).map(Some)
    }

    fn cached(&self, id: &str, file: &str, fingerprint: u64) -> Result<DiagnosticsBundle> {
        let cached: CachedBundle = self.read(id, file)?;
        let expected = format!("{fingerprint:016x}");
        if cached.fingerprint != expected {
            return Err(Error::Data(format!(
                "cached diagnostics of `{id}` belong to data {}, model has {expected}",
                cached.fingerprint
            )));
        }
        Ok(cached.bundle)
    }

    /// The stored forest diagnostics, checked against the model fingerprint.
    pub fn diagnostics(&self, id: &str) -> Result<DiagnosticsBundle> {
        let fp = self.ppf(id)?.fingerprint;
        self.cached(id, DIAGNOSTICS_FILE, fp)
    }

    pub fn rf_diagnostics(&self, id: &str) -> Result<Option<DiagnosticsBundle>> {
        let Some(rf) = self.rf(id)? else { return Ok(None) };
        self.cached(id, RF_DIAGNOSTICS_FILE, rf.fingerprint).map(Some)
    }

    /// Loads every artifact of a model.
    pub fn load(&self, id: &str) -> Result<TrainedModel> {
        Ok(TrainedModel {
            entry: self.entry(id)?,
            dataset: self.dataset(id)?,
            ppf: self.ppf(id)?,
            rf: self.rf(id)?,
            diagnostics: self.diagnostics(id)?,
            rf_diagnostics: self.rf_diagnostics(id)?,
        })
    }

    /// Writes a trained model. Files go to a scratch directory first, which is
    /// then renamed into place, so readers never see a partial model.
    pub fn store(&self, m: &TrainedModel) -> Result<()> {
        let id = &m.entry.model_id;
        let dir = self.model_dir(id)?;
        let scratch = self.root.join(format!(".{id}.tmp-{}", std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch)?;
        }
        fs::create_dir_all(&scratch)?;
        let write = |file: &str, bytes: Vec<u8>| fs::write(scratch.join(file), bytes);
        write(DATASET_FILE, serde_json::to_vec_pretty(&m.dataset)?)?;
        write(PPF_FILE, serde_json::to_vec_pretty(&m.ppf)?)?;
        let fp = |v: u64| format!("{v:016x}");
        write(DIAGNOSTICS_FILE, serde_json::to_vec_pretty(&CachedBundle { fingerprint: fp(m.ppf.fingerprint), bundle: m.diagnostics.clone() })?)?;
        if let (Some(rf), Some(bundle)) = (&m.rf, &m.rf_diagnostics) {
            write(RF_FILE, serde_json::to_vec_pretty(rf)?)?;
            write(RF_DIAGNOSTICS_FILE, serde_json::to_vec_pretty(&CachedBundle { fingerprint: fp(rf.fingerprint), bundle: bundle.clone() })?)?;
        }
        write(ENTRY_FILE, serde_json::to_vec_pretty(&m.entry)?)?;
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::rename(&scratch, &dir)?;
        Ok(())
    }
}
