//! Run configuration: one JSON file fully determines an experiment.
//!
//! CLI flags can override any field through dotted paths
//! (`--set attack.epsilon=0.05`); the resolved config is hashed and the
//! hash embedded in every emitted artifact, so identical config + seeds
//! reproduce byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use lgv_core::attack::{AttackConfig, Norm};
use lgv_core::train::LrSchedule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::weights::ModelSpecConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Blobs {
        classes: usize,
        dim: usize,
        train_per_class: usize,
        val_per_class: usize,
        test_per_class: usize,
        spread: f64,
        seed: u64,
    },
    Spirals {
        classes: usize,
        train_per_class: usize,
        val_per_class: usize,
        test_per_class: usize,
        noise: f64,
        seed: u64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Fraction of the training file carved out as the validation
        /// split (seeded, disjoint).
        val_fraction: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant,
    StepDecay { factor: f64, every: usize },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::StepDecay {
            factor: 0.1,
            every: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub lr: f64,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl TrainingConfig {
    pub fn schedule(&self) -> LrSchedule {
        match self.schedule {
            ScheduleConfig::Constant => LrSchedule::Constant(self.lr),
            ScheduleConfig::StepDecay { factor, every } => LrSchedule::StepDecay {
                initial: self.lr,
                factor,
                every,
            },
        }
    }

    pub fn core(&self, seed: u64) -> lgv_core::train::TrainConfig {
        lgv_core::train::TrainConfig {
            epochs: self.epochs,
            schedule: self.schedule(),
            momentum: self.momentum,
            batch_size: self.batch_size,
            weight_decay: self.weight_decay,
            seed,
        }
    }
}

fn default_lgv_epochs() -> usize {
    10
}

fn default_lgv_k() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgvBlock {
    #[serde(default = "default_lgv_epochs")]
    pub n_epochs: usize,
    #[serde(default = "default_lgv_k")]
    pub k: usize,
    /// Constant collection learning rate; defaults to half the initial
    /// training rate.
    #[serde(default)]
    pub lr: Option<f64>,
    /// Collection batch size; defaults to the training batch size.
    #[serde(default)]
    pub batch_size: Option<usize>,
}

impl LgvBlock {
    pub fn rate(&self, training: &TrainingConfig) -> f64 {
        self.lr.unwrap_or(0.5 * training.lr)
    }

    pub fn core(&self, training: &TrainingConfig, seed: u64) -> lgv_core::train::LgvConfig {
        lgv_core::train::LgvConfig {
            n_epochs: self.n_epochs,
            k: self.k,
            lr: self.rate(training),
            momentum: training.momentum,
            batch_size: self.batch_size.unwrap_or(training.batch_size),
            weight_decay: training.weight_decay,
            seed,
        }
    }
}

/// Where shifted donor deviations get re-centered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftCenter {
    LgvSwa,
    OneDnn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurrogateRecipe {
    /// The initial trained DNN alone.
    OneDnn { name: Option<String> },
    /// Gaussian noise around the initial DNN.
    Rd {
        name: Option<String>,
        sigma: f64,
        k: usize,
    },
    /// The collected LGV weights.
    Lgv { name: Option<String> },
    /// Their average as a single model.
    LgvSwa { name: Option<String> },
    /// Gaussian noise around the average.
    LgvSwaRd {
        name: Option<String>,
        sigma: f64,
        k: usize,
    },
    /// Gaussian samples inside the LGV deviation span.
    SubspaceRd { name: Option<String>, k: usize },
    /// LGV projected onto the first C principal components.
    Projected { name: Option<String>, c: usize },
    /// Donor LGV' deviations re-centered (gamma-scaled) on another
    /// solution.
    Shifted {
        name: Option<String>,
        gamma: f64,
        onto: ShiftCenter,
    },
}

impl SurrogateRecipe {
    pub fn name(&self) -> String {
        let (custom, fallback) = match self {
            SurrogateRecipe::OneDnn { name } => (name, "one_dnn".to_string()),
            SurrogateRecipe::Rd { name, .. } => (name, "rd".to_string()),
            SurrogateRecipe::Lgv { name } => (name, "lgv".to_string()),
            SurrogateRecipe::LgvSwa { name } => (name, "lgv_swa".to_string()),
            SurrogateRecipe::LgvSwaRd { name, .. } => (name, "lgv_swa_rd".to_string()),
            SurrogateRecipe::SubspaceRd { name, .. } => (name, "subspace_rd".to_string()),
            SurrogateRecipe::Projected { name, c } => (name, format!("projected_c{c}")),
            SurrogateRecipe::Shifted { name, gamma, onto } => (
                name,
                match onto {
                    ShiftCenter::LgvSwa => format!("shifted_swa_g{gamma}"),
                    ShiftCenter::OneDnn => format!("shifted_dnn_g{gamma}"),
                },
            ),
        };
        custom.clone().unwrap_or(fallback)
    }

    /// Whether the recipe needs a second, independently trained LGV run.
    pub fn needs_donor(&self) -> bool {
        matches!(self, SurrogateRecipe::Shifted { .. })
    }

    /// Whether the recipe needs the primary LGV collection.
    pub fn needs_lgv(&self) -> bool {
        !matches!(
            self,
            SurrogateRecipe::OneDnn { .. } | SurrogateRecipe::Rd { .. }
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBlock {
    pub norm: String,
    pub epsilon: f64,
    /// Defaults to epsilon / 10.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_n_iter")]
    pub n_iter: usize,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub feature_noise_sigma: f64,
    #[serde(default = "default_input_box")]
    pub input_box: (f64, f64),
    #[serde(default)]
    pub raw_grad_step: bool,
}

fn default_n_iter() -> usize {
    50
}

fn default_input_box() -> (f64, f64) {
    (0.0, 1.0)
}

impl AttackBlock {
    pub fn norm(&self) -> Result<Norm> {
        match self.norm.as_str() {
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::LInf),
            other => Err(LabError::config(format!(
                "attack.norm: unknown norm {other:?} (expected \"l2\" or \"linf\")"
            ))),
        }
    }

    pub fn core(&self, seed: u64) -> Result<AttackConfig> {
        let cfg = AttackConfig {
            norm: self.norm()?,
            epsilon: self.epsilon,
            alpha: self.alpha.unwrap_or(self.epsilon / 10.0),
            n_iter: self.n_iter,
            momentum: self.momentum,
            feature_noise_sigma: self.feature_noise_sigma,
            input_box: self.input_box,
            seed,
            raw_grad_step: self.raw_grad_step,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_target_count() -> usize {
    3
}

fn default_target_seed_base() -> u64 {
    9000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    #[serde(default = "default_target_count")]
    pub count: usize,
    #[serde(default = "default_target_seed_base")]
    pub seed_base: u64,
    /// Target architecture; defaults to the surrogate architecture
    /// (intra-architecture transfer).
    #[serde(default)]
    pub arch: Option<ModelSpecConfig>,
}

fn default_ray_alphas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.3).collect()
}

fn default_interp_alphas() -> Vec<f64> {
    (-4..=14).map(|i| i as f64 * 0.1).collect()
}

fn default_n_directions() -> usize {
    10
}

fn default_disk_grid() -> usize {
    21
}

fn default_hessian_iters() -> usize {
    200
}

fn default_hessian_tol() -> f64 {
    1e-6
}

fn default_trace_probes() -> usize {
    100
}

fn default_indiv_sample() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryBlock {
    pub ray_alphas: Vec<f64>,
    pub interp_alphas: Vec<f64>,
    pub n_directions: usize,
    /// Also craft attacks from each displaced surrogate and record the
    /// first target's loss (costly: one attack per point).
    pub adversarial_rays: bool,
    pub disk_grid_n: usize,
    /// Test-split example index around which the disk maps are built.
    pub disk_example: usize,
    pub hessian_max_iters: usize,
    pub hessian_tol: f64,
    pub trace_probes: usize,
    /// How many individual LGV members the hessian probe samples.
    pub individual_sample: usize,
    pub direction_seed_base: u64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        GeometryBlock {
            ray_alphas: default_ray_alphas(),
            interp_alphas: default_interp_alphas(),
            n_directions: default_n_directions(),
            adversarial_rays: false,
            disk_grid_n: default_disk_grid(),
            disk_example: 0,
            hessian_max_iters: default_hessian_iters(),
            hessian_tol: default_hessian_tol(),
            trace_probes: default_trace_probes(),
            individual_sample: default_indiv_sample(),
            direction_seed_base: 7100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelSpecConfig,
    pub training: TrainingConfig,
    pub lgv: LgvBlock,
    pub surrogates: Vec<SurrogateRecipe>,
    pub attack: AttackBlock,
    pub targets: TargetsConfig,
    /// Number of eval examples drawn (all targets must classify them
    /// correctly).
    pub n_eval: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub geometry: GeometryBlock,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(LabError::config("seeds must be non-empty"));
        }
        if self.n_eval == 0 {
            return Err(LabError::config("n_eval must be >= 1"));
        }
        if self.targets.count == 0 {
            return Err(LabError::config("targets.count must be >= 1"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for recipe in &self.surrogates {
            if !seen.insert(recipe.name()) {
                return Err(LabError::config(format!(
                    "duplicate surrogate name {:?}",
                    recipe.name()
                )));
            }
        }
        self.attack.norm()?;
        self.model.to_spec()?;
        Ok(())
    }

    /// The resolved output directory honouring the `LGV_OUTPUT_ROOT`
    /// environment variable.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os("LGV_OUTPUT_ROOT") {
            Some(root) if self.output_dir.is_relative() => {
                Path::new(&root).join(&self.output_dir)
            }
            _ => self.output_dir.clone(),
        }
    }

    /// Hash of the fully-resolved config (defaults applied, overrides
    /// folded in); the reproducibility fingerprint embedded in artifacts.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serialises");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// The benchmark configuration the test suites run against: 4-class
    /// blobs in 16 dimensions, a two-hidden-layer MLP, three
    /// independently seeded targets of the same architecture.
    pub fn standard_blobs() -> RunConfig {
        RunConfig {
            dataset: DatasetConfig::Blobs {
                classes: 4,
                dim: 16,
                train_per_class: 25,
                val_per_class: 200,
                test_per_class: 200,
                spread: 0.35,
                seed: 1,
            },
            model: ModelSpecConfig {
                layer_widths: vec![16, 32, 32, 4],
                activation: "relu".to_string(),
            },
            training: TrainingConfig {
                epochs: 60,
                lr: 0.1,
                schedule: ScheduleConfig::StepDecay {
                    factor: 0.1,
                    every: 25,
                },
                momentum: 0.9,
                batch_size: 100,
                weight_decay: 1e-4,
            },
            lgv: LgvBlock {
                n_epochs: 10,
                k: 40,
                lr: Some(0.08),
                batch_size: Some(16),
            },
            surrogates: vec![
                SurrogateRecipe::OneDnn { name: None },
                SurrogateRecipe::Rd {
                    name: None,
                    sigma: 5e-3,
                    k: 40,
                },
                SurrogateRecipe::Lgv { name: None },
                SurrogateRecipe::LgvSwa { name: None },
                SurrogateRecipe::LgvSwaRd {
                    name: None,
                    sigma: 1e-2,
                    k: 40,
                },
                SurrogateRecipe::SubspaceRd { name: None, k: 40 },
            ],
            attack: AttackBlock {
                norm: "linf".to_string(),
                epsilon: 0.12,
                alpha: None,
                n_iter: 50,
                momentum: 0.0,
                feature_noise_sigma: 0.0,
                input_box: (0.0, 1.0),
                raw_grad_step: false,
            },
            targets: TargetsConfig {
                count: 3,
                seed_base: 9000,
                arch: None,
            },
            n_eval: 400,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("out"),
            geometry: GeometryBlock::default(),
        }
    }
}

/// Load a config file and fold in `--set path=value` overrides before
/// deserialising.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| LabError::config(format!("{}: invalid JSON: {e}", path.display())))?;
    apply_overrides(&mut value, overrides)?;
    let cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Apply `a.b.c=value` overrides to a JSON tree. Values parse as JSON
/// first and fall back to strings, so `--set attack.epsilon=0.05` and
/// `--set attack.norm=l2` both work.
pub fn apply_overrides(value: &mut serde_json::Value, overrides: &[String]) -> Result<()> {
    for entry in overrides {
        let (path, raw) = entry
            .split_once('=')
            .ok_or_else(|| LabError::config(format!("override {entry:?} is not path=value")))?;
        let parsed: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let segments: Vec<&str> = path.split('.').collect();
        let (last, parents) = segments.split_last().unwrap();

        let mut cursor = &mut *value;
        for segment in parents {
            cursor = descend(cursor, segment, entry)?;
        }
        if let Ok(index) = last.parse::<usize>() {
            let arr = cursor.as_array_mut().ok_or_else(|| {
                LabError::config(format!("override {entry:?}: {last} indexes a non-array"))
            })?;
            if index >= arr.len() {
                return Err(LabError::config(format!(
                    "override {entry:?}: index {index} out of bounds"
                )));
            }
            arr[index] = parsed;
        } else {
            let obj = cursor.as_object_mut().ok_or_else(|| {
                LabError::config(format!("override {entry:?}: {last} indexes a non-object"))
            })?;
            obj.insert(last.to_string(), parsed);
        }
    }
    Ok(())
}

fn descend<'a>(
    value: &'a mut serde_json::Value,
    segment: &str,
    entry: &str,
) -> Result<&'a mut serde_json::Value> {
    if let Ok(index) = segment.parse::<usize>() {
        let arr = value.as_array_mut().ok_or_else(|| {
            LabError::config(format!("override {entry:?}: {segment} indexes a non-array"))
        })?;
        arr.get_mut(index).ok_or_else(|| {
            LabError::config(format!("override {entry:?}: index {index} out of bounds"))
        })
    } else {
        let obj = value.as_object_mut().ok_or_else(|| {
            LabError::config(format!("override {entry:?}: {segment} indexes a non-object"))
        })?;
        Ok(obj
            .entry(segment.to_string())
            .or_insert(serde_json::json!({})))
    }
}
