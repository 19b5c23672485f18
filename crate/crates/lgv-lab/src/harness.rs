//! The experiment pipeline behind every CLI command.
//!
//! A run follows the evaluation protocol end to end: per run seed it
//! trains (or loads) an initial DNN, collects LGV weights from it, builds
//! each configured surrogate recipe, crafts attacks on a seed-specific
//! subset of examples that every target classifies correctly, and scores
//! transfer per target. Targets are trained once with their own
//! independent seeds and shared across runs. Sweeps are scored on the
//! validation split; final reports use the test split.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lgv_core::attack::{evaluate, ifgsm, Norm, TransferReport, TransferRow, TransferSummary};
use lgv_core::data::{self, Dataset, Generator, SplitSizes};
use lgv_core::geometry;
use lgv_core::model::{Batch, Model, ModelSpec, WeightVector};
use lgv_core::rng;
use lgv_core::surrogate::{
    build_subspace, project_top_c, rd_vicinity, sample_subspace, shift_deviations,
};
use lgv_core::train::{collect_lgv, swa, train, EpochStat, WeightCollection};

use crate::config::{DatasetConfig, RunConfig, ShiftCenter, SurrogateRecipe};
use crate::error::{LabError, Result};
use crate::report::{self, ReportMeta};
use crate::weights::{read_weights, write_weights, Dtype};

// stream tags separating the independent uses of one run seed
const TAG_DONOR_TRAIN: u64 = 0xd0;
const TAG_DONOR_LGV: u64 = 0xd1;
const TAG_EXAMPLES: u64 = 0xe0;
const TAG_RD: u64 = 0xa0;
const TAG_SWA_RD: u64 = 0xa1;
const TAG_SUBSPACE: u64 = 0xa2;
const TAG_LGV_PICK: u64 = 0xa3;

/// Which split examples are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Val,
    Test,
}

/// Everything one run seed produces before attacking.
pub struct RunArtifacts {
    pub base: WeightVector,
    pub lgv: Option<WeightCollection>,
    pub donor_base: Option<WeightVector>,
    pub donor_lgv: Option<WeightCollection>,
}

impl RunArtifacts {
    fn lgv(&self) -> Result<&WeightCollection> {
        self.lgv
            .as_ref()
            .ok_or_else(|| LabError::config("recipe needs the LGV collection; run `collect` first"))
    }

    fn donor(&self) -> Result<&WeightCollection> {
        self.donor_lgv.as_ref().ok_or_else(|| {
            LabError::config("recipe needs a donor LGV collection; run `collect` first")
        })
    }
}

/// Where run artifacts come from: computed on the fly or loaded from the
/// weight files a previous `train`/`collect` wrote.
pub enum ArtifactSource {
    Fresh,
    Dir(PathBuf),
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub spec: ModelSpec,
    pub target_spec: ModelSpec,
    pub data: Dataset,
}

pub fn build_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    match cfg {
        DatasetConfig::Blobs {
            classes,
            dim,
            train_per_class,
            val_per_class,
            test_per_class,
            spread,
            seed,
        } => data::make_blobs(
            *classes,
            *dim,
            SplitSizes::new(*train_per_class, *val_per_class, *test_per_class),
            *spread,
            *seed,
        )
        .map_err(Into::into),
        DatasetConfig::Spirals {
            classes,
            train_per_class,
            val_per_class,
            test_per_class,
            noise,
            seed,
        } => data::make_spirals(
            *classes,
            SplitSizes::new(*train_per_class, *val_per_class, *test_per_class),
            *noise,
            *seed,
        )
        .map_err(Into::into),
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            val_fraction,
            seed,
        } => {
            let full_train = crate::idx::load_idx(train_images, train_labels)?;
            let test = crate::idx::load_idx(test_images, test_labels)?;
            if !(0.0..1.0).contains(val_fraction) {
                return Err(LabError::config("val_fraction must be in [0, 1)"));
            }
            let n = full_train.len();
            let n_val = ((n as f64) * val_fraction).round() as usize;
            if n_val == 0 || n_val >= n {
                return Err(LabError::config(
                    "val_fraction leaves an empty train or validation split",
                ));
            }
            let indices = rng::shuffled_indices(n, &mut rng::rng_from(*seed));
            let (val_idx, train_idx) = indices.split_at(n_val);
            let mut val_idx = val_idx.to_vec();
            let mut train_idx = train_idx.to_vec();
            val_idx.sort_unstable();
            train_idx.sort_unstable();
            Ok(Dataset {
                train: full_train.select(&train_idx)?,
                val: full_train.select(&val_idx)?,
                test,
                generator: Generator::IdxFile,
                seed: *seed,
            })
        }
    }
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.model.to_spec()?;
        let target_spec = match &cfg.targets.arch {
            Some(arch) => arch.to_spec()?,
            None => spec.clone(),
        };
        let data = build_dataset(&cfg.dataset)?;
        if data.input_dim() != spec.input_dim() {
            return Err(LabError::config(format!(
                "dataset dimension {} does not match model input dimension {}",
                data.input_dim(),
                spec.input_dim()
            )));
        }
        Ok(Pipeline {
            cfg,
            spec,
            target_spec,
            data,
        })
    }

    pub fn target_name(i: usize) -> String {
        format!("target_{i:02}")
    }

    pub fn target_seed(&self, i: usize) -> u64 {
        self.cfg.targets.seed_base + i as u64
    }

    /// Train every target with its own seed.
    pub fn train_targets(&self) -> Result<Vec<(String, Model, Vec<EpochStat>)>> {
        let mut out = Vec::with_capacity(self.cfg.targets.count);
        for i in 0..self.cfg.targets.count {
            let cfg = self.cfg.training.core(self.target_seed(i));
            let run = train(&self.target_spec, &self.data, &cfg, None)?;
            out.push((
                Self::target_name(i),
                Model::new(self.target_spec.clone(), run.weights)?,
                run.log,
            ));
        }
        Ok(out)
    }

    /// Train the initial DNN of one run seed.
    pub fn train_base(&self, run_seed: u64) -> Result<(WeightVector, Vec<EpochStat>)> {
        let cfg = self.cfg.training.core(run_seed);
        let run = train(&self.spec, &self.data, &cfg, None)?;
        Ok((run.weights, run.log))
    }

    /// Train the independent donor DNN used by shifted recipes.
    pub fn train_donor(&self, run_seed: u64) -> Result<(WeightVector, Vec<EpochStat>)> {
        let cfg = self.cfg.training.core(rng::derive(run_seed, TAG_DONOR_TRAIN));
        let run = train(&self.spec, &self.data, &cfg, None)?;
        Ok((run.weights, run.log))
    }

    /// Collect LGV weights from a trained base.
    pub fn collect(&self, w0: &WeightVector, seed: u64) -> Result<(WeightCollection, Vec<EpochStat>)> {
        let cfg = self.cfg.lgv.core(&self.cfg.training, seed);
        collect_lgv(&self.spec, &self.data, w0, &cfg).map_err(Into::into)
    }

    pub fn needs_donor(&self) -> bool {
        self.cfg.surrogates.iter().any(|r| r.needs_donor())
    }

    pub fn needs_lgv(&self) -> bool {
        self.cfg.surrogates.iter().any(|r| r.needs_lgv())
    }

    /// Produce (or load) everything one run seed needs.
    pub fn artifacts(&self, run_seed: u64, source: &ArtifactSource) -> Result<RunArtifacts> {
        match source {
            ArtifactSource::Fresh => {
                let (base, _) = self.train_base(run_seed)?;
                let lgv = if self.needs_lgv() {
                    Some(self.collect(&base, run_seed)?.0)
                } else {
                    None
                };
                let (donor_base, donor_lgv) = if self.needs_donor() {
                    let (donor, _) = self.train_donor(run_seed)?;
                    let (coll, _) =
                        self.collect(&donor, rng::derive(run_seed, TAG_DONOR_LGV))?;
                    (Some(donor), Some(coll))
                } else {
                    (None, None)
                };
                Ok(RunArtifacts {
                    base,
                    lgv,
                    donor_base,
                    donor_lgv,
                })
            }
            ArtifactSource::Dir(dir) => {
                let base = load_single(&base_path(dir, run_seed), &self.spec)?;
                let lgv = if self.needs_lgv() {
                    Some(load_collection(&lgv_path(dir, run_seed), &self.spec)?)
                } else {
                    None
                };
                let (donor_base, donor_lgv) = if self.needs_donor() {
                    (
                        Some(load_single(&donor_path(dir, run_seed), &self.spec)?),
                        Some(load_collection(&donor_lgv_path(dir, run_seed), &self.spec)?),
                    )
                } else {
                    (None, None)
                };
                Ok(RunArtifacts {
                    base,
                    lgv,
                    donor_base,
                    donor_lgv,
                })
            }
        }
    }

    /// Materialise one surrogate recipe for a run seed.
    pub fn build_surrogate(
        &self,
        recipe: &SurrogateRecipe,
        art: &RunArtifacts,
        run_seed: u64,
    ) -> Result<WeightCollection> {
        let coll = match recipe {
            SurrogateRecipe::OneDnn { .. } => WeightCollection::single(art.base.clone()),
            SurrogateRecipe::Rd { sigma, k, .. } => {
                rd_vicinity(&art.base, *sigma, *k, rng::derive(run_seed, TAG_RD))?
            }
            SurrogateRecipe::Lgv { .. } => art.lgv()?.clone(),
            SurrogateRecipe::LgvSwa { .. } => WeightCollection::single(swa(art.lgv()?)?),
            SurrogateRecipe::LgvSwaRd { sigma, k, .. } => rd_vicinity(
                &swa(art.lgv()?)?,
                *sigma,
                *k,
                rng::derive(run_seed, TAG_SWA_RD),
            )?,
            SurrogateRecipe::SubspaceRd { k, .. } => {
                let basis = build_subspace(art.lgv()?)?;
                sample_subspace(&basis, *k, rng::derive(run_seed, TAG_SUBSPACE))?
            }
            SurrogateRecipe::Projected { c, .. } => {
                let lgv = art.lgv()?;
                let basis = build_subspace(lgv)?;
                project_top_c(&basis, lgv, *c)?
            }
            SurrogateRecipe::Shifted { gamma, onto, .. } => {
                let donor_basis = build_subspace(art.donor()?)?;
                let center = match onto {
                    ShiftCenter::LgvSwa => swa(art.lgv()?)?,
                    ShiftCenter::OneDnn => art.base.clone(),
                };
                shift_deviations(&center, &donor_basis, *gamma)?
            }
        };
        Ok(coll)
    }

    /// Seed-specific evaluation examples: `n_eval` examples of the chosen
    /// split that every target classifies correctly.
    pub fn eval_examples(&self, targets: &[(String, Model)], split: Split, run_seed: u64) -> Result<Batch> {
        let batch = match split {
            Split::Val => &self.data.val,
            Split::Test => &self.data.test,
        };
        let models: Vec<Model> = targets.iter().map(|(_, m)| m.clone()).collect();
        data::select_correct(
            &models,
            batch,
            self.cfg.n_eval,
            rng::derive(run_seed, TAG_EXAMPLES),
        )
        .map_err(Into::into)
    }

    /// The full transfer protocol: per run seed, fresh (or loaded)
    /// surrogates and examples, one attack per recipe, scored on every
    /// target. Aggregates mean and standard deviation across seeds.
    pub fn transfer(
        &self,
        targets: &[(String, Model)],
        split: Split,
        source: &ArtifactSource,
    ) -> Result<TransferReport> {
        let attack_block = &self.cfg.attack;
        let target_models: Vec<Model> = targets.iter().map(|(_, m)| m.clone()).collect();
        let mut rates: BTreeMap<(String, String), Vec<(u64, f64, usize)>> = BTreeMap::new();

        for &seed in &self.cfg.seeds {
            let art = self.artifacts(seed, source)?;
            let batch = self.eval_examples(targets, split, seed)?;
            let cfg = attack_block.core(seed)?;
            for recipe in &self.cfg.surrogates {
                let surrogate = self.build_surrogate(recipe, &art, seed)?;
                let x_adv = ifgsm(&self.spec, &surrogate, &batch, &cfg)?;
                let per_target = evaluate(&target_models, &x_adv, &batch)?;
                for ((t_name, _), rate) in targets.iter().zip(per_target) {
                    rates
                        .entry((recipe.name(), t_name.clone()))
                        .or_default()
                        .push((seed, rate, batch.len()));
                }
            }
        }

        let norm = attack_block.norm()?;
        let mut report = TransferReport::default();
        for recipe in &self.cfg.surrogates {
            for (t_name, _) in targets {
                let cell = &rates[&(recipe.name(), t_name.clone())];
                for &(seed, rate, n) in cell {
                    report.rows.push(TransferRow {
                        surrogate: recipe.name(),
                        target: t_name.clone(),
                        norm,
                        epsilon: attack_block.epsilon,
                        seed,
                        success_rate: rate,
                        n_examples: n,
                    });
                }
                let mean = cell.iter().map(|(_, r, _)| r).sum::<f64>() / cell.len() as f64;
                let sd = if cell.len() < 2 {
                    0.0
                } else {
                    (cell
                        .iter()
                        .map(|(_, r, _)| (r - mean) * (r - mean))
                        .sum::<f64>()
                        / (cell.len() - 1) as f64)
                        .sqrt()
                };
                report.summary.push(TransferSummary {
                    surrogate: recipe.name(),
                    target: t_name.clone(),
                    norm,
                    epsilon: attack_block.epsilon,
                    mean,
                    sd,
                    n_seeds: cell.len(),
                });
            }
        }
        Ok(report)
    }
}

// ---------------------------------------------------------------------------
// artifact layout

pub fn weights_dir(out: &Path) -> PathBuf {
    out.join("weights")
}

pub fn logs_dir(out: &Path) -> PathBuf {
    out.join("logs")
}

pub fn reports_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

pub fn base_path(out: &Path, seed: u64) -> PathBuf {
    weights_dir(out).join(format!("base_s{seed}.lgvw"))
}

pub fn donor_path(out: &Path, seed: u64) -> PathBuf {
    weights_dir(out).join(format!("donor_s{seed}.lgvw"))
}

pub fn lgv_path(out: &Path, seed: u64) -> PathBuf {
    weights_dir(out).join(format!("lgv_s{seed}.lgvw"))
}

pub fn donor_lgv_path(out: &Path, seed: u64) -> PathBuf {
    weights_dir(out).join(format!("lgv_donor_s{seed}.lgvw"))
}

pub fn target_path(out: &Path, i: usize) -> PathBuf {
    weights_dir(out).join(format!("target_{i:02}.lgvw"))
}

fn load_single(path: &Path, spec: &ModelSpec) -> Result<WeightVector> {
    let (file_spec, coll) = read_weights(path)?;
    if &file_spec != spec {
        return Err(LabError::config(format!(
            "{}: file spec {file_spec} does not match configured model {spec}",
            path.display()
        )));
    }
    Ok(coll.weights()[0].clone())
}

fn load_collection(path: &Path, spec: &ModelSpec) -> Result<WeightCollection> {
    let (file_spec, coll) = read_weights(path)?;
    if &file_spec != spec {
        return Err(LabError::config(format!(
            "{}: file spec {file_spec} does not match configured model {spec}",
            path.display()
        )));
    }
    Ok(coll)
}

fn load_targets(pipeline: &Pipeline, out: &Path) -> Result<Vec<(String, Model)>> {
    let mut targets = Vec::with_capacity(pipeline.cfg.targets.count);
    for i in 0..pipeline.cfg.targets.count {
        let path = target_path(out, i);
        let (file_spec, coll) = read_weights(&path)?;
        if &file_spec != &pipeline.target_spec {
            return Err(LabError::config(format!(
                "{}: target spec mismatch",
                path.display()
            )));
        }
        targets.push((
            Pipeline::target_name(i),
            Model::new(file_spec, coll.weights()[0].clone())?,
        ));
    }
    Ok(targets)
}

// ---------------------------------------------------------------------------
// commands

fn meta(cfg: &RunConfig) -> ReportMeta {
    ReportMeta {
        config_hash: cfg.hash(),
        seeds: cfg.seeds.clone(),
    }
}

/// `train`: targets plus the per-seed initial (and donor) DNNs, persisted
/// as LGVW files with per-model training logs.
pub fn cmd_train(cfg: RunConfig) -> Result<()> {
    let out = cfg.resolved_output_dir();
    let pipeline = Pipeline::new(cfg)?;
    let m = meta(&pipeline.cfg);

    for (i, (name, model, log)) in pipeline.train_targets()?.into_iter().enumerate() {
        write_weights(
            &target_path(&out, i),
            &pipeline.target_spec,
            &WeightCollection::single(model.weights().clone()),
            Dtype::F64,
        )?;
        report::write_training_log(&logs_dir(&out).join(format!("train_{name}.csv")), &m, &log)?;
        println!(
            "trained {name} (seed {}): val acc {:.4}",
            pipeline.target_seed(i),
            log.last().map(|s| s.val_accuracy).unwrap_or(f64::NAN)
        );
    }

    for &seed in &pipeline.cfg.seeds {
        let (base, log) = pipeline.train_base(seed)?;
        write_weights(
            &base_path(&out, seed),
            &pipeline.spec,
            &WeightCollection::single(base),
            Dtype::F64,
        )?;
        report::write_training_log(
            &logs_dir(&out).join(format!("train_base_s{seed}.csv")),
            &m,
            &log,
        )?;
        println!(
            "trained base_s{seed}: val acc {:.4}",
            log.last().map(|s| s.val_accuracy).unwrap_or(f64::NAN)
        );

        if pipeline.needs_donor() {
            let (donor, dlog) = pipeline.train_donor(seed)?;
            write_weights(
                &donor_path(&out, seed),
                &pipeline.spec,
                &WeightCollection::single(donor),
                Dtype::F64,
            )?;
            report::write_training_log(
                &logs_dir(&out).join(format!("train_donor_s{seed}.csv")),
                &m,
                &dlog,
            )?;
            println!(
                "trained donor_s{seed}: val acc {:.4}",
                dlog.last().map(|s| s.val_accuracy).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

/// `collect`: the LGV weight collections for each run seed (and the donor
/// collections when shifted recipes are configured).
pub fn cmd_collect(cfg: RunConfig) -> Result<()> {
    let out = cfg.resolved_output_dir();
    let pipeline = Pipeline::new(cfg)?;
    let m = meta(&pipeline.cfg);

    for &seed in &pipeline.cfg.seeds {
        let base = load_single(&base_path(&out, seed), &pipeline.spec)?;
        let (coll, log) = pipeline.collect(&base, seed)?;
        write_weights(&lgv_path(&out, seed), &pipeline.spec, &coll, Dtype::F64)?;
        report::write_training_log(
            &logs_dir(&out).join(format!("collect_s{seed}.csv")),
            &m,
            &log,
        )?;
        println!(
            "collected lgv_s{seed}: K={} lr={}",
            coll.len(),
            coll.meta().lr
        );

        if pipeline.needs_donor() {
            let donor = load_single(&donor_path(&out, seed), &pipeline.spec)?;
            let (dcoll, dlog) =
                pipeline.collect(&donor, rng::derive(seed, TAG_DONOR_LGV))?;
            write_weights(
                &donor_lgv_path(&out, seed),
                &pipeline.spec,
                &dcoll,
                Dtype::F64,
            )?;
            report::write_training_log(
                &logs_dir(&out).join(format!("collect_donor_s{seed}.csv")),
                &m,
                &dlog,
            )?;
            println!("collected lgv_donor_s{seed}: K={}", dcoll.len());
        }
    }
    Ok(())
}

/// `attack`: the transfer matrix over all configured recipes and targets
/// on the test split, as CSV and JSON.
pub fn cmd_attack(cfg: RunConfig) -> Result<()> {
    let out = cfg.resolved_output_dir();
    let pipeline = Pipeline::new(cfg)?;
    let m = meta(&pipeline.cfg);
    let targets = load_targets(&pipeline, &out)?;
    let report_data = pipeline.transfer(&targets, Split::Test, &ArtifactSource::Dir(out.clone()))?;

    let reports = reports_dir(&out);
    report::write_transfer_csv(&reports.join("transfer.csv"), &m, &report_data.rows)?;
    report::write_transfer_summary_csv(
        &reports.join("transfer_summary.csv"),
        &m,
        &report_data.summary,
    )?;
    report::write_transfer_json(&reports.join("transfer.json"), &m, &report_data)?;

    for s in &report_data.summary {
        println!(
            "{:<24} -> {:<12} {:.4} ±{:.4}",
            s.surrogate, s.target, s.mean, s.sd
        );
    }
    println!("wrote {}", reports.join("transfer.csv").display());
    Ok(())
}

/// Geometry probes exposed by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryProbe {
    Rays,
    Interpolate,
    Hessian,
    Disk,
    Pca,
}

/// `geometry <probe>`: landscape probes on the first run seed's artifacts.
pub fn cmd_geometry(cfg: RunConfig, probe: GeometryProbe) -> Result<()> {
    let out = cfg.resolved_output_dir();
    let pipeline = Pipeline::new(cfg)?;
    let m = meta(&pipeline.cfg);
    let seed = pipeline.cfg.seeds[0];
    let targets = load_targets(&pipeline, &out)?;

    let base = load_single(&base_path(&out, seed), &pipeline.spec)?;
    let lgv = load_collection(&lgv_path(&out, seed), &pipeline.spec)?;
    let lgv_swa = swa(&lgv)?;
    let reports = reports_dir(&out);
    let geo = &pipeline.cfg.geometry;

    match probe {
        GeometryProbe::Rays => {
            // one random individual LGV member, the same for every direction
            let pick = (rng::derive(seed, TAG_LGV_PICK) % lgv.len() as u64) as usize;
            let origins: Vec<(String, &WeightVector)> = vec![
                ("one_dnn".into(), &base),
                ("lgv_individual".into(), &lgv.weights()[pick]),
                ("lgv_swa".into(), &lgv_swa),
            ];
            let eval_batch = pipeline.eval_examples(&targets, Split::Test, seed)?;
            let mut rows = Vec::new();
            for dir_idx in 0..geo.n_directions {
                let dir_seed = rng::derive(geo.direction_seed_base, dir_idx as u64);
                for (name, origin) in &origins {
                    let natural = geometry::ray_losses(
                        &pipeline.spec,
                        origin,
                        dir_seed,
                        &geo.ray_alphas,
                        &pipeline.data.train,
                        geometry::ProbeMode::NaturalLoss,
                    )?;
                    let adversarial = if geo.adversarial_rays {
                        let cfg = pipeline.cfg.attack.core(seed)?;
                        Some(geometry::ray_losses(
                            &pipeline.spec,
                            origin,
                            dir_seed,
                            &geo.ray_alphas,
                            &eval_batch,
                            geometry::ProbeMode::AdversarialLoss {
                                target: &targets[0].1,
                                cfg: &cfg,
                            },
                        )?)
                    } else {
                        None
                    };
                    let hash = report::direction_hash(&natural.direction);
                    for (i, (&alpha, &loss)) in
                        natural.alphas.iter().zip(&natural.losses).enumerate()
                    {
                        rows.push(report::RayRow {
                            origin: name.clone(),
                            direction_seed: dir_seed,
                            direction_hash: hash.clone(),
                            alpha,
                            natural_loss: loss,
                            adversarial_loss: adversarial.as_ref().map(|p| p.losses[i]),
                        });
                    }
                }
            }
            let path = reports.join("rays.csv");
            report::write_rays_csv(&path, &m, &rows)?;
            println!("wrote {}", path.display());
        }
        GeometryProbe::Interpolate => {
            let eval_batch = pipeline.eval_examples(&targets, Split::Test, seed)?;
            let attack_cfg = pipeline.cfg.attack.core(seed)?;
            let mut rows = Vec::new();
            for &alpha in &geo.interp_alphas {
                // w(alpha) = alpha w0 + (1 - alpha) w_swa
                let probe = geometry::interpolate(
                    &pipeline.spec,
                    &base,
                    &lgv_swa,
                    &[alpha],
                    &pipeline.data.train,
                    geometry::ProbeMode::NaturalLoss,
                )?;
                let natural = probe.losses[0];
                let values: Vec<f64> = base
                    .values()
                    .iter()
                    .zip(lgv_swa.values())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect();
                let displaced = pipeline.spec.bind(values)?;
                let surrogate = WeightCollection::single(displaced);
                let x_adv = ifgsm(&pipeline.spec, &surrogate, &eval_batch, &attack_cfg)?;
                let adv_batch = eval_batch.with_inputs(x_adv)?;
                let mut target_losses = Vec::with_capacity(targets.len());
                for (_, t) in &targets {
                    target_losses.push(t.loss(&adv_batch)?);
                }
                rows.push(report::InterpRow {
                    alpha,
                    natural_loss: natural,
                    target_losses,
                });
            }
            let names: Vec<String> = targets.iter().map(|(n, _)| n.clone()).collect();
            let path = reports.join("interpolation.csv");
            report::write_interp_csv(&path, &m, &names, &rows)?;
            println!("wrote {}", path.display());
        }
        GeometryProbe::Hessian => {
            let batch = &pipeline.data.train;
            let mut rows = Vec::new();
            let mut push = |name: &str, member: Option<usize>, w: &WeightVector| -> Result<()> {
                let pi = geometry::hessian_max_eigenvalue(
                    &pipeline.spec,
                    w,
                    batch,
                    geo.hessian_max_iters,
                    geo.hessian_tol,
                    rng::derive(seed, 0x11),
                )?;
                let trace = geometry::hessian_trace(
                    &pipeline.spec,
                    w,
                    batch,
                    geo.trace_probes,
                    rng::derive(seed, 0x12),
                )?;
                rows.push(report::HessianRow {
                    model: name.to_string(),
                    member,
                    max_eigenvalue: pi.eigenvalue,
                    power_iterations: pi.history.len(),
                    trace,
                });
                Ok(())
            };
            push("one_dnn", None, &base)?;
            push("lgv_swa", None, &lgv_swa)?;
            let step = (lgv.len() / geo.individual_sample.max(1)).max(1);
            for (i, w) in lgv.weights().iter().enumerate().step_by(step) {
                push("lgv_individual", Some(i), w)?;
            }
            let path = reports.join("hessian.csv");
            report::write_hessian_csv(&path, &m, &rows)?;
            println!("wrote {}", path.display());
        }
        GeometryProbe::Disk => {
            // the disk construction relies on the L2 ball/plane intersection
            let mut attack_cfg = pipeline.cfg.attack.core(seed)?;
            attack_cfg.norm = Norm::L2;
            let eval_batch = pipeline.eval_examples(&targets, Split::Test, seed)?;
            let idx = geo.disk_example;
            if idx >= eval_batch.len() {
                return Err(LabError::config(format!(
                    "geometry.disk_example {idx} out of range (have {} examples)",
                    eval_batch.len()
                )));
            }
            let single = eval_batch.select(&[idx])?;
            let x = single.inputs().row(0).to_vec();
            let label = single.labels()[0];

            let adv_lgv = ifgsm(&pipeline.spec, &lgv, &single, &attack_cfg)?;
            let one_dnn = WeightCollection::single(base.clone());
            let adv_dnn = ifgsm(&pipeline.spec, &one_dnn, &single, &attack_cfg)?;
            let (u, v) = geometry::plane_basis(&x, adv_lgv.row(0), adv_dnn.row(0))?;

            let mut maps: Vec<(String, PathBuf)> = Vec::new();
            let mut emit = |name: &str, weights: &[WeightVector]| -> Result<()> {
                let map = geometry::disk_loss_map(
                    &pipeline.spec,
                    weights,
                    &x,
                    label,
                    (&u, &v),
                    attack_cfg.epsilon,
                    geo.disk_grid_n | 1, // ensure odd
                    attack_cfg.input_box,
                )?;
                let path = reports.join(format!("disk_{name}.csv"));
                report::write_disk_csv(&path, &m, &map)?;
                maps.push((name.to_string(), path));
                Ok(())
            };
            emit("lgv", lgv.weights())?;
            emit("one_dnn", core::slice::from_ref(&base))?;
            for (name, model) in &targets {
                if model.spec() == &pipeline.spec {
                    emit(name, core::slice::from_ref(model.weights()))?;
                }
            }
            for (_, path) in &maps {
                println!("wrote {}", path.display());
            }
        }
        GeometryProbe::Pca => {
            let basis = build_subspace(&lgv)?;
            let path = reports.join("pca.csv");
            report::write_pca_csv(&path, &m, &basis)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parameters `sweep` can vary; each value runs a full in-memory pipeline
/// scored on the validation split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// LGV collection learning rate; 0 degenerates to the initial DNN.
    Lr,
    /// Number of LGV epochs (weights per epoch kept fixed).
    Epochs,
    /// Snapshots per epoch (total K = value * n_epochs).
    WeightsPerEpoch,
    /// Attack iterations.
    Iterations,
    /// Noise scale of the LGV-SWA + RD surrogate.
    Sigma,
    /// Scale of donor deviations shifted onto the initial DNN.
    Gamma,
    /// Number of principal components kept.
    C,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Lr => "lr",
            SweepParam::Epochs => "epochs",
            SweepParam::WeightsPerEpoch => "weights_per_epoch",
            SweepParam::Iterations => "iterations",
            SweepParam::Sigma => "sigma",
            SweepParam::Gamma => "gamma",
            SweepParam::C => "c",
        }
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepParam::Lr => vec![0.0, 0.0125, 0.025, 0.05, 0.1, 0.2],
            SweepParam::Epochs => vec![2.0, 5.0, 10.0, 15.0],
            SweepParam::WeightsPerEpoch => vec![1.0, 2.0, 4.0, 8.0],
            SweepParam::Iterations => vec![10.0, 25.0, 50.0, 100.0],
            SweepParam::Sigma => vec![1e-4, 1e-3, 5e-3, 1e-2, 5e-2],
            SweepParam::Gamma => vec![0.0, 0.25, 0.5, 0.75, 1.0],
            SweepParam::C => vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0],
        }
    }
}

/// `sweep <param>`: rebuild the pipeline per value and score the swept
/// surrogate on the validation split. Emits per-seed rows and a
/// mean/sd summary.
pub fn cmd_sweep(cfg: RunConfig, param: SweepParam, values: Option<Vec<f64>>) -> Result<()> {
    let out = cfg.resolved_output_dir();
    let pipeline = Pipeline::new(cfg)?;
    let m = meta(&pipeline.cfg);
    let values = values.unwrap_or_else(|| param.default_values());
    if values.is_empty() {
        return Err(LabError::config("sweep needs at least one value"));
    }

    let targets: Vec<(String, Model)> = pipeline
        .train_targets()?
        .into_iter()
        .map(|(n, model, _)| (n, model))
        .collect();
    let target_models: Vec<Model> = targets.iter().map(|(_, t)| t.clone()).collect();

    // bases (and donors) do not depend on the swept value: compute once
    let mut bases: BTreeMap<u64, WeightVector> = BTreeMap::new();
    let mut donors: BTreeMap<u64, WeightCollection> = BTreeMap::new();
    for &seed in &pipeline.cfg.seeds {
        let (base, _) = pipeline.train_base(seed)?;
        if matches!(param, SweepParam::Gamma) {
            let (donor, _) = pipeline.train_donor(seed)?;
            let (coll, _) = pipeline.collect(&donor, rng::derive(seed, TAG_DONOR_LGV))?;
            donors.insert(seed, coll);
        }
        bases.insert(seed, base);
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &value in &values {
        let mut per_target: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &seed in &pipeline.cfg.seeds {
            let base = &bases[&seed];
            let mut attack_cfg = pipeline.cfg.attack.core(seed)?;
            let surrogate = match param {
                SweepParam::Lr => {
                    if value == 0.0 {
                        WeightCollection::single(base.clone())
                    } else {
                        let mut lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                        lgv_cfg.lr = value;
                        collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0
                    }
                }
                SweepParam::Epochs => {
                    let mut lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                    let per_epoch =
                        (lgv_cfg.k as f64 / lgv_cfg.n_epochs as f64).round().max(1.0) as usize;
                    lgv_cfg.n_epochs = value.round().max(1.0) as usize;
                    lgv_cfg.k = per_epoch * lgv_cfg.n_epochs;
                    collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0
                }
                SweepParam::WeightsPerEpoch => {
                    let mut lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                    lgv_cfg.k = (value.round().max(1.0) as usize) * lgv_cfg.n_epochs;
                    collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0
                }
                SweepParam::Iterations => {
                    attack_cfg.n_iter = value.round().max(1.0) as usize;
                    let lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                    collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0
                }
                SweepParam::Sigma => {
                    let lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                    let coll = collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0;
                    rd_vicinity(
                        &swa(&coll)?,
                        value,
                        coll.len(),
                        rng::derive(seed, TAG_SWA_RD),
                    )?
                }
                SweepParam::Gamma => {
                    let basis = build_subspace(&donors[&seed])?;
                    shift_deviations(base, &basis, value)?
                }
                SweepParam::C => {
                    let lgv_cfg = pipeline.cfg.lgv.core(&pipeline.cfg.training, seed);
                    let coll = collect_lgv(&pipeline.spec, &pipeline.data, base, &lgv_cfg)?.0;
                    let c = value.round().max(0.0) as usize;
                    if c > coll.len() {
                        return Err(LabError::config(format!(
                            "C = {c} exceeds the collection size {}",
                            coll.len()
                        )));
                    }
                    let basis = build_subspace(&coll)?;
                    project_top_c(&basis, &coll, c)?
                }
            };

            let batch = pipeline.eval_examples(&targets, Split::Val, seed)?;
            let x_adv = ifgsm(&pipeline.spec, &surrogate, &batch, &attack_cfg)?;
            for ((t_name, _), rate) in targets
                .iter()
                .zip(evaluate(&target_models, &x_adv, &batch)?)
            {
                rows.push(report::SweepRow {
                    value,
                    target: t_name.clone(),
                    seed,
                    success_rate: rate,
                    n_examples: batch.len(),
                });
                per_target.entry(t_name.clone()).or_default().push(rate);
            }
        }
        for (t_name, rates) in per_target {
            let mean = rates.iter().sum::<f64>() / rates.len() as f64;
            let sd = if rates.len() < 2 {
                0.0
            } else {
                (rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
                    / (rates.len() - 1) as f64)
                    .sqrt()
            };
            summary.push(report::SweepSummaryRow {
                value,
                target: t_name,
                mean,
                sd,
            });
        }
    }

    let reports = reports_dir(&out);
    let path = reports.join(format!("sweep_{}.csv", param.name()));
    report::write_sweep_csv(&path, &m, param.name(), &rows)?;
    report::write_sweep_summary_csv(
        &reports.join(format!("sweep_{}_summary.csv", param.name())),
        &m,
        param.name(),
        &summary,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
