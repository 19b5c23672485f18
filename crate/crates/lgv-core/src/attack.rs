//! Iterative projected gradient attacks over multi-weight surrogates.
//!
//! The attack follows the classic iterated-FGSM scheme with one twist: the
//! surrogate is a whole [`WeightCollection`]. Its members are shuffled once
//! per attack and iteration `i` differentiates member `i mod K`, cycling in
//! the same order when there are more iterations than weights. Each
//! iteration takes an ascent step, projects back into the `eps`-ball around
//! the original inputs and clips to the input box, so every intermediate
//! iterate satisfies both constraints.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{self, Batch, Matrix, Model, ModelSpec};
use crate::train::WeightCollection;

/// Perturbation norm of the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L2,
    LInf,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::L2 => write!(f, "l2"),
            Norm::LInf => write!(f, "linf"),
        }
    }
}

/// Attack hyperparameters.
///
/// `alpha` defaults to `epsilon / 10` and `n_iter` to 50. `momentum = 0`
/// disables gradient momentum; `feature_noise_sigma > 0` adds Gaussian
/// white noise to the input gradients before each step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub norm: Norm,
    pub epsilon: f64,
    pub alpha: f64,
    pub n_iter: usize,
    pub momentum: f64,
    pub feature_noise_sigma: f64,
    pub input_box: (f64, f64),
    pub seed: u64,
    /// Step with the raw gradient instead of the sign / L2-normalised
    /// direction (kept for fidelity experiments; off by default).
    pub raw_grad_step: bool,
}

impl AttackConfig {
    pub fn new(norm: Norm, epsilon: f64) -> Result<Self> {
        let cfg = AttackConfig {
            norm,
            epsilon,
            alpha: epsilon / 10.0,
            n_iter: 50,
            momentum: 0.0,
            feature_noise_sigma: 0.0,
            input_box: (0.0, 1.0),
            seed: 0,
            raw_grad_step: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be > 0"));
        }
        if !(self.alpha > 0.0) {
            return Err(invalid("alpha must be > 0"));
        }
        if self.alpha > self.epsilon {
            return Err(invalid("alpha must not exceed epsilon"));
        }
        if self.n_iter == 0 {
            return Err(invalid("n_iter must be >= 1"));
        }
        if self.momentum < 0.0 {
            return Err(invalid("momentum must be >= 0"));
        }
        if self.feature_noise_sigma < 0.0 {
            return Err(invalid("feature_noise_sigma must be >= 0"));
        }
        if !(self.input_box.0 < self.input_box.1) {
            return Err(invalid("input box must satisfy lo < hi"));
        }
        Ok(())
    }
}

/// Project each row of `x_adv` into the `eps`-ball (of the given norm)
/// centred on the matching row of `x`.
///
/// For `LInf` the perturbation is clamped coordinate-wise to `[-eps, eps]`;
/// for `L2` it is rescaled by `eps / ||delta||` when outside the ball and
/// left untouched otherwise. Both are the exact nearest-point projections.
pub fn project_ball(x_adv: &Matrix, x: &Matrix, norm: Norm, eps: f64) -> Matrix {
    debug_assert_eq!(x_adv.rows(), x.rows());
    debug_assert_eq!(x_adv.cols(), x.cols());
    let mut out = x_adv.clone();
    for r in 0..x.rows() {
        let base = x.row(r);
        let row = out.row_mut(r);
        match norm {
            Norm::LInf => {
                for (v, b) in row.iter_mut().zip(base) {
                    *v = b + (*v - b).clamp(-eps, eps);
                }
            }
            Norm::L2 => {
                let mut sq = 0.0;
                for (v, b) in row.iter().zip(base) {
                    let d = v - b;
                    sq += d * d;
                }
                let dist = libm::sqrt(sq);
                if dist > eps {
                    let scale = eps / dist;
                    for (v, b) in row.iter_mut().zip(base) {
                        *v = b + (*v - b) * scale;
                    }
                }
            }
        }
    }
    out
}

fn clip_box(x: &mut Matrix, lo: f64, hi: f64) {
    for v in x.as_mut_slice() {
        *v = v.clamp(lo, hi);
    }
}

/// The order in which a seeded attack consumes surrogate members: a single
/// shuffle of `0..k`, cycled. Exposed so harnesses and tests can reproduce
/// which weights an attack touched.
pub fn attack_weight_order(k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut crate::rng::rng_from(seed));
    order
}

/// Iterated FGSM over a multi-weight surrogate. Returns the adversarial
/// inputs; the batch keeps its labels.
pub fn ifgsm(
    spec: &ModelSpec,
    surrogate: &WeightCollection,
    b: &Batch,
    cfg: &AttackConfig,
) -> Result<Matrix> {
    ifgsm_recording(spec, surrogate, b, cfg, &mut |_| {})
}

/// [`ifgsm`] with an observer invoked after every iteration's
/// project-and-clip, receiving the current iterate.
pub fn ifgsm_recording(
    spec: &ModelSpec,
    surrogate: &WeightCollection,
    b: &Batch,
    cfg: &AttackConfig,
    observe: &mut dyn FnMut(&Matrix),
) -> Result<Matrix> {
    cfg.validate()?;
    if surrogate.spec_hash() != spec.hash() {
        return Err(Error::SpecMismatch {
            expected: spec.hash(),
            found: surrogate.spec_hash(),
        });
    }
    let (lo, hi) = cfg.input_box;
    if b.inputs().as_slice().iter().any(|&v| v < lo || v > hi) {
        return Err(invalid("batch inputs lie outside the input box"));
    }

    let k = surrogate.len();
    let mut rng = crate::rng::rng_from(cfg.seed);
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);

    let x = b.inputs().clone();
    let mut x_adv = x.clone();
    let n = x.rows();
    let d = x.cols();
    let use_momentum = cfg.momentum > 0.0;
    let mut momentum_buf = if use_momentum {
        Some(Matrix::zeros(n, d))
    } else {
        None
    };

    for iter in 0..cfg.n_iter {
        let w = &surrogate.weights()[order[iter % k]];
        let eval_batch = b.with_inputs(x_adv.clone())?;
        let mut grad = model::grad_input(spec, w, &eval_batch)?;
        if grad.as_slice().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: iter });
        }

        if cfg.feature_noise_sigma > 0.0 {
            let sigma = cfg.feature_noise_sigma;
            for g in grad.as_mut_slice() {
                let e: f64 = rng.sample(StandardNormal);
                *g += sigma * e;
            }
        }

        for r in 0..n {
            let g = grad.row(r);
            let step_dir: Vec<f64> = if let Some(buf) = momentum_buf.as_mut() {
                // accumulate the L1-normalised gradient
                let l1 = linalg::norm1(g);
                let m = buf.row_mut(r);
                for (mi, gi) in m.iter_mut().zip(g) {
                    *mi = cfg.momentum * *mi + if l1 > 0.0 { gi / l1 } else { 0.0 };
                }
                m.to_vec()
            } else {
                g.to_vec()
            };

            let row = x_adv.row_mut(r);
            if cfg.raw_grad_step {
                linalg::axpy(row, &step_dir, cfg.alpha);
            } else {
                match cfg.norm {
                    Norm::LInf => {
                        for (xi, di) in row.iter_mut().zip(&step_dir) {
                            let s = if *di > 0.0 {
                                1.0
                            } else if *di < 0.0 {
                                -1.0
                            } else {
                                0.0
                            };
                            *xi += cfg.alpha * s;
                        }
                    }
                    Norm::L2 => {
                        let norm = linalg::norm2(&step_dir);
                        if norm > 0.0 {
                            linalg::axpy(row, &step_dir, cfg.alpha / norm);
                        }
                    }
                }
            }
        }

        x_adv = project_ball(&x_adv, &x, cfg.norm, cfg.epsilon);
        clip_box(&mut x_adv, lo, hi);
        observe(&x_adv);
    }

    Ok(x_adv)
}

/// Per-target misclassification rates of adversarial inputs, in target
/// order. The batch is expected to be pre-filtered so every target
/// classifies the clean inputs correctly.
pub fn evaluate(targets: &[Model], x_adv: &Matrix, b: &Batch) -> Result<Vec<f64>> {
    if x_adv.rows() != b.len() {
        return Err(invalid("adversarial inputs do not match the batch size"));
    }
    let mut rates = Vec::with_capacity(targets.len());
    for t in targets {
        let preds = t.predictions(x_adv)?;
        let fooled = preds
            .iter()
            .zip(b.labels())
            .filter(|(p, y)| p != y)
            .count();
        rates.push(fooled as f64 / b.len() as f64);
    }
    Ok(rates)
}

/// One `(surrogate, target, seed)` cell of a transfer experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub surrogate: String,
    pub target: String,
    pub norm: Norm,
    pub epsilon: f64,
    pub seed: u64,
    pub success_rate: f64,
    pub n_examples: usize,
}

/// Mean and standard deviation over seeds for one `(surrogate, target)`
/// pair. The deviation is the sample standard deviation, zero for a single
/// seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferSummary {
    pub surrogate: String,
    pub target: String,
    pub norm: Norm,
    pub epsilon: f64,
    pub mean: f64,
    pub sd: f64,
    pub n_seeds: usize,
}

/// Full transfer experiment output: per-seed rows plus per-pair summaries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransferReport {
    pub rows: Vec<TransferRow>,
    pub summary: Vec<TransferSummary>,
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

/// Cartesian product of attacks and evaluations: craft once per
/// `(surrogate, seed)`, evaluate on every target, then aggregate across
/// seeds. Row order is surrogates x targets x seeds as given.
pub fn transfer_matrix(
    spec: &ModelSpec,
    surrogates: &[(String, WeightCollection)],
    targets: &[(String, Model)],
    b: &Batch,
    cfg: &AttackConfig,
    seeds: &[u64],
) -> Result<TransferReport> {
    if seeds.is_empty() {
        return Err(invalid("at least one seed required"));
    }
    let target_models: Vec<Model> = targets.iter().map(|(_, m)| m.clone()).collect();

    // rates[surrogate][target][seed]
    let mut rates = vec![vec![Vec::with_capacity(seeds.len()); targets.len()]; surrogates.len()];
    for &seed in seeds {
        for (si, (_, coll)) in surrogates.iter().enumerate() {
            let cfg_run = cfg.clone().with_seed(seed);
            let x_adv = ifgsm(spec, coll, b, &cfg_run)?;
            for (ti, rate) in evaluate(&target_models, &x_adv, b)?.iter().enumerate() {
                rates[si][ti].push(*rate);
            }
        }
    }

    let mut report = TransferReport::default();
    for (si, (s_name, _)) in surrogates.iter().enumerate() {
        for (ti, (t_name, _)) in targets.iter().enumerate() {
            let per_seed = &rates[si][ti];
            for (rate, &seed) in per_seed.iter().zip(seeds) {
                report.rows.push(TransferRow {
                    surrogate: s_name.clone(),
                    target: t_name.clone(),
                    norm: cfg.norm,
                    epsilon: cfg.epsilon,
                    seed,
                    success_rate: *rate,
                    n_examples: b.len(),
                });
            }
            let mean = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
            report.summary.push(TransferSummary {
                surrogate: s_name.clone(),
                target: t_name.clone(),
                norm: cfg.norm,
                epsilon: cfg.epsilon,
                mean,
                sd: sample_sd(per_seed, mean),
                n_seeds: per_seed.len(),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, ModelSpec, WeightVector};
    use crate::train::{CollectionMeta, WeightCollection};
    use alloc::string::ToString;

    fn linear_two_class() -> (ModelSpec, WeightVector) {
        let spec = ModelSpec::new(vec![2, 2], Activation::Relu).unwrap();
        // logits: [x0 - 2 x1, -x0 + 2 x1]
        let w = spec.bind(vec![1.0, -2.0, -1.0, 2.0, 0.0, 0.0]).unwrap();
        (spec, w)
    }

    fn batch_one(x: [f64; 2], y: usize) -> Batch {
        Batch::new(Matrix::from_vec(1, 2, x.to_vec()).unwrap(), vec![y]).unwrap()
    }

    #[test]
    fn project_ball_identity_inside() {
        let x = Matrix::from_vec(1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        let x_adv = Matrix::from_vec(1, 3, vec![0.52, 0.49, 0.5]).unwrap();
        for norm in [Norm::LInf, Norm::L2] {
            let out = project_ball(&x_adv, &x, norm, 0.1);
            assert_eq!(out.as_slice(), x_adv.as_slice());
        }
    }

    #[test]
    fn project_ball_linf_clamps_to_eps() {
        let x = Matrix::from_vec(1, 3, vec![0.5, 0.5, 0.5]).unwrap();
        let eps = 0.05;
        let x_adv = Matrix::from_vec(1, 3, vec![0.6, 0.6, 0.6]).unwrap(); // delta = 2 eps
        let out = project_ball(&x_adv, &x, Norm::LInf, eps);
        assert_eq!(out.as_slice(), &[0.55, 0.55, 0.55]);
    }

    /// Golden-section search over the radial scaling factor; the
    /// independent oracle for the L2 nearest-point projection.
    fn l2_nearest_by_golden_section(x: &[f64], x_adv: &[f64], eps: f64) -> Vec<f64> {
        let delta: Vec<f64> = x_adv.iter().zip(x).map(|(a, b)| a - b).collect();
        let dist = linalg::norm2(&delta);
        if dist <= eps {
            return x_adv.to_vec();
        }
        // minimise || (x + s delta) - x_adv || over s in [0, eps/dist]
        let objective = |s: f64| -> f64 {
            let point: Vec<f64> = x.iter().zip(&delta).map(|(b, d)| b + s * d).collect();
            let diff: Vec<f64> = point.iter().zip(x_adv).map(|(p, a)| p - a).collect();
            linalg::norm2(&diff)
        };
        let (mut a, mut b) = (0.0f64, eps / dist);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if objective(c) < objective(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s = 0.5 * (a + b);
        x.iter().zip(&delta).map(|(bb, dd)| bb + s * dd).collect()
    }

    #[test]
    fn project_ball_l2_matches_golden_section_oracle() {
        let mut rng = crate::rng::rng_from(77);
        for case in 0..50 {
            let d = 2 + (case % 15);
            let x = crate::rng::normal_vec(&mut rng, d);
            let mut x_adv = x.clone();
            let noise = crate::rng::normal_vec(&mut rng, d);
            linalg::axpy(&mut x_adv, &noise, 0.7);
            let eps = 0.35;

            let got = project_ball(
                &Matrix::from_vec(1, d, x_adv.clone()).unwrap(),
                &Matrix::from_vec(1, d, x.clone()).unwrap(),
                Norm::L2,
                eps,
            );
            let want = l2_nearest_by_golden_section(&x, &x_adv, eps);
            for (g, w) in got.as_slice().iter().zip(&want) {
                assert!((g - w).abs() < 1e-8, "case {case}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn single_step_linf_matches_hand_computed_signs() {
        let (spec, w) = linear_two_class();
        let b = batch_one([0.3, 0.6], 0);
        // logits = [-0.9, 0.9]; p1 > p0, so dL/dx = W^T (p - onehot):
        // dx0 = (p0 - 1) - p1 < 0, dx1 = -2 (p0 - 1) + 2 p1 > 0
        let cfg = AttackConfig {
            alpha: 0.1,
            n_iter: 1,
            ..AttackConfig::new(Norm::LInf, 0.1).unwrap()
        };
        let coll = WeightCollection::single(w);
        let out = ifgsm(&spec, &coll, &b, &cfg).unwrap();
        let expect = [0.3 - 0.1, 0.6 + 0.1];
        for (o, e) in out.as_slice().iter().zip(&expect) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
    }

    #[test]
    fn vanishing_epsilon_keeps_inputs() {
        let (spec, w) = linear_two_class();
        let b = batch_one([0.3, 0.6], 0);
        let cfg = AttackConfig::new(Norm::LInf, 1e-13).unwrap();
        let coll = WeightCollection::single(w);
        let out = ifgsm(&spec, &coll, &b, &cfg).unwrap();
        for (o, x) in out.as_slice().iter().zip(b.inputs().as_slice()) {
            assert!((o - x).abs() < 1e-12);
        }
    }

    #[test]
    fn every_iterate_respects_ball_and_box() {
        let spec = ModelSpec::new(vec![4, 8, 3], Activation::Tanh).unwrap();
        let coll = crate::surrogate::rd_vicinity(&spec.init_weights(3), 0.05, 7, 1).unwrap();
        let inputs = Matrix::from_vec(
            3,
            4,
            vec![0.1, 0.9, 0.5, 0.0, 1.0, 0.3, 0.2, 0.7, 0.45, 0.55, 0.99, 0.01],
        )
        .unwrap();
        let b = Batch::new(inputs.clone(), vec![0, 1, 2]).unwrap();
        for norm in [Norm::LInf, Norm::L2] {
            let cfg = AttackConfig {
                momentum: 0.9,
                n_iter: 12,
                ..AttackConfig::new(norm, 0.2).unwrap()
            };
            let mut iterates = 0;
            ifgsm_recording(&spec, &coll, &b, &cfg, &mut |x_adv| {
                iterates += 1;
                for r in 0..x_adv.rows() {
                    let delta: Vec<f64> = x_adv
                        .row(r)
                        .iter()
                        .zip(inputs.row(r))
                        .map(|(a, b)| a - b)
                        .collect();
                    let dist = match norm {
                        Norm::LInf => linalg::norm_inf(&delta),
                        Norm::L2 => linalg::norm2(&delta),
                    };
                    assert!(dist <= cfg.epsilon + 1e-9, "ball violated: {dist}");
                    assert!(x_adv
                        .row(r)
                        .iter()
                        .all(|&v| (0.0..=1.0).contains(&v)));
                }
            })
            .unwrap();
            assert_eq!(iterates, 12);
        }
    }

    #[test]
    fn momentum_zero_equals_vanilla_reference() {
        let (spec, w) = linear_two_class();
        let b = batch_one([0.4, 0.5], 1);
        let cfg = AttackConfig {
            n_iter: 5,
            ..AttackConfig::new(Norm::LInf, 0.08).unwrap()
        };
        let coll = WeightCollection::single(w.clone());
        let got = ifgsm(&spec, &coll, &b, &cfg).unwrap();

        // hand-rolled vanilla I-FGSM
        let x0 = b.inputs().clone();
        let mut x_adv = x0.clone();
        for _ in 0..5 {
            let eb = b.with_inputs(x_adv.clone()).unwrap();
            let g = model::grad_input(&spec, &w, &eb).unwrap();
            for (xi, gi) in x_adv.as_mut_slice().iter_mut().zip(g.as_slice()) {
                let s = if *gi > 0.0 {
                    1.0
                } else if *gi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *xi += cfg.alpha * s;
            }
            x_adv = project_ball(&x_adv, &x0, Norm::LInf, cfg.epsilon);
            for v in x_adv.as_mut_slice() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        assert_eq!(got.as_slice(), x_adv.as_slice());
    }

    #[test]
    fn only_first_n_iter_shuffled_weights_are_consumed() {
        let (spec, w_good) = linear_two_class();
        // logits overflow to infinity, so softmax sees inf - inf = NaN
        let w_bad = spec
            .bind(vec![1e308, 1e308, -1e308, -1e308, 1e308, -1e308])
            .unwrap();
        let b = batch_one([0.2, 0.8], 0);

        // find a seed whose shuffle puts index 0 first
        let seed = (0..64)
            .find(|&s| attack_weight_order(2, s)[0] == 0)
            .unwrap();
        let cfg = AttackConfig {
            n_iter: 1,
            seed,
            ..AttackConfig::new(Norm::LInf, 0.1).unwrap()
        };
        let coll = WeightCollection::new(
            vec![w_good.clone(), w_bad.clone()],
            CollectionMeta::synthetic(0),
        )
        .unwrap();
        // the bad weight sits beyond the first iteration: never touched
        assert!(ifgsm(&spec, &coll, &b, &cfg).is_ok());

        // flip the order: now the bad weight is consumed and must surface
        let seed_bad = (0..64)
            .find(|&s| attack_weight_order(2, s)[0] == 1)
            .unwrap();
        let cfg_bad = AttackConfig { seed: seed_bad, ..cfg };
        assert!(matches!(
            ifgsm(&spec, &coll, &b, &cfg_bad),
            Err(Error::NonFiniteGradient { iteration: 0 })
        ));
    }

    #[test]
    fn cycling_reuses_weights_in_order() {
        let (spec, w) = linear_two_class();
        let b = batch_one([0.3, 0.6], 0);
        let cfg = AttackConfig {
            n_iter: 3,
            ..AttackConfig::new(Norm::LInf, 0.15).unwrap()
        };
        // K = 1 cycles on the sole weight; K = 3 copies is equivalent
        let single = WeightCollection::single(w.clone());
        let triple = WeightCollection::new(
            vec![w.clone(), w.clone(), w],
            CollectionMeta::synthetic(0),
        )
        .unwrap();
        let a = ifgsm(&spec, &single, &b, &cfg).unwrap();
        let c = ifgsm(&spec, &triple, &b, &cfg).unwrap();
        assert_eq!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn evaluate_zero_weight_target_tie_rule() {
        // all-zero weights emit identical logits; argmax ties resolve to
        // class 0, so exactly the non-zero-labelled examples count as fooled
        let spec = ModelSpec::new(vec![2, 3], Activation::Relu).unwrap();
        let target = Model::new(spec.clone(), spec.zero_weights()).unwrap();
        let inputs = Matrix::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let b = Batch::new(inputs.clone(), vec![0, 1, 2]).unwrap();
        let rates = evaluate(&[target], &inputs, &b).unwrap();
        assert!((rates[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_matches_counting_oracle() {
        let (spec, w) = linear_two_class();
        let target = Model::new(spec.clone(), w.clone()).unwrap();
        let inputs = Matrix::from_vec(4, 2, vec![0.9, 0.1, 0.1, 0.9, 0.6, 0.4, 0.4, 0.6]).unwrap();
        let b = Batch::new(inputs.clone(), vec![0, 1, 0, 0]).unwrap();
        let rates = evaluate(&[target.clone()], b.inputs(), &b).unwrap();
        // independent count: compare predictions one by one
        let mut fooled = 0;
        for (x, &y) in b.inputs().iter_rows().zip(b.labels()) {
            if target.predict(x).unwrap() != y {
                fooled += 1;
            }
        }
        assert!((rates[0] - fooled as f64 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn unperturbed_inputs_have_zero_success_after_filter() {
        let (spec, w) = linear_two_class();
        let target = Model::new(spec.clone(), w).unwrap();
        let inputs = Matrix::from_vec(4, 2, vec![0.9, 0.1, 0.1, 0.9, 0.8, 0.2, 0.2, 0.8]).unwrap();
        let b = Batch::new(inputs, vec![0, 1, 0, 1]).unwrap();
        let filtered = crate::data::select_correct(&[target.clone()], &b, 4, 0).unwrap();
        let rates = evaluate(&[target], filtered.inputs(), &filtered).unwrap();
        assert_eq!(rates[0], 0.0);
    }

    #[test]
    fn transfer_matrix_shape_and_determinism() {
        let (spec, w) = linear_two_class();
        let surrogate = WeightCollection::single(w.clone());
        let target = Model::new(spec.clone(), w).unwrap();
        let inputs = Matrix::from_vec(2, 2, vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let b = Batch::new(inputs, vec![0, 1]).unwrap();
        let cfg = AttackConfig {
            n_iter: 3,
            ..AttackConfig::new(Norm::L2, 0.2).unwrap()
        };
        let surrogates = vec![("sur".to_string(), surrogate)];
        let targets = vec![
            ("t0".to_string(), target.clone()),
            ("t1".to_string(), target),
        ];
        let seeds = [1u64, 2, 3];
        let a = transfer_matrix(&spec, &surrogates, &targets, &b, &cfg, &seeds).unwrap();
        assert_eq!(a.rows.len(), 1 * 2 * 3);
        assert_eq!(a.summary.len(), 2);
        let b2 = transfer_matrix(&spec, &surrogates, &targets, &b, &cfg, &seeds).unwrap();
        assert_eq!(a, b2);
    }

    #[test]
    fn single_seed_summary_has_zero_sd() {
        let (spec, w) = linear_two_class();
        let surrogates = vec![("s".to_string(), WeightCollection::single(w.clone()))];
        let targets = vec![("t".to_string(), Model::new(spec.clone(), w).unwrap())];
        let inputs = Matrix::from_vec(1, 2, vec![0.9, 0.1]).unwrap();
        let b = Batch::new(inputs, vec![0]).unwrap();
        let cfg = AttackConfig::new(Norm::LInf, 0.05).unwrap();
        let report = transfer_matrix(&spec, &surrogates, &targets, &b, &cfg, &[9]).unwrap();
        assert_eq!(report.summary[0].sd, 0.0);
        assert_eq!(report.summary[0].n_seeds, 1);
    }
}
