//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured quantities.
//!
//! Run with `cargo test -p lgv-lab --test acceptance -- --nocapture` to see
//! every line.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use lgv_core::attack::{evaluate, ifgsm, ifgsm_recording, project_ball, Norm};
use lgv_core::geometry::{
    self, hessian_max_eigenvalue, hessian_max_eigenvalue_on, hessian_trace,
    hessian_trace_on, swa_approximation_gap,
};
use lgv_core::linalg;
use lgv_core::model::{
    self, Activation, Batch, LossSurface, Matrix, Model, ModelSpec, WeightVector,
};
use lgv_core::rng;
use lgv_core::surrogate::{build_subspace, project_top_c, rd_vicinity, shift_deviations};
use lgv_core::train::{swa, WeightCollection};
use lgv_lab::config::{RunConfig, SurrogateRecipe};
use lgv_lab::harness::{ArtifactSource, Pipeline, Split};

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:2}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// -------------------------------------------------------------------------
// 1. gradient correctness against central finite differences

fn fd_grad_weights(spec: &ModelSpec, w: &WeightVector, b: &Batch, h: f64) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut values = w.values().to_vec();
    for i in 0..w.len() {
        let old = values[i];
        values[i] = old + h;
        let lp = model::loss(spec, &spec.bind(values.clone()).unwrap(), b).unwrap();
        values[i] = old - h;
        let lm = model::loss(spec, &spec.bind(values.clone()).unwrap(), b).unwrap();
        values[i] = old;
        out[i] = (lp - lm) / (2.0 * h);
    }
    out
}

fn fd_grad_input(spec: &ModelSpec, w: &WeightVector, b: &Batch, h: f64) -> Vec<f64> {
    let n = b.len();
    let d = b.input_dim();
    let mut out = vec![0.0; n * d];
    for r in 0..n {
        for c in 0..d {
            let mut plus = b.inputs().clone();
            plus.set(r, c, plus.get(r, c) + h);
            let mut minus = b.inputs().clone();
            minus.set(r, c, minus.get(r, c) - h);
            let lp = model::loss(spec, w, &b.with_inputs(plus).unwrap()).unwrap();
            let lm = model::loss(spec, w, &b.with_inputs(minus).unwrap()).unwrap();
            out[r * d + c] = (lp - lm) / (2.0 * h);
        }
    }
    out
}

fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
    got.iter()
        .zip(want)
        .map(|(g, w)| (g - w).abs() / scale)
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut rng_stream = rng::rng_from(0xacce_0001);
    use rand::Rng;

    for draw in 0..50 {
        // random architecture with p <= 2000
        let activation = if draw % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let (widths, n) = loop {
            let depth = rng_stream.random_range(2..=4usize);
            let mut widths = vec![rng_stream.random_range(2..=24usize)];
            for _ in 0..depth - 1 {
                widths.push(rng_stream.random_range(2..=32usize));
            }
            let spec = ModelSpec::new(widths.clone(), activation).unwrap();
            if spec.param_count() <= 2000 {
                break (widths, rng_stream.random_range(1..=4usize));
            }
        };
        let spec = ModelSpec::new(widths, activation).unwrap();
        let w = spec.init_weights(rng::derive(0xacce, draw as u64));
        let d = spec.input_dim();
        // central differences need every ReLU unit away from its kink;
        // resample the batch until the pre-activation margin is safe
        let b = loop {
            let inputs: Vec<f64> = (0..n * d)
                .map(|_| rng_stream.random_range(0.05..0.95))
                .collect();
            let labels: Vec<usize> = (0..n)
                .map(|_| rng_stream.random_range(0..spec.class_count()))
                .collect();
            let b = Batch::new(Matrix::from_vec(n, d, inputs).unwrap(), labels).unwrap();
            if activation == Activation::Tanh
                || model::min_hidden_preactivation(&spec, &w, &b).unwrap() > 1e-3
            {
                break b;
            }
        };

        let gw = model::grad_weights(&spec, &w, &b).unwrap();
        let err_w = max_rel_err(gw.values(), &fd_grad_weights(&spec, &w, &b, 1e-5));
        let gi = model::grad_input(&spec, &w, &b).unwrap();
        let err_i = max_rel_err(gi.as_slice(), &fd_grad_input(&spec, &w, &b, 1e-5));
        worst = worst.max(err_w).max(err_i);
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-5 && elapsed <= 60.0,
        &format!("max relative error {worst:.3e} over 50 draws in {elapsed:.1}s (limits 1e-5, 60s)"),
    );
}

// -------------------------------------------------------------------------
// 2. projection oracle + ball/box constraints on every iterate

/// Independent nearest-point oracle: golden-section on the radial scaling
/// factor (L2) or per-coordinate golden-section (Linf).
fn nearest_point_oracle(x: &[f64], x_adv: &[f64], norm: Norm, eps: f64) -> Vec<f64> {
    let golden = |mut a: f64, mut b: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    };
    match norm {
        Norm::L2 => {
            let delta: Vec<f64> = x_adv.iter().zip(x).map(|(a, b)| a - b).collect();
            let dist = linalg::norm2(&delta);
            if dist <= eps {
                return x_adv.to_vec();
            }
            let objective = |s: f64| -> f64 {
                let diff: Vec<f64> = x
                    .iter()
                    .zip(&delta)
                    .zip(x_adv)
                    .map(|((b, d), a)| b + s * d - a)
                    .collect();
                linalg::norm2(&diff)
            };
            let s = golden(0.0, eps / dist, &objective);
            x.iter().zip(&delta).map(|(b, d)| b + s * d).collect()
        }
        Norm::LInf => {
            // coordinates decouple: minimise (y_i - adv_i)^2 on [x_i-eps, x_i+eps]
            x.iter()
                .zip(x_adv)
                .map(|(&xi, &ai)| {
                    let f = |y: f64| (y - ai) * (y - ai);
                    golden(xi - eps, xi + eps, &f)
                })
                .collect()
        }
    }
}

#[test]
fn criterion_02_projection_oracle_and_constraints() {
    let mut rng_stream = rng::rng_from(0xacce_0002);
    use rand::Rng;
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let d = rng_stream.random_range(1..=16usize);
        let norm = if case % 2 == 0 { Norm::L2 } else { Norm::LInf };
        let eps = rng_stream.random_range(0.01..0.5);
        let x: Vec<f64> = (0..d).map(|_| rng_stream.random_range(0.0..1.0)).collect();
        let x_adv: Vec<f64> = x
            .iter()
            .map(|v| v + rng_stream.random_range(-1.0..1.0))
            .collect();

        let got = project_ball(
            &Matrix::from_vec(1, d, x_adv.clone()).unwrap(),
            &Matrix::from_vec(1, d, x.clone()).unwrap(),
            norm,
            eps,
        );
        let want = nearest_point_oracle(&x, &x_adv, norm, eps);
        for (g, w) in got.as_slice().iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }

    // every I-FGSM iterate keeps ball and box constraints
    let spec = ModelSpec::new(vec![6, 12, 3], Activation::Relu).unwrap();
    let coll = rd_vicinity(&spec.init_weights(5), 0.05, 9, 3).unwrap();
    let inputs: Vec<f64> = (0..5 * 6)
        .map(|i| (i as f64 * 0.173) % 1.0)
        .collect();
    let x0 = Matrix::from_vec(5, 6, inputs).unwrap();
    let b = Batch::new(x0.clone(), vec![0, 1, 2, 0, 1]).unwrap();
    let mut max_violation = 0.0f64;
    for norm in [Norm::LInf, Norm::L2] {
        let mut cfg = lgv_core::attack::AttackConfig::new(norm, 0.2).unwrap();
        cfg.momentum = 0.9;
        cfg.n_iter = 25;
        ifgsm_recording(&spec, &coll, &b, &cfg, &mut |x_adv| {
            for r in 0..x_adv.rows() {
                let delta: Vec<f64> = x_adv
                    .row(r)
                    .iter()
                    .zip(x0.row(r))
                    .map(|(a, b)| a - b)
                    .collect();
                let dist = match norm {
                    Norm::LInf => linalg::norm_inf(&delta),
                    Norm::L2 => linalg::norm2(&delta),
                };
                max_violation = max_violation.max(dist - cfg.epsilon);
                for &v in x_adv.row(r) {
                    max_violation = max_violation.max(-v).max(v - 1.0);
                }
            }
        })
        .unwrap();
    }

    report(
        2,
        worst <= 1e-8 && max_violation <= 1e-9,
        &format!(
            "projection vs oracle max err {worst:.3e} (limit 1e-8); iterate constraint slack {max_violation:.3e} (limit 1e-9)"
        ),
    );
}

// -------------------------------------------------------------------------
// 3. Hessian probes against dense oracles on quadratics

struct Quadratic {
    a: Matrix,
}

impl LossSurface for Quadratic {
    fn dim(&self) -> usize {
        self.a.rows()
    }
    fn loss_at(&self, w: &[f64]) -> f64 {
        0.5 * linalg::dot(w, &linalg::mat_vec(&self.a, w))
    }
    fn grad_at(&self, w: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.a, w)
    }
}

#[test]
fn criterion_03_hessian_oracles() {
    let mut worst_ev = 0.0f64;
    let mut worst_trace = 0.0f64;
    for seed in 0..5u64 {
        let n = 10 + 8 * seed as usize; // up to 42 <= 50
        let mut r = rng::rng_from(seed + 77);
        let b: Vec<f64> = rng::normal_vec(&mut r, n * n);
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[k * n + i] * b[k * n + j];
                }
                a.set(i, j, acc);
            }
        }
        let exact_trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
        let (eigs, _) = linalg::sym_eigen(&a);
        let q = Quadratic { a };
        let w = vec![0.0; n];

        let got_ev = hessian_max_eigenvalue_on(&q, &w, 3000, 1e-12, seed)
            .unwrap()
            .eigenvalue;
        worst_ev = worst_ev.max((got_ev - eigs[0]).abs() / eigs[0]);

        let got_trace = hessian_trace_on(&q, &w, 400, seed + 5).unwrap();
        worst_trace = worst_trace.max((got_trace - exact_trace).abs() / exact_trace);
    }
    report(
        3,
        worst_ev <= 0.01 && worst_trace <= 0.05,
        &format!(
            "max eigenvalue rel err {worst_ev:.4} (limit 0.01), trace rel err {worst_trace:.4} (limit 0.05)"
        ),
    );
}

// -------------------------------------------------------------------------
// 4. PCA / subspace suite

#[test]
fn criterion_04_pca_subspace() {
    // planted spectrum recovery
    let sigmas = [4.0, 1.5, 0.4, 0.05];
    let (k, p) = (7, 120);
    let mut r = rng::rng_from(0xacce_0004);
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    for _ in 0..sigmas.len() {
        let orth = |r: &mut rng::SeedRng, dim: usize, existing: &Vec<Vec<f64>>| {
            let mut v = rng::normal_vec(r, dim);
            for e in existing {
                let c = linalg::dot(&v, e);
                linalg::axpy(&mut v, e, -c);
            }
            let n = linalg::norm2(&v);
            v.iter().map(|x| x / n).collect::<Vec<f64>>()
        };
        us.push(orth(&mut r, k, &us));
        vs.push(orth(&mut r, p, &vs));
    }
    let mut planted = Matrix::zeros(k, p);
    for ((sigma, u), v) in sigmas.iter().zip(&us).zip(&vs) {
        for row in 0..k {
            for col in 0..p {
                planted.set(row, col, planted.get(row, col) + sigma * u[row] * v[col]);
            }
        }
    }
    let svd = linalg::svd_rows(&planted);
    let mut planted_err = 0.0f64;
    for (i, &s) in sigmas.iter().enumerate() {
        planted_err = planted_err.max((svd.singular_values[i] - s).abs());
    }

    // collection-level properties on LGV-like data
    let spec = ModelSpec::new(vec![8, 10, 3], Activation::Tanh).unwrap();
    let coll = rd_vicinity(&spec.init_weights(3), 0.2, 10, 9).unwrap();
    let basis = build_subspace(&coll).unwrap();
    let ratio_sum: f64 = basis.explained_ratio().iter().sum();

    let at_zero = project_top_c(&basis, &coll, 0).unwrap();
    let c0_exact = at_zero
        .weights()
        .iter()
        .all(|w| w.values() == basis.shift().values());

    let full = project_top_c(&basis, &coll, coll.len()).unwrap();
    let mut recon_err = 0.0f64;
    for (a, b) in coll.weights().iter().zip(full.weights()) {
        for (x, y) in a.values().iter().zip(b.values()) {
            recon_err = recon_err.max((x - y).abs());
        }
    }

    report(
        4,
        (ratio_sum - 1.0).abs() <= 1e-9
            && c0_exact
            && recon_err <= 1e-6
            && planted_err <= 1e-6,
        &format!(
            "ratio sum err {:.2e} (1e-9), C=0 exact: {c0_exact}, full-rank recon {recon_err:.2e} (1e-6), planted spectrum {planted_err:.2e} (1e-6)",
            (ratio_sum - 1.0).abs()
        ),
    );
}

// -------------------------------------------------------------------------
// benchmark plumbing shared by criteria 5 and 7-10

fn benchmark() -> Pipeline {
    Pipeline::new(RunConfig::standard_blobs()).unwrap()
}

fn named_targets(pipeline: &Pipeline) -> Vec<(String, Model)> {
    pipeline
        .train_targets()
        .unwrap()
        .into_iter()
        .map(|(n, m, _)| (n, m))
        .collect()
}

// -------------------------------------------------------------------------
// 5. first-order gap scaling of the weight average

#[test]
fn criterion_05_swa_gap_scaling() {
    let pipeline = benchmark();
    let seed = pipeline.cfg.seeds[0];
    let (base, _) = pipeline.train_base(seed).unwrap();
    let (coll, _) = pipeline.collect(&base, seed).unwrap();
    let batch = &pipeline.data.test;

    let mut pass = true;
    let mut detail = String::new();
    for s in [1e-2, 1e-3] {
        let gap_s = swa_approximation_gap(&pipeline.spec, &coll, s, batch).unwrap();
        let gap_half = swa_approximation_gap(&pipeline.spec, &coll, s / 2.0, batch).unwrap();
        let ratio = gap_half / gap_s;
        pass &= ratio <= 0.5;
        detail.push_str(&format!("s={s}: gap(s/2)/gap(s)={ratio:.3} "));
    }
    report(5, pass, &format!("{detail}(limit 0.5)"));
}

// -------------------------------------------------------------------------
// 6. structured feature noise from weight noise

#[test]
fn criterion_06_structured_noise_covariance() {
    let start = Instant::now();
    // tiny model: d = 6, p = (6+1)*10 + (10+1)*3 = 103 <= 200
    let spec = ModelSpec::new(vec![6, 10, 3], Activation::Tanh).unwrap();
    let w = spec.init_weights(11);
    let x = [0.35, 0.7, 0.15, 0.6, 0.45, 0.8];
    let label = 1usize;
    let batch = Batch::new(Matrix::from_vec(1, 6, x.to_vec()).unwrap(), vec![label]).unwrap();
    let d = 6;
    let sigma = 1e-3;
    let n_draws = 10_000;

    // prediction: sigma^2 J J^T from the finite-difference Jacobian
    let jac = geometry::input_gradient_weight_jacobian(&spec, &w, &x, label, 1e-5).unwrap();
    let p = w.len();
    let mut predicted = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for kk in 0..p {
                acc += jac.get(i, kk) * jac.get(j, kk);
            }
            predicted[i * d + j] = sigma * sigma * acc;
        }
    }

    // empirical covariance of the input gradient under weight noise
    let mut r = rng::rng_from(0xacce_0006);
    let mut grads = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let noise = rng::normal_vec(&mut r, p);
        let noisy = w.add_scaled(&noise, sigma).unwrap();
        let g = model::grad_input(&spec, &noisy, &batch).unwrap();
        grads.push(g.row(0).to_vec());
    }
    let mut mean = vec![0.0; d];
    for g in &grads {
        linalg::axpy(&mut mean, g, 1.0);
    }
    for m in mean.iter_mut() {
        *m /= n_draws as f64;
    }
    let mut empirical = vec![0.0; d * d];
    for g in &grads {
        for i in 0..d {
            for j in 0..d {
                empirical[i * d + j] += (g[i] - mean[i]) * (g[j] - mean[j]);
            }
        }
    }
    for e in empirical.iter_mut() {
        *e /= n_draws as f64;
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for (e, pr) in empirical.iter().zip(&predicted) {
        num += (e - pr) * (e - pr);
        den += pr * pr;
    }
    let rel = (num / den).sqrt();
    let elapsed = start.elapsed().as_secs_f64();
    report(
        6,
        rel <= 0.10 && elapsed <= 300.0,
        &format!(
            "relative Frobenius error {rel:.4} over {n_draws} draws (limit 0.10) in {elapsed:.1}s (limit 300s)"
        ),
    );
}

// -------------------------------------------------------------------------
// 7. transferability trend

#[test]
fn criterion_07_transfer_trend() {
    let start = Instant::now();
    let mut cfg = RunConfig::standard_blobs();
    cfg.surrogates = vec![
        SurrogateRecipe::OneDnn { name: None },
        SurrogateRecipe::Lgv { name: None },
        SurrogateRecipe::LgvSwa { name: None },
    ];
    let pipeline = Pipeline::new(cfg).unwrap();
    let targets = named_targets(&pipeline);
    let rep = pipeline
        .transfer(&targets, Split::Test, &ArtifactSource::Fresh)
        .unwrap();

    let mean_of = |s: &str| -> f64 {
        let vals: Vec<f64> = rep
            .summary
            .iter()
            .filter(|r| r.surrogate == s)
            .map(|r| r.mean)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let per_target = |s: &str| -> BTreeMap<String, f64> {
        rep.summary
            .iter()
            .filter(|r| r.surrogate == s)
            .map(|r| (r.target.clone(), r.mean))
            .collect()
    };

    let lgv_t = per_target("lgv");
    let dnn_t = per_target("one_dnn");
    let strict = lgv_t.iter().all(|(t, v)| *v > dnn_t[t]);
    let (lgv, swa_m, dnn) = (mean_of("lgv"), mean_of("lgv_swa"), mean_of("one_dnn"));
    let ordered = lgv >= swa_m && swa_m >= dnn;

    let elapsed = start.elapsed().as_secs_f64();
    report(
        7,
        strict && ordered && elapsed <= 600.0,
        &format!(
            "per-target LGV>1-DNN: {strict} ({:?} vs {:?}); means lgv={lgv:.4} >= swa={swa_m:.4} >= 1dnn={dnn:.4}: {ordered}; {elapsed:.0}s (limit 600s)",
            lgv_t.values().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            dnn_t.values().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}

// -------------------------------------------------------------------------
// 8. flatness trend

#[test]
fn criterion_08_flatness_trend() {
    let pipeline = benchmark();
    let batch = &pipeline.data.train;
    let geo_iter = 400;
    let tol = 1e-8;
    let probes = 300;

    let mut pass = true;
    let mut detail = String::new();
    for &seed in &pipeline.cfg.seeds {
        let (base, _) = pipeline.train_base(seed).unwrap();
        let (coll, _) = pipeline.collect(&base, seed).unwrap();
        let center = swa(&coll).unwrap();

        let ev = |w: &WeightVector, tag: u64| -> f64 {
            hessian_max_eigenvalue(&pipeline.spec, w, batch, geo_iter, tol, rng::derive(seed, tag))
                .unwrap()
                .eigenvalue
        };
        let tr = |w: &WeightVector, tag: u64| -> f64 {
            hessian_trace(&pipeline.spec, w, batch, probes, rng::derive(seed, tag)).unwrap()
        };

        let ev_dnn = ev(&base, 1);
        let tr_dnn = tr(&base, 2);
        let ev_ind: f64 = coll.weights().iter().map(|w| ev(w, 3)).sum::<f64>() / coll.len() as f64;
        let tr_ind: f64 = coll.weights().iter().map(|w| tr(w, 4)).sum::<f64>() / coll.len() as f64;
        let ev_swa = ev(&center, 5);
        let tr_swa = tr(&center, 6);

        let ev_ok = ev_dnn > ev_ind && ev_ind > ev_swa;
        let tr_ok = tr_dnn > tr_ind && tr_ind > tr_swa;

        // shared-direction rays at matched displacement norms
        let alphas = [0.0, 1.0, 2.0];
        let growth = |w: &WeightVector| -> f64 {
            let mut total = 0.0;
            for dir in 0..5u64 {
                let probe = geometry::ray_losses(
                    &pipeline.spec,
                    w,
                    rng::derive(0x5a5a, dir),
                    &alphas,
                    batch,
                    geometry::ProbeMode::NaturalLoss,
                )
                .unwrap();
                total += probe.losses.last().unwrap() - probe.losses[0];
            }
            total / 5.0
        };
        let g_dnn = growth(&base);
        let g_ind: f64 = {
            // five members spread over the trajectory
            let step = (coll.len() / 5).max(1);
            let picked: Vec<&WeightVector> = coll.weights().iter().step_by(step).take(5).collect();
            picked.iter().map(|w| growth(w)).sum::<f64>() / picked.len() as f64
        };
        let g_swa = growth(&center);
        let ray_ok = g_dnn > g_ind && g_ind > g_swa;

        pass &= ev_ok && tr_ok && ray_ok;
        detail.push_str(&format!(
            "seed {seed}: ev {ev_dnn:.1}>{ev_ind:.1}>{ev_swa:.1}:{ev_ok} tr {tr_dnn:.1}>{tr_ind:.1}>{tr_swa:.1}:{tr_ok} ray {g_dnn:.2}>{g_ind:.2}>{g_swa:.2}:{ray_ok}; "
        ));
    }
    report(8, pass, &detail);
}

// -------------------------------------------------------------------------
// 9. subspace dimensionality vs transferability

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mean) * (b - mean);
        dx += (a - mean) * (a - mean);
        dy += (b - mean) * (b - mean);
    }
    num / (dx * dy).sqrt()
}

#[test]
fn criterion_09_subspace_trend() {
    let pipeline = benchmark();
    let targets = named_targets(&pipeline);
    let target_models: Vec<Model> = targets.iter().map(|(_, m)| m.clone()).collect();
    let k = pipeline.cfg.lgv.k;
    let cs: Vec<usize> = {
        let mut v = vec![0, 1, 2];
        let mut c = 4;
        while c < k {
            v.push(c);
            c *= 2;
        }
        v.push(k);
        v
    };

    let mut variance: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut rates: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &seed in &pipeline.cfg.seeds {
        let (base, _) = pipeline.train_base(seed).unwrap();
        let (coll, _) = pipeline.collect(&base, seed).unwrap();
        let basis = build_subspace(&coll).unwrap();
        let batch = pipeline.eval_examples(&targets, Split::Test, seed).unwrap();
        let attack_cfg = pipeline.cfg.attack.core(seed).unwrap();
        for &c in &cs {
            let cum: f64 = basis.explained_ratio().iter().take(c).sum();
            let surrogate = project_top_c(&basis, &coll, c).unwrap();
            let x_adv = ifgsm(&pipeline.spec, &surrogate, &batch, &attack_cfg).unwrap();
            let per_target = evaluate(&target_models, &x_adv, &batch).unwrap();
            let rate = per_target.iter().sum::<f64>() / per_target.len() as f64;
            variance.entry(c).or_default().push(cum);
            rates.entry(c).or_default().push(rate);
        }
    }

    let xs: Vec<f64> = cs
        .iter()
        .map(|c| variance[c].iter().sum::<f64>() / variance[c].len() as f64)
        .collect();
    let ys: Vec<f64> = cs
        .iter()
        .map(|c| rates[c].iter().sum::<f64>() / rates[c].len() as f64)
        .collect();
    let rho = spearman(&xs, &ys);
    report(
        9,
        rho >= 0.8,
        &format!(
            "Spearman rho {rho:.3} over C in {cs:?} (limit 0.8); variance {:?} rates {:?}",
            xs.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>(),
            ys.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

// -------------------------------------------------------------------------
// 10. shifted deviation subspaces

#[test]
fn criterion_10_shift_trend() {
    let pipeline = benchmark();
    let targets = named_targets(&pipeline);
    let target_models: Vec<Model> = targets.iter().map(|(_, m)| m.clone()).collect();
    // desk-scale noise levels chosen by validation sweeps
    let sigma_swa_rd = 0.05;
    let sigma_rd = 0.025;

    let mut means: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &seed in &pipeline.cfg.seeds {
        let (base, _) = pipeline.train_base(seed).unwrap();
        let (coll, _) = pipeline.collect(&base, seed).unwrap();
        let center = swa(&coll).unwrap();
        let (donor_base, _) = pipeline.train_donor(seed).unwrap();
        let (donor_coll, _) = pipeline
            .collect(&donor_base, rng::derive(seed, 0xd1))
            .unwrap();
        let donor_basis = build_subspace(&donor_coll).unwrap();
        let k = coll.len();

        let batch = pipeline.eval_examples(&targets, Split::Test, seed).unwrap();
        let attack_cfg = pipeline.cfg.attack.core(seed).unwrap();
        let mut rate_of = |name: &'static str, surrogate: &WeightCollection| {
            let x_adv = ifgsm(&pipeline.spec, surrogate, &batch, &attack_cfg).unwrap();
            let per_target = evaluate(&target_models, &x_adv, &batch).unwrap();
            means
                .entry(name)
                .or_default()
                .push(per_target.iter().sum::<f64>() / per_target.len() as f64);
        };

        rate_of(
            "swa_plus_donor_devs",
            &shift_deviations(&center, &donor_basis, 1.0).unwrap(),
        );
        rate_of(
            "swa_plus_rd",
            &rd_vicinity(&center, sigma_swa_rd, k, rng::derive(seed, 0xb1)).unwrap(),
        );
        rate_of(
            "dnn_plus_half_devs",
            &shift_deviations(&base, &donor_basis, 0.5).unwrap(),
        );
        rate_of(
            "dnn_plus_full_devs",
            &shift_deviations(&base, &donor_basis, 1.0).unwrap(),
        );
        rate_of(
            "dnn_plus_rd",
            &rd_vicinity(&base, sigma_rd, k, rng::derive(seed, 0xb2)).unwrap(),
        );
    }

    let mean = |name: &str| -> f64 {
        let v = &means[name];
        v.iter().sum::<f64>() / v.len() as f64
    };
    let a = mean("swa_plus_donor_devs");
    let b = mean("swa_plus_rd");
    let c = mean("dnn_plus_half_devs");
    let d = mean("dnn_plus_full_devs");
    let e = mean("dnn_plus_rd");
    let pass = a > b && c > d && c > e;
    report(
        10,
        pass,
        &format!(
            "swa+devs'={a:.4} > swa+rd={b:.4}: {}; dnn+0.5devs'={c:.4} > dnn+1.0devs'={d:.4}: {} and > dnn+rd={e:.4}: {}",
            a > b,
            c > d,
            c > e
        ),
    );
}

// -------------------------------------------------------------------------
// 11. byte-identical artifacts

#[test]
fn criterion_11_determinism() {
    let bin = env!("CARGO_BIN_EXE_lgv");
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");

    // small config so two full pipeline runs stay quick
    let mut cfg = RunConfig::standard_blobs();
    cfg.seeds = vec![5];
    cfg.training.epochs = 8;
    cfg.lgv.n_epochs = 2;
    cfg.lgv.k = 6;
    cfg.n_eval = 50;
    cfg.attack.n_iter = 10;
    cfg.surrogates = vec![
        SurrogateRecipe::OneDnn { name: None },
        SurrogateRecipe::Lgv { name: None },
        SurrogateRecipe::Projected { name: None, c: 2 },
    ];
    std::fs::write(&config_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();

    // identical config + seeds: the output dir is part of the config, so
    // both runs write to the same place and the second overwrites the first
    let out = dir.path().join("out");
    let run_all = || {
        for args in [
            vec!["train"],
            vec!["collect"],
            vec!["attack"],
            vec!["geometry", "pca"],
            vec!["geometry", "hessian"],
            vec!["sweep", "c"],
        ] {
            let mut cmd = std::process::Command::new(bin);
            cmd.args(&args)
                .arg("--config")
                .arg(&config_path)
                .arg("--set")
                .arg(format!("output_dir={:?}", out.to_str().unwrap()));
            if args[0] == "sweep" {
                cmd.args(["--values", "0,2,4"]);
            }
            let status = cmd
                .stdout(std::process::Stdio::null())
                .status()
                .expect("run lgv");
            assert!(status.success(), "{args:?} failed");
        }
    };

    let artifacts = [
        "reports/transfer.csv",
        "reports/transfer_summary.csv",
        "reports/transfer.json",
        "reports/pca.csv",
        "reports/hessian.csv",
        "reports/sweep_c.csv",
        "reports/sweep_c_summary.csv",
        "logs/train_base_s5.csv",
        "weights/lgv_s5.lgvw",
        "weights/lgv_s5.lgvw.json",
    ];
    run_all();
    let first: Vec<Vec<u8>> = artifacts
        .iter()
        .map(|a| std::fs::read(out.join(a)).unwrap())
        .collect();
    run_all();

    let mut identical = true;
    let mut detail = String::new();
    for (artifact, before) in artifacts.iter().zip(&first) {
        let after = std::fs::read(out.join(artifact)).unwrap();
        if &after != before {
            identical = false;
            detail.push_str(&format!("{artifact} differs; "));
        }
    }
    if identical {
        detail = format!("{} artifacts byte-identical across reruns", artifacts.len());
    }
    report(11, identical, &detail);
}
