//! Loss-landscape probes.
//!
//! Sharpness metrics (power-iteration max eigenvalue and Hutchinson trace
//! of the Hessian), loss along random weight-space rays and interpolation
//! paths, and feature-space disk maps around an example. All probes are
//! deterministic given their seeds.

use alloc::vec;
use alloc::vec::Vec;

use crate::attack::{ifgsm, AttackConfig};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::model::{
    self, Batch, BatchLoss, LossSurface, Matrix, Model, ModelSpec, WeightVector,
};
use crate::rng;
use crate::train::WeightCollection;

/// Outcome of the power iteration on the Hessian.
#[derive(Debug, Clone)]
pub struct PowerIterationOutcome {
    /// Final Rayleigh-quotient estimate of the dominant eigenvalue.
    pub eigenvalue: f64,
    /// Estimate after each iteration (non-decreasing on PSD Hessians).
    pub history: Vec<f64>,
    /// Set when the very first Hessian-vector product vanished; the
    /// eigenvalue is reported as 0.
    pub degenerate: bool,
}

/// Dominant Hessian eigenvalue of an arbitrary loss surface by power
/// iteration over finite-difference Hessian-vector products.
pub fn hessian_max_eigenvalue_on(
    surface: &dyn LossSurface,
    w: &[f64],
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<PowerIterationOutcome> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be > 0"));
    }
    if max_iters == 0 {
        return Err(invalid("max_iters must be >= 1"));
    }
    let mut v = rng::normal_vec(&mut rng::rng_from(seed), surface.dim());
    let norm = linalg::norm2(&v);
    linalg::scale(&mut v, 1.0 / norm);

    let mut history = Vec::new();
    let mut estimate = 0.0f64;
    for _ in 0..max_iters {
        let hv = model::hvp_on(surface, w, &v)?;
        let hv_norm = linalg::norm2(&hv);
        if hv_norm == 0.0 {
            if history.is_empty() {
                return Ok(PowerIterationOutcome {
                    eigenvalue: 0.0,
                    history,
                    degenerate: true,
                });
            }
            break;
        }
        let rayleigh = linalg::dot(&v, &hv);
        history.push(rayleigh);
        let converged = !history.is_empty()
            && (rayleigh - estimate).abs() <= tol * rayleigh.abs().max(f64::MIN_POSITIVE);
        estimate = rayleigh;
        v = hv;
        linalg::scale(&mut v, 1.0 / hv_norm);
        if history.len() > 1 && converged {
            break;
        }
    }
    Ok(PowerIterationOutcome {
        eigenvalue: estimate,
        history,
        degenerate: false,
    })
}

/// Dominant Hessian eigenvalue of the batch loss at `w`.
pub fn hessian_max_eigenvalue(
    spec: &ModelSpec,
    w: &WeightVector,
    b: &Batch,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<PowerIterationOutcome> {
    let surface = BatchLoss { spec, batch: b };
    hessian_max_eigenvalue_on(&surface, w.values(), max_iters, tol, seed)
}

/// Hutchinson trace estimate: mean of `z^T H z` over Rademacher probes.
pub fn hessian_trace_on(
    surface: &dyn LossSurface,
    w: &[f64],
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    if n_probes == 0 {
        return Err(invalid("n_probes must be >= 1"));
    }
    let mut r = rng::rng_from(seed);
    let mut acc = 0.0;
    for _ in 0..n_probes {
        let z = rng::rademacher_vec(&mut r, surface.dim());
        let hz = model::hvp_on(surface, w, &z)?;
        acc += linalg::dot(&z, &hz);
    }
    Ok(acc / n_probes as f64)
}

/// Hutchinson trace of the batch-loss Hessian at `w`.
pub fn hessian_trace(
    spec: &ModelSpec,
    w: &WeightVector,
    b: &Batch,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    let surface = BatchLoss { spec, batch: b };
    hessian_trace_on(&surface, w.values(), n_probes, seed)
}

/// What a ray or interpolation probe evaluates at each point.
pub enum ProbeMode<'a> {
    /// Loss of the displaced weights themselves on the batch.
    NaturalLoss,
    /// Craft an attack from the displaced weights (as a single-model
    /// surrogate) and report the target's loss on the adversarial inputs.
    AdversarialLoss {
        target: &'a Model,
        cfg: &'a AttackConfig,
    },
}

/// Loss profile along a probe: parameter values and the matching losses,
/// plus the (unit) direction followed.
#[derive(Debug, Clone)]
pub struct RayProbe {
    pub origin: WeightVector,
    pub direction: Vec<f64>,
    pub alphas: Vec<f64>,
    pub losses: Vec<f64>,
}

fn probe_value(
    spec: &ModelSpec,
    w: &WeightVector,
    b: &Batch,
    mode: &ProbeMode<'_>,
) -> Result<f64> {
    match mode {
        ProbeMode::NaturalLoss => model::loss(spec, w, b),
        ProbeMode::AdversarialLoss { target, cfg } => {
            let surrogate = WeightCollection::single(w.clone());
            let x_adv = ifgsm(spec, &surrogate, b, cfg)?;
            target.loss(&b.with_inputs(x_adv)?)
        }
    }
}

/// Losses along the ray `w + alpha d` for a random unit direction `d`
/// drawn from `direction_seed`. The direction depends only on the seed and
/// the weight dimension, so distinct origins probed with the same seed
/// share the same direction.
pub fn ray_losses(
    spec: &ModelSpec,
    w: &WeightVector,
    direction_seed: u64,
    alphas: &[f64],
    b: &Batch,
    mode: ProbeMode<'_>,
) -> Result<RayProbe> {
    if alphas.is_empty() {
        return Err(invalid("alphas must be non-empty"));
    }
    if alphas[0] != 0.0 {
        return Err(invalid("alphas must start at 0"));
    }
    if alphas.windows(2).any(|p| p[0] >= p[1]) {
        return Err(invalid("alphas must be strictly ascending"));
    }
    let mut direction = rng::normal_vec(&mut rng::rng_from(direction_seed), w.len());
    let norm = linalg::norm2(&direction);
    linalg::scale(&mut direction, 1.0 / norm);

    let mut losses = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let displaced = w.add_scaled(&direction, alpha)?;
        losses.push(probe_value(spec, &displaced, b, &mode)?);
    }
    Ok(RayProbe {
        origin: w.clone(),
        direction,
        alphas: alphas.to_vec(),
        losses,
    })
}

/// Losses along the affine path `alpha w_a + (1 - alpha) w_b`; `alpha` may
/// leave `[0, 1]` to extrapolate past either endpoint.
pub fn interpolate(
    spec: &ModelSpec,
    w_a: &WeightVector,
    w_b: &WeightVector,
    alphas: &[f64],
    b: &Batch,
    mode: ProbeMode<'_>,
) -> Result<RayProbe> {
    if alphas.is_empty() {
        return Err(invalid("alphas must be non-empty"));
    }
    if w_a.len() != w_b.len() || w_a.spec_hash() != w_b.spec_hash() {
        return Err(invalid("endpoints must share one model spec"));
    }
    let mut direction: Vec<f64> = w_a
        .values()
        .iter()
        .zip(w_b.values())
        .map(|(a, b)| a - b)
        .collect();
    let norm = linalg::norm2(&direction);
    if norm > 0.0 {
        linalg::scale(&mut direction, 1.0 / norm);
    }

    let mut losses = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let values: Vec<f64> = w_a
            .values()
            .iter()
            .zip(w_b.values())
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let displaced = w_b.with_values(values)?;
        losses.push(probe_value(spec, &displaced, b, &mode)?);
    }
    Ok(RayProbe {
        origin: w_b.clone(),
        direction,
        alphas: alphas.to_vec(),
        losses,
    })
}

/// Orthonormal basis of the plane through `x`, `x_adv_1` and `x_adv_2` by
/// the first two Gram-Schmidt steps: `u = x_adv_1 - x`, `v` the component
/// of `x_adv_2 - x` orthogonal to `u`.
pub fn plane_basis(x: &[f64], x_adv_1: &[f64], x_adv_2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != x_adv_1.len() || x.len() != x_adv_2.len() {
        return Err(invalid("plane anchors must share one dimension"));
    }
    let u: Vec<f64> = x_adv_1.iter().zip(x).map(|(a, b)| a - b).collect();
    let u_norm = linalg::norm2(&u);
    if u_norm == 0.0 {
        return Err(crate::error::Error::DegeneratePlane);
    }
    let w: Vec<f64> = x_adv_2.iter().zip(x).map(|(a, b)| a - b).collect();
    let coeff = linalg::dot(&w, &u) / (u_norm * u_norm);
    let mut v = w.clone();
    linalg::axpy(&mut v, &u, -coeff);
    let v_norm = linalg::norm2(&v);
    if v_norm <= 1e-12 * linalg::norm2(&w).max(1.0) {
        return Err(crate::error::Error::DegeneratePlane);
    }
    let u_unit = u.iter().map(|a| a / u_norm).collect();
    let v_unit = v.iter().map(|a| a / v_norm).collect();
    Ok((u_unit, v_unit))
}

/// Loss values on a plane through an input example.
#[derive(Debug, Clone)]
pub struct PlaneMap {
    pub anchor: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ball_radius: f64,
    /// Grid coordinates shared by both axes, symmetric around 0 and
    /// extending 20% past the ball radius.
    pub coords: Vec<f64>,
    /// `losses[(i, j)]` is the loss at `x + coords[i] u + coords[j] v`.
    pub losses: Matrix,
}

impl PlaneMap {
    /// Whether grid cell `(i, j)` lies inside the ball-plane intersection
    /// disk.
    pub fn in_disk(&self, i: usize, j: usize) -> bool {
        let a = self.coords[i];
        let b = self.coords[j];
        a * a + b * b <= self.ball_radius * self.ball_radius
    }
}

/// Mean loss of a weight ensemble over a `grid_n x grid_n` lattice on the
/// plane `(u, v)` through `x`, covering `[-1.2 eps, 1.2 eps]^2` so the
/// disk boundary is visible. Points are clipped to the input box before
/// evaluation. `grid_n` must be odd so the lattice contains the exact
/// anchor.
pub fn disk_loss_map(
    spec: &ModelSpec,
    weights: &[WeightVector],
    x: &[f64],
    label: usize,
    basis: (&[f64], &[f64]),
    eps: f64,
    grid_n: usize,
    input_box: (f64, f64),
) -> Result<PlaneMap> {
    if grid_n < 3 {
        return Err(invalid("grid_n must be >= 3"));
    }
    if grid_n % 2 == 0 {
        return Err(invalid("grid_n must be odd so the grid contains the anchor"));
    }
    if weights.is_empty() {
        return Err(invalid("at least one weight vector required"));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps must be > 0"));
    }
    let (u, v) = basis;
    if u.len() != x.len() || v.len() != x.len() {
        return Err(invalid("basis dimension does not match the anchor"));
    }

    let half = 1.2 * eps;
    let coords: Vec<f64> = (0..grid_n)
        .map(|i| -half + 2.0 * half * i as f64 / (grid_n - 1) as f64)
        .collect();

    let (lo, hi) = input_box;
    let mut losses = Matrix::zeros(grid_n, grid_n);
    for (i, &a) in coords.iter().enumerate() {
        for (j, &bcoord) in coords.iter().enumerate() {
            let mut point: Vec<f64> = x.to_vec();
            linalg::axpy(&mut point, u, a);
            linalg::axpy(&mut point, v, bcoord);
            for p in point.iter_mut() {
                *p = p.clamp(lo, hi);
            }
            let batch = Batch::new(Matrix::from_vec(1, x.len(), point)?, vec![label])?;
            let mut acc = 0.0;
            for w in weights {
                acc += model::loss(spec, w, &batch)?;
            }
            losses.set(i, j, acc / weights.len() as f64);
        }
    }

    Ok(PlaneMap {
        anchor: x.to_vec(),
        u: u.to_vec(),
        v: v.to_vec(),
        ball_radius: eps,
        coords,
        losses,
    })
}

/// `d x p` Jacobian of the input-gradient map `w -> grad_x L(x; y, w)` for
/// a single example, by central differences over the weights.
pub fn input_gradient_weight_jacobian(
    spec: &ModelSpec,
    w: &WeightVector,
    x: &[f64],
    label: usize,
    step: f64,
) -> Result<Matrix> {
    if !(step > 0.0) {
        return Err(invalid("step must be > 0"));
    }
    let batch = Batch::new(Matrix::from_vec(1, x.len(), x.to_vec())?, vec![label])?;
    let p = w.len();
    let d = x.len();
    let mut jac = Matrix::zeros(d, p);
    let mut values = w.values().to_vec();
    for col in 0..p {
        let old = values[col];
        values[col] = old + step;
        let w_plus = w.with_values(values.clone())?;
        let g_plus = model::grad_input(spec, &w_plus, &batch)?;
        values[col] = old - step;
        let w_minus = w.with_values(values.clone())?;
        let g_minus = model::grad_input(spec, &w_minus, &batch)?;
        values[col] = old;
        for row in 0..d {
            jac.set(
                row,
                col,
                (g_plus.get(0, row) - g_minus.get(0, row)) / (2.0 * step),
            );
        }
    }
    Ok(jac)
}

/// Frobenius gap between the ensemble-mean input gradient at scaled
/// deviations and the input gradient at the mean itself:
/// `|| mean_k grad_x L(w_swa + s (w_k - w_swa)) - grad_x L(w_swa) ||_F`.
///
/// The deviations average to zero, so the first-order terms cancel and the
/// gap shrinks quadratically in `s`; this is the scaling probe behind
/// treating the weight average as a stand-in for the whole ensemble.
pub fn swa_approximation_gap(
    spec: &ModelSpec,
    coll: &WeightCollection,
    scale: f64,
    b: &Batch,
) -> Result<f64> {
    let center = crate::train::swa(coll)?;
    let g_center = model::grad_input(spec, &center, b)?;

    let mut mean_grad = Matrix::zeros(b.len(), b.input_dim());
    for w in coll.weights() {
        let dev: Vec<f64> = w
            .values()
            .iter()
            .zip(center.values())
            .map(|(a, c)| a - c)
            .collect();
        let displaced = center.add_scaled(&dev, scale)?;
        let g = model::grad_input(spec, &displaced, b)?;
        linalg::axpy(mean_grad.as_mut_slice(), g.as_slice(), 1.0);
    }
    linalg::scale(mean_grad.as_mut_slice(), 1.0 / coll.len() as f64);

    let mut sq = 0.0;
    for (a, c) in mean_grad.as_slice().iter().zip(g_center.as_slice()) {
        sq += (a - c) * (a - c);
    }
    Ok(libm::sqrt(sq))
}
