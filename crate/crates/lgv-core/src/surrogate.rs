//! Weight-space surrogate constructors.
//!
//! Four families, all returning a [`WeightCollection`]:
//!
//! - [`rd_vicinity`]: isotropic Gaussian noise around a center (the `RD`
//!   and `LGV-SWA + RD` surrogates, depending on the center),
//! - [`build_subspace`] / [`project_top_c`]: PCA of the deviation matrix by
//!   exact SVD, and reconstruction from the first `C` principal components,
//! - [`sample_subspace`]: Gaussian samples inside the deviation span,
//! - [`shift_deviations`]: a donor subspace's deviations re-centered on a
//!   different solution, optionally rescaled.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, RowSvd};
use crate::model::{Matrix, WeightVector};
use crate::rng;
use crate::train::{swa, CollectionMeta, WeightCollection};

/// `{center + e_k}` with `e_k ~ N(0, sigma^2 I_p)`. `sigma = 0` yields `K`
/// copies of the center.
pub fn rd_vicinity(center: &WeightVector, sigma: f64, k: usize, seed: u64) -> Result<WeightCollection> {
    if sigma < 0.0 {
        return Err(invalid("sigma must be >= 0"));
    }
    if k == 0 {
        return Err(invalid("K must be >= 1"));
    }
    let mut r = rng::rng_from(seed);
    let mut members = Vec::with_capacity(k);
    for _ in 0..k {
        let noise = rng::normal_vec(&mut r, center.len());
        members.push(center.add_scaled(&noise, sigma)?);
    }
    WeightCollection::new(members, CollectionMeta::synthetic(center.content_hash()))
}

/// Shift vector, deviation matrix and its exact SVD for a weight
/// collection: the collection's affine span, decomposed into orthonormal
/// principal directions.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    shift: WeightVector,
    deviations: Matrix,
    singular_values: Vec<f64>,
    components: Matrix,
    explained_ratio: Vec<f64>,
    rank: usize,
    degenerate: bool,
}

impl SubspaceBasis {
    /// The collection mean the deviations are taken about.
    pub fn shift(&self) -> &WeightVector {
        &self.shift
    }

    /// `K x p` matrix whose rows are `w_k - shift`.
    pub fn deviations(&self) -> &Matrix {
        &self.deviations
    }

    /// Singular values of the deviation matrix, descending (length `K`).
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Orthonormal right singular vectors as rows, aligned with
    /// [`singular_values`](Self::singular_values); rows past the rank are
    /// zero.
    pub fn components(&self) -> &Matrix {
        &self.components
    }

    /// `sigma_i^2 / sum_j sigma_j^2` per component.
    pub fn explained_ratio(&self) -> &[f64] {
        &self.explained_ratio
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when every collected weight equals the mean (all singular
    /// values zero).
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn member_count(&self) -> usize {
        self.deviations.rows()
    }

    pub fn dim(&self) -> usize {
        self.deviations.cols()
    }
}

/// PCA of the collection's deviations about their mean, by exact full SVD.
///
/// No recentering happens before the SVD: the shift vector is the exact
/// row mean, so the rows already sum to zero (asserted).
pub fn build_subspace(coll: &WeightCollection) -> Result<SubspaceBasis> {
    if coll.len() < 2 {
        return Err(invalid("subspace needs at least 2 weight sets"));
    }
    let shift = swa(coll)?;
    let k = coll.len();
    let p = coll.dim();
    let mut deviations = Matrix::zeros(k, p);
    for (row, w) in coll.weights().iter().enumerate() {
        for (c, (wv, sv)) in w.values().iter().zip(shift.values()).enumerate() {
            deviations.set(row, c, wv - sv);
        }
    }
    debug_assert!({
        let mut col_sum_max = 0.0f64;
        for c in 0..p {
            let s: f64 = (0..k).map(|r| deviations.get(r, c)).sum();
            col_sum_max = col_sum_max.max(s.abs());
        }
        col_sum_max < 1e-8
    });

    let RowSvd {
        singular_values,
        right_vectors,
        rank,
    } = linalg::svd_rows(&deviations);

    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let degenerate = rank == 0;
    let explained_ratio = if degenerate {
        vec![0.0; k]
    } else {
        singular_values.iter().map(|s| s * s / total).collect()
    };

    Ok(SubspaceBasis {
        shift,
        deviations,
        singular_values,
        components: right_vectors,
        explained_ratio,
        rank,
        degenerate,
    })
}

/// Project every collection member onto the first `C` principal components
/// about the shift: `w_k -> shift + sum_{i<C} <w_k - shift, v_i> v_i`.
/// `C = 0` collapses the collection onto the shift vector itself.
pub fn project_top_c(
    basis: &SubspaceBasis,
    coll: &WeightCollection,
    c: usize,
) -> Result<WeightCollection> {
    if c > basis.member_count() {
        return Err(invalid(alloc::format!(
            "C = {c} exceeds the collection size {}",
            basis.member_count()
        )));
    }
    if coll.dim() != basis.dim() {
        return Err(invalid("collection dimension does not match basis"));
    }
    if coll.spec_hash() != basis.shift.spec_hash() {
        return Err(Error::SpecMismatch {
            expected: basis.shift.spec_hash(),
            found: coll.spec_hash(),
        });
    }
    let active = c.min(basis.rank);
    let mut members = Vec::with_capacity(coll.len());
    for w in coll.weights() {
        let dev: Vec<f64> = w
            .values()
            .iter()
            .zip(basis.shift.values())
            .map(|(a, b)| a - b)
            .collect();
        let mut projected = basis.shift.values().to_vec();
        for i in 0..active {
            let comp = basis.components.row(i);
            let coeff = linalg::dot(&dev, comp);
            linalg::axpy(&mut projected, comp, coeff);
        }
        members.push(basis.shift.with_values(projected)?);
    }
    WeightCollection::new(members, coll.meta().clone())
}

/// `shift + P^T z` for an explicit coordinate vector `z` (length `K`).
pub fn subspace_point(basis: &SubspaceBasis, z: &[f64]) -> Result<WeightVector> {
    if z.len() != basis.member_count() {
        return Err(invalid(alloc::format!(
            "z has length {}, expected {}",
            z.len(),
            basis.member_count()
        )));
    }
    let mut values = basis.shift.values().to_vec();
    for (row, &zk) in z.iter().enumerate() {
        linalg::axpy(&mut values, basis.deviations.row(row), zk);
    }
    basis.shift.with_values(values)
}

/// `{shift + P^T z_k}` with `z_k ~ N(0, I_K)`: random directions inside
/// the deviation span.
pub fn sample_subspace(basis: &SubspaceBasis, k_out: usize, seed: u64) -> Result<WeightCollection> {
    if k_out == 0 {
        return Err(invalid("K_out must be >= 1"));
    }
    let mut r = rng::rng_from(seed);
    let mut members = Vec::with_capacity(k_out);
    for _ in 0..k_out {
        let z = rng::normal_vec(&mut r, basis.member_count());
        members.push(subspace_point(basis, &z)?);
    }
    WeightCollection::new(
        members,
        CollectionMeta::synthetic(basis.shift.content_hash()),
    )
}

/// Donor deviations re-centered on `new_shift` and scaled by `gamma`:
/// `{new_shift + gamma * (w_k' - shift')}`.
pub fn shift_deviations(
    new_shift: &WeightVector,
    donor: &SubspaceBasis,
    gamma: f64,
) -> Result<WeightCollection> {
    if new_shift.len() != donor.dim() {
        return Err(invalid("shift vector dimension does not match donor"));
    }
    if new_shift.spec_hash() != donor.shift.spec_hash() {
        return Err(Error::SpecMismatch {
            expected: donor.shift.spec_hash(),
            found: new_shift.spec_hash(),
        });
    }
    let mut members = Vec::with_capacity(donor.member_count());
    for row in 0..donor.member_count() {
        members.push(new_shift.add_scaled(donor.deviations.row(row), gamma)?);
    }
    WeightCollection::new(
        members,
        CollectionMeta::synthetic(new_shift.content_hash()),
    )
}
