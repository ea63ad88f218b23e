//! Subspace calculus in the Hilbert space `L²(M)` with inner product
//! `⟨x, y⟩ = τ(y* x)`: spans, right-module closures, orthocomplements,
//! wandering subspaces and invariance tests.
//!
//! A subspace is held as an orthonormal basis of algebra elements together
//! with the stacked weighted-vector matrix of that basis, so projections and
//! batched membership tests run as dense matrix products.  In finite
//! dimensions closedness is automatic, so one type serves every `L^p`.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{zero_threshold, AlgebraElement, FinVNAlgebra, C64};
use crate::error::{Error, Result};
use crate::tracial::TracialSubalgebra;

/// A subspace of `L²(M)`, stored as an orthonormal basis under `τ(y* x)`.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: FinVNAlgebra,
    basis: Vec<AlgebraElement>,
    /// `space_dim × dim` weighted-vector matrix of the basis.
    mat: DMatrix<C64>,
}

impl Subspace {
    fn assemble(ambient: &FinVNAlgebra, basis: Vec<AlgebraElement>) -> Self {
        let mat = stack(ambient, &basis);
        Self {
            ambient: ambient.clone(),
            basis,
            mat,
        }
    }

    pub fn zero(ambient: &FinVNAlgebra) -> Self {
        Self::assemble(ambient, Vec::new())
    }

    /// Orthonormal basis of `span(gens)` obtained from a rank-revealing
    /// orthogonal factorization of the stacked generator matrix, with the
    /// global rank threshold.  An empty or all-zero generator list gives the
    /// zero subspace.
    pub fn from_generators(ambient: &FinVNAlgebra, gens: &[AlgebraElement]) -> Result<Self> {
        for g in gens {
            ambient.check_conforms(g)?;
        }
        Ok(Self::assemble(ambient, orthonormalize(ambient, gens)))
    }

    /// Wraps a basis that is already orthonormal (debug-checked).
    pub(crate) fn from_orthonormal(ambient: &FinVNAlgebra, basis: Vec<AlgebraElement>) -> Self {
        let s = Self::assemble(ambient, basis);
        #[cfg(debug_assertions)]
        {
            let gram = s.mat.ad_mul(&s.mat);
            let eye = DMatrix::<C64>::identity(gram.nrows(), gram.ncols());
            debug_assert!(
                (&gram - eye).norm() < 1e-7,
                "basis not orthonormal (gram deviation {})",
                (&gram - DMatrix::<C64>::identity(gram.nrows(), gram.ncols())).norm()
            );
        }
        s
    }

    pub fn ambient(&self) -> &FinVNAlgebra {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_zero(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[AlgebraElement] {
        &self.basis
    }

    /// Orthogonal projection of `x` onto the subspace.
    pub fn project(&self, x: &AlgebraElement) -> AlgebraElement {
        if self.basis.is_empty() {
            return self.ambient.zero();
        }
        let v = self.ambient.to_weighted_vec(x);
        let coeff = self.mat.ad_mul(&v);
        self.ambient.element_from_vec(&(&self.mat * coeff))
    }

    /// `‖x − P x‖₂`, the distance from `x` to the subspace.
    pub fn residual_of(&self, x: &AlgebraElement) -> f64 {
        let v = self.ambient.to_weighted_vec(x);
        self.residual_of_vec(&v)
    }

    fn residual_of_vec(&self, v: &DVector<C64>) -> f64 {
        if self.basis.is_empty() {
            return v.norm();
        }
        let coeff = self.mat.ad_mul(v);
        (v - &self.mat * coeff).norm()
    }

    /// Membership up to the scale-robust threshold
    /// `tolerance · max(1, ‖x‖₂)`.
    pub fn contains(&self, x: &AlgebraElement) -> bool {
        self.residual_of(x) <= self.ambient.tolerance() * self.ambient.norm2(x).max(1.0)
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis.iter().all(|v| self.contains(v))
    }

    /// Two subspaces are equal when they have the same dimension and one
    /// contains the other.
    pub fn equals(&self, other: &Subspace) -> bool {
        self.dim() == other.dim() && self.contains_subspace(other)
    }

    /// Symmetric subspace gap: the largest distance of a unit basis vector of
    /// either space from the other space.
    pub fn distance_to(&self, other: &Subspace) -> f64 {
        let a = (0..other.dim())
            .map(|j| self.residual_of_vec(&other.mat.column(j).into_owned()))
            .fold(0.0, f64::max);
        let b = (0..self.dim())
            .map(|j| other.residual_of_vec(&self.mat.column(j).into_owned()))
            .fold(0.0, f64::max);
        a.max(b)
    }

    /// Residue columns `P − B (B^H P)` for a batch of weighted vectors.
    fn deflate_columns(&self, mut p: DMatrix<C64>) -> DMatrix<C64> {
        if !self.basis.is_empty() {
            let coeff = self.mat.ad_mul(&p);
            p -= &self.mat * coeff;
        }
        p
    }
}

pub(crate) fn stack(ambient: &FinVNAlgebra, elems: &[AlgebraElement]) -> DMatrix<C64> {
    let mut mat = DMatrix::<C64>::zeros(ambient.space_dim(), elems.len());
    for (j, g) in elems.iter().enumerate() {
        mat.set_column(j, &ambient.to_weighted_vec(g));
    }
    mat
}

/// Orthonormal basis for the span of `gens` in the weighted-vector picture;
/// directions below the relative rank threshold are dropped.
pub(crate) fn orthonormalize(
    ambient: &FinVNAlgebra,
    gens: &[AlgebraElement],
) -> Vec<AlgebraElement> {
    orthonormalize_floored(ambient, gens, 0.0)
}

/// As `orthonormalize`, but pivot magnitudes are additionally cut below an
/// absolute `floor`.  Upstream truncations leave residue of size
/// `tolerance · scale` inside every derived vector; a direction whose entire
/// content is of that size is noise, not data, so the cut is floored at
/// `slack · tolerance · max input norm` (which preserves scale invariance)
/// and at the caller's `floor`.
///
/// The rank-revealing factorization is a Householder QR with column
/// pivoting.  Under pivoting the diagonal of `R` is non-increasing and
/// `|r_00|` is the largest column norm, so `|r_ii| > cut` relative to
/// `|r_00|` realizes the global rank threshold.
pub(crate) fn orthonormalize_floored(
    ambient: &FinVNAlgebra,
    gens: &[AlgebraElement],
    floor: f64,
) -> Vec<AlgebraElement> {
    if gens.is_empty() {
        return Vec::new();
    }
    let mut input_scale: f64 = 0.0;
    for g in gens {
        input_scale = input_scale.max(ambient.norm2(g));
    }
    let noise = crate::tracial::INVARIANT_SLACK * ambient.tolerance() * input_scale;

    const CHUNK: usize = 128;
    if gens.len() <= CHUNK {
        let cols = qr_columns(ambient, stack(ambient, gens), ambient.tolerance(), noise.max(floor));
        return unstack(ambient, &cols);
    }

    // Large product families: deflate each chunk against the accumulated
    // basis first and stop once the ambient space is saturated.  The rank
    // cut stays pinned to the global input scale.
    let cut = (ambient.tolerance() * input_scale).max(noise).max(floor);
    let mut accumulated: Option<DMatrix<C64>> = None;
    for chunk in gens.chunks(CHUNK) {
        let full = ambient.space_dim();
        if accumulated.as_ref().is_some_and(|b| b.ncols() == full) {
            break;
        }
        let mut p = stack(ambient, chunk);
        if let Some(b) = &accumulated {
            for _ in 0..2 {
                let coeff = b.ad_mul(&p);
                p -= b * coeff;
            }
        }
        let keep: Vec<usize> = (0..p.ncols())
            .filter(|&j| p.column(j).norm() > cut)
            .collect();
        if keep.is_empty() {
            continue;
        }
        let mut fresh = DMatrix::<C64>::zeros(p.nrows(), keep.len());
        for (t, &j) in keep.iter().enumerate() {
            fresh.set_column(t, &p.column(j));
        }
        let new_cols = qr_columns(ambient, fresh, 0.0, cut);
        if new_cols.ncols() == 0 {
            continue;
        }
        accumulated = Some(match accumulated.take() {
            None => new_cols,
            Some(b) => {
                let mut joined = DMatrix::<C64>::zeros(b.nrows(), b.ncols() + new_cols.ncols());
                joined.columns_mut(0, b.ncols()).copy_from(&b);
                joined
                    .columns_mut(b.ncols(), new_cols.ncols())
                    .copy_from(&new_cols);
                joined
            }
        });
    }
    match accumulated {
        Some(b) => unstack(ambient, &b),
        None => Vec::new(),
    }
}

fn unstack(ambient: &FinVNAlgebra, mat: &DMatrix<C64>) -> Vec<AlgebraElement> {
    (0..mat.ncols())
        .map(|j| ambient.element_from_vec(&mat.column(j).into_owned()))
        .collect()
}

fn qr_columns(ambient: &FinVNAlgebra, mat: DMatrix<C64>, rel_tol: f64, floor: f64) -> DMatrix<C64> {
    let n = ambient.space_dim();
    if mat.ncols() == 0 {
        return DMatrix::<C64>::zeros(n, 0);
    }
    let qr = mat.col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let rank_bound = r.nrows().min(r.ncols());
    if rank_bound == 0 {
        return DMatrix::<C64>::zeros(n, 0);
    }
    let r00 = r[(0, 0)].norm();
    let cut = zero_threshold(r00, rel_tol.max(f64::MIN_POSITIVE)).max(floor);
    let mut rank = 0;
    while rank < rank_bound && r[(rank, rank)].norm() > cut {
        rank += 1;
    }
    q.columns(0, rank).into_owned()
}

/// Deflates `vectors` by the (idempotent) component map `project_out` and
/// orthonormalizes the residue.  A second projection pass follows the QR:
/// near-floor pivots let the first pass amplify rounding residue by up to
/// `1/floor`, and reprojecting the finished unit basis removes that leak.
pub(crate) fn deflate_twice<F>(
    ambient: &FinVNAlgebra,
    vectors: &[AlgebraElement],
    floor: f64,
    project_out: F,
) -> Vec<AlgebraElement>
where
    F: Fn(&AlgebraElement) -> AlgebraElement,
{
    let first: Vec<AlgebraElement> = vectors.iter().map(|v| v - &project_out(v)).collect();
    let basis = orthonormalize_floored(ambient, &first, floor);
    let second: Vec<AlgebraElement> = basis.iter().map(|v| v - &project_out(v)).collect();
    orthonormalize_floored(ambient, &second, floor)
}

/// `span{s · t : s ∈ basis(S), t ∈ T}`.  When `T` spans a multiplicatively
/// closed set the result is already a right module, so no iteration is
/// needed.
pub fn right_module_span(s: &Subspace, t: &[AlgebraElement]) -> Subspace {
    let mut products = Vec::with_capacity(s.dim() * t.len());
    let mut t_scale: f64 = 0.0;
    for x in t {
        t_scale = t_scale.max(s.ambient.norm2(x));
    }
    for b in &s.basis {
        for x in t {
            products.push(b * x);
        }
    }
    // Basis vectors are unit, so product content below tolerance · ‖t‖ is
    // residue of upstream truncations rather than data.
    let floor = crate::tracial::INVARIANT_SLACK * s.ambient.tolerance() * t_scale;
    Subspace::assemble(
        &s.ambient,
        orthonormalize_floored(&s.ambient, &products, floor),
    )
}

/// Whether `K · A ⊆ K`, tested by projecting the products onto the
/// orthocomplement of `K` in batches.
pub fn is_invariant(k: &Subspace, a: &TracialSubalgebra) -> bool {
    assert_eq!(k.ambient, *a.ambient(), "subspace and subalgebra ambient differ");
    let tol = crate::tracial::INVARIANT_SLACK * k.ambient.tolerance();
    let mut products = Vec::with_capacity(k.dim() * a.dim_a());
    for b in &k.basis {
        for x in a.a_basis() {
            products.push(b * x);
        }
    }
    for chunk in products.chunks(256) {
        let p = stack(&k.ambient, chunk);
        let scales: Vec<f64> = (0..p.ncols()).map(|j| p.column(j).norm()).collect();
        let r = k.deflate_columns(p);
        for (j, scale) in scales.iter().enumerate() {
            if r.column(j).norm() > tol * scale.max(1.0) {
                return false;
            }
        }
    }
    true
}

/// `K ⊖ L` for `L ⊆ K`; errors with the offending basis vector otherwise.
pub fn ortho_complement_within(k: &Subspace, l: &Subspace) -> Result<Subspace> {
    assert_eq!(k.ambient, l.ambient, "subspaces live in different algebras");
    let tol = k.ambient.tolerance();
    let gate = crate::tracial::INVARIANT_SLACK * tol;
    for (index, v) in l.basis.iter().enumerate() {
        let residual = k.residual_of(v);
        if residual > gate * k.ambient.norm2(v).max(1.0) {
            return Err(Error::NotContained { index, residual });
        }
    }
    let basis = deflate_twice(
        &k.ambient,
        &k.basis,
        crate::tracial::INVARIANT_SLACK * tol,
        |v| l.project(v),
    );
    Ok(Subspace::assemble(&k.ambient, basis))
}

/// The right wandering decomposition `K = [K A₀] ⊕ W`.
#[derive(Debug, Clone)]
pub struct WanderingData {
    pub k: Subspace,
    pub ka0: Subspace,
    pub w: Subspace,
}

/// Computes the right wandering subspace `W = K ⊖ [K A₀]` of an invariant
/// subspace.
pub fn wandering_subspace(k: &Subspace, a: &TracialSubalgebra) -> Result<WanderingData> {
    if !is_invariant(k, a) {
        return Err(Error::Precondition(
            "subspace is not right invariant under the subalgebra".into(),
        ));
    }
    wandering_subspace_unchecked(k, a)
}

/// As [`wandering_subspace`] for callers that have already verified
/// invariance.
pub(crate) fn wandering_subspace_unchecked(
    k: &Subspace,
    a: &TracialSubalgebra,
) -> Result<WanderingData> {
    let ka0 = right_module_span(k, a.a0_basis());
    let w = ortho_complement_within(k, &ka0)?;
    Ok(WanderingData {
        k: k.clone(),
        ka0,
        w,
    })
}

/// `[K A₀]` is properly contained in `K`.
pub fn is_simply_invariant(k: &Subspace, a: &TracialSubalgebra) -> Result<bool> {
    if !is_invariant(k, a) {
        return Err(Error::Precondition(
            "subspace is not right invariant under the subalgebra".into(),
        ));
    }
    let ka0 = right_module_span(k, a.a0_basis());
    Ok(ka0.dim() < k.dim())
}
