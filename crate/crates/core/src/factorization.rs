//! Inner-outer factorization of algebra elements relative to a maximal
//! subdiagonal algebra: the unitary case `f = u h` with `h` outer, the
//! partial-isometry case for wandering vectors, and the general column-sum
//! case `f = Σ_i u_i h_i` when the invariant hull of `f` is type 1.  Also the
//! column-sum norm identity and the trace-power separation witness that
//! underpins the unitary upgrade.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{hermitian_eigen, AlgebraElement, FinVNAlgebra, LpIndex, C64};
use crate::beurling::{classify_type, standard_generator, type_decomposition, TypeLabel};
use crate::error::{Error, Result};
use crate::subspace::{wandering_subspace, Subspace};
use crate::tracial::{TracialSubalgebra, INVARIANT_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorizationKind {
    /// `f = u h` with `u` unitary and `h` outer.
    Unitary,
    /// `f = u h` with `u` a partial isometry, `u*u ∈ span(D)` and
    /// `span(h A) = (u*u) · span(A)`.
    Partial,
    /// `f = Σ_i u_i h_i` over the isometries of the hull decomposition.
    Sum,
}

/// The data of an inner-outer factorization `f = Σ_i u_i h_i`.
#[derive(Debug, Clone)]
pub struct InnerOuterFactorization {
    pub f: AlgebraElement,
    pub pairs: Vec<(AlgebraElement, AlgebraElement)>,
    pub kind: FactorizationKind,
}

impl InnerOuterFactorization {
    /// `Σ_i u_i h_i`.
    pub fn reconstruct(&self, m: &FinVNAlgebra) -> AlgebraElement {
        self.pairs
            .iter()
            .fold(m.zero(), |acc, (u, h)| &acc + &(u * h))
    }
}

/// `span{f · a : a ∈ A}`, the smallest invariant subspace containing `f`.
pub fn invariant_hull(f: &AlgebraElement, a: &TracialSubalgebra) -> Result<Subspace> {
    let m = a.ambient();
    m.check_conforms(f)?;
    let gens: Vec<AlgebraElement> = a.a_basis().iter().map(|x| f * x).collect();
    Subspace::from_generators(m, &gens)
}

/// `f ⊥ f · A₀`, tested against the zero-mean basis.
pub fn is_wandering_vector(f: &AlgebraElement, a: &TracialSubalgebra) -> bool {
    let m = a.ambient();
    let scale = m.norm2(f).powi(2).max(1.0);
    a.a0_basis().iter().all(|x| {
        let shifted = f * x;
        m.inner(&shifted, f).norm() <= m.tolerance() * scale
    })
}

/// Whether `d ↦ f d` is injective on `span(D)`.
pub fn is_separating(f: &AlgebraElement, a: &TracialSubalgebra) -> bool {
    let m = a.ambient();
    let images: Vec<AlgebraElement> = a.d_basis().iter().map(|d| f * d).collect();
    crate::subspace::orthonormalize(m, &images).len() == a.dim_d()
}

/// `h ∈ span(A)` and `span(h A) = span(A)`.
pub fn is_outer(h: &AlgebraElement, a: &TracialSubalgebra) -> bool {
    let m = a.ambient();
    let a_span = a.a_span();
    if !a_span.contains(h) {
        return false;
    }
    let translates: Vec<AlgebraElement> = a.a_basis().iter().map(|x| h * x).collect();
    match Subspace::from_generators(m, &translates) {
        Ok(s) => s.equals(&a_span),
        Err(_) => false,
    }
}

/// Beurling-Nevanlinna factorization `f = u h` with `u` unitary and `h`
/// outer.  Returns `None` when the wandering subspace of the hull of `f` has
/// no cyclic separating vector; guaranteed to succeed for positive definite
/// invertible `f` and for separating wandering vectors.
pub fn bn_factorize(
    f: &AlgebraElement,
    a: &TracialSubalgebra,
) -> Result<Option<InnerOuterFactorization>> {
    let m = a.ambient();
    m.check_conforms(f)?;
    if !a.is_maximal_subdiagonal() {
        return Err(Error::Precondition(
            "subalgebra is not maximal subdiagonal".into(),
        ));
    }
    let hull = invariant_hull(f, a)?;
    if hull.is_zero() {
        return Ok(None);
    }
    let dec = type_decomposition(&hull, a)?;
    let Some(u) = standard_generator(&dec, a) else {
        return Ok(None);
    };
    let h = &u.adjoint() * f;
    verify_unitary_factorization(m, a, f, &u, &h)?;
    Ok(Some(InnerOuterFactorization {
        f: f.clone(),
        pairs: vec![(u, h)],
        kind: FactorizationKind::Unitary,
    }))
}

fn verify_unitary_factorization(
    m: &FinVNAlgebra,
    a: &TracialSubalgebra,
    f: &AlgebraElement,
    u: &AlgebraElement,
    h: &AlgebraElement,
) -> Result<()> {
    let tol = INVARIANT_SLACK * m.tolerance();
    let one = m.identity();
    let unit_res = m
        .norm2(&(&(&u.adjoint() * u) - &one))
        .max(m.norm2(&(&(u * &u.adjoint()) - &one)));
    if unit_res > tol {
        return Err(Error::Diagnostic {
            what: "inner factor is not unitary".into(),
            residual: unit_res,
        });
    }
    let h_res = a.a_span().residual_of(h);
    if h_res > tol * m.norm2(h).max(1.0) {
        return Err(Error::Diagnostic {
            what: "outer factor left the subalgebra".into(),
            residual: h_res,
        });
    }
    if !is_outer(h, a) {
        return Err(Error::Diagnostic {
            what: "outer factor does not generate the subalgebra".into(),
            residual: f64::NAN,
        });
    }
    let rec = m.norm2(&(f - &(u * h)));
    if rec > tol * m.norm2(f).max(1.0) {
        return Err(Error::Diagnostic {
            what: "factorization does not reconstruct the element".into(),
            residual: rec,
        });
    }
    Ok(())
}

/// Partial Beurling-Nevanlinna factorization.  Positive definite invertible
/// elements route through the unitary case; a wandering vector factors
/// through its polar decomposition, whose positive part automatically lies
/// in `span(D)` because the wandering Gram products do.
pub fn partial_bn_factorize(
    f: &AlgebraElement,
    a: &TracialSubalgebra,
) -> Result<InnerOuterFactorization> {
    let m = a.ambient();
    m.check_conforms(f)?;
    if !a.is_maximal_subdiagonal() {
        return Err(Error::Precondition(
            "subalgebra is not maximal subdiagonal".into(),
        ));
    }
    if is_positive_definite(m, f) {
        let fact = bn_factorize(f, a)?.ok_or_else(|| Error::Diagnostic {
            what: "positive definite invertible element failed to factor".into(),
            residual: f64::NAN,
        })?;
        return Ok(fact);
    }
    if !is_wandering_vector(f, a) {
        return Err(Error::Precondition(
            "element is neither a wandering vector nor positive definite invertible".into(),
        ));
    }

    let (u, _) = m.polar_decompose(f)?;
    let h = &u.adjoint() * f;
    let e = &u.adjoint() * &u;
    let tol = INVARIANT_SLACK * m.tolerance();

    let d_res = a.d_span().residual_of(&e);
    if d_res > tol {
        return Err(Error::Diagnostic {
            what: "initial projection of the polar part left the diagonal".into(),
            residual: d_res,
        });
    }
    let h_res = a.a_span().residual_of(&h);
    if h_res > tol * m.norm2(&h).max(1.0) {
        return Err(Error::Diagnostic {
            what: "outer factor left the subalgebra".into(),
            residual: h_res,
        });
    }
    let fix = m.norm2(&(&(&e * &h) - &h));
    if fix > tol * m.norm2(&h).max(1.0) {
        return Err(Error::Diagnostic {
            what: "outer factor is not fixed by the initial projection".into(),
            residual: fix,
        });
    }
    // span(h A) = (u* u) · span(A), and e belongs to it.
    let h_span = Subspace::from_generators(m, &a.a_basis().iter().map(|x| &h * x).collect::<Vec<_>>())?;
    let e_span = Subspace::from_generators(m, &a.a_basis().iter().map(|x| &e * x).collect::<Vec<_>>())?;
    if !h_span.equals(&e_span) {
        return Err(Error::Diagnostic {
            what: "span(hA) differs from (u*u)·span(A)".into(),
            residual: h_span.distance_to(&e_span),
        });
    }
    if !h_span.contains(&e) {
        return Err(Error::Diagnostic {
            what: "u*u is not in span(hA)".into(),
            residual: h_span.residual_of(&e),
        });
    }
    // The hull of a wandering vector has wandering subspace span(f·D); a
    // mismatch means the cyclic structure collapsed.
    let hull = invariant_hull(f, a)?;
    let wd = wandering_subspace(&hull, a)?;
    let fd = Subspace::from_generators(m, &a.d_basis().iter().map(|d| f * d).collect::<Vec<_>>())?;
    if !wd.w.equals(&fd) {
        return Err(Error::Diagnostic {
            what: "wandering subspace of the hull is not the diagonal orbit of the vector".into(),
            residual: wd.w.distance_to(&fd),
        });
    }

    let one = m.identity();
    let kind = if m.norm2(&(&e - &one)) <= tol {
        if !is_outer(&h, a) {
            return Err(Error::Diagnostic {
                what: "full-support outer factor does not generate the subalgebra".into(),
                residual: f64::NAN,
            });
        }
        FactorizationKind::Unitary
    } else {
        FactorizationKind::Partial
    };
    Ok(InnerOuterFactorization {
        f: f.clone(),
        pairs: vec![(u, h)],
        kind,
    })
}

fn is_positive_definite(m: &FinVNAlgebra, f: &AlgebraElement) -> bool {
    let herm = m.norm2(&(f - &f.adjoint()));
    if herm > m.tolerance() * m.norm2(f).max(1.0) {
        return false;
    }
    let mut min_eig = f64::INFINITY;
    let mut max_eig: f64 = 0.0;
    for b in f.blocks() {
        let eig = crate::algebra::hermitian_eigenvalues(b);
        for &l in eig.iter() {
            min_eig = min_eig.min(l);
            max_eig = max_eig.max(l.abs());
        }
    }
    min_eig > crate::algebra::zero_threshold(max_eig, m.tolerance())
}

/// The generalized inner-outer factorization `f = Σ_i u_i h_i` available when
/// the invariant hull of `f` is type 1; `None` otherwise.
pub fn inner_outer_sum(
    f: &AlgebraElement,
    a: &TracialSubalgebra,
) -> Result<Option<InnerOuterFactorization>> {
    let m = a.ambient();
    m.check_conforms(f)?;
    if !a.is_maximal_subdiagonal() {
        return Err(Error::Precondition(
            "subalgebra is not maximal subdiagonal".into(),
        ));
    }
    let hull = invariant_hull(f, a)?;
    if hull.is_zero() || classify_type(&hull, a)? != TypeLabel::Type1 {
        return Ok(None);
    }
    let dec = type_decomposition(&hull, a)?;
    let tol = INVARIANT_SLACK * m.tolerance();
    let a_span = a.a_span();
    let mut pairs = Vec::with_capacity(dec.isometries.len());
    for (i, u) in dec.isometries.iter().enumerate() {
        let h = &u.adjoint() * f;
        let h_res = a_span.residual_of(&h);
        if h_res > tol * m.norm2(&h).max(1.0) {
            return Err(Error::Diagnostic {
                what: format!("outer factor {i} left the subalgebra"),
                residual: h_res,
            });
        }
        let e = &u.adjoint() * u;
        let fix = m.norm2(&(&(&e * &h) - &h));
        if fix > tol * m.norm2(&h).max(1.0) {
            return Err(Error::Diagnostic {
                what: format!("outer factor {i} is not fixed by its initial projection"),
                residual: fix,
            });
        }
        let h_span =
            Subspace::from_generators(m, &a.a_basis().iter().map(|x| &h * x).collect::<Vec<_>>())?;
        if !h_span.contains(&e) {
            return Err(Error::Diagnostic {
                what: format!("initial projection {i} is not in span(h_i A)"),
                residual: h_span.residual_of(&e),
            });
        }
        pairs.push((u.clone(), h));
    }
    let fact = InnerOuterFactorization {
        f: f.clone(),
        pairs,
        kind: FactorizationKind::Sum,
    };
    let rec = m.norm2(&(f - &fact.reconstruct(m)));
    if rec > tol * m.norm2(f).max(1.0) {
        return Err(Error::Diagnostic {
            what: "column factorization does not reconstruct the element".into(),
            residual: rec,
        });
    }
    Ok(Some(fact))
}

/// `|τ(|Σ_i x_i|^p) − τ((Σ_i x_i* x_i)^(p/2))|` for a star-orthogonal family;
/// the two routes agree identically, so the residual measures numerical
/// noise only.  For `p = ∞` the analogous identity of operator norms is
/// used.
pub fn column_sum_norm_residual(
    m: &FinVNAlgebra,
    xs: &[AlgebraElement],
    p: LpIndex,
) -> Result<f64> {
    for x in xs {
        m.check_conforms(x)?;
    }
    let tol = INVARIANT_SLACK * m.tolerance();
    for (i, xi) in xs.iter().enumerate() {
        for (j, xj) in xs.iter().enumerate() {
            if i == j {
                continue;
            }
            let prod = &xi.adjoint() * xj;
            let residual = m.norm2(&prod);
            if residual > tol * (m.norm2(xi) * m.norm2(xj)).max(1.0) {
                return Err(Error::NotOrthogonal { i, j, residual });
            }
        }
    }
    let sum = xs.iter().fold(m.zero(), |acc, x| &acc + x);
    let gram_sum = xs
        .iter()
        .fold(m.zero(), |acc, x| &acc + &(&x.adjoint() * x));
    if p.is_infinite() {
        let lhs = m.op_norm(&sum);
        let rhs = m.op_norm(&gram_sum).sqrt();
        return Ok((lhs - rhs).abs());
    }
    let p = p.value();
    let lhs = m.abs_trace_power(&sum, p)?;
    let rhs = if gram_sum
        .blocks()
        .iter()
        .all(|b| b.iter().all(|e| e.norm() == 0.0))
    {
        0.0
    } else {
        m.trace_power(&gram_sum, p / 2.0)?
    };
    Ok((lhs - rhs).abs())
}

/// Searches for `d` separating the traced powers `τ((d* v d)^p)` and
/// `τ((d* e d)^p)` of a positive element `v` and a projection `e`; they agree
/// for every `d` exactly when `v = e`.  Deterministic candidates (identity,
/// `e`, its complement, spectral projections of `v`) are tried before seeded
/// Gaussian draws.
pub fn trace_power_witness(
    m: &FinVNAlgebra,
    v: &AlgebraElement,
    e: &AlgebraElement,
    p: f64,
    trials: usize,
) -> Result<Option<AlgebraElement>> {
    m.check_conforms(v)?;
    m.check_conforms(e)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "exponent must lie in (0, inf), got {p}"
        )));
    }
    let tol = m.tolerance();
    // v must be positive semidefinite.
    let mut min_eig = f64::INFINITY;
    let mut max_eig: f64 = 0.0;
    for b in v.blocks() {
        let herm = (b - b.adjoint()).norm();
        if herm > 1e3 * tol * b.norm().max(1.0) {
            return Err(Error::Domain("v is not Hermitian".into()));
        }
        let eig = crate::algebra::hermitian_eigenvalues(b);
        for &l in eig.iter() {
            min_eig = min_eig.min(l);
            max_eig = max_eig.max(l.abs());
        }
    }
    if min_eig < -tol * max_eig.max(1.0) {
        return Err(Error::NotPositive { eigenvalue: min_eig });
    }
    // e must be a projection.
    let proj_res = m
        .norm2(&(&(e * e) - e))
        .max(m.norm2(&(&e.adjoint() - e)));
    if proj_res > INVARIANT_SLACK * tol {
        return Err(Error::Domain(format!(
            "e is not an orthogonal projection (residual {proj_res:.3e})"
        )));
    }

    let mut candidates = vec![m.identity(), e.clone(), &m.identity() - e];
    candidates.extend(spectral_projections(m, v));
    let mut rng = ChaCha8Rng::seed_from_u64(0x15e7_ab1e);
    for _ in 0..trials {
        candidates.push(gaussian_element(m, &mut rng));
    }

    let mut witness = None;
    for d in &candidates {
        let dvd = &(&d.adjoint() * v) * d;
        let ded = &(&d.adjoint() * e) * d;
        let lhs = m.trace_power(&dvd.hermitian_part(), p)?;
        let rhs = m.trace_power(&ded.hermitian_part(), p)?;
        if (lhs - rhs).abs() > tol * lhs.abs().max(rhs.abs()).max(1.0) {
            witness = Some(d.clone());
            break;
        }
    }
    if m.op_norm(&(v - e)) <= tol {
        // Equal inputs: probing must not have produced a spurious witness.
        debug_assert!(witness.is_none());
        return Ok(None);
    }
    Ok(witness)
}

/// Projections onto clustered eigenspaces of a Hermitian element.
fn spectral_projections(m: &FinVNAlgebra, v: &AlgebraElement) -> Vec<AlgebraElement> {
    let mut entries: Vec<(usize, f64, nalgebra::DVector<C64>)> = Vec::new();
    let mut max_abs: f64 = 0.0;
    for (k, b) in v.blocks().iter().enumerate() {
        let (lam, q) = hermitian_eigen(b);
        for (i, &l) in lam.iter().enumerate() {
            max_abs = max_abs.max(l.abs());
            entries.push((k, l, q.column(i).into_owned()));
        }
    }
    entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let gap = (1e-8 * max_abs).max(1e-12);
    let mut out = Vec::new();
    let mut current = m.zero();
    let mut last: Option<f64> = None;
    for (k, l, vec) in entries {
        if let Some(prev) = last {
            if (l - prev).abs() > gap {
                out.push(current);
                current = m.zero();
            }
        }
        let outer = &vec * vec.adjoint();
        *current.block_mut(k) += outer;
        last = Some(l);
    }
    if last.is_some() {
        out.push(current);
    }
    out
}

/// Complex Gaussian element scaled to unit `‖·‖₂`.
fn gaussian_element(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let mut x = m.zero();
    for k in 0..m.num_blocks() {
        let dim = m.blocks()[k].dim;
        for i in 0..dim {
            for j in 0..dim {
                x.block_mut(k)[(i, j)] = C64::new(standard_normal(rng), standard_normal(rng));
            }
        }
    }
    let n = m.norm2(&x);
    if n > 0.0 {
        x.scale_re(1.0 / n)
    } else {
        x
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on open-interval uniforms.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
