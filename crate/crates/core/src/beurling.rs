//! Structure theory of right invariant subspaces over a maximal subdiagonal
//! algebra: every invariant `K` splits uniquely as a column sum
//! `K = Z ⊕ (⊕_i u_i · span(A))` with `Z` generated by `A₀` (type 2) and the
//! `u_i` partial isometries extracted from the right wandering subspace
//! (type 1).  Includes the unitary (standard) case `K = u · span(A)` and the
//! contractive projection of `K` onto its wandering subspace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraElement, FinVNAlgebra, LpIndex, C64};
use crate::error::{Error, Result};
use crate::subspace::{
    is_invariant, ortho_complement_within, right_module_span, wandering_subspace_unchecked,
    Subspace, WanderingData,
};
use crate::tracial::{TracialSubalgebra, INVARIANT_SLACK};

/// Random probe combinations tried per extraction round in addition to the
/// residual basis vectors, so that a cyclic module is captured by a single
/// generator whenever one exists.
const EXTRACTION_PROBES: usize = 8;

/// Candidate draws when searching the wandering subspace for a cyclic
/// separating vector.
const CYCLIC_PROBES: usize = 16;

/// The column-sum decomposition of an invariant subspace.
#[derive(Debug, Clone)]
pub struct TypeDecomposition {
    pub k: Subspace,
    /// Type 2 part: `Z = span(Z · A₀)`.
    pub z: Subspace,
    /// Partial isometries with `u_i* u_i ∈ span(D)` and `u_j* u_i = 0`.
    pub isometries: Vec<AlgebraElement>,
    /// Type 1 part: the module generated by the wandering subspace.
    pub k1: Subspace,
    pub wandering: WanderingData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeLabel {
    /// The wandering subspace generates `K`.
    Type1,
    /// The wandering subspace vanishes: `K = span(K · A₀)`.
    Type2,
    /// Both parts are nontrivial.
    Mixed,
    Zero,
}

fn require_decomposable(k: &Subspace, a: &TracialSubalgebra) -> Result<()> {
    if !a.is_maximal_subdiagonal() {
        return Err(Error::Precondition(
            "subalgebra is not maximal subdiagonal".into(),
        ));
    }
    if !is_invariant(k, a) {
        return Err(Error::Precondition(
            "subspace is not right invariant under the subalgebra".into(),
        ));
    }
    Ok(())
}

/// Splits an invariant subspace as `K = Z ⊕ K₁` with `K₁` generated by the
/// wandering subspace and `Z` its column-sum complement, and extracts the
/// partial isometries.  The spans of `Z` and `K₁` are uniquely determined by
/// `K`; the isometry list depends on extraction order only up to those spans.
pub fn type_decomposition(k: &Subspace, a: &TracialSubalgebra) -> Result<TypeDecomposition> {
    type_decomposition_seeded(k, a, 0)
}

/// As [`type_decomposition`] with explicit extraction randomness; used to
/// exercise the uniqueness of the decomposition across extraction orders.
pub fn type_decomposition_seeded(
    k: &Subspace,
    a: &TracialSubalgebra,
    seed: u64,
) -> Result<TypeDecomposition> {
    require_decomposable(k, a)?;
    let wd = wandering_subspace_unchecked(k, a)?;
    let k1 = right_module_span(&wd.w, a.a_basis());
    let z = ortho_complement_within(k, &k1)?;
    let isometries = extract_partial_isometries_seeded(&wd.w, a, seed)?;
    let dec = TypeDecomposition {
        k: k.clone(),
        z,
        isometries,
        k1,
        wandering: wd,
    };
    verify_decomposition(&dec, a)?;
    Ok(dec)
}

/// Structural identities of a finished decomposition; any failure beyond
/// tolerance signals that a non-subdiagonal algebra slipped past the gate.
fn verify_decomposition(dec: &TypeDecomposition, a: &TracialSubalgebra) -> Result<()> {
    let m = a.ambient();
    let tol = INVARIANT_SLACK * m.tolerance();
    let d_span = a.d_span();

    for (i, u) in dec.isometries.iter().enumerate() {
        let e = &u.adjoint() * u;
        let idem = m.norm2(&(&(&e * &e) - &e));
        let herm = m.norm2(&(&e.adjoint() - &e));
        if idem > tol || herm > tol {
            return Err(Error::Diagnostic {
                what: format!("extracted element {i} is not a partial isometry"),
                residual: idem.max(herm),
            });
        }
        let r = d_span.residual_of(&e);
        if r > tol {
            return Err(Error::Diagnostic {
                what: format!("support projection of isometry {i} is outside the diagonal"),
                residual: r,
            });
        }
        for z in dec.z.basis() {
            let r = m.norm2(&(&u.adjoint() * z));
            if r > tol {
                return Err(Error::Diagnostic {
                    what: format!("isometry {i} does not annihilate the type 2 part"),
                    residual: r,
                });
            }
        }
        for (j, v) in dec.isometries.iter().enumerate() {
            if i != j {
                let r = m.norm2(&(&v.adjoint() * u));
                if r > tol {
                    return Err(Error::Diagnostic {
                        what: format!("isometries {j} and {i} have non-orthogonal ranges"),
                        residual: r,
                    });
                }
            }
        }
    }

    // Z is type 2: Z = span(Z · A₀).
    let za0 = right_module_span(&dec.z, a.a0_basis());
    if !za0.equals(&dec.z) {
        return Err(Error::Diagnostic {
            what: "type 2 part is not generated by its zero-mean translates".into(),
            residual: za0.distance_to(&dec.z),
        });
    }

    // K = Z ⊕ K₁ with the star-product column condition Z* K₁ = 0.
    if dec.z.dim() + dec.k1.dim() != dec.k.dim() {
        return Err(Error::Diagnostic {
            what: format!(
                "parts of dimension {} + {} do not fill the subspace of dimension {}",
                dec.z.dim(),
                dec.k1.dim(),
                dec.k.dim()
            ),
            residual: f64::NAN,
        });
    }
    for z in dec.z.basis() {
        for x in dec.k1.basis() {
            let r = m.norm2(&(&z.adjoint() * x));
            if r > tol {
                return Err(Error::Diagnostic {
                    what: "column condition Z* K1 = 0 fails".into(),
                    residual: r,
                });
            }
        }
    }

    // The wandering subspace of K₁ is the wandering subspace of K.
    let wd1 = wandering_subspace_unchecked(&dec.k1, a)?;
    if !wd1.w.equals(&dec.wandering.w) {
        return Err(Error::Diagnostic {
            what: "type 1 part has a different wandering subspace".into(),
            residual: wd1.w.distance_to(&dec.wandering.w),
        });
    }
    Ok(())
}

/// Decomposes a wandering subspace `W` (with `W*W ⊂ span(D)`) as an
/// orthogonal sum of cyclic modules `u_i · span(D)` and returns the `u_i`.
///
/// Each round picks a generator of maximal rank among the residual basis
/// vectors and a handful of seeded random combinations (ties resolved in
/// listing order, basis vectors first), takes its polar part, and deflates
/// the residual by the `D`-module projection `v ↦ v − u Φ(u* v)`.
pub fn extract_partial_isometries(
    w: &Subspace,
    a: &TracialSubalgebra,
) -> Result<Vec<AlgebraElement>> {
    extract_partial_isometries_seeded(w, a, 0)
}

pub fn extract_partial_isometries_seeded(
    w: &Subspace,
    a: &TracialSubalgebra,
    seed: u64,
) -> Result<Vec<AlgebraElement>> {
    let m = a.ambient();
    let tol = INVARIANT_SLACK * m.tolerance();
    let d_span = a.d_span();
    for (i, wi) in w.basis().iter().enumerate() {
        for (j, wj) in w.basis().iter().enumerate() {
            let prod = &wi.adjoint() * wj;
            let residual = d_span.residual_of(&prod);
            if residual > tol * m.norm2(&prod).max(1.0) {
                return Err(Error::GramOutsideDiagonal { i, j, residual });
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed_ba5e));
    let mut residual: Vec<AlgebraElement> = w.basis().to_vec();
    let mut out = Vec::new();
    while !residual.is_empty() {
        let mut candidates = residual.clone();
        if residual.len() > 1 {
            for _ in 0..EXTRACTION_PROBES {
                candidates.push(random_combination(m, &residual, &mut rng));
            }
        }
        // Strictly-greater comparison keeps the first maximum, so exact rank
        // ties fall back to basis order.
        let mut best = 0;
        let mut best_rank = element_rank(m, &candidates[0]);
        for (idx, c) in candidates.iter().enumerate().skip(1) {
            let r = element_rank(m, c);
            if r > best_rank {
                best_rank = r;
                best = idx;
            }
        }
        let chosen = candidates[best].clone();
        let gram = m.truncate_psd(&(&chosen.adjoint() * &chosen), INVARIANT_SLACK)?;
        let root_inv = m.positive_power(&gram, -0.5)?;
        let u = &chosen * &root_inv;
        let next = crate::subspace::deflate_twice(m, &residual, INVARIANT_SLACK * m.tolerance(), |v| {
            let coeff = a.expectation(&(&u.adjoint() * v));
            &u * &coeff
        });
        if next.len() >= residual.len() {
            return Err(Error::Diagnostic {
                what: "extraction failed to reduce the wandering subspace".into(),
                residual: next.len() as f64,
            });
        }
        out.push(u);
        residual = next;
    }
    Ok(out)
}

fn random_combination(
    m: &FinVNAlgebra,
    basis: &[AlgebraElement],
    rng: &mut ChaCha8Rng,
) -> AlgebraElement {
    let mut x = m.zero();
    for b in basis {
        let c = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        x = &x + &b.scale(c);
    }
    let n = m.norm2(&x);
    if n > 0.0 {
        x.scale_re(1.0 / n)
    } else {
        x
    }
}

/// Number of singular values of `x` above the relative rank threshold.
fn element_rank(m: &FinVNAlgebra, x: &AlgebraElement) -> usize {
    let sv = m.singular_values(x);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let cut = crate::algebra::zero_threshold(smax, m.tolerance());
    sv.iter().filter(|&&s| s > cut).count()
}

/// Type of an invariant subspace.
pub fn classify_type(k: &Subspace, a: &TracialSubalgebra) -> Result<TypeLabel> {
    require_decomposable(k, a)?;
    if k.is_zero() {
        return Ok(TypeLabel::Zero);
    }
    let wd = wandering_subspace_unchecked(k, a)?;
    if wd.w.is_zero() {
        return Ok(TypeLabel::Type2);
    }
    let k1 = right_module_span(&wd.w, a.a_basis());
    if k1.dim() == k.dim() {
        Ok(TypeLabel::Type1)
    } else {
        Ok(TypeLabel::Mixed)
    }
}

/// Searches the wandering subspace for a cyclic separating vector and, when
/// it exists, returns the unitary `u` with `K = span(u · A)`.
///
/// A vector `w ∈ W` is cyclic when `span(w · D) = W`; its polar part then
/// generates `W` as a module, and `w` is additionally separating exactly when
/// the support of `w* w` is the identity.  Any cyclic vector decides the
/// module class, so candidates are drawn deterministically from the basis,
/// the basis sum and seeded random combinations.
pub fn standard_generator(
    dec: &TypeDecomposition,
    a: &TracialSubalgebra,
) -> Option<AlgebraElement> {
    let m = a.ambient();
    if dec.k.is_zero() || !dec.z.is_zero() {
        return None;
    }
    let w = &dec.wandering.w;
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a9_d00d ^ w.dim() as u64);
    let mut candidates: Vec<AlgebraElement> = w.basis().to_vec();
    if w.dim() > 1 {
        let sum = w
            .basis()
            .iter()
            .fold(m.zero(), |acc, b| &acc + b)
            .scale_re(1.0 / (w.dim() as f64).sqrt());
        candidates.push(sum);
        for _ in 0..CYCLIC_PROBES {
            candidates.push(random_combination(m, w.basis(), &mut rng));
        }
    }
    let tol = INVARIANT_SLACK * m.tolerance();
    let mut saw_cyclic = false;
    for cand in &candidates {
        let orbit: Vec<AlgebraElement> = a.d_basis().iter().map(|d| cand * d).collect();
        let span = Subspace::from_generators(m, &orbit).ok()?;
        if span.dim() != w.dim() {
            continue;
        }
        saw_cyclic = true;
        let gram = m.truncate_psd(&(&cand.adjoint() * cand), INVARIANT_SLACK).ok()?;
        let support = m.support_projection(&gram).ok()?;
        let full = m.trace_unchecked(&support).re;
        if (full - 1.0).abs() > tol {
            continue;
        }
        let u = cand * &m.positive_power(&gram, -0.5).ok()?;
        let one = m.identity();
        let left = m.norm2(&(&(&u.adjoint() * &u) - &one));
        let right = m.norm2(&(&(&u * &u.adjoint()) - &one));
        if left > tol || right > tol {
            continue;
        }
        let image = right_module_span(
            &Subspace::from_generators(m, std::slice::from_ref(&u)).ok()?,
            a.a_basis(),
        );
        if image.equals(&dec.k) {
            return Some(u);
        }
    }
    let _ = saw_cyclic;
    None
}

/// The projection `θ(x) = Σ_i u_i Φ(u_i* x)` of `K` onto its wandering
/// subspace along `span(K A₀)`; contractive in every `L^p` norm, verified at
/// the supplied exponent.
pub fn theta_projection(
    dec: &TypeDecomposition,
    a: &TracialSubalgebra,
    x: &AlgebraElement,
    p: LpIndex,
) -> Result<AlgebraElement> {
    let m = a.ambient();
    let residual = dec.k.residual_of(x);
    if residual > INVARIANT_SLACK * m.tolerance() * m.norm2(x).max(1.0) {
        return Err(Error::Precondition(format!(
            "vector is not in the subspace (residual {residual:.3e})"
        )));
    }
    let mut out = m.zero();
    for u in &dec.isometries {
        let coeff = a.expectation(&(&u.adjoint() * x));
        out = &out + &(u * &coeff);
    }
    let nx = m.lp_norm(x, p)?;
    let ny = m.lp_norm(&out, p)?;
    if ny > nx + INVARIANT_SLACK * m.tolerance() * nx.max(1.0) {
        return Err(Error::Diagnostic {
            what: format!("wandering projection is not contractive at p = {}", p.value()),
            residual: ny - nx,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::DEFAULT_TOLERANCE;
    use crate::tracial::{build_from_basis, build_nest_subalgebra, NestSpec};

    fn m2() -> FinVNAlgebra {
        FinVNAlgebra::new(&[(2, 0.5)], DEFAULT_TOLERANCE).unwrap()
    }

    fn upper_triangular_m2() -> (FinVNAlgebra, TracialSubalgebra) {
        let m = m2();
        let a = build_nest_subalgebra(&m, &NestSpec::finest(&m)).unwrap();
        (m, a)
    }

    #[test]
    fn decomposition_of_the_algebra_itself() {
        let (_, a) = upper_triangular_m2();
        let dec = type_decomposition(&a.a_span(), &a).unwrap();
        assert_eq!(dec.z.dim(), 0);
        assert!(dec.k1.equals(&a.a_span()));
        assert!(dec.wandering.w.equals(&a.d_span()));
    }

    #[test]
    fn decomposition_of_a_corner_subspace() {
        let (m, a) = upper_triangular_m2();
        let k = Subspace::from_generators(&m, &[m.matrix_unit(0, 0, 0), m.matrix_unit(0, 0, 1)])
            .unwrap();
        let dec = type_decomposition(&k, &a).unwrap();
        assert_eq!(dec.z.dim(), 0);
        assert_eq!(dec.isometries.len(), 1);
        let u = &dec.isometries[0];
        let e = &u.adjoint() * u;
        assert!(m.norm2(&(&e - &m.matrix_unit(0, 0, 0))) < 1e-10);
        assert!(dec.k1.equals(&k));
    }

    #[test]
    fn decomposition_of_zero() {
        let (m, a) = upper_triangular_m2();
        let dec = type_decomposition(&Subspace::zero(&m), &a).unwrap();
        assert_eq!(dec.z.dim(), 0);
        assert_eq!(dec.k1.dim(), 0);
        assert!(dec.isometries.is_empty());
    }

    #[test]
    fn decomposition_refuses_non_subdiagonal_algebras() {
        let m = m2();
        let a = build_from_basis(&m, &[m.matrix_unit(0, 0, 1)]).unwrap();
        let k = a.a_span();
        assert!(matches!(
            type_decomposition(&k, &a),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn extraction_on_full_diagonal_gives_one_unitary() {
        let (m, a) = upper_triangular_m2();
        let us = extract_partial_isometries(&a.d_span(), &a).unwrap();
        assert_eq!(us.len(), 1);
        let u = &us[0];
        assert!(m.norm2(&(&(&u.adjoint() * u) - &m.identity())) < 1e-10);
    }

    #[test]
    fn extraction_of_single_projection() {
        let (m, a) = upper_triangular_m2();
        let w = Subspace::from_generators(&m, &[m.matrix_unit(0, 0, 0)]).unwrap();
        let us = extract_partial_isometries(&w, &a).unwrap();
        assert_eq!(us.len(), 1);
        let e = &us[0].adjoint() * &us[0];
        assert!(m.norm2(&(&e - &m.matrix_unit(0, 0, 0))) < 1e-10);
    }

    #[test]
    fn extraction_with_overlapping_supports() {
        // span{e₁₁, e₂₁} is a D-module whose two cyclic pieces share the
        // support e₁₁; two partial isometries are unavoidable.
        let (m, a) = upper_triangular_m2();
        let w = Subspace::from_generators(&m, &[m.matrix_unit(0, 0, 0), m.matrix_unit(0, 1, 0)])
            .unwrap();
        let us = extract_partial_isometries(&w, &a).unwrap();
        assert_eq!(us.len(), 2);
        for u in &us {
            let e = &u.adjoint() * u;
            assert!(m.norm2(&(&e - &m.matrix_unit(0, 0, 0))) < 1e-10);
        }
        let cross = m.norm2(&(&us[1].adjoint() * &us[0]));
        assert!(cross < 1e-10);
    }

    #[test]
    fn extraction_rejects_gram_outside_diagonal() {
        let m = m2();
        let a = build_from_basis(&m, &[m.matrix_unit(0, 0, 1)]).unwrap();
        // Wandering subspace of X = span{e₁₁, e₁₂, e₂₂} over A = span{1, e₁₂}
        // is span{e₁₁, e₂₂}, whose Gram products leave span(D) = C·1.
        let x = Subspace::from_generators(
            &m,
            &[
                m.matrix_unit(0, 0, 0),
                m.matrix_unit(0, 0, 1),
                m.matrix_unit(0, 1, 1),
            ],
        )
        .unwrap();
        let wd = crate::subspace::wandering_subspace(&x, &a).unwrap();
        assert_eq!(wd.w.dim(), 2);
        assert!(matches!(
            extract_partial_isometries(&wd.w, &a),
            Err(Error::GramOutsideDiagonal { .. })
        ));
    }

    #[test]
    fn classification_examples() {
        let (m, a) = upper_triangular_m2();
        assert_eq!(classify_type(&a.a_span(), &a).unwrap(), TypeLabel::Type1);
        assert_eq!(
            classify_type(&Subspace::zero(&m), &a).unwrap(),
            TypeLabel::Zero
        );
        // Over A = M (so A₀ = 0) any right ideal is type 1.
        let whole = build_nest_subalgebra(&m, &NestSpec::trivial(&m)).unwrap();
        let ideal = Subspace::from_generators(&m, &[m.matrix_unit(0, 0, 0), m.matrix_unit(0, 0, 1)])
            .unwrap();
        assert_eq!(classify_type(&ideal, &whole).unwrap(), TypeLabel::Type1);
    }

    #[test]
    fn standard_generator_of_the_algebra() {
        let (m, a) = upper_triangular_m2();
        let dec = type_decomposition(&a.a_span(), &a).unwrap();
        let u = standard_generator(&dec, &a).expect("span(A) = 1·span(A)");
        let one = m.identity();
        assert!(m.norm2(&(&(&u.adjoint() * &u) - &one)) < 1e-10);
        let image = right_module_span(
            &Subspace::from_generators(&m, &[u]).unwrap(),
            a.a_basis(),
        );
        assert!(image.equals(&a.a_span()));
    }

    #[test]
    fn standard_generator_absent_for_corner() {
        let (m, a) = upper_triangular_m2();
        let k = Subspace::from_generators(&m, &[m.matrix_unit(0, 0, 0), m.matrix_unit(0, 0, 1)])
            .unwrap();
        let dec = type_decomposition(&k, &a).unwrap();
        assert!(standard_generator(&dec, &a).is_none());
    }

    #[test]
    fn standard_generator_recovers_rotated_algebra() {
        let m = FinVNAlgebra::full_matrix(3).unwrap();
        let a = build_nest_subalgebra(&m, &NestSpec::finest(&m)).unwrap();
        // K = w · span(A) for a diagonal unitary w.
        let mut w = m.zero();
        let phases = [(1.0, 0.0), (0.0, 1.0), (-0.6, 0.8)];
        for (i, &(re, im)) in phases.iter().enumerate() {
            w.block_mut(0)[(i, i)] = C64::new(re, im);
        }
        let gens: Vec<AlgebraElement> = a.a_basis().iter().map(|x| &w * x).collect();
        let k = Subspace::from_generators(&m, &gens).unwrap();
        let dec = type_decomposition(&k, &a).unwrap();
        let u = standard_generator(&dec, &a).expect("rotated algebra is standard");
        let image = right_module_span(
            &Subspace::from_generators(&m, &[u]).unwrap(),
            a.a_basis(),
        );
        assert!(image.equals(&k));
    }

    #[test]
    fn theta_examples() {
        let (m, a) = upper_triangular_m2();
        let dec = type_decomposition(&a.a_span(), &a).unwrap();
        // Identity on the wandering subspace.
        for wv in dec.wandering.w.basis() {
            let t = theta_projection(&dec, &a, wv, LpIndex::TWO).unwrap();
            assert!(m.norm2(&(&t - wv)) < 1e-10);
        }
        // Kernel on span(K A₀).
        for kv in dec.wandering.ka0.basis() {
            let t = theta_projection(&dec, &a, kv, LpIndex::TWO).unwrap();
            assert!(m.norm2(&t) < 1e-10);
        }
        // Diagonal compression of e₁₁ + e₁₂.
        let x = &m.matrix_unit(0, 0, 0) + &m.matrix_unit(0, 0, 1);
        let t = theta_projection(&dec, &a, &x, LpIndex::ONE).unwrap();
        assert!(m.norm2(&(&t - &m.matrix_unit(0, 0, 0))) < 1e-10);
        // Vectors outside K are rejected.
        let outside = m.matrix_unit(0, 1, 0);
        assert!(matches!(
            theta_projection(&dec, &a, &outside, LpIndex::TWO),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn decomposition_spans_are_seed_independent() {
        let m = FinVNAlgebra::full_matrix(3).unwrap();
        let a = build_nest_subalgebra(&m, &NestSpec::new(vec![vec![2, 1]])).unwrap();
        // Rows 0 and 1: the right module generated by the corner units.
        let seedspace = Subspace::from_generators(
            &m,
            &[m.matrix_unit(0, 0, 0), m.matrix_unit(0, 1, 0)],
        )
        .unwrap();
        let k = right_module_span(&seedspace, a.a_basis());
        assert_eq!(k.dim(), 6);
        assert!(is_invariant(&k, &a));
        let d1 = type_decomposition_seeded(&k, &a, 1).unwrap();
        let d2 = type_decomposition_seeded(&k, &a, 99).unwrap();
        assert!(d1.z.equals(&d2.z));
        assert!(d1.k1.equals(&d2.k1));
        assert!(d1.k1.distance_to(&d2.k1) < 1e-8);
    }
}
