//! Tracial subalgebras `A ⊆ M`: the diagonal `D = A ∩ A*`, the
//! trace-preserving expectation `Φ` onto `D`, the zero-mean part
//! `A₀ = A ∩ ker Φ`, and the characterization of maximal subdiagonality
//! (`A + A*` spans `M`).
//!
//! Two constructions are provided: block-upper-triangular algebras relative
//! to a nest of atoms, and the multiplicative closure of user-supplied
//! generators.  In finite dimensions the unique trace-preserving conditional
//! expectation onto a *-subalgebra is exactly the τ-orthogonal projection
//! onto its span, which is how `Φ` is realized.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{AlgebraElement, FinVNAlgebra, C64};
use crate::error::{Error, Result};
use crate::subspace::{orthonormalize, Subspace};

/// Slack factor applied to the global tolerance when verifying structural
/// identities that accumulate a few rounding steps.
pub(crate) const INVARIANT_SLACK: f64 = 10.0;

/// Per block, an ordered partition of the coordinates into consecutive
/// intervals (the nest atoms), stored as interval lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct NestSpec {
    atoms: Vec<Vec<usize>>,
}

impl NestSpec {
    pub fn new(atoms: Vec<Vec<usize>>) -> Self {
        Self { atoms }
    }

    /// One atom per block: `A = M` (the trivial nest).
    pub fn trivial(m: &FinVNAlgebra) -> Self {
        Self {
            atoms: m.blocks().iter().map(|b| vec![b.dim]).collect(),
        }
    }

    /// Singleton atoms: the full upper-triangular algebra in every block.
    pub fn finest(m: &FinVNAlgebra) -> Self {
        Self {
            atoms: m.blocks().iter().map(|b| vec![1; b.dim]).collect(),
        }
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    fn validate(&self, m: &FinVNAlgebra) -> Result<()> {
        if self.atoms.len() != m.num_blocks() {
            return Err(Error::Structure(format!(
                "nest has {} blocks, algebra has {}",
                self.atoms.len(),
                m.num_blocks()
            )));
        }
        for (k, (sizes, b)) in self.atoms.iter().zip(m.blocks()).enumerate() {
            if sizes.is_empty() || sizes.contains(&0) {
                return Err(Error::Structure(format!(
                    "nest atoms of block {k} must be nonempty"
                )));
            }
            let total: usize = sizes.iter().sum();
            if total != b.dim {
                return Err(Error::Structure(format!(
                    "nest atoms of block {k} cover {total} of {} coordinates",
                    b.dim
                )));
            }
        }
        Ok(())
    }

    /// Atom index of each coordinate in block `k`.
    fn atom_of(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (idx, &s) in self.atoms[k].iter().enumerate() {
            out.extend(std::iter::repeat_n(idx, s));
        }
        out
    }
}

/// A tracial subalgebra with its diagonal, expectation and zero-mean part.
#[derive(Debug, Clone)]
pub struct TracialSubalgebra {
    ambient: FinVNAlgebra,
    a_basis: Vec<AlgebraElement>,
    d_basis: Vec<AlgebraElement>,
    a0_basis: Vec<AlgebraElement>,
    /// Orthogonal projection onto `span(D)` in the weighted-vector picture.
    phi: DMatrix<C64>,
}

impl TracialSubalgebra {
    pub fn ambient(&self) -> &FinVNAlgebra {
        &self.ambient
    }

    pub fn a_basis(&self) -> &[AlgebraElement] {
        &self.a_basis
    }

    pub fn d_basis(&self) -> &[AlgebraElement] {
        &self.d_basis
    }

    pub fn a0_basis(&self) -> &[AlgebraElement] {
        &self.a0_basis
    }

    pub fn dim_a(&self) -> usize {
        self.a_basis.len()
    }

    pub fn dim_d(&self) -> usize {
        self.d_basis.len()
    }

    pub fn dim_a0(&self) -> usize {
        self.a0_basis.len()
    }

    pub fn a_span(&self) -> Subspace {
        Subspace::from_orthonormal(&self.ambient, self.a_basis.clone())
    }

    pub fn d_span(&self) -> Subspace {
        Subspace::from_orthonormal(&self.ambient, self.d_basis.clone())
    }

    pub fn a0_span(&self) -> Subspace {
        Subspace::from_orthonormal(&self.ambient, self.a0_basis.clone())
    }

    /// The expectation `Φ(x)`: the τ-orthogonal projection of `x` onto
    /// `span(D)`.  Idempotent, trace-preserving and `D`-bimodular.
    pub fn expectation(&self, x: &AlgebraElement) -> AlgebraElement {
        let v = self.ambient.to_weighted_vec(x);
        self.ambient.element_from_vec(&(&self.phi * v))
    }

    /// `A` is maximal subdiagonal when `A + A*` spans all of `M`
    /// (weak*-density collapses to equality in finite dimensions).
    pub fn is_maximal_subdiagonal(&self) -> bool {
        let mut gens = self.a_basis.clone();
        gens.extend(self.a_basis.iter().map(|a| a.adjoint()));
        orthonormalize(&self.ambient, &gens).len() == self.ambient.space_dim()
    }

    /// Searches for a positive semidefinite `g` with `τ(g a) = 0` for every
    /// `a ∈ A₀` lying measurably outside `span(D)`.  Such a witness exists
    /// exactly when `A + A*` fails to span `M`: the orthocomplement of
    /// `A + A*` is *-closed, any Hermitian unit vector `x₀` of it annihilates
    /// `A₀` under the trace, and `x₀ + ‖x₀‖_∞·1` is the required positive
    /// witness (the identity also annihilates `A₀`).  Returns `None` when the
    /// complement is trivial, which certifies that the property holds.
    ///
    /// The `attempts` budget caps the randomized confirmation probes; the
    /// construction itself is deterministic.
    pub fn unique_extension_witness(&self, attempts: usize) -> Option<AlgebraElement> {
        let m = &self.ambient;
        let mut gens = self.a_basis.clone();
        gens.extend(self.a_basis.iter().map(|a| a.adjoint()));
        let spanned = Subspace::from_orthonormal(m, orthonormalize(m, &gens));
        if spanned.dim() == m.space_dim() {
            return None;
        }
        // Hermitian unit vector orthogonal to A + A*.
        let mut best: Option<AlgebraElement> = None;
        let mut best_norm = 0.0;
        for k in 0..m.num_blocks() {
            let dim = m.blocks()[k].dim;
            for i in 0..dim {
                for j in 0..dim {
                    let unit = m.matrix_unit(k, i, j);
                    let res = &unit - &spanned.project(&unit);
                    for cand in [res.hermitian_part(), res.skew_part()] {
                        let n = m.norm2(&cand);
                        if n > best_norm {
                            best_norm = n;
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        let x0 = best?.scale_re(1.0 / best_norm);
        let shift = m.op_norm(&x0);
        let witness = &x0 + &m.identity().scale_re(shift);

        let tol = INVARIANT_SLACK * m.tolerance();
        for a in self.a0_basis.iter().take(attempts.max(self.a0_basis.len())) {
            debug_assert!(m.trace_unchecked(&(&witness * a)).norm() < tol);
        }
        debug_assert!(self.d_span().residual_of(&witness) > m.tolerance());
        Some(witness)
    }

    /// `[A]₂ ∩ M`, which in finite dimensions is `span(A)` itself.
    pub fn a_infinity(&self) -> Subspace {
        self.a_span()
    }
}

/// Block-upper-triangular algebra relative to the nest atoms; the diagonal
/// is the block-diagonal algebra of the atoms and `Φ` is compression onto it.
pub fn build_nest_subalgebra(m: &FinVNAlgebra, nest: &NestSpec) -> Result<TracialSubalgebra> {
    nest.validate(m)?;
    let mut a_basis = Vec::new();
    let mut d_basis = Vec::new();
    let mut a0_basis = Vec::new();
    for (k, b) in m.blocks().iter().enumerate() {
        let atom = nest.atom_of(k);
        let norm = 1.0 / b.weight.sqrt();
        for i in 0..b.dim {
            for j in 0..b.dim {
                if atom[i] > atom[j] {
                    continue;
                }
                let unit = m.matrix_unit(k, i, j).scale_re(norm);
                a_basis.push(unit.clone());
                if atom[i] == atom[j] {
                    d_basis.push(unit);
                } else {
                    a0_basis.push(unit);
                }
            }
        }
    }
    let phi = projection_matrix(m, &d_basis);
    let alg = TracialSubalgebra {
        ambient: m.clone(),
        a_basis,
        d_basis,
        a0_basis,
        phi,
    };
    verify_structure(&alg)?;
    Ok(alg)
}

/// Closes `generators ∪ {1}` under products and span, computes
/// `D = A ∩ A*` and `Φ`, and verifies that `Φ` restricted to `A` is
/// multiplicative.  A failure of multiplicativity means the input does not
/// generate a tracial subalgebra; the error carries the witness pair.
pub fn build_from_basis(
    m: &FinVNAlgebra,
    generators: &[AlgebraElement],
) -> Result<TracialSubalgebra> {
    for g in generators {
        m.check_conforms(g)?;
    }
    let mut gens = vec![m.identity()];
    gens.extend_from_slice(generators);
    let mut basis = orthonormalize(m, &gens);
    loop {
        let mut extended = basis.clone();
        for x in &basis {
            for y in &basis {
                extended.push(x * y);
            }
        }
        let next = orthonormalize(m, &extended);
        if next.len() == basis.len() {
            basis = next;
            break;
        }
        basis = next;
    }
    let a_span = Subspace::from_orthonormal(m, basis.clone());

    // D = A ∩ A*: coefficient-space null vectors of (I − P_{A*}) on A.
    let adjoints: Vec<AlgebraElement> = basis.iter().map(|a| a.adjoint()).collect();
    let astar_span = Subspace::from_orthonormal(m, orthonormalize(m, &adjoints));
    let d_basis = intersect_with(m, &basis, &astar_span);
    let phi = projection_matrix(m, &d_basis);

    // A₀ = A ∩ ker Φ, the orthocomplement of D inside A.
    let a0_basis = crate::subspace::deflate_twice(m, &basis, INVARIANT_SLACK * m.tolerance(), |x| {
        let v = m.to_weighted_vec(x);
        m.element_from_vec(&(&phi * v))
    });

    let alg = TracialSubalgebra {
        ambient: m.clone(),
        a_basis: a_span.basis().to_vec(),
        d_basis,
        a0_basis,
        phi,
    };
    verify_structure(&alg)?;
    Ok(alg)
}

/// `B · B^H` for the stacked weighted vectors of an orthonormal family.
fn projection_matrix(m: &FinVNAlgebra, basis: &[AlgebraElement]) -> DMatrix<C64> {
    let n = m.space_dim();
    let mut p = DMatrix::<C64>::zeros(n, n);
    for b in basis {
        let v = m.to_weighted_vec(b);
        p += &v * v.adjoint();
    }
    p
}

/// Orthonormal basis of `span(basis) ∩ target` via the null space of the
/// residual map `x ↦ x − P_target(x)` in coefficient space.  The null space
/// is the orthocomplement of the conjugate row space of the residual matrix,
/// computed with a pivoted QR and a two-pass Gram-Schmidt deflation.
fn intersect_with(
    m: &FinVNAlgebra,
    basis: &[AlgebraElement],
    target: &Subspace,
) -> Vec<AlgebraElement> {
    if basis.is_empty() {
        return Vec::new();
    }
    let n = m.space_dim();
    let a_dim = basis.len();
    let mut residues_adj = DMatrix::<C64>::zeros(a_dim, n);
    for (j, a) in basis.iter().enumerate() {
        let r = a - &target.project(a);
        let v = m.to_weighted_vec(&r);
        for i in 0..n {
            residues_adj[(j, i)] = v[i].conj();
        }
    }
    // Orthonormal basis of the coefficient-space row span.
    let qr = residues_adj.col_piv_qr();
    let q = qr.q();
    let r = qr.r();
    let bound = r.nrows().min(r.ncols());
    let r00 = if bound > 0 { r[(0, 0)].norm() } else { 0.0 };
    let cut = m.tolerance() * r00.max(1.0);
    let mut row_basis: Vec<DVector<C64>> = Vec::new();
    for i in 0..bound {
        if r[(i, i)].norm() > cut {
            row_basis.push(q.column(i).into_owned());
        } else {
            break;
        }
    }
    // Complement the row span by deflating the standard coefficient basis.
    let mut null_vecs: Vec<DVector<C64>> = Vec::new();
    for i in 0..a_dim {
        let mut v = DVector::<C64>::zeros(a_dim);
        v[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in row_basis.iter().chain(null_vecs.iter()) {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            null_vecs.push(v / C64::new(norm, 0.0));
        }
    }
    debug_assert_eq!(row_basis.len() + null_vecs.len(), a_dim);
    let members: Vec<AlgebraElement> = null_vecs
        .iter()
        .map(|c| {
            let mut x = m.zero();
            for (a, coeff) in basis.iter().zip(c.iter()) {
                x = &x + &a.scale(*coeff);
            }
            x
        })
        .collect();
    orthonormalize(m, &members)
}

/// Structural identities every tracial subalgebra must satisfy.
fn verify_structure(alg: &TracialSubalgebra) -> Result<()> {
    let m = &alg.ambient;
    let tol = INVARIANT_SLACK * m.tolerance();
    let a_span = alg.a_span();
    let d_span = alg.d_span();
    let a0_span = alg.a0_span();

    // 1 ∈ A, and A is closed under multiplication.
    let one_res = a_span.residual_of(&m.identity());
    if one_res > tol {
        return Err(Error::Diagnostic {
            what: "identity is not in the subalgebra".into(),
            residual: one_res,
        });
    }
    for x in &alg.a_basis {
        for y in &alg.a_basis {
            let p = x * y;
            let r = a_span.residual_of(&p);
            if r > tol * m.norm2(&p).max(1.0) {
                return Err(Error::Diagnostic {
                    what: "subalgebra basis is not multiplicatively closed".into(),
                    residual: r,
                });
            }
        }
    }

    // Φ is trace preserving on the standard units.
    for k in 0..m.num_blocks() {
        let dim = m.blocks()[k].dim;
        for i in 0..dim {
            for j in 0..dim {
                let unit = m.matrix_unit(k, i, j);
                let lhs = m.trace_unchecked(&alg.expectation(&unit));
                let rhs = m.trace_unchecked(&unit);
                if (lhs - rhs).norm() > tol {
                    return Err(Error::Diagnostic {
                        what: "expectation does not preserve the trace".into(),
                        residual: (lhs - rhs).norm(),
                    });
                }
            }
        }
    }

    // Φ restricted to A is multiplicative (the tracial condition).
    for x in &alg.a_basis {
        for y in &alg.a_basis {
            let p = x * y;
            let lhs = alg.expectation(&p);
            let rhs = &alg.expectation(x) * &alg.expectation(y);
            let r = m.norm2(&(&lhs - &rhs));
            if r > tol * m.norm2(&p).max(1.0) {
                return Err(Error::NotTracial {
                    residual: r,
                    witness: Box::new((x.clone(), y.clone())),
                });
            }
        }
    }

    // A = D ⊕ A₀ orthogonally.
    if alg.dim_a() != alg.dim_d() + alg.dim_a0() {
        return Err(Error::Diagnostic {
            what: format!(
                "dim A = {} but dim D + dim A0 = {}",
                alg.dim_a(),
                alg.dim_d() + alg.dim_a0()
            ),
            residual: f64::NAN,
        });
    }
    for d in &alg.d_basis {
        for a0 in &alg.a0_basis {
            let g = m.inner(d, a0).norm();
            if g > tol {
                return Err(Error::Diagnostic {
                    what: "diagonal and zero-mean parts are not orthogonal".into(),
                    residual: g,
                });
            }
        }
        if !a_span.contains(d) {
            return Err(Error::Diagnostic {
                what: "diagonal is not inside the subalgebra".into(),
                residual: a_span.residual_of(d),
            });
        }
    }

    // D·A₀ ⊆ A₀ and A₀·D ⊆ A₀.
    for d in &alg.d_basis {
        for a0 in &alg.a0_basis {
            for p in [d * a0, a0 * d] {
                let r = a0_span.residual_of(&p);
                if r > tol * m.norm2(&p).max(1.0) {
                    return Err(Error::Diagnostic {
                        what: "zero-mean part is not a D-bimodule".into(),
                        residual: r,
                    });
                }
            }
        }
    }
    let _ = d_span;
    Ok(())
}
