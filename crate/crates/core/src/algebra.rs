//! Finite von Neumann algebras `M = ⊕_k M_{n_k}` carrying a faithful tracial
//! state `τ(x) = Σ_k λ_k Tr(x_k)`, together with the matrix calculus (trace,
//! L^p norms, polar decomposition, positive functional calculus) every other
//! module consumes.
//!
//! In finite dimensions each noncommutative L^p space coincides with `M` as a
//! set, so a single element type serves all of them; the exponent only changes
//! the norm.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// One matrix block together with its trace weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

/// The pair `(M, τ)`: a direct sum of complex matrix blocks with a faithful
/// tracial state.  Also carries the global numerical tolerance used for every
/// rank and zero decision downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct FinVNAlgebra {
    blocks: Vec<Block>,
    tolerance: f64,
}

impl FinVNAlgebra {
    /// Builds the algebra from `(dimension, weight)` pairs.  The weights must
    /// be strictly positive and satisfy `Σ λ_k n_k = 1` so that τ is a
    /// faithful state.
    pub fn new(blocks: &[(usize, f64)], tolerance: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Structure("algebra needs at least one block".into()));
        }
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::Structure(format!(
                "tolerance must be a positive real, got {tolerance}"
            )));
        }
        let mut total = 0.0;
        for &(dim, weight) in blocks {
            if dim == 0 {
                return Err(Error::Structure("block dimension must be positive".into()));
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Structure(format!(
                    "trace weights must be strictly positive, got {weight}"
                )));
            }
            total += weight * dim as f64;
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Structure(format!(
                "trace weights must satisfy sum(weight * dim) = 1, got {total}"
            )));
        }
        Ok(Self {
            blocks: blocks
                .iter()
                .map(|&(dim, weight)| Block { dim, weight })
                .collect(),
            tolerance,
        })
    }

    /// Uniform weights `λ_k = 1 / Σ n_j` and the default tolerance.
    pub fn with_uniform_weights(dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if total == 0 {
            return Err(Error::Structure("algebra needs at least one block".into()));
        }
        let w = 1.0 / total as f64;
        let blocks: Vec<(usize, f64)> = dims.iter().map(|&d| (d, w)).collect();
        Self::new(&blocks, DEFAULT_TOLERANCE)
    }

    /// Single full matrix block `M_n` with weight `1/n`.
    pub fn full_matrix(n: usize) -> Result<Self> {
        Self::with_uniform_weights(&[n])
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `Σ n_k`, the dimension of the underlying Hilbert space column.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// `Σ n_k²`, the complex dimension of `M` itself (and of `L²(M)`).
    pub fn space_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect(),
        }
    }

    pub fn scalar(&self, c: C64) -> AlgebraElement {
        self.identity().scale(c)
    }

    /// The matrix unit `e_ij` living in block `k` (zero elsewhere), indices
    /// zero-based.
    pub fn matrix_unit(&self, k: usize, i: usize, j: usize) -> AlgebraElement {
        let mut x = self.zero();
        x.blocks[k][(i, j)] = C64::new(1.0, 0.0);
        x
    }

    pub fn conforms(&self, x: &AlgebraElement) -> bool {
        x.blocks.len() == self.blocks.len()
            && x.blocks
                .iter()
                .zip(&self.blocks)
                .all(|(m, b)| m.nrows() == b.dim && m.ncols() == b.dim)
    }

    pub fn check_conforms(&self, x: &AlgebraElement) -> Result<()> {
        if self.conforms(x) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.blocks.iter().map(|b| b.dim).collect(),
                got: x.blocks.iter().map(|m| m.nrows()).collect(),
            })
        }
    }

    /// `τ(x) = Σ_k λ_k Tr(x_k)`; τ(1) = 1.
    pub fn trace(&self, x: &AlgebraElement) -> Result<C64> {
        self.check_conforms(x)?;
        Ok(self.trace_unchecked(x))
    }

    pub(crate) fn trace_unchecked(&self, x: &AlgebraElement) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (m, b) in x.blocks.iter().zip(&self.blocks) {
            acc += m.trace() * C64::new(b.weight, 0.0);
        }
        acc
    }

    /// The `L²` inner product `⟨x, y⟩ = τ(y* x)`, linear in `x`.
    pub fn inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for ((mx, my), b) in x.blocks.iter().zip(&y.blocks).zip(&self.blocks) {
            let mut s = C64::new(0.0, 0.0);
            for (a, c) in mx.iter().zip(my.iter()) {
                s += c.conj() * a;
            }
            acc += s * C64::new(b.weight, 0.0);
        }
        acc
    }

    /// `‖x‖₂ = τ(x* x)^(1/2)`.
    pub fn norm2(&self, x: &AlgebraElement) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// Largest singular value of `x` over all blocks (the operator norm).
    pub fn op_norm(&self, x: &AlgebraElement) -> f64 {
        self.singular_values(x).into_iter().fold(0.0, f64::max)
    }

    /// `τ(|x|^p)^(1/p)`, computed through the Hermitian eigenvalues of `x*x`;
    /// `p = ∞` gives the operator norm.  Monotone in `p` since τ is a state.
    pub fn lp_norm(&self, x: &AlgebraElement, p: LpIndex) -> Result<f64> {
        self.check_conforms(x)?;
        if p.is_infinite() {
            return Ok(self.op_norm(x));
        }
        let p = p.value();
        let mut acc = 0.0;
        for (m, b) in x.blocks.iter().zip(&self.blocks) {
            let gram = m.adjoint() * m;
            let eig = hermitian_eigenvalues(&gram);
            for lam in eig.iter() {
                let sigma = lam.max(0.0).sqrt();
                acc += b.weight * sigma.powf(p);
            }
        }
        Ok(acc.powf(1.0 / p))
    }

    /// All singular values of `x`, unweighted, across blocks.
    pub fn singular_values(&self, x: &AlgebraElement) -> Vec<f64> {
        let mut out = Vec::new();
        for m in &x.blocks {
            let gram = m.adjoint() * m;
            let eig = hermitian_eigenvalues(&gram);
            out.extend(eig.iter().map(|l| l.max(0.0).sqrt()));
        }
        out
    }

    /// `τ(x^p)` for positive semidefinite `x` and any real `p > 0`.
    pub fn trace_power(&self, x: &AlgebraElement, p: f64) -> Result<f64> {
        self.check_conforms(x)?;
        if p.is_nan() || p <= 0.0 {
            return Err(Error::Domain(format!("exponent must be positive, got {p}")));
        }
        self.check_almost_hermitian(x)?;
        let mut acc = 0.0;
        for (m, b) in x.blocks.iter().zip(&self.blocks) {
            let eig = hermitian_eigenvalues(m);
            for lam in eig.iter() {
                acc += b.weight * lam.max(0.0).powf(p);
            }
        }
        Ok(acc)
    }

    /// `τ(|x|^p)` for arbitrary `x` and real `p > 0`.
    pub fn abs_trace_power(&self, x: &AlgebraElement, p: f64) -> Result<f64> {
        self.check_conforms(x)?;
        if p.is_nan() || p <= 0.0 {
            return Err(Error::Domain(format!("exponent must be positive, got {p}")));
        }
        let mut acc = 0.0;
        for (m, b) in x.blocks.iter().zip(&self.blocks) {
            let gram = m.adjoint() * m;
            let eig = hermitian_eigenvalues(&gram);
            for lam in eig.iter() {
                acc += b.weight * lam.max(0.0).sqrt().powf(p);
            }
        }
        Ok(acc)
    }

    /// Polar decomposition `x = u · pos` with `pos = (x*x)^(1/2)` and `u` a
    /// partial isometry whose initial projection is the support of `pos`.
    /// Computed through the Hermitian eigendecomposition of `x*x`:
    /// `pos = V Λ^(1/2) V*` and `u = x V Λ^(-1/2) V*` on the support.
    pub fn polar_decompose(&self, x: &AlgebraElement) -> Result<(AlgebraElement, AlgebraElement)> {
        self.check_conforms(x)?;
        let lam_max = x
            .blocks
            .iter()
            .map(|m| hermitian_eigenvalues(&(m.adjoint() * m)).max())
            .fold(0.0, f64::max);
        // Squared rank cut, floored at the eigensolver noise level so that
        // numerically-zero eigenvalues never reach the inverse root.
        let cut = zero_threshold(lam_max, (self.tolerance * self.tolerance).max(1e-14));
        let mut u_blocks = Vec::with_capacity(x.blocks.len());
        let mut p_blocks = Vec::with_capacity(x.blocks.len());
        for m in &x.blocks {
            let n = m.nrows();
            if n == 0 {
                u_blocks.push(m.clone());
                p_blocks.push(m.clone());
                continue;
            }
            let (lam, v) = hermitian_eigen(&(m.adjoint() * m));
            let root = DMatrix::from_diagonal(&lam.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
            let inv_root = DMatrix::from_diagonal(&lam.map(|l| {
                if l > cut {
                    C64::new(1.0 / l.sqrt(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            u_blocks.push(m * &v * inv_root * v.adjoint());
            p_blocks.push(&v * root * v.adjoint());
        }
        Ok((
            AlgebraElement { blocks: u_blocks },
            AlgebraElement { blocks: p_blocks },
        ))
    }

    /// `x^s` for positive semidefinite `x` by functional calculus; eigenvalues
    /// at the zero threshold are mapped to zero, so negative `s` yields the
    /// pseudo-inverse power on the support.
    pub fn positive_power(&self, x: &AlgebraElement, s: f64) -> Result<AlgebraElement> {
        self.check_conforms(x)?;
        self.check_almost_hermitian(x)?;
        let decomp: Vec<(DVector<f64>, DMatrix<C64>)> =
            x.blocks.iter().map(hermitian_eigen).collect();
        let lam_max = decomp
            .iter()
            .flat_map(|(l, _)| l.iter().copied())
            .fold(0.0, f64::max);
        let cut = zero_threshold(lam_max, self.tolerance);
        let neg_floor = -self.tolerance * lam_max.max(1.0);
        let mut blocks = Vec::with_capacity(x.blocks.len());
        for (lam, q) in &decomp {
            for &l in lam.iter() {
                if l < neg_floor {
                    return Err(Error::NotPositive { eigenvalue: l });
                }
            }
            let f = DMatrix::from_diagonal(&lam.map(|l| {
                if l > cut {
                    C64::new(l.powf(s), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            blocks.push(q * f * q.adjoint());
        }
        Ok(AlgebraElement { blocks })
    }

    /// Orthogonal projection onto the range of a positive semidefinite `x`.
    pub fn support_projection(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.positive_power(x, 0.0)
    }

    /// Zeroes the eigenvalues of a positive semidefinite `x` lying below
    /// `slack · tolerance` relative to the largest one.  Used to keep
    /// truncation residue of derived vectors out of inverse-power functional
    /// calculus, where it would otherwise be amplified to unit size.
    pub(crate) fn truncate_psd(&self, x: &AlgebraElement, slack: f64) -> Result<AlgebraElement> {
        self.check_conforms(x)?;
        self.check_almost_hermitian(x)?;
        let decomp: Vec<(DVector<f64>, DMatrix<C64>)> =
            x.blocks.iter().map(hermitian_eigen).collect();
        let lam_max = decomp
            .iter()
            .flat_map(|(l, _)| l.iter().copied())
            .fold(0.0, f64::max);
        let cut = slack * zero_threshold(lam_max, self.tolerance);
        let mut blocks = Vec::with_capacity(x.blocks.len());
        for (lam, q) in &decomp {
            let f = DMatrix::from_diagonal(&lam.map(|l| {
                if l > cut {
                    C64::new(l, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }));
            blocks.push(q * f * q.adjoint());
        }
        Ok(AlgebraElement { blocks })
    }

    /// Residual `‖x − x*‖_F`; errors when `x` is visibly non-Hermitian.
    fn check_almost_hermitian(&self, x: &AlgebraElement) -> Result<()> {
        let mut res: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for m in &x.blocks {
            res = res.max((m - m.adjoint()).norm());
            scale = scale.max(m.norm());
        }
        if res > 1e3 * self.tolerance * scale {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (asymmetry {res:.3e})"
            )));
        }
        Ok(())
    }

    /// Flattens `x` block by block into `ℂ^(Σ n_k²)`, scaling block `k` by
    /// `√λ_k` so the Euclidean inner product matches `τ(y* x)`.
    pub(crate) fn to_weighted_vec(&self, x: &AlgebraElement) -> DVector<C64> {
        let mut v = DVector::zeros(self.space_dim());
        let mut off = 0;
        for (m, b) in x.blocks.iter().zip(&self.blocks) {
            let w = C64::new(b.weight.sqrt(), 0.0);
            for e in m.iter() {
                v[off] = e * w;
                off += 1;
            }
        }
        v
    }

    pub(crate) fn element_from_vec(&self, v: &DVector<C64>) -> AlgebraElement {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for b in &self.blocks {
            let w = C64::new(1.0 / b.weight.sqrt(), 0.0);
            let mut m = DMatrix::zeros(b.dim, b.dim);
            for e in m.iter_mut() {
                *e = v[off] * w;
                off += 1;
            }
            blocks.push(m);
        }
        AlgebraElement { blocks }
    }
}

/// An element of `M` (equivalently, of any `L^p(M)`): one complex matrix per
/// block.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<DMatrix<C64>>,
}

impl AlgebraElement {
    pub fn from_blocks(blocks: Vec<DMatrix<C64>>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<C64> {
        &self.blocks[k]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut DMatrix<C64> {
        &mut self.blocks[k]
    }

    /// The involution `x ↦ x*` (conjugate transpose per block).
    pub fn adjoint(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|m| m.map(|e| e * c)).collect(),
        }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Hermitian part `(x + x*)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|m| (m + m.adjoint()).map(|e| e * C64::new(0.5, 0.0)))
                .collect(),
        }
    }

    /// Anti-Hermitian part mapped to a Hermitian element, `(x − x*)/(2i)`.
    pub fn skew_part(&self) -> Self {
        let half_i_inv = C64::new(0.0, -0.5);
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|m| (m - m.adjoint()).map(|e| e * half_i_inv))
                .collect(),
        }
    }
}

fn assert_same_shape(a: &AlgebraElement, b: &AlgebraElement) {
    assert_eq!(
        a.blocks.len(),
        b.blocks.len(),
        "elements from different algebras"
    );
    for (x, y) in a.blocks.iter().zip(&b.blocks) {
        assert_eq!(x.shape(), y.shape(), "elements from different algebras");
    }
}

impl std::ops::Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_same_shape(self, rhs);
        AlgebraElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_same_shape(self, rhs);
        AlgebraElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl std::ops::Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        assert_same_shape(self, rhs);
        AlgebraElement {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect(),
        }
    }
}

/// An exponent `p ∈ [1, ∞]` with `∞` as a distinguished value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpIndex(f64);

impl LpIndex {
    pub const ONE: LpIndex = LpIndex(1.0);
    pub const TWO: LpIndex = LpIndex(2.0);
    pub const INFINITY: LpIndex = LpIndex(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p >= 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Domain(format!("L^p exponent must satisfy p >= 1, got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// The conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> LpIndex {
        if self.0.is_infinite() {
            LpIndex(1.0)
        } else if self.0 == 1.0 {
            LpIndex::INFINITY
        } else {
            LpIndex(self.0 / (self.0 - 1.0))
        }
    }
}

/// Zero cutoff for eigen/singular values: relative to the largest value of
/// the same matrix, with an absolute fallback when everything vanishes.
pub(crate) fn zero_threshold(max: f64, tolerance: f64) -> f64 {
    if max > 0.0 {
        tolerance * max
    } else {
        tolerance
    }
}

/// Eigendecomposition of (the Hermitian part of) `m`, ascending eigenvalues.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()).map(|e| e * C64::new(0.5, 0.0));
    let eig = nalgebra::SymmetricEigen::new(h);
    (eig.eigenvalues, eig.eigenvectors)
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> DVector<f64> {
    let h = (m + m.adjoint()).map(|e| e * C64::new(0.5, 0.0));
    nalgebra::SymmetricEigen::new(h).eigenvalues
}
