//! Seeded random instances: Gaussian elements, nest algebras, invariant
//! subspaces and the structured draws used by the property suites.  All
//! draws are deterministic functions of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subdiag::subspace::right_module_span;
use subdiag::tracial::build_nest_subalgebra;
use subdiag::{AlgebraElement, FinVNAlgebra, NestSpec, Subspace, TracialSubalgebra, C64};

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Complex Gaussian entries of unit variance, scaled to unit `‖·‖₂`.
pub fn gaussian_element(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
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

/// Invariant subspace drawn as the right module generated by `k` Gaussian
/// elements, `k` uniform in `1..=dim M`; invariant by construction and
/// deterministic per seed.
pub fn random_invariant_subspace(a: &TracialSubalgebra, seed: u64) -> Subspace {
    let m = a.ambient();
    let mut rng = rng_from(seed);
    let count = rng.random_range(1..=m.space_dim());
    random_invariant_subspace_with(a, &mut rng, count)
}

pub fn random_invariant_subspace_with(
    a: &TracialSubalgebra,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Subspace {
    let m = a.ambient();
    let gens: Vec<AlgebraElement> = (0..count).map(|_| gaussian_element(m, rng)).collect();
    let seed_span = Subspace::from_generators(m, &gens).expect("gaussian generators conform");
    right_module_span(&seed_span, a.a_basis())
}

/// Random nest algebra over a random block algebra with random weights.
pub fn random_nest_instance(
    rng: &mut ChaCha8Rng,
    max_blocks: usize,
    max_dim: usize,
) -> (FinVNAlgebra, TracialSubalgebra) {
    let nblocks = rng.random_range(1..=max_blocks);
    let dims: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=max_dim)).collect();
    let raw: Vec<f64> = (0..nblocks).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().zip(&dims).map(|(w, &d)| w * d as f64).sum();
    let blocks: Vec<(usize, f64)> = dims
        .iter()
        .zip(&raw)
        .map(|(&d, &w)| (d, w / total))
        .collect();
    let m = FinVNAlgebra::new(&blocks, 1e-9).expect("normalized weights form a state");
    let atoms: Vec<Vec<usize>> = m
        .blocks()
        .iter()
        .map(|b| {
            let mut parts = Vec::new();
            let mut left = b.dim;
            while left > 0 {
                let take = rng.random_range(1..=left);
                parts.push(take);
                left -= take;
            }
            parts
        })
        .collect();
    let a = build_nest_subalgebra(&m, &NestSpec::new(atoms)).expect("nest atoms cover the blocks");
    (m, a)
}

/// Positive definite element with its spectrum bounded away from zero.
pub fn random_positive_definite(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let g = gaussian_element(m, rng);
    let gram = &g.adjoint() * &g;
    let shift = 0.2 * m.op_norm(&gram).max(0.1);
    let f = &gram + &m.identity().scale_re(shift);
    let n = m.norm2(&f);
    f.scale_re(1.0 / n)
}

/// The polar part of a well-conditioned Gaussian element.
pub fn random_unitary(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    loop {
        let g = gaussian_element(m, rng);
        let sv = m.singular_values(&g);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smin > 1e-3 * smax {
            let (u, _) = m.polar_decompose(&g).expect("gaussian element conforms");
            return u;
        }
    }
}

/// Random element of `span(D)`, optionally forced invertible.
pub fn random_diagonal(
    a: &TracialSubalgebra,
    rng: &mut ChaCha8Rng,
    invertible: bool,
) -> AlgebraElement {
    let m = a.ambient();
    loop {
        let mut d = m.zero();
        for b in a.d_basis() {
            let c = C64::new(standard_normal(rng), standard_normal(rng));
            d = &d + &b.scale(c);
        }
        if !invertible {
            return d;
        }
        let sv = m.singular_values(&d);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smax > 0.0 && smin > 0.05 * smax {
            return d;
        }
    }
}

/// Wandering vector `v · d` with `v` unitary and `d` diagonal; separating
/// exactly when `d` stays invertible.
pub fn random_wandering_vector(
    a: &TracialSubalgebra,
    rng: &mut ChaCha8Rng,
    separating: bool,
) -> AlgebraElement {
    let m = a.ambient();
    let v = random_unitary(m, rng);
    let mut d = random_diagonal(a, rng, true);
    if !separating {
        let cut = a.d_basis()[rng.random_range(0..a.d_basis().len())].clone();
        let p = m
            .support_projection(&(&cut.adjoint() * &cut))
            .expect("gram of a basis element is positive");
        let killed = &d - &(&d * &p);
        if m.norm2(&killed) > 1e-6 {
            d = killed;
        }
    }
    &v * &d
}

/// Random orthogonal projection: a spectral cut of a Gaussian Hermitian
/// element at its median eigenvalue.
pub fn random_projection(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    use nalgebra::DMatrix;
    let h = gaussian_element(m, rng).hermitian_part();
    let mut p = m.zero();
    for (k, b) in h.blocks().iter().enumerate() {
        let sym = (b + b.adjoint()).map(|e| e * C64::new(0.5, 0.0));
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = vals[vals.len() / 2];
        let mut blockp = DMatrix::<C64>::zeros(b.nrows(), b.ncols());
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l >= median {
                let v = eig.eigenvectors.column(i);
                blockp += v * v.adjoint();
            }
        }
        *p.block_mut(k) = blockp;
    }
    p
}
