//! Random instance generators shared by the property suites.
#![allow(dead_code)] // each test binary uses a different subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subdiag::subspace::right_module_span;
use subdiag::tracial::build_nest_subalgebra;
use subdiag::{AlgebraElement, FinVNAlgebra, NestSpec, Subspace, TracialSubalgebra, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Complex Gaussian element scaled to unit ‖·‖₂.
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

/// Random algebra with at most `max_blocks` blocks of dimension at most
/// `max_dim`, random positive weights normalized to a state.
pub fn random_algebra(rng: &mut ChaCha8Rng, max_blocks: usize, max_dim: usize) -> FinVNAlgebra {
    let nblocks = rng.random_range(1..=max_blocks);
    let dims: Vec<usize> = (0..nblocks).map(|_| rng.random_range(1..=max_dim)).collect();
    let raw: Vec<f64> = (0..nblocks).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().zip(&dims).map(|(w, &d)| w * d as f64).sum();
    let blocks: Vec<(usize, f64)> = dims
        .iter()
        .zip(&raw)
        .map(|(&d, &w)| (d, w / total))
        .collect();
    FinVNAlgebra::new(&blocks, 1e-9).unwrap()
}

/// Random composition of `n` into consecutive parts.
fn random_composition(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut parts = Vec::new();
    let mut left = n;
    while left > 0 {
        let take = rng.random_range(1..=left);
        parts.push(take);
        left -= take;
    }
    parts
}

/// Random nest algebra over a random ambient algebra.
pub fn random_nest_algebra(
    rng: &mut ChaCha8Rng,
    max_blocks: usize,
    max_dim: usize,
) -> (FinVNAlgebra, TracialSubalgebra) {
    let m = random_algebra(rng, max_blocks, max_dim);
    let atoms: Vec<Vec<usize>> = m
        .blocks()
        .iter()
        .map(|b| random_composition(rng, b.dim))
        .collect();
    let a = build_nest_subalgebra(&m, &NestSpec::new(atoms)).unwrap();
    (m, a)
}

/// Invariant subspace generated by `count` Gaussian elements (invariant by
/// construction).
pub fn random_invariant_subspace(
    a: &TracialSubalgebra,
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Subspace {
    let m = a.ambient();
    let gens: Vec<AlgebraElement> = (0..count).map(|_| gaussian_element(m, rng)).collect();
    let seed = Subspace::from_generators(m, &gens).unwrap();
    right_module_span(&seed, a.a_basis())
}

/// Positive definite element with conditioning bounded away from zero.
pub fn random_positive_definite(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let g = gaussian_element(m, rng);
    let gram = &g.adjoint() * &g;
    let shift = 0.2 * m.op_norm(&gram).max(0.1);
    &gram + &m.identity().scale_re(shift)
}

/// Random unitary: the polar part of a Gaussian element (almost surely
/// invertible).
pub fn random_unitary(m: &FinVNAlgebra, rng: &mut ChaCha8Rng) -> AlgebraElement {
    loop {
        let g = gaussian_element(m, rng);
        let sv = m.singular_values(&g);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let smax = sv.iter().copied().fold(0.0, f64::max);
        if smin > 1e-3 * smax {
            let (u, _) = m.polar_decompose(&g).unwrap();
            return u;
        }
    }
}

/// Random element of `span(D)`, optionally forced to be invertible.
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
        if smin > 0.05 * smax && smax > 0.0 {
            return d;
        }
    }
}

/// Random wandering vector `f = v · d` with `v` unitary and `d` diagonal;
/// separating exactly when `d` is invertible.
pub fn random_wandering_vector(
    a: &TracialSubalgebra,
    rng: &mut ChaCha8Rng,
    separating: bool,
) -> AlgebraElement {
    let m = a.ambient();
    let v = random_unitary(m, rng);
    let mut d = random_diagonal(a, rng, true);
    if !separating {
        // Kill one diagonal atom so the support drops below the identity;
        // when the diagonal is a single atom this is impossible and the
        // separating vector is returned as-is.
        let cut = a.d_basis()[rng.random_range(0..a.d_basis().len())].clone();
        let p = m.support_projection(&(&cut.adjoint() * &cut)).unwrap();
        let killed = &d - &(&d * &p);
        if m.norm2(&killed) > 1e-6 {
            d = killed;
        }
    }
    &v * &d
}
