//! Property suites over an instance: each suite draws seeded instances,
//! runs the corresponding core operations and records pass/fail checks with
//! worst-case residuals.  Thresholds are fixed constants.
//!
//! Trials are independent tasks over immutable instances and run on scoped
//! worker threads; per-trial randomness is derived from the trial index, so
//! reports are reproducible regardless of scheduling.

use std::str::FromStr;

use rand::Rng;
use serde_json::json;

use subdiag::beurling::{
    standard_generator, theta_projection, type_decomposition, type_decomposition_seeded,
};
use subdiag::factorization::{
    bn_factorize, column_sum_norm_residual, invariant_hull, is_outer, partial_bn_factorize,
    trace_power_witness, FactorizationKind,
};
use subdiag::subspace::{right_module_span, wandering_subspace, Subspace};
use subdiag::{AlgebraElement, FinVNAlgebra, LpIndex, TracialSubalgebra, C64};

use crate::random::{
    gaussian_element, random_invariant_subspace, random_nest_instance, random_positive_definite,
    random_projection, random_unitary, random_wandering_vector, rng_from, standard_normal,
};
use crate::report::ReportBuilder;
use crate::spec::{InstanceSpec, MatrixData};
use crate::HarnessError;

/// Residual bound for the decomposition invariants and subspace identities.
pub const RESIDUAL_BOUND: f64 = 1e-8;
/// Subspace gap bound for the uniqueness checks.
pub const UNIQUENESS_BOUND: f64 = 1e-8;
/// Relative bound for the column norm identity.
pub const COLUMN_NORM_RELATIVE_BOUND: f64 = 1e-10;
/// Additive slack allowed in the contraction checks.
pub const CONTRACTION_SLACK: f64 = 1e-9;
/// Norm bound for vectors that must be annihilated.
pub const KERNEL_BOUND: f64 = 1e-8;
/// Unitarity bound for inner factors.
pub const UNITARY_BOUND: f64 = 1e-9;
/// Minimal operator-norm gap at which the trace-power search must separate.
pub const SEPARATION_GAP: f64 = 1e-3;

/// Exponent grid for the column norm identity.
pub const COLUMN_NORM_EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];
/// Exponent grid for the wandering-projection contraction.
pub const THETA_EXPONENTS: [f64; 4] = [1.0, 2.0, 3.0, f64::INFINITY];

const SUITE_MAX_BLOCKS: usize = 3;
const SUITE_MAX_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Decomposition,
    Uniqueness,
    ColumnNorm,
    Theta,
    Factorization,
    Standard,
    TraceSeparation,
    NegativeControl,
    UpperTriangularPurity,
    HullOrthogonality,
}

impl SuiteName {
    pub const ALL: [SuiteName; 10] = [
        SuiteName::Decomposition,
        SuiteName::Uniqueness,
        SuiteName::ColumnNorm,
        SuiteName::Theta,
        SuiteName::Factorization,
        SuiteName::Standard,
        SuiteName::TraceSeparation,
        SuiteName::NegativeControl,
        SuiteName::UpperTriangularPurity,
        SuiteName::HullOrthogonality,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Decomposition => "decomposition",
            SuiteName::Uniqueness => "uniqueness",
            SuiteName::ColumnNorm => "column-norm",
            SuiteName::Theta => "theta",
            SuiteName::Factorization => "factorization",
            SuiteName::Standard => "standard",
            SuiteName::TraceSeparation => "trace-separation",
            SuiteName::NegativeControl => "negative-control",
            SuiteName::UpperTriangularPurity => "upper-triangular-purity",
            SuiteName::HullOrthogonality => "hull-orthogonality",
        }
    }

    fn default_trials(&self) -> usize {
        match self {
            SuiteName::Decomposition => 200,
            SuiteName::Uniqueness => 100,
            SuiteName::ColumnNorm => 100,
            SuiteName::Theta => 100,
            SuiteName::Factorization => 200,
            SuiteName::Standard => 50,
            SuiteName::TraceSeparation => 100,
            SuiteName::NegativeControl => 16,
            SuiteName::UpperTriangularPurity => 100,
            SuiteName::HullOrthogonality => 200,
        }
    }
}

impl FromStr for SuiteName {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteName::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| HarnessError::UnknownSuite(s.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteConfig {
    pub trials: Option<usize>,
    pub p_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

/// Runs the named suites over the instance and collects a report.
pub fn run_suites(
    spec: &InstanceSpec,
    suites: &[SuiteName],
    cfg: &SuiteConfig,
) -> Result<crate::report::Report, HarnessError> {
    let built = spec.build()?;
    let seed = cfg.seed.unwrap_or(spec.seed);
    let mut rep = ReportBuilder::new();
    for suite in suites {
        let trials = cfg.trials.unwrap_or(suite.default_trials());
        match suite {
            SuiteName::Decomposition => {
                decomposition_suite(&built.subalgebra, seed, trials, &mut rep)
            }
            SuiteName::Uniqueness => uniqueness_suite(&built.subalgebra, seed, trials, &mut rep),
            SuiteName::ColumnNorm => {
                let grid = cfg.p_grid.clone().unwrap_or(COLUMN_NORM_EXPONENTS.to_vec());
                column_norm_suite(&built.subalgebra, seed, trials, &grid, &mut rep)
            }
            SuiteName::Theta => {
                let grid = cfg.p_grid.clone().unwrap_or(THETA_EXPONENTS.to_vec());
                theta_suite(&built.subalgebra, seed, trials, &grid, &mut rep)
            }
            SuiteName::Factorization => {
                factorization_suite(&built.subalgebra, seed, trials, &mut rep)
            }
            SuiteName::Standard => standard_suite(&built.subalgebra, seed, trials, &mut rep),
            SuiteName::TraceSeparation => {
                trace_separation_suite(&built.algebra, seed, trials, &mut rep)
            }
            SuiteName::NegativeControl => {
                negative_control_suite(&built.subalgebra, seed, trials, &mut rep)
            }
            SuiteName::UpperTriangularPurity => {
                purity_suite(&built.subalgebra, seed, trials, &mut rep)
            }
            SuiteName::HullOrthogonality => {
                hull_orthogonality_suite(&built.subalgebra, seed, trials, &mut rep)
            }
        }
    }
    Ok(rep.finish())
}

/// Runs `worker` over every trial index on scoped threads, returning the
/// outcomes in trial order.
fn parallel_trials<T, F>(trials: usize, worker: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(trials.max(1))
        .min(8);
    if threads <= 1 || trials <= 1 {
        return (0..trials).map(worker).collect();
    }
    let mut indexed: Vec<(usize, T)> = std::thread::scope(|scope| {
        let worker = &worker;
        let handles: Vec<_> = (0..threads)
            .map(|lane| {
                scope.spawn(move || {
                    (lane..trials)
                        .step_by(threads)
                        .map(|i| (i, worker(i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, t)| t).collect()
}

/// Instance stream: trial 0 reuses the instance subalgebra, later trials
/// draw fresh random nest algebras.
fn trial_algebra(
    base: &TracialSubalgebra,
    seed: u64,
    trial: usize,
) -> (FinVNAlgebra, TracialSubalgebra) {
    if trial == 0 {
        (base.ambient().clone(), base.clone())
    } else {
        let mut rng = rng_from(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(trial as u64)));
        random_nest_instance(&mut rng, SUITE_MAX_BLOCKS, SUITE_MAX_DIM)
    }
}

/// Random coefficient combination of an orthonormal family.
fn random_span_element(
    m: &FinVNAlgebra,
    basis: &[AlgebraElement],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> AlgebraElement {
    let mut x = m.zero();
    for b in basis {
        let c = C64::new(standard_normal(rng), standard_normal(rng));
        x = &x + &b.scale(c);
    }
    x
}

struct DecompositionOutcome {
    structural: f64,
    gram: f64,
    dims_ok: bool,
    error: Option<String>,
}

pub fn decomposition_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    rep: &mut ReportBuilder,
) {
    let outcomes = parallel_trials(trials, |trial| {
        let (m, a_t) = trial_algebra(a, seed, trial);
        let k = random_invariant_subspace(&a_t, seed.wrapping_add(trial as u64));
        let dec = match type_decomposition(&k, &a_t) {
            Ok(dec) => dec,
            Err(e) => {
                return DecompositionOutcome {
                    structural: f64::NAN,
                    gram: f64::NAN,
                    dims_ok: false,
                    error: Some(format!("trial {trial}: {e}")),
                }
            }
        };
        let d_span = a_t.d_span();
        let mut structural: f64 = 0.0;
        for (i, u) in dec.isometries.iter().enumerate() {
            let e = &u.adjoint() * u;
            structural = structural
                .max(m.norm2(&(&(&e * &e) - &e)))
                .max(m.norm2(&(&e.adjoint() - &e)))
                .max(d_span.residual_of(&e));
            for (j, v) in dec.isometries.iter().enumerate() {
                if i != j {
                    structural = structural.max(m.norm2(&(&v.adjoint() * u)));
                }
            }
            for z in dec.z.basis() {
                structural = structural.max(m.norm2(&(&u.adjoint() * z)));
            }
        }
        for z in dec.z.basis() {
            for x in dec.k1.basis() {
                structural = structural.max(m.norm2(&(&z.adjoint() * x)));
            }
        }
        let za0 = right_module_span(&dec.z, a_t.a0_basis());
        structural = structural.max(za0.distance_to(&dec.z));
        let mut gram: f64 = 0.0;
        for w1 in dec.wandering.w.basis() {
            for w2 in dec.wandering.w.basis() {
                gram = gram.max(d_span.residual_of(&(&w1.adjoint() * w2)));
            }
        }
        let mut dims = dec.z.dim();
        for u in &dec.isometries {
            let ua: Vec<AlgebraElement> = a_t.a_basis().iter().map(|x| u * x).collect();
            dims += Subspace::from_generators(&m, &ua).map(|s| s.dim()).unwrap_or(0);
        }
        DecompositionOutcome {
            structural,
            gram,
            dims_ok: dims == k.dim(),
            error: None,
        }
    });

    let errors: Vec<&String> = outcomes.iter().filter_map(|o| o.error.as_ref()).collect();
    let worst_structural = outcomes
        .iter()
        .filter(|o| o.error.is_none())
        .map(|o| o.structural)
        .fold(0.0, f64::max);
    let worst_gram = outcomes
        .iter()
        .filter(|o| o.error.is_none())
        .map(|o| o.gram)
        .fold(0.0, f64::max);
    let dim_failures = outcomes.iter().filter(|o| !o.dims_ok).count();
    if errors.is_empty() {
        rep.bounded(
            "decomposition-invariants",
            &format!("{trials} random invariant subspaces decompose with all structural identities"),
            worst_structural,
            RESIDUAL_BOUND,
        );
    } else {
        rep.fail(
            "decomposition-invariants",
            "every random invariant subspace admits a type decomposition",
            None,
            json!({ "errors": errors }),
        );
    }
    rep.bounded(
        "wandering-gram",
        "gram products of wandering basis vectors lie in the diagonal",
        worst_gram,
        RESIDUAL_BOUND,
    );
    if dim_failures == 0 {
        rep.pass(
            "decomposition-dimensions",
            "dim Z + sum of cyclic summand dimensions equals dim K exactly",
            None,
        );
    } else {
        rep.fail(
            "decomposition-dimensions",
            "dim Z + sum of cyclic summand dimensions equals dim K exactly",
            None,
            json!({ "failing_trials": dim_failures }),
        );
    }
}

pub fn uniqueness_suite(a: &TracialSubalgebra, seed: u64, trials: usize, rep: &mut ReportBuilder) {
    let outcomes = parallel_trials(trials, |trial| -> Result<f64, String> {
        let (_, a_t) = trial_algebra(a, seed, trial);
        let k = random_invariant_subspace(&a_t, seed.wrapping_add(trial as u64) ^ 0xa5a5);
        let one = type_decomposition_seeded(&k, &a_t, seed.wrapping_add(trial as u64))
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let two = type_decomposition_seeded(
            &k,
            &a_t,
            seed.wrapping_add(trial as u64).wrapping_add(7919),
        )
        .map_err(|e| format!("trial {trial}: {e}"))?;
        Ok(one
            .z
            .distance_to(&two.z)
            .max(one.k1.distance_to(&two.k1)))
    });
    let errors: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let worst = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .fold(0.0f64, |acc, &v| acc.max(v));
    if errors.is_empty() {
        rep.bounded(
            "uniqueness",
            "type parts agree across extraction orders",
            worst,
            UNIQUENESS_BOUND,
        );
    } else {
        rep.fail(
            "uniqueness",
            "type parts agree across extraction orders",
            None,
            json!({ "errors": errors }),
        );
    }
}

pub fn column_norm_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    grid: &[f64],
    rep: &mut ReportBuilder,
) {
    let outcomes = parallel_trials(trials, |trial| -> (f64, Vec<String>) {
        let mut errors = Vec::new();
        let (m, a_t) = trial_algebra(a, seed, trial);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0xc01);
        let k = random_invariant_subspace(&a_t, seed.wrapping_add(trial as u64) ^ 0xc02);
        let dec = match type_decomposition(&k, &a_t) {
            Ok(d) => d,
            Err(e) => return (0.0, vec![format!("trial {trial}: {e}")]),
        };
        if dec.isometries.is_empty() {
            return (0.0, errors);
        }
        // Star-orthogonal family: one element per cyclic summand plus a
        // type 2 component.
        let mut xs: Vec<AlgebraElement> = Vec::new();
        for u in &dec.isometries {
            let coeff = random_span_element(&m, a_t.a_basis(), &mut rng);
            xs.push(u * &coeff);
        }
        if !dec.z.is_zero() {
            xs.push(random_span_element(&m, dec.z.basis(), &mut rng));
        }
        let mut worst_rel: f64 = 0.0;
        for &p in grid {
            let lp = if p.is_infinite() {
                LpIndex::INFINITY
            } else {
                match LpIndex::new(p) {
                    Ok(v) => v,
                    Err(e) => {
                        errors.push(format!("bad exponent {p}: {e}"));
                        continue;
                    }
                }
            };
            match column_sum_norm_residual(&m, &xs, lp) {
                Ok(residual) => {
                    let sum = xs.iter().fold(m.zero(), |acc, x| &acc + x);
                    let scale = if p.is_infinite() {
                        m.op_norm(&sum).max(1e-30)
                    } else {
                        m.abs_trace_power(&sum, p).unwrap_or(0.0).max(1e-30)
                    };
                    worst_rel = worst_rel.max(residual / scale);
                }
                Err(e) => errors.push(format!("trial {trial}, p={p}: {e}")),
            }
        }
        (worst_rel, errors)
    });
    let errors: Vec<&String> = outcomes.iter().flat_map(|(_, e)| e.iter()).collect();
    let worst_rel = outcomes.iter().map(|(w, _)| *w).fold(0.0, f64::max);
    if errors.is_empty() {
        rep.bounded(
            "column-norm",
            &format!("column sum norm identity over exponents {grid:?}"),
            worst_rel,
            COLUMN_NORM_RELATIVE_BOUND,
        );
    } else {
        rep.fail(
            "column-norm",
            "column sum norm identity",
            None,
            json!({ "errors": errors }),
        );
    }
}

pub fn theta_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    grid: &[f64],
    rep: &mut ReportBuilder,
) {
    let outcomes = parallel_trials(trials, |trial| -> (f64, f64, Vec<String>) {
        let mut errors = Vec::new();
        let (m, a_t) = trial_algebra(a, seed, trial);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0x7e7a);
        let k = random_invariant_subspace(&a_t, seed.wrapping_add(trial as u64) ^ 0x7e7b);
        let dec = match type_decomposition(&k, &a_t) {
            Ok(d) => d,
            Err(e) => return (0.0, 0.0, vec![format!("trial {trial}: {e}")]),
        };
        if k.is_zero() {
            return (0.0, 0.0, errors);
        }
        let w = random_span_element(&m, k.basis(), &mut rng);
        let mut excess: f64 = 0.0;
        for &p in grid {
            let lp = if p.is_infinite() {
                LpIndex::INFINITY
            } else {
                LpIndex::new(p).expect("grid exponents are valid")
            };
            match theta_projection(&dec, &a_t, &w, lp) {
                Ok(tw) => {
                    let np = m.lp_norm(&tw, lp).unwrap_or(f64::INFINITY);
                    let nw = m.lp_norm(&w, lp).unwrap_or(0.0);
                    excess = excess.max(np - nw);
                }
                Err(e) => errors.push(format!("trial {trial}, p={p}: {e}")),
            }
        }
        // Kernel: vectors of span(K·A₀) are annihilated.
        let mut kernel: f64 = 0.0;
        if !dec.wandering.ka0.is_zero() {
            let kv = random_span_element(&m, dec.wandering.ka0.basis(), &mut rng);
            let kv = kv.scale_re(1.0 / m.norm2(&kv).max(1e-30));
            match theta_projection(&dec, &a_t, &kv, LpIndex::TWO) {
                Ok(t) => kernel = m.norm2(&t),
                Err(e) => errors.push(format!("trial {trial} kernel: {e}")),
            }
        }
        (excess, kernel, errors)
    });
    let errors: Vec<&String> = outcomes.iter().flat_map(|(_, _, e)| e.iter()).collect();
    let worst_excess = outcomes.iter().map(|(x, _, _)| *x).fold(0.0, f64::max);
    let worst_kernel = outcomes.iter().map(|(_, k, _)| *k).fold(0.0, f64::max);
    if errors.is_empty() {
        rep.bounded(
            "theta-contraction",
            &format!("wandering projection is contractive over exponents {grid:?}"),
            worst_excess.max(0.0),
            CONTRACTION_SLACK,
        );
        rep.bounded(
            "theta-kernel",
            "wandering projection annihilates span(K A0)",
            worst_kernel,
            KERNEL_BOUND,
        );
    } else {
        rep.fail(
            "theta-contraction",
            "wandering projection is contractive",
            None,
            json!({ "errors": errors }),
        );
    }
}

pub fn factorization_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    rep: &mut ReportBuilder,
) {
    // Positive definite invertible stream.
    let positive = parallel_trials(trials, |trial| -> Result<(f64, f64, bool), String> {
        let (m, a_t) = trial_algebra(a, seed, trial);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0xfac);
        let f = random_positive_definite(&m, &mut rng);
        match bn_factorize(&f, &a_t) {
            Ok(Some(fact)) => {
                let (u, h) = &fact.pairs[0];
                let rec = m.norm2(&(&f - &(u * h)));
                let one = m.identity();
                let unitary = m
                    .norm2(&(&(&u.adjoint() * u) - &one))
                    .max(m.norm2(&(&(u * &u.adjoint()) - &one)));
                Ok((rec, unitary, is_outer(h, &a_t)))
            }
            Ok(None) => Err(format!(
                "trial {trial}: positive definite element did not factor"
            )),
            Err(e) => Err(format!("trial {trial}: {e}")),
        }
    });
    // Wandering vector stream, alternating separating and non-separating.
    let wandering = parallel_trials(trials, |trial| -> Result<f64, String> {
        let (m, a_t) = trial_algebra(a, seed, trial + trials);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0xfad);
        let f = random_wandering_vector(&a_t, &mut rng, trial % 2 == 0);
        if m.norm2(&f) < 1e-9 {
            return Ok(0.0);
        }
        let fact = partial_bn_factorize(&f, &a_t).map_err(|e| format!("trial {trial}: {e}"))?;
        let (u, h) = &fact.pairs[0];
        let e = &u.adjoint() * u;
        let full = m.norm2(&(&e - &m.identity())) <= RESIDUAL_BOUND;
        if full != (fact.kind == FactorizationKind::Unitary) {
            return Err(format!("trial {trial}: kind does not match the support"));
        }
        Ok(m.norm2(&(&f - &(u * h))))
    });

    let errors: Vec<&String> = positive.iter().filter_map(|o| o.as_ref().err()).collect();
    let outer_failures = positive
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .filter(|(_, _, outer)| !outer)
        .count();
    let worst_rec = positive
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|(r, _, _)| *r)
        .fold(0.0, f64::max);
    let worst_unitary = positive
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .map(|(_, u, _)| *u)
        .fold(0.0, f64::max);
    if errors.is_empty() && outer_failures == 0 {
        rep.bounded(
            "factorization-positive",
            &format!("{trials} positive definite invertible elements factor as unitary times outer"),
            worst_rec,
            RESIDUAL_BOUND,
        );
        rep.bounded(
            "factorization-unitary",
            "inner factors are unitary",
            worst_unitary,
            UNITARY_BOUND,
        );
    } else {
        rep.fail(
            "factorization-positive",
            "positive definite invertible elements factor as unitary times outer",
            None,
            json!({ "errors": errors, "outer_failures": outer_failures }),
        );
    }
    let partial_errors: Vec<&String> = wandering.iter().filter_map(|o| o.as_ref().err()).collect();
    let partial_rec = wandering
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .fold(0.0f64, |acc, &v| acc.max(v));
    if partial_errors.is_empty() {
        rep.bounded(
            "factorization-wandering",
            &format!("{trials} wandering vectors admit partial factorizations"),
            partial_rec,
            RESIDUAL_BOUND,
        );
    } else {
        rep.fail(
            "factorization-wandering",
            "wandering vectors admit partial factorizations",
            None,
            json!({ "errors": partial_errors }),
        );
    }
}

pub fn standard_suite(a: &TracialSubalgebra, seed: u64, trials: usize, rep: &mut ReportBuilder) {
    let outcomes = parallel_trials(trials, |trial| -> Result<f64, String> {
        let (m, a_t) = trial_algebra(a, seed, trial);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0x57d);
        let w = random_unitary(&m, &mut rng);
        let gens: Vec<AlgebraElement> = a_t.a_basis().iter().map(|x| &w * x).collect();
        let k = Subspace::from_generators(&m, &gens).map_err(|e| format!("trial {trial}: {e}"))?;
        let dec = type_decomposition(&k, &a_t).map_err(|e| format!("trial {trial}: {e}"))?;
        let u = standard_generator(&dec, &a_t)
            .ok_or_else(|| format!("trial {trial}: no unitary generator found"))?;
        let ua: Vec<AlgebraElement> = a_t.a_basis().iter().map(|x| &u * x).collect();
        let span_ua =
            Subspace::from_generators(&m, &ua).map_err(|e| format!("trial {trial}: {e}"))?;
        Ok(span_ua.distance_to(&k))
    });
    let errors: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    let worst = outcomes
        .iter()
        .filter_map(|o| o.as_ref().ok())
        .fold(0.0f64, |acc, &v| acc.max(v));

    // The corner subspace span{e11, e12} of the 2x2 upper triangular algebra
    // has no unitary generator.
    let m2 = FinVNAlgebra::full_matrix(2).expect("2x2 state");
    let ut = subdiag::tracial::build_nest_subalgebra(&m2, &subdiag::NestSpec::finest(&m2))
        .expect("upper triangular algebra");
    let corner = Subspace::from_generators(&m2, &[m2.matrix_unit(0, 0, 0), m2.matrix_unit(0, 0, 1)])
        .expect("corner generators conform");
    let negative_ok = match type_decomposition(&corner, &ut) {
        Ok(dec) => standard_generator(&dec, &ut).is_none(),
        Err(_) => false,
    };
    if errors.is_empty() {
        rep.bounded(
            "standard-recovery",
            &format!("{trials} rotated algebras recover a unitary generator"),
            worst,
            RESIDUAL_BOUND,
        );
    } else {
        rep.fail(
            "standard-recovery",
            "rotated algebras recover a unitary generator",
            None,
            json!({ "errors": errors }),
        );
    }
    if negative_ok {
        rep.pass(
            "standard-negative",
            "the corner subspace has no unitary generator",
            None,
        );
    } else {
        rep.fail(
            "standard-negative",
            "the corner subspace has no unitary generator",
            None,
            json!({}),
        );
    }
}

pub fn trace_separation_suite(
    m_instance: &FinVNAlgebra,
    seed: u64,
    trials: usize,
    rep: &mut ReportBuilder,
) {
    let outcomes = parallel_trials(trials, |trial| -> (bool, bool, Vec<String>) {
        let mut errors = Vec::new();
        let mut rng = rng_from(seed ^ 0x15e7 ^ (0x9e3779b97f4a7c15u64.wrapping_mul(trial as u64)));
        let m = if trial == 0 {
            m_instance.clone()
        } else {
            random_nest_instance(&mut rng, SUITE_MAX_BLOCKS, SUITE_MAX_DIM).0
        };
        let e = random_projection(&m, &mut rng);
        let v = match trial % 3 {
            0 => e.scale_re(1.5 + rng.random::<f64>()),
            1 => {
                let g = gaussian_element(&m, &mut rng);
                let bump = (&g.adjoint() * &g).scale_re(0.1);
                &e + &bump
            }
            _ => {
                let g = gaussian_element(&m, &mut rng);
                &g.adjoint() * &g
            }
        };
        let gap = m.op_norm(&(&v - &e));
        if gap <= SEPARATION_GAP {
            return (false, false, errors);
        }
        let p = 1.0 + 3.0 * rng.random::<f64>();
        let missed = match trace_power_witness(&m, &v, &e, p, 32) {
            Ok(Some(_)) => false,
            Ok(None) => true,
            Err(e) => {
                errors.push(format!("trial {trial}: {e}"));
                false
            }
        };
        let spurious = match trace_power_witness(&m, &e, &e, p, 8) {
            Ok(None) => false,
            Ok(Some(_)) => true,
            Err(e) => {
                errors.push(format!("trial {trial} equality probe: {e}"));
                false
            }
        };
        (missed, spurious, errors)
    });
    let missed = outcomes.iter().filter(|(m, _, _)| *m).count();
    let spurious = outcomes.iter().filter(|(_, s, _)| *s).count();
    let errors: Vec<&String> = outcomes.iter().flat_map(|(_, _, e)| e.iter()).collect();
    if missed == 0 && spurious == 0 && errors.is_empty() {
        rep.pass(
            "trace-separation",
            &format!("traced powers separate every pair with gap above {SEPARATION_GAP:.0e} and never split equal pairs"),
            None,
        );
    } else {
        rep.fail(
            "trace-separation",
            "traced powers separate distinct pairs and never split equal pairs",
            None,
            json!({ "missed": missed, "spurious": spurious, "errors": errors }),
        );
    }
}

pub fn negative_control_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    rep: &mut ReportBuilder,
) {
    let m = a.ambient();
    if a.is_maximal_subdiagonal() {
        rep.fail(
            "negative-control",
            "instance subalgebra must not be maximal subdiagonal",
            None,
            json!({ "hint": "use a generator instance such as span{1, e12}" }),
        );
        return;
    }
    // Witness for the failure of the unique extension property.
    match a.unique_extension_witness(64) {
        Some(g) => rep.pass(
            "extension-witness",
            &format!(
                "found positive witness annihilating A0 at distance {:.3e} from the diagonal",
                a.d_span().residual_of(&g)
            ),
            None,
        ),
        None => rep.fail(
            "extension-witness",
            "a non-subdiagonal algebra admits an extension witness",
            None,
            json!({}),
        ),
    }
    // Invariant subspace whose wandering Gram products leave the diagonal.
    let mut rng = rng_from(seed ^ 0xbad);
    let d_span = a.d_span();
    let mut candidates: Vec<Vec<AlgebraElement>> = Vec::new();
    for k in 0..m.num_blocks() {
        let dim = m.blocks()[k].dim;
        for i in 0..dim {
            for j in 0..dim {
                candidates.push(vec![m.matrix_unit(k, i, j)]);
            }
        }
    }
    for _ in 0..trials {
        candidates.push(vec![gaussian_element(m, &mut rng)]);
    }
    for gens in candidates {
        let hull_gens: Vec<AlgebraElement> = gens
            .iter()
            .flat_map(|g| a.a_basis().iter().map(move |x| g * x))
            .collect();
        let Ok(hull) = Subspace::from_generators(m, &hull_gens) else {
            continue;
        };
        let Ok(wd) = wandering_subspace(&hull, a) else {
            continue;
        };
        let mut worst: f64 = 0.0;
        let mut witness_pair: Option<(usize, usize)> = None;
        for (i, w1) in wd.w.basis().iter().enumerate() {
            for (j, w2) in wd.w.basis().iter().enumerate() {
                let r = d_span.residual_of(&(&w1.adjoint() * w2));
                if r > worst {
                    worst = r;
                    witness_pair = Some((i, j));
                }
            }
        }
        if worst > 0.1 {
            let (i, j) = witness_pair.expect("violation has a witness pair");
            rep.pass(
                "gram-violation",
                &format!(
                    "invariant subspace with wandering gram product {:.3} outside the diagonal (pair {i},{j})",
                    worst
                ),
                Some(worst),
            );
            return;
        }
    }
    rep.fail(
        "gram-violation",
        "a non-subdiagonal algebra exhibits a wandering gram violation",
        None,
        json!({}),
    );
}

pub fn purity_suite(a: &TracialSubalgebra, seed: u64, trials: usize, rep: &mut ReportBuilder) {
    let outcomes = parallel_trials(trials, |trial| -> Result<bool, String> {
        let k = random_invariant_subspace(a, seed.wrapping_add(trial as u64) ^ 0x9);
        type_decomposition(&k, a)
            .map(|dec| dec.z.dim() > 0)
            .map_err(|e| format!("trial {trial}: {e}"))
    });
    let impure = outcomes.iter().filter(|o| matches!(o, Ok(true))).count();
    let errors: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    if impure == 0 && errors.is_empty() {
        rep.pass(
            "upper-triangular-purity",
            &format!("{trials} random invariant subspaces all have trivial type 2 part"),
            None,
        );
    } else {
        rep.fail(
            "upper-triangular-purity",
            "random invariant subspaces have trivial type 2 part",
            None,
            json!({ "impure": impure, "errors": errors }),
        );
    }
}

pub fn hull_orthogonality_suite(
    a: &TracialSubalgebra,
    seed: u64,
    trials: usize,
    rep: &mut ReportBuilder,
) {
    let structured = (trials / 4).max(1);
    let outcomes = parallel_trials(trials, |trial| -> (bool, bool) {
        let (m, a_t) = trial_algebra(a, seed, trial);
        let mut rng = rng_from(seed.wrapping_add(trial as u64) ^ 0x40);
        let constructed_zero = trial % 4 == 0 && trial / 4 < structured;
        let (f, g) = if constructed_zero {
            // Complementary left projections force f* g = 0.
            let p = random_projection(&m, &mut rng);
            let x = gaussian_element(&m, &mut rng);
            let y = gaussian_element(&m, &mut rng);
            (&p * &x, &(&m.identity() - &p) * &y)
        } else {
            (gaussian_element(&m, &mut rng), gaussian_element(&m, &mut rng))
        };
        let product_zero = m.norm2(&(&f.adjoint() * &g)) <= CONTRACTION_SLACK;
        // Brute-force oracle: every pair of basis translates is orthogonal.
        let mut orthogonal = true;
        'sweep: for x in a_t.a_basis() {
            for y in a_t.a_basis() {
                if m.inner(&(&g * y), &(&f * x)).norm() > CONTRACTION_SLACK {
                    orthogonal = false;
                    break 'sweep;
                }
            }
        }
        // Subspace route: hulls built and compared basis against basis.
        let hull_f = invariant_hull(&f, &a_t).expect("element conforms");
        let hull_g = invariant_hull(&g, &a_t).expect("element conforms");
        let mut hull_orthogonal = true;
        'hulls: for x in hull_f.basis() {
            for y in hull_g.basis() {
                if m.inner(x, y).norm() > CONTRACTION_SLACK {
                    hull_orthogonal = false;
                    break 'hulls;
                }
            }
        }
        let agrees = product_zero == orthogonal && orthogonal == hull_orthogonal;
        (agrees, constructed_zero)
    });
    let disagreements = outcomes.iter().filter(|(ok, _)| !ok).count();
    let zero_pairs = outcomes.iter().filter(|(_, z)| *z).count();
    if disagreements == 0 {
        rep.pass(
            "hull-orthogonality",
            &format!(
                "zero star-products match orthogonal hulls on {trials} pairs ({zero_pairs} constructed zero-product pairs)"
            ),
            None,
        );
    } else {
        rep.fail(
            "hull-orthogonality",
            "zero star-products match orthogonal hulls",
            None,
            json!({ "disagreements": disagreements }),
        );
    }
}

/// Serializes an element for witness payloads.
pub fn element_json(x: &AlgebraElement) -> serde_json::Value {
    serde_json::to_value(MatrixData::from_element(x)).unwrap_or(serde_json::Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{AlgebraSpec, BlockSpec, SubalgebraSpec};

    fn m2_instance() -> InstanceSpec {
        InstanceSpec {
            algebra: AlgebraSpec {
                blocks: vec![BlockSpec { dim: 2, weight: 0.5 }],
            },
            subalgebra: SubalgebraSpec::Nest(vec![vec![1, 1]]),
            subspaces: Default::default(),
            elements: Default::default(),
            seed: 1,
            tolerance: 1e-9,
        }
    }

    #[test]
    fn empty_suite_list_yields_an_empty_passing_report() {
        let report = run_suites(&m2_instance(), &[], &SuiteConfig::default()).unwrap();
        assert!(report.all_passed());
        assert_eq!(report.summary.total, 0);
    }

    #[test]
    fn suite_names_round_trip() {
        for name in SuiteName::ALL {
            assert_eq!(SuiteName::from_str(name.as_str()).unwrap(), name);
        }
        assert!(matches!(
            SuiteName::from_str("bogus"),
            Err(HarnessError::UnknownSuite(_))
        ));
    }

    #[test]
    fn small_suite_run_passes() {
        let cfg = SuiteConfig {
            trials: Some(3),
            p_grid: None,
            seed: Some(5),
        };
        let report = run_suites(
            &m2_instance(),
            &[SuiteName::Decomposition, SuiteName::Theta],
            &cfg,
        )
        .unwrap();
        assert!(report.all_passed(), "{}", report.render_text());
    }

    #[test]
    fn parallel_trials_preserve_order() {
        let out = parallel_trials(37, |i| i * i);
        assert_eq!(out, (0..37).map(|i| i * i).collect::<Vec<_>>());
    }
}
