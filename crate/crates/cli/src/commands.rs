//! The command verbs behind the CLI: decomposition, factorization and
//! subdiagonality diagnostics over a parsed instance.

use rand::Rng;
use serde_json::json;

use subdiag::beurling::{classify_type, standard_generator, type_decomposition, TypeLabel};
use subdiag::factorization::{bn_factorize, inner_outer_sum, is_outer, partial_bn_factorize};
use subdiag::{Error as CoreError, Subspace};

use crate::random::{gaussian_element, random_nest_instance, rng_from};
use crate::report::{Report, ReportBuilder};
use crate::spec::{
    AlgebraSpec, BlockSpec, BuiltInstance, InstanceSpec, MatrixData, SubalgebraSpec,
};
use crate::suites::element_json;
use crate::HarnessError;

fn build_or_report(spec: &InstanceSpec, rep: &mut ReportBuilder) -> Result<Option<BuiltInstance>, HarnessError> {
    match spec.build() {
        Ok(b) => Ok(Some(b)),
        Err(HarnessError::Core(CoreError::NotTracial { residual, witness })) => {
            rep.fail(
                "tracial",
                "the expectation is multiplicative on the generated algebra",
                Some(residual),
                json!({
                    "a": element_json(&witness.0),
                    "b": element_json(&witness.1),
                }),
            );
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs the type decomposition on the named subspace (or all of them).
pub fn decompose(spec: &InstanceSpec, name: Option<&str>) -> Result<Report, HarnessError> {
    let mut rep = ReportBuilder::new();
    let Some(built) = build_or_report(spec, &mut rep)? else {
        return Ok(rep.finish());
    };
    let selected: Vec<(&String, &Subspace)> = match name {
        Some(n) => vec![built
            .subspaces
            .get_key_value(n)
            .ok_or_else(|| HarnessError::UnknownName(n.to_string()))?],
        None => built.subspaces.iter().collect(),
    };
    if selected.is_empty() {
        return Err(HarnessError::Invalid(
            "instance defines no subspaces to decompose".into(),
        ));
    }
    for (name, k) in selected {
        match type_decomposition(k, &built.subalgebra) {
            Ok(dec) => {
                let label = classify_type(k, &built.subalgebra)?;
                let standard = standard_generator(&dec, &built.subalgebra);
                rep.pass(
                    &format!("decompose:{name}"),
                    &format!(
                        "{:?}: dim K = {}, dim Z = {}, dim K1 = {}, dim W = {}, {} isometries{}",
                        label,
                        dec.k.dim(),
                        dec.z.dim(),
                        dec.k1.dim(),
                        dec.wandering.w.dim(),
                        dec.isometries.len(),
                        if standard.is_some() {
                            ", unitary generator found"
                        } else {
                            ""
                        }
                    ),
                    None,
                );
                if label == TypeLabel::Type1 && dec.z.dim() != 0 {
                    rep.fail(
                        &format!("decompose:{name}:consistency"),
                        "type 1 label implies trivial type 2 part",
                        None,
                        json!({ "dim_z": dec.z.dim() }),
                    );
                }
            }
            Err(e) => rep.fail(
                &format!("decompose:{name}"),
                "subspace admits a type decomposition",
                None,
                json!({ "error": e.to_string() }),
            ),
        }
    }
    Ok(rep.finish())
}

/// Factors the named element (or all of them): the unitary route first, then
/// the partial route, then the column sum.
pub fn factorize(spec: &InstanceSpec, name: Option<&str>) -> Result<Report, HarnessError> {
    let mut rep = ReportBuilder::new();
    let Some(built) = build_or_report(spec, &mut rep)? else {
        return Ok(rep.finish());
    };
    let selected: Vec<(&String, &subdiag::AlgebraElement)> = match name {
        Some(n) => vec![built
            .elements
            .get_key_value(n)
            .ok_or_else(|| HarnessError::UnknownName(n.to_string()))?],
        None => built.elements.iter().collect(),
    };
    if selected.is_empty() {
        return Err(HarnessError::Invalid(
            "instance defines no elements to factor".into(),
        ));
    }
    let m = &built.algebra;
    let a = &built.subalgebra;
    for (name, f) in selected {
        let fact = match bn_factorize(f, a) {
            Ok(Some(fact)) => Some(fact),
            Ok(None) => match partial_bn_factorize(f, a) {
                Ok(fact) => Some(fact),
                Err(CoreError::Precondition(_)) => inner_outer_sum(f, a)?,
                Err(e) => return Err(e.into()),
            },
            Err(e) => return Err(e.into()),
        };
        match fact {
            Some(fact) => {
                let residual = m.norm2(&(f - &fact.reconstruct(m)));
                let outer_note = match fact.kind {
                    subdiag::FactorizationKind::Unitary => {
                        if is_outer(&fact.pairs[0].1, a) {
                            ", outer factor verified"
                        } else {
                            ", OUTER CHECK FAILED"
                        }
                    }
                    _ => "",
                };
                rep.bounded(
                    &format!("factorize:{name}"),
                    &format!(
                        "{:?} factorization with {} pair(s){}",
                        fact.kind,
                        fact.pairs.len(),
                        outer_note
                    ),
                    residual,
                    crate::suites::RESIDUAL_BOUND,
                );
            }
            None => rep.pass(
                &format!("factorize:{name}"),
                "no inner-outer factorization exists (hull is not type 1 and no unitary generator)",
                None,
            ),
        }
    }
    Ok(rep.finish())
}

/// Diagnostics of the instance subalgebra: dimensions, maximal
/// subdiagonality and the extension-property witness search.
pub fn check_subdiagonal(spec: &InstanceSpec, attempts: usize) -> Result<Report, HarnessError> {
    let mut rep = ReportBuilder::new();
    let Some(built) = build_or_report(spec, &mut rep)? else {
        return Ok(rep.finish());
    };
    let a = &built.subalgebra;
    rep.pass(
        "dimensions",
        &format!(
            "dim M = {}, dim A = {}, dim D = {}, dim A0 = {}",
            built.algebra.space_dim(),
            a.dim_a(),
            a.dim_d(),
            a.dim_a0()
        ),
        None,
    );
    rep.pass(
        "maximal-subdiagonal",
        &format!("{}", a.is_maximal_subdiagonal()),
        None,
    );
    match a.unique_extension_witness(attempts) {
        Some(g) => rep.fail(
            "unique-extension",
            "a positive witness annihilating A0 lies outside the diagonal",
            Some(a.d_span().residual_of(&g)),
            element_json(&g),
        ),
        None => rep.pass(
            "unique-extension",
            "no positive annihilator of A0 leaves the diagonal",
            None,
        ),
    }
    Ok(rep.finish())
}

/// Emits a seeded random instance: a random nest algebra with a couple of
/// named elements and module generators.
pub fn generate(seed: u64, max_blocks: usize, max_dim: usize) -> InstanceSpec {
    let mut rng = rng_from(seed);
    let (m, a) = random_nest_instance(&mut rng, max_blocks.max(1), max_dim.max(1));
    let atoms = nest_atoms_of(&a);
    let mut subspaces = std::collections::BTreeMap::new();
    // The subspace is stored through the basis of the right module generated
    // by a few Gaussian elements, so the file describes an invariant
    // subspace directly.
    let count = rng.random_range(1..=2);
    let gens: Vec<subdiag::AlgebraElement> =
        (0..count).map(|_| gaussian_element(&m, &mut rng)).collect();
    let seed_span = subdiag::Subspace::from_generators(&m, &gens).expect("gaussians conform");
    let module = subdiag::subspace::right_module_span(&seed_span, a.a_basis());
    subspaces.insert(
        "module".to_string(),
        module.basis().iter().map(MatrixData::from_element).collect(),
    );
    let mut elements = std::collections::BTreeMap::new();
    elements.insert(
        "gaussian".to_string(),
        MatrixData::from_element(&gaussian_element(&m, &mut rng)),
    );
    elements.insert(
        "positive".to_string(),
        MatrixData::from_element(&crate::random::random_positive_definite(&m, &mut rng)),
    );
    elements.insert(
        "identity".to_string(),
        MatrixData::from_element(&m.identity()),
    );
    InstanceSpec {
        algebra: AlgebraSpec {
            blocks: m
                .blocks()
                .iter()
                .map(|b| BlockSpec {
                    dim: b.dim,
                    weight: b.weight,
                })
                .collect(),
        },
        subalgebra: SubalgebraSpec::Nest(atoms),
        subspaces,
        elements,
        seed,
        tolerance: m.tolerance(),
    }
}

/// Reads the nest atom sizes off a nest-built subalgebra by scanning which
/// matrix units belong to the diagonal.
fn nest_atoms_of(a: &subdiag::TracialSubalgebra) -> Vec<Vec<usize>> {
    let m = a.ambient();
    let d = a.d_span();
    let mut atoms = Vec::new();
    for (k, b) in m.blocks().iter().enumerate() {
        let mut sizes = Vec::new();
        let mut start = 0;
        while start < b.dim {
            let mut len = 1;
            while start + len < b.dim && d.contains(&m.matrix_unit(k, start, start + len)) {
                len += 1;
            }
            sizes.push(len);
            start += len;
        }
        atoms.push(sizes);
    }
    atoms
}
