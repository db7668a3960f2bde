//! The criterion engine. Matches a system against each attractivity and
//! extinction test, in sharpness order, and reports the first one that
//! fires together with the matrix certificates backing it. Criteria are
//! sufficient, not necessary, so a `None` verdict carries every failed
//! certificate rather than claiming instability.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibria::{
    dissipativity_bound, planar_equilibria, saturated_equilibrium, EquilibriumError,
    PlanarEquilibria, SaturatedEquilibrium,
};
use crate::matrix::{
    build_matrices, is_m_matrix, is_nonsingular_m_matrix, is_p_matrix, ClassCertificate,
    CommunityMatrices, MatrixClassError,
};
use crate::model::SystemSpec;

/// Slack used when classifying strict inequalities on computed quantities
/// (interior-existence tests and the planar case conditions). Boundary
/// cases, which the fixtures hit exactly, collapse onto the non-strict
/// side.
pub const CASE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("control gains mix zero and positive entries; disable all or none")]
    MixedControls,
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Class(#[from] MatrixClassError),
}

/// Which sufficient condition certified the verdict. The serialized names
/// are a stable output vocabulary; consumers match on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionTag {
    #[serde(rename = "Thm4.1-total-extinction")]
    TotalExtinction,
    #[serde(rename = "Thm4.4-predator-prey")]
    PredatorPreyExtinction,
    #[serde(rename = "Thm4.3-partial-sharp")]
    PartialExtinctionSharp,
    #[serde(rename = "Thm4.2-partial")]
    PartialExtinction,
    #[serde(rename = "Thm3.2")]
    GlobalAttractivity,
    #[serde(rename = "Cor4.2-uncontrolled")]
    Uncontrolled,
    #[serde(rename = "Thm3.4-coop-positive")]
    CooperativePositive,
    #[serde(rename = "Thm3.3-dissipative")]
    Dissipative,
    #[serde(rename = "None")]
    None,
}

impl CriterionTag {
    pub fn label(&self) -> &'static str {
        match self {
            CriterionTag::TotalExtinction => "Thm4.1-total-extinction",
            CriterionTag::PredatorPreyExtinction => "Thm4.4-predator-prey",
            CriterionTag::PartialExtinctionSharp => "Thm4.3-partial-sharp",
            CriterionTag::PartialExtinction => "Thm4.2-partial",
            CriterionTag::GlobalAttractivity => "Thm3.2",
            CriterionTag::Uncontrolled => "Cor4.2-uncontrolled",
            CriterionTag::CooperativePositive => "Thm3.4-coop-positive",
            CriterionTag::Dissipative => "Thm3.3-dissipative",
            CriterionTag::None => "None",
        }
    }
}

/// What the fired criterion promises about long-run behaviour.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prediction {
    /// Every admissible solution converges to the saturated equilibrium.
    /// `gas` additionally records asymptotic stability (interior case).
    GlobalAttractor {
        attractor: SaturatedEquilibrium,
        gas: bool,
    },
    /// Solutions are ultimately confined below the comparison equilibrium,
    /// but no attractor is certified.
    DissipativeOnly { bound: SaturatedEquilibrium },
    /// No test applied; the system may still converge or oscillate.
    Inconclusive,
}

/// A class certificate together with the matrix it talks about.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedCertificate {
    pub matrix: String,
    pub certificate: ClassCertificate,
}

fn named(matrix: &str, certificate: ClassCertificate) -> NamedCertificate {
    NamedCertificate {
        matrix: matrix.to_string(),
        certificate,
    }
}

/// Support-first species ordering behind a partial-extinction test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDecomposition {
    /// Number of surviving species.
    pub p: usize,
    /// `permutation[k]` is the original index placed at position `k`:
    /// support ascending, then the extinct complement ascending.
    pub permutation: Vec<usize>,
}

/// One consulted criterion: whether its preconditions held, whether its
/// matrix test passed, and the certificates produced along the way.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionEvaluation {
    pub tag: CriterionTag,
    pub applicable: bool,
    pub fired: bool,
    pub note: String,
    pub certificates: Vec<NamedCertificate>,
}

/// One planar sufficient condition normalized to `value >= 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub label: String,
    pub value: f64,
    pub holds: bool,
}

fn cond(label: &str, value: f64) -> ConditionCheck {
    ConditionCheck {
        label: label.to_string(),
        value,
        holds: value >= -CASE_TOL,
    }
}

/// Exhaustive two-species classification by the signs of the growth rates
/// and the interior-existence inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanarCaseTag {
    /// Both growth rates non-positive: the origin is saturated.
    #[serde(rename = "Prop5.1-i")]
    ZeroSaturated,
    /// Both interior-existence inequalities strict: a positive equilibrium.
    #[serde(rename = "Prop5.1-ii")]
    InteriorExists,
    /// Both growth rates positive but one existence inequality fails: a
    /// single-species boundary state is saturated.
    #[serde(rename = "Prop5.1-iii")]
    BoundarySaturated,
    /// One growth rate non-positive and the cross-interaction on the
    /// doomed species non-negative.
    #[serde(rename = "Prop5.1-iv(a)")]
    BoundaryMixedSigns,
    /// Predator-prey signs without an interior equilibrium.
    #[serde(rename = "Prop5.1-iv(b)")]
    BoundaryPredatorPrey,
}

impl PlanarCaseTag {
    pub fn label(&self) -> &'static str {
        match self {
            PlanarCaseTag::ZeroSaturated => "Prop5.1-i",
            PlanarCaseTag::InteriorExists => "Prop5.1-ii",
            PlanarCaseTag::BoundarySaturated => "Prop5.1-iii",
            PlanarCaseTag::BoundaryMixedSigns => "Prop5.1-iv(a)",
            PlanarCaseTag::BoundaryPredatorPrey => "Prop5.1-iv(b)",
        }
    }
}

/// Planar case classification with its sufficient conditions evaluated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarCaseReport {
    pub case: PlanarCaseTag,
    /// The mirrored variant swaps the species roles (species 2 survives).
    pub mirrored: bool,
    /// All conditions hold, so the saturated member is certified globally
    /// attractive by the planar analysis alone.
    pub conditions_hold: bool,
    pub conditions: Vec<ConditionCheck>,
}

/// Closed-form equilibrium inventory plus case classification, attached to
/// verdicts on two-species systems. Unsaturated boundary members of the
/// inventory are unstable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarReport {
    pub equilibria: PlanarEquilibria,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<PlanarCaseReport>,
}

/// The analysis outcome: the sharpest criterion that fired, its prediction
/// and certificates, and the full trail of everything consulted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: CriterionTag,
    pub prediction: Prediction,
    /// Certificates cited by the firing criterion.
    pub certificates: Vec<NamedCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockDecomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar: Option<PlanarReport>,
    /// A decaying disturbance is present and the fired criterion tolerates
    /// it, so the attractor claim carries over to the perturbed system.
    pub perturbation_extends: bool,
    /// Every criterion consulted, in dispatch order.
    pub evaluations: Vec<CriterionEvaluation>,
}

impl Verdict {
    pub fn attractor(&self) -> Option<&SaturatedEquilibrium> {
        match &self.prediction {
            Prediction::GlobalAttractor { attractor, .. } => Some(attractor),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct Analysis {
    controlled: bool,
    mats: CommunityMatrices,
    gate: NamedCertificate,
    eq: SaturatedEquilibrium,
    support: Vec<usize>,
    rest: Vec<usize>,
}

impl Analysis {
    fn n(&self) -> usize {
        self.eq.x.len()
    }

    fn p(&self) -> usize {
        self.support.len()
    }

    fn is_partial(&self) -> bool {
        self.p() >= 1 && self.p() < self.n()
    }

    fn permutation(&self) -> Vec<usize> {
        self.support.iter().chain(self.rest.iter()).cloned().collect()
    }
}

fn prepare(spec: &SystemSpec) -> Result<Analysis, CriteriaError> {
    if !spec.is_controlled() && !spec.is_uncontrolled() {
        return Err(CriteriaError::MixedControls);
    }
    let controlled = spec.is_controlled();
    let mats = build_matrices(spec);
    let (gate_name, gate_matrix) = if controlled {
        ("m", &mats.m)
    } else {
        ("m0", &mats.m0)
    };
    let certificate = is_p_matrix(gate_matrix)?;
    if !certificate.verdict {
        return Err(EquilibriumError::NotPMatrix.into());
    }
    let eq = saturated_equilibrium(gate_matrix, &spec.b, &spec.d, &spec.e)?;
    let support = eq.support.clone();
    let rest: Vec<usize> = (0..spec.n()).filter(|i| !support.contains(i)).collect();
    Ok(Analysis {
        controlled,
        mats,
        gate: named(gate_name, certificate),
        eq,
        support,
        rest,
    })
}

/// Partitioned extinction-test matrix for a given support, species ordered
/// support-first. The support block is `diag(mu_i - alpha_i) - |A_11|`
/// (`alpha` dropped when `use_alpha` is false), the complement block is
/// `diag(mu_i) - A_22^-` and the upper-right block is `-|A_12|`. With
/// `sharp`, lower-left rows whose effective growth `b_i + sum_j a_ij^-
/// x_j^*` is non-positive use `-a_ij^-` instead of `-|a_ij|`.
pub fn extinction_test_matrix(
    spec: &SystemSpec,
    mats: &CommunityMatrices,
    x_star: &[f64],
    support: &[usize],
    use_alpha: bool,
    sharp: bool,
) -> DMatrix<f64> {
    let n = spec.n();
    let p = support.len();
    let rest: Vec<usize> = (0..n).filter(|i| !support.contains(i)).collect();
    let order: Vec<usize> = support.iter().chain(rest.iter()).cloned().collect();
    let soft_row: Vec<bool> = rest
        .iter()
        .map(|&i| {
            let growth: f64 = spec.b[i]
                + support.iter().map(|&j| mats.a_minus[(i, j)] * x_star[j]).sum::<f64>();
            growth <= 0.0
        })
        .collect();
    DMatrix::from_fn(n, n, |k, l| {
        let (i, j) = (order[k], order[l]);
        match (k < p, l < p) {
            (true, true) => {
                let interaction = -mats.abs_a[(i, j)];
                if k == l {
                    spec.mu[i] - if use_alpha { mats.alpha[i] } else { 0.0 } + interaction
                } else {
                    interaction
                }
            }
            (true, false) => -mats.abs_a[(i, j)],
            (false, true) => {
                if sharp && soft_row[k - p] {
                    -mats.a_minus[(i, j)]
                } else {
                    -mats.abs_a[(i, j)]
                }
            }
            (false, false) => {
                let interaction = -mats.a_minus[(i, j)];
                if k == l {
                    spec.mu[i] + interaction
                } else {
                    interaction
                }
            }
        }
    })
}

fn skip(tag: CriterionTag, note: &str) -> CriterionEvaluation {
    CriterionEvaluation {
        tag,
        applicable: false,
        fired: false,
        note: note.to_string(),
        certificates: Vec::new(),
    }
}

fn sign_blocks_ok(spec: &SystemSpec, an: &Analysis) -> (bool, bool) {
    let upper_nonneg = an
        .support
        .iter()
        .all(|&i| an.rest.iter().all(|&j| spec.a[i][j] >= 0.0));
    let lower_nonpos = an
        .rest
        .iter()
        .all(|&i| an.support.iter().all(|&j| spec.a[i][j] <= 0.0));
    (upper_nonneg, lower_nonpos)
}

// ---------------------------------------------------------------------------
// Individual criterion evaluations
// ---------------------------------------------------------------------------

fn eval_total_extinction(an: &Analysis) -> Result<CriterionEvaluation, CriteriaError> {
    if !an.eq.is_zero() {
        return Ok(skip(
            CriterionTag::TotalExtinction,
            "zero is not saturated: some growth rate is positive",
        ));
    }
    let certificate = is_m_matrix(&an.mats.m0_minus)?;
    let fired = certificate.verdict;
    Ok(CriterionEvaluation {
        tag: CriterionTag::TotalExtinction,
        applicable: true,
        fired,
        note: if fired {
            "zero is saturated and the competitive-part matrix certifies extinction".into()
        } else {
            "zero is saturated but the competitive-part matrix test failed".into()
        },
        certificates: vec![named("m0-minus", certificate)],
    })
}

fn eval_predator_prey(
    spec: &SystemSpec,
    an: &Analysis,
) -> Result<CriterionEvaluation, CriteriaError> {
    if !an.is_partial() {
        return Ok(skip(
            CriterionTag::PredatorPreyExtinction,
            "support is not a proper nonempty subset",
        ));
    }
    let (upper_nonneg, lower_nonpos) = sign_blocks_ok(spec, an);
    if !upper_nonneg || !lower_nonpos {
        return Ok(skip(
            CriterionTag::PredatorPreyExtinction,
            "sign precondition fails: needs A12 >= 0 and A21 <= 0 after reordering",
        ));
    }
    let full = extinction_test_matrix(spec, &an.mats, &an.eq.x, &an.support, an.controlled, false);
    let p = an.p();
    let q = an.n() - p;
    let support_block = full.view((0, 0), (p, p)).into_owned();
    let complement_block = full.view((p, p), (q, q)).into_owned();
    let support_cert = is_m_matrix(&support_block)?;
    let complement_cert = is_m_matrix(&complement_block)?;
    let fired = support_cert.verdict && complement_cert.verdict;
    Ok(CriterionEvaluation {
        tag: CriterionTag::PredatorPreyExtinction,
        applicable: true,
        fired,
        note: if fired {
            "predator-prey signs with both diagonal blocks M-matrices".into()
        } else {
            "predator-prey signs but a diagonal block test failed".into()
        },
        certificates: vec![
            named("support-hat", support_cert),
            named("complement-minus", complement_cert),
        ],
    })
}

fn eval_partial(
    spec: &SystemSpec,
    an: &Analysis,
    sharp: bool,
) -> Result<CriterionEvaluation, CriteriaError> {
    let tag = if sharp {
        CriterionTag::PartialExtinctionSharp
    } else {
        CriterionTag::PartialExtinction
    };
    if !an.is_partial() {
        let reduction = if an.p() == 0 {
            "support is empty: the test matrix coincides with the total-extinction one"
        } else {
            "support is full: the test matrix coincides with the whole-system one"
        };
        return Ok(skip(tag, reduction));
    }
    let matrix = extinction_test_matrix(spec, &an.mats, &an.eq.x, &an.support, an.controlled, sharp);
    let certificate = is_m_matrix(&matrix)?;
    let fired = certificate.verdict;
    let mut note = if fired {
        "partitioned matrix is an M-matrix".to_string()
    } else {
        "partitioned matrix test failed".to_string()
    };
    if sharp {
        let (_, lower_nonpos) = sign_blocks_ok(spec, an);
        let lower_nonneg = an
            .rest
            .iter()
            .all(|&i| an.support.iter().all(|&j| spec.a[i][j] >= 0.0));
        let doomed_nonpositive = an.rest.iter().all(|&i| spec.b[i] <= 0.0);
        if lower_nonneg && doomed_nonpositive {
            note.push_str("; lower block vanishes, so only the diagonal blocks matter");
        }
        let _ = lower_nonpos;
    }
    Ok(CriterionEvaluation {
        tag,
        applicable: true,
        fired,
        note,
        certificates: vec![named(
            if sharp { "partial-hat-sharp" } else { "partial-hat" },
            certificate,
        )],
    })
}

fn eval_global(an: &Analysis) -> Result<CriterionEvaluation, CriteriaError> {
    let certificate = is_m_matrix(&an.mats.m_hat)?;
    let fired = certificate.verdict;
    Ok(CriterionEvaluation {
        tag: CriterionTag::GlobalAttractivity,
        applicable: true,
        fired,
        note: if fired && an.eq.is_interior() {
            "whole-system matrix is an M-matrix; interior attractor is GAS".into()
        } else if fired {
            "whole-system matrix is an M-matrix".into()
        } else {
            "whole-system matrix test failed".into()
        },
        certificates: vec![named("m-hat", certificate)],
    })
}

fn eval_coop_positive(
    spec: &SystemSpec,
    an: &Analysis,
) -> Result<CriterionEvaluation, CriteriaError> {
    let n = spec.n();
    let cooperative =
        (0..n).all(|i| (0..n).all(|j| i == j || spec.a[i][j] <= 0.0));
    let growing = spec.b.iter().all(|&b| b > 0.0);
    if !cooperative || !growing {
        return Ok(skip(
            CriterionTag::CooperativePositive,
            "needs cooperative interactions and positive growth rates",
        ));
    }
    let certificate = is_nonsingular_m_matrix(&an.mats.m)?;
    let fired = certificate.verdict;
    Ok(CriterionEvaluation {
        tag: CriterionTag::CooperativePositive,
        applicable: true,
        fired,
        note: if fired {
            "a unique positive equilibrium exists; attractivity is not implied".into()
        } else {
            "cooperative, but the community matrix is not a nonsingular M-matrix".into()
        },
        certificates: vec![named("m", certificate)],
    })
}

fn eval_dissipative(
    spec: &SystemSpec,
) -> Result<(CriterionEvaluation, Option<SaturatedEquilibrium>), CriteriaError> {
    let report = dissipativity_bound(spec)?;
    let fired = report.dissipative;
    let eval = CriterionEvaluation {
        tag: CriterionTag::Dissipative,
        applicable: true,
        fired,
        note: if fired {
            "solutions are ultimately bounded by the comparison equilibrium".into()
        } else {
            "no uniform ultimate bound certified".into()
        },
        certificates: vec![named("m0-minus", report.certificate)],
    };
    Ok((eval, report.bound))
}

fn eval_uncontrolled(
    spec: &SystemSpec,
    an: &Analysis,
) -> Result<CriterionEvaluation, CriteriaError> {
    if an.p() == 0 {
        return Ok(skip(
            CriterionTag::Uncontrolled,
            "zero is saturated; see the total-extinction test",
        ));
    }
    if an.p() == an.n() {
        let certificate = is_m_matrix(&an.mats.m0_hat)?;
        let fired = certificate.verdict;
        return Ok(CriterionEvaluation {
            tag: CriterionTag::Uncontrolled,
            applicable: true,
            fired,
            note: if fired {
                "interior equilibrium; whole-matrix test passed".into()
            } else {
                "interior equilibrium; whole-matrix test failed".into()
            },
            certificates: vec![named("m0-hat", certificate)],
        });
    }
    let full = extinction_test_matrix(spec, &an.mats, &an.eq.x, &an.support, false, true);
    let certificate = is_nonsingular_m_matrix(&full)?;
    if certificate.verdict {
        return Ok(CriterionEvaluation {
            tag: CriterionTag::Uncontrolled,
            applicable: true,
            fired: true,
            note: "partitioned matrix is a nonsingular M-matrix".into(),
            certificates: vec![named("partial-hat0", certificate)],
        });
    }
    let mut certificates = vec![named("partial-hat0", certificate)];
    let (upper_nonneg, lower_nonpos) = sign_blocks_ok(spec, an);
    if upper_nonneg && lower_nonpos {
        let p = an.p();
        let q = an.n() - p;
        let support_block = full.view((0, 0), (p, p)).into_owned();
        let complement_block = full.view((p, p), (q, q)).into_owned();
        let support_cert = is_nonsingular_m_matrix(&support_block)?;
        let complement_cert = is_nonsingular_m_matrix(&complement_block)?;
        let fired = support_cert.verdict && complement_cert.verdict;
        certificates.push(named("support-hat0", support_cert));
        certificates.push(named("complement-minus", complement_cert));
        return Ok(CriterionEvaluation {
            tag: CriterionTag::Uncontrolled,
            applicable: true,
            fired,
            note: if fired {
                "predator-prey block route: both diagonal blocks nonsingular".into()
            } else {
                "partitioned and block routes both failed".into()
            },
            certificates,
        });
    }
    Ok(CriterionEvaluation {
        tag: CriterionTag::Uncontrolled,
        applicable: true,
        fired: false,
        note: "partitioned matrix test failed".into(),
        certificates,
    })
}

// ---------------------------------------------------------------------------
// Planar case classification
// ---------------------------------------------------------------------------

fn neg_part(v: f64) -> f64 {
    (-v).max(0.0)
}

fn strictly_greater(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + CASE_TOL * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Classify a two-species system by the signs of its growth rates and the
/// interior-existence inequalities, and evaluate the attached sufficient
/// conditions. Assumes the P-condition already holds. Returns `None` for
/// sign patterns outside the classified cases.
pub fn planar_case(spec: &SystemSpec) -> Option<PlanarCaseReport> {
    if spec.n() != 2 {
        return None;
    }
    let (b1, b2) = (spec.b[0], spec.b[1]);
    let a = &spec.a;
    let al = [spec.alpha(0), spec.alpha(1)];
    let mu = [spec.mu[0], spec.mu[1]];
    let lam = [mu[0] + al[0], mu[1] + al[1]];
    // Interior existence: both Cramer numerators strictly positive.
    let ex1 = strictly_greater(b1 * (lam[1] + a[1][1]), a[0][1] * b2);
    let ex2 = strictly_greater(b2 * (lam[0] + a[0][0]), a[1][0] * b1);

    let report = |case, mirrored, conditions: Vec<ConditionCheck>| {
        let conditions_hold = conditions.iter().all(|c| c.holds);
        Some(PlanarCaseReport {
            case,
            mirrored,
            conditions_hold,
            conditions,
        })
    };

    if b1 <= 0.0 && b2 <= 0.0 {
        let g1 = mu[0] - neg_part(a[0][0]);
        let g2 = mu[1] - neg_part(a[1][1]);
        return report(
            PlanarCaseTag::ZeroSaturated,
            false,
            vec![
                cond("mu1 - a11^-", g1),
                cond("mu2 - a22^-", g2),
                cond(
                    "(mu1 - a11^-)(mu2 - a22^-) - a12^- a21^-",
                    g1 * g2 - neg_part(a[0][1]) * neg_part(a[1][0]),
                ),
            ],
        );
    }
    if ex1 && ex2 {
        let g1 = mu[0] - a[0][0].abs() - al[0];
        let g2 = mu[1] - a[1][1].abs() - al[1];
        return report(
            PlanarCaseTag::InteriorExists,
            false,
            vec![
                cond("mu1 - |a11| - alpha1", g1),
                cond("mu2 - |a22| - alpha2", g2),
                cond(
                    "(mu1 - |a11| - alpha1)(mu2 - |a22| - alpha2) - |a12 a21|",
                    g1 * g2 - (a[0][1] * a[1][0]).abs(),
                ),
            ],
        );
    }
    if b1 > 0.0 && b2 > 0.0 {
        // Exactly one existence inequality failed (the P-condition rules
        // out both failing); the survivor is the species whose inequality
        // held.
        if !ex2 {
            let g1 = mu[0] - a[0][0].abs() - al[0];
            let g2 = mu[1] - neg_part(a[1][1]);
            return report(
                PlanarCaseTag::BoundarySaturated,
                false,
                vec![
                    cond("mu1 - |a11| - alpha1", g1),
                    cond("mu2 - a22^-", g2),
                    cond(
                        "(mu1 - |a11| - alpha1)(mu2 - a22^-) - |a12| a21",
                        g1 * g2 - a[0][1].abs() * a[1][0],
                    ),
                ],
            );
        }
        let g2 = mu[1] - a[1][1].abs() - al[1];
        let g1 = mu[0] - neg_part(a[0][0]);
        return report(
            PlanarCaseTag::BoundarySaturated,
            true,
            vec![
                cond("mu2 - |a22| - alpha2", g2),
                cond("mu1 - a11^-", g1),
                cond(
                    "(mu2 - |a22| - alpha2)(mu1 - a11^-) - |a21| a12",
                    g2 * g1 - a[1][0].abs() * a[0][1],
                ),
            ],
        );
    }
    if b2 <= 0.0 && b1 > 0.0 {
        let conditions = vec![
            cond("mu1 - |a11| - alpha1", mu[0] - a[0][0].abs() - al[0]),
            cond("mu2 - a22^-", mu[1] - neg_part(a[1][1])),
        ];
        if a[1][0] >= 0.0 {
            return report(PlanarCaseTag::BoundaryMixedSigns, false, conditions);
        }
        if a[0][1] > 0.0 && a[1][0] < 0.0 && !ex2 {
            return report(PlanarCaseTag::BoundaryPredatorPrey, false, conditions);
        }
        return None;
    }
    if b1 <= 0.0 && b2 > 0.0 {
        let conditions = vec![
            cond("mu2 - |a22| - alpha2", mu[1] - a[1][1].abs() - al[1]),
            cond("mu1 - a11^-", mu[0] - neg_part(a[0][0])),
        ];
        if a[0][1] >= 0.0 {
            return report(PlanarCaseTag::BoundaryMixedSigns, true, conditions);
        }
        if a[1][0] > 0.0 && a[0][1] < 0.0 && !ex1 {
            return report(PlanarCaseTag::BoundaryPredatorPrey, true, conditions);
        }
        return None;
    }
    None
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn assemble(
    spec: &SystemSpec,
    an: &Analysis,
    evaluations: Vec<CriterionEvaluation>,
    bound: Option<SaturatedEquilibrium>,
) -> Result<Verdict, CriteriaError> {
    let primary = evaluations.iter().find(|e| e.fired);
    let (criterion, certificates) = match primary {
        Some(e) => {
            let mut certs = vec![an.gate.clone()];
            certs.extend(e.certificates.iter().cloned());
            (e.tag, certs)
        }
        None => (CriterionTag::None, vec![an.gate.clone()]),
    };
    let prediction = match criterion {
        CriterionTag::TotalExtinction
        | CriterionTag::PredatorPreyExtinction
        | CriterionTag::PartialExtinctionSharp
        | CriterionTag::PartialExtinction
        | CriterionTag::Uncontrolled => Prediction::GlobalAttractor {
            attractor: an.eq.clone(),
            gas: false,
        },
        CriterionTag::GlobalAttractivity => Prediction::GlobalAttractor {
            attractor: an.eq.clone(),
            gas: an.eq.is_interior(),
        },
        CriterionTag::Dissipative => Prediction::DissipativeOnly {
            bound: bound.expect("dissipative verdict carries its bound"),
        },
        CriterionTag::CooperativePositive | CriterionTag::None => Prediction::Inconclusive,
    };
    let block = if an.is_partial()
        && matches!(
            criterion,
            CriterionTag::PredatorPreyExtinction
                | CriterionTag::PartialExtinctionSharp
                | CriterionTag::PartialExtinction
                | CriterionTag::Uncontrolled
        ) {
        Some(BlockDecomposition {
            p: an.p(),
            permutation: an.permutation(),
        })
    } else {
        None
    };
    let planar = if spec.n() == 2 {
        Some(PlanarReport {
            equilibria: planar_equilibria(spec)?,
            case: planar_case(spec),
        })
    } else {
        None
    };
    let perturbation_extends = spec.has_perturbation()
        && matches!(
            criterion,
            CriterionTag::GlobalAttractivity
                | CriterionTag::PartialExtinction
                | CriterionTag::PartialExtinctionSharp
        );
    Ok(Verdict {
        criterion,
        prediction,
        certificates,
        block,
        planar,
        perturbation_extends,
        evaluations,
    })
}

/// Run every criterion in sharpness order and return the verdict of the
/// first that fires, with the complete evaluation trail.
pub fn analyze(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let mut evaluations = Vec::new();
    let bound;
    if an.controlled {
        evaluations.push(eval_total_extinction(&an)?);
        evaluations.push(eval_predator_prey(spec, &an)?);
        evaluations.push(eval_partial(spec, &an, true)?);
        evaluations.push(eval_partial(spec, &an, false)?);
        evaluations.push(eval_global(&an)?);
        evaluations.push(eval_coop_positive(spec, &an)?);
        let (ev, bd) = eval_dissipative(spec)?;
        bound = bd;
        evaluations.push(ev);
    } else {
        evaluations.push(eval_total_extinction(&an)?);
        evaluations.push(eval_uncontrolled(spec, &an)?);
        let (ev, bd) = eval_dissipative(spec)?;
        bound = bd;
        evaluations.push(ev);
    }
    assemble(spec, &an, evaluations, bound)
}

fn single(
    spec: &SystemSpec,
    an: &Analysis,
    evaluation: CriterionEvaluation,
    bound: Option<SaturatedEquilibrium>,
) -> Result<Verdict, CriteriaError> {
    assemble(spec, an, vec![evaluation], bound)
}

/// Whole-system M-matrix test alone.
pub fn check_global_attractivity(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let ev = eval_global(&an)?;
    single(spec, &an, ev, None)
}

/// Zero-equilibrium extinction test alone.
pub fn check_total_extinction(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let ev = eval_total_extinction(&an)?;
    single(spec, &an, ev, None)
}

/// Partitioned boundary tests alone, sharp row rule first.
pub fn check_partial_extinction(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let sharp = eval_partial(spec, &an, true)?;
    let plain = eval_partial(spec, &an, false)?;
    assemble(spec, &an, vec![sharp, plain], None)
}

/// Sign-patterned block test alone.
pub fn check_predator_prey_extinction(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let ev = eval_predator_prey(spec, &an)?;
    single(spec, &an, ev, None)
}

/// Gain-free engine alone (passive-tracker systems).
pub fn check_uncontrolled(spec: &SystemSpec) -> Result<Verdict, CriteriaError> {
    let an = prepare(spec)?;
    let ev = eval_uncontrolled(spec, &an)?;
    single(spec, &an, ev, None)
}
