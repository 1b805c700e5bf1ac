//! Minimal number of PSD factors of a square matrix.
//!
//! Rules are tried in a fixed order and the first hit wins:
//!
//! | rule | test | k |
//! |---|---|---|
//! | `DetNegativeOrNonreal` | det is not real and nonnegative | impossible |
//! | `PSD` | `A` is PSD | 1 |
//! | `SimilarNonnegDiag` | `A` is similar to a nonnegative diagonal matrix | 2 |
//! | `FiveScalar` | `A = αI` with `α ∉ [0, ∞)` | 5 |
//! | `ThmA_RorT2Nonzero` | split has a nilpotent part and `R ≠ 0` or `T2 ≠ 0` | 3 |
//! | `ThmB_ThreePD` | `A ≅ T1 ⊕ 0` and `T1` is a product of three PD matrices | 3 |
//! | `FourFallback` | otherwise | 4 |

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::complex_serde;
use crate::linalg::CMatrix;
use crate::numrange::{contains_zero_interior, intersects_positive_axis, RangeConfig, RangeDecision};
use crate::structure::{
    determinant_class, is_psd, scalar_of, schur_eigenvalues, similar_to_nonneg_diag,
    spectral_summary, triangular_split, DetClass, DetInfo, PsdTest, SpectralSummary,
    TriangularSplit,
};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Tolerance on `|Σ arg λ|` per unit of dimension.
pub const ARGUMENT_SUM_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassifyConfig {
    pub tol: f64,
    pub range: RangeConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            tol: DEFAULT_TOL,
            range: RangeConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MinFactors {
    Impossible,
    Count(u8),
}

impl MinFactors {
    pub fn count(self) -> Option<u8> {
        match self {
            MinFactors::Impossible => None,
            MinFactors::Count(k) => Some(k),
        }
    }
}

impl std::fmt::Display for MinFactors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MinFactors::Impossible => f.write_str("impossible"),
            MinFactors::Count(k) => write!(f, "{k}"),
        }
    }
}

/// `k` as a JSON integer, or the string `"impossible"`.
impl Serialize for MinFactors {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MinFactors::Impossible => s.serialize_str("impossible"),
            MinFactors::Count(k) => s.serialize_u8(*k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Rule {
    DetNegativeOrNonreal,
    #[serde(rename = "PSD")]
    Psd,
    SimilarNonnegDiag,
    #[serde(rename = "ThmA_RorT2Nonzero")]
    ThmARorT2Nonzero,
    #[serde(rename = "ThmB_ThreePD")]
    ThmBThreePd,
    FourFallback,
    FiveScalar,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::DetNegativeOrNonreal => "DetNegativeOrNonreal",
            Rule::Psd => "PSD",
            Rule::SimilarNonnegDiag => "SimilarNonnegDiag",
            Rule::ThmARorT2Nonzero => "ThmA_RorT2Nonzero",
            Rule::ThmBThreePd => "ThmB_ThreePD",
            Rule::FourFallback => "FourFallback",
            Rule::FiveScalar => "FiveScalar",
        }
    }
}

/// Which half of the three-PD criterion holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum ThreePdBranch {
    /// `0` is interior to `W(T1)`.
    ZeroInterior,
    /// `W(T1)` meets `(0, ∞)`, no negative real eigenvalue, arguments sum to 0.
    PositiveAxis,
}

/// Evidence gathered by the rules that ran. Fields of rules that were not
/// reached are absent.
#[derive(Clone, Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub det_class: Option<DetClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinant: Option<DetInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd: Option<PsdTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonneg_diag_rejection: Option<String>,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "complex_serde::option"
    )]
    pub scalar_alpha: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<TriangularSplit>,
    /// Nonzero nilpotent `A` (no invertible block) classified through the split rule.
    pub empty_invertible_block: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_determinant: Option<DetInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_spectral: Option<SpectralSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_interior: Option<RangeDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_axis: Option<RangeDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argument_sum_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub three_pd_branch: Option<ThreePdBranch>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Classification {
    pub k: MinFactors,
    pub rule: Rule,
    pub borderline: bool,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThreePdCheck {
    pub verdict: bool,
    /// Branch credited with the verdict: the interior test when it holds.
    pub branch: Option<ThreePdBranch>,
    pub zero_interior_holds: bool,
    pub positive_axis_holds: bool,
    pub borderline: bool,
    pub evidence: Certificate,
}

/// Whether the invertible matrix `T1` is a product of three positive
/// definite matrices: `det T1 > 0` and either `0 ∈ int W(T1)`, or `W(T1)`
/// meets `(0, ∞)`, no eigenvalue is negative real and the principal
/// arguments of the eigenvalues sum to zero.
pub fn three_pd_check(t1: &CMatrix, cfg: &ClassifyConfig) -> Result<ThreePdCheck> {
    let n = t1.n();
    let thr = cfg.tol * t1.scale();
    let eig = schur_eigenvalues(t1)?;
    if eig.iter().any(|z| z.norm() <= thr) {
        return Err(Error::NotInvertible);
    }
    let det = determinant_class(t1, cfg.tol)?;
    let spectral = spectral_summary(t1, cfg.tol)?;
    let interior = contains_zero_interior(t1, &cfg.range)?;
    let axis = intersects_positive_axis(t1, &cfg.range)?;

    let arg_tol = n as f64 * ARGUMENT_SUM_TOL;
    let arg_abs = spectral.argument_sum.abs();
    let arg_ok = arg_abs <= arg_tol;
    let arg_borderline = arg_abs > 0.1 * arg_tol && arg_abs <= 10.0 * arg_tol;

    let positive = det.class == DetClass::Positive;
    let a_holds = positive && interior.verdict;
    let b_holds = positive && axis.verdict && !spectral.has_negative_real_eigenvalue && arg_ok;
    let verdict = a_holds || b_holds;
    let branch = if a_holds {
        Some(ThreePdBranch::ZeroInterior)
    } else if b_holds {
        Some(ThreePdBranch::PositiveAxis)
    } else {
        None
    };
    // A clear interior verdict settles the question; otherwise every consulted
    // margin near its tolerance makes the answer borderline.
    let borderline = if a_holds && !interior.borderline {
        false
    } else {
        interior.borderline
            || (positive
                && (axis.borderline || spectral.negative_real_borderline || arg_borderline))
    };
    let evidence = Certificate {
        tol: cfg.tol,
        core_determinant: Some(det),
        core_spectral: Some(spectral),
        zero_interior: Some(interior.clone()),
        positive_axis: Some(axis.clone()),
        argument_sum_ok: Some(arg_ok),
        three_pd_branch: branch,
        ..Certificate::default()
    };
    Ok(ThreePdCheck {
        verdict,
        branch,
        zero_interior_holds: a_holds,
        positive_axis_holds: b_holds,
        borderline,
        evidence,
    })
}

/// Minimal number of PSD factors of `A`, with the evidence of the rule that decided it.
pub fn classify(a: &CMatrix, cfg: &ClassifyConfig) -> Result<Classification> {
    let tol = cfg.tol;
    let thr = tol * a.scale();
    let mut cert = Certificate {
        tol,
        ..Certificate::default()
    };
    let done = |k, rule, borderline, certificate| Classification {
        k,
        rule,
        borderline,
        certificate,
    };

    let det = determinant_class(a, tol)?;
    cert.det_class = Some(det.class);
    cert.determinant = Some(det);
    if det.class == DetClass::NegativeOrNonreal {
        return Ok(done(MinFactors::Impossible, Rule::DetNegativeOrNonreal, false, cert));
    }

    let psd = is_psd(a, tol);
    cert.psd = Some(psd);
    if psd.verdict {
        return Ok(done(MinFactors::Count(1), Rule::Psd, false, cert));
    }

    let diag = similar_to_nonneg_diag(a, tol)?;
    cert.spectral = Some(diag.summary);
    if diag.verdict {
        return Ok(done(MinFactors::Count(2), Rule::SimilarNonnegDiag, false, cert));
    }
    cert.nonneg_diag_rejection = diag.reason;

    if let Some(alpha) = scalar_of(a, tol) {
        cert.scalar_alpha = Some(alpha);
        let nonneg_real = alpha.im.abs() <= thr && alpha.re >= -thr;
        if !nonneg_real {
            return Ok(done(MinFactors::Count(5), Rule::FiveScalar, false, cert));
        }
    }

    let split = triangular_split(a, tol)?;
    let (m, p) = (split.m, split.p);
    let nilpotent_coupled = !split.r_is_zero() || !split.t2_is_zero();
    let core = CMatrix::from_block(split.t1.clone());
    cert.split = Some(split);
    if p > 0 && nilpotent_coupled {
        cert.empty_invertible_block = m == 0;
        return Ok(done(MinFactors::Count(3), Rule::ThmARorT2Nonzero, false, cert));
    }
    if m == 0 {
        // Nilpotent with negligible strictly upper part: A is zero at this tolerance.
        return Ok(done(MinFactors::Count(1), Rule::Psd, true, cert));
    }

    let check = three_pd_check(&core, cfg)?;
    let ev = check.evidence;
    cert.core_determinant = ev.core_determinant;
    cert.core_spectral = ev.core_spectral;
    cert.zero_interior = ev.zero_interior;
    cert.positive_axis = ev.positive_axis;
    cert.argument_sum_ok = ev.argument_sum_ok;
    cert.three_pd_branch = ev.three_pd_branch;
    if check.verdict {
        Ok(done(MinFactors::Count(3), Rule::ThmBThreePd, check.borderline, cert))
    } else {
        Ok(done(MinFactors::Count(4), Rule::FourFallback, check.borderline, cert))
    }
}
