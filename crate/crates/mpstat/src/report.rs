//! Versioned JSON reports. Verdict data is written with exact rationals as strings;
//! combine sections carry floats next to their residuals.

use mpstat_core::combiner::CombineResult;
use mpstat_core::cones::{CqReport, PolyCone};
use mpstat_core::lp::FarkasCertificate;
use mpstat_core::stationarity::{MultiplierVector, Verdict};
use mpstat_core::{CandidatePoint, IndexSets, Instance, Rational};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expr::parse_rational;
use crate::format::kind_token;

pub const SCHEMA: &str = "mpstat-report/1";

fn strs(v: &[Rational]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

fn rats(v: &[String]) -> Option<Vec<Rational>> {
    v.iter().map(|s| parse_rational(s)).collect()
}

/// SHA-256 over a canonical rendering of the instance.
pub fn instance_digest(inst: &Instance) -> String {
    let mut text = format!("{}\n{}\nf {}\n", inst.kind(), inst.dim(), inst.objective());
    for (tag, list) in [("g", inst.ineq()), ("h", inst.eq()), ("G", inst.gfun()), ("H", inst.hfun())] {
        for p in list {
            text.push_str(&format!("{tag} {p}\n"));
        }
    }
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: Vec<String>,
    pub eta: Vec<String>,
    pub mu: Vec<String>,
    pub nu: Vec<String>,
}

impl Multipliers {
    pub fn from_core(m: &MultiplierVector<Rational>) -> Self {
        Self {
            lambda: strs(&m.lambda),
            eta: strs(&m.eta),
            mu: strs(&m.mu),
            nu: strs(&m.nu),
        }
    }

    pub fn to_core(&self) -> Option<MultiplierVector<Rational>> {
        Some(MultiplierVector {
            lambda: rats(&self.lambda)?,
            eta: rats(&self.eta)?,
            mu: rats(&self.mu)?,
            nu: rats(&self.nu)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatMultipliers {
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub eq: Vec<String>,
    pub ineq: Vec<String>,
    pub lower: Vec<String>,
    pub upper: Vec<String>,
}

impl Certificate {
    pub fn from_core(c: &FarkasCertificate) -> Self {
        Self {
            eq: strs(&c.eq),
            ineq: strs(&c.ineq),
            lower: strs(&c.lower),
            upper: strs(&c.upper),
        }
    }

    pub fn to_core(&self) -> Option<FarkasCertificate> {
        Some(FarkasCertificate {
            eq: rats(&self.eq)?,
            ineq: rats(&self.ineq)?,
            lower: rats(&self.lower)?,
            upper: rats(&self.upper)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub kind: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Multipliers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_pattern: Option<String>,
}

impl VerdictReport {
    pub fn from_core(v: &Verdict) -> Self {
        Self {
            kind: kind_token(&v.kind),
            holds: v.holds,
            witness: v.witness.as_ref().map(Multipliers::from_core),
            branches: v.branches.as_ref().map(|b| b.iter().map(ToString::to_string).collect()),
            certificate: v.certificate.as_ref().map(Certificate::from_core),
            failed_pattern: v.failed_pattern.as_ref().map(ToString::to_string),
        }
    }
}

/// Zero-based index lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetsReport {
    pub active_g: Vec<usize>,
    pub plus_zero: Vec<usize>,
    pub zero_plus: Vec<usize>,
    pub minus_zero: Vec<usize>,
    pub minus_plus: Vec<usize>,
    pub biactive: Vec<usize>,
}

impl IndexSetsReport {
    pub fn from_core(s: &IndexSets) -> Self {
        Self {
            active_g: s.active_g.clone(),
            plus_zero: s.plus_zero.clone(),
            zero_plus: s.zero_plus.clone(),
            minus_zero: s.minus_zero.clone(),
            minus_plus: s.minus_plus.clone(),
            biactive: s.biactive.clone(),
        }
    }
}

/// `{d : a.d <= 0 for every halfspace row, b.d = 0 for every equality row}`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeReport {
    pub halfspaces: Vec<Vec<String>>,
    pub equalities: Vec<Vec<String>>,
}

impl ConeReport {
    pub fn from_core(c: &PolyCone) -> Self {
        Self {
            halfspaces: c.halfspaces().iter().map(|r| strs(r)).collect(),
            equalities: c.equalities().iter().map(|r| strs(r)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqSection {
    pub gcq: bool,
    pub acq: bool,
    pub gcq_nlp0: bool,
    pub from_fixture: bool,
    pub linearized: Vec<ConeReport>,
    pub nlp0_linearized: ConeReport,
    pub tangent: Vec<ConeReport>,
    pub nlp0_tangent: Vec<ConeReport>,
}

impl CqSection {
    pub fn from_core(r: &CqReport) -> Self {
        let union = |u: &mpstat_core::cones::UnionCone| u.pieces().iter().map(ConeReport::from_core).collect();
        Self {
            gcq: r.gcq,
            acq: r.acq,
            gcq_nlp0: r.gcq_nlp0,
            from_fixture: r.from_fixture,
            linearized: union(&r.linearized),
            nlp0_linearized: ConeReport::from_core(&r.nlp0_linearized),
            tangent: union(&r.tangent),
            nlp0_tangent: union(&r.nlp0_tangent),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombineSection {
    pub target: String,
    pub converged: bool,
    pub y_star: Vec<f64>,
    pub patterns: Vec<String>,
    pub weights: Vec<f64>,
    pub combined: FloatMultipliers,
    /// `|psi_i|` per biactive index.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub weak_residual: f64,
    pub inputs: Vec<Multipliers>,
    pub exact_weights: Vec<String>,
    pub exact_combined: Multipliers,
    pub exact_weak_ok: bool,
    pub bisections: usize,
    pub nested_solves: usize,
    pub grid_fallbacks: usize,
}

impl CombineSection {
    pub fn from_core(r: &CombineResult) -> Self {
        Self {
            target: match &r.target {
                mpstat_core::stationarity::StationarityKind::Curve(specs) => {
                    let parts: Vec<String> = specs.iter().map(|s| s.phi().to_string()).collect();
                    format!("curve[{}]", parts.join("; "))
                }
                k => kind_token(k),
            },
            converged: r.converged,
            y_star: r.y_star.clone(),
            patterns: r.patterns.iter().map(ToString::to_string).collect(),
            weights: r.weights.clone(),
            combined: FloatMultipliers {
                lambda: r.combined.lambda.clone(),
                eta: r.combined.eta.clone(),
                mu: r.combined.mu.clone(),
                nu: r.combined.nu.clone(),
            },
            residuals: r.residuals.clone(),
            max_residual: r.max_residual(),
            weak_residual: r.weak_residual,
            inputs: r.inputs.iter().map(Multipliers::from_core).collect(),
            exact_weights: strs(&r.exact_weights),
            exact_combined: Multipliers::from_core(&r.exact_combined),
            exact_weak_ok: r.exact_weak_ok,
            bisections: r.miranda.bisections,
            nested_solves: r.miranda.nested_solves,
            grid_fallbacks: r.miranda.grid_fallbacks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagReport {
    pub name: String,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub tool_version: String,
    pub instance_digest: String,
    pub kind: String,
    pub point: Vec<String>,
    pub index_sets: IndexSetsReport,
    #[serde(default)]
    pub verdicts: Vec<VerdictReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lattice_flags: Vec<FlagReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combine: Option<CombineSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cq: Option<CqSection>,
    pub timing_ms: f64,
}

impl Report {
    pub fn new(inst: &Instance, x: &CandidatePoint, sets: &IndexSets) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            instance_digest: instance_digest(inst),
            kind: inst.kind().to_string(),
            point: strs(x.coords()),
            index_sets: IndexSetsReport::from_core(sets),
            verdicts: Vec::new(),
            lattice_flags: Vec::new(),
            combine: None,
            cq: None,
            timing_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
