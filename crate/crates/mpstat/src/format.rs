//! Text formats: instances, curve specs, tangent-cone fixtures and expectation files.
//! All are TOML documents; diagnostics carry 1-based line and column.

use std::fmt;
use std::ops::Range;

use mpstat_core::combiner::{CurveForm, Phi, PsiSpec};
use mpstat_core::cones::{PolyCone, TangentFixture, UnionCone};
use mpstat_core::stationarity::StationarityKind;
use mpstat_core::{AlphaPattern, CandidatePoint, DVector, Instance, Polynomial, ProblemKind, Rational};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::expr::{parse_curve_expr, parse_polynomial, parse_rational, ExprError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

/// 1-based line and column (in characters) of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map_or(0, |k| k + 1);
    (line, before[line_start..].chars().count() + 1)
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn error_at(&self, offset: usize, message: impl Into<String>) -> ParseError {
        let (line, column) = line_col(self.text, offset);
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn error_span(&self, span: Range<usize>, message: impl Into<String>) -> ParseError {
        self.error_at(span.start, message)
    }

    /// Offset of the first content byte of a string value spanning `span`.
    fn content_start(&self, span: &Range<usize>) -> usize {
        let raw = &self.text[span.start..span.end.min(self.text.len())];
        if raw.starts_with("\"\"\"") || raw.starts_with("'''") {
            let mut k = span.start + 3;
            // a newline right after the opening delimiter is trimmed
            if self.text[k..].starts_with('\n') {
                k += 1;
            } else if self.text[k..].starts_with("\r\n") {
                k += 2;
            }
            k
        } else if raw.starts_with('"') || raw.starts_with('\'') {
            span.start + 1
        } else {
            span.start
        }
    }

    fn expr_error(&self, s: &Spanned<String>, e: ExprError) -> ParseError {
        self.error_at(self.content_start(&s.span()) + e.offset, e.message)
    }

    fn toml<T: serde::de::DeserializeOwned>(&self, text: &str) -> Result<T, ParseError> {
        toml::from_str(text).map_err(|e| {
            let at = e.span().map_or(0, |s| s.start);
            self.error_at(at, e.message().trim().to_string())
        })
    }

    fn check_version(&self, v: &Option<Spanned<u32>>) -> Result<(), ParseError> {
        match v {
            Some(v) if *v.get_ref() != FORMAT_VERSION => Err(self.error_span(
                v.span(),
                format!("unsupported format version {}, expected {FORMAT_VERSION}", v.get_ref()),
            )),
            _ => Ok(()),
        }
    }

    fn rational(&self, v: &Spanned<Num>) -> Result<Rational, ParseError> {
        match v.get_ref() {
            Num::Int(k) => Ok(Rational::from_integer((*k).into())),
            Num::Text(s) => parse_rational(s).ok_or_else(|| self.error_span(v.span(), format!("`{s}` is not a rational number"))),
        }
    }

    fn vector(&self, v: &[Spanned<Num>], dim: usize, span: Range<usize>) -> Result<Vec<Rational>, ParseError> {
        if v.len() != dim {
            return Err(self.error_span(span, format!("expected {dim} entries, found {}", v.len())));
        }
        v.iter().map(|x| self.rational(x)).collect()
    }

    fn cone(&self, raw: &Spanned<RawCone>, dim: usize) -> Result<PolyCone, ParseError> {
        let rows = |rows: &[Spanned<Vec<Spanned<Num>>>]| {
            rows.iter()
                .map(|r| self.vector(r.get_ref(), dim, r.span()))
                .collect::<Result<Vec<_>, _>>()
        };
        let c = raw.get_ref();
        PolyCone::new(dim, rows(&c.halfspaces)?, rows(&c.equalities)?).map_err(|e| self.error_span(raw.span(), e.to_string()))
    }

    fn union(&self, pieces: &Spanned<Vec<Spanned<RawCone>>>, dim: usize) -> Result<UnionCone, ParseError> {
        let cones = pieces
            .get_ref()
            .iter()
            .map(|c| self.cone(c, dim))
            .collect::<Result<Vec<_>, _>>()?;
        if cones.is_empty() {
            return Err(self.error_span(pieces.span(), "a cone union needs at least one piece"));
        }
        UnionCone::new(cones).map_err(|e| self.error_span(pieces.span(), e.to_string()))
    }
}

/// A number written either as a TOML integer or as a rational string.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCone {
    #[serde(default)]
    halfspaces: Vec<Spanned<Vec<Spanned<Num>>>>,
    #[serde(default)]
    equalities: Vec<Spanned<Vec<Spanned<Num>>>>,
}

pub fn parse_kind_name(s: &str) -> Option<ProblemKind> {
    match s {
        "mpcc" => Some(ProblemKind::Mpcc),
        "mpvc" => Some(ProblemKind::Mpvc),
        _ => None,
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    version: Option<Spanned<u32>>,
    kind: Spanned<String>,
    n: Spanned<usize>,
    objective: Spanned<String>,
    #[serde(default)]
    ineq: Vec<Spanned<String>>,
    #[serde(default)]
    eq: Vec<Spanned<String>>,
    #[serde(default)]
    gfun: Vec<Spanned<String>>,
    #[serde(default)]
    hfun: Vec<Spanned<String>>,
    point: Option<Spanned<String>>,
    notes: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub instance: Instance,
    /// Point the file is about, if it names one.
    pub point: Option<CandidatePoint>,
    pub notes: Option<String>,
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, ParseError> {
    let src = Source { text };
    let raw: RawInstance = src.toml(text)?;
    src.check_version(&raw.version)?;
    let kind = parse_kind_name(raw.kind.get_ref())
        .ok_or_else(|| src.error_span(raw.kind.span(), format!("unknown kind `{}`, expected mpcc or mpvc", raw.kind.get_ref())))?;
    let n = *raw.n.get_ref();
    let poly = |s: &Spanned<String>| parse_polynomial(s.get_ref(), n).map_err(|e| src.expr_error(s, e));
    let polys = |v: &[Spanned<String>]| v.iter().map(poly).collect::<Result<Vec<Polynomial>, _>>();
    let objective = poly(&raw.objective)?;
    let (ineq, eq) = (polys(&raw.ineq)?, polys(&raw.eq)?);
    let (gfun, hfun) = (polys(&raw.gfun)?, polys(&raw.hfun)?);
    if gfun.len() != hfun.len() {
        return Err(src.error_at(0, format!("gfun has {} entries but hfun has {}", gfun.len(), hfun.len())));
    }
    let instance = Instance::new(kind, n, objective, ineq, eq, gfun, hfun).map_err(|e| src.error_span(raw.n.span(), e.to_string()))?;
    let point = match &raw.point {
        Some(p) => Some(parse_point(p.get_ref(), n).map_err(|e| src.expr_error(p, e))?),
        None => None,
    };
    Ok(InstanceFile {
        instance,
        point,
        notes: raw.notes,
    })
}

/// Parses a comma-separated list of rationals of length `n`.
pub fn parse_point(text: &str, n: usize) -> Result<CandidatePoint, ExprError> {
    let mut coords = Vec::new();
    let mut offset = 0;
    for part in text.split(',') {
        let lead = part.len() - part.trim_start().len();
        let value = parse_rational(part).ok_or_else(|| ExprError {
            offset: offset + lead,
            message: format!("`{}` is not a rational number", part.trim()),
        })?;
        coords.push(value);
        offset += part.len() + 1;
    }
    if coords.len() != n {
        return Err(ExprError {
            offset: 0,
            message: format!("point has {} coordinates, the instance has dimension {n}", coords.len()),
        });
    }
    Ok(CandidatePoint::new(coords))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurveFile {
    version: Option<Spanned<u32>>,
    curve: Spanned<Vec<Spanned<RawCurve>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    form: Spanned<String>,
    phi: Option<Spanned<String>>,
    linear: Option<Spanned<Num>>,
    table: Option<Vec<Spanned<Vec<Spanned<Num>>>>>,
}

/// One curve per biactive index, in increasing index order.
pub fn parse_curves(text: &str, kind: ProblemKind) -> Result<Vec<PsiSpec>, ParseError> {
    let src = Source { text };
    let raw: RawCurveFile = src.toml(text)?;
    src.check_version(&raw.version)?;
    let mut out = Vec::new();
    for c in raw.curve.get_ref() {
        let r = c.get_ref();
        let form = match r.form.get_ref().as_str() {
            "graph-over-a" => CurveForm::GraphOverA,
            "graph-over-b" => CurveForm::GraphOverB,
            other => {
                return Err(src.error_span(r.form.span(), format!("unknown form `{other}`, expected graph-over-a or graph-over-b")));
            }
        };
        let phi = match (&r.phi, &r.linear, &r.table) {
            (Some(e), None, None) => Phi::Expr(parse_curve_expr(e.get_ref()).map_err(|err| src.expr_error(e, err))?),
            (None, Some(c), None) => Phi::Linear(src.rational(c)?),
            (None, None, Some(rows)) => Phi::Table(
                rows.iter()
                    .map(|row| {
                        let v = src.vector(row.get_ref(), 2, row.span())?;
                        Ok((v[0].clone(), v[1].clone()))
                    })
                    .collect::<Result<Vec<_>, ParseError>>()?,
            ),
            _ => return Err(src.error_span(c.span(), "give exactly one of `phi`, `linear` or `table`")),
        };
        out.push(PsiSpec::new(form, phi, kind).map_err(|e| src.error_span(c.span(), e.to_string()))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTangent {
    version: Option<Spanned<u32>>,
    tangent: Spanned<Vec<Spanned<RawCone>>>,
    nlp0_tangent: Spanned<Vec<Spanned<RawCone>>>,
}

pub fn parse_tangent_fixture(text: &str, dim: usize) -> Result<TangentFixture, ParseError> {
    let src = Source { text };
    let raw: RawTangent = src.toml(text)?;
    src.check_version(&raw.version)?;
    Ok(TangentFixture {
        tangent: src.union(&raw.tangent, dim)?,
        nlp0_tangent: src.union(&raw.nlp0_tangent, dim)?,
    })
}

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// Stated in the published source of the example.
    Published,
    /// Produced by an independent oracle in this repository.
    Computed,
    /// Immediate from the definitions.
    Trivial,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Published => "published",
            Origin::Computed => "computed",
            Origin::Trivial => "trivial",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "published" => Some(Origin::Published),
            "computed" => Some(Origin::Computed),
            "trivial" => Some(Origin::Trivial),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExpectKey {
    Gcq,
    Acq,
    GcqNlp0,
    Linearized,
    Nlp0Linearized,
    LocalMin,
    Verdict(StationarityKind),
    /// A multiplier vector that must satisfy the definition of the kind.
    Witness(StationarityKind),
}

impl ExpectKey {
    pub fn parse(s: &str, p: usize) -> Result<Self, String> {
        Ok(match s {
            "gcq" => ExpectKey::Gcq,
            "acq" => ExpectKey::Acq,
            "gcq_nlp0" => ExpectKey::GcqNlp0,
            "linearized" => ExpectKey::Linearized,
            "nlp0_linearized" => ExpectKey::Nlp0Linearized,
            "local_min" => ExpectKey::LocalMin,
            _ => {
                if let Some(k) = s.strip_prefix("verdict.") {
                    ExpectKey::Verdict(parse_kind(k, p)?)
                } else if let Some(k) = s.strip_prefix("witness.") {
                    ExpectKey::Witness(parse_kind(k, p)?)
                } else {
                    return Err(format!("unknown expectation key `{s}`"));
                }
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            ExpectKey::Gcq => "gcq".into(),
            ExpectKey::Acq => "acq".into(),
            ExpectKey::GcqNlp0 => "gcq_nlp0".into(),
            ExpectKey::Linearized => "linearized".into(),
            ExpectKey::Nlp0Linearized => "nlp0_linearized".into(),
            ExpectKey::LocalMin => "local_min".into(),
            ExpectKey::Verdict(k) => format!("verdict.{}", kind_token(k)),
            ExpectKey::Witness(k) => format!("witness.{}", kind_token(k)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expected {
    Bool(bool),
    Vector(Vec<Rational>),
    Cone(UnionCone),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expectation {
    pub key: ExpectKey,
    pub origin: Origin,
    pub reference: Option<String>,
    pub expected: Expected,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpectFile {
    version: Option<Spanned<u32>>,
    #[serde(default)]
    expect: Vec<Spanned<RawExpect>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExpect {
    key: Spanned<String>,
    origin: Spanned<String>,
    reference: Option<String>,
    value: Option<bool>,
    witness: Option<Spanned<Vec<Spanned<Num>>>>,
    cone: Option<Spanned<Vec<Spanned<RawCone>>>>,
}

/// Parses an expectations side-file for an instance of dimension `n` with `p` pairs and
/// multiplier vectors of length `multipliers`.
pub fn parse_expectations(text: &str, n: usize, p: usize, multipliers: usize) -> Result<Vec<Expectation>, ParseError> {
    let src = Source { text };
    let raw: RawExpectFile = src.toml(text)?;
    src.check_version(&raw.version)?;
    let mut out: Vec<Expectation> = Vec::new();
    for e in &raw.expect {
        let r = e.get_ref();
        let key = ExpectKey::parse(r.key.get_ref(), p).map_err(|m| src.error_span(r.key.span(), m))?;
        if out.iter().any(|x| x.key == key) {
            return Err(src.error_span(r.key.span(), format!("duplicate expectation `{}`", key.name())));
        }
        let origin = Origin::parse(r.origin.get_ref())
            .ok_or_else(|| src.error_span(r.origin.span(), "origin must be published, computed or trivial"))?;
        let expected = match (&key, r.value, &r.witness, &r.cone) {
            (ExpectKey::Linearized | ExpectKey::Nlp0Linearized, None, None, Some(c)) => Expected::Cone(src.union(c, n)?),
            (ExpectKey::Witness(_), None, Some(w), None) => Expected::Vector(src.vector(w.get_ref(), multipliers, w.span())?),
            (ExpectKey::Linearized | ExpectKey::Nlp0Linearized | ExpectKey::Witness(_), ..) => {
                return Err(src.error_span(e.span(), "cone keys take `cone`, witness keys take `witness`"));
            }
            (_, Some(b), None, None) => Expected::Bool(b),
            _ => return Err(src.error_span(e.span(), "this key takes a boolean `value`")),
        };
        out.push(Expectation {
            key,
            origin,
            reference: r.reference.clone(),
            expected,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct OutExpectFile {
    version: u32,
    expect: Vec<OutExpect>,
}

#[derive(Serialize)]
struct OutExpect {
    key: String,
    origin: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cone: Option<Vec<OutCone>>,
}

#[derive(Serialize)]
struct OutCone {
    halfspaces: Vec<Vec<String>>,
    equalities: Vec<Vec<String>>,
}

fn strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

pub fn write_expectations(list: &[Expectation]) -> String {
    let file = OutExpectFile {
        version: FORMAT_VERSION,
        expect: list
            .iter()
            .map(|e| {
                let (value, witness, cone) = match &e.expected {
                    Expected::Bool(b) => (Some(*b), None, None),
                    Expected::Vector(v) => (None, Some(strings(v)), None),
                    Expected::Cone(u) => (
                        None,
                        None,
                        Some(
                            u.pieces()
                                .iter()
                                .map(|c| OutCone {
                                    halfspaces: c.halfspaces().iter().map(|r| strings(r)).collect(),
                                    equalities: c.equalities().iter().map(|r| strings(r)).collect(),
                                })
                                .collect(),
                        ),
                    ),
                };
                OutExpect {
                    key: e.key.name(),
                    origin: e.origin.as_str(),
                    reference: e.reference.clone(),
                    value,
                    witness,
                    cone,
                }
            })
            .collect(),
    };
    toml::to_string(&file).expect("expectations serialize")
}

fn parse_bits(s: &str, p: usize) -> Result<AlphaPattern, String> {
    let bits: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(format!("`{s}` is not a 0/1 pattern")),
        })
        .collect::<Result<_, _>>()?;
    if bits.len() != p {
        return Err(format!("pattern `{s}` has {} bits, the instance has {p} pairs", bits.len()));
    }
    AlphaPattern::from_bits(&bits).map_err(|e| e.to_string())
}

fn parse_dvector(parts: &[&str], p: usize) -> Result<DVector, String> {
    let mut entries = parts
        .iter()
        .map(|s| parse_rational(s).ok_or_else(|| format!("`{s}` is not a rational number")))
        .collect::<Result<Vec<_>, _>>()?;
    if entries.len() == 1 && p > 1 {
        entries = vec![entries[0].clone(); p];
    }
    if entries.len() != p {
        return Err(format!("d has {} entries, the instance has {p} pairs", entries.len()));
    }
    DVector::new(entries).map_err(|e| e.to_string())
}

/// One kind token: `w`, `a`, `c`, `m`, `s`, `linb`, `aalpha=01`, `palpha=01` or
/// `pd=1/2,1/4` (a single entry is repeated for every pair).
pub fn parse_kind(token: &str, p: usize) -> Result<StationarityKind, String> {
    let t = token.trim();
    let lower = t.to_ascii_lowercase();
    Ok(match lower.as_str() {
        "w" | "weak" => StationarityKind::Weak,
        "a" => StationarityKind::A,
        "c" => StationarityKind::C,
        "m" => StationarityKind::M,
        "s" => StationarityKind::S,
        "linb" => StationarityKind::LinB,
        _ => match lower.split_once('=') {
            Some(("aalpha", bits)) => StationarityKind::AAlpha(parse_bits(bits, p)?),
            Some(("palpha", bits)) => StationarityKind::PAlpha(parse_bits(bits, p)?),
            Some(("pd", v)) => StationarityKind::PD(parse_dvector(&v.split(',').collect::<Vec<_>>(), p)?),
            _ => return Err(format!("unknown stationarity kind `{t}`")),
        },
    })
}

/// A comma-separated kind list. Entries after `pd=` that are plain numbers continue the
/// d-vector, so `s,pd=1/2,1/4,m` names three kinds.
pub fn parse_kinds(list: &str, p: usize) -> Result<Vec<StationarityKind>, String> {
    let mut tokens: Vec<String> = Vec::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let continues_pd = parse_rational(part).is_some()
            && tokens.last().is_some_and(|t| t.to_ascii_lowercase().starts_with("pd="));
        match tokens.last_mut() {
            Some(last) if continues_pd => {
                last.push(',');
                last.push_str(part);
            }
            _ => tokens.push(part.to_string()),
        }
    }
    tokens.iter().map(|t| parse_kind(t, p)).collect()
}

/// Inverse of [`parse_kind`].
pub fn kind_token(kind: &StationarityKind) -> String {
    let bits = |a: &AlphaPattern| a.bits().iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
    match kind {
        StationarityKind::Weak => "w".into(),
        StationarityKind::A => "a".into(),
        StationarityKind::C => "c".into(),
        StationarityKind::M => "m".into(),
        StationarityKind::S => "s".into(),
        StationarityKind::LinB => "linb".into(),
        StationarityKind::AAlpha(a) => format!("aalpha={}", bits(a)),
        StationarityKind::PAlpha(a) => format!("palpha={}", bits(a)),
        StationarityKind::PD(d) => format!("pd={}", strings(d.entries()).join(",")),
        StationarityKind::Curve(_) => "curve".into(),
    }
}
