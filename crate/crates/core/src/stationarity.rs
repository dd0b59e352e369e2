//! Stationarity systems as exact LP feasibility problems with branch enumeration.
//!
//! Disjunctive conditions are split per biactive index into a short list of convex
//! branches. Assignments are explored depth first in lexicographic order (first biactive
//! index slowest, strong branch first), pruning with partial LPs, so the first feasible
//! leaf is the same one a full enumeration would find.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::combiner::{curve_contains, curve_pieces, PsiSpec};
use crate::cones::{linearized_cone, polar_union};
use crate::error::{Error, Result};
use crate::instance::{index_sets, AlphaPattern, CandidatePoint, DVector, IndexSets, Instance, ProblemKind};
use crate::lp::{solve_feasibility, Bound, FarkasCertificate, LinearSystem, LpOutcome};
use crate::rational::Rational;

/// Multipliers `(lambda, eta, mu, nu)` for inequality, equality and the two
/// complementarity/vanishing blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierVector<T> {
    pub lambda: Vec<T>,
    pub eta: Vec<T>,
    pub mu: Vec<T>,
    pub nu: Vec<T>,
}

impl<T: Clone> MultiplierVector<T> {
    /// Splits a flat vector laid out as `lambda | eta | mu | nu`.
    pub fn from_flat(flat: &[T], l: usize, m: usize, p: usize) -> Result<Self> {
        let expected = l + m + 2 * p;
        if flat.len() != expected {
            return Err(Error::LengthMismatch {
                what: "multiplier vector",
                expected,
                found: flat.len(),
            });
        }
        Ok(Self {
            lambda: flat[..l].to_vec(),
            eta: flat[l..l + m].to_vec(),
            mu: flat[l + m..l + m + p].to_vec(),
            nu: flat[l + m + p..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut out = self.lambda.clone();
        out.extend(self.eta.iter().cloned());
        out.extend(self.mu.iter().cloned());
        out.extend(self.nu.iter().cloned());
        out
    }

    pub fn check_sizes(&self, inst: &Instance) -> Result<()> {
        let (l, m, p) = inst.sizes();
        for (what, len, expected) in [
            ("lambda", self.lambda.len(), l),
            ("eta", self.eta.len(), m),
            ("mu", self.mu.len(), p),
            ("nu", self.nu.len(), p),
        ] {
            if len != expected {
                return Err(Error::LengthMismatch {
                    what,
                    expected,
                    found: len,
                });
            }
        }
        Ok(())
    }
}

impl MultiplierVector<Rational> {
    pub fn to_f64(&self) -> MultiplierVector<f64> {
        let f = crate::rational::vec_to_f64;
        MultiplierVector {
            lambda: f(&self.lambda),
            eta: f(&self.eta),
            mu: f(&self.mu),
            nu: f(&self.nu),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StationarityKind {
    Weak,
    A,
    C,
    M,
    S,
    LinB,
    AAlpha(AlphaPattern),
    PAlpha(AlphaPattern),
    PD(DVector),
    /// One curve per biactive index, in biactive order.
    Curve(Vec<PsiSpec>),
}

impl fmt::Display for StationarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Weak => write!(f, "W"),
            Self::A => write!(f, "A"),
            Self::C => write!(f, "C"),
            Self::M => write!(f, "M"),
            Self::S => write!(f, "S"),
            Self::LinB => write!(f, "linB"),
            Self::AAlpha(a) => write!(f, "A({a})"),
            Self::PAlpha(a) => write!(f, "P({a})"),
            Self::PD(d) => write!(f, "P_d({d})"),
            Self::Curve(_) => write!(f, "curve"),
        }
    }
}

/// Which branch of the per-index condition a witness uses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BranchLabel {
    Unconstrained,
    Strong,
    MuNonneg,
    NuNonneg,
    MuZero,
    NuZero,
    /// `mu <= 0` and `nu <= 0`.
    Nonpositive,
    NuNonpos,
    Line,
    CurveSegment(usize),
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unconstrained => write!(f, "free"),
            Self::Strong => write!(f, "strong"),
            Self::MuNonneg => write!(f, "mu>=0"),
            Self::NuNonneg => write!(f, "nu>=0"),
            Self::MuZero => write!(f, "mu=0"),
            Self::NuZero => write!(f, "nu=0"),
            Self::Nonpositive => write!(f, "mu,nu<=0"),
            Self::NuNonpos => write!(f, "nu<=0"),
            Self::Line => write!(f, "line"),
            Self::CurveSegment(k) => write!(f, "curve[{k}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub kind: StationarityKind,
    pub holds: bool,
    pub witness: Option<MultiplierVector<Rational>>,
    /// Per biactive index, in biactive order.
    pub branches: Option<Vec<BranchLabel>>,
    pub certificate: Option<FarkasCertificate>,
    /// For linearized B-stationarity: the first pattern whose A(alpha) system fails.
    pub failed_pattern: Option<AlphaPattern>,
}

impl Verdict {
    fn failed(kind: StationarityKind, certificate: Option<FarkasCertificate>) -> Self {
        Self {
            kind,
            holds: false,
            witness: None,
            branches: None,
            certificate,
            failed_pattern: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub biactive_cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { biactive_cap: 12 }
    }
}

/// Column offsets of the multiplier blocks in the weak system.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub l: usize,
    pub m: usize,
    pub p: usize,
}

impl Layout {
    pub fn of(inst: &Instance) -> Self {
        let (l, m, p) = inst.sizes();
        Self { l, m, p }
    }

    pub fn len(&self) -> usize {
        self.l + self.m + 2 * self.p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lambda(&self, i: usize) -> usize {
        i
    }

    pub fn eta(&self, i: usize) -> usize {
        self.l + i
    }

    pub fn mu(&self, i: usize) -> usize {
        self.l + self.m + i
    }

    pub fn nu(&self, i: usize) -> usize {
        self.l + self.m + self.p + i
    }
}

/// Weak stationarity as a linear system over `lambda | eta | mu | nu`.
pub fn build_weak_system(inst: &Instance, x: &CandidatePoint, sets: &IndexSets) -> Result<LinearSystem> {
    let lay = Layout::of(inst);
    let n = inst.dim();
    let xs = x.coords();
    let grad_f = inst.objective().gradient_at(xs)?;
    let grads = |ps: &[crate::poly::Polynomial]| -> Result<Vec<Vec<Rational>>> {
        ps.iter().map(|q| q.gradient_at(xs)).collect()
    };
    let (gg, gh, g_big, h_big) = (
        grads(inst.ineq())?,
        grads(inst.eq())?,
        grads(inst.gfun())?,
        grads(inst.hfun())?,
    );
    let mu_sign = match inst.kind() {
        ProblemKind::Mpcc => -Rational::one(),
        ProblemKind::Mpvc => Rational::one(),
    };

    let mut sys = LinearSystem::new(lay.len());
    for k in 0..n {
        let mut row = vec![Rational::zero(); lay.len()];
        for i in 0..lay.l {
            row[lay.lambda(i)] = gg[i][k].clone();
        }
        for i in 0..lay.m {
            row[lay.eta(i)] = gh[i][k].clone();
        }
        for i in 0..lay.p {
            row[lay.mu(i)] = &mu_sign * &g_big[i][k];
            row[lay.nu(i)] = -h_big[i][k].clone();
        }
        sys.add_eq(row, -grad_f[k].clone());
    }

    let zero = || Bound::fixed(Rational::zero());
    for i in 0..lay.l {
        let b = if sets.active_g.contains(&i) { Bound::nonneg() } else { zero() };
        sys.set_bound(lay.lambda(i), b);
    }
    match inst.kind() {
        ProblemKind::Mpcc => {
            for &i in &sets.plus_zero {
                sys.set_bound(lay.mu(i), zero());
            }
            for &i in &sets.zero_plus {
                sys.set_bound(lay.nu(i), zero());
            }
        }
        ProblemKind::Mpvc => {
            for &i in sets.plus_zero.iter().chain(&sets.minus_zero).chain(&sets.minus_plus) {
                sys.set_bound(lay.mu(i), zero());
            }
            for &i in sets.zero_plus.iter().chain(&sets.biactive) {
                sys.set_bound(lay.mu(i), Bound::nonneg());
            }
            for &i in sets.zero_plus.iter().chain(&sets.minus_plus) {
                sys.set_bound(lay.nu(i), zero());
            }
            for &i in &sets.minus_zero {
                sys.set_bound(lay.nu(i), Bound::nonneg());
            }
        }
    }
    Ok(sys)
}

/// A linear condition `mu_coef * mu_i + nu_coef * nu_i (= or <=) rhs` on one index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairRow {
    pub mu_coef: Rational,
    pub nu_coef: Rational,
    pub is_eq: bool,
    pub rhs: Rational,
}

impl PairRow {
    fn new(mu: i64, nu: i64, is_eq: bool) -> Self {
        Self {
            mu_coef: Rational::from_integer(mu.into()),
            nu_coef: Rational::from_integer(nu.into()),
            is_eq,
            rhs: Rational::zero(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Branch {
    pub label: BranchLabel,
    pub rows: Vec<PairRow>,
}

fn branch(label: BranchLabel, rows: Vec<PairRow>) -> Branch {
    Branch { label, rows }
}

fn mu_ge() -> PairRow {
    PairRow::new(-1, 0, false)
}
fn mu_le() -> PairRow {
    PairRow::new(1, 0, false)
}
fn nu_ge() -> PairRow {
    PairRow::new(0, -1, false)
}
fn nu_le() -> PairRow {
    PairRow::new(0, 1, false)
}
fn mu_eq() -> PairRow {
    PairRow::new(1, 0, true)
}
fn nu_eq() -> PairRow {
    PairRow::new(0, 1, true)
}

fn strong(kind: ProblemKind) -> Branch {
    match kind {
        ProblemKind::Mpcc => branch(BranchLabel::Strong, vec![mu_ge(), nu_ge()]),
        ProblemKind::Mpvc => branch(BranchLabel::Strong, vec![mu_eq(), nu_ge()]),
    }
}

fn check_len(what: &'static str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::LengthMismatch { what, expected, found });
    }
    Ok(())
}

/// Branch lists per biactive index (in biactive order) for a kind other than LinB.
pub fn branch_sets(inst: &Instance, sets: &IndexSets, kind: &StationarityKind) -> Result<Vec<Vec<Branch>>> {
    use BranchLabel as L;
    let pk = inst.kind();
    let (_, _, p) = inst.sizes();
    match kind {
        StationarityKind::AAlpha(a) | StationarityKind::PAlpha(a) => check_len("alpha pattern", a.len(), p)?,
        StationarityKind::PD(d) => check_len("d vector", d.len(), p)?,
        StationarityKind::Curve(specs) => {
            check_len("curve specs", specs.len(), sets.q())?;
            if let Some(bad) = specs.iter().find(|s| s.kind() != pk) {
                return Err(Error::InvalidPsiSpec(alloc::format!(
                    "curve for {} used on a {} instance",
                    bad.kind(),
                    pk
                )));
            }
        }
        StationarityKind::LinB => return Err(Error::Internal("linearized B-stationarity has no branch sets")),
        _ => {}
    }
    let mut out = Vec::with_capacity(sets.q());
    for (pos, &i) in sets.biactive.iter().enumerate() {
        let list = match (pk, kind) {
            (_, StationarityKind::Weak) => vec![branch(L::Unconstrained, vec![])],
            (_, StationarityKind::S) => vec![strong(pk)],
            (_, StationarityKind::M) => vec![
                strong(pk),
                branch(L::MuZero, vec![mu_eq()]),
                branch(L::NuZero, vec![nu_eq()]),
            ],
            (ProblemKind::Mpcc, StationarityKind::A) => {
                vec![branch(L::MuNonneg, vec![mu_ge()]), branch(L::NuNonneg, vec![nu_ge()])]
            }
            (ProblemKind::Mpvc, StationarityKind::A) => {
                vec![branch(L::MuZero, vec![mu_eq()]), branch(L::NuNonneg, vec![nu_ge()])]
            }
            (ProblemKind::Mpcc, StationarityKind::C) => {
                vec![strong(pk), branch(L::Nonpositive, vec![mu_le(), nu_le()])]
            }
            (ProblemKind::Mpvc, StationarityKind::C) => {
                vec![strong(pk), branch(L::NuNonpos, vec![nu_le()])]
            }
            (ProblemKind::Mpcc, StationarityKind::AAlpha(a)) => {
                if a.bit(i) {
                    vec![branch(L::NuNonneg, vec![nu_ge()])]
                } else {
                    vec![branch(L::MuNonneg, vec![mu_ge()])]
                }
            }
            (ProblemKind::Mpvc, StationarityKind::AAlpha(a)) => {
                if a.bit(i) {
                    vec![branch(L::NuNonneg, vec![nu_ge()])]
                } else {
                    vec![branch(L::MuZero, vec![mu_eq()])]
                }
            }
            (ProblemKind::Mpcc, StationarityKind::PAlpha(a)) => {
                if a.bit(i) {
                    vec![strong(pk), branch(L::NuZero, vec![nu_eq()])]
                } else {
                    vec![strong(pk), branch(L::MuZero, vec![mu_eq()])]
                }
            }
            (ProblemKind::Mpvc, StationarityKind::PAlpha(a)) => {
                if a.bit(i) {
                    vec![strong(pk), branch(L::NuZero, vec![nu_eq()])]
                } else {
                    vec![branch(L::MuZero, vec![mu_eq()])]
                }
            }
            (_, StationarityKind::PD(d)) => {
                let di = d.get(i).clone();
                let one_minus = Rational::one() - &di;
                // MPCC: (1-d)mu - d nu = 0, MPVC: (1-d)mu + d nu = 0
                let nu_coef = match pk {
                    ProblemKind::Mpcc => -di,
                    ProblemKind::Mpvc => di,
                };
                let line = PairRow {
                    mu_coef: one_minus,
                    nu_coef,
                    is_eq: true,
                    rhs: Rational::zero(),
                };
                let quadrant = match pk {
                    ProblemKind::Mpcc => vec![line, mu_le(), nu_le()],
                    ProblemKind::Mpvc => vec![line, mu_ge(), nu_le()],
                };
                vec![strong(pk), branch(L::Line, quadrant)]
            }
            (_, StationarityKind::Curve(specs)) => {
                let mut list = vec![strong(pk)];
                for (k, rows) in curve_pieces(&specs[pos])?.into_iter().enumerate() {
                    list.push(branch(L::CurveSegment(k), rows));
                }
                list
            }
            (_, StationarityKind::LinB) => unreachable!(),
        };
        out.push(list);
    }
    Ok(out)
}

fn add_pair_row(sys: &mut LinearSystem, lay: &Layout, i: usize, row: &PairRow) {
    let mut coeffs = vec![Rational::zero(); lay.len()];
    coeffs[lay.mu(i)] = row.mu_coef.clone();
    coeffs[lay.nu(i)] = row.nu_coef.clone();
    if row.is_eq {
        sys.add_eq(coeffs, row.rhs.clone());
    } else {
        sys.add_le(coeffs, row.rhs.clone());
    }
}

struct Search<'a> {
    lay: Layout,
    biactive: &'a [usize],
    branches: &'a [Vec<Branch>],
    chosen: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, sys: &LinearSystem, depth: usize) -> Result<Option<(Vec<Rational>, LinearSystem)>> {
        if depth == self.branches.len() {
            return Ok(match solve_feasibility(sys)? {
                LpOutcome::Feasible(w) => Some((w, sys.clone())),
                _ => None,
            });
        }
        let options = &self.branches[depth];
        for (k, b) in options.iter().enumerate() {
            let mut next = sys.clone();
            for row in &b.rows {
                add_pair_row(&mut next, &self.lay, self.biactive[depth], row);
            }
            let last = depth + 1 == self.branches.len();
            if options.len() > 1 && !last && !solve_feasibility(&next)?.is_feasible() {
                continue;
            }
            self.chosen.push(k);
            if let Some(found) = self.run(&next, depth + 1)? {
                return Ok(Some(found));
            }
            self.chosen.pop();
        }
        Ok(None)
    }
}

pub fn check(inst: &Instance, x: &CandidatePoint, kind: &StationarityKind) -> Result<Verdict> {
    check_with(inst, x, kind, &CheckOptions::default())
}

pub fn check_with(inst: &Instance, x: &CandidatePoint, kind: &StationarityKind, opts: &CheckOptions) -> Result<Verdict> {
    let sets = index_sets(inst, x)?;
    if sets.q() > opts.biactive_cap {
        return Err(Error::BiactiveCapExceeded {
            q: sets.q(),
            cap: opts.biactive_cap,
        });
    }
    if *kind == StationarityKind::LinB {
        return check_linb(inst, x, &sets);
    }
    let weak = build_weak_system(inst, x, &sets)?;
    check_system(inst, x, &sets, &weak, kind)
}

fn check_system(
    inst: &Instance,
    x: &CandidatePoint,
    sets: &IndexSets,
    weak: &LinearSystem,
    kind: &StationarityKind,
) -> Result<Verdict> {
    let lay = Layout::of(inst);
    let branches = branch_sets(inst, sets, kind)?;

    if let LpOutcome::Infeasible(cert) = solve_feasibility(weak)? {
        return Ok(Verdict::failed(kind.clone(), Some(cert)));
    }

    let conjunctive = branches.iter().all(|b| b.len() == 1);
    if conjunctive {
        let mut sys = weak.clone();
        for (b, &i) in branches.iter().zip(&sets.biactive) {
            for row in &b[0].rows {
                add_pair_row(&mut sys, &lay, i, row);
            }
        }
        return match solve_feasibility(&sys)? {
            LpOutcome::Feasible(w) => finish(inst, x, sets, kind, &lay, w, &sys, vec![0; branches.len()], &branches),
            LpOutcome::Infeasible(cert) => Ok(Verdict::failed(kind.clone(), Some(cert))),
            LpOutcome::Unbounded(_) => Err(Error::Internal("feasibility LP reported unbounded")),
        };
    }

    let mut search = Search {
        lay,
        biactive: &sets.biactive,
        branches: &branches,
        chosen: Vec::new(),
    };
    match search.run(weak, 0)? {
        Some((w, sys)) => {
            let chosen = search.chosen.clone();
            finish(inst, x, sets, kind, &lay, w, &sys, chosen, &branches)
        }
        None => Ok(Verdict::failed(kind.clone(), None)),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    inst: &Instance,
    x: &CandidatePoint,
    sets: &IndexSets,
    kind: &StationarityKind,
    lay: &Layout,
    w: Vec<Rational>,
    sys: &LinearSystem,
    chosen: Vec<usize>,
    branches: &[Vec<Branch>],
) -> Result<Verdict> {
    if !sys.is_satisfied_by(&w) {
        return Err(Error::Internal("branch witness violates its system"));
    }
    let witness = MultiplierVector::from_flat(&w, lay.l, lay.m, lay.p)?;
    if !satisfies_with_sets(inst, x, sets, kind, &witness)? {
        return Err(Error::Internal("branch witness fails the definitional check"));
    }
    let labels = chosen
        .iter()
        .zip(branches)
        .map(|(&k, b)| b[k].label.clone())
        .collect();
    Ok(Verdict {
        kind: kind.clone(),
        holds: true,
        witness: Some(witness),
        branches: Some(labels),
        certificate: None,
        failed_pattern: None,
    })
}

fn check_linb(inst: &Instance, x: &CandidatePoint, sets: &IndexSets) -> Result<Verdict> {
    let (_, _, p) = inst.sizes();
    let weak = build_weak_system(inst, x, sets)?;
    let mut first = None;
    for alpha in sets.alpha_patterns(p) {
        let v = check_system(inst, x, sets, &weak, &StationarityKind::AAlpha(alpha.clone()))?;
        if !v.holds {
            return Ok(Verdict {
                kind: StationarityKind::LinB,
                holds: false,
                witness: None,
                branches: None,
                certificate: v.certificate,
                failed_pattern: Some(alpha),
            });
        }
        if first.is_none() {
            first = Some(v);
        }
    }
    let first = first.ok_or(Error::Internal("no alpha patterns"))?;
    Ok(Verdict {
        kind: StationarityKind::LinB,
        holds: true,
        witness: first.witness,
        branches: None,
        certificate: None,
        failed_pattern: None,
    })
}

/// Linearized B-stationarity through the cone route: `-grad f` lies in the polar of the
/// linearized cone.
pub fn linb_via_cones(inst: &Instance, x: &CandidatePoint) -> Result<bool> {
    let u = linearized_cone(inst, x)?;
    let minus_grad: Vec<Rational> = inst
        .objective()
        .gradient_at(x.coords())?
        .into_iter()
        .map(|v| -v)
        .collect();
    Ok(polar_union(&u).contains(&minus_grad))
}

/// Checks a multiplier vector against the definition of `kind` directly, with exact
/// arithmetic. LinB is not a multiplier condition and is rejected.
pub fn satisfies(inst: &Instance, x: &CandidatePoint, kind: &StationarityKind, w: &MultiplierVector<Rational>) -> Result<bool> {
    let sets = index_sets(inst, x)?;
    satisfies_with_sets(inst, x, &sets, kind, w)
}

fn satisfies_with_sets(
    inst: &Instance,
    x: &CandidatePoint,
    sets: &IndexSets,
    kind: &StationarityKind,
    w: &MultiplierVector<Rational>,
) -> Result<bool> {
    w.check_sizes(inst)?;
    if !weak_holds(inst, x, sets, w)? {
        return Ok(false);
    }
    let pk = inst.kind();
    let z = |v: &Rational| v.is_zero();
    let nn = |v: &Rational| !v.is_negative();
    for (pos, &i) in sets.biactive.iter().enumerate() {
        let (mu, nu) = (&w.mu[i], &w.nu[i]);
        let s = match pk {
            ProblemKind::Mpcc => nn(mu) && nn(nu),
            ProblemKind::Mpvc => z(mu) && nn(nu),
        };
        let ok = match (pk, kind) {
            (_, StationarityKind::Weak) => true,
            (_, StationarityKind::S) => s,
            (ProblemKind::Mpcc, StationarityKind::A) => nn(mu) || nn(nu),
            (ProblemKind::Mpvc, StationarityKind::A) => z(mu) || nn(nu),
            (ProblemKind::Mpcc, StationarityKind::C) => !(mu * nu).is_negative(),
            (ProblemKind::Mpvc, StationarityKind::C) => !(mu * nu).is_positive(),
            (ProblemKind::Mpcc, StationarityKind::M) => s || z(&(mu * nu)),
            (ProblemKind::Mpvc, StationarityKind::M) => z(&(mu * nu)),
            (ProblemKind::Mpcc, StationarityKind::AAlpha(a)) => {
                if a.bit(i) {
                    nn(nu)
                } else {
                    nn(mu)
                }
            }
            (ProblemKind::Mpvc, StationarityKind::AAlpha(a)) => {
                if a.bit(i) {
                    nn(nu)
                } else {
                    z(mu)
                }
            }
            (ProblemKind::Mpcc, StationarityKind::PAlpha(a)) => s || if a.bit(i) { z(nu) } else { z(mu) },
            (ProblemKind::Mpvc, StationarityKind::PAlpha(a)) => {
                if a.bit(i) {
                    s || z(nu)
                } else {
                    z(mu)
                }
            }
            (ProblemKind::Mpcc, StationarityKind::PD(d)) => {
                let di = d.get(i);
                s || (Rational::one() - di) * mu == di * nu
            }
            (ProblemKind::Mpvc, StationarityKind::PD(d)) => {
                let di = d.get(i);
                s || (Rational::one() - di) * mu == -(di * nu)
            }
            (_, StationarityKind::Curve(specs)) => {
                let spec = specs.get(pos).ok_or(Error::LengthMismatch {
                    what: "curve specs",
                    expected: sets.q(),
                    found: specs.len(),
                })?;
                s || curve_contains(spec, mu, nu)?
            }
            (_, StationarityKind::LinB) => {
                return Err(Error::Internal("linearized B-stationarity is not a multiplier condition"))
            }
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact check of the weak stationarity system, straight from the definitions.
pub fn weak_holds(inst: &Instance, x: &CandidatePoint, sets: &IndexSets, w: &MultiplierVector<Rational>) -> Result<bool> {
    w.check_sizes(inst)?;
    let xs = x.coords();
    let mut residual = inst.objective().gradient_at(xs)?;
    let mut acc = |coef: &Rational, grad: Vec<Rational>| {
        for (r, g) in residual.iter_mut().zip(grad) {
            *r += coef * g;
        }
    };
    for (c, g) in w.lambda.iter().zip(inst.ineq()) {
        acc(c, g.gradient_at(xs)?);
    }
    for (c, h) in w.eta.iter().zip(inst.eq()) {
        acc(c, h.gradient_at(xs)?);
    }
    let mu_sign = match inst.kind() {
        ProblemKind::Mpcc => -Rational::one(),
        ProblemKind::Mpvc => Rational::one(),
    };
    for (c, g) in w.mu.iter().zip(inst.gfun()) {
        acc(&(&mu_sign * c), g.gradient_at(xs)?);
    }
    for (c, h) in w.nu.iter().zip(inst.hfun()) {
        acc(&-c.clone(), h.gradient_at(xs)?);
    }
    if !residual.iter().all(Zero::is_zero) {
        return Ok(false);
    }
    let (l, _, _) = inst.sizes();
    for i in 0..l {
        let ok = if sets.active_g.contains(&i) {
            !w.lambda[i].is_negative()
        } else {
            w.lambda[i].is_zero()
        };
        if !ok {
            return Ok(false);
        }
    }
    let zero_on = |v: &[Rational], idx: &[usize]| idx.iter().all(|&i| v[i].is_zero());
    let nonneg_on = |v: &[Rational], idx: &[usize]| idx.iter().all(|&i| !v[i].is_negative());
    let ok = match inst.kind() {
        ProblemKind::Mpcc => zero_on(&w.mu, &sets.plus_zero) && zero_on(&w.nu, &sets.zero_plus),
        ProblemKind::Mpvc => {
            zero_on(&w.mu, &sets.plus_zero)
                && zero_on(&w.mu, &sets.minus_zero)
                && zero_on(&w.mu, &sets.minus_plus)
                && nonneg_on(&w.mu, &sets.zero_plus)
                && nonneg_on(&w.mu, &sets.biactive)
                && zero_on(&w.nu, &sets.zero_plus)
                && zero_on(&w.nu, &sets.minus_plus)
                && nonneg_on(&w.nu, &sets.minus_zero)
        }
    };
    Ok(ok)
}

/// All verdicts at one point plus implication-lattice consistency flags.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeReport {
    pub kind: ProblemKind,
    pub q: usize,
    pub weak: Verdict,
    pub a: Verdict,
    pub c: Verdict,
    pub m: Verdict,
    pub s: Verdict,
    pub linb: Verdict,
    pub linb_cone: bool,
    pub a_alpha: Vec<(AlphaPattern, Verdict)>,
    pub p_alpha: Vec<(AlphaPattern, Verdict)>,
    pub p_d: Vec<(DVector, Verdict)>,
    pub flags: Vec<(String, bool)>,
}

impl LatticeReport {
    pub fn consistent(&self) -> bool {
        self.flags.iter().all(|(_, ok)| *ok)
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

fn implies(a: bool, b: bool) -> bool {
    !a || b
}

pub fn classify_all(inst: &Instance, x: &CandidatePoint, d_samples: &[DVector]) -> Result<LatticeReport> {
    classify_all_with(inst, x, d_samples, &CheckOptions::default())
}

pub fn classify_all_with(
    inst: &Instance,
    x: &CandidatePoint,
    d_samples: &[DVector],
    opts: &CheckOptions,
) -> Result<LatticeReport> {
    let sets = index_sets(inst, x)?;
    if sets.q() > opts.biactive_cap {
        return Err(Error::BiactiveCapExceeded {
            q: sets.q(),
            cap: opts.biactive_cap,
        });
    }
    let (_, _, p) = inst.sizes();
    let weak_sys = build_weak_system(inst, x, &sets)?;
    let run = |k: StationarityKind| check_system(inst, x, &sets, &weak_sys, &k);

    let weak = run(StationarityKind::Weak)?;
    let a = run(StationarityKind::A)?;
    let c = run(StationarityKind::C)?;
    let m = run(StationarityKind::M)?;
    let s = run(StationarityKind::S)?;
    let patterns = sets.alpha_patterns(p);
    let mut a_alpha = Vec::with_capacity(patterns.len());
    let mut p_alpha = Vec::with_capacity(patterns.len());
    for alpha in &patterns {
        a_alpha.push((alpha.clone(), run(StationarityKind::AAlpha(alpha.clone()))?));
        p_alpha.push((alpha.clone(), run(StationarityKind::PAlpha(alpha.clone()))?));
    }
    let mut p_d = Vec::with_capacity(d_samples.len());
    for d in d_samples {
        p_d.push((d.clone(), run(StationarityKind::PD(d.clone()))?));
    }
    let linb = check_linb(inst, x, &sets)?;
    let linb_cone = linb_via_cones(inst, x)?;

    let all_a_alpha = a_alpha.iter().all(|(_, v)| v.holds);
    let any_a_alpha = a_alpha.iter().any(|(_, v)| v.holds);
    let all_p_alpha = p_alpha.iter().all(|(_, v)| v.holds);
    let any_p_alpha = p_alpha.iter().any(|(_, v)| v.holds);
    let all_p_d = p_d.iter().all(|(_, v)| v.holds);

    let mut flags: Vec<(String, bool)> = Vec::new();
    let mut flag = |name: &str, ok: bool| flags.push((String::from(name), ok));
    flag(
        "strong_implies_all",
        implies(
            s.holds,
            weak.holds && a.holds && c.holds && m.holds && linb.holds && all_a_alpha && all_p_alpha && all_p_d,
        ),
    );
    flag(
        "chain_s_m_a_w",
        implies(s.holds, m.holds) && implies(m.holds, a.holds) && implies(a.holds, weak.holds),
    );
    flag("m_implies_c", implies(m.holds, c.holds) && implies(c.holds, weak.holds));
    flag(
        "p_alpha_implies_a_alpha",
        p_alpha
            .iter()
            .zip(&a_alpha)
            .all(|((_, pv), (_, av))| implies(pv.holds, av.holds)),
    );
    flag(
        "p_d_between_s_and_c",
        p_d.iter().all(|(_, v)| implies(s.holds, v.holds) && implies(v.holds, c.holds)),
    );
    flag("m_iff_some_p_alpha", m.holds == any_p_alpha);
    flag("a_iff_some_a_alpha", a.holds == any_a_alpha);
    flag("linb_iff_all_a_alpha", linb.holds == all_a_alpha);
    flag("linb_iff_all_p_alpha", linb.holds == all_p_alpha);
    flag("linb_matches_cones", linb.holds == linb_cone);
    flag("linb_implies_p_d", implies(linb.holds, all_p_d));
    if inst.kind() == ProblemKind::Mpvc {
        let a_zero = a_alpha.first().map(|(_, v)| v.holds).unwrap_or(false);
        flag("mpvc_a0_implies_m", implies(a_zero, m.holds));
    }

    Ok(LatticeReport {
        kind: inst.kind(),
        q: sets.q(),
        weak,
        a,
        c,
        m,
        s,
        linb,
        linb_cone,
        a_alpha,
        p_alpha,
        p_d,
        flags,
    })
}

/// The grid `{0, 1/k, ..., 1}` on the biactive coordinates (non-biactive entries are 0),
/// in lexicographic order.
pub fn d_grid(sets: &IndexSets, p: usize, k: u32) -> Vec<DVector> {
    let steps: Vec<Rational> = (0..=k)
        .map(|j| Rational::new(i64::from(j).into(), i64::from(k.max(1)).into()))
        .collect();
    let q = sets.q();
    let total = (steps.len()).pow(q as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut entries = vec![Rational::zero(); p];
        let mut rest = idx;
        for pos in (0..q).rev() {
            entries[sets.biactive[pos]] = steps[rest % steps.len()].clone();
            rest /= steps.len();
        }
        out.push(DVector::new(entries).expect("grid entries lie in [0,1]"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::rational::int;

    fn origin_mpcc(f: Polynomial) -> (Instance, CandidatePoint) {
        let inst = Instance::new(
            ProblemKind::Mpcc,
            2,
            f,
            vec![],
            vec![],
            vec![Polynomial::var(2, 0)],
            vec![Polynomial::var(2, 1)],
        )
        .unwrap();
        (inst, CandidatePoint::new(vec![int(0), int(0)]))
    }

    fn x1() -> Polynomial {
        Polynomial::var(2, 0)
    }
    fn x2() -> Polynomial {
        Polynomial::var(2, 1)
    }

    #[test]
    fn strong_at_sum_objective() {
        let (inst, x) = origin_mpcc(&x1() + &x2());
        let v = check(&inst, &x, &StationarityKind::S).unwrap();
        assert!(v.holds);
        let w = v.witness.unwrap();
        assert_eq!((w.mu[0].clone(), w.nu[0].clone()), (int(1), int(1)));
    }

    #[test]
    fn difference_objective_is_not_m_stationary() {
        let (inst, x) = origin_mpcc(&x1() - &x2());
        assert!(!check(&inst, &x, &StationarityKind::M).unwrap().holds);
        let a0 = check(&inst, &x, &StationarityKind::AAlpha(AlphaPattern::new(vec![false]))).unwrap();
        assert!(a0.holds);
        assert_eq!(a0.witness.unwrap().nu[0], int(-1));
        let a1 = check(&inst, &x, &StationarityKind::AAlpha(AlphaPattern::new(vec![true]))).unwrap();
        assert!(!a1.holds);
        let cert = a1.certificate.expect("single LP failure carries a certificate");
        let sets = index_sets(&inst, &x).unwrap();
        let mut sys = build_weak_system(&inst, &x, &sets).unwrap();
        add_pair_row(&mut sys, &Layout::of(&inst), 0, &nu_ge());
        assert!(cert.verify(&sys));
        assert!(!check(&inst, &x, &StationarityKind::LinB).unwrap().holds);
        assert!(!linb_via_cones(&inst, &x).unwrap());
    }

    #[test]
    fn unconstrained_weak_system() {
        let inst = Instance::new(ProblemKind::Mpcc, 1, Polynomial::var(1, 0).pow(2), vec![], vec![], vec![], vec![]).unwrap();
        let x = CandidatePoint::new(vec![int(0)]);
        assert!(check(&inst, &x, &StationarityKind::S).unwrap().holds);
        let x = CandidatePoint::new(vec![int(1)]);
        let v = check(&inst, &x, &StationarityKind::Weak).unwrap();
        assert!(!v.holds);
        assert!(v.certificate.is_some());
    }

    #[test]
    fn mpvc_weak_on_vanishing_example() {
        let inst = Instance::new(
            ProblemKind::Mpvc,
            2,
            x2(),
            vec![],
            vec![&x2().pow(2) - &x1()],
            vec![x1()],
            vec![x2()],
        )
        .unwrap();
        let x = CandidatePoint::new(vec![int(0), int(0)]);
        let v = check(&inst, &x, &StationarityKind::Weak).unwrap();
        assert!(v.holds);
        let w = v.witness.unwrap();
        assert_eq!(w.nu[0], int(1));
        assert!(!w.mu[0].is_negative());
    }

    #[test]
    fn cap_is_enforced() {
        let (inst, x) = origin_mpcc(&x1() + &x2());
        let opts = CheckOptions { biactive_cap: 0 };
        assert_eq!(
            check_with(&inst, &x, &StationarityKind::S, &opts),
            Err(Error::BiactiveCapExceeded { q: 1, cap: 0 })
        );
    }

    #[test]
    fn lattice_on_difference_objective() {
        let (inst, x) = origin_mpcc(&x1() - &x2());
        let sets = index_sets(&inst, &x).unwrap();
        let ds = d_grid(&sets, 1, 4);
        let r = classify_all(&inst, &x, &ds).unwrap();
        assert!(r.consistent(), "{:?}", r.flags);
        assert!(r.a.holds && !r.c.holds && !r.m.holds);
    }
}
