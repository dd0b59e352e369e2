//! Polyhedral cones, finite unions of them, and the linearized cones of MPCCs/MPVCs.
//!
//! A [`PolyCone`] is stored by halfspaces `a.d <= 0` and equalities `b.d = 0`. The generator
//! form (extreme rays plus a lineality basis) is computed on demand with the double
//! description method. Polars swap the two forms, so taking a polar never needs a
//! conversion by itself.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::instance::{index_sets, AlphaPattern, CandidatePoint, IndexSets, Instance, ProblemKind};
use crate::lp::{solve_feasibility, LinearSystem};
use crate::rational::{dot, is_zero_vec, primitive, Rational};

/// Generator form of a cone: `cone(rays) + span(lineality)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generators {
    pub rays: Vec<Vec<Rational>>,
    pub lineality: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyCone {
    dim: usize,
    halfspaces: Vec<Vec<Rational>>,
    equalities: Vec<Vec<Rational>>,
    generators: Option<Generators>,
}

impl PolyCone {
    pub fn new(dim: usize, halfspaces: Vec<Vec<Rational>>, equalities: Vec<Vec<Rational>>) -> Result<Self> {
        for v in halfspaces.iter().chain(&equalities) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            dim,
            halfspaces,
            equalities,
            generators: None,
        })
    }

    pub fn full(dim: usize) -> Self {
        Self {
            dim,
            halfspaces: Vec::new(),
            equalities: Vec::new(),
            generators: None,
        }
    }

    /// The cone `{0}`.
    pub fn origin(dim: usize) -> Self {
        let equalities = (0..dim).map(|k| unit(dim, k)).collect();
        Self {
            dim,
            halfspaces: Vec::new(),
            equalities,
            generators: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Vec<Rational>] {
        &self.halfspaces
    }

    pub fn equalities(&self) -> &[Vec<Rational>] {
        &self.equalities
    }

    pub fn cached_generators(&self) -> Option<&Generators> {
        self.generators.as_ref()
    }

    /// Generator form, from the cache or by double description.
    pub fn generators(&self) -> Generators {
        match &self.generators {
            Some(g) => g.clone(),
            None => double_description(self.dim, &self.halfspaces, &self.equalities),
        }
    }

    /// Returns the same cone with its generator form cached.
    pub fn with_generators(mut self) -> Self {
        if self.generators.is_none() {
            self.generators = Some(self.generators());
        }
        self
    }

    pub fn contains(&self, d: &[Rational]) -> bool {
        d.len() == self.dim
            && self.halfspaces.iter().all(|a| !dot(a, d).is_positive())
            && self.equalities.iter().all(|b| dot(b, d).is_zero())
    }

    /// `other ⊆ self`, decided by testing the generators of `other`.
    pub fn contains_cone(&self, other: &PolyCone) -> bool {
        let g = other.generators();
        g.rays.iter().all(|r| self.contains(r))
            && g.lineality.iter().all(|l| {
                let neg: Vec<Rational> = l.iter().map(|x| -x.clone()).collect();
                self.contains(l) && self.contains(&neg)
            })
    }

    pub fn intersect(&self, other: &PolyCone) -> Result<PolyCone> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut halfspaces = self.halfspaces.clone();
        halfspaces.extend(other.halfspaces.iter().cloned());
        let mut equalities = self.equalities.clone();
        equalities.extend(other.equalities.iter().cloned());
        PolyCone::new(self.dim, halfspaces, equalities)
    }

    /// Linear rows describing the cone, as a system over `d`.
    pub fn as_system(&self) -> LinearSystem {
        let mut sys = LinearSystem::new(self.dim);
        for b in &self.equalities {
            sys.add_eq(b.clone(), Rational::zero());
        }
        for a in &self.halfspaces {
            sys.add_le(a.clone(), Rational::zero());
        }
        sys
    }

    /// Some `d` in the cone with `v.d > 0`, if one exists.
    fn has_positive_direction(&self, extra: &[Vec<Rational>]) -> bool {
        let mut sys = self.as_system();
        for v in extra {
            sys.add_ge(v.clone(), Rational::one());
        }
        matches!(solve_feasibility(&sys), Ok(out) if out.is_feasible())
    }
}

fn unit(dim: usize, k: usize) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); dim];
    v[k] = Rational::one();
    v
}

fn sub_scaled(target: &mut [Rational], c: &Rational, v: &[Rational]) {
    if c.is_zero() {
        return;
    }
    for (t, x) in target.iter_mut().zip(v) {
        *t -= c * x;
    }
}

/// Double description conversion from `{a.d <= 0, b.d = 0}` to generators.
///
/// Equalities are processed first, then halfspaces, each in input order. Extreme-ray
/// adjacency uses the combinatorial test on tight-constraint sets.
pub fn double_description(dim: usize, halfspaces: &[Vec<Rational>], equalities: &[Vec<Rational>]) -> Generators {
    let mut lineality: Vec<Vec<Rational>> = (0..dim).map(|k| unit(dim, k)).collect();
    let mut rays: Vec<(Vec<Rational>, BTreeSet<usize>)> = Vec::new();
    let constraints = equalities
        .iter()
        .map(|v| (v, true))
        .chain(halfspaces.iter().map(|v| (v, false)));

    for (k, (v, is_eq)) in constraints.enumerate() {
        if let Some(pos) = lineality.iter().position(|l| !dot(v, l).is_zero()) {
            let l = lineality.remove(pos);
            let s = dot(v, &l);
            for other in lineality.iter_mut() {
                let c = dot(v, other) / &s;
                sub_scaled(other, &c, &l);
            }
            for (r, tight) in rays.iter_mut() {
                let c = dot(v, r) / &s;
                sub_scaled(r, &c, &l);
                *r = primitive(r);
                tight.insert(k);
            }
            if !is_eq {
                let ray: Vec<Rational> = if s.is_positive() {
                    l.iter().map(|x| -x.clone()).collect()
                } else {
                    l
                };
                rays.push((primitive(&ray), (0..k).collect()));
            }
            continue;
        }

        let vals: Vec<Rational> = rays.iter().map(|(r, _)| dot(v, r)).collect();
        let mut next: Vec<(Vec<Rational>, BTreeSet<usize>)> = Vec::new();
        for (i, (r, tight)) in rays.iter().enumerate() {
            if vals[i].is_zero() {
                let mut t = tight.clone();
                t.insert(k);
                next.push((r.clone(), t));
            } else if vals[i].is_negative() && !is_eq {
                next.push((r.clone(), tight.clone()));
            }
        }
        for (i, (rp, tp)) in rays.iter().enumerate() {
            if !vals[i].is_positive() {
                continue;
            }
            for (j, (rn, tn)) in rays.iter().enumerate() {
                if !vals[j].is_negative() {
                    continue;
                }
                let common: BTreeSet<usize> = tp.intersection(tn).copied().collect();
                let blocked = rays
                    .iter()
                    .enumerate()
                    .any(|(h, (_, th))| h != i && h != j && common.is_subset(th));
                if blocked {
                    continue;
                }
                let combo: Vec<Rational> = rn
                    .iter()
                    .zip(rp)
                    .map(|(a, b)| &vals[i] * a - &vals[j] * b)
                    .collect();
                if is_zero_vec(&combo) {
                    continue;
                }
                let mut t = common;
                t.insert(k);
                next.push((primitive(&combo), t));
            }
        }
        rays = next;
    }

    let mut out: Vec<Vec<Rational>> = Vec::new();
    for (r, _) in rays {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    let lineality = lineality.into_iter().map(|l| primitive(&l)).collect();
    Generators { rays: out, lineality }
}

/// Polar cone. The result caches its generators (the input's constraint normals).
pub fn polar(c: &PolyCone) -> PolyCone {
    let g = c.generators();
    PolyCone {
        dim: c.dim,
        halfspaces: g.rays,
        equalities: g.lineality,
        generators: Some(Generators {
            rays: c.halfspaces.clone(),
            lineality: c.equalities.clone(),
        }),
    }
}

/// `d ∈ C°`, tested against the generators of `C`.
pub fn in_polar(c: &PolyCone, d: &[Rational]) -> bool {
    let g = c.generators();
    g.rays.iter().all(|y| !dot(d, y).is_positive()) && g.lineality.iter().all(|l| dot(d, l).is_zero())
}

/// Mutual containment.
pub fn cone_equal(a: &PolyCone, b: &PolyCone) -> Result<bool> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(a.contains_cone(b) && b.contains_cone(a))
}

/// A nonempty finite union of polyhedral cones of one dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnionCone {
    pieces: Vec<PolyCone>,
}

impl UnionCone {
    pub fn new(pieces: Vec<PolyCone>) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::MalformedInstance("union cone needs at least one piece".into()));
        };
        let dim = first.dim;
        if let Some(bad) = pieces.iter().find(|p| p.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim,
            });
        }
        Ok(Self { pieces })
    }

    pub fn single(piece: PolyCone) -> Self {
        Self { pieces: vec![piece] }
    }

    pub fn pieces(&self) -> &[PolyCone] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].dim
    }

    pub fn contains(&self, d: &[Rational]) -> bool {
        self.pieces.iter().any(|p| p.contains(d))
    }

    /// `c ⊆ ∪ pieces`, decided exactly.
    ///
    /// A point of `c` outside the union violates one constraint of every piece; each such
    /// choice of violated constraints is tested as an LP (cones scale, so `v.d > 0`
    /// becomes `v.d >= 1`).
    pub fn contains_cone(&self, c: &PolyCone) -> bool {
        if self.pieces.iter().any(|p| p.contains_cone(c)) {
            return true;
        }
        let mut options: Vec<Vec<Vec<Rational>>> = Vec::with_capacity(self.pieces.len());
        for piece in &self.pieces {
            let mut violations = Vec::new();
            for a in &piece.halfspaces {
                violations.push(a.clone());
            }
            for b in &piece.equalities {
                violations.push(b.clone());
                violations.push(b.iter().map(|x| -x.clone()).collect());
            }
            violations.retain(|v| c.has_positive_direction(core::slice::from_ref(v)));
            if violations.is_empty() {
                return true;
            }
            options.push(violations);
        }
        !exists_joint_violation(c, &options, &mut Vec::new())
    }
}

fn exists_joint_violation(c: &PolyCone, options: &[Vec<Vec<Rational>>], chosen: &mut Vec<Vec<Rational>>) -> bool {
    let depth = chosen.len();
    if depth == options.len() {
        return true;
    }
    for v in &options[depth] {
        chosen.push(v.clone());
        let ok = c.has_positive_direction(chosen) && exists_joint_violation(c, options, chosen);
        chosen.pop();
        if ok {
            return true;
        }
    }
    false
}

/// Set equality of two unions.
pub fn union_equal(a: &UnionCone, b: &UnionCone) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.pieces.iter().all(|p| b.contains_cone(p)) && b.pieces.iter().all(|p| a.contains_cone(p)))
}

/// Polar of a union: the intersection of the polars of its pieces.
pub fn polar_union(u: &UnionCone) -> PolyCone {
    let dim = u.dim();
    let mut halfspaces = Vec::new();
    let mut equalities = Vec::new();
    for piece in &u.pieces {
        let g = piece.generators();
        halfspaces.extend(g.rays);
        equalities.extend(g.lineality);
    }
    PolyCone {
        dim,
        halfspaces,
        equalities,
        generators: None,
    }
}

struct Gradients {
    g: Vec<Vec<Rational>>,
    h: Vec<Vec<Rational>>,
    big_g: Vec<Vec<Rational>>,
    big_h: Vec<Vec<Rational>>,
}

fn gradients(inst: &Instance, x: &CandidatePoint) -> Result<Gradients> {
    let at = |ps: &[crate::poly::Polynomial]| -> Result<Vec<Vec<Rational>>> {
        ps.iter().map(|p| p.gradient_at(x.coords())).collect()
    };
    Ok(Gradients {
        g: at(inst.ineq())?,
        h: at(inst.eq())?,
        big_g: at(inst.gfun())?,
        big_h: at(inst.hfun())?,
    })
}

fn neg(v: &[Rational]) -> Vec<Rational> {
    v.iter().map(|x| -x.clone()).collect()
}

fn nlp_cone_from(inst: &Instance, sets: &IndexSets, grads: &Gradients, alpha: &AlphaPattern) -> PolyCone {
    let mut halfspaces = Vec::new();
    let mut equalities = Vec::new();
    for &i in &sets.active_g {
        halfspaces.push(grads.g[i].clone());
    }
    equalities.extend(grads.h.iter().cloned());
    match inst.kind() {
        ProblemKind::Mpcc => {
            for &i in &sets.plus_zero {
                equalities.push(grads.big_h[i].clone());
            }
            for &i in &sets.zero_plus {
                equalities.push(grads.big_g[i].clone());
            }
            for &i in &sets.biactive {
                if alpha.bit(i) {
                    equalities.push(grads.big_g[i].clone());
                    halfspaces.push(neg(&grads.big_h[i]));
                } else {
                    halfspaces.push(neg(&grads.big_g[i]));
                    equalities.push(grads.big_h[i].clone());
                }
            }
        }
        ProblemKind::Mpvc => {
            for &i in &sets.plus_zero {
                equalities.push(grads.big_h[i].clone());
            }
            for &i in &sets.zero_plus {
                halfspaces.push(grads.big_g[i].clone());
            }
            for &i in &sets.minus_zero {
                halfspaces.push(neg(&grads.big_h[i]));
            }
            for &i in &sets.biactive {
                if alpha.bit(i) {
                    halfspaces.push(grads.big_g[i].clone());
                    halfspaces.push(neg(&grads.big_h[i]));
                } else {
                    equalities.push(grads.big_h[i].clone());
                }
            }
        }
    }
    PolyCone {
        dim: inst.dim(),
        halfspaces,
        equalities,
        generators: None,
    }
}

/// Standard linearization cone of the auxiliary problem NLP(alpha) at `x`.
pub fn linearized_cone_nlp(inst: &Instance, x: &CandidatePoint, alpha: &AlphaPattern) -> Result<PolyCone> {
    let (_, _, p) = inst.sizes();
    if alpha.len() != p {
        return Err(Error::LengthMismatch {
            what: "alpha pattern",
            expected: p,
            found: alpha.len(),
        });
    }
    let sets = index_sets(inst, x)?;
    let grads = gradients(inst, x)?;
    Ok(nlp_cone_from(inst, &sets, &grads, alpha))
}

/// The problem-tailored linearized cone as a union over biactive patterns, in
/// [`IndexSets::alpha_patterns`] order.
pub fn linearized_cone(inst: &Instance, x: &CandidatePoint) -> Result<UnionCone> {
    let sets = index_sets(inst, x)?;
    let grads = gradients(inst, x)?;
    let (_, _, p) = inst.sizes();
    let pieces = sets
        .alpha_patterns(p)
        .iter()
        .map(|a| nlp_cone_from(inst, &sets, &grads, a))
        .collect();
    Ok(UnionCone { pieces })
}

pub fn linearized_cone_mpcc(inst: &Instance, x: &CandidatePoint) -> Result<UnionCone> {
    if inst.kind() != ProblemKind::Mpcc {
        return Err(Error::MalformedInstance("expected an MPCC instance".into()));
    }
    linearized_cone(inst, x)
}

pub fn linearized_cone_mpvc(inst: &Instance, x: &CandidatePoint) -> Result<UnionCone> {
    if inst.kind() != ProblemKind::Mpvc {
        return Err(Error::MalformedInstance("expected an MPVC instance".into()));
    }
    linearized_cone(inst, x)
}

/// Membership in the linearized cone straight from its sign-condition definition,
/// without the per-pattern decomposition.
pub fn in_linearized_cone_direct(inst: &Instance, x: &CandidatePoint, d: &[Rational]) -> Result<bool> {
    let sets = index_sets(inst, x)?;
    let grads = gradients(inst, x)?;
    if d.len() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            found: d.len(),
        });
    }
    let zero = Rational::zero();
    let gd = |i: usize| dot(&grads.big_g[i], d);
    let hd = |i: usize| dot(&grads.big_h[i], d);
    let mut ok = sets.active_g.iter().all(|&i| dot(&grads.g[i], d) <= zero)
        && grads.h.iter().all(|v| dot(v, d).is_zero());
    ok &= match inst.kind() {
        ProblemKind::Mpcc => {
            sets.zero_plus.iter().all(|&i| gd(i).is_zero())
                && sets.plus_zero.iter().all(|&i| hd(i).is_zero())
                && sets.biactive.iter().all(|&i| {
                    let (a, b) = (gd(i), hd(i));
                    a >= zero && b >= zero && (&a * &b).is_zero()
                })
        }
        ProblemKind::Mpvc => {
            sets.zero_plus.iter().all(|&i| gd(i) <= zero)
                && sets.plus_zero.iter().all(|&i| hd(i).is_zero())
                && sets.biactive.iter().chain(&sets.minus_zero).all(|&i| hd(i) >= zero)
                && sets.biactive.iter().all(|&i| &gd(i) * &hd(i) <= zero)
        }
    };
    Ok(ok)
}

/// Tangent cones supplied for instances whose tangent cones cannot be computed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TangentFixture {
    /// Tangent cone of the MPCC/MPVC feasible set.
    pub tangent: UnionCone,
    /// Tangent cone of the feasible set of NLP(0).
    pub nlp0_tangent: UnionCone,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CqReport {
    /// MPCC-GCQ or MPVC-GCQ, according to the instance kind.
    pub gcq: bool,
    pub acq: bool,
    pub gcq_nlp0: bool,
    pub linearized: UnionCone,
    pub nlp0_linearized: PolyCone,
    pub tangent: UnionCone,
    pub nlp0_tangent: UnionCone,
    pub from_fixture: bool,
}

/// Guignard- and Abadie-type checks. With affine constraint data the tangent cones equal
/// the linearized ones piecewise; otherwise `fixture` must supply them.
pub fn check_gcq(inst: &Instance, x: &CandidatePoint, fixture: Option<&TangentFixture>) -> Result<CqReport> {
    let linearized = linearized_cone(inst, x)?;
    let (_, _, p) = inst.sizes();
    let nlp0_linearized = linearized_cone_nlp(inst, x, &AlphaPattern::zeros(p))?;
    let (tangent, nlp0_tangent, from_fixture) = match fixture {
        Some(f) => (f.tangent.clone(), f.nlp0_tangent.clone(), true),
        None if inst.has_affine_constraints() => (
            linearized.clone(),
            UnionCone::single(nlp0_linearized.clone()),
            false,
        ),
        None => return Err(Error::NonlinearWithoutFixture),
    };
    let gcq = cone_equal(&polar_union(&tangent), &polar_union(&linearized))?;
    let acq = union_equal(&tangent, &linearized)?;
    let gcq_nlp0 = cone_equal(&polar_union(&nlp0_tangent), &polar(&nlp0_linearized))?;
    Ok(CqReport {
        gcq,
        acq,
        gcq_nlp0,
        linearized,
        nlp0_linearized,
        tangent,
        nlp0_tangent,
        from_fixture,
    })
}
