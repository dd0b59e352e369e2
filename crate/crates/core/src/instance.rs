//! Problem instances, candidate points and index sets.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// `G(x) >= 0, H(x) >= 0, G(x)^T H(x) = 0`
    Mpcc,
    /// `H_i(x) >= 0, G_i(x) H_i(x) <= 0`
    Mpvc,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Mpcc => "mpcc",
            ProblemKind::Mpvc => "mpvc",
        })
    }
}

/// An MPCC or MPVC with polynomial data.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    kind: ProblemKind,
    n: usize,
    objective: Polynomial,
    ineq: Vec<Polynomial>,
    eq: Vec<Polynomial>,
    gfun: Vec<Polynomial>,
    hfun: Vec<Polynomial>,
}

impl Instance {
    pub fn new(
        kind: ProblemKind,
        n: usize,
        objective: Polynomial,
        ineq: Vec<Polynomial>,
        eq: Vec<Polynomial>,
        gfun: Vec<Polynomial>,
        hfun: Vec<Polynomial>,
    ) -> Result<Self> {
        if gfun.len() != hfun.len() {
            return Err(Error::MalformedInstance(format!(
                "G has {} components but H has {}",
                gfun.len(),
                hfun.len()
            )));
        }
        let all = core::iter::once(&objective)
            .chain(&ineq)
            .chain(&eq)
            .chain(&gfun)
            .chain(&hfun);
        for poly in all {
            if poly.arity() != n {
                return Err(Error::MalformedInstance(format!(
                    "polynomial of arity {} in an instance of dimension {}",
                    poly.arity(),
                    n
                )));
            }
        }
        Ok(Self {
            kind,
            n,
            objective,
            ineq,
            eq,
            gfun,
            hfun,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn ineq(&self) -> &[Polynomial] {
        &self.ineq
    }

    pub fn eq(&self) -> &[Polynomial] {
        &self.eq
    }

    pub fn gfun(&self) -> &[Polynomial] {
        &self.gfun
    }

    pub fn hfun(&self) -> &[Polynomial] {
        &self.hfun
    }

    /// `(l, m, p)`: inequality, equality and complementarity/vanishing counts.
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.ineq.len(), self.eq.len(), self.gfun.len())
    }

    /// True when `g`, `h`, `G`, `H` are all affine (the objective is not considered).
    pub fn has_affine_constraints(&self) -> bool {
        self.ineq
            .iter()
            .chain(&self.eq)
            .chain(&self.gfun)
            .chain(&self.hfun)
            .all(Polynomial::is_affine)
    }

    fn check_point(&self, x: &CandidatePoint) -> Result<()> {
        if x.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.dim(),
            });
        }
        Ok(())
    }
}

/// A point with rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidatePoint(Vec<Rational>);

impl CandidatePoint {
    pub fn new(coords: Vec<Rational>) -> Self {
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Rational] {
        &self.0
    }
}

impl From<Vec<Rational>> for CandidatePoint {
    fn from(v: Vec<Rational>) -> Self {
        Self(v)
    }
}

/// Activity classification of a feasible point. All index lists are sorted and zero-based.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexSets {
    pub active_g: Vec<usize>,
    /// `G > 0, H = 0`
    pub plus_zero: Vec<usize>,
    /// `G = 0, H > 0`
    pub zero_plus: Vec<usize>,
    /// `G < 0, H = 0`
    pub minus_zero: Vec<usize>,
    /// `G < 0, H > 0`
    pub minus_plus: Vec<usize>,
    /// `G = H = 0`
    pub biactive: Vec<usize>,
}

impl IndexSets {
    /// Number of biactive indices.
    pub fn q(&self) -> usize {
        self.biactive.len()
    }

    pub fn biactive_alpha0(&self, alpha: &AlphaPattern) -> Vec<usize> {
        self.biactive.iter().copied().filter(|&i| !alpha.bit(i)).collect()
    }

    pub fn biactive_alpha1(&self, alpha: &AlphaPattern) -> Vec<usize> {
        self.biactive.iter().copied().filter(|&i| alpha.bit(i)).collect()
    }

    /// All `2^q` patterns over the biactive indices, lexicographic with the first
    /// biactive index most significant. Bits off the biactive set are zero.
    pub fn alpha_patterns(&self, p: usize) -> Vec<AlphaPattern> {
        let q = self.q();
        (0..1usize << q)
            .map(|k| {
                let mut bits = vec![false; p];
                for (j, &i) in self.biactive.iter().enumerate() {
                    bits[i] = (k >> (q - 1 - j)) & 1 == 1;
                }
                AlphaPattern(bits)
            })
            .collect()
    }

    /// Position of `alpha` in [`IndexSets::alpha_patterns`].
    pub fn pattern_index(&self, alpha: &AlphaPattern) -> usize {
        self.biactive
            .iter()
            .fold(0, |acc, &i| (acc << 1) | usize::from(alpha.bit(i)))
    }

    pub fn is_biactive(&self, i: usize) -> bool {
        self.biactive.binary_search(&i).is_ok()
    }
}

/// A pattern `alpha` in `{0,1}^p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlphaPattern(Vec<bool>);

impl AlphaPattern {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![false; p])
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::MalformedInstance(format!("alpha bit {} is not 0 or 1", b))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// The same pattern read as a d-vector with entries in `{0, 1}`.
    pub fn to_dvector(&self) -> DVector {
        DVector(
            self.0
                .iter()
                .map(|&b| if b { Rational::one() } else { Rational::zero() })
                .collect(),
        )
    }
}

impl fmt::Display for AlphaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// A vector `d` in `[0,1]^p` with rational entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DVector(Vec<Rational>);

impl DVector {
    pub fn new(entries: Vec<Rational>) -> Result<Self> {
        for d in &entries {
            if d.is_negative() || *d > Rational::one() {
                return Err(Error::MalformedInstance(format!("d entry {} outside [0,1]", d)));
            }
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn get(&self, i: usize) -> &Rational {
        &self.0[i]
    }
}

impl fmt::Display for DVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", d)?;
        }
        Ok(())
    }
}

/// Values of all constraint functions at a point.
struct ConstraintValues {
    g: Vec<Rational>,
    h: Vec<Rational>,
    big_g: Vec<Rational>,
    big_h: Vec<Rational>,
}

fn constraint_values(inst: &Instance, x: &CandidatePoint) -> Result<ConstraintValues> {
    inst.check_point(x)?;
    let eval_all = |ps: &[Polynomial]| -> Result<Vec<Rational>> {
        ps.iter().map(|p| p.eval(x.coords())).collect()
    };
    Ok(ConstraintValues {
        g: eval_all(inst.ineq())?,
        h: eval_all(inst.eq())?,
        big_g: eval_all(inst.gfun())?,
        big_h: eval_all(inst.hfun())?,
    })
}

/// Exact feasibility test for the instance's kind.
pub fn check_feasible(inst: &Instance, x: &CandidatePoint) -> Result<bool> {
    let v = constraint_values(inst, x)?;
    let basic = v.g.iter().all(|g| !g.is_positive()) && v.h.iter().all(Zero::is_zero);
    if !basic {
        return Ok(false);
    }
    let ok = match inst.kind() {
        ProblemKind::Mpcc => {
            let nonneg = v.big_g.iter().chain(&v.big_h).all(|t| !t.is_negative());
            let product: Rational = v
                .big_g
                .iter()
                .zip(&v.big_h)
                .fold(Rational::zero(), |acc, (a, b)| acc + a * b);
            nonneg && product.is_zero()
        }
        ProblemKind::Mpvc => v
            .big_g
            .iter()
            .zip(&v.big_h)
            .all(|(a, b)| !b.is_negative() && !(a * b).is_positive()),
    };
    Ok(ok)
}

/// Exact index sets at a feasible point.
pub fn index_sets(inst: &Instance, x: &CandidatePoint) -> Result<IndexSets> {
    if !check_feasible(inst, x)? {
        return Err(Error::InfeasiblePoint);
    }
    let v = constraint_values(inst, x)?;
    let mut sets = IndexSets {
        active_g: v
            .g
            .iter()
            .enumerate()
            .filter(|(_, g)| g.is_zero())
            .map(|(i, _)| i)
            .collect(),
        ..IndexSets::default()
    };
    for (i, (g, h)) in v.big_g.iter().zip(&v.big_h).enumerate() {
        let bucket = match (crate::rational::sign(g), crate::rational::sign(h)) {
            (1, 0) => &mut sets.plus_zero,
            (0, 1) => &mut sets.zero_plus,
            (-1, 0) => &mut sets.minus_zero,
            (-1, 1) => &mut sets.minus_plus,
            (0, 0) => &mut sets.biactive,
            _ => return Err(Error::Internal("feasible point with unclassifiable index")),
        };
        bucket.push(i);
    }
    Ok(sets)
}
