//! Brute-force local minimality for affine constraints and convex (at most quadratic)
//! objectives.
//!
//! The feasible set is the union of the branch polyhedra obtained by fixing, for every
//! pair, one of the two convex pieces of its constraint. Only the pieces through the
//! point matter locally, and over a convex piece a convex objective is locally minimal
//! at the point iff its linearization is globally minimal there, which one LP per piece
//! decides.

use mpstat_core::instance::check_feasible;
use mpstat_core::lp::{solve_min, LinearSystem, LpOutcome};
use mpstat_core::rational::dot;
use mpstat_core::{CandidatePoint, Error, Instance, Polynomial, ProblemKind, Rational, Result};
use num_traits::{Signed, Zero};

/// `a.x + b`
type Affine = (Vec<Rational>, Rational);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rel {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug)]
struct Piece {
    rows: Vec<(Affine, Rel)>,
}

impl Piece {
    fn contains(&self, x: &[Rational]) -> bool {
        self.rows.iter().all(|((a, b), rel)| {
            let v = dot(a, x) + b;
            match rel {
                Rel::Eq => v.is_zero(),
                Rel::Le => !v.is_positive(),
                Rel::Ge => !v.is_negative(),
            }
        })
    }

    fn add_to(&self, sys: &mut LinearSystem) {
        for ((a, b), rel) in &self.rows {
            match rel {
                Rel::Eq => sys.add_eq(a.clone(), -b.clone()),
                Rel::Le => sys.add_le(a.clone(), -b.clone()),
                Rel::Ge => sys.add_ge(a.clone(), -b.clone()),
            }
        }
    }
}

fn pieces(kind: ProblemKind, g: Affine, h: Affine) -> [Piece; 2] {
    let piece = |rows| Piece { rows };
    match kind {
        // {G = 0, H >= 0} and {G >= 0, H = 0}
        ProblemKind::Mpcc => [
            piece(vec![(g.clone(), Rel::Eq), (h.clone(), Rel::Ge)]),
            piece(vec![(g, Rel::Ge), (h, Rel::Eq)]),
        ],
        // {H = 0} and {H >= 0, G <= 0}
        ProblemKind::Mpvc => [piece(vec![(h.clone(), Rel::Eq)]), piece(vec![(h, Rel::Ge), (g, Rel::Le)])],
    }
}

fn affine_parts(p: &Polynomial, n: usize) -> Result<Affine> {
    let zero = vec![Rational::zero(); n];
    Ok((p.gradient_at(&zero)?, p.eval(&zero)?))
}

/// Determinant by fraction-exact elimination.
fn det(mut a: Vec<Vec<Rational>>) -> Rational {
    let n = a.len();
    let mut d = Rational::from_integer(1.into());
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if p != col {
            a.swap(p, col);
            d = -d;
        }
        let pivot = a[col][col].clone();
        d *= &pivot;
        for r in col + 1..n {
            let f = &a[r][col] / &pivot;
            for c in col..n {
                let delta = &f * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    d
}

/// Degree at most 2 with a positive semidefinite Hessian (all principal minors >= 0).
pub fn convex_quadratic(f: &Polynomial, x: &[Rational]) -> Result<bool> {
    if f.degree() > 2 {
        return Ok(false);
    }
    if f.degree() < 2 {
        return Ok(true);
    }
    let hess = f.hessian_at(x)?;
    let n = hess.len();
    for mask in 1u64..(1u64 << n) {
        let idx: Vec<usize> = (0..n).filter(|&k| mask >> k & 1 == 1).collect();
        let sub = idx.iter().map(|&r| idx.iter().map(|&c| hess[r][c].clone()).collect()).collect();
        if det(sub).is_negative() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `true` iff `x` is a local minimizer. Errors with `UnsupportedData` outside the
/// affine-constraint, convex-quadratic-objective class.
pub fn brute_local_min(inst: &Instance, x: &CandidatePoint) -> Result<bool> {
    let n = inst.dim();
    if x.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.dim(),
        });
    }
    let xs = x.coords();
    if !inst.has_affine_constraints() || !convex_quadratic(inst.objective(), xs)? {
        return Err(Error::UnsupportedData);
    }
    if !check_feasible(inst, x)? {
        return Err(Error::InfeasiblePoint);
    }
    let c = inst.objective().gradient_at(xs)?;
    let here = dot(&c, xs);

    let mut base = LinearSystem::new(n);
    for g in inst.ineq() {
        let (a, b) = affine_parts(g, n)?;
        base.add_le(a, -b);
    }
    for h in inst.eq() {
        let (a, b) = affine_parts(h, n)?;
        base.add_eq(a, -b);
    }

    // Per pair, the pieces through x; non-biactive pairs have exactly one.
    let mut choices: Vec<Vec<Piece>> = Vec::new();
    for (g, h) in inst.gfun().iter().zip(inst.hfun()) {
        let all = pieces(inst.kind(), affine_parts(g, n)?, affine_parts(h, n)?);
        let keep: Vec<Piece> = all.into_iter().filter(|p| p.contains(xs)).collect();
        if keep.is_empty() {
            return Err(Error::Internal("feasible point lies in no branch piece"));
        }
        choices.push(keep);
    }

    let mut pick = vec![0usize; choices.len()];
    loop {
        let mut sys = base.clone();
        for (i, &k) in pick.iter().enumerate() {
            choices[i][k].add_to(&mut sys);
        }
        match solve_min(&sys, &c)? {
            LpOutcome::Unbounded(_) => return Ok(false),
            LpOutcome::Feasible(y) if dot(&c, &y) < here => return Ok(false),
            LpOutcome::Feasible(_) => {}
            LpOutcome::Infeasible(_) => return Err(Error::Internal("branch piece through a feasible point is empty")),
        }
        let mut k = 0;
        while k < pick.len() {
            pick[k] += 1;
            if pick[k] < choices[k].len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == pick.len() {
            return Ok(true);
        }
    }
}
