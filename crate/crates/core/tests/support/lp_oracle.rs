// Brute-force LP oracle: a nonempty polyhedron has a minimal face, which is an affine
// set cut out by at most n tight inequalities plus the equalities. Every particular
// solution of such a system that satisfies all constraints is a point of P, and the
// minimum of a bounded linear objective is attained at one of them.

#![allow(dead_code)]

use mpstat_core::lp::LinearSystem;
use mpstat_core::Rational;
use mpstat_core::lp::{solve_feasibility, solve_min, Bound, LpOutcome};
use num_traits::{One, Zero};
use rand::Rng;

pub struct Dense {
    pub n: usize,
    pub eqs: Vec<(Vec<Rational>, Rational)>,
    pub les: Vec<(Vec<Rational>, Rational)>,
}

pub fn densify(sys: &LinearSystem) -> Dense {
    let n = sys.num_vars();
    let eqs = sys.eq_rows().to_vec();
    let mut les = sys.ineq_rows().to_vec();
    for (k, b) in sys.bounds().iter().enumerate() {
        let mut e = vec![Rational::zero(); n];
        e[k] = Rational::one();
        if let Some(u) = &b.upper {
            les.push((e.clone(), u.clone()));
        }
        if let Some(l) = &b.lower {
            les.push((e.iter().map(|v| -v.clone()).collect(), -l.clone()));
        }
    }
    Dense { n, eqs, les }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Dense {
    pub fn satisfied(&self, x: &[Rational]) -> bool {
        self.eqs.iter().all(|(a, b)| dot(a, x) == *b) && self.les.iter().all(|(a, b)| dot(a, x) <= *b)
    }

    /// Recession cone with the extra row `c.d <= -1`.
    fn descent_cone(&self, c: &[Rational]) -> Dense {
        let zero = Rational::zero;
        let mut les: Vec<_> = self.les.iter().map(|(a, _)| (a.clone(), zero())).collect();
        les.push((c.to_vec(), -Rational::one()));
        Dense {
            n: self.n,
            eqs: self.eqs.iter().map(|(a, _)| (a.clone(), zero())).collect(),
            les,
        }
    }

    /// All candidate points that lie in the polyhedron.
    pub fn face_points(&self) -> Vec<Vec<Rational>> {
        let mut out = Vec::new();
        let m = self.les.len();
        let mut subset = Vec::new();
        self.walk(0, m, &mut subset, &mut out);
        out
    }

    fn walk(&self, start: usize, m: usize, subset: &mut Vec<usize>, out: &mut Vec<Vec<Rational>>) {
        let mut rows: Vec<(Vec<Rational>, Rational)> = self.eqs.clone();
        rows.extend(subset.iter().map(|&k| self.les[k].clone()));
        if let Some(x) = particular_solution(self.n, &rows) {
            if self.satisfied(&x) {
                out.push(x);
            }
        }
        if subset.len() == self.n {
            return;
        }
        for k in start..m {
            subset.push(k);
            self.walk(k + 1, m, subset, out);
            subset.pop();
        }
    }

    pub fn feasible(&self) -> bool {
        !self.face_points().is_empty()
    }

    /// `None` if infeasible, `Some(None)` if unbounded, `Some(Some(v))` for the optimum.
    pub fn minimum(&self, c: &[Rational]) -> Option<Option<Rational>> {
        let pts = self.face_points();
        if pts.is_empty() {
            return None;
        }
        if self.descent_cone(c).feasible() {
            return Some(None);
        }
        pts.iter().map(|x| dot(c, x)).min().map(Some)
    }
}

/// Gaussian elimination; free variables are set to zero.
pub fn particular_solution(n: usize, rows: &[(Vec<Rational>, Rational)]) -> Option<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = rows
        .iter()
        .map(|(r, b)| {
            let mut v = r.clone();
            v.push(b.clone());
            v
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..a.len()).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = Rational::one() / a[row][col].clone();
        for v in a[row].iter_mut() {
            *v *= &inv;
        }
        for r in 0..a.len() {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..=n {
                    let delta = &f * &a[row][c];
                    a[r][c] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if a[row..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    let mut x = vec![Rational::zero(); n];
    for (r, &col) in pivots.iter().enumerate() {
        x[col] = a[r][n].clone();
    }
    Some(x)
}

fn small(rng: &mut impl Rng, lo: i64, hi: i64) -> Rational {
    Rational::from_integer(rng.gen_range(lo..=hi).into())
}

/// A random system with at most 6 variables and at most 10 rows counting bounds.
pub fn random_system(rng: &mut impl Rng) -> LinearSystem {
    let n = rng.gen_range(1..=6);
    let mut sys = LinearSystem::new(n);
    let mut budget: usize = rng.gen_range(1..=10);
    for k in 0..n {
        if budget == 0 {
            break;
        }
        match rng.gen_range(0..4) {
            0 => {
                sys.set_bound(k, Bound::nonneg());
                budget -= 1;
            }
            1 if budget >= 2 => {
                let l = small(rng, -3, 1);
                let u = &l + small(rng, 0, 3);
                sys.set_bound(k, Bound { lower: Some(l), upper: Some(u) });
                budget -= 2;
            }
            _ => {}
        }
    }
    let mut previous: Vec<Vec<Rational>> = Vec::new();
    for _ in 0..budget {
        let row: Vec<Rational> = if !previous.is_empty() && rng.gen_bool(0.15) {
            // dependent row: sum of two earlier ones
            let a = &previous[rng.gen_range(0..previous.len())];
            let b = &previous[rng.gen_range(0..previous.len())];
            a.iter().zip(b).map(|(x, y)| x + y).collect()
        } else {
            (0..n).map(|_| small(rng, -3, 3)).collect()
        };
        let rhs = small(rng, -5, 5);
        match rng.gen_range(0..3) {
            0 => sys.add_eq(row.clone(), rhs),
            1 => sys.add_le(row.clone(), rhs),
            _ => sys.add_ge(row.clone(), rhs),
        }
        previous.push(row);
    }
    sys
}

/// Runs the solver and the oracle on one system; `Err` describes a disagreement.
pub fn compare(sys: &LinearSystem, cost: &[Rational]) -> Result<(), String> {
    let dense = densify(sys);
    let feas = solve_feasibility(sys).map_err(|e| format!("solver error: {e}"))?;
    let oracle_feasible = dense.feasible();
    match &feas {
        LpOutcome::Feasible(x) => {
            if !oracle_feasible || !sys.is_satisfied_by(x) {
                return Err("feasibility witness disagrees with the oracle".into());
            }
        }
        LpOutcome::Infeasible(cert) => {
            if oracle_feasible || !cert.verify(sys) {
                return Err("infeasibility verdict disagrees with the oracle".into());
            }
        }
        LpOutcome::Unbounded(_) => return Err("feasibility LP reported unbounded".into()),
    }
    let opt = solve_min(sys, cost).map_err(|e| format!("solver error: {e}"))?;
    let expected = dense.minimum(cost);
    match (&opt, expected) {
        (LpOutcome::Feasible(x), Some(Some(v))) if sys.is_satisfied_by(x) && dot(cost, x) == v => Ok(()),
        (LpOutcome::Unbounded(d), Some(None)) if is_descent_ray(&dense, cost, d) => Ok(()),
        (LpOutcome::Infeasible(cert), None) if cert.verify(sys) => Ok(()),
        (got, want) => Err(format!("optimization disagrees: solver {:?}, oracle {:?}", kind(got), want)),
    }
}

fn is_descent_ray(d: &Dense, c: &[Rational], ray: &[Rational]) -> bool {
    dot(c, ray) < Rational::zero()
        && d.eqs.iter().all(|(a, _)| dot(a, ray).is_zero())
        && d.les.iter().all(|(a, _)| dot(a, ray) <= Rational::zero())
}

fn kind(o: &LpOutcome) -> &'static str {
    match o {
        LpOutcome::Feasible(_) => "optimal",
        LpOutcome::Infeasible(_) => "infeasible",
        LpOutcome::Unbounded(_) => "unbounded",
    }
}

pub fn random_cost(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| small(rng, -3, 3)).collect()
}
