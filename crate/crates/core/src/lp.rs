//! Exact rational linear programming.
//!
//! A dense two-phase simplex over [`Rational`] with Bland's rule. Every answer carries a
//! certificate that is re-verified in exact arithmetic before it is returned: feasible
//! witnesses are substituted into all rows, infeasibility comes with a Farkas vector, and
//! optimal solutions are checked against a dual solution with equal objective value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{dot, Rational};

/// Optional lower/upper bound on one variable. `None` means unbounded on that side.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bound {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl Bound {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn nonneg() -> Self {
        Self {
            lower: Some(Rational::zero()),
            upper: None,
        }
    }

    pub fn fixed(v: Rational) -> Self {
        Self {
            lower: Some(v.clone()),
            upper: Some(v),
        }
    }
}

/// `eq_rows: a.v = b`, `ineq_rows: a.v <= b`, plus per-variable bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSystem {
    num_vars: usize,
    eq_rows: Vec<(Vec<Rational>, Rational)>,
    ineq_rows: Vec<(Vec<Rational>, Rational)>,
    bounds: Vec<Bound>,
}

impl LinearSystem {
    /// A system over `num_vars` free variables with no rows.
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            bounds: vec![Bound::free(); num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn eq_rows(&self) -> &[(Vec<Rational>, Rational)] {
        &self.eq_rows
    }

    pub fn ineq_rows(&self) -> &[(Vec<Rational>, Rational)] {
        &self.ineq_rows
    }

    pub fn bounds(&self) -> &[Bound] {
        &self.bounds
    }

    pub fn add_eq(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        self.eq_rows.push((coeffs, rhs));
    }

    /// Adds `coeffs . v <= rhs`.
    pub fn add_le(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        self.ineq_rows.push((coeffs, rhs));
    }

    /// Adds `coeffs . v >= rhs` (stored as a negated `<=` row).
    pub fn add_ge(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        self.ineq_rows
            .push((coeffs.into_iter().map(|c| -c).collect(), -rhs));
    }

    pub fn set_bound(&mut self, var: usize, bound: Bound) {
        self.bounds[var] = bound;
    }

    /// Unit-coefficient row helper: the vector `e_var` scaled by `c`.
    pub fn unit(&self, var: usize, c: Rational) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.num_vars];
        v[var] = c;
        v
    }

    pub fn validate(&self) -> Result<()> {
        for (row, _) in self.eq_rows.iter().chain(&self.ineq_rows) {
            if row.len() != self.num_vars {
                return Err(Error::MalformedSystem(format!(
                    "row of length {} in a system with {} variables",
                    row.len(),
                    self.num_vars
                )));
            }
        }
        if self.bounds.len() != self.num_vars {
            return Err(Error::MalformedSystem(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                self.num_vars
            )));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if let (Some(l), Some(u)) = (&b.lower, &b.upper) {
                if l > u {
                    return Err(Error::MalformedSystem(format!(
                        "variable {} has lower bound {} above upper bound {}",
                        j, l, u
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact check that `v` satisfies every row and bound.
    pub fn is_satisfied_by(&self, v: &[Rational]) -> bool {
        if v.len() != self.num_vars {
            return false;
        }
        self.eq_rows.iter().all(|(a, b)| dot(a, v) == *b)
            && self.ineq_rows.iter().all(|(a, b)| dot(a, v) <= *b)
            && self.bounds.iter().zip(v).all(|(bd, x)| {
                bd.lower.as_ref().map_or(true, |l| x >= l)
                    && bd.upper.as_ref().map_or(true, |u| x <= u)
            })
    }

    /// Largest violation of any row or bound at a floating-point `v`.
    pub fn max_violation_f64(&self, v: &[f64]) -> f64 {
        use crate::rational::to_f64;
        let dotf = |a: &[Rational]| -> f64 { a.iter().zip(v).map(|(c, x)| to_f64(c) * x).sum() };
        let mut worst: f64 = 0.0;
        for (a, b) in &self.eq_rows {
            worst = worst.max(libm::fabs(dotf(a) - to_f64(b)));
        }
        for (a, b) in &self.ineq_rows {
            worst = worst.max(dotf(a) - to_f64(b));
        }
        for (bd, x) in self.bounds.iter().zip(v) {
            if let Some(l) = &bd.lower {
                worst = worst.max(to_f64(l) - x);
            }
            if let Some(u) = &bd.upper {
                worst = worst.max(x - to_f64(u));
            }
        }
        worst
    }
}

/// Farkas multipliers proving a [`LinearSystem`] infeasible.
///
/// `ineq`, `lower` and `upper` are nonnegative; `eq` is free. Aggregating
/// `eq.A_eq + ineq.A_le - lower + upper` gives the zero row while the same combination of
/// right-hand sides (with `-l_j` for lower and `u_j` for upper bounds) is negative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub eq: Vec<Rational>,
    pub ineq: Vec<Rational>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
}

impl FarkasCertificate {
    /// Exact verification against `sys`.
    pub fn verify(&self, sys: &LinearSystem) -> bool {
        let n = sys.num_vars;
        if self.eq.len() != sys.eq_rows.len()
            || self.ineq.len() != sys.ineq_rows.len()
            || self.lower.len() != n
            || self.upper.len() != n
        {
            return false;
        }
        if self.ineq.iter().chain(&self.lower).chain(&self.upper).any(Signed::is_negative) {
            return false;
        }
        let mut row = vec![Rational::zero(); n];
        let mut rhs = Rational::zero();
        for ((a, b), y) in sys.eq_rows.iter().zip(&self.eq).chain(sys.ineq_rows.iter().zip(&self.ineq)) {
            if y.is_zero() {
                continue;
            }
            for (r, c) in row.iter_mut().zip(a) {
                *r += y * c;
            }
            rhs += y * b;
        }
        for j in 0..n {
            let bd = &sys.bounds[j];
            if !self.lower[j].is_zero() {
                let Some(l) = &bd.lower else { return false };
                row[j] -= &self.lower[j];
                rhs -= &self.lower[j] * l;
            }
            if !self.upper[j].is_zero() {
                let Some(u) = &bd.upper else { return false };
                row[j] += &self.upper[j];
                rhs += &self.upper[j] * u;
            }
        }
        row.iter().all(Zero::is_zero) && rhs.is_negative()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Feasible(Vec<Rational>),
    Infeasible(FarkasCertificate),
    /// A recession direction along which the objective decreases without bound.
    Unbounded(Vec<Rational>),
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible(_))
    }

    pub fn witness(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Feasible(w) => Some(w),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Origin {
    Eq(usize),
    Ineq(usize),
    Lower(usize),
    Upper(usize),
}

/// All constraints as rows over free variables.
struct Canonical {
    rows: Vec<(Vec<Rational>, Rational, bool, Origin)>, // (coeffs, rhs, is_le, origin)
}

fn canonicalize(sys: &LinearSystem) -> Canonical {
    let n = sys.num_vars;
    let mut rows = Vec::new();
    for (i, (a, b)) in sys.eq_rows.iter().enumerate() {
        rows.push((a.clone(), b.clone(), false, Origin::Eq(i)));
    }
    for (i, (a, b)) in sys.ineq_rows.iter().enumerate() {
        rows.push((a.clone(), b.clone(), true, Origin::Ineq(i)));
    }
    for (j, bd) in sys.bounds.iter().enumerate() {
        if let Some(l) = &bd.lower {
            let mut a = vec![Rational::zero(); n];
            a[j] = -Rational::one();
            rows.push((a, -l.clone(), true, Origin::Lower(j)));
        }
        if let Some(u) = &bd.upper {
            let mut a = vec![Rational::zero(); n];
            a[j] = Rational::one();
            rows.push((a, u.clone(), true, Origin::Upper(j)));
        }
    }
    Canonical { rows }
}

/// Dense tableau. Columns: `x+_j, x-_j` for each variable, one slack per `<=` row, then one
/// artificial per row. The last entry of each row is the right-hand side.
struct Tableau {
    n: usize,
    num_slack: usize,
    m: usize,
    t: Vec<Vec<Rational>>,
    z: Vec<Rational>,
    basis: Vec<usize>,
    // sign used to make each right-hand side nonnegative
    sigma: Vec<Rational>,
}

impl Tableau {
    fn width(&self) -> usize {
        2 * self.n + self.num_slack + self.m
    }

    fn first_artificial(&self) -> usize {
        2 * self.n + self.num_slack
    }

    fn build(canon: &Canonical, n: usize) -> Self {
        let m = canon.rows.len();
        let num_slack = canon.rows.iter().filter(|r| r.2).count();
        let width = 2 * n + num_slack + m;
        let mut t = Vec::with_capacity(m);
        let mut sigma = Vec::with_capacity(m);
        let mut slack = 0;
        for (r, (a, b, is_le, _)) in canon.rows.iter().enumerate() {
            let s = if b.is_negative() { -Rational::one() } else { Rational::one() };
            let mut row = vec![Rational::zero(); width + 1];
            for (j, c) in a.iter().enumerate() {
                row[2 * j] = c * &s;
                row[2 * j + 1] = -(c * &s);
            }
            if *is_le {
                row[2 * n + slack] = s.clone();
                slack += 1;
            }
            row[2 * n + num_slack + r] = Rational::one();
            row[width] = b * &s;
            t.push(row);
            sigma.push(s);
        }
        let basis = (0..m).map(|r| 2 * n + num_slack + r).collect();
        Tableau {
            n,
            num_slack,
            m,
            t,
            z: vec![Rational::zero(); width + 1],
            basis,
            sigma,
        }
    }

    /// Recomputes the reduced-cost row for cost vector `c` (length = width).
    fn set_costs(&mut self, c: &[Rational]) {
        let width = self.width();
        let mut z: Vec<Rational> = c.to_vec();
        z.push(Rational::zero());
        for r in 0..self.m {
            let cb = &c[self.basis[r]];
            if cb.is_zero() {
                continue;
            }
            for j in 0..=width {
                let v = cb * &self.t[r][j];
                z[j] -= v;
            }
        }
        self.z = z;
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let width = self.width();
        let p = self.t[r][col].clone();
        for j in 0..=width {
            self.t[r][j] /= &p;
        }
        let pivot_row = self.t[r].clone();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i][col].clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..=width {
                if !pivot_row[j].is_zero() {
                    let v = &f * &pivot_row[j];
                    self.t[i][j] -= v;
                }
            }
        }
        let f = self.z[col].clone();
        if !f.is_zero() {
            for j in 0..=width {
                if !pivot_row[j].is_zero() {
                    let v = &f * &pivot_row[j];
                    self.z[j] -= v;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Runs Bland's rule over columns `< limit`. Returns `Err(col)` if column `col`
    /// proves unboundedness.
    fn optimize(&mut self, limit: usize) -> core::result::Result<(), usize> {
        let width = self.width();
        loop {
            let Some(col) = (0..limit).find(|&j| self.z[j].is_negative()) else {
                return Ok(());
            };
            let mut best: Option<(usize, Rational)> = None;
            for r in 0..self.m {
                let a = &self.t[r][col];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.t[r][width] / a;
                let better = match &best {
                    None => true,
                    Some((br, bv)) => ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return Err(col),
            }
        }
    }

    fn column_values(&self) -> Vec<Rational> {
        let width = self.width();
        let mut z = vec![Rational::zero(); width];
        for r in 0..self.m {
            z[self.basis[r]] = self.t[r][width].clone();
        }
        z
    }

    fn to_vars(&self, cols: &[Rational]) -> Vec<Rational> {
        (0..self.n).map(|j| &cols[2 * j] - &cols[2 * j + 1]).collect()
    }

    /// Row duals `w = sigma * y` where `y_r = cost_art - z[art_r]`.
    fn duals(&self, artificial_cost: &Rational) -> Vec<Rational> {
        let a0 = self.first_artificial();
        (0..self.m)
            .map(|r| (artificial_cost - &self.z[a0 + r]) * &self.sigma[r])
            .collect()
    }
}

fn certificate_from_duals(canon: &Canonical, sys: &LinearSystem, w: &[Rational]) -> FarkasCertificate {
    let n = sys.num_vars;
    let mut cert = FarkasCertificate {
        eq: vec![Rational::zero(); sys.eq_rows.len()],
        ineq: vec![Rational::zero(); sys.ineq_rows.len()],
        lower: vec![Rational::zero(); n],
        upper: vec![Rational::zero(); n],
    };
    for (row, wr) in canon.rows.iter().zip(w) {
        let f = -wr.clone();
        match row.3 {
            Origin::Eq(i) => cert.eq[i] = f,
            Origin::Ineq(i) => cert.ineq[i] = f,
            Origin::Lower(j) => cert.lower[j] = f,
            Origin::Upper(j) => cert.upper[j] = f,
        }
    }
    cert
}

/// Phase one. Returns the tableau positioned at a feasible basis with all artificial
/// variables at zero, or a verified Farkas certificate.
fn phase_one(sys: &LinearSystem) -> Result<core::result::Result<(Tableau, Canonical), FarkasCertificate>> {
    sys.validate()?;
    let canon = canonicalize(sys);
    let mut tab = Tableau::build(&canon, sys.num_vars);
    let width = tab.width();
    let a0 = tab.first_artificial();
    let mut cost = vec![Rational::zero(); width];
    for c in cost.iter_mut().skip(a0) {
        *c = Rational::one();
    }
    tab.set_costs(&cost);
    tab.optimize(width)
        .map_err(|_| Error::Internal("phase one cannot be unbounded"))?;
    let infeasibility = -tab.z[width].clone();
    if infeasibility.is_positive() {
        let w = tab.duals(&Rational::one());
        let cert = certificate_from_duals(&canon, sys, &w);
        if !cert.verify(sys) {
            return Err(Error::Internal("Farkas certificate failed verification"));
        }
        return Ok(Err(cert));
    }
    // Drive zero-valued artificials out of the basis where a structural column allows it;
    // rows where none does are redundant and keep their artificial at zero.
    for r in 0..tab.m {
        if tab.basis[r] >= a0 {
            if let Some(col) = (0..a0).find(|&j| !tab.t[r][j].is_zero()) {
                tab.pivot(r, col);
            }
        }
    }
    Ok(Ok((tab, canon)))
}

/// Decides feasibility of `sys`, returning a witness or a Farkas certificate.
pub fn solve_feasibility(sys: &LinearSystem) -> Result<LpOutcome> {
    match phase_one(sys)? {
        Err(cert) => Ok(LpOutcome::Infeasible(cert)),
        Ok((tab, _)) => {
            let x = tab.to_vars(&tab.column_values());
            if !sys.is_satisfied_by(&x) {
                return Err(Error::Internal("feasible witness failed verification"));
            }
            Ok(LpOutcome::Feasible(x))
        }
    }
}

/// Minimizes `objective . v` over `sys`.
///
/// Optimal witnesses are certified by an exact dual solution `w` with `A^T w = c`,
/// nonpositive on `<=` rows, and `b . w = c . v`.
pub fn solve_min(sys: &LinearSystem, objective: &[Rational]) -> Result<LpOutcome> {
    if objective.len() != sys.num_vars {
        return Err(Error::MalformedSystem(format!(
            "objective of length {} for {} variables",
            objective.len(),
            sys.num_vars
        )));
    }
    let (mut tab, canon) = match phase_one(sys)? {
        Err(cert) => return Ok(LpOutcome::Infeasible(cert)),
        Ok(state) => state,
    };
    let n = sys.num_vars;
    let width = tab.width();
    let a0 = tab.first_artificial();
    let mut cost = vec![Rational::zero(); width];
    for (j, c) in objective.iter().enumerate() {
        cost[2 * j] = c.clone();
        cost[2 * j + 1] = -c.clone();
    }
    tab.set_costs(&cost);
    match tab.optimize(a0) {
        Err(col) => {
            let mut dir = vec![Rational::zero(); width];
            dir[col] = Rational::one();
            for r in 0..tab.m {
                dir[tab.basis[r]] = -tab.t[r][col].clone();
            }
            let ray = tab.to_vars(&dir);
            if !is_recession_ray(sys, &ray) || !dot(objective, &ray).is_negative() {
                return Err(Error::Internal("unbounded ray failed verification"));
            }
            Ok(LpOutcome::Unbounded(ray))
        }
        Ok(()) => {
            let x = tab.to_vars(&tab.column_values());
            if !sys.is_satisfied_by(&x) {
                return Err(Error::Internal("optimal witness failed verification"));
            }
            let w = tab.duals(&Rational::zero());
            if !verify_dual(&canon, n, objective, &w, &x) {
                return Err(Error::Internal("optimality certificate failed verification"));
            }
            Ok(LpOutcome::Feasible(x))
        }
    }
}

fn verify_dual(canon: &Canonical, n: usize, c: &[Rational], w: &[Rational], x: &[Rational]) -> bool {
    let mut atw = vec![Rational::zero(); n];
    let mut btw = Rational::zero();
    for ((a, b, is_le, _), wr) in canon.rows.iter().zip(w) {
        if *is_le && wr.is_positive() {
            return false;
        }
        for (s, aj) in atw.iter_mut().zip(a) {
            *s += aj * wr;
        }
        btw += b * wr;
    }
    atw.as_slice() == c && btw == dot(c, x)
}

/// `d` is a recession direction: `A_eq d = 0`, `A_le d <= 0`, and bounded sides respected.
pub fn is_recession_ray(sys: &LinearSystem, d: &[Rational]) -> bool {
    d.len() == sys.num_vars
        && sys.eq_rows.iter().all(|(a, _)| dot(a, d).is_zero())
        && sys.ineq_rows.iter().all(|(a, _)| !dot(a, d).is_positive())
        && sys.bounds.iter().zip(d).all(|(bd, x)| {
            (bd.lower.is_none() || !x.is_negative()) && (bd.upper.is_none() || !x.is_positive())
        })
}
