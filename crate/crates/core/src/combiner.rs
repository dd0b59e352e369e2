//! Combining pattern-wise multipliers into one multiplier vector on a prescribed curve.
//!
//! For every biactive pattern alpha an A(alpha) multiplier is computed. These are mixed
//! with the product weights `g(y, alpha)` for `y` in the unit box, and `y` is chosen as a
//! zero of `h_i(y) = psi_i(sum_alpha g(y, alpha) (mu^alpha, nu^alpha))`. The psi functions
//! make `h` satisfy the Poincare-Miranda boundary signs, and the zero is located by box
//! bisection.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::instance::{index_sets, AlphaPattern, CandidatePoint, IndexSets, Instance, ProblemKind};
use crate::lp::{solve_feasibility, solve_min, Bound, LinearSystem, LpOutcome};
use crate::rational::{abs_max, dyadic_round, to_f64, Rational};
use crate::stationarity::{branch_sets, build_weak_system, Layout, MultiplierVector, PairRow, StationarityKind};

/// Closed-form curve expression in the parameter `t`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveExpr {
    Const(f64),
    T,
    Neg(Box<CurveExpr>),
    Add(Box<CurveExpr>, Box<CurveExpr>),
    Sub(Box<CurveExpr>, Box<CurveExpr>),
    Mul(Box<CurveExpr>, Box<CurveExpr>),
    Pow(Box<CurveExpr>, u32),
    Sin(Box<CurveExpr>),
    Cos(Box<CurveExpr>),
}

impl CurveExpr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::T => t,
            Self::Neg(e) => -e.eval(t),
            Self::Add(a, b) => a.eval(t) + b.eval(t),
            Self::Sub(a, b) => a.eval(t) - b.eval(t),
            Self::Mul(a, b) => a.eval(t) * b.eval(t),
            Self::Pow(e, k) => libm::pow(e.eval(t), f64::from(*k)),
            Self::Sin(e) => libm::sin(e.eval(t)),
            Self::Cos(e) => libm::cos(e.eval(t)),
        }
    }
}

impl fmt::Display for CurveExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(c) => write!(f, "{c}"),
            Self::T => write!(f, "t"),
            Self::Neg(e) => write!(f, "-({e})"),
            Self::Add(a, b) => write!(f, "({a} + {b})"),
            Self::Sub(a, b) => write!(f, "({a} - {b})"),
            Self::Mul(a, b) => write!(f, "({a} * {b})"),
            Self::Pow(e, k) => write!(f, "({e})^{k}"),
            Self::Sin(e) => write!(f, "sin({e})"),
            Self::Cos(e) => write!(f, "cos({e})"),
        }
    }
}

/// The function `phi` on `t <= 0` that parametrizes a curve.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi {
    /// `phi(t) = c * t`.
    Linear(Rational),
    /// Points `(t_k, phi_k)` starting at `(0, 0)` with strictly decreasing `t`, linearly
    /// interpolated and continued constantly beyond the last point.
    Table(Vec<(Rational, Rational)>),
    Expr(CurveExpr),
}

impl Phi {
    pub fn zero() -> Self {
        Phi::Linear(Rational::zero())
    }

    fn eval_f64(&self, t: f64) -> f64 {
        match self {
            Phi::Linear(c) => to_f64(c) * t,
            Phi::Table(pts) => {
                let last = pts.len() - 1;
                for k in 0..last {
                    let (t0, p0) = (to_f64(&pts[k].0), to_f64(&pts[k].1));
                    let (t1, p1) = (to_f64(&pts[k + 1].0), to_f64(&pts[k + 1].1));
                    if t >= t1 {
                        return p0 + (p1 - p0) * (t - t0) / (t1 - t0);
                    }
                }
                to_f64(&pts[last].1)
            }
            Phi::Expr(e) => e.eval(t),
        }
    }

    /// Exact value for rational `t <= 0`.
    fn eval_exact(&self, t: &Rational) -> Result<Rational> {
        match self {
            Phi::Linear(c) => Ok(c * t),
            Phi::Table(pts) => {
                let last = pts.len() - 1;
                for k in 0..last {
                    let ((t0, p0), (t1, p1)) = (&pts[k], &pts[k + 1]);
                    if t >= t1 {
                        return Ok(p0 + (p1 - p0) * (t - t0) / (t1 - t0));
                    }
                }
                Ok(pts[last].1.clone())
            }
            Phi::Expr(_) => Err(Error::UndecidableCurve),
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Linear(c) => write!(f, "{c}*t"),
            Phi::Table(pts) => {
                write!(f, "table[")?;
                for (k, (t, v)) in pts.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({t}, {v})")?;
                }
                write!(f, "]")
            }
            Phi::Expr(e) => write!(f, "{e}"),
        }
    }
}

/// `GraphOverA`: the curve `{(a, phi(a)) : a <= 0}`. `GraphOverB`: `{(phi(b), b) : b <= 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveForm {
    GraphOverA,
    GraphOverB,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsiSpec {
    form: CurveForm,
    phi: Phi,
    kind: ProblemKind,
}

const EXPR_SAMPLES: usize = 2000;

impl PsiSpec {
    pub fn new(form: CurveForm, phi: Phi, kind: ProblemKind) -> Result<Self> {
        match &phi {
            Phi::Linear(c) => {
                if c.is_negative() {
                    return Err(Error::InvalidPsiSpec(format!("slope {c} would put the curve above zero")));
                }
            }
            Phi::Table(pts) => {
                let Some(first) = pts.first() else {
                    return Err(Error::InvalidPsiSpec("empty table".into()));
                };
                if !first.0.is_zero() || !first.1.is_zero() {
                    return Err(Error::InvalidPsiSpec("table must start at (0, 0)".into()));
                }
                for w in pts.windows(2) {
                    if w[1].0 >= w[0].0 {
                        return Err(Error::InvalidPsiSpec("table parameters must strictly decrease".into()));
                    }
                }
                if let Some((t, v)) = pts.iter().find(|(_, v)| v.is_positive()) {
                    return Err(Error::InvalidPsiSpec(format!("phi({t}) = {v} is positive")));
                }
            }
            Phi::Expr(e) => {
                if e.eval(0.0) != 0.0 {
                    return Err(Error::InvalidPsiSpec("phi(0) must be 0".into()));
                }
                let dense = (0..=EXPR_SAMPLES).map(|k| -(k as f64) * 0.01);
                let far = (0..=6).map(|j| -libm::pow(10.0, f64::from(j)));
                for t in dense.chain(far) {
                    let v = e.eval(t);
                    if !v.is_finite() || v > 0.0 {
                        return Err(Error::InvalidPsiSpec(format!("phi({t}) = {v} is not a nonpositive number")));
                    }
                }
            }
        }
        Ok(Self { form, phi, kind })
    }

    pub fn form(&self) -> CurveForm {
        self.form
    }

    pub fn phi(&self) -> &Phi {
        &self.phi
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// `phi(t)` for `t <= 0`, clamped to be nonpositive.
    pub fn phi_value(&self, t: f64) -> f64 {
        let v = self.phi.eval_f64(t);
        if v > 0.0 {
            0.0
        } else {
            v
        }
    }
}

/// Evaluates psi at the multiplier pair `(mu, nu)`. MPVC specs act on `(-mu, nu)`.
pub fn psi_value(spec: &PsiSpec, mu: f64, nu: f64) -> Result<f64> {
    if !mu.is_finite() || !nu.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let a = match spec.kind {
        ProblemKind::Mpcc => mu,
        ProblemKind::Mpvc => -mu,
    };
    let b = nu;
    let v = match spec.form {
        CurveForm::GraphOverA => (b - spec.phi_value(a.min(0.0))).min((-a).max(0.0)),
        CurveForm::GraphOverB => (spec.phi_value(b.min(0.0)) - a).max(b.min(0.0)),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteInput)
    }
}

fn reflect(kind: ProblemKind, mu: &Rational) -> Rational {
    match kind {
        ProblemKind::Mpcc => mu.clone(),
        ProblemKind::Mpvc => -mu.clone(),
    }
}

/// Exact membership of `(mu, nu)` in the curve (without the strong quadrant).
pub fn curve_contains(spec: &PsiSpec, mu: &Rational, nu: &Rational) -> Result<bool> {
    let a = reflect(spec.kind, mu);
    let (u, v) = match spec.form {
        CurveForm::GraphOverA => (a, nu.clone()),
        CurveForm::GraphOverB => (nu.clone(), a),
    };
    if u.is_positive() {
        return Ok(false);
    }
    Ok(spec.phi.eval_exact(&u)? == v)
}

/// The curve as a union of polyhedral pieces in `(mu, nu)`.
pub fn curve_pieces(spec: &PsiSpec) -> Result<Vec<Vec<PairRow>>> {
    // rows are built over (u, v) = (parameter, value) and mapped back to (mu, nu)
    let s = reflect(spec.kind, &Rational::one());
    let row = |cu: Rational, cv: Rational, is_eq: bool, rhs: Rational| -> PairRow {
        let (ca, cb) = match spec.form {
            CurveForm::GraphOverA => (cu, cv),
            CurveForm::GraphOverB => (cv, cu),
        };
        PairRow {
            mu_coef: ca * &s,
            nu_coef: cb,
            is_eq,
            rhs,
        }
    };
    let one = Rational::one;
    let zero = Rational::zero;
    match &spec.phi {
        Phi::Linear(c) => Ok(vec![vec![row(-c.clone(), one(), true, zero()), row(one(), zero(), false, zero())]]),
        Phi::Table(pts) => {
            let mut pieces = Vec::with_capacity(pts.len());
            for w in pts.windows(2) {
                let ((t0, p0), (t1, p1)) = (&w[0], &w[1]);
                let slope = (p1 - p0) / (t1 - t0);
                pieces.push(vec![
                    row(-slope.clone(), one(), true, p0 - &slope * t0),
                    row(one(), zero(), false, t0.clone()),
                    row(-one(), zero(), false, -t1.clone()),
                ]);
            }
            let (tk, pk) = pts.last().expect("validated nonempty");
            pieces.push(vec![row(zero(), one(), true, pk.clone()), row(one(), zero(), false, tk.clone())]);
            Ok(pieces)
        }
        Phi::Expr(_) => Err(Error::UndecidableCurve),
    }
}

/// Normalized product weights over all `2^q` patterns in lexicographic order (the first
/// coordinate is the most significant bit).
pub fn weights(y: &[f64]) -> Vec<f64> {
    let q = y.len();
    let count = 1usize << q;
    let mut raw: Vec<f64> = (0..count)
        .map(|idx| {
            (0..q)
                .map(|pos| {
                    if (idx >> (q - 1 - pos)) & 1 == 1 {
                        y[pos]
                    } else {
                        1.0 - y[pos]
                    }
                })
                .product()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    for w in raw.iter_mut() {
        *w /= total;
    }
    raw
}

/// Weight of a single pattern, given as its `q` biactive bits.
pub fn weight(y: &[f64], bits: &[bool]) -> f64 {
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
    weights(y)[idx]
}

/// The map `h` on `[0, 1]^q`.
#[derive(Clone, Debug)]
pub struct MirandaMap {
    specs: Vec<PsiSpec>,
    /// Per pattern, the `(mu_i, nu_i)` pairs at the biactive indices.
    pairs: Vec<Vec<(f64, f64)>>,
}

impl MirandaMap {
    pub fn q(&self) -> usize {
        self.specs.len()
    }

    /// Combined `(mu_i, nu_i)` pairs at `y`.
    pub fn combined_pairs(&self, y: &[f64]) -> Vec<(f64, f64)> {
        let w = weights(y);
        (0..self.q())
            .map(|pos| {
                self.pairs.iter().zip(&w).fold((0.0, 0.0), |(a, b), (pat, wk)| {
                    (a + wk * pat[pos].0, b + wk * pat[pos].1)
                })
            })
            .collect()
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.combined_pairs(y)
            .iter()
            .zip(&self.specs)
            .map(|(&(a, b), spec)| psi_value(spec, a, b))
            .collect()
    }
}

/// Builds `h`. `multipliers[k]` is the multiplier of the `k`-th pattern (lexicographic
/// over `biactive`), and must satisfy the A(alpha) sign conditions.
pub fn build_h(
    specs: Vec<PsiSpec>,
    kind: ProblemKind,
    biactive: &[usize],
    multipliers: &[Option<MultiplierVector<f64>>],
    face_grid: usize,
) -> Result<MirandaMap> {
    let q = biactive.len();
    if specs.len() != q {
        return Err(Error::LengthMismatch {
            what: "curve specs",
            expected: q,
            found: specs.len(),
        });
    }
    if let Some(bad) = specs.iter().find(|s| s.kind != kind) {
        return Err(Error::InvalidPsiSpec(format!("curve for {} used on a {} instance", bad.kind, kind)));
    }
    let count = 1usize << q;
    let mut pairs = Vec::with_capacity(count);
    for k in 0..count {
        let Some(m) = multipliers.get(k).and_then(Option::as_ref) else {
            return Err(Error::MissingPattern(k));
        };
        let mut row = Vec::with_capacity(q);
        for (pos, &i) in biactive.iter().enumerate() {
            let (mu, nu) = (*m.mu.get(i).ok_or(Error::MissingPattern(k))?, *m.nu.get(i).ok_or(Error::MissingPattern(k))?);
            let bit = (k >> (q - 1 - pos)) & 1 == 1;
            let ok = match (kind, bit) {
                (_, true) => nu >= 0.0,
                (ProblemKind::Mpcc, false) => mu >= 0.0,
                (ProblemKind::Mpvc, false) => mu == 0.0,
            };
            if !ok {
                return Err(Error::PatternSignViolation { pattern: k, index: i });
            }
            row.push((mu, nu));
        }
        pairs.push(row);
    }
    let map = MirandaMap { specs, pairs };
    check_boundary(&|y: &[f64]| map.eval(y), &vec![0.0; q], &vec![1.0; q], face_grid)?;
    Ok(map)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirandaOptions {
    pub tol: f64,
    /// Number of times the longest side may be halved per coordinate.
    pub max_depth: usize,
    /// Samples per axis on each face.
    pub face_grid: usize,
}

impl Default for MirandaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_depth: 60,
            face_grid: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirandaResult {
    pub y: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
    pub bisections: usize,
    /// Times the nested coordinate search ran after bisection stopped certifying.
    pub nested_solves: usize,
    pub grid_fallbacks: usize,
}

fn grid_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * (k as f64) / ((n - 1) as f64)).collect()
}

/// Every point of the grid spanned by `axes`, with the remaining coordinates taken from
/// `base`.
fn for_each_grid_point<F>(base: &[f64], lo: &[f64], hi: &[f64], axes: &[usize], n: usize, mut f: F) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<bool>,
{
    let ticks: Vec<Vec<f64>> = axes.iter().map(|&a| grid_axis(lo[a], hi[a], n)).collect();
    let mut idx = vec![0usize; axes.len()];
    let mut y = base.to_vec();
    loop {
        for (k, &a) in axes.iter().enumerate() {
            y[a] = ticks[k][idx[k]];
        }
        if !f(&y)? {
            return Ok(());
        }
        let mut k = axes.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < ticks[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Whether `h_axis` has sign `want` (+1: >= 0, -1: <= 0) on the sampled face `y_axis = at`.
fn face_has_sign<F>(h: &F, lo: &[f64], hi: &[f64], axis: usize, at: f64, want: i8, n: usize) -> Result<bool>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let others: Vec<usize> = (0..lo.len()).filter(|&a| a != axis).collect();
    let mut base = lo.to_vec();
    base[axis] = at;
    let mut ok = true;
    for_each_grid_point(&base, lo, hi, &others, n, |y| {
        let v = h(y)?[axis];
        ok = if want > 0 { v >= 0.0 } else { v <= 0.0 };
        Ok(ok)
    })?;
    Ok(ok)
}

/// Checks `h_i <= 0` on `y_i = lo_i` and `h_i >= 0` on `y_i = hi_i` at the face samples.
pub fn check_boundary<F>(h: &F, lo: &[f64], hi: &[f64], n: usize) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    for axis in 0..lo.len() {
        if !face_has_sign(h, lo, hi, axis, lo[axis], -1, n)? || !face_has_sign(h, lo, hi, axis, hi[axis], 1, n)? {
            return Err(Error::BoundarySignViolation { axis });
        }
    }
    Ok(())
}

/// Finds `y` in `[0, 1]^q` with `|h(y)|_inf <= tol` by Miranda box bisection.
///
/// Each step halves the longest side and keeps the half whose new face carries the sign
/// the Miranda conditions ask for. When neither half certifies, a nested coordinate
/// bisection runs on the current box, and if that misses too the box shrinks to the grid
/// cell around the best sampled point.
pub fn miranda_solve<F>(q: usize, h: F, opts: &MirandaOptions) -> Result<MirandaResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if q == 0 {
        return Ok(MirandaResult {
            y: Vec::new(),
            residual: 0.0,
            converged: true,
            bisections: 0,
            nested_solves: 0,
            grid_fallbacks: 0,
        });
    }
    let mut lo = vec![0.0; q];
    let mut hi = vec![1.0; q];
    check_boundary(&h, &lo, &hi, opts.face_grid)?;

    let budget = opts.max_depth.saturating_mul(q);
    let mut best: (Vec<f64>, f64) = (Vec::new(), f64::INFINITY);
    let mut bisections = 0;
    let mut nested_solves = 0;
    let mut grid_fallbacks = 0;
    loop {
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let r = abs_max(&h(&center)?);
        if r < best.1 {
            best = (center.clone(), r);
        }
        if best.1 <= opts.tol {
            break;
        }
        if bisections >= budget {
            break;
        }
        let (axis, width) = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| b - a)
            .enumerate()
            .fold((0, -1.0), |acc, (k, w)| if w > acc.1 { (k, w) } else { acc });
        let mid = center[axis];
        if !(width > 0.0) || mid <= lo[axis] || mid >= hi[axis] {
            break;
        }
        bisections += 1;
        if face_has_sign(&h, &lo, &hi, axis, mid, 1, opts.face_grid)? {
            hi[axis] = mid;
        } else if face_has_sign(&h, &lo, &hi, axis, mid, -1, opts.face_grid)? {
            lo[axis] = mid;
        } else {
            if nested_solves == 0 {
                nested_solves += 1;
                let mut y = center.clone();
                nested(&h, q, &mut y, &lo, &hi, opts.max_depth, opts.tol, &mut best)?;
                if best.1 <= opts.tol {
                    break;
                }
            }
            grid_fallbacks += 1;
            let axes: Vec<usize> = (0..q).collect();
            let mut cell_best = (center.clone(), r);
            for_each_grid_point(&lo, &lo, &hi, &axes, opts.face_grid, |y| {
                let v = abs_max(&h(y)?);
                if v < cell_best.1 {
                    cell_best = (y.to_vec(), v);
                }
                Ok(true)
            })?;
            if cell_best.1 < best.1 {
                best = cell_best.clone();
            }
            if best.1 <= opts.tol {
                break;
            }
            let steps = opts.face_grid.max(2) - 1;
            for a in 0..q {
                let step = (hi[a] - lo[a]) / steps as f64;
                let c = cell_best.0[a];
                let (nl, nh) = ((c - step).max(lo[a]), (c + step).min(hi[a]));
                lo[a] = nl;
                hi[a] = nh;
            }
        }
    }
    Ok(MirandaResult {
        converged: best.1 <= opts.tol,
        y: best.0,
        residual: best.1,
        bisections,
        nested_solves,
        grid_fallbacks,
    })
}

/// Nested bisection on a Miranda box: coordinate `k - 1` is bisected on the sign of
/// `h_{k-1}` after coordinates `0..k-1` have been solved for recursively. Returns whether
/// `|h_j(y)| <= tol` for all `j < k`; `best` tracks the smallest full residual seen.
#[allow(clippy::too_many_arguments)]
fn nested<F>(h: &F, k: usize, y: &mut [f64], lo: &[f64], hi: &[f64], depth: usize, tol: f64, best: &mut (Vec<f64>, f64)) -> Result<bool>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if k == 0 {
        return Ok(true);
    }
    let a = k - 1;
    let (mut l, mut r) = (lo[a], hi[a]);
    for _ in 0..=depth {
        y[a] = 0.5 * (l + r);
        nested(h, a, y, lo, hi, depth, tol, best)?;
        let v = h(y)?;
        let full = abs_max(&v);
        if full < best.1 {
            *best = (y.to_vec(), full);
        }
        if v[..k].iter().all(|x| x.abs() <= tol) {
            return Ok(true);
        }
        if v[a] > 0.0 {
            r = y[a];
        } else {
            l = y[a];
        }
        if !(l < r) {
            break;
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombineOptions {
    pub miranda: MirandaOptions,
    pub biactive_cap: usize,
    /// Weights are rounded to multiples of `2^-weight_bits` for the exact re-check.
    pub weight_bits: u32,
}

impl Default for CombineOptions {
    fn default() -> Self {
        Self {
            miranda: MirandaOptions::default(),
            biactive_cap: 4,
            weight_bits: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombineResult {
    pub target: StationarityKind,
    pub specs: Vec<PsiSpec>,
    pub biactive: Vec<usize>,
    pub y_star: Vec<f64>,
    pub patterns: Vec<AlphaPattern>,
    pub weights: Vec<f64>,
    /// The A(alpha) multipliers that were combined, one per pattern.
    pub inputs: Vec<MultiplierVector<Rational>>,
    pub combined: MultiplierVector<f64>,
    /// `|psi_i|` at the combined multipliers, per biactive index.
    pub residuals: Vec<f64>,
    /// Largest violation of the weak stationarity system by `combined`.
    pub weak_residual: f64,
    pub exact_weights: Vec<Rational>,
    pub exact_combined: MultiplierVector<Rational>,
    /// `exact_combined` satisfies the weak stationarity system exactly.
    pub exact_weak_ok: bool,
    pub converged: bool,
    pub miranda: MirandaResult,
}

impl CombineResult {
    pub fn max_residual(&self) -> f64 {
        abs_max(&self.residuals)
    }
}

/// Curve specs that encode a P(alpha), P(d) or curve target.
pub fn target_specs(inst: &Instance, sets: &IndexSets, target: &StationarityKind) -> Result<Vec<PsiSpec>> {
    let kind = inst.kind();
    let (_, _, p) = inst.sizes();
    let flat = |form| PsiSpec::new(form, Phi::zero(), kind);
    match target {
        StationarityKind::PAlpha(alpha) => {
            if alpha.len() != p {
                return Err(Error::LengthMismatch {
                    what: "alpha pattern",
                    expected: p,
                    found: alpha.len(),
                });
            }
            sets.biactive
                .iter()
                .map(|&i| flat(if alpha.bit(i) { CurveForm::GraphOverA } else { CurveForm::GraphOverB }))
                .collect()
        }
        StationarityKind::PD(d) => {
            if d.len() != p {
                return Err(Error::LengthMismatch {
                    what: "d vector",
                    expected: p,
                    found: d.len(),
                });
            }
            sets.biactive
                .iter()
                .map(|&i| {
                    let di = d.get(i);
                    if di.is_zero() {
                        flat(CurveForm::GraphOverB)
                    } else {
                        PsiSpec::new(CurveForm::GraphOverA, Phi::Linear((Rational::one() - di) / di), kind)
                    }
                })
                .collect()
        }
        StationarityKind::Curve(specs) => {
            if specs.len() != sets.q() {
                return Err(Error::LengthMismatch {
                    what: "curve specs",
                    expected: sets.q(),
                    found: specs.len(),
                });
            }
            Ok(specs.clone())
        }
        other => Err(Error::InvalidPsiSpec(format!("cannot combine towards {other}"))),
    }
}

/// Minimizes the l1 norm of the multipliers over a system (split `w = pos - neg`).
fn min_l1(sys: &LinearSystem) -> Result<LpOutcome> {
    let n = sys.num_vars();
    let mut ext = LinearSystem::new(3 * n);
    let widen = |row: &[Rational]| {
        let mut r = row.to_vec();
        r.resize(3 * n, Rational::zero());
        r
    };
    for (row, rhs) in sys.eq_rows() {
        ext.add_eq(widen(row), rhs.clone());
    }
    for (row, rhs) in sys.ineq_rows() {
        ext.add_le(widen(row), rhs.clone());
    }
    for (k, b) in sys.bounds().iter().enumerate() {
        ext.set_bound(k, b.clone());
    }
    for k in 0..n {
        let mut row = vec![Rational::zero(); 3 * n];
        row[k] = Rational::one();
        row[n + k] = -Rational::one();
        row[2 * n + k] = Rational::one();
        ext.add_eq(row, Rational::zero());
        ext.set_bound(n + k, Bound::nonneg());
        ext.set_bound(2 * n + k, Bound::nonneg());
    }
    let mut cost = vec![Rational::zero(); n];
    cost.resize(3 * n, Rational::one());
    Ok(match solve_min(&ext, &cost)? {
        LpOutcome::Feasible(v) => LpOutcome::Feasible(v[..n].to_vec()),
        other => other,
    })
}

fn round_weights(w: &[f64], bits: u32) -> Vec<Rational> {
    let mut r: Vec<Rational> = w
        .iter()
        .map(|&x| {
            let v = dyadic_round(x, bits);
            if v.is_negative() {
                Rational::zero()
            } else {
                v
            }
        })
        .collect();
    if let Some(big) = (0..r.len()).max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a))) {
        let rest: Rational = r.iter().enumerate().filter(|(k, _)| *k != big).map(|(_, v)| v.clone()).sum();
        r[big] = Rational::one() - rest;
    }
    r
}

/// The A(alpha) multipliers of a point, one per pattern, ready to be combined towards
/// any number of targets.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaInputs {
    pub sets: IndexSets,
    pub weak: LinearSystem,
    pub patterns: Vec<AlphaPattern>,
    pub inputs: Vec<MultiplierVector<Rational>>,
}

/// Solves every A(alpha) system at `x` for an l1-minimal multiplier.
pub fn alpha_inputs(inst: &Instance, x: &CandidatePoint, opts: &CombineOptions) -> Result<AlphaInputs> {
    let sets = index_sets(inst, x)?;
    if sets.q() > opts.biactive_cap {
        return Err(Error::BiactiveCapExceeded {
            q: sets.q(),
            cap: opts.biactive_cap,
        });
    }
    let (_, _, p) = inst.sizes();
    let lay = Layout::of(inst);
    let weak = build_weak_system(inst, x, &sets)?;
    let patterns = sets.alpha_patterns(p);

    let mut inputs = Vec::with_capacity(patterns.len());
    for (k, alpha) in patterns.iter().enumerate() {
        let mut sys = weak.clone();
        for (b, &i) in branch_sets(inst, &sets, &StationarityKind::AAlpha(alpha.clone()))?
            .iter()
            .zip(&sets.biactive)
        {
            for row in &b[0].rows {
                let mut coeffs = vec![Rational::zero(); lay.len()];
                coeffs[lay.mu(i)] = row.mu_coef.clone();
                coeffs[lay.nu(i)] = row.nu_coef.clone();
                if row.is_eq {
                    sys.add_eq(coeffs, row.rhs.clone());
                } else {
                    sys.add_le(coeffs, row.rhs.clone());
                }
            }
        }
        if let LpOutcome::Infeasible(certificate) = solve_feasibility(&sys)? {
            return Err(Error::AlphaInfeasible { pattern: k, certificate });
        }
        let w = match min_l1(&sys)? {
            LpOutcome::Feasible(w) => w,
            _ => return Err(Error::Internal("l1 multiplier problem has no optimum")),
        };
        if !sys.is_satisfied_by(&w) {
            return Err(Error::Internal("l1 multiplier violates its system"));
        }
        inputs.push(MultiplierVector::from_flat(&w, lay.l, lay.m, lay.p)?);
    }
    Ok(AlphaInputs {
        sets,
        weak,
        patterns,
        inputs,
    })
}

pub fn combine(inst: &Instance, x: &CandidatePoint, target: &StationarityKind, opts: &CombineOptions) -> Result<CombineResult> {
    let prepared = alpha_inputs(inst, x, opts)?;
    combine_prepared(inst, &prepared, target, opts)
}

/// [`combine`] with the A(alpha) multipliers already computed.
pub fn combine_prepared(
    inst: &Instance,
    prepared: &AlphaInputs,
    target: &StationarityKind,
    opts: &CombineOptions,
) -> Result<CombineResult> {
    let AlphaInputs {
        sets,
        weak,
        patterns,
        inputs,
    } = prepared;
    let specs = target_specs(inst, sets, target)?;
    let lay = Layout::of(inst);

    let float_inputs: Vec<Option<MultiplierVector<f64>>> = inputs.iter().map(|m| Some(m.to_f64())).collect();
    let map = build_h(specs.clone(), inst.kind(), &sets.biactive, &float_inputs, opts.miranda.face_grid)?;
    let miranda = miranda_solve(map.q(), |y| map.eval(y), &opts.miranda)?;
    let w = weights(&miranda.y);

    let flat_inputs: Vec<Vec<f64>> = float_inputs.iter().flatten().map(MultiplierVector::to_flat).collect();
    let mut combined_flat = vec![0.0; lay.len()];
    for (wk, m) in w.iter().zip(&flat_inputs) {
        for (c, v) in combined_flat.iter_mut().zip(m) {
            *c += wk * v;
        }
    }
    let combined = MultiplierVector::from_flat(&combined_flat, lay.l, lay.m, lay.p)?;
    let residuals = sets
        .biactive
        .iter()
        .zip(&specs)
        .map(|(&i, spec)| psi_value(spec, combined.mu[i], combined.nu[i]).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?;
    let weak_residual = weak.max_violation_f64(&combined_flat);

    let exact_weights = round_weights(&w, opts.weight_bits);
    let mut exact_flat = vec![Rational::zero(); lay.len()];
    for (wk, m) in exact_weights.iter().zip(inputs.iter()) {
        for (c, v) in exact_flat.iter_mut().zip(m.to_flat()) {
            *c += wk * v;
        }
    }
    let exact_weak_ok = weak.is_satisfied_by(&exact_flat);
    let exact_combined = MultiplierVector::from_flat(&exact_flat, lay.l, lay.m, lay.p)?;

    Ok(CombineResult {
        target: target.clone(),
        specs,
        biactive: sets.biactive.clone(),
        y_star: miranda.y.clone(),
        patterns: patterns.clone(),
        weights: w,
        inputs: inputs.clone(),
        combined,
        residuals,
        weak_residual,
        exact_weights,
        exact_combined,
        exact_weak_ok,
        converged: miranda.converged,
        miranda,
    })
}
