//! Seeded random instances with small integer data.

use mpstat_core::instance::check_feasible;
use mpstat_core::stationarity::{check, StationarityKind};
use mpstat_core::{CandidatePoint, Instance, Polynomial, ProblemKind, Rational};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::brute_local_min;

const RETRIES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub n_max: usize,
    pub l_max: usize,
    pub m_max: usize,
    pub p_max: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_max: 4,
            l_max: 2,
            m_max: 1,
            p_max: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub seed: u64,
    pub instance: Instance,
    /// The first point always has a nonempty biactive set.
    pub points: Vec<CandidatePoint>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenError {
    #[error("seed {seed}: no acceptable sample after {RETRIES} attempts")]
    Exhausted { seed: u64 },
    #[error("invalid generator bounds: {0}")]
    Bounds(&'static str),
    #[error(transparent)]
    Core(#[from] mpstat_core::Error),
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

fn small(rng: &mut (impl Rng + ?Sized), lo: i64, hi: i64) -> Rational {
    int(rng.gen_range(lo..=hi))
}

/// `a.(x - x0) + value`
fn affine_through(rng: &mut impl Rng, x0: &[Rational], value: Rational) -> Polynomial {
    let a: Vec<Rational> = x0.iter().map(|_| small(rng, -2, 2)).collect();
    let shift: Rational = a.iter().zip(x0).map(|(ai, xi)| ai * xi).sum();
    Polynomial::affine(value - shift, &a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PairType {
    Biactive,
    PlusZero,
    ZeroPlus,
    MinusZero,
    MinusPlus,
}

/// Affine MPCC or MPVC with a feasible point whose first pair is biactive, plus up to two
/// further feasible lattice points nearby.
pub fn gen_affine(kind: ProblemKind, seed: u64, cfg: &GenConfig) -> Result<Generated, GenError> {
    if cfg.n_max < 2 || cfg.p_max == 0 || cfg.m_max >= cfg.n_max {
        return Err(GenError::Bounds("need n_max >= 2, p_max >= 1 and m_max < n_max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RETRIES {
        if let Some(instance_and_point) = sample(kind, cfg, &mut rng)? {
            let (instance, x0) = instance_and_point;
            let mut points = vec![x0.clone()];
            for _ in 0..8 {
                if points.len() == 3 {
                    break;
                }
                let y: Vec<Rational> = x0.coords().iter().map(|v| v + small(&mut rng, -1, 1)).collect();
                let y = CandidatePoint::new(y);
                if !points.contains(&y) && check_feasible(&instance, &y)? {
                    points.push(y);
                }
            }
            return Ok(Generated { seed, instance, points });
        }
    }
    Err(GenError::Exhausted { seed })
}

fn sample(kind: ProblemKind, cfg: &GenConfig, rng: &mut impl Rng) -> Result<Option<(Instance, CandidatePoint)>, GenError> {
    let n = rng.gen_range(2..=cfg.n_max);
    let l = rng.gen_range(0..=cfg.l_max);
    let m = rng.gen_range(0..=cfg.m_max.min(n - 1));
    let p = rng.gen_range(1..=cfg.p_max);
    let x0: Vec<Rational> = (0..n).map(|_| small(rng, -2, 2)).collect();

    let active_g: Vec<bool> = (0..l).map(|_| rng.gen_bool(0.6)).collect();
    let ineq: Vec<Polynomial> = active_g
        .iter()
        .map(|&active| {
            let v = if active { Rational::zero() } else { small(rng, -3, -1) };
            affine_through(rng, &x0, v)
        })
        .collect();
    let eq: Vec<Polynomial> = (0..m).map(|_| affine_through(rng, &x0, Rational::zero())).collect();

    let mut types = Vec::with_capacity(p);
    let mut gfun = Vec::with_capacity(p);
    let mut hfun = Vec::with_capacity(p);
    for i in 0..p {
        let t = if i == 0 || rng.gen_bool(0.4) {
            PairType::Biactive
        } else {
            match (kind, rng.gen_range(0..3)) {
                (ProblemKind::Mpcc, 0) => PairType::PlusZero,
                (ProblemKind::Mpcc, _) => PairType::ZeroPlus,
                (ProblemKind::Mpvc, 0) => PairType::PlusZero,
                (ProblemKind::Mpvc, 1) => PairType::ZeroPlus,
                (ProblemKind::Mpvc, _) => {
                    if rng.gen_bool(0.5) {
                        PairType::MinusZero
                    } else {
                        PairType::MinusPlus
                    }
                }
            }
        };
        let (gv, hv) = match t {
            PairType::Biactive => (int(0), int(0)),
            PairType::PlusZero => (small(rng, 1, 3), int(0)),
            PairType::ZeroPlus => (int(0), small(rng, 1, 3)),
            PairType::MinusZero => (small(rng, -3, -1), int(0)),
            PairType::MinusPlus => (small(rng, -3, -1), small(rng, 1, 3)),
        };
        let g = affine_through(rng, &x0, gv);
        let h = affine_through(rng, &x0, hv);
        if g.degree() == 0 || h.degree() == 0 {
            return Ok(None);
        }
        types.push(t);
        gfun.push(g);
        hfun.push(h);
    }

    let grad_of = |poly: &Polynomial| poly.gradient_at(&x0);
    let mut grad = vec![Rational::zero(); n];
    let mut add = |scale: &Rational, v: Vec<Rational>| {
        for (gk, vk) in grad.iter_mut().zip(v) {
            *gk += scale * vk;
        }
    };
    let mode = rng.gen_range(0..10);
    if mode < 8 {
        // gradient from a multiplier vector; modes 0..4 keep strong signs
        let strong = mode < 4;
        for (g, &active) in ineq.iter().zip(&active_g) {
            if active {
                add(&-small(rng, 0, 2), grad_of(g)?);
            }
        }
        for h in &eq {
            add(&-small(rng, -2, 2), grad_of(h)?);
        }
        for ((g, h), t) in gfun.iter().zip(&hfun).zip(&types) {
            let (mu, nu) = pair_multipliers(kind, *t, strong, rng);
            let mu_sign = if kind == ProblemKind::Mpcc { int(1) } else { int(-1) };
            add(&(mu_sign * mu), grad_of(g)?);
            add(&nu, grad_of(h)?);
        }
    } else {
        for gk in grad.iter_mut() {
            *gk = small(rng, -2, 2);
        }
    }
    let mut objective = Polynomial::affine(Rational::zero(), &grad);
    if rng.gen_bool(0.3) {
        for (k, xk) in x0.iter().enumerate() {
            let w = small(rng, 0, 2);
            if !w.is_zero() {
                let shifted = &Polynomial::var(n, k) - &Polynomial::constant(n, xk.clone());
                let sq = &shifted * &shifted;
                objective = &objective + &sq.scale(&w);
            }
        }
    }
    let instance = Instance::new(kind, n, objective, ineq, eq, gfun, hfun)?;
    let x = CandidatePoint::new(x0);
    if !check_feasible(&instance, &x)? {
        return Err(mpstat_core::Error::Internal("generated point is infeasible").into());
    }
    Ok(Some((instance, x)))
}

/// Multipliers `(mu, nu)` that satisfy the weak sign rules of the pair type, and the
/// strong ones on biactive pairs if `strong`.
fn pair_multipliers(kind: ProblemKind, t: PairType, strong: bool, rng: &mut impl Rng) -> (Rational, Rational) {
    let free = |rng: &mut dyn rand::RngCore| small(rng, -2, 2);
    let nonneg = |rng: &mut dyn rand::RngCore| small(rng, 0, 2);
    match (kind, t) {
        (ProblemKind::Mpcc, PairType::Biactive) if strong => (nonneg(rng), nonneg(rng)),
        (ProblemKind::Mpcc, PairType::Biactive) => (free(rng), free(rng)),
        (ProblemKind::Mpcc, PairType::PlusZero) => (int(0), free(rng)),
        (ProblemKind::Mpcc, PairType::ZeroPlus) => (free(rng), int(0)),
        (ProblemKind::Mpvc, PairType::Biactive) if strong => (int(0), nonneg(rng)),
        (ProblemKind::Mpvc, PairType::Biactive) => (nonneg(rng), free(rng)),
        (ProblemKind::Mpvc, PairType::ZeroPlus) => (nonneg(rng), int(0)),
        (ProblemKind::Mpvc, PairType::PlusZero) => (int(0), free(rng)),
        (ProblemKind::Mpvc, PairType::MinusZero) => (int(0), nonneg(rng)),
        (_, _) => (int(0), int(0)),
    }
}

/// `x4 <= a x1, x4 <= b x2, x4 <= c x3` with pairs `(x1, x2)` and `(x2, x3)` and
/// objective `s (x1 + x2 + x3 - x4)`. Kept only if the classifier reports M without S
/// at the origin and the oracle confirms a local minimizer.
pub fn gen_ss_small(seed: u64) -> Result<Generated, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 4;
    let v = |k| Polynomial::var(n, k);
    for _ in 0..RETRIES {
        let coef: Vec<i64> = (0..3).map(|_| rng.gen_range(2..=6)).collect();
        let scale = small(&mut rng, 1, 3);
        let ineq: Vec<Polynomial> = coef
            .iter()
            .enumerate()
            .map(|(k, &a)| &v(3) - &v(k).scale(&int(a)))
            .collect();
        let sum = &(&(&v(0) + &v(1)) + &v(2)) - &v(3);
        let inst = Instance::new(ProblemKind::Mpcc, n, sum.scale(&scale), ineq, vec![], vec![v(0), v(1)], vec![v(1), v(2)])?;
        let x = CandidatePoint::new(vec![Rational::zero(); n]);
        let m = check(&inst, &x, &StationarityKind::M)?.holds;
        let s = check(&inst, &x, &StationarityKind::S)?.holds;
        if m && !s && brute_local_min(&inst, &x)? {
            return Ok(Generated {
                seed,
                instance: inst,
                points: vec![x],
            });
        }
    }
    Err(GenError::Exhausted { seed })
}
