#![allow(dead_code)]

use mpstat_core::{CandidatePoint, Instance, Polynomial, ProblemKind, Rational};
use rand::Rng;

fn small(rng: &mut impl Rng, lo: i64, hi: i64) -> Rational {
    Rational::from_integer(rng.gen_range(lo..=hi).into())
}

fn affine(rng: &mut impl Rng, n: usize, constant: Rational) -> Polynomial {
    let coeffs: Vec<Rational> = (0..n).map(|_| small(rng, -2, 2)).collect();
    Polynomial::affine(constant, &coeffs)
}

/// Random affine instance feasible at the origin, with a mix of index-set types and at
/// least one biactive index.
pub fn affine_at_origin(rng: &mut impl Rng, kind: ProblemKind) -> (Instance, CandidatePoint) {
    let n = rng.gen_range(2..=4);
    let p = rng.gen_range(1..=3);
    let l = rng.gen_range(0..=2);
    let m = rng.gen_range(0..=1);
    let zero = || Rational::from_integer(0.into());
    let ineq = (0..l)
        .map(|_| {
            let c = if rng.gen_bool(0.5) { zero() } else { small(rng, -3, -1) };
            affine(rng, n, c)
        })
        .collect();
    let eq = (0..m).map(|_| affine(rng, n, zero())).collect();
    let mut gfun = Vec::new();
    let mut hfun = Vec::new();
    for i in 0..p {
        let (gc, hc) = match (kind, if i == 0 { 0 } else { rng.gen_range(0..4) }) {
            (_, 0) => (zero(), zero()),
            (ProblemKind::Mpcc, 1) => (small(rng, 1, 3), zero()),
            (ProblemKind::Mpcc, _) => (zero(), small(rng, 1, 3)),
            (ProblemKind::Mpvc, 1) => (small(rng, -3, 3), zero()),
            (ProblemKind::Mpvc, 2) => (zero(), small(rng, 1, 3)),
            (ProblemKind::Mpvc, _) => (small(rng, -3, -1), small(rng, 1, 3)),
        };
        gfun.push(affine(rng, n, gc));
        hfun.push(affine(rng, n, hc));
    }
    let objective = affine(rng, n, zero());
    let inst = Instance::new(kind, n, objective, ineq, eq, gfun, hfun).expect("well-formed");
    (inst, CandidatePoint::new(vec![zero(); n]))
}
