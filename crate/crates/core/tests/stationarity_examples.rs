mod support;

use mpstat_core::combiner::{combine, CombineOptions};
use mpstat_core::instance::index_sets;
use mpstat_core::rational::{int, ratio};
use mpstat_core::stationarity::{
    build_weak_system, check, classify_all, d_grid, satisfies, MultiplierVector, StationarityKind,
};
use mpstat_core::{AlphaPattern, CandidatePoint, DVector, Error, Instance, Polynomial, ProblemKind, Rational};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn lin(coeffs: &[i64]) -> Polynomial {
    let c: Vec<Rational> = coeffs.iter().map(|&v| int(v)).collect();
    Polynomial::affine(int(0), &c)
}

/// min c.x  s.t.  0 <= x1 _|_ x2 >= 0
fn plane(kind: ProblemKind, c: &[i64]) -> Instance {
    Instance::new(kind, 2, lin(c), vec![], vec![], vec![lin(&[1, 0])], vec![lin(&[0, 1])]).unwrap()
}

fn origin(n: usize) -> CandidatePoint {
    CandidatePoint::new(vec![int(0); n])
}

fn mv(mu: &[i64], nu: &[i64]) -> MultiplierVector<Rational> {
    MultiplierVector {
        lambda: vec![],
        eta: vec![],
        mu: mu.iter().map(|&v| int(v)).collect(),
        nu: nu.iter().map(|&v| int(v)).collect(),
    }
}

#[test]
fn weak_system_shape() {
    let inst = plane(ProblemKind::Mpcc, &[1, 1]);
    let x = origin(2);
    let sets = index_sets(&inst, &x).unwrap();
    let sys = build_weak_system(&inst, &x, &sets).unwrap();
    assert_eq!(sys.num_vars(), 2);
    assert_eq!(sys.eq_rows().len(), 2);
    // grad f - mu grad G - nu grad H = 0 with mu = nu = 1
    assert!(sys.is_satisfied_by(&[int(1), int(1)]));
    assert!(!sys.is_satisfied_by(&[int(1), int(0)]));
}

#[test]
fn plus_objective_is_strongly_stationary() {
    let inst = plane(ProblemKind::Mpcc, &[1, 1]);
    let x = origin(2);
    let v = check(&inst, &x, &StationarityKind::S).unwrap();
    assert!(v.holds);
    assert_eq!(v.witness.unwrap(), mv(&[1], &[1]));
}

#[test]
fn minus_objective_splits_the_alpha_patterns() {
    let inst = plane(ProblemKind::Mpcc, &[1, -1]);
    let x = origin(2);
    let a0 = check(&inst, &x, &StationarityKind::AAlpha(AlphaPattern::new(vec![false]))).unwrap();
    assert!(a0.holds);
    assert_eq!(a0.witness.unwrap(), mv(&[1], &[-1]));
    let a1 = check(&inst, &x, &StationarityKind::AAlpha(AlphaPattern::new(vec![true]))).unwrap();
    assert!(!a1.holds);
    let cert = a1.certificate.expect("infeasible verdicts carry a certificate");
    assert!(!cert.ineq.is_empty() || !cert.lower.is_empty() || !cert.upper.is_empty());
    assert!(!check(&inst, &x, &StationarityKind::M).unwrap().holds);
    assert!(!check(&inst, &x, &StationarityKind::S).unwrap().holds);
    assert!(check(&inst, &x, &StationarityKind::A).unwrap().holds);
    assert!(!check(&inst, &x, &StationarityKind::LinB).unwrap().holds);
}

#[test]
fn no_biactive_index_makes_everything_coincide() {
    // G = x1 > 0 at the point (1, 0)
    let inst = plane(ProblemKind::Mpcc, &[0, 1]);
    let x = CandidatePoint::new(vec![int(1), int(0)]);
    let report = classify_all(&inst, &x, &[]).unwrap();
    assert_eq!(report.q, 0);
    let all = [&report.weak, &report.a, &report.c, &report.m, &report.s, &report.linb];
    assert!(all.iter().all(|v| v.holds == report.weak.holds));
    assert!(report.consistent());
}

#[test]
fn strong_point_satisfies_every_kind() {
    for kind in [ProblemKind::Mpcc, ProblemKind::Mpvc] {
        let c = if kind == ProblemKind::Mpcc { [1, 1] } else { [0, 1] };
        let inst = plane(kind, &c);
        let x = origin(2);
        let sets = index_sets(&inst, &x).unwrap();
        let report = classify_all(&inst, &x, &d_grid(&sets, 1, 4)).unwrap();
        assert!(report.s.holds, "{kind}");
        assert!(report.p_d.iter().all(|(_, v)| v.holds));
        assert!(report.p_alpha.iter().all(|(_, v)| v.holds));
        assert!(report.linb.holds && report.linb_cone);
        assert!(report.consistent());
    }
}

#[test]
fn mpvc_negative_g_multiplier() {
    // f = x1 + x2, G = x1, H = x2: the gradient equation forces mu = -1, which the sign
    // condition on the biactive index excludes. x1 < 0 is a feasible descent direction.
    let inst = plane(ProblemKind::Mpvc, &[1, 1]);
    let x = origin(2);
    let weak = check(&inst, &x, &StationarityKind::Weak).unwrap();
    assert!(!weak.holds);
    assert!(weak.certificate.is_some());
    let inst = plane(ProblemKind::Mpvc, &[-1, 1]);
    let weak = check(&inst, &x, &StationarityKind::Weak).unwrap();
    assert_eq!(weak.witness.unwrap(), mv(&[1], &[1]));
    assert!(check(&inst, &x, &StationarityKind::A).unwrap().holds);
    assert!(!check(&inst, &x, &StationarityKind::M).unwrap().holds);
}

#[test]
fn p_d_follows_the_line() {
    // MPCC, f = -x1 - x2: mu = nu = -1 lies on (1-d) mu - d nu = 0 only for d = 1/2
    let inst = plane(ProblemKind::Mpcc, &[-1, -1]);
    let x = origin(2);
    for (d, expect) in [(ratio(1, 2), true), (ratio(1, 4), false), (int(0), false), (int(1), false)] {
        let v = check(&inst, &x, &StationarityKind::PD(DVector::new(vec![d.clone()]).unwrap())).unwrap();
        assert_eq!(v.holds, expect, "d = {d}");
    }
    assert!(check(&inst, &x, &StationarityKind::C).unwrap().holds);
}

#[test]
fn corrupted_witness_is_rejected() {
    let inst = plane(ProblemKind::Mpcc, &[1, 1]);
    let x = origin(2);
    assert!(satisfies(&inst, &x, &StationarityKind::S, &mv(&[1], &[1])).unwrap());
    assert!(!satisfies(&inst, &x, &StationarityKind::S, &mv(&[1], &[2])).unwrap());
    assert!(!satisfies(&inst, &x, &StationarityKind::S, &mv(&[-1], &[1])).unwrap());
}

#[test]
fn biactive_cap_is_enforced() {
    let n = 13;
    let g: Vec<_> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    let h = g.clone();
    let inst = Instance::new(ProblemKind::Mpcc, n, Polynomial::zero(n), vec![], vec![], g, h).unwrap();
    let err = check(&inst, &origin(n), &StationarityKind::M).unwrap_err();
    assert_eq!(err, Error::BiactiveCapExceeded { q: 13, cap: 12 });
}

#[test]
fn random_lattice_is_consistent() {
    for kind in [ProblemKind::Mpcc, ProblemKind::Mpvc] {
        for seed in 0..150u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, x) = support::random_instance::affine_at_origin(&mut rng, kind);
            let sets = index_sets(&inst, &x).unwrap();
            let (_, _, p) = inst.sizes();
            let report = classify_all(&inst, &x, &d_grid(&sets, p, 2)).unwrap();
            let broken: Vec<_> = report.flags.iter().filter(|(_, ok)| !ok).collect();
            assert!(broken.is_empty(), "{kind} seed {seed}: {broken:?}");
            for (v, k) in [(&report.s, "S"), (&report.m, "M"), (&report.weak, "W")] {
                if let Some(w) = &v.witness {
                    assert!(satisfies(&inst, &x, &v.kind, w).unwrap(), "{kind} seed {seed} {k}");
                }
            }
            if kind == ProblemKind::Mpvc {
                let (_, a0) = &report.a_alpha[0];
                if let Some(w) = &a0.witness {
                    assert!(satisfies(&inst, &x, &StationarityKind::M, w).unwrap(), "seed {seed}");
                }
            }
        }
    }
}

#[test]
fn combine_agrees_with_the_classifier() {
    let mut tried = 0;
    for kind in [ProblemKind::Mpcc, ProblemKind::Mpvc] {
        for seed in 0..80u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (inst, x) = support::random_instance::affine_at_origin(&mut rng, kind);
            let sets = index_sets(&inst, &x).unwrap();
            if sets.q() > 2 {
                continue;
            }
            let (_, _, p) = inst.sizes();
            for alpha in sets.alpha_patterns(p) {
                let target = StationarityKind::PAlpha(alpha);
                match combine(&inst, &x, &target, &CombineOptions::default()) {
                    Ok(r) => {
                        tried += 1;
                        assert!(r.converged && r.max_residual() <= 1e-8, "{kind} seed {seed}");
                        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                        assert!(r.exact_weak_ok);
                        assert!(check(&inst, &x, &target).unwrap().holds, "{kind} seed {seed}");
                    }
                    Err(Error::AlphaInfeasible { pattern, certificate }) => {
                        let failed = &sets.alpha_patterns(p)[pattern];
                        let v = check(&inst, &x, &StationarityKind::AAlpha(failed.clone())).unwrap();
                        assert!(!v.holds);
                        let _ = certificate;
                    }
                    Err(e) => panic!("{kind} seed {seed}: {e}"),
                }
            }
        }
    }
    assert!(tried > 20);
}
