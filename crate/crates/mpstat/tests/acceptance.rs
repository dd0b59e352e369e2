//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails.

#[path = "../../core/tests/support/lp_oracle.rs"]
mod lp_oracle;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use mpstat::corpus::{family_points, load_fixtures, load_seeds, CorpusPoint};
use mpstat_core::combiner::{alpha_inputs, combine_prepared, psi_value, CombineOptions, CurveExpr, CurveForm, Phi, PsiSpec};
use mpstat_core::cones::{check_gcq, union_equal, PolyCone, UnionCone};
use mpstat_core::instance::index_sets;
use mpstat_core::stationarity::{check, classify_all, d_grid, satisfies, LatticeReport, StationarityKind};
use mpstat_core::{AlphaPattern, ProblemKind, Rational};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn r(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

fn rows(v: &[[i64; 2]]) -> Vec<Vec<Rational>> {
    v.iter().map(|row| row.iter().map(|&x| r(x)).collect()).collect()
}

fn cone(half: &[[i64; 2]], eq: &[[i64; 2]]) -> PolyCone {
    PolyCone::new(2, rows(half), rows(eq)).unwrap()
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(problems: &[String], detail: String) -> Outcome {
    if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
        for p in problems {
            eprintln!("  {p}");
        }
    }
    match problems.first() {
        None => Outcome { ok: true, detail },
        Some(first) => Outcome {
            ok: false,
            detail: format!("{} problems, first: {first}", problems.len()),
        },
    }
}

fn within(start: Instant, limit: Duration, problems: &mut Vec<String>) -> f64 {
    let t = start.elapsed();
    if t > limit {
        problems.push(format!("took {:.2} s, limit {} s", t.as_secs_f64(), limit.as_secs()));
    }
    t.as_secs_f64()
}

struct Point {
    cp: CorpusPoint,
    local_min: Option<bool>,
}

fn label(cp: &CorpusPoint) -> String {
    format!("{} seed {} point {}", cp.family, cp.seed, cp.index)
}

fn load_points() -> (Vec<Point>, Vec<Point>) {
    let seeds = load_seeds(&corpus_dir().join("seeds.toml")).unwrap();
    let mut generated = Vec::new();
    for f in &seeds {
        for cp in family_points(f).unwrap() {
            let local_min = mpstat::oracle::brute_local_min(&cp.instance, &cp.point).ok();
            generated.push(Point { cp, local_min });
        }
    }
    let fixtures = load_fixtures(&corpus_dir().join("fixtures"))
        .unwrap()
        .into_iter()
        .map(|fx| {
            let cp = CorpusPoint {
                family: fx.name.clone(),
                seed: 0,
                index: 0,
                instance: fx.instance,
                point: fx.point,
            };
            let local_min = mpstat::oracle::brute_local_min(&cp.instance, &cp.point).ok();
            Point { cp, local_min }
        })
        .collect();
    (generated, fixtures)
}

fn counterexamples() -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    let fixtures = load_fixtures(&corpus_dir().join("fixtures")).unwrap();
    let nonneg_x2 = cone(&[[0, -1]], &[[1, 0]]);
    let nonpos_x1 = cone(&[[1, 0]], &[[0, 1]]);
    let origin = cone(&[], &[[1, 0], [0, 1]]);
    let cases = [
        ("mpvc-gcq-gap-1", false, true, nonneg_x2, origin),
        ("mpvc-gcq-gap-2", true, false, nonpos_x1.clone(), nonpos_x1),
    ];
    for (name, gcq, gcq_nlp0, lin, lin_nlp0) in cases {
        let fx = fixtures.iter().find(|f| f.name == name).expect("fixture present");
        let rep = check_gcq(&fx.instance, &fx.point, fx.tangent.as_ref()).unwrap();
        if rep.gcq != gcq || rep.gcq_nlp0 != gcq_nlp0 {
            problems.push(format!("{name}: gcq {} gcq_nlp0 {}", rep.gcq, rep.gcq_nlp0));
        }
        if !union_equal(&rep.linearized, &UnionCone::single(lin)).unwrap() {
            problems.push(format!("{name}: linearized cone differs"));
        }
        if !union_equal(&UnionCone::single(rep.nlp0_linearized.clone()), &UnionCone::single(lin_nlp0)).unwrap() {
            problems.push(format!("{name}: tightened linearized cone differs"));
        }
    }
    let t = within(start, Duration::from_secs(1), &mut problems);
    outcome(&problems, format!("both parts exact, {:.0} ms", t * 1e3))
}

fn instances_with_minimizers(points: &[Point], kind: ProblemKind) -> (usize, Vec<&Point>) {
    let mut instances = std::collections::BTreeSet::new();
    let mut certified = Vec::new();
    for p in points.iter().filter(|p| p.cp.instance.kind() == kind && p.cp.family.starts_with("affine")) {
        instances.insert((p.cp.family.clone(), p.cp.seed));
        if p.local_min == Some(true) {
            certified.push(p);
        }
    }
    (instances.len(), certified)
}

fn p_alpha_at_minimizers(points: &[Point]) -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    let (instances, certified) = instances_with_minimizers(points, ProblemKind::Mpcc);
    if instances < 200 {
        problems.push(format!("only {instances} MPCC instances"));
    }
    let mut checks = 0;
    for p in &certified {
        let (inst, x) = (&p.cp.instance, &p.cp.point);
        let sets = index_sets(inst, x).unwrap();
        let (_, _, np) = inst.sizes();
        for alpha in sets.alpha_patterns(np) {
            checks += 1;
            if !check(inst, x, &StationarityKind::PAlpha(alpha.clone())).unwrap().holds {
                problems.push(format!("{}: P({alpha}) fails", label(&p.cp)));
            }
        }
    }
    let t = within(start, Duration::from_secs(60), &mut problems);
    outcome(
        &problems,
        format!("{instances} instances, {} minimizers, {checks} P(alpha) checks, {t:.1} s", certified.len()),
    )
}

fn p_d_at_minimizers(points: &[Point]) -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    let (mpcc, mut certified) = instances_with_minimizers(points, ProblemKind::Mpcc);
    let (mpvc, more) = instances_with_minimizers(points, ProblemKind::Mpvc);
    certified.extend(more);
    if mpcc < 200 || mpvc < 100 {
        problems.push(format!("{mpcc} MPCC and {mpvc} MPVC instances"));
    }
    let mut checks = 0;
    for p in &certified {
        let (inst, x) = (&p.cp.instance, &p.cp.point);
        let sets = index_sets(inst, x).unwrap();
        let (_, _, np) = inst.sizes();
        for d in d_grid(&sets, np, 4) {
            checks += 1;
            if !check(inst, x, &StationarityKind::PD(d.clone())).unwrap().holds {
                problems.push(format!("{}: P(d) fails for d = {d}", label(&p.cp)));
            }
        }
    }
    let t = within(start, Duration::from_secs(120), &mut problems);
    outcome(
        &problems,
        format!("{mpcc} + {mpvc} instances, {} minimizers, {checks} P(d) checks, {t:.1} s", certified.len()),
    )
}

fn lattice(points: &[Point]) -> Vec<LatticeReport> {
    points
        .iter()
        .map(|p| {
            let sets = index_sets(&p.cp.instance, &p.cp.point).unwrap();
            let (_, _, np) = p.cp.instance.sizes();
            classify_all(&p.cp.instance, &p.cp.point, &d_grid(&sets, np, 4)).unwrap()
        })
        .collect()
}

fn equivalences(points: &[Point], reports: &[LatticeReport]) -> Outcome {
    let mut problems = Vec::new();
    for (p, rep) in points.iter().zip(reports) {
        let all_a = rep.a_alpha.iter().all(|(_, v)| v.holds);
        let all_p = rep.p_alpha.iter().all(|(_, v)| v.holds);
        let any_a = rep.a_alpha.iter().any(|(_, v)| v.holds);
        let any_p = rep.p_alpha.iter().any(|(_, v)| v.holds);
        let checks = [
            ("LinB = all A(alpha)", rep.linb.holds == all_a),
            ("LinB = all P(alpha)", rep.linb.holds == all_p),
            ("M = some P(alpha)", rep.m.holds == any_p),
            ("A = some A(alpha)", rep.a.holds == any_a),
            ("LinB via cones", rep.linb.holds == rep.linb_cone),
        ];
        for (name, ok) in checks {
            if !ok {
                problems.push(format!("{}: {name}", label(&p.cp)));
            }
        }
    }
    outcome(&problems, format!("{} points, zero discrepancies", points.len()))
}

fn mpvc_shortcut(points: &[Point], reports: &[LatticeReport]) -> Outcome {
    let mut problems = Vec::new();
    let (mut seen, mut held) = (0, 0);
    for (p, rep) in points.iter().zip(reports) {
        if p.cp.instance.kind() != ProblemKind::Mpvc {
            continue;
        }
        seen += 1;
        let (inst, x) = (&p.cp.instance, &p.cp.point);
        let (_, _, np) = inst.sizes();
        let zero = AlphaPattern::zeros(np);
        let v = check(inst, x, &StationarityKind::AAlpha(zero)).unwrap();
        if !v.holds {
            continue;
        }
        held += 1;
        let w = v.witness.expect("holding verdicts carry a witness");
        let sets = index_sets(inst, x).unwrap();
        if !sets.biactive.iter().all(|&i| w.mu[i].is_zero()) {
            problems.push(format!("{}: A(0) witness has mu != 0 on the biactive set", label(&p.cp)));
        }
        if !satisfies(inst, x, &StationarityKind::M, &w).unwrap() || !rep.m.holds {
            problems.push(format!("{}: A(0) witness rejected as an M witness", label(&p.cp)));
        }
    }
    outcome(&problems, format!("{seen} MPVC points, A(0) holds at {held}, all M witnesses"))
}

fn combiner(points: &[Point]) -> Outcome {
    let start = Instant::now();
    let mut problems = Vec::new();
    let opts = CombineOptions::default();
    let (mut eligible, mut combines) = (0, 0);
    for p in points {
        let (inst, x) = (&p.cp.instance, &p.cp.point);
        let Ok(prepared) = alpha_inputs(inst, x, &opts) else {
            continue;
        };
        eligible += 1;
        let (_, _, np) = inst.sizes();
        let mut targets: Vec<StationarityKind> = prepared.patterns.iter().cloned().map(StationarityKind::PAlpha).collect();
        targets.extend(d_grid(&prepared.sets, np, 4).into_iter().map(StationarityKind::PD));
        for target in targets {
            combines += 1;
            let at = format!("{} target {target}", label(&p.cp));
            let res = match combine_prepared(inst, &prepared, &target, &opts) {
                Ok(res) => res,
                Err(e) => {
                    problems.push(format!("{at}: {e}"));
                    continue;
                }
            };
            let sum: f64 = res.weights.iter().sum();
            if !res.converged || res.max_residual() > 1e-8 {
                problems.push(format!("{at}: residual {:e}", res.max_residual()));
            }
            if res.weak_residual > 1e-8 {
                problems.push(format!("{at}: weak residual {:e}", res.weak_residual));
            }
            if (sum - 1.0).abs() > 1e-12 {
                problems.push(format!("{at}: weights sum to {sum}"));
            }
            if !res.exact_weak_ok {
                problems.push(format!("{at}: exact recombination fails"));
            }
            if !check(inst, x, &target).unwrap().holds {
                problems.push(format!("{at}: classifier rejects the target"));
            }
        }
    }
    let t = start.elapsed().as_secs_f64();
    outcome(&problems, format!("{eligible} points, {combines} combines, classifier agrees on all, {t:.1} s"))
}

fn psi_families() -> Vec<PsiSpec> {
    use CurveExpr::*;
    let q = |n: i64, d: i64| Rational::new(n.into(), d.into());
    let sin_sq = Neg(Box::new(Pow(Box::new(Sin(Box::new(Mul(Box::new(Const(5.0)), Box::new(T))))), 2)));
    let neg_sq = Neg(Box::new(Pow(Box::new(T), 2)));
    let phis = [
        Phi::zero(),
        Phi::Linear(q(1, 1)),
        Phi::Linear(q(5, 2)),
        Phi::Linear(q(1, 4)),
        Phi::Table(vec![(q(0, 1), q(0, 1)), (q(-1, 2), q(-1, 1)), (q(-2, 1), q(-1, 3))]),
        Phi::Expr(sin_sq),
        Phi::Expr(neg_sq),
    ];
    let mut out = Vec::new();
    for kind in [ProblemKind::Mpcc, ProblemKind::Mpvc] {
        for form in [CurveForm::GraphOverA, CurveForm::GraphOverB] {
            for phi in &phis {
                out.push(PsiSpec::new(form, phi.clone(), kind).unwrap());
            }
        }
    }
    out
}

fn psi_suite() -> Outcome {
    const SAMPLES: usize = 10_000;
    let mut problems = Vec::new();
    let families = psi_families();
    for (k, spec) in families.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        // the curve lives in (a, b) = (mu, nu) for MPCC and (-mu, nu) for MPVC
        let to_mn = |a: f64, b: f64| match spec.kind() {
            ProblemKind::Mpcc => (a, b),
            ProblemKind::Mpvc => (-a, b),
        };
        let mut bad = |what: &str, a: f64, b: f64, v: f64| {
            problems.push(format!("family {k} {what} at (a, b) = ({a}, {b}): psi = {v}"));
        };
        for _ in 0..SAMPLES {
            let coord = |rng: &mut ChaCha8Rng| match rng.gen_range(0..6) {
                0 => 0.0,
                1 => f64::from(rng.gen_range(-3i32..=3)),
                _ => rng.gen_range(-10.0..10.0),
            };
            let (a, b) = (coord(&mut rng), coord(&mut rng));
            let (mu, nu) = to_mn(a, b);
            let v = psi_value(spec, mu, nu).unwrap();
            if a >= 0.0 && v > 0.0 {
                bad("sign with a >= 0", a, b, v);
            }
            if b >= 0.0 && v < 0.0 {
                bad("sign with b >= 0", a, b, v);
            }
            // zero set: the closed strong quadrant plus the curve in the open third quadrant
            let t = rng.gen_range(-5.0..-1e-3);
            let phi = spec.phi_value(t);
            let on = match spec.form() {
                CurveForm::GraphOverA => (t, phi),
                CurveForm::GraphOverB => (phi, t),
            };
            let (mu, nu) = to_mn(on.0, on.1);
            let v = psi_value(spec, mu, nu).unwrap();
            if v != 0.0 {
                bad("nonzero on the curve", on.0, on.1, v);
            }
            let delta = rng.gen_range(1e-6..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let off = match spec.form() {
                CurveForm::GraphOverA => (t, phi + delta),
                CurveForm::GraphOverB => (phi + delta, t),
            };
            let (mu, nu) = to_mn(off.0, off.1);
            let v = psi_value(spec, mu, nu).unwrap();
            if v == 0.0 {
                bad("zero off the curve", off.0, off.1, v);
            }
            let (qa, qb) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
            let (mu, nu) = to_mn(qa, qb);
            let v = psi_value(spec, mu, nu).unwrap();
            if v != 0.0 {
                bad("nonzero in the strong quadrant", qa, qb, v);
            }
        }
    }
    outcome(&problems, format!("{} families x {SAMPLES} samples, zero violations", families.len()))
}

fn lp_core() -> Outcome {
    let mut problems = Vec::new();
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = lp_oracle::random_system(&mut rng);
        let cost = lp_oracle::random_cost(&mut rng, sys.num_vars());
        if let Err(e) = lp_oracle::compare(&sys, &cost) {
            problems.push(format!("seed {seed}: {e}"));
        }
    }
    outcome(&problems, "1000 systems agree with the face-enumeration oracle, certificates verified".into())
}

fn main() {
    let start = Instant::now();
    let (mut points, fixtures) = load_points();
    let generated = points.len();
    points.extend(fixtures);
    let reports = lattice(&points);

    let results = [
        ("1 counterexample cones and CQ verdicts", counterexamples()),
        ("2 P(alpha) at MPCC minimizers", p_alpha_at_minimizers(&points[..generated])),
        ("3 P(d) at MPCC and MPVC minimizers", p_d_at_minimizers(&points[..generated])),
        ("4 equivalence lattice", equivalences(&points, &reports)),
        ("5 MPVC A(0) implies M", mpvc_shortcut(&points, &reports)),
        ("6 combiner soundness", combiner(&points)),
        ("7 psi property suite", psi_suite()),
        ("8 LP core against the oracle", lp_core()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    println!("acceptance: {} of {} criteria pass in {:.1} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
