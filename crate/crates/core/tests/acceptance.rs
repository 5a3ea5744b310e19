//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    brute_force_extremal_count, eig2, fd_jacobian_full, fd_jacobian_reduced, hyperbolic_type,
    naive_eval, sup_norm_diff,
};
use ell_volterra::classify::{
    check_face_invariance, detect_ell, extremal_count, ExtremalClass, ExtremalIter,
};
use ell_volterra::dynamics::{
    detect_cycle, jacobian, omega_limit_estimate, steps_to_reach, Chart, FixedPointType, LimitKind,
    HYPERBOLIC_MARGIN,
};
use ell_volterra::families::{
    cycle_family, m2_operator, m3_analyze, m3_operator, CycleSpec, M2Params, M3Regime, M3SymParams,
};
use ell_volterra::qso::sup_distance;
use ell_volterra::sample::{random_operator, uniform_point};
use ell_volterra::{apply_canonical, canonical_form, SimplexPoint};

const RESIDUAL_TOL: f64 = 1e-12;
const CANONICAL_TOL: f64 = 1e-12;
const FACE_TOL: f64 = 1e-12;
const CONVERGENCE_TOL: f64 = 1e-8;
const RAY_TOL: f64 = 1e-7;
const BOUND_SLACK: f64 = 1e-14;
const JACOBIAN_TOL: f64 = 1e-6;
const CLUSTER_TOL: f64 = 1e-7;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn extremal_counts() -> Outcome {
    let expected = [
        (ExtremalClass::Ell(3), 8u64),
        (ExtremalClass::Ell(2), 48),
        (ExtremalClass::Ell(1), 216),
        (ExtremalClass::All, 729),
    ];
    for (class, n) in expected {
        let got = extremal_count(3, class).map_err(|e| e.to_string())?;
        check(got == n.into(), || {
            format!("m=3 {class:?}: got {got}, expected {n}")
        })?;
    }
    let mut checked = 0;
    for m in 2..=4 {
        let classes = (0..=m).map(ExtremalClass::Ell).chain([ExtremalClass::All]);
        for class in classes {
            let formula = extremal_count(m, class).map_err(|e| e.to_string())?;
            let ell = match class {
                ExtremalClass::Ell(ell) => ell,
                ExtremalClass::All => 0,
            };
            let oracle = brute_force_extremal_count(m, ell);
            let mut listed = 0u64;
            for v in ExtremalIter::new(m, class).map_err(|e| e.to_string())? {
                check((0..ell).all(|k| v.volterra_at(k)), || {
                    format!("m={m} {class:?}: operator outside the class")
                })?;
                listed += 1;
            }
            check(formula == oracle.into() && listed == oracle, || {
                format!(
                    "m={m} {class:?}: formula {formula}, enumerated {listed}, brute force {oracle}"
                )
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "m=3 line 8/48/216/729; {checked} (m, class) pairs with m <= 4 enumerated"
    ))
}

fn canonical_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(2..=6);
        let ell = rng.random_range(0..=m);
        let v = random_operator(m, ell, 0.3, &mut rng);
        let cf = canonical_form(&v, detect_ell(&v).ell).map_err(|e| e.to_string())?;
        let p = v.to_nested();
        for _ in 0..5 {
            let x = uniform_point(m, &mut rng);
            let direct = v.apply(&x).map_err(|e| e.to_string())?;
            let canon = apply_canonical(&cf, &x).map_err(|e| e.to_string())?;
            let oracle = naive_eval(&p, x.coords());
            worst = worst
                .max(direct.distance(&canon))
                .max(sup_distance(canon.coords(), &oracle));
        }
    }
    check(worst <= CANONICAL_TOL, || format!("sup-norm gap {worst:e}"))?;
    Ok(format!(
        "5000 points on 1000 operators, worst gap {worst:e}"
    ))
}

fn vertex_fixed_points() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut fixed, mut moved) = (0, 0);
    for _ in 0..500 {
        let m = rng.random_range(2..=6);
        let ell = rng.random_range(0..=m);
        let v = random_operator(m, ell, 0.5, &mut rng);
        for i in 0..m {
            let e = SimplexPoint::vertex(m, i);
            let is_fixed = v.apply(&e).map_err(|e| e.to_string())?.distance(&e) <= RESIDUAL_TOL;
            let criterion = v.get(i, i, i) == 1.0;
            check(is_fixed == criterion, || {
                format!(
                    "vertex {} of an m={m} operator: fixed={is_fixed}, P_ii,i={}",
                    i + 1,
                    v.get(i, i, i)
                )
            })?;
            if is_fixed {
                fixed += 1;
            } else {
                moved += 1;
            }
        }
    }
    Ok(format!(
        "{fixed} fixed and {moved} moved vertices, all matching P_ii,i = 1"
    ))
}

fn random_cycle_spec(rng: &mut ChaCha8Rng) -> CycleSpec {
    let m = rng.random_range(2..=5);
    let ell = rng.random_range(0..m);
    let mut free: Vec<usize> = (ell..m).collect();
    for t in (1..free.len()).rev() {
        free.swap(t, rng.random_range(0..=t));
    }
    let mut cycles = Vec::new();
    let mut rest = &free[..];
    while !rest.is_empty() {
        let len = rng.random_range(1..=rest.len());
        cycles.push(rest[..len].to_vec());
        rest = &rest[len..];
        if rng.random_bool(0.3) {
            break;
        }
    }
    CycleSpec::new(m, ell, cycles).expect("generated specs are valid")
}

fn cycle_construction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut periods = Vec::new();
    for _ in 0..50 {
        let spec = random_cycle_spec(&mut rng);
        let v = cycle_family(&spec).map_err(|e| e.to_string())?;
        for cycle in &spec.cycles {
            let start = SimplexPoint::vertex(spec.m, cycle[0]);
            let found = detect_cycle(&v, &start, 0, 12).map_err(|e| e.to_string())?;
            let period = match found {
                Some(c) => c.period,
                // period one: the vertex is fixed
                None if v.fixes_vertex(cycle[0]) => 1,
                None => 0,
            };
            check(period == cycle.len(), || {
                format!("{spec:?}: cycle {cycle:?} detected with period {period}")
            })?;
            periods.push(period);
        }
    }
    let longest = periods.iter().max().copied().unwrap_or(0);
    Ok(format!(
        "{} cycles in 50 specs, periods 1..={longest} all exact",
        periods.len()
    ))
}

fn face_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut faces = 0;
    for _ in 0..200 {
        let m = rng.random_range(2..=5);
        let ell = rng.random_range(1..=m);
        let v = random_operator(m, ell, 0.3, &mut rng);
        for mask in 0u32..(1 << ell) {
            let face: Vec<usize> = (0..ell).filter(|i| mask & (1 << i) != 0).collect();
            let r = check_face_invariance(&v, &face, 100, &mut rng).map_err(|e| e.to_string())?;
            check(r.invariant, || {
                format!(
                    "face {face:?} of an m={m}, ell={ell} operator left at {:?} -> {:?}",
                    r.counterexample, r.image
                )
            })?;
            faces += 1;
        }
    }
    Ok(format!(
        "{faces} faces, 100 interior samples each, zeroed coordinates <= {FACE_TOL:e}"
    ))
}

fn two_species_dynamics() -> Outcome {
    let starts: Vec<SimplexPoint> = (0..=50)
        .map(|k| {
            SimplexPoint::new(vec![k as f64 / 50.0, 1.0 - k as f64 / 50.0]).expect("on the simplex")
        })
        .collect();
    let lambda0 = SimplexPoint::vertex(2, 1);

    let v = m2_operator(&M2Params::new(0.5, 0.25).map_err(|e| e.to_string())?);
    for s in &starts[1..] {
        let n =
            steps_to_reach(&v, s, &lambda0, CONVERGENCE_TOL, 100_000).map_err(|e| e.to_string())?;
        check(n.is_some(), || {
            format!("c=0.25: start {s:?} did not reach (0,1)")
        })?;
    }

    let v = m2_operator(&M2Params::new(0.5, 0.75).map_err(|e| e.to_string())?);
    let star = SimplexPoint::new(vec![0.5, 0.5]).expect("on the simplex");
    let residual = v.apply(&star).map_err(|e| e.to_string())?.distance(&star);
    check(residual <= RESIDUAL_TOL, || {
        format!("lambda* residual {residual:e}")
    })?;
    let mut slowest = 0;
    for s in starts.iter().filter(|s| s.distance(&lambda0) > 0.0) {
        let n =
            steps_to_reach(&v, s, &star, CONVERGENCE_TOL, 100_000).map_err(|e| e.to_string())?;
        let n = n.ok_or_else(|| format!("c=0.75: start {s:?} did not reach lambda*"))?;
        slowest = slowest.max(n);
    }
    check(
        v.apply(&lambda0).map_err(|e| e.to_string())? == lambda0,
        || "lambda0 not fixed".into(),
    )?;
    Ok(format!("50 starts to (0,1) at c=0.25; 50 non-lambda0 starts to (1/2,1/2) at c=0.75 (slowest {slowest} steps)"))
}

fn m3_regimes() -> Outcome {
    let triples = [
        (0.5, 0.5, 0.25),
        (0.5, 0.5, 0.75),
        (0.8, 0.2, 0.75),
        (0.6, 0.3, 0.75),
    ];
    let mut classified = 0;
    for (a, b, c) in triples {
        let p = M3SymParams::new(a, b, c).map_err(|e| e.to_string())?;
        let v = m3_operator(&p);
        let r = m3_analyze(&p, 0.0).map_err(|e| e.to_string())?;
        for f in &r.fixed_points {
            let loc = &f.report.location;
            let residual = sup_distance(&naive_eval(&v.to_nested(), loc.coords()), loc.coords());
            check(residual <= RESIDUAL_TOL, || {
                format!("({a},{b},{c}) {}: residual {residual:e}", f.name)
            })?;
            if f.report.kind == FixedPointType::NonHyperbolic {
                continue;
            }
            let fd = fd_jacobian_reduced(&v, loc.coords());
            let moduli: Vec<f64> = eig2(&fd).iter().map(|(re, im)| re.hypot(*im)).collect();
            let oracle = hyperbolic_type(&moduli, HYPERBOLIC_MARGIN);
            check(oracle == f.report.kind.as_str(), || {
                format!(
                    "({a},{b},{c}) {}: analytic {}, finite differences {oracle}",
                    f.name,
                    f.report.kind.as_str()
                )
            })?;
            classified += 1;
        }
        if let Some(line) = &r.fixed_line {
            check(line.max_residual <= RESIDUAL_TOL, || {
                format!("fixed line residual {:e}", line.max_residual)
            })?;
        }
        if r.regime == M3Regime::FixedLine {
            for t in 0..20 {
                let nu = t as f64 / 10.0;
                let limit_x = (2.0 * c - 1.0) / (2.0 * (c - b) * (1.0 + nu));
                let target =
                    SimplexPoint::new(vec![limit_x, nu * limit_x, 1.0 - (1.0 + nu) * limit_x])
                        .map_err(|e| e.to_string())?;
                let x0 = 0.1 / (1.0 + nu);
                let start = SimplexPoint::new(vec![x0, nu * x0, 1.0 - (1.0 + nu) * x0])
                    .map_err(|e| e.to_string())?;
                let n = steps_to_reach(&v, &start, &target, RAY_TOL, 100_000)
                    .map_err(|e| e.to_string())?;
                check(n.is_some(), || {
                    format!("ray nu={nu} did not reach its limit")
                })?;
            }
        }
    }
    Ok(format!("4 triples; {classified} hyperbolic classifications confirmed by finite differences; 20 rays converge"))
}

fn contraction_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let p = M3SymParams::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..=0.5),
            rng.random_range(0.0..=0.5),
        )
        .map_err(|e| e.to_string())?;
        let q = p.a.max(2.0 * p.b).max(2.0 * p.c);
        let v = m3_operator(&p);
        let mut x = uniform_point(3, &mut rng);
        for _ in 0..100 {
            let y = v.apply(&x).map_err(|e| e.to_string())?;
            for k in 0..2 {
                let excess = y[k] - q * x[k];
                worst = worst.max(excess);
                check(excess <= BOUND_SLACK, || {
                    format!("{p:?}: coordinate {} grew by {excess:e}", k + 1)
                })?;
            }
            x = y;
        }
    }
    Ok(format!(
        "100 parameter draws x 100 steps, largest x' - q x = {worst:e}"
    ))
}

fn jacobian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(2..=6);
        let ell = rng.random_range(0..=m);
        let v = random_operator(m, ell, 0.2, &mut rng);
        let x = uniform_point(m, &mut rng);
        for (chart, fd) in [
            (Chart::Full, fd_jacobian_full(&v, x.coords())),
            (
                Chart::LastCoordinateEliminated,
                fd_jacobian_reduced(&v, x.coords()),
            ),
        ] {
            let j = jacobian(&v, x.coords(), chart).map_err(|e| e.to_string())?;
            let analytic: Vec<Vec<f64>> = (0..j.nrows())
                .map(|r| (0..j.ncols()).map(|c| j[(r, c)]).collect())
                .collect();
            let gap = sup_norm_diff(&analytic, &fd);
            worst = worst.max(gap);
            check(gap <= JACOBIAN_TOL, || {
                format!("{chart:?} chart, m={m}: gap {gap:e}")
            })?;
        }
    }
    Ok(format!(
        "100 (V, x) pairs in both charts, worst gap {worst:e}"
    ))
}

fn interior_limit() -> Outcome {
    let v = m3_operator(&M3SymParams::new(0.5, 0.5, 0.75).map_err(|e| e.to_string())?);
    let lambda3 = SimplexPoint::new(vec![1.0 / 3.0; 3]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut starts = 0;
    while starts < 20 {
        let x = uniform_point(3, &mut rng);
        if x.coords().iter().any(|&c| c < 1e-3) {
            continue;
        }
        starts += 1;
        let o = omega_limit_estimate(&v, &x, 5000, 64).map_err(|e| e.to_string())?;
        check(
            o.kind == LimitKind::FixedPoint && o.representatives.len() == 1,
            || format!("start {x:?}: limit {}", o.kind.label()),
        )?;
        let rep = &o.representatives[0];
        check(
            rep.distance(&lambda3) <= CLUSTER_TOL && rep.coords().iter().all(|&c| c >= 0.1),
            || format!("start {x:?}: limit point {rep:?}"),
        )?;
    }
    Ok("20 interior starts, each with the single limit point (1/3,1/3,1/3)".into())
}

fn qualitative_classification() -> Outcome {
    let mut notes = Vec::new();
    for (a, b, c, lambda3_kind, edge_kind) in [
        (
            0.5,
            0.5,
            0.75,
            FixedPointType::Attracting,
            FixedPointType::Saddle,
        ),
        (
            0.8,
            0.2,
            0.75,
            FixedPointType::Saddle,
            FixedPointType::Attracting,
        ),
    ] {
        let p = M3SymParams::new(a, b, c).map_err(|e| e.to_string())?;
        let r = m3_analyze(&p, 0.0).map_err(|e| e.to_string())?;
        let kind = |n: &str| r.fixed_point(n).map(|f| f.report.kind);
        check(kind("lambda3") == Some(lambda3_kind), || {
            format!("({a},{b},{c}) lambda3: {:?}", kind("lambda3"))
        })?;
        check(
            kind("lambda1") == Some(edge_kind) && kind("lambda2") == Some(edge_kind),
            || {
                format!(
                    "({a},{b},{c}) edge points: {:?} {:?}",
                    kind("lambda1"),
                    kind("lambda2")
                )
            },
        )?;
        // transversal eigenvalue at lambda1 vs the shortcut formula; reported, not asserted
        let y1 = (2.0 * c - 1.0) / (2.0 * c - a);
        let direct = p.reduced_jacobian(0.0, y1)[0][0];
        let shortcut = (2.0 * c * (1.0 - a) + 2.0 * b * (c - 1.0)) / (2.0 * c - a);
        notes.push(format!(
            "({a},{b},{c}) mu1(lambda1) direct {direct:.6}, shortcut formula {shortcut:.6}"
        ));
    }
    Ok(format!(
        "a<2b and a>2b classifications confirmed; closed forms not asserted [{}]",
        notes.join("; ")
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("extremal counts", extremal_counts),
        ("canonical form equivalence", canonical_equivalence),
        ("vertex fixed-point criterion", vertex_fixed_points),
        ("cycle construction", cycle_construction),
        ("face invariance", face_invariance),
        ("two-species dynamics", two_species_dynamics),
        ("symmetric three-species regimes", m3_regimes),
        ("contraction bound", contraction_bound),
        ("jacobian correctness", jacobian_correctness),
        ("interior limit point", interior_limit),
        (
            "qualitative eigenvalue classification",
            qualitative_classification,
        ),
    ];
    let mut failures = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", n + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
