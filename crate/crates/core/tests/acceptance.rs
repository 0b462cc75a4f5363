//! Acceptance criteria, run in order with one PASS/FAIL line each.

use std::io::Write as _;
use std::time::{Duration, Instant};

use ergolab::approx::{make_piecewise, piecewise_approximate};
use ergolab::conjugator::{build_conjugator, check_level_agreement, conjugate, verify_closeness, Conjugator};
use ergolab::experiments::cli::run_cli;
use ergolab::experiments::{genericity_sample, random_cocycle_system, random_piecewise, SampleRow};
use ergolab::rng::derive_seed;
use ergolab::skew::{flatten, make_skew, orbit_structure, relative_product, return_map};
use ergolab::space::{compose, cycle_census, random_automorphism, ratio};
use ergolab::tower::{build_tower, refine_tower};
use ergolab::wm::{dn_squared_exact, product_constant, product_dyadic_family, DnEvaluator, TestSet};
use ergolab::{Automorphism, CellSet, CellSpace, Census, Cocycle, Rational, SkewSystem};
use num_bigint::BigInt;
use num_rational::BigRational;

type Outcome = Result<String, String>;

fn sp(n: usize) -> CellSpace {
    CellSpace::new(n).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// Single cycle through all cells in a seeded order.
fn random_cycle(n: usize, seed: u64) -> Automorphism {
    let order = random_automorphism(sp(n), seed);
    let mut images = vec![0; n];
    for k in 0..n {
        images[order.apply(k)] = order.apply((k + 1) % n);
    }
    Automorphism::from_images(images).unwrap()
}

fn all_perms(n: usize) -> Vec<Automorphism> {
    fn rec(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Automorphism>) {
        if prefix.len() == n {
            out.push(Automorphism::from_images(prefix.clone()).unwrap());
            return;
        }
        for v in 0..n {
            if !prefix.contains(&v) {
                prefix.push(v);
                rec(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, &mut out);
    out
}

fn subsets(space: CellSpace) -> Vec<CellSet> {
    let n = space.resolution();
    (0u32..1 << n)
        .map(|mask| CellSet::from_indices(space, (0..n).filter(|i| mask >> i & 1 == 1)).unwrap())
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let t0 = Automorphism::rotation(sp(1024));
    let tower = build_tower(&t0, 10, ratio(1, 100)).map_err(|e| e.to_string())?;
    ensure(tower.error_mass() == ratio(4, 1024), || format!("error mass {}", tower.error_mass()))?;
    for (i, a) in tower.levels().iter().enumerate() {
        for b in &tower.levels()[i + 1..] {
            ensure(a.is_disjoint(b), || "levels overlap".into())?;
        }
    }
    for i in 0..9 {
        for z in tower.levels()[i].indices() {
            ensure(tower.levels()[i + 1].contains(t0.apply(z)), || format!("T0 misses level {}", i + 1))?;
        }
        ensure(tower.levels()[i].len() == tower.levels()[i + 1].len(), || "level sizes differ".into())?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("error_mass {} in {:?}", tower.error_mass(), start.elapsed()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let base = Automorphism::rotation(sp(360));
    let mut worst = Rational::from_integer(0);
    for trial in 0..50u64 {
        let t = random_cocycle_system(&base, 6, derive_seed(2, trial)).unwrap();
        let target = random_piecewise(&base, 6, derive_seed(2_000, trial)).unwrap();
        let spec = piecewise_approximate(&target, Rational::new(1, 3)).unwrap();
        let r = make_piecewise(&base, &spec).unwrap();
        let tower = build_tower(&base, 8, Rational::from_integer(1)).unwrap();
        ensure(tower.error_mass() == Rational::from_integer(0), || "nonzero tower error".into())?;
        let rt = refine_tower(&tower, &base, spec.partition()).unwrap();
        let q = build_conjugator(&t, &rt, &spec).map_err(|e| e.to_string())?;
        let v = conjugate(&q, &t).unwrap();
        // every column, levels 0..=6
        for col in rt.columns() {
            for z in col.cells.indices() {
                let mut cell = z;
                for i in 0..7 {
                    ensure(v.cocycle().map(cell) == &spec.reps()[col.labels[i]], || {
                        format!("trial {trial}: cocycle mismatch at cell {cell}, level {i}")
                    })?;
                    cell = base.apply(cell);
                }
            }
        }
        check_level_agreement(&v, &r, &tower).map_err(|e| e.to_string())?;
        let c = verify_closeness(&v, &r, 8, tower.error_mass()).unwrap();
        ensure(c.distance <= Rational::new(1, 8), || format!("trial {trial}: distance {}", c.distance))?;
        worst = worst.max(c.distance);
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("50 trials, worst distance {worst} <= 1/8 in {:?}", start.elapsed()))
}

fn criterion_3() -> Outcome {
    let mut systems = 0;
    for n in 1..=3 {
        for m in 1..=3 {
            let base_sets = subsets(sp(n));
            let fiber_sets = subsets(sp(m));
            let tests: Vec<TestSet> = base_sets
                .iter()
                .flat_map(|b| fiber_sets.iter().map(move |f| TestSet::product(b, f)))
                .collect();
            let fibers = all_perms(m);
            for base in all_perms(n) {
                let mut idx = vec![0usize; n];
                loop {
                    let maps = idx.iter().map(|&i| fibers[i].clone()).collect();
                    let t = make_skew(base.clone(), Cocycle::new(sp(m), maps).unwrap()).unwrap();
                    check_joining(&t)?;
                    systems += 1;
                    // advance the odometer over cocycles
                    let mut k = 0;
                    while k < n {
                        idx[k] += 1;
                        if idx[k] < fibers.len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == n {
                        break;
                    }
                }
            }
            for a in &tests {
                for b in &tests {
                    let mut count = 0;
                    for z in 0..n {
                        for y in 0..m {
                            for y2 in 0..m {
                                count += usize::from(a.contains(z, y) && b.contains(z, y2));
                            }
                        }
                    }
                    ensure(product_constant(a, b).unwrap() == ratio(count, n * m * m), || {
                        format!("product constant differs from joining mass at N={n}, M={m}")
                    })?;
                }
            }
        }
    }
    Ok(format!("{systems} systems, all product pairs"))
}

fn check_joining(t: &SkewSystem) -> Result<(), String> {
    let p = relative_product(t);
    let (n, m) = (t.base_resolution(), t.fiber_resolution());
    let mu = ratio(1, n * m);
    let mut first = vec![0usize; n * m];
    let mut second = vec![0usize; n * m];
    let mut diag = 0;
    for z in 0..n {
        for y in 0..m {
            for y2 in 0..m {
                first[z * m + y] += 1;
                second[z * m + y2] += 1;
                diag += usize::from(y == y2);
                let (tz, ty) = t.apply(z, y);
                let (_, ty2) = t.apply(z, y2);
                ensure(p.step(p.index(z, y, y2)) == p.index(tz, ty, ty2), || "action table".into())?;
                ensure(p.step(p.index(z, y2, y)) == p.index(tz, ty2, ty), || "flip does not commute".into())?;
            }
        }
    }
    let total = n * m * m;
    ensure(first.iter().chain(&second).all(|&c| ratio(c, total) == mu), || "marginal differs from mu".into())?;
    ensure(ratio(diag, total) == ratio(1, m), || "diagonal mass".into())?;
    ensure(p.diagonal_mass() == ratio(1, m), || "diagonal mass (library)".into())
}

fn criterion_4() -> Outcome {
    for trial in 0..100u64 {
        let l = 5 + (derive_seed(4, trial) % 8) as usize;
        let m = 2 + (derive_seed(40, trial) % 4) as usize;
        let base = random_cycle(l, derive_seed(400, trial));
        let t = random_cocycle_system(&base, m, derive_seed(4_000, trial)).unwrap();
        let rho = return_map(&t, 0);
        ensure(cycle_census(&flatten(&t)) == cycle_census(&rho).scaled(l), || format!("trial {trial}: flatten census"))?;
        let pair = Automorphism::from_images(
            (0..m * m).map(|i| rho.apply(i / m) * m + rho.apply(i % m)).collect(),
        )
        .unwrap();
        let s = orbit_structure(&relative_product(&t));
        let mut full = Census::new();
        full.merge(&s.diagonal);
        full.merge(&s.off_diagonal);
        ensure(full == cycle_census(&pair).scaled(l), || format!("trial {trial}: relative product census"))?;
    }
    Ok("100 systems".into())
}

fn criterion_5() -> Outcome {
    let t = make_skew(Automorphism::rotation(sp(8)), Cocycle::identity(sp(8), sp(4))).unwrap();
    let half = TestSet::product(&CellSet::full(sp(8)), &CellSet::range(sp(4), 0..2).unwrap());
    let full = TestSet::full(sp(8), sp(4));
    for steps in [1, 10, 100] {
        let v = dn_squared_exact(&t, &half, &half, steps).map_err(|e| e.to_string())?;
        ensure(v == ratio(3, 16), || format!("D_N^2 = {v} at N_steps = {steps}"))?;
        let z = dn_squared_exact(&t, &full, &full, steps).map_err(|e| e.to_string())?;
        ensure(z == Rational::from_integer(0), || format!("full grid D_N^2 = {z}"))?;
    }
    Ok("D_N^2 = 3/16 and 0".into())
}

/// Materializes `N_steps` images of every triple and sums with big rationals.
fn oracle_dn_squared(t: &SkewSystem, a: &TestSet, b: &TestSet, steps: usize) -> BigRational {
    let (n, m) = (t.base_resolution(), t.fiber_resolution());
    let g = n * m * m;
    let mut pair_mass = 0usize;
    for z in 0..n {
        for y in 0..m {
            for y2 in 0..m {
                pair_mass += usize::from(a.contains(z, y) && b.contains(z, y2));
            }
        }
    }
    let c = BigRational::new(BigInt::from(pair_mass), BigInt::from(g));
    let mut table = vec![Vec::with_capacity(g); steps];
    for z in 0..n {
        for y in 0..m {
            for y2 in 0..m {
                let mut p = (z, y, y2);
                for row in table.iter_mut() {
                    row.push(p);
                    let f = t.cocycle().map(p.0);
                    p = (t.base_map().apply(p.0), f.apply(p.1), f.apply(p.2));
                }
            }
        }
    }
    let mut total = BigRational::from_integer(BigInt::from(0));
    for point in 0..g {
        let hits = table
            .iter()
            .filter(|row| {
                let (pz, py, py2) = row[point];
                a.contains(pz, py) && b.contains(pz, py2)
            })
            .count();
        let d = BigRational::new(BigInt::from(hits), BigInt::from(steps)) - &c;
        total += &d * &d;
    }
    total / BigRational::from_integer(BigInt::from(g))
}

fn criterion_6() -> Outcome {
    let family = product_dyadic_family(sp(4), sp(2), 1);
    let mut worst_float = 0f64;
    for trial in 0..20u64 {
        let base = random_automorphism(sp(4), derive_seed(6, trial));
        let t = random_cocycle_system(&base, 2, derive_seed(60, trial)).unwrap();
        let eval = DnEvaluator::new(&t);
        for a in &family {
            for b in &family {
                let series = eval.series(a, b, 5).unwrap();
                for v in &series {
                    let exact = v.squared.ok_or("overflow")?;
                    let big = BigRational::new(BigInt::from(*exact.numer()), BigInt::from(*exact.denom()));
                    ensure(big == oracle_dn_squared(&t, a, b, v.steps), || {
                        format!("trial {trial}: exact mismatch at N_steps {}", v.steps)
                    })?;
                    let want = (*exact.numer() as f64 / *exact.denom() as f64).sqrt();
                    worst_float = worst_float.max((v.float - want).abs());
                }
            }
        }
    }
    ensure(worst_float < 1e-9, || format!("float deviation {worst_float:e}"))?;
    Ok(format!("20 systems x {} pairs, float deviation {worst_float:.1e}", family.len() * family.len()))
}

fn median_f64(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn median_rational(mut v: Vec<Rational>) -> Rational {
    v.sort();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / Rational::from_integer(2)
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let base = Automorphism::rotation(sp(128));
    let rows = genericity_sample(&base, 200, 15, 1, &[256]).map_err(|e| e.to_string())?;
    let compact: &SampleRow = rows.iter().find(|r| r.trial == -2).ok_or("missing compact baseline")?;
    let sampled: Vec<&SampleRow> = rows.iter().filter(|r| r.trial >= 0).collect();
    ensure(sampled.len() == 200, || "sample size".into())?;
    let med_dn = median_f64(sampled.iter().map(|r| r.dn.unwrap().value).collect());
    let med_defect = median_rational(sampled.iter().map(|r| r.defect.unwrap()).collect());
    let (compact_dn, compact_defect) = (compact.dn.unwrap().value, compact.defect.unwrap());
    let elapsed = start.elapsed();
    let summary = format!(
        "median D_N {med_dn:.6} vs compact {compact_dn:.6}; median defect {:.6} vs compact {:.6}; {elapsed:?}",
        to_f64(med_defect),
        to_f64(compact_defect)
    );
    ensure(med_dn < compact_dn, || summary.clone())?;
    ensure(med_defect < compact_defect, || summary.clone())?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(summary)
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn criterion_8() -> Outcome {
    for trial in 0..20u64 {
        let (n, m) = (6, 3);
        let base = random_automorphism(sp(n), derive_seed(8, trial));
        let t = random_cocycle_system(&base, m, derive_seed(80, trial)).unwrap();
        let kappa = (0..n).map(|z| random_automorphism(sp(m), derive_seed(800 + trial, z as u64))).collect();
        let q = Conjugator::new(Cocycle::new(sp(m), kappa).unwrap());
        let v = conjugate(&q, &t).unwrap();
        let fq = q.flatten();
        let grid_perm = random_automorphism(sp(n * m), derive_seed(8_000, trial));
        let pick = |parity: usize| {
            TestSet::from_points(n, m, (0..n * m).filter(|&i| grid_perm.apply(i) % 2 == parity).map(|i| (i / m, i % m))).unwrap()
        };
        let (a, b) = (pick(0), pick(1));
        let (qa, qb) = (a.transported(&fq).unwrap(), b.transported(&fq).unwrap());
        ensure(compose(&fq, &q.inverse().flatten()).unwrap().is_identity(), || "Q inverse".into())?;
        for steps in [1, 5, 17] {
            let lhs = dn_squared_exact(&t, &a, &b, steps).unwrap();
            let rhs = dn_squared_exact(&v, &qa, &qb, steps).unwrap();
            ensure(lhs == rhs, || format!("trial {trial}, N_steps {steps}: {lhs} vs {rhs}"))?;
        }
    }
    Ok("20 conjugate pairs".into())
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("system.txt");
    let system = random_cocycle_system(&Automorphism::rotation(sp(12)), 3, 99).unwrap();
    std::fs::write(&input, system.to_text()).unwrap();
    let input = input.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("tower", vec!["--N", "30", "--n", "4", "--eps", "1/2"]),
        ("approx", vec!["--scenario", "random_piecewise", "--N", "32", "--M", "4", "--seed", "5", "--eps", "1/3"]),
        ("conjugate", vec!["--scenario", "conjugation_demo", "--N", "64", "--M", "4", "--n", "8", "--eps", "1/3", "--seed", "3"]),
        ("wm", vec!["--input", &input, "--depth", "1", "--kmax", "3", "--steps", "40"]),
        ("wm", vec!["--scenario", "product_wm", "--N", "16", "--M", "5", "--steps", "32", "--exact"]),
        ("sample", vec!["--N", "32", "--M", "5", "--trials", "12", "--steps", "16,64", "--seed", "9"]),
        ("roundtrip", vec!["--scenario", "random_piecewise", "--N", "16", "--M", "3", "--seed", "4"]),
    ];
    let mut checked = 0;
    for (k, (cmd, flags)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
            let out = dir.path().join(format!("{k}-{cmd}-{rep}.out"));
            let mut argv = vec!["ergolab", cmd];
            argv.extend(flags.iter().copied());
            let out_str = out.to_str().unwrap().to_string();
            argv.extend(["--threads", threads, "--out", &out_str]);
            let code = run_cli(argv.clone());
            ensure(code == 0, || format!("{cmd} exited with {code}"))?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        ensure(!outputs[0].is_empty(), || format!("{cmd} produced no output"))?;
        ensure(outputs.iter().all(|o| *o == outputs[0]), || format!("{cmd} output differs between runs"))?;
        checked += 1;
    }
    Ok(format!("{checked} subcommand runs byte-identical across 2 repeats x threads {{1, 4}}"))
}

#[test]
fn acceptance_suite() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 Rohlin tower exactness", criterion_1),
        ("2 conjugation instance check", criterion_2),
        ("3 joining well-formedness", criterion_3),
        ("4 orbit-count identity", criterion_4),
        ("5 D_N closed forms", criterion_5),
        ("6 oracle equivalence", criterion_6),
        ("7 genericity echo", criterion_7),
        ("8 conjugation invariance of D_N", criterion_8),
        ("9 CLI reproducibility", criterion_9),
    ];
    let mut failures = Vec::new();
    let mut stdout = std::io::stdout();
    for (name, check) in criteria {
        let line = match check() {
            Ok(detail) => format!("[PASS] criterion {name}: {detail}\n"),
            Err(why) => {
                failures.push(name);
                format!("[FAIL] criterion {name}: {why}\n")
            }
        };
        // bypasses the test harness capture so the summary is always visible
        let _ = stdout.write_all(line.as_bytes());
        let _ = stdout.flush();
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
