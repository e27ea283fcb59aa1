//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use hsl::arith::{default_table, ramanujan_tau_exact, smooth_ideal_count, LambdaSpec, MultiplicativeFunction};
use hsl::experiment::{dickman_closed_form_error, j_bound_check, j_identity_check, run, ExperimentConfig, Options, Subcommand};
use hsl::field::{make_field, primes_up_to, FieldDescriptor, FieldElement, FieldSpec};
use hsl::regions::{cover_with_boxes, HyperbolicRegion};
use hsl::shifted::{essential_bound, positive_box, sum_over_hyperbolic, sum_over_hyperbolic_brute, ShiftedSumQuery, SumRegion};
use hsl::sieve::{
    inclusion_by_datum, large_sieve_bound, minimal_side, montgomery_check, partition_check, sifted_points, spacing, translated,
    CharacterFamily, SieveSystem,
};
use hsl::special::{verify_technical_1, verify_technical_2, Grid1, Grid2};
use hsl::{par, AxisBox, Complex64};
use num_bigint::BigInt;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::time::Instant;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rational() -> FieldDescriptor {
    make_field(&FieldSpec::Rational, None).unwrap()
}

fn sqrt5() -> FieldDescriptor {
    make_field(&FieldSpec::Quadratic(5), None).unwrap()
}

/// Five totally positive shifts per field: `1..=5` over Q, small balanced elements over Q(√5).
fn shifts(f: &FieldDescriptor) -> Vec<FieldElement> {
    if f.degree() == 1 {
        (1..=5).map(|a| f.element(a, 0)).collect()
    } else {
        [(1, 0), (2, 0), (1, 1), (3, 1), (3, -1)].iter().map(|&(a, b)| f.element(a, b)).collect()
    }
}

fn cube_box(f: &FieldDescriptor, x: f64) -> AxisBox {
    let d = f.degree();
    positive_box(&vec![x.powf(1.0 / d as f64); d])
}

fn j_identity() -> Outcome {
    let t = Instant::now();
    let r = j_identity_check(SEED, 200).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(r.pass && secs <= 60.0, format!("200 tuples, max rel err {:.2e} (tol 1e-6), {secs:.1} s (limit 60 s)", r.max_rel_err))
}

fn j_bound() -> Outcome {
    let t = Instant::now();
    let r = j_bound_check(SEED, 10_000).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        r.violations == 0 && secs <= 120.0,
        format!("10000 tuples, {} violations, max |J|/bound {:.6}, {secs:.1} s (limit 120 s)", r.violations, r.max_ratio),
    )
}

fn technical() -> Outcome {
    let a = verify_technical_1(&Grid1::default_grid());
    let b = verify_technical_2(&Grid2::default_grid());
    let ok = |r: &hsl::special::TechnicalReport| r.pass && r.points >= 10_000 && r.max_value <= 1.0 + 1e-9;
    outcome(
        ok(&a) && ok(&b),
        format!("first: {} points, max {:.12}; second: {} points, max {:.12}", a.points, a.max_value, b.points, b.max_value),
    )
}

fn box_cover() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let params: Vec<(f64, f64, f64, u64)> =
        (0..1000).map(|_| (10f64.powf(rng.gen_range(0.0..3.0)), 10f64.powf(rng.gen_range(0.0..3.0)), 10f64.powf(rng.gen_range(0.0..=3.0)), rng.gen())).collect();
    let results = par::map_ordered(&params, |&(t1, t2, u, seed)| {
        let r = HyperbolicRegion::new(vec![t1, t2], u).unwrap();
        let boxes = cover_with_boxes(&r);
        let volumes = boxes.iter().all(|b| ((b.volume() - r.x()) / r.x()).abs() <= 1e-12);
        let count = boxes.len() <= r.cover_count_bound();
        // region points by rejection from the bounding box in log coordinates
        let bb = r.bounding_box();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (mut sampled, mut missed) = (0, 0);
        while sampled < 10_000 {
            let x: Vec<f64> = bb.sides.iter().map(|s| (s.lo.ln() + rng.gen::<f64>() * (s.hi.ln() - s.lo.ln())).exp()).collect();
            if r.contains(&x) {
                sampled += 1;
                if !boxes.iter().any(|b| b.contains(&x)) {
                    missed += 1;
                }
            }
        }
        (volumes, count, missed)
    });
    let bad_volume = results.iter().filter(|r| !r.0).count();
    let bad_count = results.iter().filter(|r| !r.1).count();
    let missed: usize = results.iter().map(|r| r.2).sum();
    outcome(
        bad_volume == 0 && bad_count == 0 && missed == 0,
        format!("1000 regions x 10000 points: {missed} uncovered, {bad_volume} volume errors, {bad_count} over the count bound"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED + 5);
    let fields = [rational(), sqrt5()];
    let table = default_table();
    let mut worst: f64 = 0.0;
    let mut mismatched_terms = 0;
    for i in 0..50 {
        let f = &fields[i % 2];
        let x = 10f64.powf(rng.gen_range(1.0..=4.0));
        let (l, u, lambda) = if f.degree() == 1 {
            let spec = ["tau", "abs:ramanujan", "synthetic:sato-tate:seed=3"][i / 2 % 3];
            (f.element(rng.gen_range(1..=30), 0), 10f64.powf(rng.gen_range(0.0..=3.0)), LambdaSpec::parse(spec).unwrap().build(&table))
        } else {
            let spec = ["tau", "abs:synthetic:uniform:seed=7"][i / 2 % 2];
            let l = loop {
                let l = f.element(rng.gen_range(-6..=6), rng.gen_range(-6..=6));
                if !l.is_zero() {
                    break l;
                }
            };
            (l, rng.gen_range(1.0..8.0), LambdaSpec::parse(spec).unwrap().build(&table))
        };
        let t = x.powf(1.0 / f.degree() as f64);
        let region = HyperbolicRegion::new(vec![t; f.degree()], u).unwrap();
        let q = ShiftedSumQuery::new(f, f.ring(), l, SumRegion::Hyperbolic(region), lambda).unwrap();
        let fast = sum_over_hyperbolic(&q).unwrap();
        let slow = sum_over_hyperbolic_brute(&q).unwrap();
        if fast.terms != slow.terms {
            mismatched_terms += 1;
        }
        worst = worst.max((fast.value - slow.value).abs() / slow.value.abs().max(f64::MIN_POSITIVE));
    }
    outcome(worst <= 1e-9 && mismatched_terms == 0, format!("50 instances, max rel diff {worst:.2e}, {mismatched_terms} term-count mismatches"))
}

/// Every (field, shift, X, z) of the partition grid.
fn partition_grid() -> Vec<(FieldDescriptor, FieldElement, f64, f64)> {
    let mut out = Vec::new();
    for f in [rational(), sqrt5()] {
        for l in shifts(&f) {
            for x in [1e2, 1e3, 1e4] {
                for z in [2.0, 5.0, 11.0, 20.0] {
                    out.push((f.clone(), l.clone(), x, z));
                }
            }
        }
    }
    out
}

fn partition() -> Outcome {
    let grid = partition_grid();
    let lambda = MultiplicativeFunction::divisor();
    let mut failed = 0;
    let mut classes = 0;
    for (f, l, x, z) in &grid {
        let r = partition_check(f, &f.ring(), l, *z, &cube_box(f, *x), &lambda).unwrap();
        classes += r.classes;
        // τ is integer valued, so both totals are exact
        if !(r.ok && r.class_sum == r.direct_sum) {
            failed += 1;
        }
    }
    outcome(failed == 0, format!("{} instances, {classes} classes in total, {failed} failures", grid.len()))
}

fn inclusion() -> Outcome {
    let grid = partition_grid();
    let (mut data, mut points, mut violations, mut over) = (0, 0, 0, 0);
    for (f, l, x, z) in &grid {
        for (_, _, r) in inclusion_by_datum(f, &f.ring(), l, *z, &cube_box(f, *x), 1e7).unwrap() {
            data += 1;
            points += r.class_count;
            violations += r.violations;
            if r.class_count > r.sifted_count {
                over += 1;
            }
        }
    }
    outcome(
        violations == 0 && over == 0,
        format!("{} instances, {data} data, {points} points: {violations} outside the sifted set, {over} classes larger than it", grid.len()),
    )
}

struct SieveInstance {
    field: FieldDescriptor,
    system: SieveSystem,
    region: AxisBox,
    q: f64,
}

fn sieve_instances() -> Vec<SieveInstance> {
    let mut out = Vec::new();
    let qs = [5.0, 10.0, 20.0, 50.0];
    for f in [rational(), sqrt5()] {
        let mut taken = 0;
        'outer: for x in [3e3, 1e4] {
            for z in [3.0, 7.0, 13.0] {
                for l in shifts(&f) {
                    let b = cube_box(&f, x);
                    for (_, s, _) in inclusion_by_datum(&f, &f.ring(), &l, z, &b, 1e7).unwrap() {
                        let side = b.sides[0].len();
                        if side < minimal_side(&f, &s.lattice) {
                            continue;
                        }
                        let region = translated(&b, &s.translate);
                        out.push(SieveInstance { field: f.clone(), system: s, region, q: qs[out.len() % qs.len()] });
                        taken += 1;
                        if taken == 50 {
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    out
}

fn large_sieve() -> Outcome {
    let instances = sieve_instances();
    let mut ls_fail = 0;
    for inst in &instances {
        let r = large_sieve_bound(&inst.field, &inst.system, &inst.region, inst.q, 1e7).unwrap();
        if !r.ok || (r.count as f64) * r.h > r.d_hat * (1.0 + 1e-12) {
            ls_fail += 1;
        }
    }
    // Montgomery: random sub-moduli and random coefficients on sifted points
    let mut rng = ChaCha20Rng::seed_from_u64(SEED + 8);
    let mut mont_fail = 0;
    let supports: Vec<Vec<FieldElement>> = instances
        .iter()
        .map(|i| sifted_points(&i.field, &i.system, &i.region, 1e7).unwrap().into_iter().take(300).collect())
        .collect();
    for _ in 0..1000 {
        let k = rng.gen_range(0..instances.len());
        let inst = &instances[k];
        let mut chosen = Vec::new();
        let mut norm = 1u64;
        for p in &inst.system.primes {
            if rng.gen_bool(0.5) && (norm * p.norm()) as f64 <= inst.q {
                norm *= p.norm();
                chosen.push((p.prime.clone(), p.omega.clone()));
            }
        }
        let a: Vec<(FieldElement, Complex64)> =
            supports[k].iter().map(|e| (e.clone(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).collect();
        if a.is_empty() {
            continue;
        }
        if !montgomery_check(&inst.system.lattice, &chosen, &a).unwrap().holds {
            mont_fail += 1;
        }
    }
    // spacing for every Q <= 50 on one lattice per field
    let mut spacing_fail = 0;
    let mut families = 0;
    for f in [rational(), sqrt5()] {
        let inst = instances.iter().find(|i| i.field.degree() == f.degree()).expect("each field has instances");
        let primes: Vec<_> = inst.system.primes.iter().map(|p| p.prime.clone()).collect();
        for q in 1..=50 {
            let fam = CharacterFamily::new(&f, &inst.system.lattice, &primes, q as f64).unwrap();
            if fam.len() < 2 {
                continue;
            }
            families += 1;
            let sp = spacing(&f, &fam).unwrap();
            if !(sp.ok && sp.delta >= sp.guaranteed) {
                spacing_fail += 1;
            }
        }
    }
    outcome(
        instances.len() == 100 && ls_fail == 0 && mont_fail == 0 && spacing_fail == 0,
        format!(
            "{} large-sieve instances ({ls_fail} failed), 1000 Montgomery trials ({mont_fail} failed), {families} spacing families ({spacing_fail} failed)",
            instances.len()
        ),
    )
}

fn essential_trend() -> Outcome {
    let table = default_table();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    let mut runs: Vec<(FieldDescriptor, &str, Vec<f64>)> = vec![(rational(), "tau", vec![1e2, 1e3, 1e4]), (rational(), "abs:ramanujan", vec![1e2, 1e3, 1e4])];
    runs.push((sqrt5(), "tau", vec![1e2, 1e3]));
    for (f, spec, xs) in &runs {
        let lambda = LambdaSpec::parse(spec).unwrap().build(&table);
        for l in shifts(f) {
            for &x in xs {
                let d = f.degree();
                // the whole range below the hyperbola, and a narrow one
                for u in [x.powf(1.0 / d as f64), 4.0] {
                    let region = HyperbolicRegion::new(vec![x.powf(1.0 / d as f64); d], u).unwrap();
                    let q = ShiftedSumQuery::new(f, f.ring(), l.clone(), SumRegion::Hyperbolic(region), lambda.clone()).unwrap();
                    let r = essential_bound(&q, 0.1).unwrap();
                    worst = worst.max(r.ratio);
                    cells += 1;
                }
            }
        }
    }
    outcome(worst.is_finite() && worst <= 10.0, format!("{cells} cells, largest LHS/RHS {worst:.4} (cap 10)"))
}

fn smooth_counting() -> Outcome {
    let t = Instant::now();
    let a = smooth_ideal_count(&rational(), 1_000_000, 100).unwrap();
    let b = smooth_ideal_count(&sqrt5(), 10_000, 20).unwrap();
    let err = dickman_closed_form_error();
    let secs = t.elapsed().as_secs_f64();
    let inside = |r: f64| (0.5..=2.0).contains(&r);
    outcome(
        inside(a.ratio) && inside(b.ratio) && err <= 1e-6 && secs <= 120.0,
        format!("ratios {:.4} (Q) and {:.4} (Q(sqrt 5)), closed-form error {err:.2e}, {secs:.1} s", a.ratio, b.ratio),
    )
}

fn ramanujan() -> Outcome {
    let t = Instant::now();
    let primes = primes_up_to(10_000);
    let targets: Vec<u64> = primes.iter().flat_map(|&p| [p, p * p]).collect();
    let exact = ramanujan_tau_exact(&targets);
    let table = default_table();
    let mut deligne = 0;
    let mut hecke = 0;
    for (i, &p) in primes.iter().enumerate() {
        let (tp, tp2) = (&exact[2 * i], &exact[2 * i + 1]);
        if BigInt::from(table.tau(p).unwrap()) != *tp {
            deligne += 1;
        }
        // |λ(p)| <= 2  ⟺  τ(p)² <= 4 p^11
        if tp * tp > BigInt::from(4) * BigInt::from(p).pow(11) {
            deligne += 1;
        }
        if tp * tp - tp2 != BigInt::from(p).pow(11) {
            hecke += 1;
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(SEED + 11);
    let mut pairs = 0;
    let mut multiplicative = 0;
    while pairs < 1000 {
        let (m, n) = (rng.gen_range(2..=1000u64), rng.gen_range(2..=1000u64));
        if m.gcd(&n) != 1 {
            continue;
        }
        pairs += 1;
        if table.tau(m * n).unwrap() != table.tau(m).unwrap() * table.tau(n).unwrap() {
            multiplicative += 1;
        }
    }
    outcome(
        deligne == 0 && hecke == 0 && multiplicative == 0,
        format!(
            "{} primes: {deligne} bound failures, {hecke} Hecke-relation failures; {pairs} coprime pairs, {multiplicative} failures; {:.0} s",
            primes.len(),
            t.elapsed().as_secs_f64()
        ),
    )
}

const SUITE: [(Subcommand, &str); 5] = [
    (Subcommand::ShiftedSum, "field = \"Q\"\nlambda = \"tau\"\nshifts = [1, 2, 3]\nx = [100.0, 1000.0]\nweights = [12]\nweighted_x = 2.0\n"),
    (Subcommand::BoundsReport, "field = \"Q(sqrt 5)\"\nlambda = \"tau\"\nshifts = [1, [1, 1]]\nx = [100.0, 1000.0]\ny = 3.0\nz = 2.0\n"),
    (Subcommand::SieveCheck, "field = \"Q(sqrt 5)\"\nlambda = \"tau\"\nshifts = [[1, 1], 2]\nx = [3000.0]\nz = 7.0\nq = 20.0\nmontgomery_trials = 3\n"),
    (Subcommand::SpecialCheck, "samples = 40\n"),
    (Subcommand::SmoothCount, "points = [[100000, 100], [1000000, 100]]\n"),
];

fn suite_bytes(workers: usize, dir: &std::path::Path) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for (sub, text) in SUITE {
        let jsonl = dir.join(format!("{}-{workers}.jsonl", sub.name()));
        let csv = dir.join(format!("{}-{workers}.csv", sub.name()));
        let mut cfg = ExperimentConfig::from_toml(text).unwrap();
        cfg.csv = Some(csv.display().to_string());
        let opts = Options { seed: Some(SEED), workers: Some(workers), out: Some(jsonl.clone()), ..Options::default() };
        run(sub, &cfg, &opts).unwrap().emit().unwrap();
        out.push(std::fs::read(&jsonl).unwrap());
        out.push(std::fs::read(&csv).unwrap());
    }
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let one = suite_bytes(1, dir.path());
    let four = suite_bytes(4, dir.path());
    let differing = one.iter().zip(&four).filter(|(a, b)| a != b).count();
    let bytes: usize = one.iter().map(Vec::len).sum();
    outcome(differing == 0 && bytes > 0, format!("{} report files ({bytes} bytes) per run, {differing} differ between 1 and 4 workers", one.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("J closed form vs quadrature", j_identity),
        ("J bound", j_bound),
        ("hypergeometric and Bessel inequalities", technical),
        ("box covering", box_cover),
        ("shifted-sum oracle equivalence", oracle_equivalence),
        ("z-datum partition", partition),
        ("sieve inclusion", inclusion),
        ("large sieve", large_sieve),
        ("essential-sum trend", essential_trend),
        ("smooth counting", smooth_counting),
        ("Ramanujan eigenvalues", ramanujan),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::var("HSL_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        failures += !o.pass as usize;
        println!("criterion {n:2} {}: {name}: {} [{:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
