//! One PASS/FAIL line per acceptance criterion. Criteria run concurrently
//! and print in order; see `KNOWN_UNATTAINABLE` for those reported but
//! not asserted.

use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qcantor::blocks::{check_count_bounds, concat_lexicographic, is_normal_block_ap, ApVariant, Block, UniformMeasure};
use qcantor::constructions::{
    ap_dichotomy_identities, dichotomy_inequality, monotone_toward, preset_spec, run_experiment, top_order_identities,
    Manifest, PresetKind, Scale,
};
use qcantor::descriptor::DescriptorParser;
use qcantor::digits::{canonicalize, eta_digit_at, DigitStream};
use qcantor::diophantine::{solve_box, solve_exact, verify_solution, RelationSystem, Solution};
use qcantor::schedule::{ConstructionSchedule, ScaledProfile, TupleSource};
use qcantor::stats::{count_chunked, count_drift, count_sequential, count_stream, CountOptions, Mode};

/// Reported as FAIL and not asserted:
/// 2: for t >= 6 the unconstrained root of the box system lies outside the box.
/// 3: the type II upper bound fails whenever the block is longer than the
///    per-word slice `floor((w - r)/m)`; counts there exceed it.
const KNOWN_UNATTAINABLE: &[usize] = &[2, 3];

const TOL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ints(v: &[i64]) -> Vec<BigRational> {
    v.iter().map(|&x| BigRational::from_integer(x.into())).collect()
}

fn diophantine_example() -> Outcome {
    let start = Instant::now();
    let sys = RelationSystem::new(3, vec![2, 3], vec![1]).unwrap();
    let found = solve_exact(&sys, 4, 10);
    let found_ok = found.solution.is_some() && found.certificate.as_ref().is_some_and(|c| c.pass);
    let cert = verify_solution(&sys, &Solution::from_integers(&[2, 1, 2], 4));
    let sums_ok = cert.sums() == ints(&[5, 4, 4]);
    let secs = start.elapsed().as_secs_f64();
    let sol = found.solution.map(|s| format!("{:?} d={}", s.c.iter().map(|c| c.to_string()).collect::<Vec<_>>(), s.d));
    outcome(
        found_ok && cert.pass && sums_ok && secs < 1.0,
        format!("search found {sol:?}; (2,1,2,4) verifies={} sums=(5,4,4):{sums_ok}; {secs:.3}s", cert.pass),
    )
}

fn box_conjecture() -> Outcome {
    let start = Instant::now();
    let ts: Vec<usize> = (3..=20).chain([50, 100]).collect();
    let results: Vec<_> = ts.par_iter().map(|&t| (t, solve_box(t, &vec![0.0; t]).unwrap())).collect();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| !(r.converged() && r.max_residual < 1e-9 && r.in_box))
        .map(|(t, r)| match r.free_root_distance {
            Some(d) => format!("t={t} ({:?}, free root {d:.4} outside)", r.status),
            None => format!("t={t} ({:?})", r.status),
        })
        .collect();
    outcome(
        failed.is_empty() && secs < 60.0,
        format!("{} of {} converged in the box; {secs:.1}s; failing: {}", ts.len() - failed.len(), ts.len(), failed.join(", ")),
    )
}

/// `(w, m, r, k)` from a violation label.
fn label_mrk(v: &str) -> (u64, u64, u64, u64) {
    let field = |key: &str| -> u64 {
        let at = v.find(&format!(" {key}=")).unwrap() + key.len() + 2;
        v[at..].split(|c: char| !c.is_ascii_digit()).next().unwrap().parse().unwrap()
    };
    (field("w"), field("m"), field("r"), field("k"))
}

fn count_bounds_suite() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    let mut violations = Vec::new();
    let mut eq_ii = 0;
    for b in [2, 3] {
        for w in [2u64, 4, 6] {
            // M = 2 covers every m <= M for M in {1, 2}; 2! divides every w here.
            let rep = check_count_bounds(b, w, 2, w.min(3)).unwrap();
            checked += rep.checked;
            eq_ii += rep.equal_hi_ii;
            violations.extend(rep.violations);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let long_blocks = violations
        .iter()
        .filter(|v| {
            let (w, m, r, k) = label_mrk(v);
            v.starts_with("type II") && k > (w - r) / m
        })
        .count();
    outcome(
        violations.is_empty() && secs < 30.0,
        format!(
            "{checked} block counts, {} violations ({long_blocks} are type II upper-bound excesses with k > floor((w-r)/m), \
             {} elsewhere), {eq_ii} type II counts equal to the bound; {secs:.2}s",
            violations.len(),
            violations.len() - long_blocks
        ),
    )
}

fn normality_thresholds() -> Outcome {
    let mut points = 0;
    let mut failures = Vec::new();
    let mut sharp = 0;
    for b in [2u64, 3] {
        let mu = UniformMeasure::new(b).unwrap();
        for w in [2u64, 4, 6] {
            let y = concat_lexicographic(b, w, 1 << 20).unwrap();
            for big_m in [1u64, 2] {
                for big_k in 1..=w.min(3) {
                    if big_k >= w {
                        continue;
                    }
                    let eps_i = BigRational::new((big_m + big_k.max(big_m)).into(), w.into());
                    let eps_ii = BigRational::new(((big_k + 1) * big_m).into(), w.into());
                    for (variant, eps) in [(ApVariant::TypeI, eps_i), (ApVariant::TypeII, eps_ii)] {
                        points += 1;
                        if !is_normal_block_ap(&y, &eps, big_k, big_m, mu, variant).unwrap() {
                            failures.push(format!("b={b} w={w} K={big_k} M={big_m} {variant:?}"));
                        }
                        let half = eps / BigRational::from_integer(2.into());
                        if !is_normal_block_ap(&y, &half, big_k, big_m, mu, variant).unwrap() {
                            sharp += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty() && sharp > 0,
        format!("{points} grid points normal at threshold, failures: {failures:?}; halved ε fails at {sharp} points"),
    )
}

fn psi_bounded_drift() -> Outcome {
    let p = "gamma:preset=scaled;b0=3;bstep=1;widths=2;first=2000;growth=3";
    let q = "gamma:preset=listed;l=25000;b=2;x=(0,1);tail_b0=1000;tail_step=1;tail_l=1;tail_x=(0)";
    let blocks: Vec<Block> = ["(0)", "(1)", "(1,0)", "(0,0)"].iter().map(|s| s.parse().unwrap()).collect();
    let horizon = 1_000_000;
    let runs: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let parser = DescriptorParser::new();
            let x = parser.stream(&format!("random:seed={seed};q=[{p}]")).unwrap();
            let y = parser.stream(&format!("psi:x=[random:seed={seed};q=[{p}]];p=[{p}];q=[{q}]")).unwrap();
            count_drift(&x, &y, &blocks, horizon).unwrap()
        })
        .collect();
    let mut worst_first = 0;
    let mut worst_last = 0;
    let mut max_drift = 0;
    for d in runs.iter().flatten() {
        worst_first = worst_first.max(d.first_at_max);
        worst_last = worst_last.max(d.last_change);
        max_drift = max_drift.max(d.max_abs);
    }
    let drift_ok = worst_first < 100_000 && worst_last < 100_000 && max_drift > 0;

    // The footnote: x = 0.(21) in base 3, Q alternating 3, 2.
    let parser = DescriptorParser::new();
    let x = parser.stream("explicit:2,1").unwrap();
    let pq = parser.sequence("constant:3").unwrap();
    let qq = parser.sequence("explicit:3,2").unwrap();
    let raw = parser.stream("psi:x=[explicit:2,1];p=[constant:3];q=[explicit:3,2]").unwrap();
    let canon = canonicalize(&raw, &qq).unwrap();
    let one: Block = "(1)".parse().unwrap();
    let n_max = 10_000u64;
    let cps: Vec<u64> = (1..=n_max).collect();
    let opts = CountOptions::default();
    let np = count_stream(&x, &pq, std::slice::from_ref(&one), Mode::Plain, n_max, &cps, opts).unwrap();
    let nq = count_stream(&canon, &qq, std::slice::from_ref(&one), Mode::Plain, n_max, &cps, opts).unwrap();
    let np_ok = np.rows.iter().all(|r| r.count == r.n / 2) && np.rows.len() == n_max as usize;
    let nq_ok = nq.rows.iter().all(|r| r.count == 0) && nq.rows.len() == n_max as usize;
    outcome(
        drift_ok && np_ok && nq_ok,
        format!(
            "20 seeds: max |ΔN| = {max_drift}, reached by n <= {worst_first}, last change at n = {worst_last}; \
             footnote N^P = floor(n/2): {np_ok}, N^Q(ψ) = 0: {nq_ok} (n <= 10^4)"
        ),
    )
}

fn scaled_manifest(kind: PresetKind, blocks: &str, modes: &str) -> Manifest {
    Manifest::parse(&format!(
        "preset = {}\nscale = scaled\nblocks = {blocks}\nmodes = {modes}\nhorizon = 1000000\ncheckpoints = both\n",
        kind.name()
    ))
    .unwrap()
}

fn skip_order_one_limits() -> Outcome {
    let spec = preset_spec(PresetKind::SkipOrderOne, None, Scale::Exact, None).unwrap();
    let predicted: Vec<String> = spec.limits.iter().filter(|l| l.mode == Mode::Plain).map(|l| l.value.to_string()).collect();
    let bundle = run_experiment(&scaled_manifest(PresetKind::SkipOrderOne, "(0);(1);(0,0);(1,0);(0,0,0);(1,0,1)", "plain")).unwrap();
    let mut ok = predicted == ["4/5", "1", "1"];
    let mut notes = Vec::new();
    for o in &bundle.summary.observations {
        let (Some(r), Some(p)) = (o.final_ratio, o.predicted_f64) else {
            ok = false;
            continue;
        };
        let within = (r - p).abs() <= TOL;
        let trend = o.block.len() > 1 || (o.last_errors.len() == 3 && monotone_toward(&o.last_errors, 0.0));
        ok &= within && trend;
        notes.push(format!("{}={r:.4}", o.block));
    }
    outcome(ok, format!("predicted {predicted:?}; observed at 10^6: {}", notes.join(" ")))
}

/// Blocks use digits {0, 1}: where c_j = 4 the base is b/4 = 3 and ψ clamps
/// larger digits, so only these are admissible at every position.
fn ap_dichotomy_limits() -> Outcome {
    let bundle = run_experiment(&scaled_manifest(
        PresetKind::ApDichotomy,
        "(0,0);(1,1);(0,1);(1,0)",
        "plain;apII:2:0;apII:2:1",
    ))
    .unwrap();
    let mut ok = true;
    let mut worst = [0.0f64; 2];
    for o in &bundle.summary.observations {
        let target = if o.mode == Mode::Plain { 24.0 / 46.0 } else { 1.0 };
        let exact = o.predicted_f64.is_some_and(|p| (p - target).abs() < 1e-15);
        let err = o.final_ratio.map_or(f64::INFINITY, |r| (r - target).abs());
        ok &= exact && err <= TOL;
        let slot = usize::from(o.mode != Mode::Plain);
        worst[slot] = worst[slot].max(err);
    }
    outcome(ok, format!("max |ratio − 24/46| = {:.4} (plain), max |ratio − 1| = {:.4} (apII m=2)", worst[0], worst[1]))
}

fn naive_count(digits: &[u64], block: &[u64], mode: Mode, horizon: u64) -> u64 {
    let matches = |s: &[u64], p: usize| s.len() >= p + block.len() && &s[p..p + block.len()] == block;
    match mode {
        Mode::Plain => (1..=horizon).filter(|&p| matches(digits, p as usize - 1)).count() as u64,
        Mode::ApI { m, r } => (1..=horizon).filter(|&p| p % m == r && matches(digits, p as usize - 1)).count() as u64,
        Mode::ApII { m, r } => {
            let sub: Vec<u64> = (1..=digits.len() as u64).filter(|p| p % m == r).map(|p| digits[p as usize - 1]).collect();
            (1..=horizon).filter(|&t| matches(&sub, t as usize - 1)).count() as u64
        }
    }
}

fn counting_oracle() -> Outcome {
    let mismatches: usize = (0..1000u64)
        .into_par_iter()
        .map(|case| {
            let mut rng = ChaCha8Rng::seed_from_u64(case);
            let base = rng.random_range(2..=4u64);
            let horizon = rng.random_range(1..=10_000u64);
            let m = rng.random_range(1..=6u64);
            let r = rng.random_range(0..m);
            let mode = match case % 3 {
                0 => Mode::Plain,
                1 => Mode::ApI { m, r },
                _ => Mode::ApII { m, r },
            };
            let blocks: Vec<Block> = (0..3)
                .map(|_| Block::new((0..rng.random_range(1..=5)).map(|_| rng.random_range(0..base)).collect()))
                .collect();
            // Enough digits that the type II subsequence covers horizon + 4.
            let len = (horizon + 5) * m + 5;
            let digits: Vec<u64> = (0..len).map(|_| rng.random_range(0..base)).collect();
            let x = DigitStream::explicit(digits.clone(), vec![0]);
            let want: Vec<u64> = blocks.iter().map(|b| naive_count(&digits, b.digits(), mode, horizon)).collect();
            let seq = count_sequential(&x, &blocks, mode, horizon).unwrap();
            let chunked = count_chunked(&x, &blocks, mode, horizon, 1 + (case % 7) as usize).unwrap();
            usize::from(seq != want || chunked != want)
        })
        .sum();
    outcome(mismatches == 0, format!("1000 randomized cases, {mismatches} mismatches (sequential and chunked vs naive)"))
}

fn random_access() -> Outcome {
    let start = Instant::now();
    let schedules = [
        ("default scaled", TupleSource::Scaled(ScaledProfile::default())),
        (
            "skip-order-one scaled",
            TupleSource::Scaled(qcantor::constructions::default_profile(PresetKind::SkipOrderOne, 1).unwrap()),
        ),
        ("exact factorial t=2", TupleSource::Factorial { t: 2 }),
    ];
    let n = 1_000_000u64;
    let results: Vec<(String, u64)> = schedules
        .into_par_iter()
        .map(|(name, src)| {
            let s = std::sync::Arc::new(ConstructionSchedule::new(src).unwrap());
            let stream = qcantor::digits::eta_stream(s.clone());
            let mut cur = stream.cursor(1).unwrap();
            let mut bad = 0;
            for p in 1..=n {
                let streamed = cur.next_digit().unwrap();
                if eta_digit_at(&s, &p.into()).unwrap() != streamed {
                    bad += 1;
                }
            }
            (name.to_string(), bad)
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let bad: u64 = results.iter().map(|r| r.1).sum();
    outcome(bad == 0 && secs < 60.0, format!("3 schedules × 10^6 positions, {bad} mismatches; {secs:.1}s"))
}

fn exact_identities() -> Outcome {
    let ineq = (3..=64).all(dichotomy_inequality);
    let ap = (2..=8).all(|k| ap_dichotomy_identities(k).unwrap());
    let top = (3..=8).all(|t| top_order_identities(t).unwrap());
    outcome(ineq && ap && top, format!("(2k)^k > 2k²(k+1) k∈[3,64]: {ineq}; dichotomy sums k∈[2,8]: {ap}; top-order sums t∈[3,8]: {top}"))
}

type Criterion = (usize, &'static str, fn() -> Outcome);

// Runs without the libtest harness so the verdict lines are never captured.
fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "Diophantine example", diophantine_example),
        (2, "box conjecture t ∈ {3..20, 50, 100}", box_conjecture),
        (3, "C_{b,w} count bounds", count_bounds_suite),
        (4, "C_{b,w} normality thresholds", normality_thresholds),
        (5, "ψ changes counts by O(1)", psi_bounded_drift),
        (6, "skip-order-one limits", skip_order_one_limits),
        (7, "AP dichotomy k=2", ap_dichotomy_limits),
        (8, "counting oracle equivalence", counting_oracle),
        (9, "random access consistency", random_access),
        (10, "exact identities", exact_identities),
    ];
    let results: Vec<(usize, &str, Outcome)> = criteria.into_par_iter().map(|(i, name, f)| (i, name, f())).collect();
    let mut unexpected = Vec::new();
    for (i, name, o) in &results {
        println!("{} criterion {i}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !KNOWN_UNATTAINABLE.contains(i) {
            unexpected.push(*i);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("criteria failed: {unexpected:?}");
        std::process::exit(1);
    }
}
