//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the per-criterion lines are
//! visible in `cargo test` output.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use vallab::geometry::Polytope;
use vallab::grassmann::{
    cosine_eigenvalue, cosine_eigenvalue_sign, verify_sign_radon, verify_sign_tr, HighestWeight, SignOptions,
};
use vallab::harmonics::{sph_dim, HarmonicExpansion};
use vallab::inequalities::{
    af_check, eta_certificate, iso_chain, minkowski2_ball, random_body, xi_certificate, BodyKind, BodyParams,
    CheckConfig,
};
use vallab::mixed::{box_mixed_volume_oracle, default_fit_grid, intrinsic_volumes, lefschetz_derivative, mixed_volume};
use vallab::special::kappa;
use vallab::spherical::{hr_form, make_valuation};
use vallab::Verdict;

// Pinned tolerances and budgets.
const ORACLE_REL_TOL: f64 = 1e-7;
const AF_REL_TOL: f64 = 1e-6;
const ISO_REL_TOL: f64 = 1e-3;
const SQUARE_CHAIN_TOL: f64 = 1e-3;
const MAX_REL_DISPERSION: f64 = 0.2;
const LEFSCHETZ_SPREAD: f64 = 0.05;
const SIGN_SAMPLES: usize = 200_000;

struct Line {
    id: usize,
    pass: bool,
    summary: String,
    elapsed: Duration,
}

fn timed(id: usize, budget: Option<Duration>, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (mut pass, mut summary) = f();
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            summary.push_str(&format!("; over the {:.0}s budget", b.as_secs_f64()));
        }
    }
    let line = Line {
        id,
        pass,
        summary,
        elapsed,
    };
    println!(
        "criterion {}: {} | {} | {:.1}s",
        line.id,
        if line.pass { "PASS" } else { "FAIL" },
        line.summary,
        line.elapsed.as_secs_f64()
    );
    line
}

/// Permanent by explicit enumeration of permutations, kept separate from
/// the library's Ryser implementation.
fn permanent_by_permutations(a: &[Vec<f64>]) -> f64 {
    fn rec(a: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == a.len() {
            return 1.0;
        }
        let mut total = 0.0;
        for c in 0..a.len() {
            if !used[c] {
                used[c] = true;
                total += a[row][c] * rec(a, row + 1, used);
                used[c] = false;
            }
        }
        total
    }
    rec(a, 0, &mut vec![false; a.len()])
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn criterion_1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [2usize, 3] {
        for _ in 0..200 {
            let edges: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(0.1..3.0)).collect())
                .collect();
            let boxes: Vec<Polytope> = edges.iter().map(|e| Polytope::axis_box(e).unwrap()).collect();
            let refs: Vec<&Polytope> = boxes.iter().collect();
            let v = mixed_volume(&refs, default_fit_grid(n)).unwrap();
            let oracle = permanent_by_permutations(&edges) / factorial(n);
            let lib_oracle = box_mixed_volume_oracle(&edges).unwrap();
            worst = worst
                .max((v - oracle).abs() / oracle)
                .max((lib_oracle - oracle).abs() / oracle);
            count += 1;
        }
    }
    (
        worst < ORACLE_REL_TOL,
        format!("{count} box tuples, worst relative error {worst:.2e} (< {ORACLE_REL_TOL:.0e})"),
    )
}

fn mixed_kinds(i: usize) -> (BodyKind, BodyParams) {
    let base = BodyParams::default();
    match i % 4 {
        0 | 1 => (BodyKind::RandomHull, base),
        2 => (BodyKind::Box, base),
        _ => (BodyKind::Zonotope, BodyParams { count: 3, ..base }),
    }
}

fn random_tuple(n: usize, seed: u64) -> Vec<Polytope> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|j| {
            let (kind, params) = mixed_kinds(seed as usize + j);
            random_body(n, kind, &mut rng, &params).unwrap()
        })
        .collect()
}

fn criterion_2() -> (bool, String) {
    let cfg = CheckConfig {
        tol: Some(AF_REL_TOL),
        ..Default::default()
    };
    let mut failures = 0;
    let mut min_rel = f64::INFINITY;
    for n in [2usize, 3] {
        for i in 0..500u64 {
            let bodies = random_tuple(n, 1000 * n as u64 + i);
            let refs: Vec<&Polytope> = bodies.iter().collect();
            let r = af_check(&refs, &cfg).unwrap();
            min_rel = min_rel.min(r.slack / r.rhs.max(1.0));
            failures += usize::from(!r.pass);
        }
    }
    let sq = Polytope::unit_cube(2).unwrap();
    let rect = Polytope::axis_box(&[2.0, 3.0]).unwrap();
    let worked2 = af_check(&[&sq, &rect], &cfg).unwrap();
    let b: Vec<Polytope> = [[1.0, 1.0, 1.0], [2.0, 1.0, 1.0], [1.0, 1.0, 2.0]]
        .iter()
        .map(|e| Polytope::axis_box(e).unwrap())
        .collect();
    let refs: Vec<&Polytope> = b.iter().collect();
    let worked3 = af_check(&refs, &cfg).unwrap();
    let xi = xi_certificate(&refs, &cfg).unwrap();
    let worked_ok = (worked2.slack - 0.25).abs() < 1e-8
        && (worked3.slack - 0.25).abs() < 1e-8
        && (xi.qtilde_value + 3.0 / 28.0).abs() < 1e-8
        && xi.qtilde_value < 0.0;
    (
        failures == 0 && worked_ok,
        format!(
            "1000 random tuples, {failures} failures, min relative slack {min_rel:.3e}; \
             square/rectangle slack {:.10}, box triple slack {:.10}, xi {:.10}",
            worked2.slack, worked3.slack, xi.qtilde_value
        ),
    )
}

fn criterion_3() -> (bool, String) {
    let grid_start = Instant::now();
    let mut grid_bad = 0;
    let mut grid_cases = 0;
    for n in 2..=6 {
        for q in 2..=10 {
            let e = HarmonicExpansion::unit(n, q, q, 0).unwrap();
            let certs = hr_form(&make_valuation(n, 1, e).unwrap()).unwrap();
            let claimed = if q % 2 == 0 { -1 } else { 1 };
            grid_cases += 1;
            if certs.len() != 1 || certs[0].total_sign != claimed || certs[0].verdict != Verdict::Pass {
                grid_bad += 1;
            }
        }
    }
    let grid_time = grid_start.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random_bad = 0;
    for n in 2..=6 {
        for s in 0..2 {
            for _ in 0..1000 {
                let mut e = HarmonicExpansion::zeros(n, 10).unwrap();
                for q in (2..=10).filter(|q| q % 2 == s) {
                    if rng.random_bool(0.6) || q == 2 + s {
                        let block: Vec<f64> = (0..sph_dim(n, q)).map(|_| rng.sample(StandardNormal)).collect();
                        e.block_mut(q).copy_from_slice(&block);
                    }
                }
                let certs = hr_form(&make_valuation(n, 1, e).unwrap()).unwrap();
                let claimed = if s == 0 { -1 } else { 1 };
                if certs.len() != 1 || certs[0].total_sign != claimed || certs[0].verdict != Verdict::Pass {
                    random_bad += 1;
                }
            }
        }
    }
    (
        grid_bad == 0 && random_bad == 0 && grid_time < Duration::from_secs(1),
        format!(
            "{grid_cases} pure degrees ({grid_bad} wrong, {:.3}s), 10000 random valuations ({random_bad} wrong)",
            grid_time.as_secs_f64()
        ),
    )
}

fn criterion_4() -> (bool, String) {
    let mut cases = 0;
    let mut bad = 0;
    for n in 2..=8usize {
        for k in 1..=3usize.min(n / 2) {
            for m in 1..=50i64 {
                let signs: &[bool] = if 2 * k == n { &[false, true] } else { &[false] };
                for &neg in signs {
                    let w = HighestWeight::pi_weight(n, k, m, neg).unwrap();
                    let sign = cosine_eigenvalue_sign(n, k, &w).unwrap();
                    let expected = if (m - 1) % 2 == 0 { 1 } else { -1 };
                    let float = cosine_eigenvalue(n, k, &w).unwrap();
                    let float_sign = if float > 0.0 { 1 } else if float < 0.0 { -1 } else { 0 };
                    cases += 1;
                    bad += usize::from(sign != expected || (float_sign != 0 && float_sign != sign));
                }
            }
        }
    }
    (bad == 0, format!("{cases} weights, {bad} sign mismatches"))
}

fn criterion_5() -> (bool, String) {
    let opts = SignOptions {
        samples: SIGN_SAMPLES,
        ..Default::default()
    };
    let mut cases = 0;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for n in 2..=6usize {
        for k in [1usize, 2].into_iter().filter(|&k| k <= n / 2) {
            for m in 1..=3i64 {
                let radon = verify_sign_radon(n, k, m, &opts).unwrap();
                let tr = verify_sign_tr(n, k, m, &opts).unwrap();
                let expect_r = if (m - 1 + k as i64) % 2 == 0 { 1 } else { -1 };
                let expect_tr = if k % 2 == 0 { 1 } else { -1 };
                for (name, rep, expected) in [("signR", &radon, expect_r), ("signTR", &tr, expect_tr)] {
                    cases += 1;
                    worst = worst.max(rep.rel_stddev);
                    let ok = rep.sign == expected
                        && rep.rel_stddev < MAX_REL_DISPERSION
                        && rep.verdict == Verdict::Pass;
                    if !ok {
                        bad.push(format!("{name}(n={n},k={k},m={m}): sign {} rel {:.3}", rep.sign, rep.rel_stddev));
                    }
                }
            }
        }
    }
    (
        bad.is_empty(),
        format!(
            "{cases} Monte-Carlo sign checks at {SIGN_SAMPLES} samples, worst dispersion {worst:.3}{}",
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    )
}

fn criterion_6() -> (bool, String) {
    let cfg = CheckConfig {
        tol: Some(ISO_REL_TOL),
        ..Default::default()
    };
    let kinds = [
        (BodyKind::RandomHull, BodyParams::default()),
        (BodyKind::Box, BodyParams::default()),
        (BodyKind::Zonotope, BodyParams { count: 4, ..Default::default() }),
        (
            BodyKind::Ball,
            BodyParams {
                ball_resolution: Some(64),
                ..Default::default()
            },
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut bad = 0;
    let mut total = 0;
    for n in [2usize, 3] {
        for i in 0..500 {
            let (kind, params) = &kinds[i % kinds.len()];
            let body = random_body(n, *kind, &mut rng, params).unwrap();
            let chain = iso_chain(&body, &cfg).unwrap();
            total += 1;
            bad += usize::from(!chain.monotone);
        }
    }
    let square = iso_chain(&Polytope::unit_cube(2).unwrap(), &cfg).unwrap();
    let square_ok = (square.ratios[0] - 2.0 / PI).abs() < SQUARE_CHAIN_TOL
        && (square.ratios[1] - 1.0 / PI.sqrt()).abs() < SQUARE_CHAIN_TOL;
    (
        bad == 0 && square_ok,
        format!(
            "{total} random bodies, {bad} non-monotone; unit square ({:.6}, {:.6}) vs ({:.6}, {:.6})",
            square.ratios[0],
            square.ratios[1],
            2.0 / PI,
            1.0 / PI.sqrt()
        ),
    )
}

fn criterion_7() -> (bool, String) {
    const RES: usize = 128;
    const STEP: f64 = 0.01;
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bodies: Vec<Polytope> = (0..10)
        .map(|i| {
            let kind = if i % 2 == 0 { BodyKind::RandomHull } else { BodyKind::Box };
            random_body(n, kind, &mut rng, &BodyParams::default()).unwrap()
        })
        .collect();
    let mut spreads = Vec::new();
    let mut ok = true;
    for k in 1..=n {
        let ratios: Vec<f64> = bodies
            .iter()
            .map(|b| {
                let d = lefschetz_derivative(
                    |p| Ok(intrinsic_volumes(p, RES, default_fit_grid(n))?.mu[k]),
                    b,
                    STEP,
                    RES,
                )
                .unwrap();
                let lower = intrinsic_volumes(b, RES, default_fit_grid(n)).unwrap().mu[k - 1];
                d / lower
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().map(|r| (r - mean).abs() / mean).fold(0.0, f64::max);
        ok &= spread < LEFSCHETZ_SPREAD;
        // Smooth-ball value of the constant, for orientation only.
        let smooth = 0.5 * (n - k + 1) as f64 * kappa(n - k + 1) / kappa(n - k);
        spreads.push(format!(
            "k={k}: mean {mean:.4} (smooth ball {smooth:.4}), spread {:.2}%",
            100.0 * spread
        ));
    }
    (ok, format!("10 bodies in R^3; {}", spreads.join("; ")))
}

fn criterion_8() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ball_cfg = CheckConfig::default();
    let mut eta_disagree = 0;
    let mut xi_disagree = 0;
    let mut eta_residual = 0.0f64;
    for i in 0..200usize {
        let n = 2 + i % 2;
        let (kind, params) = mixed_kinds(i);
        let body = random_body(n, kind, &mut rng, &params).unwrap();
        let eta = eta_certificate(&body, &ball_cfg).unwrap();
        let mink = minkowski2_ball(&body, &ball_cfg).unwrap();
        eta_disagree += usize::from(eta.pass != mink.pass);
        eta_residual = eta_residual.max(eta.coprimitivity_residual.abs());

        let bodies = random_tuple(n, 80_000 + i as u64);
        let refs: Vec<&Polytope> = bodies.iter().collect();
        let xi = xi_certificate(&refs, &CheckConfig::default()).unwrap();
        let af = af_check(&refs, &CheckConfig::default()).unwrap();
        xi_disagree += usize::from(xi.pass != af.pass);
    }
    (
        eta_disagree == 0 && xi_disagree == 0 && eta_residual < 1e-9,
        format!(
            "200 instances each; eta/minkowski disagreements {eta_disagree}, xi/AF disagreements {xi_disagree}, \
             max co-primitivity residual {eta_residual:.1e}"
        ),
    )
}

fn criterion_9() -> (bool, String) {
    let dir = std::env::temp_dir().join(format!("vallab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let body = dir.join("body.json");
    std::fs::write(&body, Polytope::standard_simplex(3).unwrap().to_json().unwrap()).unwrap();
    let body = body.to_str().unwrap().to_string();
    let runs: Vec<Vec<String>> = [
        vec!["af", "--random", "3", "4", "--seed", "7"],
        vec!["grassmann-verify", "--lemma", "signTR", "--n", "4", "--k", "2", "--m", "1", "--samples", "4000"],
        vec!["hr-sign", "--random-harmonic", "4", "3", "--count", "3"],
        vec!["crofton", &body, "--k", "2", "--samples", "3000"],
        vec!["iso", &body],
        vec!["cosine-eig", "--n", "4", "--k", "2", "--weight", "2,2"],
    ]
    .iter()
    .map(|a| a.iter().map(|s| s.to_string()).collect())
    .collect();
    let exe = env!("CARGO_BIN_EXE_vallab");
    let mut mismatches = Vec::new();
    for args in &runs {
        let outputs: Vec<_> = ["1", "1", "3"]
            .iter()
            .map(|threads| {
                Command::new(exe)
                    .args(args)
                    .env("VALLAB_THREADS", threads)
                    .output()
                    .unwrap()
            })
            .collect();
        let same = outputs
            .windows(2)
            .all(|w| w[0].stdout == w[1].stdout && w[0].status.code() == w[1].status.code());
        if !same || outputs[0].stdout.is_empty() || outputs[0].status.code() != Some(0) {
            mismatches.push(args[0].clone());
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    (
        mismatches.is_empty(),
        format!(
            "{} subcommands run three times (thread counts 1, 1, 3): {}",
            runs.len(),
            if mismatches.is_empty() {
                "byte-identical".to_string()
            } else {
                format!("differences in {}", mismatches.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    // Flags from `cargo test` (filters, --nocapture, ...) are ignored.
    let lines = [
        timed(1, Some(Duration::from_secs(120)), criterion_1),
        timed(2, Some(Duration::from_secs(600)), criterion_2),
        timed(3, None, criterion_3),
        timed(4, Some(Duration::from_secs(1)), criterion_4),
        timed(5, Some(Duration::from_secs(900)), criterion_5),
        timed(6, None, criterion_6),
        timed(7, None, criterion_7),
        timed(8, None, criterion_8),
        timed(9, None, criterion_9),
    ];
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
