//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances and time budgets are fixed here.

use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use driftcheck_core::claims::{generate_world, ClaimSet, SyntheticWorld, WorldConfig};
use driftcheck_core::critic::{Critic, CriticError, ExternalCritic};
use driftcheck_core::diffusion::{
    bayes_denoise, build_schedule, forward_diffuse, EngineConfig, ScheduleKind, StressEngine, StressTestResult,
};
use driftcheck_core::embedder::CorpusMatrix;
use driftcheck_core::eval::{
    auroc, evaluate, paired_t_test, scored_set, sweep_lambda, sweep_timestep, Method, ScoredSet, ThresholdRule,
    DEFAULT_T_STAR_GRID,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};

const AUROC_TOL: f64 = 1e-12;
const MOMENT_SIGMAS: f64 = 4.0;
const VARIANCE_REL_TOL: f64 = 0.05;
const POSTERIOR_TOL: f64 = 0.02;
const MC_SAMPLES: usize = 4_000_000;
const SEMANTIC_AUROC_FLOOR: f64 = 0.80;
const T_TOL: f64 = 1e-3;
const P_TOL: f64 = 1e-3;
const WORLD_SEED: u64 = 42;
const STRESS_SEED: u64 = 7;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn world() -> SyntheticWorld {
    generate_world(&WorldConfig {
        n_entities: 50,
        n_relations: 5,
        corpus_fraction: 0.8,
        seed: WORLD_SEED,
        ..WorldConfig::default()
    })
    .expect("world generates")
}

fn engine(corpus: ClaimSet) -> StressEngine {
    let mut config = EngineConfig::default();
    config.stress.t_star = 500;
    config.stress.seed = STRESS_SEED;
    StressEngine::new(corpus, config).expect("engine builds").with_workers(4)
}

fn pairwise_auroc(set: &ScoredSet) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (i, &si) in set.scores.iter().enumerate() {
        if !set.labels[i] {
            continue;
        }
        for (j, &sj) in set.scores.iter().enumerate() {
            if set.labels[j] {
                continue;
            }
            pairs += 1.0;
            credit += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    credit / pairs
}

fn auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut with_ties = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..=20);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        let set = ScoredSet::new("oracle", scores, labels).unwrap();
        worst = worst.max((auroc(&set).unwrap() - pairwise_auroc(&set)).abs());
    }
    outcome(
        worst <= AUROC_TOL,
        format!("max |rank - pairwise| = {worst:.1e} over 200 sets ({with_ties} with ties)"),
    )
}

fn forward_moments() -> Outcome {
    let schedule = build_schedule(ScheduleKind::Linear, 1000).unwrap();
    let ab = schedule.alpha_bar()[500];
    let z0 = [0.5, -0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0];
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sum = [0.0; 8];
    let mut sum_sq = [0.0; 8];
    for _ in 0..n {
        let z = forward_diffuse(&z0, &schedule, 500, &mut rng).unwrap();
        for d in 0..8 {
            sum[d] += z[d];
            sum_sq[d] += z[d] * z[d];
        }
    }
    let var_true = 1.0 - ab;
    let sigma_mean = (var_true / n as f64).sqrt();
    let (mut worst_z, mut worst_rel) = (0.0f64, 0.0f64);
    for d in 0..8 {
        let mean = sum[d] / n as f64;
        let var = (sum_sq[d] - n as f64 * mean * mean) / (n as f64 - 1.0);
        worst_z = worst_z.max((mean - ab.sqrt() * z0[d]).abs() / sigma_mean);
        worst_rel = worst_rel.max((var - var_true).abs() / var_true);
    }
    outcome(
        worst_z <= MOMENT_SIGMAS && worst_rel <= VARIANCE_REL_TOL,
        format!("worst mean deviation {worst_z:.2} sigma, worst variance error {:.2}%", worst_rel * 100.0),
    )
}

/// Estimates P(row | z_t = query) by simulating the joint and counting
/// samples that land in a small ball around the query.
fn monte_carlo_posterior(rows: &[[f64; 2]], ab: f64, query: [f64; 2], samples: usize, seed: u64) -> (Vec<f64>, usize) {
    let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
    let radius = 0.1 * s;
    let r2 = radius * radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; rows.len()];
    for _ in 0..samples {
        let i = rng.random_range(0..rows.len());
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let dx = a * rows[i][0] + s * e0 - query[0];
        let dy = a * rows[i][1] + s * e1 - query[1];
        if dx * dx + dy * dy <= r2 {
            hits[i] += 1;
        }
    }
    let total: usize = hits.iter().sum();
    (hits.iter().map(|&h| h as f64 / total as f64).collect(), total)
}

fn denoiser_posterior() -> Outcome {
    let angle = |deg: f64| [deg.to_radians().cos(), deg.to_radians().sin()];
    let rows = [angle(0.0), angle(100.0), angle(220.0)];
    let manifold = CorpusMatrix::from_rows(2, rows.iter().map(|r| r.to_vec()).collect(), vec!["a".into(), "b".into(), "c".into()])
        .unwrap();
    let schedule = build_schedule(ScheduleKind::Sqrt, 1000).unwrap();
    let mut worst: f64 = 0.0;
    let mut min_hits = usize::MAX;
    for (k, t) in [100usize, 500, 900].into_iter().enumerate() {
        let ab = schedule.alpha_bar()[t];
        let a = ab.sqrt();
        let query = [a * 0.45, a * 0.35];
        let analytic = bayes_denoise(&query, &schedule, t, &manifold).unwrap().weights;
        let (mc, hits) = monte_carlo_posterior(&rows, ab, query, MC_SAMPLES, 10 + k as u64);
        min_hits = min_hits.min(hits);
        for (w, m) in analytic.iter().zip(&mc) {
            worst = worst.max((w - m).abs());
        }
    }
    outcome(
        worst <= POSTERIOR_TOL,
        format!("max |analytic - MC| = {worst:.4} at t in {{100, 500, 900}} ({MC_SAMPLES} samples each, >= {min_hits} in-kernel)"),
    )
}

fn class_mean(results: &[StressTestResult], supported: bool, f: impl Fn(&StressTestResult) -> f64) -> f64 {
    let vals: Vec<f64> = results
        .iter()
        .filter(|r| r.label.map(|l| l.is_supported()) == Some(supported))
        .map(f)
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn attractor_ordering(results: &[StressTestResult]) -> Outcome {
    let mse_true = class_mean(results, true, |r| r.e_mse);
    let mse_false = class_mean(results, false, |r| r.e_mse);
    let sem = auroc(&scored_set(results, Method::Semantic, 0).unwrap()).unwrap();
    let mse = auroc(&scored_set(results, Method::Mse, 0).unwrap()).unwrap();
    outcome(
        mse_false > mse_true && sem >= SEMANTIC_AUROC_FLOOR && sem > mse,
        format!(
            "mean e_mse refuted {mse_false:.5} vs supported {mse_true:.5}; semantic AUROC {sem:.3} (floor {SEMANTIC_AUROC_FLOOR}), MSE AUROC {mse:.3}"
        ),
    )
}

fn lambda_endpoints(results: &[StressTestResult]) -> Outcome {
    let rows = sweep_lambda(&[0.0, 1.0], results).unwrap();
    let generative = auroc(&scored_set(results, Method::Semantic, 0).unwrap()).unwrap();
    let discriminative = auroc(&scored_set(results, Method::DirectNli, 0).unwrap()).unwrap();
    let bitwise = rows[0].auroc.to_bits() == generative.to_bits() && rows[1].auroc.to_bits() == discriminative.to_bits();
    outcome(
        bitwise,
        format!(
            "lambda=0 row {} vs generative {}; lambda=1 row {} vs discriminative {}",
            rows[0].auroc, generative, rows[1].auroc, discriminative
        ),
    )
}

fn timestep_sweep(engine: &StressEngine, test: &ClaimSet) -> Outcome {
    let rows = sweep_timestep(engine, &DEFAULT_T_STAR_GRID, test).unwrap();
    let best = rows.iter().map(|r| r.auroc).fold(f64::NEG_INFINITY, f64::max);
    let last = rows.iter().find(|r| r.t_star == 900).map(|r| r.auroc);
    let cells: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.t_star, r.auroc)).collect();
    outcome(
        rows.len() == 5 && last.is_some_and(|a| a < best),
        format!("{} rows [{}], best {best:.3}", rows.len(), cells.join(" ")),
    )
}

fn t_test() -> Outcome {
    let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
    let oracle_t = 2.0 / (1.0 / 3f64.sqrt());
    let oracle_p = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 2.0).unwrap().cdf(oracle_t));
    let known = (r.t - 3.4641).abs() <= T_TOL && (r.p - 0.0742).abs() <= P_TOL;
    let matches_oracle = (r.t - oracle_t).abs() <= T_TOL && (r.p - oracle_p).abs() <= P_TOL;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut antisymmetric = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (ab, ba) = (paired_t_test(&a, &b).unwrap(), paired_t_test(&b, &a).unwrap());
        if ab.t == -ba.t && ab.p == ba.p {
            antisymmetric += 1;
        }
    }
    outcome(
        known && matches_oracle && antisymmetric == 100,
        format!(
            "t = {:.4}, p = {:.4} (oracle t {oracle_t:.4}, p {oracle_p:.4}); antisymmetric on {antisymmetric}/100 pairs",
            r.t, r.p
        ),
    )
}

fn determinism(engine: &StressEngine, test: &ClaimSet) -> Outcome {
    let seeds = [1, 2, 3];
    let one = evaluate(&engine.clone().with_workers(1), test, &seeds, ThresholdRule::OracleBest).unwrap();
    let eight = evaluate(&engine.clone().with_workers(8), test, &seeds, ThresholdRule::OracleBest).unwrap();
    let (a, b) = (one.to_json(), eight.to_json());
    outcome(
        a.as_bytes() == b.as_bytes(),
        format!("EvalReport JSON with 1 and 8 workers: {} vs {} bytes, identical = {}", a.len(), b.len(), a == b),
    )
}

fn external_protocol() -> Outcome {
    let stub = env!("CARGO_BIN_EXE_critic-stub");

    // 1,000 judgments answered out of order (the stub reverses each block of 8),
    // each checked against its own request.
    let critic = ExternalCritic::new(&format!("{stub} --by-length --reorder 8"), 5000, 40).unwrap();
    let premises: Vec<String> = (0..1000).map(|i| "p".repeat(1 + i % 37)).collect();
    let pairs: Vec<(&str, &str)> = premises.iter().map(|p| (p.as_str(), "h")).collect();
    let verdicts = critic.judge_batch(&pairs);
    let mut mismatched = 0;
    for (p, v) in premises.iter().zip(&verdicts) {
        let expected = (p.chars().count() % 10) as f64 / 10.0;
        if !matches!(v, Ok(v) if (v.contradiction - expected).abs() < 1e-12) {
            mismatched += 1;
        }
    }
    let roundtrip_ok = mismatched == 0 && critic.discarded_responses() == 0;

    // Kill the child while three judgments wait on it.
    let held = Arc::new(ExternalCritic::new(&format!("{stub} --reorder 5"), 10_000, 64).unwrap());
    let pid = held.child_id().unwrap();
    let worker = {
        let held = Arc::clone(&held);
        thread::spawn(move || held.judge_batch(&[("a", "b"), ("c", "d"), ("e", "f")]))
    };
    thread::sleep(Duration::from_millis(300));
    let killed = std::process::Command::new("kill").args(["-9", &pid.to_string()]).status().unwrap().success();
    let started = Instant::now();
    let in_flight = worker.join().unwrap();
    let failed_fast = started.elapsed() < Duration::from_secs(5);
    let all_exited = in_flight.iter().all(|r| matches!(r, Err(CriticError::ChildExited { .. })));
    let recovered = held.judge_batch(&[("a", "b"); 5]).iter().all(Result::is_ok);

    // A child that dies mid-batch fails only what it had been sent.
    let dying = ExternalCritic::new(&format!("{stub} --exit-after 25"), 5000, 10).unwrap();
    let results = dying.judge_batch(&[("a", "b"); 40]);
    let failed: Vec<usize> = (0..40).filter(|&i| results[i].is_err()).collect();
    let only_in_flight = !failed.is_empty()
        && failed[0] == 24
        && failed.len() <= 6
        && failed.windows(2).all(|w| w[1] == w[0] + 1)
        && failed.iter().all(|&i| matches!(results[i], Err(CriticError::ChildExited { .. })));

    outcome(
        roundtrip_ok && killed && failed_fast && all_exited && recovered && only_in_flight,
        format!(
            "1000 judgments, {mismatched} mismatched, {} discarded; kill -9 failed {}/3 in flight with ChildExited, respawn ok = {recovered}; mid-batch exit failed indices {failed:?}",
            critic.discarded_responses(),
            in_flight.iter().filter(|r| r.is_err()).count(),
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |name: &str, budget: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let passed = o.passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget_note = budget.map(|b| format!(" (budget {}s)", b.as_secs())).unwrap_or_default();
        println!(
            "acceptance {} {name}: {} [{:.2}s{budget_note}]",
            if passed { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    };

    report("auroc-oracle-equivalence", Some(Duration::from_secs(5)), &mut auroc_oracle);
    report("forward-process-moments", Some(Duration::from_secs(10)), &mut forward_moments);
    report("bayes-denoiser-posterior", Some(Duration::from_secs(60)), &mut denoiser_posterior);

    let w = world();
    let engine = engine(w.truth_corpus.clone());
    let mut results = Vec::new();
    report("attractor-ordering", Some(Duration::from_secs(120)), &mut || {
        results = engine.run_batch(w.test_set.claims()).unwrap();
        attractor_ordering(&results)
    });
    report("lambda-endpoint-identities", None, &mut || lambda_endpoints(&results));
    report("timestep-sweep-shape", None, &mut || timestep_sweep(&engine, &w.test_set));
    report("paired-t-test", None, &mut t_test);
    report("determinism-1-vs-8-workers", None, &mut || determinism(&engine, &w.test_set));
    report("external-critic-protocol", None, &mut external_protocol);

    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
