//! Subcommand execution. Each command builds its artifacts in memory first,
//! so `--verify` can compare two complete runs before anything is written.

use std::fmt::Display;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use driftcheck_core::claims::{generate_world, load_fever_jsonl, ClaimSet, WorldConfig};
use driftcheck_core::critic::{CriticConfig, CriticKind, TautologyDirection};
use driftcheck_core::diffusion::{
    read_results_jsonl, write_results_csv, write_results_jsonl, EngineConfig, ScheduleKind, StressEngine,
    StressTestResult,
};
use driftcheck_core::embedder::{embed_corpus, CorpusMatrix};
use driftcheck_core::eval::{
    auroc, evaluate, run_ablation, scored_set, sweep_lambda, sweep_timestep, write_gnuplot, write_lambda_csv,
    write_timestep_csv, Method, Sweeps, ThresholdRule, Variant, DEFAULT_LAMBDA_GRID, DEFAULT_T_STAR_GRID,
};
use driftcheck_core::io::atomic_write_bytes;
use serde::Serialize;
use serde_json::{json, Value};

use super::{
    AblateArgs, BuildManifoldArgs, Command, CriticArg, DataArgs, DirectionArg, EngineArgs, EvaluateArgs,
    GenWorldArgs, ScheduleArg, StressArgs, SweepLambdaArgs, SweepTstarArgs, CRITIC_CMD_ENV,
};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or paths, detected before any work starts.
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn runtime(msg: impl Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

#[derive(PartialEq)]
enum Payload {
    Bytes(Vec<u8>),
    Matrix(CorpusMatrix),
}

struct Artifact {
    path: PathBuf,
    payload: Payload,
}

struct Output {
    artifacts: Vec<Artifact>,
    summary: String,
}

impl Output {
    fn new(summary: String) -> Self {
        Self {
            artifacts: Vec::new(),
            summary,
        }
    }

    fn bytes(mut self, path: &Path, bytes: Vec<u8>) -> Self {
        self.artifacts.push(Artifact {
            path: path.to_path_buf(),
            payload: Payload::Bytes(bytes),
        });
        self
    }

    /// Adds `<path>.meta.json` holding the run configuration.
    fn meta(self, path: &Path, echo: &Value) -> Self {
        self.bytes(&meta_path(path), pretty(echo))
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

fn to_bytes<E: Display>(write: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(runtime)?;
    Ok(buf)
}

pub fn run(command: Command) -> Result<String, Failure> {
    let plan = Plan::prepare(&command)?;
    let first = plan.execute()?;
    if plan.verify {
        let second = plan.execute()?;
        for (a, b) in first.artifacts.iter().zip(&second.artifacts) {
            if a.payload != b.payload {
                return Err(runtime(format!("verification failed: {} differs between runs", a.path.display())));
            }
        }
    }
    if let Some(dir) = &plan.create_dir {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    for a in &first.artifacts {
        let written = match &a.payload {
            Payload::Bytes(b) => atomic_write_bytes(&a.path, b).map_err(runtime),
            Payload::Matrix(m) => m.save(&a.path).map_err(runtime),
        };
        written.map_err(|e| match e {
            Failure::Runtime(msg) => runtime(format!("{}: {msg}", a.path.display())),
            other => other,
        })?;
    }
    if plan.verify {
        for a in &first.artifacts {
            let same = match &a.payload {
                Payload::Bytes(b) => std::fs::read(&a.path).map_err(runtime)? == *b,
                Payload::Matrix(m) => CorpusMatrix::load(&a.path).map_err(runtime)? == *m,
            };
            if !same {
                return Err(runtime(format!("verification failed: {} does not read back", a.path.display())));
            }
        }
        return Ok(format!("{} (verified)", first.summary));
    }
    Ok(first.summary)
}

/// A validated command, ready to run any number of times.
struct Plan<'a> {
    command: &'a Command,
    verify: bool,
    engine: Option<EngineConfig>,
    threshold: ThresholdRule,
    variants: Vec<Variant>,
    create_dir: Option<PathBuf>,
}

impl<'a> Plan<'a> {
    fn prepare(command: &'a Command) -> Result<Self, Failure> {
        let mut plan = Plan {
            command,
            verify: false,
            engine: None,
            threshold: ThresholdRule::OracleBest,
            variants: Vec::new(),
            create_dir: None,
        };
        match command {
            Command::GenWorld(a) => {
                plan.verify = a.verify.verify;
                world_config(a).validate().map_err(usage)?;
                plan.create_dir = Some(a.out.clone());
            }
            Command::BuildManifold(a) => {
                plan.verify = a.verify.verify;
                input(&a.corpus)?;
                output(&a.out)?;
                if a.dim == 0 {
                    return Err(usage("--dim must be positive"));
                }
            }
            Command::StressTest(a) => {
                plan.verify = a.verify.verify;
                plan.engine = Some(engine_config(&a.engine, &a.data, a.seed)?);
                output(&a.out)?;
            }
            Command::Evaluate(a) => {
                plan.verify = a.verify.verify;
                let config = engine_config(&a.engine, &a.data, a.seeds.first().copied().unwrap_or(0))?;
                if a.seeds.is_empty() {
                    return Err(usage("--seeds needs at least one seed"));
                }
                plan.threshold = threshold(&a.threshold)?;
                plan.engine = Some(config);
                output(&a.out)?;
                if let Some(csv) = &a.csv {
                    output(csv)?;
                }
            }
            Command::SweepTstar(a) => {
                plan.verify = a.verify.verify;
                let config = engine_config(&a.engine, &a.data, a.seed)?;
                t_star_values(&a.values, config.timesteps)?;
                plan.engine = Some(config);
                output(&a.out)?;
                if let Some(p) = &a.plot {
                    output(p)?;
                }
            }
            Command::SweepLambda(a) => {
                plan.verify = a.verify.verify;
                input(&a.results)?;
                lambda_values(&a.values)?;
                output(&a.out)?;
                if let Some(p) = &a.plot {
                    output(p)?;
                }
            }
            Command::Ablate(a) => {
                plan.verify = a.verify.verify;
                let config = engine_config(&a.engine, &a.data, a.seed)?;
                plan.threshold = threshold(&a.threshold)?;
                plan.variants = if a.variants.is_empty() {
                    Variant::defaults()
                } else {
                    a.variants.iter().map(|v| v.parse().map_err(usage)).collect::<Result<_, _>>()?
                };
                let fixed: Vec<usize> = plan
                    .variants
                    .iter()
                    .filter_map(|v| match v {
                        Variant::FixedTStar(t) => Some(*t),
                        _ => None,
                    })
                    .collect();
                t_star_values(&fixed, config.timesteps)?;
                plan.engine = Some(config);
                output(&a.out)?;
            }
        }
        Ok(plan)
    }

    fn engine_config(&self) -> &EngineConfig {
        self.engine.as_ref().expect("engine-backed command")
    }

    fn execute(&self) -> Result<Output, Failure> {
        match self.command {
            Command::GenWorld(a) => gen_world(a),
            Command::BuildManifold(a) => build_manifold(a),
            Command::StressTest(a) => self.stress_test(a),
            Command::Evaluate(a) => self.evaluate(a),
            Command::SweepTstar(a) => self.sweep_tstar(a),
            Command::SweepLambda(a) => sweep_lambda_cmd(a),
            Command::Ablate(a) => self.ablate(a),
        }
    }

    fn engine(&self, data: &DataArgs, workers: Option<usize>) -> Result<(StressEngine, ClaimSet), Failure> {
        let config = self.engine_config().clone();
        let corpus = load_fever_jsonl(&data.corpus, None, 0).map_err(runtime)?;
        let test = load_fever_jsonl(&data.test, data.max_per_label, data.sample_seed).map_err(runtime)?;
        let engine = match &data.manifold {
            Some(path) => {
                let m = CorpusMatrix::load(path).map_err(runtime)?;
                StressEngine::with_manifold(corpus, m, config)
            }
            None => StressEngine::new(corpus, config),
        }
        .map_err(runtime)?;
        let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok((engine.with_workers(workers), test))
    }

    fn echo(&self, name: &str, data: Option<&DataArgs>, extra: Value) -> Value {
        let mut v = json!({
            "command": name,
            "version": env!("CARGO_PKG_VERSION"),
            "engine": self.engine,
        });
        if let Some(d) = data {
            v["data"] = json!({
                "corpus": d.corpus,
                "test": d.test,
                "manifold": d.manifold,
                "max_per_label": d.max_per_label,
                "sample_seed": d.sample_seed,
            });
        }
        merge(&mut v, extra);
        v
    }

    fn stress_test(&self, a: &StressArgs) -> Result<Output, Failure> {
        let (engine, test) = self.engine(&a.data, a.engine.workers)?;
        let results = engine.run_batch(test.claims()).map_err(runtime)?;
        let bytes = if is_csv(&a.out) {
            to_bytes(|b| write_results_csv(&results, b))?
        } else {
            to_bytes(|b| write_results_jsonl(&results, b))?
        };
        let echo = self.echo("stress-test", Some(&a.data), json!({"n_claims": results.len()}));
        Ok(Output::new(method_summary(&results, a.seed)).bytes(&a.out, bytes).meta(&a.out, &echo))
    }

    fn evaluate(&self, a: &EvaluateArgs) -> Result<Output, Failure> {
        let (engine, test) = self.engine(&a.data, a.engine.workers)?;
        let mut report = evaluate(&engine, &test, &a.seeds, self.threshold).map_err(runtime)?;
        if a.with_sweeps {
            let first = engine.with_seed(a.seeds[0]);
            let grid: Vec<usize> = DEFAULT_T_STAR_GRID
                .into_iter()
                .filter(|&t| t <= engine.config().timesteps)
                .collect();
            let results = first.run_batch(test.claims()).map_err(runtime)?;
            report.sweeps = Some(Sweeps {
                t_star: Some(sweep_timestep(&first, &grid, &test).map_err(runtime)?),
                lambda: Some(sweep_lambda(&DEFAULT_LAMBDA_GRID, &results).map_err(runtime)?),
            });
        }
        report.config_echo = self.echo(
            "evaluate",
            Some(&a.data),
            json!({"seeds": a.seeds, "threshold": self.threshold, "with_sweeps": a.with_sweeps}),
        );
        let mut out = Output::new(report.summary_line()).bytes(&a.out, format!("{}\n", report.to_json()).into_bytes());
        if let Some(csv) = &a.csv {
            let bytes = to_bytes(|b| report.write_summary_csv(b))?;
            out = out.bytes(csv, bytes).meta(csv, &report.config_echo);
        }
        Ok(out)
    }

    fn sweep_tstar(&self, a: &SweepTstarArgs) -> Result<Output, Failure> {
        let (engine, test) = self.engine(&a.data, a.engine.workers)?;
        let rows = sweep_timestep(&engine, &a.values, &test).map_err(runtime)?;
        let echo = self.echo("sweep-tstar", Some(&a.data), json!({"values": a.values}));
        let summary = rows
            .iter()
            .map(|r| format!("t*={}:{:.4}", r.t_star, r.auroc))
            .collect::<Vec<_>>()
            .join(" ");
        let mut out = Output::new(format!("hybrid auroc {summary}"))
            .bytes(&a.out, to_bytes(|b| write_timestep_csv(&rows, b))?)
            .meta(&a.out, &echo);
        if let Some(plot) = &a.plot {
            let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.t_star as f64, r.auroc)).collect();
            out = out.bytes(plot, to_bytes(|b| write_gnuplot(("t_star", "auroc"), &points, b))?);
        }
        Ok(out)
    }

    fn ablate(&self, a: &AblateArgs) -> Result<Output, Failure> {
        let (engine, test) = self.engine(&a.data, a.engine.workers)?;
        let mut report = run_ablation(&engine, &test, &self.variants, self.threshold).map_err(runtime)?;
        let names: Vec<String> = self.variants.iter().map(Variant::to_string).collect();
        report.config_echo = self.echo(
            "ablate",
            Some(&a.data),
            json!({"variants": names, "threshold": self.threshold}),
        );
        Ok(Output::new(report.summary_line()).bytes(&a.out, format!("{}\n", report.to_json()).into_bytes()))
    }
}

fn merge(target: &mut Value, extra: Value) {
    if let (Some(t), Value::Object(e)) = (target.as_object_mut(), extra) {
        t.extend(e);
    }
}

fn gen_world(a: &GenWorldArgs) -> Result<Output, Failure> {
    let config = world_config(a);
    let world = generate_world(&config).map_err(runtime)?;
    let counts = world.test_set.counts();
    let echo = json!({
        "command": "gen-world",
        "version": env!("CARGO_PKG_VERSION"),
        "world": config,
        "corpus_claims": world.truth_corpus.len(),
        "test_counts": counts,
    });
    let summary = format!(
        "corpus {} claims, test {} supported / {} refuted -> {}",
        world.truth_corpus.len(),
        counts.supported,
        counts.refuted,
        a.out.display()
    );
    Ok(Output::new(summary)
        .bytes(&a.out.join("corpus.jsonl"), world.truth_corpus.to_jsonl_string().into_bytes())
        .bytes(&a.out.join("test.jsonl"), world.test_set.to_jsonl_string().into_bytes())
        .bytes(&a.out.join("world.meta.json"), pretty(&echo)))
}

fn build_manifold(a: &BuildManifoldArgs) -> Result<Output, Failure> {
    let corpus = load_fever_jsonl(&a.corpus, None, 0).map_err(runtime)?;
    let m = embed_corpus(&corpus, a.dim).map_err(runtime)?;
    let echo = json!({
        "command": "build-manifold",
        "version": env!("CARGO_PKG_VERSION"),
        "corpus": a.corpus,
        "dim": a.dim,
        "rows": m.n_rows(),
    });
    let summary = format!("manifold {} x {} -> {}", m.n_rows(), m.dim(), a.out.display());
    let mut out = Output::new(summary).meta(&a.out, &echo);
    out.artifacts.insert(
        0,
        Artifact {
            path: a.out.clone(),
            payload: Payload::Matrix(m),
        },
    );
    Ok(out)
}

fn sweep_lambda_cmd(a: &SweepLambdaArgs) -> Result<Output, Failure> {
    let file = File::open(&a.results).map_err(|e| runtime(format!("{}: {e}", a.results.display())))?;
    let results: Vec<StressTestResult> = read_results_jsonl(BufReader::new(file)).map_err(runtime)?;
    let rows = sweep_lambda(&a.values, &results).map_err(runtime)?;
    // carry the producing run's configuration along when it is available
    let source = std::fs::read(meta_path(&a.results))
        .ok()
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok());
    let echo = json!({
        "command": "sweep-lambda",
        "version": env!("CARGO_PKG_VERSION"),
        "results": a.results,
        "values": a.values,
        "source": source,
    });
    let summary = rows
        .iter()
        .map(|r| format!("lambda={}:{:.4}", r.lambda, r.auroc))
        .collect::<Vec<_>>()
        .join(" ");
    let mut out = Output::new(format!("hybrid auroc {summary}"))
        .bytes(&a.out, to_bytes(|b| write_lambda_csv(&rows, b))?)
        .meta(&a.out, &echo);
    if let Some(plot) = &a.plot {
        let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.lambda, r.auroc)).collect();
        out = out.bytes(plot, to_bytes(|b| write_gnuplot(("lambda", "auroc"), &points, b))?);
    }
    Ok(out)
}

/// `method=AUROC ...` when every claim is labeled, a count otherwise.
fn method_summary(results: &[StressTestResult], seed: u64) -> String {
    let parts: Result<Vec<String>, _> = Method::ALL
        .iter()
        .map(|&m| {
            let set = scored_set(results, m, seed)?;
            auroc(&set).map(|a| format!("{}={a:.4}", m.name()))
        })
        .collect();
    match parts {
        Ok(p) => p.join(" "),
        Err(_) => format!("scored {} claims (no AUROC: labels missing or one class)", results.len()),
    }
}

fn world_config(a: &GenWorldArgs) -> WorldConfig {
    WorldConfig {
        n_entities: a.entities,
        n_relations: a.relations,
        n_objects_per_relation: a.objects,
        template: a.template.clone(),
        corpus_fraction: a.fraction,
        seed: a.seed,
    }
}

fn engine_config(e: &EngineArgs, data: &DataArgs, seed: u64) -> Result<EngineConfig, Failure> {
    input(&data.corpus)?;
    input(&data.test)?;
    if let Some(m) = &data.manifold {
        input(m)?;
    }
    if e.critic == CriticArg::Schema && e.critic_cmd.is_some() {
        return Err(usage("--critic-cmd only applies with --critic external"));
    }
    if e.workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    let mut config = EngineConfig {
        dim: e.dim,
        timesteps: e.timesteps,
        ..EngineConfig::default()
    };
    config.stress.t_star = e.t_star;
    config.stress.steps = e.steps;
    config.stress.schedule_kind = match e.schedule {
        ScheduleArg::Sqrt => ScheduleKind::Sqrt,
        ScheduleArg::Linear => ScheduleKind::Linear,
    };
    config.stress.seed = seed;
    config.stress.signal_scale = e.signal_scale;
    config.stress.repeats = e.repeats;
    config.stress.single_shot = e.single_shot;
    config.stress.deterministic_reverse = e.deterministic_reverse;
    config.hybrid.lambda = e.lambda;
    config.critic = CriticConfig {
        timeout_ms: e.timeout_ms,
        tautology_text: e.tautology.clone(),
        tautology_direction: match e.tautology_direction {
            DirectionArg::ClaimAsPremise => TautologyDirection::ClaimAsPremise,
            DirectionArg::ClaimAsHypothesis => TautologyDirection::ClaimAsHypothesis,
        },
        template: driftcheck_core::claims::Template::new(&e.template).map_err(usage)?,
        ..CriticConfig::default()
    };
    if e.critic == CriticArg::External {
        let command = e.critic_cmd.clone().or_else(|| std::env::var(CRITIC_CMD_ENV).ok());
        let command = command
            .filter(|c| !c.trim().is_empty())
            .ok_or_else(|| usage(format!("--critic external needs --critic-cmd or {CRITIC_CMD_ENV}")))?;
        config.critic.kind = CriticKind::External;
        config.critic.external_command = Some(command);
    }
    if e.tautology.trim().is_empty() {
        return Err(usage("--tautology must not be empty"));
    }
    config.validate().map_err(usage)?;
    Ok(config)
}

fn threshold(raw: &str) -> Result<ThresholdRule, Failure> {
    if raw == "oracle" {
        return Ok(ThresholdRule::OracleBest);
    }
    match raw.parse::<f64>() {
        Ok(tau) if tau.is_finite() => Ok(ThresholdRule::Fixed(tau)),
        _ => Err(usage(format!("--threshold expects `oracle` or a number, got {raw:?}"))),
    }
}

fn t_star_values(values: &[usize], timesteps: usize) -> Result<(), Failure> {
    match values.iter().find(|&&t| t == 0 || t > timesteps) {
        Some(t) => Err(usage(format!("t*={t} is outside 1..={timesteps}"))),
        None if values.is_empty() => Err(usage("no t* values given")),
        None => Ok(()),
    }
}

fn lambda_values(values: &[f64]) -> Result<(), Failure> {
    match values.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        Some(l) => Err(usage(format!("lambda={l} is outside [0, 1]"))),
        None if values.is_empty() => Err(usage("no lambda values given")),
        None => Ok(()),
    }
}

fn input(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn output(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(usage(format!("{}: directory does not exist", dir.display())))
        }
        _ if path.is_dir() => Err(usage(format!("{}: is a directory", path.display()))),
        _ => Ok(()),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}
