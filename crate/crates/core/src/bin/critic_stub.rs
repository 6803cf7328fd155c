//! Test double for the external critic protocol.
//!
//! Answers every request with a fixed verdict. Options:
//!   --verdict E,N,C    verdict to return (default 1/3 each)
//!   --exit-after N     exit after reading N requests (answering N-1 of them)
//!   --skip-every K     silently drop every K-th request
//!   --reorder K        answer in reverse order, K requests at a time
//!   --by-length        derive the verdict from the premise length instead,
//!                      so callers can check answers belong to their requests

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use serde_json::{json, Value};

struct Options {
    verdict: (f64, f64, f64),
    exit_after: Option<usize>,
    skip_every: Option<usize>,
    reorder: usize,
    by_length: bool,
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options {
        verdict: (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        exit_after: None,
        skip_every: None,
        reorder: 1,
        by_length: false,
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        if flag == "--by-length" {
            opts.by_length = true;
            continue;
        }
        let value = args.next().ok_or_else(|| format!("{flag} needs a value"))?;
        let count = || value.parse::<usize>().map_err(|e| format!("{flag}: {e}"));
        match flag.as_str() {
            "--verdict" => {
                let p: Vec<f64> = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("--verdict: {e}"))?;
                let [e, n, c] = p[..] else {
                    return Err("--verdict takes three numbers".into());
                };
                opts.verdict = (e, n, c);
            }
            "--exit-after" => opts.exit_after = Some(count()?),
            "--skip-every" => opts.skip_every = Some(count()?.max(1)),
            "--reorder" => opts.reorder = count()?.max(1),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(opts)
}

/// Contradiction is `(chars % 10) / 10`; the rest is split evenly.
fn length_verdict(premise: &str) -> (f64, f64, f64) {
    let c = (premise.chars().count() % 10) as f64 / 10.0;
    let rest = (1.0 - c) / 2.0;
    (rest, rest, c)
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("critic-stub: {e}");
            return ExitCode::from(2);
        }
    };
    let (e, n, c) = opts.verdict;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut held: Vec<Value> = Vec::new();
    let mut seen = 0usize;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        seen += 1;
        if opts.exit_after == Some(seen) {
            return ExitCode::SUCCESS;
        }
        if opts.skip_every.is_some_and(|k| seen.is_multiple_of(k)) {
            continue;
        }
        let request = serde_json::from_str::<Value>(&line).unwrap_or(Value::Null);
        let id = request.get("id").cloned().unwrap_or(Value::Null);
        let (e, n, c) = if opts.by_length {
            length_verdict(request.get("premise").and_then(Value::as_str).unwrap_or(""))
        } else {
            (e, n, c)
        };
        held.push(json!({"id": id, "entailment": e, "neutral": n, "contradiction": c}));
        if held.len() >= opts.reorder {
            for r in held.drain(..).rev() {
                if writeln!(out, "{r}").is_err() {
                    return ExitCode::SUCCESS;
                }
            }
            let _ = out.flush();
        }
    }
    ExitCode::SUCCESS
}
