//! Adapter for an out-of-process critic speaking JSON lines.
//!
//! Request:  `{"id": 7, "premise": "...", "hypothesis": "..."}`
//! Response: `{"id": 7, "entailment": 0.1, "neutral": 0.2, "contradiction": 0.7}`
//!
//! Responses are matched by id, so the child may answer out of order. Answers
//! to ids nobody is waiting for (for example after a timeout) are dropped.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Critic, CriticError, CriticVerdict, EXTERNAL_SUM_TOLERANCE};

struct Session {
    child: Child,
    stdin: ChildStdin,
    /// `None` marks end of the child's stdout.
    lines: Receiver<Option<String>>,
}

impl Session {
    fn spawn(command: &str) -> Result<Self, CriticError> {
        let spawn_err = |source| CriticError::Spawn {
            command: command.to_string(),
            source,
        };
        let mut argv = command.split_whitespace();
        let program = argv.next().ok_or(CriticError::MissingCommand)?;
        let mut child = Command::new(program)
            .args(argv)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(spawn_err)?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("critic-reader".into())
            .spawn(move || {
                let mut reader = BufReader::new(stdout);
                let mut line = String::new();
                loop {
                    line.clear();
                    match reader.read_line(&mut line) {
                        Ok(0) | Err(_) => break,
                        Ok(_) => {
                            if tx.send(Some(line.trim_end().to_string())).is_err() {
                                return;
                            }
                        }
                    }
                }
                let _ = tx.send(None);
            })
            .map_err(spawn_err)?;
        Ok(Self {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Critic backed by a long-lived child process. Access to the child's pipes
/// is serialized; at most `window` requests are in flight at once. If the
/// child dies, in-flight judgments fail with [`CriticError::ChildExited`]
/// and the next judgment starts a fresh child.
pub struct ExternalCritic {
    command: String,
    timeout: Duration,
    window: usize,
    next_id: AtomicU64,
    discarded: AtomicUsize,
    session: Mutex<Option<Session>>,
}

impl ExternalCritic {
    /// `command` is split on whitespace into program and arguments.
    /// The child is started eagerly so launch failures surface here.
    pub fn new(command: &str, timeout_ms: u64, window: usize) -> Result<Self, CriticError> {
        let session = Session::spawn(command)?;
        Ok(Self {
            command: command.to_string(),
            timeout: Duration::from_millis(timeout_ms.max(1)),
            window: window.max(1),
            next_id: AtomicU64::new(0),
            discarded: AtomicUsize::new(0),
            session: Mutex::new(Some(session)),
        })
    }

    /// Process id of the current child, if one is running.
    pub fn child_id(&self) -> Option<u32> {
        self.lock().as_ref().map(|s| s.child.id())
    }

    /// Responses whose id matched no outstanding request.
    pub fn discarded_responses(&self) -> usize {
        self.discarded.load(Ordering::Relaxed)
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Option<Session>> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn timeout_ms(&self) -> u64 {
        self.timeout.as_millis() as u64
    }

    /// Sends `todo` (indices into `pairs`) in one window and waits for the
    /// answers. Returns indices that were never sent because the child died.
    fn run_window(
        &self,
        slot: &mut Option<Session>,
        pairs: &[(&str, &str)],
        todo: &[usize],
        out: &mut [Option<Result<CriticVerdict, CriticError>>],
    ) -> Vec<usize> {
        if let Some(s) = slot.as_mut() {
            if !matches!(s.child.try_wait(), Ok(None)) {
                *slot = None;
            }
        }
        if slot.is_none() {
            match Session::spawn(&self.command) {
                Ok(s) => *slot = Some(s),
                Err(e) => {
                    let msg = e.to_string();
                    for &i in todo {
                        out[i] = Some(Err(CriticError::Spawn {
                            command: self.command.clone(),
                            source: std::io::Error::other(msg.clone()),
                        }));
                    }
                    return Vec::new();
                }
            }
        }
        let session = slot.as_mut().expect("session was just ensured");

        let mut pending: BTreeMap<u64, usize> = BTreeMap::new();
        let mut unsent = Vec::new();
        let mut broken = false;
        for (k, &i) in todo.iter().enumerate() {
            let id = self.next_id.fetch_add(1, Ordering::Relaxed);
            let (premise, hypothesis) = pairs[i];
            let line = json!({"id": id, "premise": premise, "hypothesis": hypothesis}).to_string();
            if writeln!(session.stdin, "{line}").is_err() {
                out[i] = Some(Err(CriticError::ChildExited { id }));
                unsent.extend_from_slice(&todo[k + 1..]);
                broken = true;
                break;
            }
            pending.insert(id, i);
        }
        if !broken && session.stdin.flush().is_err() {
            broken = true;
        }
        let deadline = Instant::now() + self.timeout;

        while !pending.is_empty() {
            let wait = deadline.saturating_duration_since(Instant::now());
            match session.lines.recv_timeout(wait) {
                Ok(Some(line)) => self.accept(&line, &mut pending, out),
                Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                    for (id, i) in std::mem::take(&mut pending) {
                        out[i] = Some(Err(CriticError::ChildExited { id }));
                    }
                    broken = true;
                }
                Err(RecvTimeoutError::Timeout) => {
                    for (id, i) in std::mem::take(&mut pending) {
                        out[i] = Some(Err(CriticError::Timeout {
                            id,
                            timeout_ms: self.timeout_ms(),
                        }));
                    }
                }
            }
        }
        if broken {
            *slot = None;
        }
        unsent
    }

    fn accept(
        &self,
        line: &str,
        pending: &mut BTreeMap<u64, usize>,
        out: &mut [Option<Result<CriticVerdict, CriticError>>],
    ) {
        if line.trim().is_empty() {
            return;
        }
        let value: Option<Value> = serde_json::from_str(line).ok();
        let id = value.as_ref().and_then(|v| v.get("id")).and_then(Value::as_u64);
        let Some(id) = id else {
            // Unattributable garbage: charge it to the oldest outstanding request.
            if let Some((id, i)) = pending.pop_first() {
                out[i] = Some(Err(CriticError::Malformed {
                    id,
                    reason: format!("no id in {line:?}"),
                }));
            }
            return;
        };
        let Some(i) = pending.remove(&id) else {
            self.discarded.fetch_add(1, Ordering::Relaxed);
            return;
        };
        out[i] = Some(parse_verdict(id, value.as_ref().expect("id came from a value")));
    }
}

fn parse_verdict(id: u64, value: &Value) -> Result<CriticVerdict, CriticError> {
    let field = |name: &str| {
        value.get(name).and_then(Value::as_f64).ok_or_else(|| CriticError::Malformed {
            id,
            reason: format!("missing numeric field `{name}`"),
        })
    };
    let (e, n, c) = (field("entailment")?, field("neutral")?, field("contradiction")?);
    if [e, n, c].iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(CriticError::Malformed {
            id,
            reason: format!("probability outside [0, 1] in ({e}, {n}, {c})"),
        });
    }
    let sum = e + n + c;
    if (sum - 1.0).abs() > EXTERNAL_SUM_TOLERANCE {
        return Err(CriticError::NotNormalized { id, sum });
    }
    CriticVerdict::new(e / sum, n / sum, c / sum)
}

impl Critic for ExternalCritic {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<CriticVerdict, CriticError> {
        self.judge_batch(&[(premise, hypothesis)])
            .pop()
            .expect("one result per pair")
    }

    fn judge_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<CriticVerdict, CriticError>> {
        let mut out: Vec<Option<Result<CriticVerdict, CriticError>>> = (0..pairs.len()).map(|_| None).collect();
        let mut todo: Vec<usize> = Vec::with_capacity(pairs.len());
        for (i, (p, h)) in pairs.iter().enumerate() {
            if p.trim().is_empty() || h.trim().is_empty() {
                out[i] = Some(Err(CriticError::EmptyInput));
            } else {
                todo.push(i);
            }
        }

        let mut slot = self.lock();
        let mut cursor = 0;
        let mut retry: Vec<usize> = Vec::new();
        while cursor < todo.len() || !retry.is_empty() {
            let window: Vec<usize> = if retry.is_empty() {
                let end = (cursor + self.window).min(todo.len());
                let w = todo[cursor..end].to_vec();
                cursor = end;
                w
            } else {
                std::mem::take(&mut retry)
            };
            retry = self.run_window(&mut slot, pairs, &window, &mut out);
        }
        out.into_iter()
            .map(|r| r.expect("every pair is resolved"))
            .collect()
    }
}
