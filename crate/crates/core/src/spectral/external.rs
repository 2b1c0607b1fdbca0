//! Newline-delimited JSON exchange with an out-of-process Ising sampler.
//!
//! A request asks for `num_reads` samples from
//! `P(s) ∝ exp(sum_k h_k s_k + sum_(i,j) J_ij s_i s_j)`, which for an RBM is
//! `h = b ‖ c` and `J = [[i, N_v + j, W_ij], ...]`. Spin order in a reply is
//! visibles then hiddens. Each reply line carries distinct samples plus their
//! occurrence counts.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{normalize_log_weights, SpectralModelParams, SpinState, MAX_JOINT_SPINS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingRequest {
    pub h: Vec<f64>,
    #[serde(rename = "J")]
    pub j: Vec<(usize, usize, f64)>,
    pub num_reads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingReply {
    pub samples: Vec<Vec<i8>>,
    pub num_occurrences: Vec<usize>,
}

impl IsingRequest {
    pub fn from_rbm(params: &SpectralModelParams, num_reads: usize) -> Self {
        let nv = params.n_visible();
        let h = params.b.iter().chain(params.c.iter()).copied().collect();
        let mut j = Vec::with_capacity(params.w.len());
        for ((vi, hj), &wij) in params.w.indexed_iter() {
            j.push((vi, nv + hj, wij));
        }
        Self { h, j, num_reads }
    }

    pub fn n_spins(&self) -> usize {
        self.h.len()
    }

    fn validate(&self) -> Result<()> {
        for &(a, b, w) in &self.j {
            if a >= b || b >= self.n_spins() || !w.is_finite() {
                return Err(Error::Sampler(format!("invalid coupling [{a}, {b}, {w}]")));
            }
        }
        if self.h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Sampler("non-finite field".into()));
        }
        Ok(())
    }

    /// Answers the request by exact enumeration; duplicates are merged
    /// into occurrence counts in first-seen order.
    pub fn solve_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<IsingReply> {
        self.validate()?;
        let n = self.n_spins();
        if n > MAX_JOINT_SPINS {
            return Err(Error::Capacity {
                what: "exact Ising sampler",
                required: n,
                limit: MAX_JOINT_SPINS,
            });
        }
        let spin = |idx: usize, k: usize| if idx >> k & 1 == 1 { 1.0 } else { -1.0 };
        let logw = (0..1usize << n)
            .map(|idx| {
                let field: f64 = self.h.iter().enumerate().map(|(k, h)| h * spin(idx, k)).sum();
                let pair: f64 = self.j.iter().map(|&(a, b, w)| w * spin(idx, a) * spin(idx, b)).sum();
                field + pair
            })
            .collect();
        let (probs, _) = normalize_log_weights(logw);
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let mut order: Vec<usize> = Vec::new();
        let mut counts = std::collections::HashMap::new();
        for _ in 0..self.num_reads {
            let u = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
            *counts.entry(idx).or_insert_with(|| {
                order.push(idx);
                0usize
            }) += 1;
        }
        Ok(IsingReply {
            samples: order
                .iter()
                .map(|&idx| (0..n).map(|k| spin(idx, k) as i8).collect())
                .collect(),
            num_occurrences: order.iter().map(|idx| counts[idx]).collect(),
        })
    }
}

impl IsingReply {
    /// Expands occurrence counts into individual RBM states.
    pub fn into_states(self, n_visible: usize, n_hidden: usize, expected_reads: usize) -> Result<Vec<SpinState>> {
        if self.samples.len() != self.num_occurrences.len() {
            return Err(Error::Sampler(format!(
                "{} samples but {} occurrence counts",
                self.samples.len(),
                self.num_occurrences.len()
            )));
        }
        let total: usize = self.num_occurrences.iter().sum();
        if total != expected_reads {
            return Err(Error::Sampler(format!(
                "requested {expected_reads} reads, reply holds {total}"
            )));
        }
        let mut out = Vec::with_capacity(total);
        for (spins, count) in self.samples.into_iter().zip(self.num_occurrences) {
            if spins.len() != n_visible + n_hidden {
                return Err(Error::Sampler(format!(
                    "sample has {} spins, expected {}",
                    spins.len(),
                    n_visible + n_hidden
                )));
            }
            let h = spins[n_visible..].to_vec();
            let mut v = spins;
            v.truncate(n_visible);
            let state = SpinState::new(v, h).map_err(|e| Error::Sampler(e.to_string()))?;
            out.extend(std::iter::repeat_n(state, count));
        }
        Ok(out)
    }
}

/// Where an external sampler lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExternalEndpoint {
    /// Child process speaking the protocol on stdin/stdout.
    Command { program: String, args: Vec<String> },
    /// Requests appended to one file, replies read line by line from another
    /// (typically a pair of named pipes).
    FilePair { requests: PathBuf, replies: PathBuf },
}

/// One request line out, one reply line back.
pub trait Transport: Send {
    fn exchange(&mut self, request: &str) -> Result<String>;
}

pub struct ProcessTransport {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessTransport {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Sampler(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { child, stdin, stdout })
    }
}

impl Transport for ProcessTransport {
    fn exchange(&mut self, request: &str) -> Result<String> {
        writeln!(self.stdin, "{request}")?;
        self.stdin.flush()?;
        read_reply_line(&mut self.stdout)
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Generic line transport over any reader/writer pair.
pub struct StreamTransport<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead + Send, W: Write + Send> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        Self { reader, writer }
    }
}

impl StreamTransport<BufReader<File>, File> {
    pub fn open(requests: &PathBuf, replies: &PathBuf) -> Result<Self> {
        let writer = OpenOptions::new().create(true).append(true).open(requests)?;
        let reader = BufReader::new(File::open(replies)?);
        Ok(Self { reader, writer })
    }
}

impl<R: BufRead + Send, W: Write + Send> Transport for StreamTransport<R, W> {
    fn exchange(&mut self, request: &str) -> Result<String> {
        writeln!(self.writer, "{request}")?;
        self.writer.flush()?;
        read_reply_line(&mut self.reader)
    }
}

fn read_reply_line<R: BufRead>(reader: &mut R) -> Result<String> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(Error::Sampler("external sampler closed its output".into()));
    }
    Ok(line)
}

/// Sampler client: one resubmission after a malformed reply, then failure.
pub struct ExternalClient {
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for ExternalClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClient").finish_non_exhaustive()
    }
}

impl ExternalClient {
    pub fn connect(endpoint: &ExternalEndpoint) -> Result<Self> {
        let transport: Box<dyn Transport> = match endpoint {
            ExternalEndpoint::Command { program, args } => Box::new(ProcessTransport::spawn(program, args)?),
            ExternalEndpoint::FilePair { requests, replies } => Box::new(StreamTransport::open(requests, replies)?),
        };
        Ok(Self { transport })
    }

    pub fn with_transport(transport: Box<dyn Transport>) -> Self {
        Self { transport }
    }

    pub fn sample(&mut self, params: &SpectralModelParams, n: usize) -> Result<Vec<SpinState>> {
        let request = serde_json::to_string(&IsingRequest::from_rbm(params, n))?;
        let mut last_err = None;
        for _attempt in 0..2 {
            let line = self.transport.exchange(&request)?;
            let parsed = serde_json::from_str::<IsingReply>(line.trim())
                .map_err(|e| Error::Sampler(format!("malformed reply: {e}")))
                .and_then(|reply| reply.into_states(params.n_visible(), params.n_hidden(), n));
            match parsed {
                Ok(states) => return Ok(states),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("two attempts made"))
    }
}

/// Serves requests from `input` until EOF, answering each by exact enumeration.
pub fn serve_exact<R: BufRead, W: Write, G: Rng + ?Sized>(input: R, mut output: W, rng: &mut G) -> Result<usize> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let request: IsingRequest = serde_json::from_str(&line)?;
        let reply = request.solve_exact(rng)?;
        writeln!(output, "{}", serde_json::to_string(&reply)?)?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}
