//! Fixed-step simulation of agents `y_i = H_i u_i` under diffusive coupling
//! `U = -D Psi(D^T (Y + W))`, with zero-order-held Gaussian noise `W`.
//!
//! Running truncated norms `||D^T Y||_T`, `||D^T W||_T` and `||V||_T` are
//! accumulated at every integration step by the trapezoidal rule; samples are
//! recorded every `record_stride` steps plus the final step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::CouplingBank;
use crate::graph::{Graph, IncidenceMatrix};
use crate::lti::{RationalTransfer, StateSpace};

/// Relative slack for the sigma plateau test in [`consensus_metrics`].
pub const PLATEAU_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("agent {agent} has a zero output map")]
    DegenerateOutputMap { agent: usize },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite{}", match .time { Some(t) => format!(" at t = {t}"), None => String::new() })]
    NonFinite { time: Option<f64> },
}

/// Closed-loop network ready for simulation.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    graph: Graph,
    incidence: IncidenceMatrix,
    agents: Vec<StateSpace>,
    bank: CouplingBank,
    offsets: Vec<usize>,
    state_dim: usize,
}

pub fn assemble(
    graph: &Graph,
    tfs: &[RationalTransfer],
    bank: &CouplingBank,
) -> Result<NetworkModel, SimError> {
    if tfs.len() != graph.node_count() {
        return Err(SimError::CountMismatch {
            what: "agents",
            expected: graph.node_count(),
            got: tfs.len(),
        });
    }
    if bank.len() != graph.edge_count() {
        return Err(SimError::CountMismatch {
            what: "couplings",
            expected: graph.edge_count(),
            got: bank.len(),
        });
    }
    let agents: Vec<StateSpace> = tfs.iter().map(RationalTransfer::realize).collect();
    let mut offsets = Vec::with_capacity(agents.len());
    let mut state_dim = 0;
    for a in &agents {
        offsets.push(state_dim);
        state_dim += a.order();
    }
    Ok(NetworkModel {
        graph: graph.clone(),
        incidence: graph.incidence(),
        agents,
        bank: bank.clone(),
        offsets,
        state_dim,
    })
}

/// Instantaneous network signals at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSignals {
    pub y: Vec<f64>,
    /// `D^T Y`
    pub dy: Vec<f64>,
    /// `Psi(D^T (Y + W))`
    pub v: Vec<f64>,
    /// `-D V`
    pub u: Vec<f64>,
}

impl NetworkModel {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn agents(&self) -> &[StateSpace] {
        &self.agents
    }

    pub fn bank(&self) -> &CouplingBank {
        &self.bank
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn agent_state<'a>(&self, x: &'a [f64], i: usize) -> &'a [f64] {
        &x[self.offsets[i]..self.offsets[i] + self.agents[i].order()]
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        (0..self.agents.len())
            .map(|i| self.agents[i].output(self.agent_state(x, i)))
            .collect()
    }

    /// The coupling law `U = -D Psi(D^T (Y + W))` given outputs and noise.
    pub fn coupling_input(&self, y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let yw: Vec<f64> = y.iter().zip(w).map(|(a, b)| a + b).collect();
        let a = self.incidence.transpose_mul(&yw);
        let v = self
            .bank
            .psi_apply(&a)
            .expect("bank length matches edge count by construction");
        let u = self.incidence.mul(&v).into_iter().map(|x| -x).collect();
        (v, u)
    }

    pub fn signals(&self, x: &[f64], w: &[f64]) -> EdgeSignals {
        let y = self.outputs(x);
        let dy = self.incidence.transpose_mul(&y);
        let (v, u) = self.coupling_input(&y, w);
        EdgeSignals { y, dy, v, u }
    }

    /// Closed-loop vector field with the noise held at `w`.
    pub fn vector_field(&self, x: &[f64], w: &[f64], dx: &mut [f64]) {
        let y = self.outputs(x);
        let (_, u) = self.coupling_input(&y, w);
        for (i, agent) in self.agents.iter().enumerate() {
            let r = self.offsets[i]..self.offsets[i] + agent.order();
            agent.derivative(&x[r.clone()], u[i], &mut dx[r]);
        }
    }

    /// One classical RK4 step with `w` held constant over the step.
    pub fn step_rk4(&self, x: &[f64], w: &[f64], dt: f64) -> Result<Vec<f64>, SimError> {
        let next = rk4_step(|s, d| self.vector_field(s, w, d), x, dt);
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(SimError::NonFinite { time: None })
        }
    }
}

/// Classical four-stage Runge-Kutta step for `x' = f(x)`.
pub fn rk4_step(f: impl Fn(&[f64], &mut [f64]), x: &[f64], dt: f64) -> Vec<f64> {
    let m = x.len();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];

    f(x, &mut k1);
    for i in 0..m {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..m {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..m {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    (0..m)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Minimum-norm state reproducing the requested initial outputs:
/// `x_i = C_i^T y0_i / (C_i C_i^T)` per agent.
pub fn initial_state(model: &NetworkModel, y0: &[f64]) -> Result<Vec<f64>, SimError> {
    if y0.len() != model.agents.len() {
        return Err(SimError::CountMismatch {
            what: "initial outputs",
            expected: model.agents.len(),
            got: y0.len(),
        });
    }
    let mut x = Vec::with_capacity(model.state_dim);
    for (i, (agent, &yi)) in model.agents.iter().zip(y0).enumerate() {
        let cc: f64 = agent.c.iter().map(|c| c * c).sum();
        if cc == 0.0 {
            return Err(SimError::DegenerateOutputMap { agent: i + 1 });
        }
        x.extend(agent.c.iter().map(|c| c * yi / cc));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    GaussianZoh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            amplitude: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(amplitude: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::GaussianZoh,
            amplitude,
            seed,
        }
    }
}

/// Counter-based Gaussian source: the sample for `(agent, step)` depends only
/// on the seed, the agent and the step, never on the order of draws.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    cfg: NoiseConfig,
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(cfg: NoiseConfig) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    pub fn sample(&mut self, agent: usize, step: usize) -> f64 {
        match self.cfg.kind {
            NoiseKind::None => 0.0,
            NoiseKind::GaussianZoh => {
                self.rng.set_stream(agent as u64);
                // two u64 draws = four 32-bit words per step
                self.rng.set_word_pos(step as u128 * 4);
                let u1: f64 = self.rng.random();
                let u2: f64 = self.rng.random();
                let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                self.cfg.amplitude * z
            }
        }
    }

    pub fn sample_all(&mut self, n: usize, step: usize) -> Vec<f64> {
        (0..n).map(|i| self.sample(i, step)).collect()
    }
}

/// Noise samples laid out as `n` rows of `steps` held values.
pub fn noise_sequence(cfg: NoiseConfig, n: usize, steps: usize) -> Vec<Vec<f64>> {
    let mut src = NoiseSource::new(cfg);
    (0..n)
        .map(|i| (0..steps).map(|k| src.sample(i, k)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub y0: Vec<f64>,
    pub noise: NoiseConfig,
    pub record_stride: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.dt <= self.t_final) {
            return Err(SimError::InvalidConfig(format!(
                "need dt <= t_final, got dt = {}, t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.record_stride == 0 {
            return Err(SimError::InvalidConfig("record_stride must be at least 1".into()));
        }
        if !(self.noise.amplitude >= 0.0 && self.noise.amplitude.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "noise amplitude must be non-negative, got {}",
                self.noise.amplitude
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

/// One recorded instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    pub dy: Vec<f64>,
    pub norm_dy: f64,
    pub norm_dw: f64,
    pub norm_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub samples: Vec<Sample>,
    /// Final `||D^T Y||_T / ||D^T W||_T`; absent when `W` vanishes.
    pub rho_hat: Option<f64>,
    pub steps: usize,
    pub dt: f64,
}

impl SimulationResult {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a run records at least two samples")
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn run(model: &NetworkModel, cfg: &SimConfig) -> Result<SimulationResult, SimError> {
    cfg.validate()?;
    let n = model.agents.len();
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut noise = NoiseSource::new(cfg.noise);
    let mut x = initial_state(model, &cfg.y0)?;

    let (mut int_dy, mut int_dw, mut int_v) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut samples = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut w = noise.sample_all(n, 0);
    let mut sig = model.signals(&x, &w);

    for k in 0..=steps {
        let t = k as f64 * dt;
        if k % cfg.record_stride == 0 || k == steps {
            samples.push(Sample {
                t,
                y: sig.y.clone(),
                u: sig.u.clone(),
                w: w.clone(),
                v: sig.v.clone(),
                dy: sig.dy.clone(),
                norm_dy: int_dy.sqrt(),
                norm_dw: int_dw.sqrt(),
                norm_v: int_v.sqrt(),
            });
        }
        if k == steps {
            break;
        }
        let next = model
            .step_rk4(&x, &w, dt)
            .map_err(|_| SimError::NonFinite { time: Some(t + dt) })?;
        // right end of the interval, still under the held w_k
        let end = model.signals(&next, &w);
        let dw2 = sq_norm(&model.incidence.transpose_mul(&w));
        int_dy += 0.5 * dt * (sq_norm(&sig.dy) + sq_norm(&end.dy));
        int_dw += dt * dw2;
        int_v += 0.5 * dt * (sq_norm(&sig.v) + sq_norm(&end.v));

        x = next;
        w = noise.sample_all(n, k + 1);
        sig = model.signals(&x, &w);
    }

    let last = samples.last().expect("recorded final step");
    let rho_hat = (last.norm_dw > 0.0).then(|| last.norm_dy / last.norm_dw);
    Ok(SimulationResult {
        samples,
        rho_hat,
        steps,
        dt,
    })
}

/// Runs one simulation per seed in parallel; results come back sorted by seed.
pub fn run_batch(
    model: &NetworkModel,
    cfg: &SimConfig,
    seeds: &[u64],
) -> Vec<(u64, Result<SimulationResult, SimError>)> {
    let mut out: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.noise.seed = seed;
            (seed, run(model, &c))
        })
        .collect();
    out.sort_by_key(|(seed, _)| *seed);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusMetrics {
    pub rho_hat: Option<f64>,
    /// `max_T (||D^T Y||_T - rho_cert ||D^T W||_T)` over recorded `T`.
    pub sigma_hat: f64,
    /// `sigma_hat` is finite and its running maximum does not grow over the
    /// final 20% of the horizon.
    pub bound_ok: bool,
}

pub fn consensus_metrics(res: &SimulationResult, rho_cert: f64) -> ConsensusMetrics {
    let horizon = res.last().t;
    let cutoff = 0.8 * horizon;
    let mut running = f64::NEG_INFINITY;
    let mut at_cutoff = None;
    for s in &res.samples {
        let g = s.norm_dy - rho_cert * s.norm_dw;
        running = running.max(g);
        if at_cutoff.is_none() && s.t >= cutoff {
            at_cutoff = Some(running);
        }
    }
    let sigma_hat = running;
    let plateau = at_cutoff.unwrap_or(running);
    let bound_ok = sigma_hat.is_finite() && sigma_hat <= plateau + PLATEAU_RTOL * plateau.abs();
    ConsensusMetrics {
        rho_hat: res.rho_hat,
        sigma_hat,
        bound_ok,
    }
}
