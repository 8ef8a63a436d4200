//! Run reports: a serializable record of everything a command computed, and
//! its plain-text rendering.

use std::fmt::Write as _;

use passnet_core::certificates::{CertificateReport, Prop1Reason, Thm1Verdict};
use passnet_core::lti::IfpEstimate;
use passnet_core::sim::ConsensusMetrics;
use serde::{Deserialize, Serialize};

/// Slack above the computed infimum before a declared index is flagged.
pub const DISCREPANCY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSource {
    Declared,
    Computed,
}

impl IndexSource {
    pub fn label(self) -> &'static str {
        match self {
            Self::Declared => "declared",
            Self::Computed => "computed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentIndexRow {
    pub agent: usize,
    pub declared: Option<f64>,
    pub computed: Option<IfpEstimate>,
    /// Why no estimate exists (no transfer function, unstable poles, ...).
    pub computed_error: Option<String>,
    /// The declared index exceeds the computed infimum of `Re H(jw)`, which no
    /// valid IFP index can do.
    pub discrepancy: bool,
}

impl AgentIndexRow {
    pub fn new(agent: usize, declared: Option<f64>, computed: Result<IfpEstimate, String>) -> Self {
        let (computed, computed_error) = match computed {
            Ok(e) => (Some(e), None),
            Err(msg) => (None, Some(msg)),
        };
        let discrepancy = match (declared, computed) {
            (Some(d), Some(c)) => d > c.nu + DISCREPANCY_TOL,
            _ => false,
        };
        Self {
            agent,
            declared,
            computed,
            computed_error,
            discrepancy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedVariant {
    pub source: IndexSource,
    pub nu: Vec<f64>,
    pub report: CertificateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRow {
    /// 1-based `(i, j)`.
    pub edge: (usize, usize),
    pub kind: String,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificatesSection {
    pub selected: IndexSource,
    pub declared: Option<CertifiedVariant>,
    pub computed: Option<CertifiedVariant>,
    /// Why a variant could not be evaluated.
    pub unavailable: Vec<String>,
    pub sectors: Vec<SectorRow>,
}

impl CertificatesSection {
    pub fn selected_variant(&self) -> Option<&CertifiedVariant> {
        match self.selected {
            IndexSource::Declared => self.declared.as_ref(),
            IndexSource::Computed => self.computed.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFailure {
    pub message: String,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub seed: u64,
    pub noise_amplitude: f64,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub recorded: usize,
    /// `max_k |(D^T Y)_k|` at the first and last recorded instants.
    pub initial_dispersion: f64,
    pub final_dispersion: f64,
    pub final_outputs: Vec<f64>,
    pub norm_dy: f64,
    pub norm_dw: f64,
    pub norm_v: f64,
    pub rho_hat: Option<f64>,
    pub rho_cert: Option<f64>,
    pub consensus: Option<ConsensusMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub nodes: usize,
    pub edges: usize,
    pub exit_code: i32,
    pub indices: Option<Vec<AgentIndexRow>>,
    pub certificates: Option<CertificatesSection>,
    pub simulation: Option<SimulationSection>,
    pub simulation_failure: Option<SimFailure>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, nodes: usize, edges: usize) -> Self {
        Self {
            command: command.to_string(),
            nodes,
            edges,
            exit_code: 0,
            indices: None,
            certificates: None,
            simulation: None,
            simulation_failure: None,
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are finite or optional")
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "passnet {}", self.command);
        let _ = writeln!(s, "network: {} agents, {} edges", self.nodes, self.edges);
        let _ = writeln!(s, "exit code: {}", self.exit_code);
        if let Some(rows) = &self.indices {
            render_indices(&mut s, rows);
        }
        if let Some(c) = &self.certificates {
            render_certificates(&mut s, c);
        }
        if let Some(sim) = &self.simulation {
            render_simulation(&mut s, sim);
        }
        if let Some(f) = &self.simulation_failure {
            let _ = writeln!(s, "\n[simulation failure]");
            let _ = writeln!(s, "{}", f.message);
            if let Some(t) = f.time {
                let _ = writeln!(s, "failure time: {t}");
            }
        }
        if !self.notes.is_empty() {
            let _ = writeln!(s, "\n[notes]");
            for n in &self.notes {
                let _ = writeln!(s, "- {n}");
            }
        }
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn render_indices(s: &mut String, rows: &[AgentIndexRow]) {
    let _ = writeln!(s, "\n[indices]");
    let _ = writeln!(
        s,
        "{:<6} {:>12} {:>12} {:>14}  flag",
        "agent", "declared", "computed", "argmin_omega"
    );
    for r in rows {
        let flag = if r.discrepancy {
            "DECLARED EXCEEDS FREQUENCY INFIMUM"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{:<6} {:>12} {:>12} {:>14}  {}",
            r.agent,
            opt(r.declared),
            opt(r.computed.map(|c| c.nu)),
            r.computed
                .map_or_else(|| "-".to_string(), |c| format!("{:.3e}", c.argmin_omega)),
            r.computed_error.as_deref().unwrap_or(flag),
        );
    }
}

fn render_certificates(s: &mut String, c: &CertificatesSection) {
    let _ = writeln!(s, "\n[sectors]");
    for r in &c.sectors {
        let _ = writeln!(
            s,
            "edge ({}, {}) {}: [{}, {}]",
            r.edge.0, r.edge.1, r.kind, r.alpha_lo, r.alpha_hi
        );
    }
    let _ = writeln!(s, "\n[certificates]");
    let _ = writeln!(s, "selected indices: {}", c.selected.label());
    for v in [&c.declared, &c.computed].into_iter().flatten() {
        render_variant(s, v, v.source == c.selected);
    }
    for u in &c.unavailable {
        let _ = writeln!(s, "unavailable: {u}");
    }
}

fn render_variant(s: &mut String, v: &CertifiedVariant, selected: bool) {
    let r = &v.report;
    let _ = writeln!(
        s,
        "\n-- {} indices{} --",
        v.source.label(),
        if selected { " (selected)" } else { "" }
    );
    let nu: Vec<String> = v.nu.iter().map(|x| format!("{x}")).collect();
    let _ = writeln!(s, "nu: [{}]", nu.join(", "));
    match r.thm1 {
        Thm1Verdict::PassivePossible => {
            let _ = writeln!(s, "negative indices: at most one, compensation possible");
        }
        Thm1Verdict::NonPassive { negative_count } => {
            let _ = writeln!(
                s,
                "negative indices: {negative_count}, D^T Xi D cannot be PSD"
            );
        }
    }
    let _ = writeln!(
        s,
        "open-loop D^T Xi D PSD: {} (min eigenvalue {:.6e})",
        r.open_loop.psd, r.open_loop.min_eig
    );
    let p = &r.prop1;
    match (&p.weights, p.reason) {
        (Some(w), _) => {
            let w: Vec<String> = w.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(
                s,
                "single-shortage compensation: feasible, ratio {:.6}, weights [{}]",
                p.deficit_ratio.unwrap_or(f64::NAN),
                w.join(", ")
            );
        }
        (None, Some(reason)) => {
            let why = match reason {
                Prop1Reason::NoNegativeIndex => "no negative index",
                Prop1Reason::Thm1Violation => "two or more negative indices",
                Prop1Reason::NonPositiveSurplus => "another agent has no surplus",
                Prop1Reason::InsufficientSurplus => "surplus too small",
            };
            let _ = writeln!(s, "single-shortage compensation: not applicable ({why})");
        }
        (None, None) => {}
    }
    let t = &r.thm2;
    let _ = writeln!(s, "edge margins:");
    for m in &t.per_edge_margin {
        let _ = writeln!(
            s,
            "  ({}, {}) {:+.12e}{}",
            m.edge.0,
            m.edge.1,
            m.margin,
            if m.margin > 0.0 { "" } else { "  NEGATIVE" }
        );
    }
    let _ = writeln!(s, "all margins positive: {}", t.all_positive);
    let _ = writeln!(s, "kappa: {:.12e}", t.kappa);
    let _ = writeln!(s, "alpha_lo_min: {:.12e}", t.alpha_lo_min);
    match t.rho {
        Some(rho) => {
            let _ = writeln!(s, "rho: {rho:.12e}");
        }
        None => {
            let _ = writeln!(s, "rho: undefined (kappa <= 0)");
        }
    }
    if let Some(sigma) = t.sigma {
        let _ = writeln!(s, "sigma: {sigma:.12e} (beta_bar {})", t.beta_bar);
    }
}

fn render_simulation(s: &mut String, sim: &SimulationSection) {
    let _ = writeln!(s, "\n[simulation]");
    let _ = writeln!(
        s,
        "dt {} t_final {} steps {} recorded {} seed {} noise amplitude {}",
        sim.dt, sim.t_final, sim.steps, sim.recorded, sim.seed, sim.noise_amplitude
    );
    let _ = writeln!(
        s,
        "dispersion max|D^T Y|: initial {:.6e}, final {:.6e}",
        sim.initial_dispersion, sim.final_dispersion
    );
    let y: Vec<String> = sim.final_outputs.iter().map(|x| format!("{x:.6}")).collect();
    let _ = writeln!(s, "final outputs: [{}]", y.join(", "));
    let _ = writeln!(
        s,
        "||D^T Y||_T {:.6e}  ||D^T W||_T {:.6e}  ||V||_T {:.6e}",
        sim.norm_dy, sim.norm_dw, sim.norm_v
    );
    let _ = writeln!(s, "rho_hat: {}", opt(sim.rho_hat));
    match (sim.rho_cert, &sim.consensus) {
        (Some(rho), Some(m)) => {
            let _ = writeln!(
                s,
                "against certified rho {rho:.6}: sigma_hat {:.6e}, bound_ok {}",
                m.sigma_hat, m.bound_ok
            );
        }
        _ => {
            let _ = writeln!(s, "no certified rho available; bound not checked");
        }
    }
}
