//! Command implementations. Each command builds a [`Report`], writes its
//! artifacts into the output directory and returns the exit code.

use std::fs;
use std::path::{Path, PathBuf};

use passnet_core::certificates::{certify, CertError, IndexVector};
use passnet_core::coupling::CouplingKind;
use passnet_core::linalg::LinalgError;
use passnet_core::lti::{ifp_index_estimate, IfpEstimate, IfpSweep};
use passnet_core::sim::{assemble, consensus_metrics, run, SimError, SimulationResult};
use thiserror::Error;

use crate::network_spec::{LoadError, NetworkSpecDoc};
use crate::output;
use crate::report::{
    AgentIndexRow, CertificatesSection, CertifiedVariant, IndexSource, Report, SectorRow,
    SimFailure, SimulationSection,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERT_NEGATIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Load(_) | Self::Input(_) | Self::Output { .. } => EXIT_INPUT,
        }
    }
}

impl From<CertError> for CliError {
    fn from(e: CertError) -> Self {
        match e {
            CertError::Linalg(LinalgError::NonConvergence { .. }) => Self::Numerical(e.to_string()),
            other => Self::Input(other.to_string()),
        }
    }
}

/// Per-command overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct SimOverrides {
    pub seed: Option<u64>,
    pub t_final: Option<f64>,
}

/// What a finished command produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub exit_code: i32,
    pub report: Report,
    pub files: Vec<PathBuf>,
}

fn estimate_all(doc: &NetworkSpecDoc) -> Vec<Result<IfpEstimate, String>> {
    doc.agents
        .iter()
        .map(|a| match &a.tf {
            None => Err("no transfer function".to_string()),
            Some(h) => ifp_index_estimate(h, IfpSweep::default()).map_err(|e| e.to_string()),
        })
        .collect()
}

fn index_rows(doc: &NetworkSpecDoc, estimates: &[Result<IfpEstimate, String>]) -> Vec<AgentIndexRow> {
    doc.agents
        .iter()
        .zip(estimates)
        .map(|(a, e)| AgentIndexRow::new(a.id, a.ifp_index, e.clone()))
        .collect()
}

fn discrepancy_notes(rows: &[AgentIndexRow], notes: &mut Vec<String>) {
    for r in rows.iter().filter(|r| r.discrepancy) {
        notes.push(format!(
            "agent {}: declared index {} exceeds inf Re H(jw) = {:.6}; an IFP index cannot exceed \
             this infimum, so the declared value is inconsistent with the transfer function",
            r.agent,
            r.declared.unwrap_or(f64::NAN),
            r.computed.map_or(f64::NAN, |c| c.nu)
        ));
    }
}

fn sector_rows(doc: &NetworkSpecDoc, notes: &mut Vec<String>) -> Vec<SectorRow> {
    let mut sine = false;
    let rows = doc
        .graph
        .pairs()
        .into_iter()
        .zip(doc.bank.couplings())
        .map(|(edge, c)| {
            let kind = match c.kind {
                CouplingKind::LinearGain { .. } => "linear_gain",
                CouplingKind::SaturatedSine { .. } => {
                    sine = true;
                    "saturated_sine"
                }
                CouplingKind::CustomTable { .. } => "custom_table",
            };
            SectorRow {
                edge,
                kind: kind.to_string(),
                alpha_lo: c.alpha_lo,
                alpha_hi: c.alpha_hi,
            }
        })
        .collect();
    if sine {
        notes.push(
            "saturated_sine a*sin(x): its tightest lower sector bound is 2a/pi, the infimum of \
             sin(x)/x on |x| < pi/2; declared bounds were checked on a sample grid"
                .to_string(),
        );
    }
    rows
}

/// Index vector of one source, or the reason it cannot be formed.
fn index_vector(
    doc: &NetworkSpecDoc,
    estimates: &[Result<IfpEstimate, String>],
    source: IndexSource,
) -> Result<Vec<f64>, String> {
    doc.agents
        .iter()
        .zip(estimates)
        .map(|(a, e)| match (source, a.ifp_index, e) {
            (IndexSource::Declared, Some(v), _) => Ok(v),
            // agents without a declared index fall back to their estimate
            (IndexSource::Declared, None, Ok(e)) | (IndexSource::Computed, _, Ok(e)) => Ok(e.nu),
            (_, _, Err(msg)) => Err(format!("agent {}: {msg}", a.id)),
        })
        .collect()
}

fn certificates_section(
    doc: &NetworkSpecDoc,
    estimates: &[Result<IfpEstimate, String>],
    selected: IndexSource,
    notes: &mut Vec<String>,
) -> Result<CertificatesSection, CliError> {
    let mut section = CertificatesSection {
        selected,
        declared: None,
        computed: None,
        unavailable: Vec::new(),
        sectors: sector_rows(doc, notes),
    };
    for source in [IndexSource::Declared, IndexSource::Computed] {
        match index_vector(doc, estimates, source) {
            Ok(nu) => {
                let idx = IndexVector {
                    nu: nu.clone(),
                    beta_bar: doc.certify.beta_bar,
                };
                let report = certify(&doc.graph, &idx, &doc.bank)?;
                let variant = Some(CertifiedVariant { source, nu, report });
                match source {
                    IndexSource::Declared => section.declared = variant,
                    IndexSource::Computed => section.computed = variant,
                }
            }
            Err(why) if source == selected => {
                return Err(CliError::Input(format!("{} indices unavailable: {why}", source.label())))
            }
            Err(why) => section
                .unavailable
                .push(format!("{} indices: {why}", source.label())),
        }
    }
    notes.push(
        "\"D^T Xi D cannot be PSD\" means this passivity argument fails for the given indices; \
         it does not by itself imply closed-loop divergence"
            .to_string(),
    );
    Ok(section)
}

fn write_report(out: &Path, report: &Report, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    files.push(output::write_text(out, "report.txt", &report.render_text())?);
    files.push(output::write_text(out, "report.json", &report.to_json())?);
    Ok(())
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Output {
        path: out.display().to_string(),
        message: e.to_string(),
    })
}

pub fn cmd_indices(doc: &NetworkSpecDoc, out: &Path) -> Result<RunArtifacts, CliError> {
    if let Err(id) = doc.transfer_functions() {
        return Err(CliError::Input(format!(
            "agent {id} has no transfer function; indices need one for every agent"
        )));
    }
    let estimates = estimate_all(doc);
    if let Some((a, Err(msg))) = doc.agents.iter().zip(&estimates).find(|(_, e)| e.is_err()) {
        return Err(CliError::Input(format!("agent {}: {msg}", a.id)));
    }
    let mut report = Report::new("indices", doc.nodes, doc.edge_count());
    let rows = index_rows(doc, &estimates);
    discrepancy_notes(&rows, &mut report.notes);
    ensure_dir(out)?;
    let mut files = vec![output::write_indices_csv(out, &rows)?];
    report.indices = Some(rows);
    write_report(out, &report, &mut files)?;
    Ok(RunArtifacts {
        exit_code: EXIT_OK,
        report,
        files,
    })
}

fn selected_source(doc: &NetworkSpecDoc, use_computed: bool) -> IndexSource {
    if use_computed || doc.certify.use_computed_indices {
        IndexSource::Computed
    } else {
        IndexSource::Declared
    }
}

fn certify_into(
    doc: &NetworkSpecDoc,
    use_computed: bool,
    report: &mut Report,
) -> Result<i32, CliError> {
    let estimates = estimate_all(doc);
    let rows = index_rows(doc, &estimates);
    discrepancy_notes(&rows, &mut report.notes);
    report.indices = Some(rows);
    let section = certificates_section(
        doc,
        &estimates,
        selected_source(doc, use_computed),
        &mut report.notes,
    )?;
    let positive = section
        .selected_variant()
        .is_some_and(|v| v.report.thm2.all_positive);
    report.certificates = Some(section);
    Ok(if positive { EXIT_OK } else { EXIT_CERT_NEGATIVE })
}

pub fn cmd_certify(doc: &NetworkSpecDoc, use_computed: bool, out: &Path) -> Result<RunArtifacts, CliError> {
    let mut report = Report::new("certify", doc.nodes, doc.edge_count());
    let exit_code = certify_into(doc, use_computed, &mut report)?;
    report.exit_code = exit_code;
    ensure_dir(out)?;
    let mut files = Vec::new();
    write_report(out, &report, &mut files)?;
    Ok(RunArtifacts {
        exit_code,
        report,
        files,
    })
}

fn dispersion(dy: &[f64]) -> f64 {
    dy.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Runs the simulation and fills the report; returns the raw result when the
/// run finished.
fn simulate_into(
    doc: &NetworkSpecDoc,
    overrides: &SimOverrides,
    rho_cert: Option<f64>,
    report: &mut Report,
) -> Result<Option<SimulationResult>, CliError> {
    let tfs = doc.transfer_functions().map_err(|id| {
        CliError::Input(format!(
            "agent {id} is given only by its index and cannot be simulated"
        ))
    })?;
    for (a, h) in doc.agents.iter().zip(&tfs) {
        h.check_poles()
            .map_err(|e| CliError::Input(format!("agent {}: {e}", a.id)))?;
    }
    let mut cfg = doc.sim.clone();
    if let Some(seed) = overrides.seed {
        cfg.noise.seed = seed;
    }
    if let Some(t) = overrides.t_final {
        cfg.t_final = t;
    }
    cfg.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let model = assemble(&doc.graph, &tfs, &doc.bank).map_err(|e| CliError::Input(e.to_string()))?;
    let res = match run(&model, &cfg) {
        Ok(r) => r,
        Err(SimError::NonFinite { time }) => {
            report.simulation_failure = Some(SimFailure {
                message: "state became non-finite".to_string(),
                time,
            });
            return Ok(None);
        }
        Err(e @ SimError::DegenerateOutputMap { .. }) => {
            report.simulation_failure = Some(SimFailure {
                message: e.to_string(),
                time: None,
            });
            return Ok(None);
        }
        Err(e) => return Err(CliError::Input(e.to_string())),
    };
    let (first, last) = (res.first(), res.last());
    report.simulation = Some(SimulationSection {
        seed: cfg.noise.seed,
        noise_amplitude: cfg.noise.amplitude,
        dt: cfg.dt,
        t_final: cfg.t_final,
        steps: res.steps,
        recorded: res.samples.len(),
        initial_dispersion: dispersion(&first.dy),
        final_dispersion: dispersion(&last.dy),
        final_outputs: last.y.clone(),
        norm_dy: last.norm_dy,
        norm_dw: last.norm_dw,
        norm_v: last.norm_v,
        rho_hat: res.rho_hat,
        rho_cert,
        consensus: rho_cert.map(|rho| consensus_metrics(&res, rho)),
    });
    Ok(Some(res))
}

fn write_sim_files(out: &Path, doc: &NetworkSpecDoc, res: &SimulationResult) -> Result<Vec<PathBuf>, CliError> {
    Ok(vec![
        output::write_trajectory_csv(out, doc.nodes, doc.edge_count(), res)?,
        output::write_metrics_csv(out, res)?,
    ])
}

/// Certified gain of the selected index source, when it can be computed.
fn quiet_rho(doc: &NetworkSpecDoc, notes: &mut Vec<String>) -> Option<f64> {
    let mut scratch = Report::new("", doc.nodes, doc.edge_count());
    match certify_into(doc, false, &mut scratch) {
        Ok(_) => scratch
            .certificates
            .as_ref()
            .and_then(|c| c.selected_variant())
            .and_then(|v| v.report.thm2.rho),
        Err(e) => {
            notes.push(format!("no certificate for the bound check: {e}"));
            None
        }
    }
}

pub fn cmd_simulate(
    doc: &NetworkSpecDoc,
    overrides: &SimOverrides,
    out: &Path,
) -> Result<RunArtifacts, CliError> {
    let mut report = Report::new("simulate", doc.nodes, doc.edge_count());
    let rho = quiet_rho(doc, &mut report.notes);
    let res = simulate_into(doc, overrides, rho, &mut report)?;
    ensure_dir(out)?;
    let mut files = match &res {
        Some(r) => write_sim_files(out, doc, r)?,
        None => Vec::new(),
    };
    report.exit_code = if res.is_some() { EXIT_OK } else { EXIT_NUMERICAL };
    write_report(out, &report, &mut files)?;
    Ok(RunArtifacts {
        exit_code: report.exit_code,
        report,
        files,
    })
}

/// Certificates, simulation against the selected certificate's gain, and one
/// combined report.
pub fn cmd_report(
    doc: &NetworkSpecDoc,
    use_computed: bool,
    overrides: &SimOverrides,
    out: &Path,
) -> Result<RunArtifacts, CliError> {
    let mut report = Report::new("report", doc.nodes, doc.edge_count());
    let cert_code = certify_into(doc, use_computed, &mut report)?;
    let rho = report
        .certificates
        .as_ref()
        .and_then(|c| c.selected_variant())
        .and_then(|v| v.report.thm2.rho);
    let res = simulate_into(doc, overrides, rho, &mut report)?;
    ensure_dir(out)?;
    let mut files = match &res {
        Some(r) => write_sim_files(out, doc, r)?,
        None => Vec::new(),
    };
    report.exit_code = if res.is_none() { EXIT_NUMERICAL } else { cert_code };
    write_report(out, &report, &mut files)?;
    Ok(RunArtifacts {
        exit_code: report.exit_code,
        report,
        files,
    })
}
