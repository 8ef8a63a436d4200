//! Loading and validating network-spec JSON documents.
//!
//! Parsing goes through `serde_json::Value` by hand so every rejection can
//! name the offending location as a JSON pointer (`/edges/2/coupling/kind`).

use std::path::Path;

use passnet_core::coupling::{sector_verify, CouplingBank, CouplingKind, SectorCoupling};
use passnet_core::graph::{Graph, GraphError};
use passnet_core::lti::RationalTransfer;
use passnet_core::sim::{NoiseConfig, NoiseKind, SimConfig};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl LoadError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// JSON pointer of a schema error.
    pub fn path(&self) -> Option<&str> {
        match self {
            Self::Schema { path, .. } => Some(path),
            Self::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub id: usize,
    pub tf: Option<RationalTransfer>,
    /// User-declared IFP index.
    pub ifp_index: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub use_computed_indices: bool,
    pub beta_bar: f64,
}

/// A validated network description. Agents are sorted by id.
#[derive(Debug, Clone)]
pub struct NetworkSpecDoc {
    pub nodes: usize,
    pub agents: Vec<AgentSpec>,
    pub graph: Graph,
    pub bank: CouplingBank,
    pub sim: SimConfig,
    pub certify: CertifyOptions,
}

impl NetworkSpecDoc {
    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    /// Transfer functions of all agents, or the id of the first agent without one.
    pub fn transfer_functions(&self) -> Result<Vec<RationalTransfer>, usize> {
        self.agents
            .iter()
            .map(|a| a.tf.clone().ok_or(a.id))
            .collect()
    }
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_FINAL: f64 = 100.0;
pub const DEFAULT_RECORD_STRIDE: usize = 100;
const SECTOR_SAMPLES: usize = 4000;

pub fn load_spec(path: &Path) -> Result<NetworkSpecDoc, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<NetworkSpecDoc, LoadError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| LoadError::schema("", format!("invalid JSON: {e}")))?;
    let root = as_object(&root, "")?;
    check_keys(root, "", &["nodes", "agents", "edges", "sim", "certify"])?;

    let nodes = usize_field(root, "", "nodes")?;
    if nodes < 2 {
        return Err(LoadError::schema("/nodes", "a network needs at least 2 nodes"));
    }
    let agents = parse_agents(required(root, "", "agents")?, nodes)?;
    let (graph, bank) = parse_edges(required(root, "", "edges")?, nodes)?;
    let sim = match root.get("sim") {
        Some(v) => parse_sim(v, nodes)?,
        None => default_sim(nodes),
    };
    let certify = match root.get("certify") {
        Some(v) => parse_certify(v)?,
        None => CertifyOptions {
            use_computed_indices: false,
            beta_bar: 0.0,
        },
    };
    Ok(NetworkSpecDoc {
        nodes,
        agents,
        graph,
        bank,
        sim,
        certify,
    })
}

fn default_sim(nodes: usize) -> SimConfig {
    SimConfig {
        dt: DEFAULT_DT,
        t_final: DEFAULT_T_FINAL,
        y0: vec![0.0; nodes],
        noise: NoiseConfig::none(),
        record_stride: DEFAULT_RECORD_STRIDE,
    }
}

fn parse_agents(v: &Value, nodes: usize) -> Result<Vec<AgentSpec>, LoadError> {
    let list = as_array(v, "/agents")?;
    let mut seen = vec![false; nodes];
    let mut agents = Vec::with_capacity(list.len());
    for (k, item) in list.iter().enumerate() {
        let path = format!("/agents/{k}");
        let obj = as_object(item, &path)?;
        check_keys(obj, &path, &["id", "tf", "ifp_index"])?;
        let id = usize_field(obj, &path, "id")?;
        let id_path = format!("{path}/id");
        if id < 1 || id > nodes {
            return Err(LoadError::schema(id_path, format!("id {id} outside 1..={nodes}")));
        }
        if seen[id - 1] {
            return Err(LoadError::schema(id_path, format!("duplicate agent id {id}")));
        }
        seen[id - 1] = true;
        let tf = match obj.get("tf") {
            Some(t) => Some(parse_tf(t, &format!("{path}/tf"))?),
            None => None,
        };
        let ifp_index = match obj.get("ifp_index") {
            Some(x) => Some(as_f64(x, &format!("{path}/ifp_index"))?),
            None => None,
        };
        if tf.is_none() && ifp_index.is_none() {
            return Err(LoadError::schema(path, "agent needs `tf` or `ifp_index`"));
        }
        agents.push(AgentSpec { id, tf, ifp_index });
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(LoadError::schema(
            "/agents",
            format!("agent id {} is missing; ids 1..={nodes} must each appear once", missing + 1),
        ));
    }
    agents.sort_by_key(|a| a.id);
    Ok(agents)
}

fn parse_tf(v: &Value, path: &str) -> Result<RationalTransfer, LoadError> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["num", "den"])?;
    let num = f64_array(required(obj, path, "num")?, &format!("{path}/num"))?;
    let den = f64_array(required(obj, path, "den")?, &format!("{path}/den"))?;
    RationalTransfer::new(&num, &den).map_err(|e| LoadError::schema(path, e.to_string()))
}

fn parse_edges(v: &Value, nodes: usize) -> Result<(Graph, CouplingBank), LoadError> {
    let list = as_array(v, "/edges")?;
    if list.is_empty() {
        return Err(LoadError::schema("/edges", "at least one edge is required"));
    }
    let mut pairs = Vec::with_capacity(list.len());
    let mut couplings = Vec::with_capacity(list.len());
    for (k, item) in list.iter().enumerate() {
        let path = format!("/edges/{k}");
        let obj = as_object(item, &path)?;
        check_keys(obj, &path, &["i", "j", "coupling"])?;
        let mut ends = [0; 2];
        for (slot, key) in ends.iter_mut().zip(["i", "j"]) {
            *slot = usize_field(obj, &path, key)?;
            if *slot < 1 || *slot > nodes {
                return Err(LoadError::schema(
                    format!("{path}/{key}"),
                    format!("node {} outside 1..={nodes}", *slot),
                ));
            }
        }
        pairs.push((ends[0], ends[1]));
        couplings.push(parse_coupling(
            required(obj, &path, "coupling")?,
            &format!("{path}/coupling"),
        )?);
    }
    let graph = Graph::from_edge_list(nodes, &pairs).map_err(|e| {
        let path = match e {
            GraphError::SelfLoop { edge, .. }
            | GraphError::DuplicateEdge { edge, .. }
            | GraphError::NodeOutOfRange { edge, .. } => format!("/edges/{}", edge - 1),
            _ => "/edges".to_string(),
        };
        LoadError::schema(path, e.to_string())
    })?;
    if !graph.is_connected() {
        return Err(LoadError::schema("/edges", "the graph is not connected"));
    }
    Ok((graph, CouplingBank::new(couplings)))
}

fn parse_coupling(v: &Value, path: &str) -> Result<SectorCoupling, LoadError> {
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["kind", "params", "alpha_lo", "alpha_hi"])?;
    let kind_path = format!("{path}/kind");
    let kind_name = required(obj, path, "kind")?
        .as_str()
        .ok_or_else(|| LoadError::schema(&kind_path, "expected a string"))?;
    let params_path = format!("{path}/params");
    let params = as_object(required(obj, path, "params")?, &params_path)?;
    let (kind, range) = match kind_name {
        "linear_gain" | "saturated_sine" => {
            check_keys(params, &params_path, &["gain"])?;
            let gain = f64_field(params, &params_path, "gain")?;
            let kind = if kind_name == "linear_gain" {
                CouplingKind::LinearGain { gain }
            } else {
                CouplingKind::SaturatedSine { gain }
            };
            (kind, 10.0)
        }
        "custom_table" => {
            check_keys(params, &params_path, &["breakpoints"])?;
            let bp_path = format!("{params_path}/breakpoints");
            let raw = as_array(required(params, &params_path, "breakpoints")?, &bp_path)?;
            let mut breakpoints = Vec::with_capacity(raw.len());
            for (m, pt) in raw.iter().enumerate() {
                let pt_path = format!("{bp_path}/{m}");
                let xy = f64_array(pt, &pt_path)?;
                if xy.len() != 2 {
                    return Err(LoadError::schema(pt_path, "expected an [x, y] pair"));
                }
                breakpoints.push((xy[0], xy[1]));
            }
            let last = breakpoints.last().map_or(0.0, |b| b.0);
            (CouplingKind::CustomTable { breakpoints }, f64::max(10.0, 2.0 * last))
        }
        other => {
            return Err(LoadError::schema(
                kind_path,
                format!("unknown coupling kind `{other}` (expected linear_gain, saturated_sine or custom_table)"),
            ))
        }
    };
    let alpha_lo = f64_field(obj, path, "alpha_lo")?;
    let alpha_hi = f64_field(obj, path, "alpha_hi")?;
    let coupling =
        SectorCoupling::new(kind, alpha_lo, alpha_hi).map_err(|e| LoadError::schema(path, e.to_string()))?;
    let check = sector_verify(&coupling, SECTOR_SAMPLES, range);
    if !check.pass {
        return Err(LoadError::schema(
            path,
            format!(
                "declared sector [{alpha_lo}, {alpha_hi}] does not hold: observed ratio range [{}, {}]{}",
                check.alpha_lo_observed,
                check.alpha_hi_observed,
                if check.odd { "" } else { ", not odd" }
            ),
        ));
    }
    Ok(coupling)
}

fn parse_sim(v: &Value, nodes: usize) -> Result<SimConfig, LoadError> {
    let path = "/sim";
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["dt", "t_final", "y0", "noise", "record_stride"])?;
    let mut cfg = default_sim(nodes);
    if obj.contains_key("dt") {
        cfg.dt = f64_field(obj, path, "dt")?;
    }
    if obj.contains_key("t_final") {
        cfg.t_final = f64_field(obj, path, "t_final")?;
    }
    if let Some(y0) = obj.get("y0") {
        cfg.y0 = f64_array(y0, "/sim/y0")?;
        if cfg.y0.len() != nodes {
            return Err(LoadError::schema(
                "/sim/y0",
                format!("expected {nodes} initial outputs, got {}", cfg.y0.len()),
            ));
        }
    }
    if obj.contains_key("record_stride") {
        cfg.record_stride = usize_field(obj, path, "record_stride")?;
    }
    if let Some(noise) = obj.get("noise") {
        cfg.noise = parse_noise(noise)?;
    }
    cfg.validate()
        .map_err(|e| LoadError::schema(path, e.to_string()))?;
    Ok(cfg)
}

fn parse_noise(v: &Value) -> Result<NoiseConfig, LoadError> {
    let path = "/sim/noise";
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["kind", "amplitude", "seed"])?;
    let kind = match required(obj, path, "kind")?.as_str() {
        Some("none") => NoiseKind::None,
        Some("gaussian_zoh") => NoiseKind::GaussianZoh,
        _ => {
            return Err(LoadError::schema(
                "/sim/noise/kind",
                "expected \"none\" or \"gaussian_zoh\"",
            ))
        }
    };
    let amplitude = match obj.get("amplitude") {
        Some(_) => f64_field(obj, path, "amplitude")?,
        None => 0.0,
    };
    let seed = match obj.get("seed") {
        Some(s) => s
            .as_u64()
            .ok_or_else(|| LoadError::schema("/sim/noise/seed", "expected a non-negative integer"))?,
        None => 0,
    };
    Ok(NoiseConfig {
        kind,
        amplitude,
        seed,
    })
}

fn parse_certify(v: &Value) -> Result<CertifyOptions, LoadError> {
    let path = "/certify";
    let obj = as_object(v, path)?;
    check_keys(obj, path, &["use_computed_indices", "beta_bar"])?;
    let use_computed_indices = match obj.get("use_computed_indices") {
        Some(b) => b
            .as_bool()
            .ok_or_else(|| LoadError::schema("/certify/use_computed_indices", "expected a boolean"))?,
        None => false,
    };
    let beta_bar = match obj.get("beta_bar") {
        Some(_) => f64_field(obj, path, "beta_bar")?,
        None => 0.0,
    };
    Ok(CertifyOptions {
        use_computed_indices,
        beta_bar,
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, LoadError> {
    v.as_object()
        .ok_or_else(|| LoadError::schema(pointer(path), "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, LoadError> {
    v.as_array()
        .ok_or_else(|| LoadError::schema(path, "expected an array"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, LoadError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| LoadError::schema(path, "expected a finite number"))
}

fn required<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, LoadError> {
    obj.get(key)
        .ok_or_else(|| LoadError::schema(format!("{path}/{key}"), "missing required field"))
}

fn f64_field(obj: &Map<String, Value>, path: &str, key: &str) -> Result<f64, LoadError> {
    as_f64(required(obj, path, key)?, &format!("{path}/{key}"))
}

fn usize_field(obj: &Map<String, Value>, path: &str, key: &str) -> Result<usize, LoadError> {
    required(obj, path, key)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| LoadError::schema(format!("{path}/{key}"), "expected a non-negative integer"))
}

fn f64_array(v: &Value, path: &str) -> Result<Vec<f64>, LoadError> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(k, x)| as_f64(x, &format!("{path}/{k}")))
        .collect()
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), LoadError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(LoadError::schema(format!("{path}/{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn pointer(path: &str) -> &str {
    if path.is_empty() {
        "/"
    } else {
        path
    }
}
