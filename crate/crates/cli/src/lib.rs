//! Batch front-end for network passivity certificates and consensus
//! simulation: network-spec loading, command dispatch and artifact output.

pub mod commands;
pub mod network_spec;
pub mod output;
pub mod report;

pub use commands::{
    cmd_certify, cmd_indices, cmd_report, cmd_simulate, CliError, RunArtifacts, SimOverrides,
    EXIT_CERT_NEGATIVE, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK,
};
pub use network_spec::{load_spec, parse_spec, LoadError, NetworkSpecDoc};
pub use report::Report;
