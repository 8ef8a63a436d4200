//! The five-agent benchmark network: heterogeneous integrating agents on a
//! five-node graph with saturated-sine couplings.

use crate::coupling::{CouplingBank, SectorCoupling};
use crate::graph::Graph;
use crate::lti::RationalTransfer;

pub struct FixtureNetwork {
    pub graph: Graph,
    pub tfs: Vec<RationalTransfer>,
    pub bank: CouplingBank,
    /// Published IFP indices, used as user-declared inputs.
    pub declared_nu: Vec<f64>,
    pub y0: Vec<f64>,
}

pub const EDGES: [(usize, usize); 5] = [(1, 2), (2, 3), (3, 4), (3, 5), (4, 5)];
pub const COUPLING_GAINS: [f64; 5] = [0.65, 0.40, 0.34, 0.33, 0.44];
pub const DECLARED_NU: [f64; 5] = [-0.71, -0.41, -0.55, -0.50, -0.61];
pub const Y0: [f64; 5] = [-0.3, -0.25, -0.625, 0.5963, -0.2725];

/// `(numerator, denominator)` coefficients, descending powers of `s`.
pub fn agent_coefficients() -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![
        // (s + 0.8) / (s (s + 0.57))
        (vec![1.0, 0.8], vec![1.0, 0.57, 0.0]),
        // (s + 1) / (s (s + 0.7))
        (vec![1.0, 1.0], vec![1.0, 0.7, 0.0]),
        // (s + 1.5) / (s (s + 1))
        (vec![1.0, 1.5], vec![1.0, 1.0, 0.0]),
        // (s + 0.45)(s + 0.65) / (s (s + 0.4)(s + 0.6))
        (vec![1.0, 1.1, 0.2925], vec![1.0, 1.0, 0.24, 0.0]),
        // (s + 0.5)(s + 0.9) / (s (s + 0.43)(s + 0.8))
        (vec![1.0, 1.4, 0.45], vec![1.0, 1.23, 0.344, 0.0]),
    ]
}

pub fn five_agent() -> FixtureNetwork {
    let graph = Graph::from_edge_list(5, &EDGES).expect("fixture graph");
    let tfs = agent_coefficients()
        .iter()
        .map(|(n, d)| RationalTransfer::new(n, d).expect("fixture transfer function"))
        .collect();
    let bank = CouplingBank::new(
        COUPLING_GAINS
            .iter()
            .map(|&a| SectorCoupling::saturated_sine(a).expect("fixture coupling"))
            .collect(),
    );
    FixtureNetwork {
        graph,
        tfs,
        bank,
        declared_nu: DECLARED_NU.to_vec(),
        y0: Y0.to_vec(),
    }
}
