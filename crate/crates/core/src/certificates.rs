//! Passivity-compensation certificates built from per-agent IFP indices.
//!
//! The central object is the edge Gram matrix `D^T Xi D` (optionally plus the
//! coupling term `Lambda = diag(1 / alpha_hi_k)`). Its sign structure decides
//! whether agent-to-agent compensation can make the transformed open loop
//! passive, and its smallest eigenvalue yields the consensus gain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::CouplingBank;
use crate::graph::{Graph, IncidenceMatrix};
use crate::linalg::{self, LinalgError, PsdVerdict, SymMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("scaling entry {index} is not positive")]
    NonPositiveScaling { index: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("structural Gram differs from dense product at ({row}, {col}) by {diff:e}")]
    GramMismatch { row: usize, col: usize, diff: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-agent IFP indices and the summed bias term of the dissipation inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexVector {
    pub nu: Vec<f64>,
    #[serde(default)]
    pub beta_bar: f64,
}

impl IndexVector {
    pub fn new(nu: Vec<f64>) -> Self {
        Self { nu, beta_bar: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGram {
    pub matrix: SymMatrix,
    pub lambda_included: bool,
}

/// `D^T diag(nu) D (+ diag(lambda))` by plain dense multiplication.
pub fn dense_edge_gram(
    d: &IncidenceMatrix,
    nu: &[f64],
    lambda: Option<&[f64]>,
) -> Result<SymMatrix, LinalgError> {
    let (n, p) = (d.rows(), d.cols());
    SymMatrix::from_fn(p, |k, l| {
        let mut s: f64 = (0..n)
            .map(|i| f64::from(d.get(i, k)) * nu[i] * f64::from(d.get(i, l)))
            .sum();
        if k == l {
            if let Some(lam) = lambda {
                s += lam[k];
            }
        }
        s
    })
}

/// Assembles the edge Gram from its entrywise rule.
///
/// Diagonal: `nu_i + nu_j` for edge `k = (i, j)`. Off-diagonal: for edges `k`
/// and `l` sharing node `m`, `d_mk * d_ml * nu_m`, i.e. `+nu_m` when `m` has
/// the same role (positive or negative end) in both edges and `-nu_m`
/// otherwise; zero for disjoint edges. The result is checked against the
/// dense product.
pub fn edge_gram(
    d: &IncidenceMatrix,
    idx: &IndexVector,
    lambda: Option<&[f64]>,
) -> Result<EdgeGram, CertError> {
    let (n, p) = (d.rows(), d.cols());
    if idx.len() != n {
        return Err(CertError::DimensionMismatch {
            what: "indices",
            expected: n,
            got: idx.len(),
        });
    }
    if let Some(lam) = lambda {
        if lam.len() != p {
            return Err(CertError::DimensionMismatch {
                what: "edge weights",
                expected: p,
                got: lam.len(),
            });
        }
    }
    let nu = &idx.nu;
    let mut m = SymMatrix::zeros(p)?;
    for k in 0..p {
        let ek = d.edge(k);
        let mut diag = nu[ek.pos] + nu[ek.neg];
        if let Some(lam) = lambda {
            diag += lam[k];
        }
        m.set(k, k, diag);
        for l in 0..k {
            let el = d.edge(l);
            let shared = [ek.pos, ek.neg].into_iter().find(|&v| el.touches(v));
            if let Some(v) = shared {
                let sign = ek.sign_at(v) * el.sign_at(v);
                m.set(k, l, f64::from(sign) * nu[v]);
            }
        }
    }

    let dense = dense_edge_gram(d, nu, lambda)?;
    for k in 0..p {
        for l in 0..=k {
            let diff = (m.get(k, l) - dense.get(k, l)).abs();
            if diff > 1e-12 {
                return Err(CertError::GramMismatch { row: k, col: l, diff });
            }
        }
    }
    Ok(EdgeGram {
        matrix: m,
        lambda_included: lambda.is_some(),
    })
}

/// Verdict on the transformed open loop from the sign pattern of the indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Thm1Verdict {
    /// At most one strictly negative index; compensation among agents is not ruled out.
    PassivePossible,
    /// Two or more strictly negative indices; `D^T Xi D` cannot be PSD, so this
    /// index-based argument fails for the open loop. Says nothing about the
    /// closed loop.
    NonPassive { negative_count: usize },
}

pub fn thm1_verdict(idx: &IndexVector) -> Thm1Verdict {
    let negative_count = idx.nu.iter().filter(|&&v| v < 0.0).count();
    if negative_count >= 2 {
        Thm1Verdict::NonPassive { negative_count }
    } else {
        Thm1Verdict::PassivePossible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prop1Reason {
    /// No index is negative; there is nothing to compensate.
    NoNegativeIndex,
    /// Two or more negative indices.
    Thm1Violation,
    /// Some other index is zero, so it cannot contribute surplus.
    NonPositiveSurplus,
    /// `sum_i |nu_neg| / nu_i > 1`.
    InsufficientSurplus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Result {
    pub feasible: bool,
    /// 0-based agent with the negative index, when exactly one exists.
    pub negative_agent: Option<usize>,
    /// `sum_i |nu_neg| / nu_i` over the other agents.
    pub deficit_ratio: Option<f64>,
    /// Weights for the other agents in ascending agent order, normalized to sum 1.
    pub weights: Option<Vec<f64>>,
    pub reason: Option<Prop1Reason>,
}

/// Decides whether weights `s_i > 0` exist with
/// `nu_i >= (s_1 + ... + s_{n-1}) / s_i * |nu_neg|` for every non-negative agent.
///
/// Normalizing `sum s = 1` turns the inequalities into `s_i >= |nu_neg| / nu_i`,
/// so a solution exists iff those lower bounds sum to at most 1. The returned
/// weights are the lower bounds rescaled to sum 1.
pub fn prop1_weights(idx: &IndexVector) -> Prop1Result {
    let negatives: Vec<usize> = (0..idx.len()).filter(|&i| idx.nu[i] < 0.0).collect();
    let infeasible = |negative_agent, deficit_ratio, reason| Prop1Result {
        feasible: false,
        negative_agent,
        deficit_ratio,
        weights: None,
        reason: Some(reason),
    };
    let neg = match negatives.as_slice() {
        [] => return infeasible(None, None, Prop1Reason::NoNegativeIndex),
        [one] => *one,
        _ => return infeasible(None, None, Prop1Reason::Thm1Violation),
    };
    let deficit = idx.nu[neg].abs();
    let others: Vec<f64> = (0..idx.len())
        .filter(|&i| i != neg)
        .map(|i| idx.nu[i])
        .collect();
    if others.iter().any(|&v| v <= 0.0) {
        return infeasible(Some(neg), None, Prop1Reason::NonPositiveSurplus);
    }
    let bounds: Vec<f64> = others.iter().map(|v| deficit / v).collect();
    let ratio: f64 = bounds.iter().sum();
    if ratio > 1.0 {
        return infeasible(Some(neg), Some(ratio), Prop1Reason::InsufficientSurplus);
    }
    Prop1Result {
        feasible: true,
        negative_agent: Some(neg),
        deficit_ratio: Some(ratio),
        weights: Some(bounds.iter().map(|b| b / ratio).collect()),
        reason: None,
    }
}

/// Row slack `nu_i s_i - |nu_neg| sum(s)` of the weight inequalities, in the
/// order of [`Prop1Result::weights`].
pub fn prop1_slack(idx: &IndexVector, negative_agent: usize, weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let deficit = idx.nu[negative_agent].abs();
    (0..idx.len())
        .filter(|&i| i != negative_agent)
        .zip(weights)
        .map(|(i, s)| idx.nu[i] * s - deficit * total)
        .collect()
}

/// Star graph on `n` nodes centred at 0-based `center`; leaves point at the centre.
pub fn star_graph(n: usize, center: usize) -> Graph {
    let pairs: Vec<(usize, usize)> = (0..n)
        .filter(|&i| i != center)
        .map(|i| (i + 1, center + 1))
        .collect();
    Graph::from_edge_list(n, &pairs).expect("star graph is always valid for n >= 2")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub holds: bool,
    pub strict: bool,
    pub per_row_slack: Vec<f64>,
}

/// Scaled diagonal dominance `a_ii s_i >= sum_{j != i} |a_ij| s_j`.
///
/// Rows are compared within a roundoff band of `1e-12 * (|a_ii| s_i + sum |a_ij| s_j)`:
/// a row holds when its slack is above minus the band and is strict when above
/// the band.
pub fn lemma1_dominance(a: &SymMatrix, s: &[f64]) -> Result<Dominance, CertError> {
    let p = a.dim();
    if s.len() != p {
        return Err(CertError::DimensionMismatch {
            what: "scaling entries",
            expected: p,
            got: s.len(),
        });
    }
    if let Some(index) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(CertError::NonPositiveScaling { index });
    }
    let mut holds = true;
    let mut strict = true;
    let mut per_row_slack = Vec::with_capacity(p);
    for i in 0..p {
        let diag = a.get(i, i) * s[i];
        let off: f64 = (0..p)
            .filter(|&j| j != i)
            .map(|j| a.get(i, j).abs() * s[j])
            .sum();
        let slack = diag - off;
        let band = 1e-12 * (diag.abs() + off);
        holds &= slack >= -band;
        strict &= slack > band;
        per_row_slack.push(slack);
    }
    Ok(Dominance {
        holds,
        strict: holds && strict,
        per_row_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMargin {
    /// 1-based `(positive end, negative end)`.
    pub edge: (usize, usize),
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm2Report {
    pub per_edge_margin: Vec<EdgeMargin>,
    pub all_positive: bool,
    /// Smallest eigenvalue of `D^T Xi D + Lambda`.
    pub kappa: f64,
    /// `1 / (kappa * alpha_lo_min) + 1`, present when `kappa > 0`.
    pub rho: Option<f64>,
    /// `(1 / alpha_lo_min) * sqrt(2 |beta_bar| / kappa)`, present when `kappa > 0`.
    pub sigma: Option<f64>,
    pub alpha_lo_min: f64,
    pub beta_bar: f64,
    /// False only if positive margins did not produce a positive `kappa`.
    pub dominance_consistent: bool,
}

/// Edge-local consensus condition.
///
/// For every edge `(i, j)` the margin
/// `1/alpha_hi_ij + nu_i + nu_j - (r_i - 1)|nu_i| - (r_j - 1)|nu_j|` must be
/// positive. Independently of the margins, `kappa` is taken as the smallest
/// eigenvalue of `D^T Xi D + Lambda` with `Lambda_k = 1 / alpha_hi_k`.
pub fn thm2_certify(g: &Graph, idx: &IndexVector, bank: &CouplingBank) -> Result<Thm2Report, CertError> {
    if idx.len() != g.node_count() {
        return Err(CertError::DimensionMismatch {
            what: "indices",
            expected: g.node_count(),
            got: idx.len(),
        });
    }
    if bank.len() != g.edge_count() {
        return Err(CertError::DimensionMismatch {
            what: "couplings",
            expected: g.edge_count(),
            got: bank.len(),
        });
    }
    if !g.is_connected() {
        return Err(CertError::Disconnected);
    }
    // nu_i - (r_i - 1)|nu_i|; summed per edge as a commutative pair so that
    // margins do not depend on orientation even in the last bit
    let node_term: Vec<f64> = g
        .degrees()
        .iter()
        .zip(&idx.nu)
        .map(|(&r, &v)| v - (r as f64 - 1.0) * v.abs())
        .collect();
    let per_edge_margin: Vec<EdgeMargin> = g
        .edges()
        .iter()
        .zip(bank.couplings())
        .map(|(e, c)| {
            let (i, j) = (e.pos, e.neg);
            let margin = 1.0 / c.alpha_hi + (node_term[i] + node_term[j]);
            EdgeMargin {
                edge: (i + 1, j + 1),
                margin,
            }
        })
        .collect();
    let all_positive = per_edge_margin.iter().all(|m| m.margin > 0.0);

    let lambda: Vec<f64> = bank.couplings().iter().map(|c| 1.0 / c.alpha_hi).collect();
    let gram = edge_gram(&g.incidence(), idx, Some(&lambda))?;
    let eig = linalg::sym_eigvals(&gram.matrix, linalg::EIG_TOL)?;
    let kappa = eig.eigenvalues[0];
    let alpha_lo_min = bank.alpha_lo_min();
    let (rho, sigma) = if kappa > 0.0 {
        (
            Some(1.0 / (kappa * alpha_lo_min) + 1.0),
            Some((2.0 * idx.beta_bar.abs() / kappa).sqrt() / alpha_lo_min),
        )
    } else {
        (None, None)
    };
    Ok(Thm2Report {
        per_edge_margin,
        all_positive,
        kappa,
        rho,
        sigma,
        alpha_lo_min,
        beta_bar: idx.beta_bar,
        dominance_consistent: !all_positive || kappa > 0.0,
    })
}

/// All certificates for one set of indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub thm1: Thm1Verdict,
    /// PSD test of `D^T Xi D` (no coupling term).
    pub open_loop: PsdVerdict,
    pub prop1: Prop1Result,
    pub thm2: Thm2Report,
}

pub fn certify(g: &Graph, idx: &IndexVector, bank: &CouplingBank) -> Result<CertificateReport, CertError> {
    let thm2 = thm2_certify(g, idx, bank)?;
    let gram = edge_gram(&g.incidence(), idx, None)?;
    let open_loop = linalg::is_psd_default(&gram.matrix)?;
    Ok(CertificateReport {
        thm1: thm1_verdict(idx),
        open_loop,
        prop1: prop1_weights(idx),
        thm2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::SectorCoupling;

    fn example1_graph() -> Graph {
        Graph::from_edge_list(5, &[(1, 2), (2, 3), (3, 4), (3, 5), (4, 5)]).unwrap()
    }

    fn example1_bank() -> CouplingBank {
        CouplingBank::new(
            [0.65, 0.40, 0.34, 0.33, 0.44]
                .iter()
                .map(|&a| SectorCoupling::saturated_sine(a).unwrap())
                .collect(),
        )
    }

    const DECLARED_NU: [f64; 5] = [-0.71, -0.41, -0.55, -0.50, -0.61];

    #[test]
    fn two_agent_gram_is_sum() {
        let g = Graph::from_edge_list(2, &[(1, 2)]).unwrap();
        let eg = edge_gram(&g.incidence(), &IndexVector::new(vec![-1.0, 2.0]), None).unwrap();
        assert_eq!(eg.matrix.to_rows(), vec![vec![1.0]]);
        assert!(!eg.lambda_included);
    }

    #[test]
    fn three_agent_gram() {
        let g = Graph::from_edge_list(3, &[(1, 2), (2, 3)]).unwrap();
        let eg = edge_gram(&g.incidence(), &IndexVector::new(vec![1.0, -0.5, 1.0]), None).unwrap();
        assert_eq!(eg.matrix.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn example1_gram_matches_dense() {
        let g = example1_graph();
        let d = g.incidence();
        let idx = IndexVector::new(DECLARED_NU.to_vec());
        let eg = edge_gram(&d, &idx, None).unwrap();
        assert_eq!(eg.matrix, dense_edge_gram(&d, &idx.nu, None).unwrap());
        assert!(edge_gram(&d, &IndexVector::new(vec![1.0; 4]), None).is_err());
    }

    #[test]
    fn thm1_examples() {
        assert_eq!(thm1_verdict(&IndexVector::new(vec![-1.0, 2.0])), Thm1Verdict::PassivePossible);
        assert_eq!(
            thm1_verdict(&IndexVector::new(DECLARED_NU.to_vec())),
            Thm1Verdict::NonPassive { negative_count: 5 }
        );
        assert_eq!(thm1_verdict(&IndexVector::new(vec![1.0; 3])), Thm1Verdict::PassivePossible);
        // zero is not a shortage
        assert_eq!(
            thm1_verdict(&IndexVector::new(vec![0.0, -1.0, 2.0])),
            Thm1Verdict::PassivePossible
        );
    }

    #[test]
    fn prop1_examples() {
        let r = prop1_weights(&IndexVector::new(vec![3.0, 3.0, 3.0, -1.0]));
        assert!(r.feasible);
        assert_eq!(r.negative_agent, Some(3));
        let s = r.weights.unwrap();
        for w in &s {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let idx = IndexVector::new(vec![3.0, 3.0, 3.0, -1.0]);
        for slack in prop1_slack(&idx, 3, &s) {
            assert!(slack >= -1e-12);
        }

        let r = prop1_weights(&IndexVector::new(vec![1.0, 1.0, -1.0]));
        assert!(!r.feasible);
        assert_eq!(r.reason, Some(Prop1Reason::InsufficientSurplus));
        assert_eq!(r.deficit_ratio, Some(2.0));

        let r = prop1_weights(&IndexVector::new(vec![2.0, -0.5]));
        assert!(r.feasible);
        assert_eq!(r.weights, Some(vec![1.0]));

        assert_eq!(
            prop1_weights(&IndexVector::new(DECLARED_NU.to_vec())).reason,
            Some(Prop1Reason::Thm1Violation)
        );
        assert_eq!(
            prop1_weights(&IndexVector::new(vec![1.0, 2.0])).reason,
            Some(Prop1Reason::NoNegativeIndex)
        );
        assert_eq!(
            prop1_weights(&IndexVector::new(vec![0.0, 2.0, -0.1])).reason,
            Some(Prop1Reason::NonPositiveSurplus)
        );
    }

    #[test]
    fn lemma1_examples() {
        let id = SymMatrix::identity(3).unwrap();
        let d = lemma1_dominance(&id, &[1.0; 3]).unwrap();
        assert!(d.holds && d.strict);
        assert_eq!(d.per_row_slack, vec![1.0; 3]);

        let a = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let d = lemma1_dominance(&a, &[1.0, 1.0]).unwrap();
        assert!(d.holds && !d.strict);
        assert_eq!(d.per_row_slack, vec![0.0, 0.0]);

        let a = SymMatrix::from_rows(&[vec![1.0, -2.0], vec![-2.0, 1.0]]).unwrap();
        assert!(!lemma1_dominance(&a, &[1.0, 1.0]).unwrap().holds);

        assert_eq!(
            lemma1_dominance(&id, &[1.0, 0.0, 1.0]),
            Err(CertError::NonPositiveScaling { index: 1 })
        );
    }

    #[test]
    fn example1_thm2_with_declared_indices() {
        let rep = thm2_certify(&example1_graph(), &IndexVector::new(DECLARED_NU.to_vec()), &example1_bank())
            .unwrap();
        let expected = [0.00846, 0.03, 0.2912, 0.1603, 0.0527];
        for (m, e) in rep.per_edge_margin.iter().zip(expected) {
            assert!((m.margin - e).abs() < 1e-4, "{m:?} vs {e}");
        }
        assert!((rep.per_edge_margin[0].margin - 0.00846).abs() < 1e-5);
        assert_eq!(rep.per_edge_margin[2].edge, (3, 4));
        assert!(rep.all_positive);
        assert!(rep.kappa > 0.0);
        assert!(rep.dominance_consistent);
        let rho = rep.rho.unwrap();
        assert_eq!(rho, 1.0 / (rep.kappa * rep.alpha_lo_min) + 1.0);
        assert_eq!(rep.sigma, Some(0.0));
    }

    #[test]
    fn thm2_passive_agents_and_failure() {
        let g = example1_graph();
        let bank = example1_bank();
        let rep = thm2_certify(&g, &IndexVector::new(vec![0.0; 5]), &bank).unwrap();
        for (m, c) in rep.per_edge_margin.iter().zip(bank.couplings()) {
            assert_eq!(m.margin, 1.0 / c.alpha_hi);
        }
        let min_lambda = bank
            .couplings()
            .iter()
            .map(|c| 1.0 / c.alpha_hi)
            .fold(f64::INFINITY, f64::min);
        assert!((rep.kappa - min_lambda).abs() < 1e-14);

        let g2 = Graph::from_edge_list(2, &[(1, 2)]).unwrap();
        let bank2 = CouplingBank::new(vec![SectorCoupling::linear(2.0).unwrap()]);
        let rep = thm2_certify(&g2, &IndexVector::new(vec![-1.0, 0.2]), &bank2).unwrap();
        assert!((rep.per_edge_margin[0].margin + 0.3).abs() < 1e-15);
        assert!(!rep.all_positive);
        assert!(rep.rho.is_none());

        let disconnected = Graph::from_edge_list(4, &[(1, 2), (3, 4)]).unwrap();
        let bank = CouplingBank::new(vec![SectorCoupling::linear(1.0).unwrap(); 2]);
        assert_eq!(
            thm2_certify(&disconnected, &IndexVector::new(vec![1.0; 4]), &bank),
            Err(CertError::Disconnected)
        );
    }

    #[test]
    fn margins_equal_unit_scaled_row_slack() {
        let g = example1_graph();
        let bank = example1_bank();
        let idx = IndexVector::new(DECLARED_NU.to_vec());
        let rep = thm2_certify(&g, &idx, &bank).unwrap();
        let lambda: Vec<f64> = bank.couplings().iter().map(|c| 1.0 / c.alpha_hi).collect();
        let gram = edge_gram(&g.incidence(), &idx, Some(&lambda)).unwrap();
        let dom = lemma1_dominance(&gram.matrix, &[1.0; 5]).unwrap();
        for (m, s) in rep.per_edge_margin.iter().zip(&dom.per_row_slack) {
            assert!((m.margin - s).abs() < 1e-12);
        }
        assert!(dom.strict);
    }

    #[test]
    fn certify_example1() {
        let rep = certify(&example1_graph(), &IndexVector::new(DECLARED_NU.to_vec()), &example1_bank()).unwrap();
        assert_eq!(rep.thm1, Thm1Verdict::NonPassive { negative_count: 5 });
        assert!(!rep.open_loop.psd);
        assert!(!rep.prop1.feasible);
        assert!(rep.thm2.all_positive);
    }

    #[test]
    fn star_graph_layout() {
        let g = star_graph(4, 3);
        assert_eq!(g.pairs(), vec![(1, 4), (2, 4), (3, 4)]);
        // star Gram: nu_i + nu_c on the diagonal, nu_c off the diagonal
        let idx = IndexVector::new(vec![2.0, 3.0, 4.0, -1.0]);
        let m = edge_gram(&g.incidence(), &idx, None).unwrap().matrix;
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(2, 2), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
    }
}
