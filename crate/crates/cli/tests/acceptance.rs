//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use passnet_cli::{cmd_certify, cmd_indices, load_spec, NetworkSpecDoc};
use passnet_core::certificates::{
    edge_gram, lemma1_dominance, prop1_slack, prop1_weights, IndexVector,
};
use passnet_core::graph::Graph;
use passnet_core::linalg::{is_psd_default, sym_eigvals, SymMatrix, EIG_TOL};
use passnet_core::sim::{
    assemble, consensus_metrics, initial_state, run, run_batch, NetworkModel, NoiseConfig,
    SimConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn fixture_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/example1.json")
}

fn fixture() -> NetworkSpecDoc {
    load_spec(&fixture_path()).expect("bundled fixture loads")
}

fn model(doc: &NetworkSpecDoc) -> NetworkModel {
    assemble(&doc.graph, &doc.transfer_functions().unwrap(), &doc.bank).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn connected_graph(rng: &mut ChaCha8Rng, n: usize) -> Graph {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = (1..n)
        .map(|k| (order[k], order[rng.random_range(0..k)]))
        .collect();
    let extra = rng.random_range(0..=n);
    for _ in 0..4 * extra {
        if pairs.len() >= n - 1 + extra {
            break;
        }
        let (i, j) = (rng.random_range(1..=n), rng.random_range(1..=n));
        if i != j && !pairs.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i)) {
            pairs.push((i, j));
        }
    }
    for p in pairs.iter_mut() {
        if rng.random_bool(0.5) {
            *p = (p.1, p.0);
        }
    }
    pairs.shuffle(rng);
    Graph::from_edge_list(n, &pairs).unwrap()
}

fn gram_psd(g: &Graph, nu: &[f64]) -> (bool, f64) {
    let m = edge_gram(&g.incidence(), &IndexVector::new(nu.to_vec()), None)
        .unwrap()
        .matrix;
    let v = is_psd_default(&m).unwrap();
    (v.psd, v.min_eig)
}

fn incidence_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..500 {
        let n = rng.random_range(2..=10);
        let g = connected_graph(&mut rng, n);
        let d = g.incidence();
        ensure(d.column_sums().iter().all(|&s| s == 0), || format!("graph {trial}: D^T 1 != 0"))?;
        ensure(d.transpose_mul(&vec![1.0; n]).iter().all(|&x| x == 0.0), || {
            format!("graph {trial}: D^T 1 != 0 in floating point")
        })?;
        let lap = SymMatrix::from_fn(n, |i, j| {
            (0..d.cols()).map(|k| f64::from(d.get(i, k) * d.get(j, k))).sum()
        })
        .unwrap();
        let eig = sym_eigvals(&lap, EIG_TOL).unwrap();
        let rank = eig.eigenvalues.iter().filter(|l| l.abs() > 1e-9).count();
        ensure(rank == n - 1, || format!("graph {trial}: rank {rank}, n = {n}"))?;
    }
    Ok("500 graphs, D^T 1 = 0 and rank n-1".into())
}

fn two_agent_compensation() -> Outcome {
    let g = Graph::from_edge_list(2, &[(1, 2)]).unwrap();
    for k in 0..100 {
        let nu = 10.0 * k as f64 / 99.0;
        let m = edge_gram(&g.incidence(), &IndexVector::new(vec![-nu, nu]), None)
            .unwrap()
            .matrix;
        ensure(m.dim() == 1 && m.get(0, 0) == 0.0, || format!("nu = {nu}: Gram {m:?}"))?;
        ensure(is_psd_default(&m).unwrap().psd, || format!("nu = {nu}: not PSD"))?;
        ensure(gram_psd(&g, &[nu, 0.5 * nu]).0, || format!("nu = {nu}: surplus pair not PSD"))?;
        let eps = 1e-6;
        let (psd, min_eig) = gram_psd(&g, &[-nu, nu - eps]);
        ensure(!psd, || format!("nu = {nu}: sum -1e-6 reported PSD (min eig {min_eig})"))?;
    }
    Ok("100-point sweep; zero Gram PSD, sum -1e-6 not PSD".into())
}

fn three_agent_boundary() -> Outcome {
    let g = Graph::from_edge_list(3, &[(1, 2), (2, 3)]).unwrap();
    let verdict = |hat: f64| gram_psd(&g, &[1.0, hat, 1.0]).0;
    ensure(verdict(0.0) && !verdict(-1.0), || "sweep ends do not bracket a flip".into())?;
    let (mut lo, mut hi) = (-1.0, 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if verdict(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let err = (hi + 0.5).abs();
    ensure(err <= 1e-9, || format!("flip at {hi}"))?;
    Ok(format!("flip at {hi:.12}, |err| = {err:.1e}"))
}

fn theorem1_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..1000 {
        let n = rng.random_range(2..=10);
        let g = connected_graph(&mut rng, n);
        let negatives = rng.random_range(2..=n);
        let mut nu: Vec<f64> = (0..n)
            .map(|k| {
                if k < negatives {
                    -rng.random_range(0.01..2.0)
                } else {
                    rng.random_range(0.0..5.0)
                }
            })
            .collect();
        nu.shuffle(&mut rng);
        let (psd, min_eig) = gram_psd(&g, &nu);
        ensure(!psd, || format!("instance {trial}: PSD with nu = {nu:?} (min eig {min_eig})"))?;
    }
    Ok("1000/1000 instances not PSD".into())
}

/// Maximizes the concave `min_i (nu_i s_i - |nu_neg|)` over the grid
/// `{s : s_i = h k_i, sum s = 1}` by exhaustive search at step 0.05 followed by
/// local exhaustive refinement around the incumbent down to step 1e-3.
/// Concavity makes the local refinement exact up to grid resolution.
fn simplex_grid_oracle(pos: &[f64], deficit: f64) -> bool {
    let m = pos.len();
    let score = |s: &[f64]| {
        s.iter()
            .zip(pos)
            .map(|(s, v)| v * s - deficit)
            .fold(f64::INFINITY, f64::min)
    };
    // all compositions of `total` units into m parts, each within [lo_k, hi_k]
    fn walk(
        k: usize,
        left: i64,
        lo: &[i64],
        hi: &[i64],
        cur: &mut Vec<i64>,
        visit: &mut dyn FnMut(&[i64]),
    ) {
        if k + 1 == lo.len() {
            if left >= lo[k] && left <= hi[k] {
                cur.push(left);
                visit(cur);
                cur.pop();
            }
            return;
        }
        for v in lo[k]..=hi[k].min(left) {
            cur.push(v);
            walk(k + 1, left - v, lo, hi, cur, visit);
            cur.pop();
        }
    }
    let mut best: Vec<f64> = vec![1.0 / m as f64; m];
    let mut best_score = score(&best);
    let mut step: f64 = 0.05;
    let mut radius: Option<i64> = None;
    loop {
        let units = (1.0 / step).round() as i64;
        let centre: Vec<i64> = best.iter().map(|s| (s / step).round() as i64).collect();
        let (lo, hi): (Vec<i64>, Vec<i64>) = match radius {
            None => (vec![0; m], vec![units; m]),
            Some(r) => (
                centre.iter().map(|c| (c - r).max(0)).collect(),
                centre.iter().map(|c| (c + r).min(units)).collect(),
            ),
        };
        let mut cur = Vec::with_capacity(m);
        walk(0, units, &lo, &hi, &mut cur, &mut |k| {
            let s: Vec<f64> = k.iter().map(|&k| k as f64 * step).collect();
            let sc = score(&s);
            if sc > best_score {
                best_score = sc;
                best = s;
            }
        });
        if step <= 1e-3 + 1e-15 {
            break;
        }
        let next = (step / 5.0).max(1e-3);
        radius = Some(((2.0 * step / next).ceil()) as i64);
        step = next;
    }
    best_score >= 0.0
}

fn proposition1_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut feasible = 0;
    let mut resampled = 0;
    let mut done = 0;
    while done < 500 {
        let n = rng.random_range(2..=6);
        let pos: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.05..2.0)).collect();
        let deficit = rng.random_range(0.005..0.6);
        let ratio: f64 = pos.iter().map(|v| deficit / v).sum();
        // a 1e-3 grid cannot resolve instances this close to the boundary
        if (ratio - 1.0).abs() < 0.02 {
            resampled += 1;
            continue;
        }
        let neg_at = rng.random_range(0..n);
        let mut nu = pos.clone();
        nu.insert(neg_at, -deficit);
        let idx = IndexVector::new(nu.clone());
        let r = prop1_weights(&idx);
        let oracle = simplex_grid_oracle(&pos, deficit);
        ensure(r.feasible == oracle, || {
            format!("nu = {nu:?}: closed form {}, grid {oracle}", r.feasible)
        })?;
        if let Some(w) = &r.weights {
            feasible += 1;
            let worst = prop1_slack(&idx, neg_at, w)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            ensure(worst >= -1e-12, || format!("nu = {nu:?}: slack {worst}"))?;
        }
        done += 1;
    }
    Ok(format!(
        "500/500 agree ({feasible} feasible); {resampled} near-boundary draws resampled"
    ))
}

fn lemma1_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut checked, mut strict) = (0, 0);
    while checked < 1000 {
        let p = rng.random_range(2..=8);
        let s: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..2.0)).collect();
        let mut rows = vec![vec![0.0_f64; p]; p];
        for i in 0..p {
            for j in 0..i {
                let v = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(-1.0..1.0) };
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        for i in 0..p {
            let off: f64 = (0..p).filter(|&j| j != i).map(|j| rows[i][j].abs() * s[j]).sum();
            let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.01..1.0) };
            rows[i][i] = off / s[i] + slack;
        }
        let a = SymMatrix::from_rows(&rows).unwrap();
        let dom = lemma1_dominance(&a, &s).unwrap();
        if !dom.holds {
            continue;
        }
        checked += 1;
        let v = is_psd_default(&a).unwrap();
        ensure(v.psd, || format!("dominant matrix not PSD: min eig {}", v.min_eig))?;
        if dom.strict {
            strict += 1;
            ensure(v.min_eig > 0.0, || format!("strictly dominant, min eig {}", v.min_eig))?;
        }
    }
    Ok(format!("1000/1000 PSD ({strict} strict, all with min eig > 0)"))
}

fn example1_certificate() -> Outcome {
    let start = Instant::now();
    let doc = fixture();
    let out = tempfile::tempdir().unwrap();
    let run = cmd_certify(&doc, false, out.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cert = run.report.certificates.unwrap();
    let thm2 = &cert.declared.ok_or("no declared certificate")?.report.thm2;
    let expected = [
        ((1, 2), 0.00846, 1e-5),
        ((2, 3), 0.03, 1e-4),
        ((3, 4), 0.2912, 1e-4),
        ((3, 5), 0.1603, 1e-4),
        ((4, 5), 0.0527, 1e-4),
    ];
    for (m, (edge, value, tol)) in thm2.per_edge_margin.iter().zip(expected) {
        ensure(m.edge == edge && m.margin > 0.0 && (m.margin - value).abs() <= tol, || {
            format!("edge {:?}: margin {} (want {value} +- {tol})", m.edge, m.margin)
        })?;
    }
    ensure(thm2.all_positive && thm2.kappa > 0.0, || format!("kappa {}", thm2.kappa))?;
    ensure(run.exit_code == 0, || format!("exit code {}", run.exit_code))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "margins {:?}, kappa {:.5}, rho {:.4}",
        thm2.per_edge_margin.iter().map(|m| format!("{:.5}", m.margin)).collect::<Vec<_>>(),
        thm2.kappa,
        thm2.rho.unwrap()
    ))
}

/// Infimum of `Re H(jw)` for `H = (s - z_1)...(s - z_m) / (s (s - p_1)...(s - p_k))`
/// with distinct negative real `p` and positive residue at the origin.
///
/// Partial fractions give `H = A/s + sum_k B_k / (s - p_k)` with
/// `B_k = prod (p_k - z) / (p_k prod_{l != k} (p_k - p_l))`. On `s = jw` the
/// term `A/s` is imaginary and `Re B_k/(jw - p_k) = -B_k p_k / (w^2 + p_k^2)`.
/// When every `B_k` is negative each term increases with `w`, so the infimum
/// is the `w -> 0` limit `sum_k B_k / (-p_k)`.
fn partial_fraction_infimum(zeros: &[f64], poles: &[f64]) -> f64 {
    poles
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let num: f64 = zeros.iter().map(|z| p - z).product();
            let den: f64 = p * poles
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, q)| p - q)
                .product::<f64>();
            let b = num / den;
            assert!(b < 0.0, "oracle assumes negative residues");
            b / -p
        })
        .sum()
}

fn ifp_estimator() -> Outcome {
    // (zeros, poles other than the origin, asserted target)
    let oracle_cases: [(&[f64], &[f64], f64); 5] = [
        // (s+0.8)/(s(s+0.57)): B = 0.23/-0.57, infimum -0.23/0.3249
        (&[-0.8], &[-0.57], -0.708),
        // (s+1)/(s(s+0.7)): B = 0.3/-0.7, infimum -0.3/0.49
        (&[-1.0], &[-0.7], -0.612),
        // (s+1.5)/(s(s+1)): B = -0.5, infimum -0.5
        (&[-1.5], &[-1.0], -0.500),
        // (s+0.45)(s+0.65)/(s(s+0.4)(s+0.6)): B = -0.15625, -0.0625
        (&[-0.45, -0.65], &[-0.4, -0.6], -0.495),
        // (s+0.5)(s+0.9)/(s(s+0.43)(s+0.8)): B = -0.2068, -0.1014
        (&[-0.5, -0.9], &[-0.43, -0.8], -0.608),
    ];
    let doc = fixture();
    let out = tempfile::tempdir().unwrap();
    let run = cmd_indices(&doc, out.path()).map_err(|e| e.to_string())?;
    let rows = run.report.indices.unwrap();
    let mut got = Vec::new();
    for (row, (zeros, poles, target)) in rows.iter().zip(oracle_cases) {
        let nu = row.computed.ok_or("missing estimate")?.nu;
        let analytic = partial_fraction_infimum(zeros, poles);
        ensure((analytic - target).abs() <= 0.005, || {
            format!("agent {}: oracle {analytic} vs target {target}", row.agent)
        })?;
        ensure((nu - target).abs() <= 0.005 && (nu - analytic).abs() <= 0.005, || {
            format!("agent {}: estimate {nu}, analytic {analytic}", row.agent)
        })?;
        got.push(format!("{nu:.4}"));
    }
    let flagged: Vec<usize> = rows.iter().filter(|r| r.discrepancy).map(|r| r.agent).collect();
    ensure(flagged == vec![2], || format!("discrepancy flags on {flagged:?}"))?;
    ensure(run.report.notes.iter().any(|n| n.starts_with("agent 2:")), || {
        "report has no agent 2 discrepancy note".into()
    })?;
    Ok(format!("estimates [{}], agent 2 flagged", got.join(", ")))
}

fn sim_config(doc: &NetworkSpecDoc, noise: NoiseConfig) -> SimConfig {
    SimConfig {
        dt: 1e-3,
        t_final: 100.0,
        y0: doc.sim.y0.clone(),
        noise,
        record_stride: 100,
    }
}

fn noise_free_consensus() -> Outcome {
    let start = Instant::now();
    let doc = fixture();
    let res = run(&model(&doc), &sim_config(&doc, NoiseConfig::none())).map_err(|e| e.to_string())?;
    let spread = |dy: &[f64]| dy.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let (d0, d1) = (spread(&res.first().dy), spread(&res.last().dy));
    let elapsed = start.elapsed();
    ensure(d1 <= 0.1 * d0, || format!("dispersion {d0} -> {d1}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("dispersion {d0:.4} -> {d1:.2e} in {:.1} s", elapsed.as_secs_f64()))
}

fn noisy_bound() -> Outcome {
    let start = Instant::now();
    let doc = fixture();
    let rho = passnet_core::certificates::thm2_certify(
        &doc.graph,
        &IndexVector::new(doc.agents.iter().map(|a| a.ifp_index.unwrap()).collect()),
        &doc.bank,
    )
    .unwrap()
    .rho
    .ok_or("no certified rho")?;
    let seeds: Vec<u64> = (1..=20).collect();
    let cfg = sim_config(&doc, NoiseConfig::gaussian(0.1, 0));
    let mut worst_rho_hat: f64 = 0.0;
    for (seed, res) in run_batch(&model(&doc), &cfg, &seeds) {
        let res = res.map_err(|e| format!("seed {seed}: {e}"))?;
        let m = consensus_metrics(&res, rho);
        ensure(m.sigma_hat.is_finite() && m.bound_ok, || {
            format!("seed {seed}: sigma_hat {}, bound_ok {}", m.sigma_hat, m.bound_ok)
        })?;
        worst_rho_hat = worst_rho_hat.max(m.rho_hat.unwrap_or(0.0));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "20/20 seeds plateau against rho {rho:.3}; max rho_hat {worst_rho_hat:.3}; {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn rk4_order() -> Outcome {
    let doc = fixture();
    let model = model(&doc);
    let x0 = initial_state(&model, &doc.sim.y0).unwrap();
    let w = vec![0.0; doc.nodes];
    let terminal = |dt: f64| {
        let mut x = x0.clone();
        for _ in 0..(10.0 / dt).round() as usize {
            x = model.step_rk4(&x, &w, dt).unwrap();
        }
        x
    };
    let dt = 0.02;
    let reference = terminal(dt / 8.0);
    let err = |x: Vec<f64>| {
        x.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(terminal(dt)), err(terminal(dt / 2.0)));
    let ratio = coarse / fine;
    ensure(ratio >= 12.0, || format!("error ratio {ratio} ({coarse:.3e} / {fine:.3e})"))?;
    Ok(format!("dt {dt}: errors {coarse:.3e} -> {fine:.3e}, ratio {ratio:.2}"))
}

fn determinism() -> Outcome {
    let fixture = fixture_path().display().to_string();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_passnet"))
            .args(["simulate", &fixture, "--seed", "7", "--t-final", "20"])
            .env("PASSNET_OUT", dir.path())
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || format!("simulate exited with {status}"))?;
        let files: Vec<Vec<u8>> = ["trajectory.csv", "metrics.csv"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    ensure(outputs[0] == outputs[1], || "CSV outputs differ between runs".into())?;
    Ok(format!(
        "trajectory.csv ({} bytes) and metrics.csv identical",
        outputs[0][0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("incidence algebra", incidence_algebra),
        ("two-agent compensation", two_agent_compensation),
        ("three-agent boundary", three_agent_boundary),
        ("two shortages never PSD", theorem1_soundness),
        ("single-shortage closed form vs grid oracle", proposition1_closed_form),
        ("scaled dominance soundness", lemma1_soundness),
        ("five-agent certificate", example1_certificate),
        ("IFP estimator", ifp_estimator),
        ("noise-free consensus", noise_free_consensus),
        ("noisy IO-consensus bound", noisy_bound),
        ("RK4 order", rk4_order),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail} [{secs:.2} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {why} [{secs:.2} s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
