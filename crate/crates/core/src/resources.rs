//! T-count and T-depth models: rotation synthesis, state-preparation
//! circuits, SQD / SQD-AA pipelines, iQPE with Trotterization and iQPE
//! with qubitization.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::amplification::{aa_circuit_tcount, AaPlan, TCost};
use crate::error::{Error, Result};
use crate::pauli::PauliHamiltonian;
use crate::state::StateVector;

/// Default confidence of the majority vote over iQPE shots.
pub const MAJORITY_CONFIDENCE: f64 = 0.99;

/// `⌈1.15·log2(N_rot/ε_tot) + 9.2⌉` T gates per rotation.
pub fn sk_tcount(n_rot: u64, eps_tot: f64) -> Result<u64> {
    if n_rot == 0 {
        return Err(Error::InvalidParameter("rotation count must be ≥ 1".into()));
    }
    if !(eps_tot > 0.0 && eps_tot.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε_tot = {eps_tot} must be positive")));
    }
    Ok(sk_real(n_rot as f64 / eps_tot).ceil().max(0.0) as u64)
}

fn sk_real(ratio: f64) -> f64 {
    1.15 * ratio.log2() + 9.2
}

/// T gates of a C^nNOT over `n` qubits (controls plus target): `4n − 6`.
pub fn cnnot_tcount(n: usize) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("C^nNOT needs n ≥ 2, got {n}")));
    }
    Ok(4 * n as u64 - 6)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationCounts {
    pub n_rot: u64,
    pub depth: u64,
}

/// Rotation count and rotation depth of an `L`-layer UCJ circuit.
pub fn ucj_counts(n: usize, layers: u64) -> Result<RotationCounts> {
    if n < 2 || !n.is_multiple_of(2) || layers == 0 {
        return Err(Error::InvalidParameter(format!("UCJ needs even n ≥ 2 and L ≥ 1 (n = {n}, L = {layers})")));
    }
    let n = n as u64;
    let h = n / 2;
    let n_rot = layers * (2 * (n + n * (h - 1)) + n + 3 * h * (n - 1));
    let depth = layers * (2 * (1 + h) + 1 + 3 * n);
    Ok(RotationCounts { n_rot, depth })
}

/// Rotations of a Trotterized adiabatic sweep; no two of them run in parallel.
pub fn asp_counts(h: &PauliHamiltonian, reps: u64, steps: u64) -> Result<RotationCounts> {
    if reps == 0 || steps == 0 {
        return Err(Error::InvalidParameter("reps and steps must be ≥ 1".into()));
    }
    let n_rot = h.reduced_term_count() as u64 * reps * steps;
    Ok(RotationCounts { n_rot, depth: n_rot })
}

/// State-preparation circuit model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PrepModel {
    Ucj { n: usize, layers: u64 },
    Asp { reps: u64, steps: u64 },
}

impl PrepModel {
    pub fn rotations(&self, h: &PauliHamiltonian) -> Result<RotationCounts> {
        match *self {
            PrepModel::Ucj { n, layers } => ucj_counts(n, layers),
            PrepModel::Asp { reps, steps } => asp_counts(h, reps, steps),
        }
    }

    /// T-count and T-depth after synthesizing every rotation within a
    /// total error `eps_tot`.
    pub fn cost(&self, h: &PauliHamiltonian, eps_tot: f64) -> Result<TCost> {
        let rot = self.rotations(h)?;
        if rot.n_rot == 0 {
            return Ok(TCost { count: 0, depth: 0 });
        }
        let per = sk_tcount(rot.n_rot, eps_tot)?;
        Ok(TCost { count: rot.n_rot * per, depth: rot.depth * per })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub pipeline: String,
    pub t_count_deepest: u128,
    pub t_depth_deepest: u128,
    pub t_count_total: u128,
    pub t_depth_total: u128,
    pub shots: u128,
    pub ancillas: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, Value>,
    pub notes: Vec<String>,
}

impl ResourceReport {
    fn new(pipeline: &str) -> Self {
        Self {
            pipeline: pipeline.into(),
            t_count_deepest: 0,
            t_depth_deepest: 0,
            t_count_total: 0,
            t_depth_total: 0,
            shots: 0,
            ancillas: BTreeMap::new(),
            parameters: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn param(&mut self, key: &str, v: Value) {
        self.parameters.insert(key.into(), v);
    }
}

/// Costs of every sampled circuit of an SQD or SQD-AA run.
pub fn pipeline_report(
    name: &str,
    plan: &AaPlan,
    n: usize,
    prep: TCost,
    zero_reflection: bool,
) -> Result<ResourceReport> {
    if plan.records.is_empty() {
        return Err(Error::InvalidParameter("run has no sampled circuits".into()));
    }
    let mut rep = ResourceReport::new(name);
    for r in &plan.records {
        let c = if r.s == 0 { prep } else { aa_circuit_tcount(n, r.set_size, r.s, prep, zero_reflection)? };
        rep.t_count_deepest = rep.t_count_deepest.max(u128::from(c.count));
        rep.t_depth_deepest = rep.t_depth_deepest.max(u128::from(c.depth));
        rep.t_count_total += u128::from(r.shots) * u128::from(c.count);
        rep.t_depth_total += u128::from(r.shots) * u128::from(c.depth);
        rep.shots += u128::from(r.shots);
    }
    rep.param("n", json!(n));
    rep.param("prep_t_count", json!(prep.count));
    rep.param("prep_t_depth", json!(prep.depth));
    rep.param("zero_reflection_costed", json!(zero_reflection));
    rep.param("circuits", json!(plan.records.len()));
    rep.param("q_tot", json!(plan.q_tot));
    Ok(rep)
}

fn ln_choose_table(n: u64) -> Vec<f64> {
    let mut lf = vec![0.0; n as usize + 1];
    for i in 1..=n as usize {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

/// Probability that a strict majority of `n` Bernoulli(p) trials succeed.
pub fn majority_success(n: u64, p: f64) -> f64 {
    let lf = ln_choose_table(n);
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    ((n / 2 + 1)..=n)
        .map(|k| (lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + k as f64 * lp + (n - k) as f64 * lq).exp())
        .sum()
}

/// Smallest odd shot count whose majority vote recovers the ground-state
/// phase with probability ≥ `confidence`, at per-shot success
/// `(8/π²)·overlap`.
pub fn majority_vote_shots(overlap: f64, confidence: f64) -> Result<u64> {
    if !(overlap > PI * PI / 16.0 && overlap <= 1.0) {
        return Err(Error::OverlapTooSmall(overlap));
    }
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {confidence} outside (0.5, 1)")));
    }
    let p = 8.0 / (PI * PI) * overlap;
    // success grows with odd n for p > 1/2: bracket by doubling, then bisect
    let ok = |h: u64| majority_success(2 * h + 1, p) >= confidence;
    let mut hi = 0u64;
    while !ok(hi) {
        hi = if hi == 0 { 1 } else { hi * 2 };
        if hi > 50_000_000 {
            return Err(Error::Infeasible("majority vote needs more than 10^8 shots".into()));
        }
    }
    let mut lo = 0u64;
    if ok(lo) {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(2 * hi + 1)
}

/// Fitted second-order Trotter error `ΔE_TS ≈ C_GS·Δτ^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterErrorModel {
    pub c_gs: f64,
    /// `None` when there is nothing to fit.
    pub exponent: Option<f64>,
    pub r_squared: Option<f64>,
    /// `e^{intercept}` of the log–log fit.
    pub prefactor: f64,
    pub dtaus: Vec<f64>,
    pub errors: Vec<f64>,
    /// Terms commute, so the product formula is exact.
    pub exact: bool,
    /// Exponent outside [1.8, 2.2] or R² < 0.9.
    pub flagged: bool,
}

impl TrotterErrorModel {
    /// Model with a supplied constant and no fit data.
    pub fn supplied(c_gs: f64) -> Self {
        Self {
            c_gs,
            exponent: None,
            r_squared: None,
            prefactor: c_gs,
            dtaus: Vec::new(),
            errors: Vec::new(),
            exact: false,
            flagged: false,
        }
    }
}

/// Dense second-order Trotter step
/// `Π_i e^{−i c_i P_i Δτ/2} · Π_{i reversed} e^{−i c_i P_i Δτ/2}`.
pub fn trotter_step_matrix(h: &PauliHamiltonian, dtau: f64) -> Result<DMatrix<Complex64>> {
    let dim = 1usize << h.n();
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for j in 0..dim {
        let mut s = StateVector::basis(h.n(), j as u64)?;
        // the reversed product is rightmost, so term 1 acts first
        for (c, p) in h.terms().iter().chain(h.terms().iter().rev()) {
            s.apply_pauli_exponential(*c, p, -dtau / 2.0)?;
        }
        for (i, a) in s.amplitudes().iter().enumerate() {
            m[(i, j)] = *a;
        }
    }
    Ok(m)
}

fn all_commute(h: &PauliHamiltonian) -> bool {
    let t = h.terms();
    t.iter().enumerate().all(|(i, (_, a))| t[i + 1..].iter().all(|(_, b)| a.commutes_with(b)))
}

/// Ground-state energy error of the second-order Trotter step at `dtau`,
/// from the eigenphase continuously connected to the exact ground state.
pub fn trotter_energy_error(h: &PauliHamiltonian, dtau: f64) -> Result<f64> {
    let (e_gs, gs) = dense_ground(h)?;
    trotter_error_from(h, dtau, e_gs, &gs)
}

fn dense_ground(h: &PauliHamiltonian) -> Result<(f64, DVector<Complex64>)> {
    let (e, v) = crate::subspace::lowest_eigenpair(&h.dense_matrix()?)?;
    Ok((e, DVector::from_vec(v)))
}

fn trotter_error_from(h: &PauliHamiltonian, dtau: f64, e_gs: f64, gs: &DVector<Complex64>) -> Result<f64> {
    let u = trotter_step_matrix(h, dtau)?;
    let mu = Complex64::from_polar(1.0, -e_gs * dtau);
    let dim = u.nrows();
    let shifted = &u - DMatrix::from_diagonal_element(dim, dim, mu);
    let lu = shifted.lu();
    let mut x = gs.clone();
    for _ in 0..4 {
        match lu.solve(&x) {
            Some(y) if y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && y.norm() > 0.0 => {
                x = &y / Complex64::new(y.norm(), 0.0);
            }
            // shift is an exact eigenvalue: x already spans its eigenspace
            _ => break,
        }
    }
    let lambda = (x.adjoint() * &u * &x)[(0, 0)];
    let e_eff = e_gs - (lambda * mu.conj()).arg() / dtau;
    Ok((e_eff - e_gs).abs())
}

/// Fit `ΔE_TS = C·Δτ^p` on a grid of step sizes (n ≤ 10).
pub fn fit_trotter_constant(h: &PauliHamiltonian, dtaus: &[f64]) -> Result<TrotterErrorModel> {
    if h.n() > 10 {
        return Err(Error::TooLarge { n: h.n(), max: 10 });
    }
    if dtaus.len() < 2 || dtaus.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("Δτ grid needs ≥ 2 positive values".into()));
    }
    let mut distinct = dtaus.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InvalidParameter("Δτ grid is degenerate".into()));
    }
    if all_commute(h) {
        return Ok(TrotterErrorModel {
            c_gs: 0.0,
            exponent: None,
            r_squared: None,
            prefactor: 0.0,
            dtaus: dtaus.to_vec(),
            errors: vec![0.0; dtaus.len()],
            exact: true,
            flagged: false,
        });
    }
    let (e_gs, gs) = dense_ground(h)?;
    let errors: Vec<f64> = dtaus.iter().map(|d| trotter_error_from(h, *d, e_gs, &gs)).collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> =
        dtaus.iter().zip(&errors).filter(|(_, e)| **e > 1e-14).map(|(d, e)| (d.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return Ok(TrotterErrorModel {
            c_gs: 0.0,
            exponent: None,
            r_squared: None,
            prefactor: 0.0,
            dtaus: dtaus.to_vec(),
            errors,
            exact: true,
            flagged: false,
        });
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    let c_gs = dtaus.iter().zip(&errors).map(|(d, e)| e / (d * d)).sum::<f64>() / dtaus.len() as f64;
    Ok(TrotterErrorModel {
        c_gs,
        exponent: Some(slope),
        r_squared: Some(r2),
        prefactor: intercept.exp(),
        dtaus: dtaus.to_vec(),
        errors,
        exact: false,
        flagged: !(1.8..=2.2).contains(&slope) || r2 < 0.9,
    })
}

/// Least squares `y = a + b x`; returns `(b, a, R²)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - a - b * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (b, a, r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

/// `f(x) = a·e^{bx}` through positive data, fitted in log space.
pub fn fit_exponential(points: &[(f64, f64)]) -> Result<ExponentialFit> {
    if points.len() < 2 || points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::InvalidParameter("exponential fit needs ≥ 2 positive points".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (*x, y.ln())).collect();
    let (b, la, r2) = linear_fit(&logs);
    Ok(ExponentialFit { a: la.exp(), b, r_squared: r2 })
}

/// One evaluation of the Trotter iQPE T-gate cost at an error split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrotterSplit {
    pub de_ts: f64,
    pub de_iqpe: f64,
    pub de_sk: f64,
    pub n_sk: f64,
    pub n_rep: f64,
    pub cost: f64,
}

/// `4L′·N_SK·N_rep` with
/// `N_SK = 1.15·log2(4L′·2π√C/(ΔE_SK·√ΔE_TS)) + 9.2` and
/// `N_rep = 2π√C/(ΔE_iQPE·√ΔE_TS)`.
pub fn trotter_cost(l_reduced: u64, c_gs: f64, de_ts: f64, de_iqpe: f64, de_sk: f64) -> TrotterSplit {
    let l = l_reduced as f64;
    let root_c = c_gs.sqrt();
    let n_sk = sk_real(4.0 * l * 2.0 * PI * root_c / (de_sk * de_ts.sqrt()));
    let n_rep = 2.0 * PI * root_c / (de_iqpe * de_ts.sqrt());
    TrotterSplit { de_ts, de_iqpe, de_sk, n_sk, n_rep, cost: 4.0 * l * n_sk * n_rep }
}

fn split_at(l: u64, c: f64, budget: f64, a: f64, b: f64) -> Option<TrotterSplit> {
    let z = 1.0 - a - b;
    if !(a > 0.0 && b > 0.0 && z > 0.0) {
        return None;
    }
    let s = trotter_cost(l, c, a * budget, b * budget, z * budget);
    s.cost.is_finite().then_some(s)
}

/// Name of the constrained search used by [`optimize_trotter_split`].
pub const TROTTER_OPTIMIZER: &str = "log-grid 40x40 multi-start + compass pattern search on budget fractions";

/// Minimize the Trotter cost over splits with `ΔE_TS + ΔE_iQPE + ΔE_SK = budget`.
pub fn optimize_trotter_split(l_reduced: u64, c_gs: f64, budget: f64) -> Result<TrotterSplit> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::Infeasible(format!("energy budget {budget} must be positive")));
    }
    if !(c_gs > 0.0 && c_gs.is_finite()) || l_reduced == 0 {
        return Err(Error::InvalidParameter("Trotter cost needs C_GS > 0 and L′ ≥ 1".into()));
    }
    let grid: Vec<f64> = (0..40).map(|i| 10f64.powf(-4.0 + 4.0 * (i as f64 + 0.5) / 40.0)).collect();
    let mut starts: Vec<(f64, f64, f64)> = Vec::new();
    for &a in &grid {
        for &b in &grid {
            if let Some(s) = split_at(l_reduced, c_gs, budget, a, b) {
                starts.push((s.cost, a, b));
            }
        }
    }
    starts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best: Option<TrotterSplit> = None;
    for &(_, a0, b0) in starts.iter().take(4) {
        // compass search in (ln a, ln b)
        let (mut la, mut lb) = (a0.ln(), b0.ln());
        let mut cur = split_at(l_reduced, c_gs, budget, a0, b0).expect("grid start is feasible");
        let mut step = 0.5;
        while step > 1e-12 {
            let mut moved = false;
            for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step), (step, -step), (-step, step)] {
                if let Some(s) = split_at(l_reduced, c_gs, budget, (la + da).exp(), (lb + db).exp()) {
                    if s.cost < cur.cost {
                        cur = s;
                        la += da;
                        lb += db;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                step /= 2.0;
            }
        }
        if best.is_none_or(|b| cur.cost < b.cost) {
            best = Some(cur);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no feasible error split".into()))?;
    assert!(best.de_ts + best.de_iqpe + best.de_sk <= budget * (1.0 + 1e-12));
    Ok(best)
}

/// iQPE with a second-order Trotter unitary.
pub fn iqpe_trotter_optimize(
    h: &PauliHamiltonian,
    model: &TrotterErrorModel,
    budget: f64,
    overlap: f64,
    prep: TCost,
    confidence: f64,
) -> Result<ResourceReport> {
    let shots = majority_vote_shots(overlap, confidence)?;
    let l_reduced = h.reduced_term_count() as u64;
    let mut rep = ResourceReport::new("iqpe-trotter");
    let (per_unit, bits, n_t) = if model.exact || model.c_gs == 0.0 {
        rep.notes.push("Trotter error constant is zero; cost not optimized".into());
        (0u128, 0u32, 0u128)
    } else {
        let best = optimize_trotter_split(l_reduced, model.c_gs, budget)?;
        let n_sk = best.n_sk.ceil() as u128;
        let n_rep = best.n_rep.ceil() as u128;
        let bits = (best.n_rep.log2().ceil().max(1.0)) as u32;
        rep.param("split", serde_json::to_value(best)?);
        rep.param("n_sk", json!(n_sk));
        rep.param("n_rep", json!(n_rep));
        (4 * u128::from(l_reduced) * n_sk, bits, 4 * u128::from(l_reduced) * n_sk * n_rep)
    };
    // deepest bit iteration runs 2^{m−1} of the 2^m controlled repetitions
    let deepest = n_t.div_ceil(2) + u128::from(prep.count);
    rep.t_count_deepest = deepest;
    rep.t_depth_deepest = n_t.div_ceil(2) + u128::from(prep.depth);
    rep.t_count_total = u128::from(shots) * (n_t + u128::from(bits) * u128::from(prep.count));
    rep.t_depth_total = u128::from(shots) * (n_t + u128::from(bits) * u128::from(prep.depth));
    rep.shots = u128::from(shots);
    rep.ancillas.insert("iqpe_control".into(), 1);
    rep.param("l_reduced", json!(l_reduced));
    rep.param("c_gs", json!(model.c_gs));
    rep.param("energy_budget", json!(budget));
    rep.param("overlap", json!(overlap));
    rep.param("confidence", json!(confidence));
    rep.param("bits", json!(bits));
    rep.param("t_per_trotter_unit", json!(per_unit));
    rep.param("optimizer", json!(TROTTER_OPTIMIZER));
    rep.param("prep_t_count", json!(prep.count));
    Ok(rep)
}

/// Itemized qubitization quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitizationCounts {
    pub lambda: f64,
    pub terms: u64,
    pub mu: u64,
    pub bits: u64,
    pub reps: f64,
    pub k: u64,
    pub j: u64,
    pub prep: u64,
    pub select: u64,
    pub reflection: u64,
    pub prep_depth: u64,
    pub n_t: u128,
    pub d_t: u128,
}

fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        64 - u64::from((x - 1).leading_zeros())
    }
}

/// `μ = ⌈log2(2λ/ΔE) + log2(1 + ΔE²/4λ²)⌉`.
pub fn qubitization_mu(lambda: f64, de: f64) -> u64 {
    ((2.0 * lambda / de).log2() + (1.0 + de * de / (4.0 * lambda * lambda)).log2()).ceil().max(0.0) as u64
}

pub fn select_tcount(l: u64) -> u64 {
    (4 * l).saturating_sub(4)
}

/// T gates of the |0⟩ reflection over `m` qubits: `4(m+1) − 6`.
pub fn reflection_tcount(m: u64) -> u64 {
    (4 * (m + 1)).saturating_sub(6)
}

pub fn qubitization_counts(lambda: f64, terms: u64, de: f64) -> Result<QubitizationCounts> {
    if !(de > 0.0 && de.is_finite()) {
        return Err(Error::Infeasible(format!("energy budget {de} must be positive")));
    }
    if terms == 0 || !(lambda > 0.0) {
        return Err(Error::InvalidParameter("qubitization needs λ > 0 and L ≥ 1".into()));
    }
    let mu = qubitization_mu(lambda, de);
    let bits = (2.0 * PI * lambda / de).log2().ceil().max(1.0) as u64;
    let reps = 4.0 * PI * lambda / de;
    let k = u64::from(terms.trailing_zeros());
    let j = terms >> k;
    let lj = ceil_log2(j);
    let (prep, select, reflection, prep_depth, sel_depth, refl_depth) = if terms == 1 {
        (0, 0, 0, 0, 0, 0)
    } else {
        (
            4 * (terms + mu) + 2 * k + 10 * lj,
            select_tcount(terms),
            reflection_tcount(ceil_log2(terms)),
            2 * (terms + mu) + 2 * k + 6 * lj,
            2 * terms - 2,
            5,
        )
    };
    let n_t = (reps * (2 * prep + select + reflection) as f64).ceil() as u128;
    let d_t = (reps * (2 * prep_depth + sel_depth + refl_depth) as f64).ceil() as u128;
    Ok(QubitizationCounts { lambda, terms, mu, bits, reps, k, j, prep, select, reflection, prep_depth, n_t, d_t })
}

/// iQPE with the qubitization walk operator.
pub fn iqpe_qubitization_counts(
    h: &PauliHamiltonian,
    budget: f64,
    overlap: f64,
    prep: TCost,
    confidence: f64,
) -> Result<ResourceReport> {
    let shots = majority_vote_shots(overlap, confidence)?;
    let c = qubitization_counts(h.one_norm(), h.len() as u64, budget)?;
    let mut rep = ResourceReport::new("iqpe-qubitization");
    if c.terms == 1 {
        rep.notes.push("single-term Hamiltonian: PREP, SELECT and reflection collapse to Cliffords".into());
    }
    rep.t_count_deepest = c.n_t.div_ceil(2) + u128::from(prep.count);
    rep.t_depth_deepest = c.d_t.div_ceil(2) + u128::from(prep.depth);
    rep.t_count_total = u128::from(shots) * (c.n_t + u128::from(c.bits) * u128::from(prep.count));
    rep.t_depth_total = u128::from(shots) * (c.d_t + u128::from(c.bits) * u128::from(prep.depth));
    rep.shots = u128::from(shots);
    let ll = ceil_log2(c.terms);
    rep.ancillas.insert("iqpe_control".into(), 1);
    rep.ancillas.insert("prep_ancilla".into(), 1 + 2 * c.mu + ll);
    rep.ancillas.insert("prep_index".into(), ll);
    rep.ancillas.insert("select_unary_iteration".into(), ll);
    rep.ancillas.insert("reflection".into(), ll.saturating_sub(1));
    rep.param("counts", serde_json::to_value(c)?);
    rep.param("energy_budget", json!(budget));
    rep.param("overlap", json!(overlap));
    rep.param("confidence", json!(confidence));
    rep.param("prep_t_count", json!(prep.count));
    Ok(rep)
}
