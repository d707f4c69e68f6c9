//! SQD-AA and plain SQD drivers over simulated measurements.
//!
//! Measurements are drawn from exact outcome probabilities of the rotated
//! state. The rotation uses the true angle of the prepared state; only the
//! step counts come from the shot-noise estimates, as on hardware.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amplification::{ideal_steps, rotated_probabilities, AaPlan, RecordKind, ReductionSet};
use crate::error::{Error, Result};
use crate::pauli::{Bitstring, PauliHamiltonian};
use crate::state::{rng_from_seed, sample_probabilities, Discovery, StateVector, RNG_ALGORITHM};
use crate::subspace::{solve, Subspace, SubspaceSolution};

/// Remaining-mass floor, relative to the previous remaining mass, used
/// when a reconstructed probability would exhaust it.
pub const CLAMP_FRACTION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StoppingRule {
    /// Stop once consecutive subspace energies differ by at most `eps`.
    EnergyConvergence { eps: f64 },
    /// Stop once the subspace energy is within `eps` of `e_ref`.
    ReferenceEnergy { e_ref: f64, eps: f64 },
    /// Stop once the `m` most probable basis states of the prepared state
    /// are all in the subspace.
    CollectTopM { m: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DirectSampling {
    /// Shot-exact jumps between first sightings of new outcomes.
    Discovery,
    /// Fixed batches of `size` shots, each `growth` times the previous.
    Batched { size: u64, growth: f64 },
}

fn default_shots_it() -> u64 {
    100
}
fn default_fidelity() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    0.3
}
fn default_max_iterations() -> usize {
    500
}
fn default_max_probes() -> usize {
    12
}
fn default_max_shots() -> u64 {
    1_000_000_000_000_000
}
fn default_stopping() -> StoppingRule {
    StoppingRule::EnergyConvergence { eps: 1e-6 }
}
fn default_direct() -> DirectSampling {
    DirectSampling::Discovery
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverConfig {
    /// Shots per AA iteration (also per adaptation probe).
    #[serde(default = "default_shots_it")]
    pub shots_it: u64,
    /// Target fidelity F_T ∈ (0, 1].
    #[serde(default = "default_fidelity")]
    pub target_fidelity: f64,
    /// Flatness threshold τ.
    #[serde(default = "default_tau")]
    pub flatness_threshold: f64,
    #[serde(default = "default_stopping")]
    pub stopping: StoppingRule,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_direct")]
    pub direct: DirectSampling,
    #[serde(default = "default_max_probes")]
    pub max_probes: usize,
    /// Shot budget of the direct phase and of plain SQD.
    #[serde(default = "default_max_shots")]
    pub max_shots: u64,
    /// Replace sampled frequencies by exact probabilities (testing hook).
    #[serde(default)]
    pub exact_probabilities: bool,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            shots_it: default_shots_it(),
            target_fidelity: default_fidelity(),
            flatness_threshold: default_tau(),
            stopping: default_stopping(),
            max_iterations: default_max_iterations(),
            seed: 0,
            direct: default_direct(),
            max_probes: default_max_probes(),
            max_shots: default_max_shots(),
            exact_probabilities: false,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.shots_it == 0 {
            return bad("shots_it must be ≥ 1");
        }
        if !(self.target_fidelity > 0.0 && self.target_fidelity <= 1.0) {
            return bad("target_fidelity must lie in (0, 1]");
        }
        if !(self.flatness_threshold > 0.0) {
            return bad("flatness_threshold must be positive");
        }
        match self.stopping {
            StoppingRule::EnergyConvergence { eps } | StoppingRule::ReferenceEnergy { eps, .. } if !(eps > 0.0) => {
                return bad("energy threshold must be positive");
            }
            StoppingRule::CollectTopM { m } if m == 0 => return bad("collect-top-m needs m ≥ 1"),
            _ => {}
        }
        if let DirectSampling::Batched { size, growth } = self.direct {
            if size == 0 || !(growth >= 1.0) {
                return bad("batched sampling needs size ≥ 1 and growth ≥ 1");
            }
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be ≥ 1");
        }
        Ok(())
    }

    /// Batch policy matching the AA shot count: `min(10·shots_it, 10^4)`.
    pub fn default_batch(&self) -> DirectSampling {
        DirectSampling::Batched { size: (10 * self.shots_it).min(10_000), growth: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Aa,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub bitstring: Bitstring,
    /// Iteration in which the bitstring was first seen.
    pub k: usize,
    pub phase: Phase,
    /// Observed frequency in the state it was first seen in.
    pub p_hat: f64,
    /// Reconstructed probability in the prepared state; set once the
    /// bitstring joins the reduction set.
    pub p0_hat: Option<f64>,
    pub clamped: bool,
}

/// Every bitstring seen so far (the subspace, in discovery order) and the
/// subset being suppressed by amplitude amplification.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleLedger {
    pub entries: Vec<LedgerEntry>,
    /// Indices into `entries`, in the order they joined the reduction set.
    pub reduction: Vec<usize>,
    /// Estimated `1 − Σ p0_hat` over the reduction set.
    pub rest: f64,
    pub k: usize,
}

impl SampleLedger {
    fn new() -> Self {
        Self { rest: 1.0, ..Default::default() }
    }

    pub fn contains(&self, value: u64) -> bool {
        self.entries.iter().any(|e| e.bitstring.value() == value)
    }

    fn position(&self, value: u64) -> Option<usize> {
        self.entries.iter().position(|e| e.bitstring.value() == value)
    }

    pub fn bitstrings(&self) -> Vec<Bitstring> {
        self.entries.iter().map(|e| e.bitstring).collect()
    }

    pub fn reduction_members(&self) -> Vec<Bitstring> {
        self.reduction.iter().map(|i| self.entries[*i].bitstring).collect()
    }

    pub fn reduction_p0(&self) -> Vec<f64> {
        self.reduction.iter().filter_map(|i| self.entries[*i].p0_hat).collect()
    }

    /// Δ between the last two reconstructed probabilities.
    pub fn flatness(&self) -> Result<f64> {
        let p = self.reduction_p0();
        if p.len() < 2 {
            return Err(Error::LedgerTooShort { needed: 2, found: p.len() });
        }
        Ok(flatness(p[p.len() - 2], p[p.len() - 1]))
    }
}

/// `p_k^{(0)} = p_new · (1 − Σ_{i<k} p_i^{(0)}) / (1 − Σ_{i<k} p_i^{(s_k)})`,
/// with `rest = 1 − Σ_{i<k} p_i^{(0)}` and `residual = Σ_{i<k} p_i^{(s_k)}`.
pub fn reconstruct_p0(rest: f64, residual: f64, p_new: f64) -> Result<f64> {
    let den = 1.0 - residual;
    if !(den > 0.0) || !(rest > 0.0) {
        return Err(Error::DegenerateRecursion(den.min(rest)));
    }
    Ok(p_new * rest / den)
}

/// `2|a − b| / (a + b)`.
pub fn flatness(a: f64, b: f64) -> f64 {
    2.0 * (a - b).abs() / (a + b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    EnergyConverged,
    FlatnessThenEnergyConverged,
    TargetErrorReached,
    TargetSetCollected,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub s_k: u64,
    pub q_k: u64,
    pub new_bitstring: String,
    pub p0_hat: Option<f64>,
    pub energy: f64,
    pub flatness: Option<f64>,
    pub delta_e: Option<f64>,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub rng: String,
    pub config: DriverConfig,
    pub ledger: SampleLedger,
    pub plan: AaPlan,
    pub solutions: Vec<SubspaceSolution>,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub final_energy: f64,
    pub q_tot: u128,
    pub shots_tot: u128,
    /// Iteration at which the flatness criterion switched to direct sampling.
    pub flatness_exit: Option<usize>,
    pub flags: Vec<String>,
}

impl RunRecord {
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "s_k", "Q_k", "new_bitstring", "p0_hat", "E_k", "Delta_k", "DeltaE_k", "phase"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.trace {
            wr.write_record([
                r.k.to_string(),
                r.s_k.to_string(),
                r.q_k.to_string(),
                r.new_bitstring.clone(),
                opt(r.p0_hat),
                r.energy.to_string(),
                opt(r.flatness),
                opt(r.delta_e),
                match r.phase {
                    Phase::Aa => "aa".into(),
                    Phase::Direct => "direct".into(),
                },
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Observed outcomes of one circuit: `(value, frequency)` sorted by
/// decreasing frequency, ties by value.
struct Observation {
    ranked: Vec<(u64, f64)>,
}

impl Observation {
    fn frequency(&self, v: u64) -> f64 {
        self.ranked.iter().find(|(x, _)| *x == v).map(|(_, f)| *f).unwrap_or(0.0)
    }
}

struct Circuit {
    s: u64,
    /// Reduction-set members the circuit suppresses.
    set: Vec<u64>,
    probs: Vec<f64>,
}

struct Run<'a> {
    h: &'a PauliHamiltonian,
    cfg: &'a DriverConfig,
    n: usize,
    probs0: Vec<f64>,
    rng: ChaCha8Rng,
    ledger: SampleLedger,
    plan: AaPlan,
    solutions: Vec<SubspaceSolution>,
    trace: Vec<TraceRow>,
    flags: Vec<String>,
    target: Option<HashSet<u64>>,
}

impl<'a> Run<'a> {
    fn new(h: &'a PauliHamiltonian, state0: &StateVector, cfg: &'a DriverConfig) -> Result<Self> {
        cfg.validate()?;
        if h.n() != state0.n() {
            return Err(Error::DimensionMismatch { expected: h.n(), found: state0.n() });
        }
        let probs0 = state0.probabilities();
        let target = match cfg.stopping {
            StoppingRule::CollectTopM { m } => Some(top_m(&probs0, m)?),
            _ => None,
        };
        Ok(Self {
            h,
            cfg,
            n: state0.n(),
            probs0,
            rng: rng_from_seed(cfg.seed),
            ledger: SampleLedger::new(),
            plan: AaPlan::default(),
            solutions: Vec::new(),
            trace: Vec::new(),
            flags: Vec::new(),
            target,
        })
    }

    fn circuit(&self, s: u64) -> Result<Circuit> {
        let set: Vec<u64> = self.ledger.reduction_members().iter().map(|b| b.value()).collect();
        if set.is_empty() || s == 0 {
            return Ok(Circuit { s, set, probs: self.probs0.clone() });
        }
        let mut mask = vec![false; self.probs0.len()];
        for v in &set {
            mask[*v as usize] = true;
        }
        let (mut r, mut rest) = (0.0, 0.0);
        for (p, m) in self.probs0.iter().zip(&mask) {
            if *m {
                r += p;
            } else {
                rest += p;
            }
        }
        let members = set.iter().map(|v| Bitstring::new(*v, self.n)).collect::<Result<Vec<_>>>()?;
        let exact = ReductionSet::with_complement(members, r / (r + rest), rest / (r + rest))?;
        Ok(Circuit { s, probs: rotated_probabilities(&self.probs0, &mask, &exact, s), set })
    }

    fn observe(&mut self, c: &Circuit, kind: RecordKind) -> Result<Observation> {
        self.plan.push(kind, self.ledger.k, c.s, self.cfg.shots_it, c.set.len());
        if self.cfg.exact_probabilities {
            let total: f64 = c.probs.iter().sum();
            let mut ranked: Vec<(u64, f64)> =
                c.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, p)| (i as u64, p / total)).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            return Ok(Observation { ranked });
        }
        let sample = sample_probabilities(&c.probs, self.n, self.cfg.shots_it, &mut self.rng)?;
        let shots = sample.shots as f64;
        Ok(Observation { ranked: sample.ranked().into_iter().map(|(v, c)| (v, c as f64 / shots)).collect() })
    }

    fn dominant_is_new(&self, obs: &Observation, c: &Circuit) -> bool {
        obs.ranked.first().is_some_and(|(v, _)| !c.set.contains(v))
    }

    /// Add bitstrings to the subspace and re-solve; returns ΔE when there
    /// was a previous solution.
    fn extend(&mut self, values: &[(u64, f64)], phase: Phase, s: u64) -> Result<Option<f64>> {
        let mut grew = false;
        for (v, f) in values {
            if self.ledger.contains(*v) {
                continue;
            }
            self.ledger.entries.push(LedgerEntry {
                bitstring: Bitstring::new(*v, self.n)?,
                k: self.ledger.k,
                phase,
                p_hat: *f,
                p0_hat: None,
                clamped: false,
            });
            grew = true;
        }
        if !grew {
            return Ok(None);
        }
        let sol = solve(self.h, Subspace::new(self.ledger.bitstrings())?)?;
        let de = self.solutions.last().map(|p| (p.energy - sol.energy).abs());
        for e in self.ledger.entries.iter().rev().take_while(|e| !self.trace.iter().any(|t| t.new_bitstring == e.bitstring.to_string())).collect::<Vec<_>>().into_iter().rev() {
            self.trace.push(TraceRow {
                k: self.ledger.k,
                s_k: s,
                q_k: 2 * s + 1,
                new_bitstring: e.bitstring.to_string(),
                p0_hat: None,
                energy: sol.energy,
                flatness: None,
                delta_e: None,
                phase,
            });
        }
        if let Some(last) = self.trace.last_mut() {
            last.delta_e = de;
        }
        self.solutions.push(sol);
        Ok(de.or(Some(f64::INFINITY)))
    }

    fn stop(&self, delta_e: Option<f64>) -> Option<Termination> {
        let energy = self.solutions.last()?.energy;
        match self.cfg.stopping {
            StoppingRule::CollectTopM { .. } => {
                let t = self.target.as_ref()?;
                t.iter().all(|v| self.ledger.contains(*v)).then_some(Termination::TargetSetCollected)
            }
            StoppingRule::ReferenceEnergy { e_ref, eps } => {
                ((energy - e_ref).abs() <= eps).then_some(Termination::TargetErrorReached)
            }
            StoppingRule::EnergyConvergence { eps } => {
                delta_e.is_some_and(|d| d <= eps).then_some(Termination::EnergyConverged)
            }
        }
    }

    /// Ledger whatever a rejected circuit still revealed.
    fn absorb(&mut self, obs: &Observation, s: u64) -> Result<Option<Termination>> {
        if self.cfg.exact_probabilities {
            return Ok(None);
        }
        let de = self.extend(&obs.ranked, Phase::Aa, s)?;
        if let Some(t) = self.stop(de.filter(|d| d.is_finite())) {
            return Ok(Some(t));
        }
        Ok((self.unseen_mass() <= 0.0).then_some(Termination::EnergyConverged))
    }

    fn unseen_mass(&self) -> f64 {
        self.probs0.iter().enumerate().filter(|(i, _)| !self.ledger.contains(*i as u64)).map(|(_, p)| p).sum()
    }

    /// Halving/doubling search for a step count whose dominant outcome is
    /// outside the reduction set.
    fn adapt(&mut self, s: u64, residual: f64) -> Result<Probe> {
        let mut down = s >= 2;
        let mut tried_up = !down;
        let mut cur = s;
        let mut prev_res = residual;
        let mut last = s;
        for _ in 0..self.cfg.max_probes {
            let next = if down { (cur / 2).max(1) } else { (cur * 2).max(1) };
            let c = self.circuit(next)?;
            let obs = self.observe(&c, RecordKind::Probe)?;
            last = next;
            if self.dominant_is_new(&obs, &c) {
                return Ok(Probe::Found(c, obs));
            }
            if let Some(t) = self.absorb(&obs, next)? {
                return Ok(Probe::Stopped(t));
            }
            let res: f64 = c.set.iter().map(|v| obs.frequency(*v)).sum();
            if down && (res > prev_res || next == 1) && !tried_up {
                // halving made things worse: search upward from the start
                down = false;
                tried_up = true;
                cur = s;
                prev_res = residual;
            } else {
                cur = next;
                prev_res = res;
            }
        }
        Err(Error::AdaptationExhausted { probes: self.cfg.max_probes, last_steps: last })
    }

    fn finish(self, algorithm: &str, termination: Termination, flatness_exit: Option<usize>) -> RunRecord {
        let final_energy = self.solutions.last().map(|s| s.energy).unwrap_or(f64::NAN);
        RunRecord {
            algorithm: algorithm.into(),
            rng: RNG_ALGORITHM.into(),
            config: self.cfg.clone(),
            q_tot: self.plan.q_tot,
            shots_tot: self.plan.shots_tot,
            ledger: self.ledger,
            plan: self.plan,
            solutions: self.solutions,
            trace: self.trace,
            termination,
            final_energy,
            flatness_exit,
            flags: self.flags,
        }
    }

    /// Sample `c` until a stopping rule holds; `after_flatness` selects the
    /// energy-converged label.
    fn direct_phase(&mut self, c: &Circuit, after_flatness: bool) -> Result<Termination> {
        let converged = if after_flatness { Termination::FlatnessThenEnergyConverged } else { Termination::EnergyConverged };
        let relabel = |t: Termination| if t == Termination::EnergyConverged { converged } else { t };
        let mut spent: u128 = 0;
        match self.cfg.direct {
            DirectSampling::Discovery => {
                let seen: Vec<u64> = self.ledger.entries.iter().map(|e| e.bitstring.value()).collect();
                let mut disc = Discovery::with_seen(&c.probs, seen);
                loop {
                    let Some((wait, v)) = disc.next(&mut self.rng) else {
                        return Ok(converged);
                    };
                    spent += u128::from(wait);
                    if spent > u128::from(self.cfg.max_shots) {
                        return Err(Error::ShotBudgetExceeded(self.cfg.max_shots));
                    }
                    self.plan.push(RecordKind::Direct, self.ledger.k, c.s, wait, c.set.len());
                    let de = self.extend(&[(v, 0.0)], Phase::Direct, c.s)?;
                    if let Some(t) = self.stop(de.filter(|d| d.is_finite())) {
                        return Ok(relabel(t));
                    }
                }
            }
            DirectSampling::Batched { size, growth } => {
                let mut batch = size as f64;
                loop {
                    if self.unseen_mass_under(&c.probs) <= 0.0 {
                        return Ok(converged);
                    }
                    let shots = batch.round() as u64;
                    spent += u128::from(shots);
                    if spent > u128::from(self.cfg.max_shots) {
                        return Err(Error::ShotBudgetExceeded(self.cfg.max_shots));
                    }
                    let sample = sample_probabilities(&c.probs, self.n, shots, &mut self.rng)?;
                    self.plan.push(RecordKind::Direct, self.ledger.k, c.s, shots, c.set.len());
                    let new: Vec<(u64, f64)> =
                        sample.ranked().into_iter().map(|(v, k)| (v, k as f64 / shots as f64)).collect();
                    let de = self.extend(&new, Phase::Direct, c.s)?;
                    if let Some(t) = self.stop(de.filter(|d| d.is_finite())) {
                        return Ok(relabel(t));
                    }
                    batch *= growth;
                }
            }
        }
    }

    fn unseen_mass_under(&self, probs: &[f64]) -> f64 {
        probs.iter().enumerate().filter(|(i, _)| !self.ledger.contains(*i as u64)).map(|(_, p)| p).sum()
    }
}

enum Probe {
    Found(Circuit, Observation),
    Stopped(Termination),
}

/// Indices of the `m` most probable outcomes (ties by lower index).
pub fn top_m(probs: &[f64], m: usize) -> Result<HashSet<u64>> {
    let support = probs.iter().filter(|p| **p > 0.0).count();
    if m > support {
        return Err(Error::InvalidParameter(format!("cannot collect {m} states from a support of {support}")));
    }
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|a, b| probs[*b].total_cmp(&probs[*a]).then(a.cmp(b)));
    Ok(idx[..m].iter().map(|i| *i as u64).collect())
}

/// SQD with amplitude amplification of the not-yet-measured bitstrings.
pub fn run_sqdaa(h: &PauliHamiltonian, state0: &StateVector, cfg: &DriverConfig) -> Result<RunRecord> {
    let mut run = Run::new(h, state0, cfg)?;
    let mut s: u64 = 0;
    loop {
        if run.ledger.k >= cfg.max_iterations {
            return Ok(run.finish("sqdaa", Termination::MaxIterations, None));
        }
        let mut c = run.circuit(s)?;
        let mut obs = run.observe(&c, RecordKind::Iteration)?;
        if !run.dominant_is_new(&obs, &c) {
            let residual: f64 = c.set.iter().map(|v| obs.frequency(*v)).sum();
            if let Some(t) = run.absorb(&obs, s)? {
                return Ok(run.finish("sqdaa", t, None));
            }
            match run.adapt(s, residual)? {
                Probe::Found(c2, o2) => {
                    c = c2;
                    obs = o2;
                    s = c.s;
                }
                Probe::Stopped(t) => return Ok(run.finish("sqdaa", t, None)),
            }
        }
        let (z, p_new) = obs.ranked[0];
        let residual: f64 = c.set.iter().map(|v| obs.frequency(*v)).sum();

        // subspace: everything seen; the dominant outcome first
        let others: Vec<(u64, f64)> = if cfg.exact_probabilities { Vec::new() } else { obs.ranked[1..].to_vec() };
        let mut added = vec![(z, p_new)];
        added.extend(others);
        let de = run.extend(&added, Phase::Aa, s)?;

        // reduction set and probability recursion
        let rest_prev = run.ledger.rest;
        let mut p0 = reconstruct_p0(rest_prev, residual, p_new)?;
        let mut clamped = false;
        if p0 >= rest_prev {
            p0 = rest_prev * (1.0 - CLAMP_FRACTION);
            clamped = true;
            run.flags.push(format!("iteration {}: reconstructed probability clamped", run.ledger.k));
        }
        let pos = run.ledger.position(z).expect("dominant outcome was just ledgered");
        run.ledger.entries[pos].p0_hat = Some(p0);
        run.ledger.entries[pos].clamped = clamped;
        run.ledger.reduction.push(pos);
        run.ledger.rest = rest_prev - p0;
        if clamped {
            run.ledger.rest = rest_prev * CLAMP_FRACTION;
        }
        let delta = run.ledger.flatness().ok();
        let name = run.ledger.entries[pos].bitstring.to_string();
        if let Some(row) = run.trace.iter_mut().rev().find(|r| r.new_bitstring == name) {
            row.p0_hat = Some(p0);
            row.flatness = delta;
        } else {
            let energy = run.solutions.last().map(|x| x.energy).unwrap_or(f64::NAN);
            run.trace.push(TraceRow {
                k: run.ledger.k,
                s_k: s,
                q_k: 2 * s + 1,
                new_bitstring: name,
                p0_hat: Some(p0),
                energy,
                flatness: delta,
                delta_e: None,
                phase: Phase::Aa,
            });
        }

        if let Some(t) = run.stop(de.filter(|d| d.is_finite())) {
            return Ok(run.finish("sqdaa", t, None));
        }
        if run.unseen_mass() <= 0.0 {
            return Ok(run.finish("sqdaa", Termination::EnergyConverged, None));
        }

        let theta = run.ledger.rest.sqrt().min(1.0).asin();
        let s_next = ideal_steps(theta, cfg.target_fidelity)?;
        let k = run.ledger.k;
        run.ledger.k += 1;
        if delta.is_some_and(|d| d <= cfg.flatness_threshold) && s_next != s {
            // keep measuring the current state instead of rotating further
            let t = run.direct_phase(&c, true)?;
            return Ok(run.finish("sqdaa", t, Some(k)));
        }
        s = s_next;
    }
}

/// Plain SQD: sample the prepared state until a stopping rule holds.
pub fn run_sqd(h: &PauliHamiltonian, state0: &StateVector, cfg: &DriverConfig) -> Result<RunRecord> {
    let mut run = Run::new(h, state0, cfg)?;
    let c = Circuit { s: 0, set: Vec::new(), probs: run.probs0.clone() };
    let t = run.direct_phase(&c, false)?;
    Ok(run.finish("sqd", t, None))
}

/// Reconstructed p0 values in reduction order, keyed by bitstring value.
pub fn reconstructed(record: &RunRecord) -> HashMap<u64, f64> {
    record
        .ledger
        .reduction
        .iter()
        .filter_map(|i| {
            let e = &record.ledger.entries[*i];
            e.p0_hat.map(|p| (e.bitstring.value(), p))
        })
        .collect()
}

/// Draw a seed for restart `index` of an experiment.
pub fn restart_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

#[allow(dead_code)]
fn _assert_rng<R: Rng>(_: &R) {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{analytic_steps, Distribution, DistributionSpec};
    use crate::pauli::parse_hamiltonian;
    use crate::state::{model_probabilities, model_state};

    fn diag_h(n: usize) -> PauliHamiltonian {
        // energies increase with index
        let d: Vec<f64> = (0..1usize << n).map(|l| -1.0 / (l as f64 + 1.0)).collect();
        PauliHamiltonian::from_diagonal(&d).unwrap()
    }

    #[test]
    fn recursion_examples() {
        assert_eq!(reconstruct_p0(1.0, 0.0, 0.42).unwrap(), 0.42);
        assert!((reconstruct_p0(0.5, 0.0, 0.6).unwrap() - 0.3).abs() < 1e-15);
        assert!(reconstruct_p0(0.5, 1.0, 0.6).is_err());
    }

    #[test]
    fn flatness_examples() {
        assert_eq!(flatness(0.3, 0.3), 0.0);
        assert!((flatness(0.4, 0.2) - 2.0 / 3.0).abs() < 1e-15);
        let p = model_probabilities(&Distribution::Exponential { alpha: 1.0 }, 10).unwrap();
        let want = 2.0 * (1.0 - (-1f64).exp()) / (1.0 + (-1f64).exp());
        for k in 1..20 {
            assert!((flatness(p[k - 1], p[k]) - want).abs() < 1e-12);
        }
        assert!((want - 0.9242).abs() < 1e-4);
        assert!(SampleLedger::new().flatness().is_err());
    }

    #[test]
    fn closed_loop_recursion_is_exact() {
        let p = model_probabilities(&Distribution::Exponential { alpha: 0.8 }, 8).unwrap();
        let mut rest = 1.0;
        for k in 0..15 {
            // perfect suppression: only unseen states are measured
            let off: f64 = p[k..].iter().sum();
            let p_new = p[k] / off;
            let p0 = reconstruct_p0(rest, 0.0, p_new).unwrap();
            assert!((p0 - p[k]).abs() < 1e-12);
            rest -= p0;
        }
    }

    #[test]
    fn diagonal_ground_state_stops_at_once() {
        let h = diag_h(3);
        let s0 = StateVector::basis(3, 0).unwrap();
        let cfg = DriverConfig { shots_it: 50, ..Default::default() };
        let r = run_sqdaa(&h, &s0, &cfg).unwrap();
        assert_eq!(r.ledger.entries.len(), 1);
        assert_eq!(r.q_tot, 50);
        assert!((r.final_energy + 1.0).abs() < 1e-12);
        assert_eq!(r.termination, Termination::EnergyConverged);
    }

    #[test]
    fn two_state_problem_reaches_exact_energy() {
        let h = parse_hamiltonian("1.0 ZZ\n0.5 XX").unwrap();
        let s0 = StateVector::from_probabilities(&[0.0, 0.7, 0.3, 0.0]).unwrap();
        let cfg = DriverConfig {
            stopping: StoppingRule::ReferenceEnergy { e_ref: -1.5, eps: 1e-9 },
            seed: 4,
            ..Default::default()
        };
        let r = run_sqdaa(&h, &s0, &cfg).unwrap();
        assert!((r.final_energy + 1.5).abs() < 1e-12);
        let r = run_sqd(&h, &s0, &cfg).unwrap();
        assert!((r.final_energy + 1.5).abs() < 1e-12);
    }

    #[test]
    fn exact_hook_tracks_closed_form_steps() {
        for dist in [Distribution::Exponential { alpha: 1.0 }, Distribution::Algebraic { gamma: 3.0 }] {
            let s0 = model_state(&dist, 10).unwrap();
            let cfg = DriverConfig {
                exact_probabilities: true,
                target_fidelity: 1.0,
                flatness_threshold: 1e-3,
                stopping: StoppingRule::CollectTopM { m: 21 },
                ..Default::default()
            };
            let r = run_sqdaa(&diag_h(10), &s0, &cfg).unwrap();
            let spec = DistributionSpec::asymptotic(dist);
            let iters: Vec<_> = r.plan.records.iter().filter(|x| x.kind == RecordKind::Iteration).collect();
            assert!(r.plan.records.iter().all(|x| x.kind == RecordKind::Iteration), "{dist:?} {:?}", r.plan.records);
            for (k, rec) in iters.iter().enumerate().skip(1).take(20) {
                let want = analytic_steps(&spec, k as u64 - 1).unwrap() as i64;
                assert!((rec.s as i64 - want).abs() <= 1, "{dist:?} k={k}: {} vs {want}", rec.s);
            }
            // exact probabilities: recursion recovers the true p0
            let p = s0.probabilities();
            for (v, p0) in reconstructed(&r) {
                assert!((p0 - p[v as usize]).abs() < 1e-9 * p[v as usize].max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn ledger_energies_and_accounting() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 8).unwrap();
        let cfg = DriverConfig {
            target_fidelity: 0.7,
            stopping: StoppingRule::CollectTopM { m: 12 },
            seed: 11,
            ..Default::default()
        };
        let h = diag_h(8);
        let r = run_sqdaa(&h, &s0, &cfg).unwrap();
        assert_eq!(r.termination, Termination::TargetSetCollected);
        let vals: HashSet<u64> = r.ledger.entries.iter().map(|e| e.bitstring.value()).collect();
        assert_eq!(vals.len(), r.ledger.entries.len());
        for w in r.solutions.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-9);
        }
        assert_eq!(r.solutions.last().unwrap().subspace.dim(), r.ledger.entries.len());
        assert!(r.plan.audit());
        assert_eq!(r.plan.records[0].s, 0);
        let q: u128 = r.plan.records.iter().map(|x| u128::from(x.shots) * u128::from(2 * x.s + 1)).sum();
        assert_eq!(q, r.q_tot);
    }

    #[test]
    fn deterministic_state_uses_one_batch() {
        let h = diag_h(3);
        let s0 = StateVector::basis(3, 5).unwrap();
        let cfg = DriverConfig { direct: DirectSampling::Batched { size: 64, growth: 2.0 }, ..Default::default() };
        let r = run_sqd(&h, &s0, &cfg).unwrap();
        assert_eq!(r.q_tot, 64);
        assert_eq!(r.ledger.entries.len(), 1);
        let cfg = DriverConfig::default();
        assert_eq!(run_sqd(&h, &s0, &cfg).unwrap().q_tot, 1);
    }

    #[test]
    fn coupon_collector_growth() {
        let m = 8usize;
        let s0 = model_state(&Distribution::Step { m: m as u64 }, 3).unwrap();
        let h = diag_h(3);
        let trials = 2000;
        let mut total = 0u128;
        for seed in 0..trials {
            let cfg = DriverConfig { stopping: StoppingRule::CollectTopM { m }, seed, ..Default::default() };
            total += run_sqd(&h, &s0, &cfg).unwrap().q_tot;
        }
        let hm: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
        let mean = total as f64 / trials as f64;
        assert!((mean / (m as f64 * hm) - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn same_ledger_same_energy() {
        let s0 = model_state(&Distribution::Exponential { alpha: 0.5 }, 6).unwrap();
        let h = parse_hamiltonian("0.3 XXIIII\n-1 ZIIIII\n0.5 IZZIII\n0.2 IIIYYI\n-0.7 IIIIIZ").unwrap();
        let cfg = DriverConfig { stopping: StoppingRule::CollectTopM { m: 10 }, seed: 2, target_fidelity: 0.7, ..Default::default() };
        let a = run_sqdaa(&h, &s0, &cfg).unwrap();
        let set: Vec<Bitstring> = a.ledger.bitstrings();
        let direct = solve(&h, Subspace::new(set).unwrap()).unwrap();
        assert!((a.final_energy - direct.energy).abs() < 1e-9);
    }

    #[test]
    fn replay_is_deterministic() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 8).unwrap();
        let cfg = DriverConfig { target_fidelity: 0.7, stopping: StoppingRule::CollectTopM { m: 10 }, seed: 5, ..Default::default() };
        let a = serde_json::to_string(&run_sqdaa(&diag_h(8), &s0, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_sqdaa(&diag_h(8), &s0, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_header() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 4).unwrap();
        let cfg = DriverConfig { stopping: StoppingRule::CollectTopM { m: 3 }, ..Default::default() };
        let r = run_sqdaa(&diag_h(4), &s0, &cfg).unwrap();
        let mut buf = Vec::new();
        r.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,s_k,Q_k,new_bitstring,p0_hat,E_k,Delta_k,DeltaE_k,phase\n"));
        assert_eq!(text.lines().count(), 1 + r.ledger.entries.len());
    }
}
