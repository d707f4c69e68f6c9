//! Amplitude amplification away from a set of already-measured bitstrings:
//! standard and fixed-point variants, step-count rules and the query plan.

use std::collections::HashSet;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::Bitstring;
use crate::resources::cnnot_tcount;
use crate::state::StateVector;

/// Bitstrings to suppress together with their cumulative probability R in
/// the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionSet {
    members: Vec<Bitstring>,
    r: f64,
    /// 1 − R, kept separately so tiny complements stay accurate.
    rest: f64,
}

impl ReductionSet {
    fn check_members(members: &[Bitstring]) -> Result<()> {
        let mut seen = HashSet::new();
        for b in members {
            if !seen.insert(b.value()) {
                return Err(Error::InvalidParameter(format!("duplicate member {b}")));
            }
        }
        if let Some(first) = members.first() {
            if members.iter().any(|b| b.n() != first.n()) {
                return Err(Error::InvalidParameter("members have different widths".into()));
            }
        }
        Ok(())
    }

    /// R from estimated probabilities.
    pub fn with_r(members: Vec<Bitstring>, r: f64) -> Result<Self> {
        Self::with_complement(members, r, 1.0 - r)
    }

    /// R and 1 − R supplied independently (both must be consistent).
    pub fn with_complement(members: Vec<Bitstring>, r: f64, rest: f64) -> Result<Self> {
        Self::check_members(&members)?;
        if !(0.0..1.0).contains(&r) || !(rest > 0.0 && rest <= 1.0) {
            return Err(Error::NothingToAmplify);
        }
        Ok(Self { members, r, rest })
    }

    /// Exact R from the initial state.
    pub fn from_state(members: Vec<Bitstring>, state: &StateVector) -> Result<Self> {
        Self::check_members(&members)?;
        let mask = member_mask(&members, state)?;
        let (mut r, mut rest) = (0.0, 0.0);
        for (a, m) in state.amplitudes().iter().zip(&mask) {
            if *m {
                r += a.norm_sqr();
            } else {
                rest += a.norm_sqr();
            }
        }
        let total = r + rest;
        if rest <= 0.0 {
            return Err(Error::NothingToAmplify);
        }
        Ok(Self { members, r: r / total, rest: rest / total })
    }

    pub fn members(&self) -> &[Bitstring] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn complement(&self) -> f64 {
        self.rest
    }

    /// θ = arccos √R, evaluated as arcsin √(1 − R).
    pub fn theta(&self) -> f64 {
        self.rest.sqrt().min(1.0).asin()
    }
}

fn member_mask(members: &[Bitstring], state: &StateVector) -> Result<Vec<bool>> {
    let mut mask = vec![false; state.dim()];
    for b in members {
        if b.n() != state.n() {
            return Err(Error::DimensionMismatch { expected: state.n(), found: b.n() });
        }
        mask[b.index()] = true;
    }
    Ok(mask)
}

pub fn theta_from_r(r: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidParameter(format!("R = {r} outside [0, 1)")));
    }
    Ok(r.sqrt().acos())
}

/// s = ⌊arcsin(√F_T) / (2θ)⌋.
pub fn ideal_steps(theta: f64, f_t: f64) -> Result<u64> {
    if !(theta > 0.0 && theta <= PI / 2.0 + 1e-15) {
        return Err(Error::InvalidParameter(format!("θ = {theta} outside (0, π/2]")));
    }
    if !(f_t > 0.0 && f_t <= 1.0) {
        return Err(Error::InvalidParameter(format!("F_T = {f_t} outside (0, 1]")));
    }
    Ok((f_t.sqrt().asin() / (2.0 * theta)).floor() as u64)
}

/// `A^s|Ψ0⟩` with `A = −S_Ψ S_P`, applied reflection by reflection.
pub fn apply_standard_aa(state0: &StateVector, set: &ReductionSet, s: u64) -> Result<StateVector> {
    let mask = member_mask(set.members(), state0)?;
    ensure_target(state0, &mask)?;
    let psi = state0.amplitudes();
    let mut v = psi.to_vec();
    for _ in 0..s {
        // S_P = −(I − 2P): members keep their sign, the rest flips
        for (a, m) in v.iter_mut().zip(&mask) {
            if !*m {
                *a = -*a;
            }
        }
        let ov: Complex64 = psi.iter().zip(&v).map(|(p, a)| p.conj() * a).sum();
        for (a, p) in v.iter_mut().zip(psi) {
            *a = -(*a - p * ov * 2.0);
        }
    }
    let out = StateVector::from_raw_unchecked(state0.n(), v);
    out.check_norm()?;
    Ok(out)
}

fn ensure_target(state0: &StateVector, mask: &[bool]) -> Result<()> {
    let rest: f64 = state0.amplitudes().iter().zip(mask).filter(|(_, m)| !**m).map(|(a, _)| a.norm_sqr()).sum();
    if rest <= 0.0 {
        return Err(Error::NothingToAmplify);
    }
    Ok(())
}

/// Amplitude factors `(members, rest)` after `s` standard steps.
fn rotation_factors(set: &ReductionSet, s: u64) -> (f64, f64) {
    let theta = set.theta();
    let phase = (2 * s + 1) as f64 * theta;
    let on = if set.r() > 0.0 { phase.cos() / set.r().sqrt() } else { 0.0 };
    let off = phase.sin() / set.complement().sqrt();
    (on, off)
}

/// Same result as [`apply_standard_aa`] from the two-dimensional closed form,
/// for step counts too large to iterate.
pub fn rotate_closed_form(state0: &StateVector, set: &ReductionSet, s: u64) -> Result<StateVector> {
    let mask = member_mask(set.members(), state0)?;
    ensure_target(state0, &mask)?;
    let (on, off) = rotation_factors(set, s);
    let amps = state0.amplitudes().iter().zip(&mask).map(|(a, m)| a * if *m { on } else { off }).collect();
    let out = StateVector::from_raw_unchecked(state0.n(), amps);
    out.check_norm()?;
    Ok(out)
}

/// Measurement probabilities after `s` steps given initial probabilities;
/// `set` must carry R computed from the same probabilities.
pub fn rotated_probabilities(probs0: &[f64], in_set: &[bool], set: &ReductionSet, s: u64) -> Vec<f64> {
    let (on, off) = rotation_factors(set, s);
    let (on2, off2) = (on * on, off * off);
    probs0.iter().zip(in_set).map(|(p, m)| p * if *m { on2 } else { off2 }).collect()
}

/// Chebyshev polynomial `T_q(x)` for real order `q`.
pub fn chebyshev_t(q: f64, x: f64) -> f64 {
    if x.abs() <= 1.0 {
        (q * x.acos()).cos()
    } else if x > 1.0 {
        (q * x.acosh()).cosh()
    } else {
        // only integer q is meaningful here
        let sign = if (q.round() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        sign * (q * (-x).acosh()).cosh()
    }
}

fn acot(x: f64) -> f64 {
    1.0f64.atan2(x)
}

/// Phase schedule `(α_1..α_s, β_1..β_s)` for `s` fixed-point steps with
/// tolerance δ; `β_j = α_{s−j+1}`. The schedule is the odd-length
/// Chebyshev construction with `L = 2s + 1` queries.
pub fn fixed_point_angles(s: u64, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if s == 0 {
        return Err(Error::InvalidParameter("fixed-point schedule needs s ≥ 1".into()));
    }
    check_delta(delta)?;
    let l = (2 * s + 1) as f64;
    let gamma_inv = chebyshev_t(1.0 / l, 1.0 / delta);
    let root = (1.0 - 1.0 / (gamma_inv * gamma_inv)).max(0.0).sqrt();
    let alpha: Vec<f64> = (1..=s).map(|j| 2.0 * acot((2.0 * PI * j as f64 / l).tan() * root)).collect();
    let beta = alpha.iter().rev().copied().collect();
    Ok((alpha, beta))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside (0, 1]")));
    }
    Ok(())
}

/// Smallest s with the fixed-point guarantee: ⌈ln(2/δ) / (2·√(1−R))⌉.
pub fn fixed_point_min_steps(delta: f64, set: &ReductionSet) -> Result<u64> {
    check_delta(delta)?;
    Ok(((2.0 / delta).ln() / (2.0 * set.complement().sqrt())).ceil() as u64)
}

/// Closed-form target fidelity `1 − δ²·T_L(T_{1/L}(1/δ)·√(1−F0))²`,
/// `L = 2s + 1`, `F0 = 1 − R`.
pub fn fixed_point_fidelity(s: u64, delta: f64, set: &ReductionSet) -> Result<f64> {
    check_delta(delta)?;
    let l = (2 * s + 1) as f64;
    let t = chebyshev_t(l, chebyshev_t(1.0 / l, 1.0 / delta) * set.r().sqrt());
    Ok(1.0 - delta * delta * t * t)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointOutcome {
    pub state: StateVector,
    /// Whether `s` met the step bound that guarantees fidelity ≥ 1 − δ².
    pub guaranteed: bool,
}

/// `s` steps of `A_j = −S_Ψ(α_j) S_P(β_j)` with
/// `S_P(β) = I − (1 − e^{iβ})P` (P onto the members) and
/// `S_Ψ(α) = I − (1 − e^{−iα})|Ψ0⟩⟨Ψ0|`.
pub fn apply_fixed_point_aa(state0: &StateVector, set: &ReductionSet, s: u64, delta: f64) -> Result<FixedPointOutcome> {
    check_delta(delta)?;
    let mask = member_mask(set.members(), state0)?;
    ensure_target(state0, &mask)?;
    let guaranteed = s >= fixed_point_min_steps(delta, set)?;
    if s == 0 {
        return Ok(FixedPointOutcome { state: state0.clone(), guaranteed });
    }
    let (alpha, beta) = fixed_point_angles(s, delta)?;
    let psi = state0.amplitudes();
    let mut v = psi.to_vec();
    let one = Complex64::new(1.0, 0.0);
    for (a, b) in alpha.iter().zip(&beta) {
        let fp = one - Complex64::from_polar(1.0, *b);
        for (x, m) in v.iter_mut().zip(&mask) {
            if *m {
                *x -= fp * *x;
            }
        }
        let fs = one - Complex64::from_polar(1.0, -*a);
        let ov: Complex64 = psi.iter().zip(&v).map(|(p, x)| p.conj() * x).sum();
        for (x, p) in v.iter_mut().zip(psi) {
            *x = -(*x - fs * p * ov);
        }
    }
    let state = StateVector::from_raw_unchecked(state0.n(), v);
    state.check_norm()?;
    Ok(FixedPointOutcome { state, guaranteed })
}

/// Weight of a state outside the reduction set.
pub fn target_weight(state: &StateVector, set: &ReductionSet) -> Result<f64> {
    let mask = member_mask(set.members(), state)?;
    Ok(state.amplitudes().iter().zip(&mask).filter(|(_, m)| !**m).map(|(a, _)| a.norm_sqr()).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TCost {
    pub count: u64,
    pub depth: u64,
}

/// T-count and T-depth of one AA circuit: `2s+1` preparations, one
/// C^nNOT per member per step for S_P and, when `zero_reflection` is set,
/// one more per step for the |0⟩ reflection inside S_Ψ. C^nNOT T-depth is
/// taken equal to its T-count.
pub fn aa_circuit_tcount(n: usize, k: usize, s: u64, prep: TCost, zero_reflection: bool) -> Result<TCost> {
    if k == 0 {
        return Err(Error::InvalidParameter("reduction set must have at least one member".into()));
    }
    let toffoli = cnnot_tcount(n)?;
    let per_step = toffoli * (k as u64 + u64::from(zero_reflection));
    let q = 2 * s + 1;
    Ok(TCost { count: q * prep.count + s * per_step, depth: q * prep.depth + s * per_step })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    /// Regular AA iteration sample.
    Iteration,
    /// Step-adaptation probe.
    Probe,
    /// Direct sampling of the final rotated state.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub kind: RecordKind,
    pub k: usize,
    pub s: u64,
    pub q: u64,
    pub shots: u64,
    /// Size of the reduction set used by the circuit.
    pub set_size: usize,
}

/// Query bookkeeping for a run: one record per sampled circuit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AaPlan {
    pub records: Vec<PlanRecord>,
    pub q_tot_aa: u128,
    pub q_tot_dir: u128,
    pub q_tot: u128,
    pub shots_tot: u128,
}

impl AaPlan {
    pub fn push(&mut self, kind: RecordKind, k: usize, s: u64, shots: u64, set_size: usize) {
        let q = 2 * s + 1;
        let cost = u128::from(q) * u128::from(shots);
        match kind {
            RecordKind::Iteration | RecordKind::Probe => self.q_tot_aa += cost,
            RecordKind::Direct => self.q_tot_dir += cost,
        }
        self.q_tot += cost;
        self.shots_tot += u128::from(shots);
        self.records.push(PlanRecord { kind, k, s, q, shots, set_size });
    }

    /// Recompute totals from the records.
    pub fn audit(&self) -> bool {
        let mut aa = 0u128;
        let mut dir = 0u128;
        let mut shots = 0u128;
        for r in &self.records {
            if r.q != 2 * r.s + 1 {
                return false;
            }
            let c = u128::from(r.q) * u128::from(r.shots);
            match r.kind {
                RecordKind::Direct => dir += c,
                _ => aa += c,
            }
            shots += u128::from(r.shots);
        }
        aa == self.q_tot_aa && dir == self.q_tot_dir && aa + dir == self.q_tot && shots == self.shots_tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::Distribution;
    use crate::state::{model_state, rng_from_seed};
    use proptest::prelude::*;
    use rand::Rng;

    fn bits(v: &[u64], n: usize) -> Vec<Bitstring> {
        v.iter().map(|x| Bitstring::new(*x, n).unwrap()).collect()
    }

    #[test]
    fn theta_examples() {
        assert!((theta_from_r(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((theta_from_r(0.5).unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((theta_from_r(0.75).unwrap() - PI / 6.0).abs() < 1e-15);
        assert!(theta_from_r(1.0).is_err());
        assert!(theta_from_r(-0.1).is_err());
    }

    #[test]
    fn ideal_step_examples() {
        assert_eq!(ideal_steps(PI / 4.0, 1.0).unwrap(), 1);
        assert_eq!(ideal_steps(PI / 6.0, 1.0).unwrap(), 1);
        assert_eq!(ideal_steps(PI / 3.0, 1.0).unwrap(), 0);
    }

    #[test]
    fn grover_on_uniform_four_states() {
        let s0 = model_state(&Distribution::Step { m: 4 }, 2).unwrap();
        let set = ReductionSet::from_state(bits(&[1, 2, 3], 2), &s0).unwrap();
        assert!((set.theta() - PI / 6.0).abs() < 1e-15);
        let out = apply_standard_aa(&s0, &set, 1).unwrap();
        assert!((out.probabilities()[0] - 1.0).abs() < 1e-12);
        assert_eq!(apply_standard_aa(&s0, &set, 0).unwrap(), s0);
    }

    #[test]
    fn full_cover_is_rejected() {
        let s0 = model_state(&Distribution::Step { m: 2 }, 2).unwrap();
        assert!(matches!(ReductionSet::from_state(bits(&[0, 1], 2), &s0), Err(Error::NothingToAmplify)));
        let fake = ReductionSet::with_r(bits(&[0, 1], 2), 0.5).unwrap();
        assert!(matches!(apply_standard_aa(&s0, &fake, 1), Err(Error::NothingToAmplify)));
    }

    #[test]
    fn exponential_rotation_law() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 10).unwrap();
        let set = ReductionSet::from_state(bits(&[0], 10), &s0).unwrap();
        let s = ideal_steps(set.theta(), 1.0).unwrap();
        let out = apply_standard_aa(&s0, &set, s).unwrap();
        let want = ((2 * s + 1) as f64 * set.theta()).sin().powi(2);
        assert!((target_weight(&out, &set).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_reflections() {
        let s0 = model_state(&Distribution::Exponential { alpha: 0.7 }, 6).unwrap();
        let set = ReductionSet::from_state(bits(&[0, 1, 5], 6), &s0).unwrap();
        for s in 0..15 {
            let a = apply_standard_aa(&s0, &set, s).unwrap();
            let b = rotate_closed_form(&s0, &set, s).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        let mask: Vec<bool> = (0..64).map(|i| [0, 1, 5].contains(&i)).collect();
        let p = rotated_probabilities(&s0.probabilities(), &mask, &set, 7);
        let q = rotate_closed_form(&s0, &set, 7).unwrap().probabilities();
        for (x, y) in p.iter().zip(q) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn fixed_point_degenerate_delta() {
        for s in 1..5 {
            let (a, b) = fixed_point_angles(s, 1.0).unwrap();
            assert!(a.iter().chain(&b).all(|x| (x - PI).abs() < 1e-12));
        }
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 5).unwrap();
        let set = ReductionSet::from_state(bits(&[0], 5), &s0).unwrap();
        for s in 0..4 {
            let fp = apply_fixed_point_aa(&s0, &set, s, 1.0).unwrap().state.probabilities();
            let st = apply_standard_aa(&s0, &set, s).unwrap().probabilities();
            for (x, y) in fp.iter().zip(st) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_symmetry() {
        let (a, b) = fixed_point_angles(2, 0.5).unwrap();
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[0]);
    }

    #[test]
    fn fixed_point_matches_closed_form_fidelity() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 8).unwrap();
        for members in [vec![0], vec![0, 1, 2]] {
            let set = ReductionSet::from_state(bits(&members, 8), &s0).unwrap();
            for delta in [0.1, 0.3, 0.5, 0.8] {
                for s in 1..6 {
                    let out = apply_fixed_point_aa(&s0, &set, s, delta).unwrap();
                    let got = target_weight(&out.state, &set).unwrap();
                    let want = fixed_point_fidelity(s, delta, &set).unwrap();
                    assert!((got - want).abs() < 1e-10, "s={s} δ={delta}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn fixed_point_s3_delta_01_meets_bound() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 8).unwrap();
        let set = ReductionSet::from_state(bits(&[0], 8), &s0).unwrap();
        let out = apply_fixed_point_aa(&s0, &set, 3, 0.1).unwrap();
        assert!(out.guaranteed);
        assert!(target_weight(&out.state, &set).unwrap() >= 1.0 - 0.01);
    }

    #[test]
    fn fixed_point_flags_short_schedules() {
        let s0 = model_state(&Distribution::Exponential { alpha: 1.0 }, 8).unwrap();
        let set = ReductionSet::from_state(bits(&[0], 8), &s0).unwrap();
        let min = fixed_point_min_steps(0.1, &set).unwrap();
        assert!(!apply_fixed_point_aa(&s0, &set, min - 1, 0.1).unwrap().guaranteed);
        assert_eq!(apply_fixed_point_aa(&s0, &set, 0, 0.1).unwrap().state, s0);
    }

    #[test]
    fn circuit_tcount_examples() {
        let prep = TCost { count: 1000, depth: 1000 };
        assert_eq!(cnnot_tcount(3).unwrap(), 6);
        assert_eq!(aa_circuit_tcount(10, 3, 0, prep, true).unwrap().count, 1000);
        assert_eq!(aa_circuit_tcount(10, 3, 2, prep, true).unwrap().count, 5272);
        assert_eq!(aa_circuit_tcount(10, 3, 2, prep, false).unwrap().count, 5204);
        assert!(aa_circuit_tcount(1, 1, 1, prep, true).is_err());
    }

    #[test]
    fn plan_totals() {
        let mut plan = AaPlan::default();
        plan.push(RecordKind::Iteration, 0, 0, 100, 0);
        plan.push(RecordKind::Iteration, 1, 3, 100, 1);
        plan.push(RecordKind::Direct, 2, 3, 50, 2);
        assert_eq!(plan.q_tot_aa, 100 + 700);
        assert_eq!(plan.q_tot_dir, 350);
        assert_eq!(plan.q_tot, 1150);
        assert!(plan.audit());
    }

    fn random_probs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let v: Vec<f64> = (0..1usize << n).map(|_| rng.random::<f64>().powi(3)).collect();
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rotation_law_and_closure(seed in 0u64..10_000, n in 1usize..7, s in 0u64..21) {
            let p = random_probs(n, seed);
            let mut rng = rng_from_seed(seed ^ 0xabc);
            let dim = 1u64 << n;
            let mut members: Vec<u64> = (0..dim).filter(|_| rng.random::<f64>() < 0.4).collect();
            if members.len() as u64 == dim { members.pop(); }
            let s0 = StateVector::from_probabilities(&p).unwrap();
            let set = ReductionSet::from_state(bits(&members, n), &s0).unwrap();
            let out = apply_standard_aa(&s0, &set, s).unwrap();
            prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
            let want = ((2 * s + 1) as f64 * set.r().sqrt().acos()).sin().powi(2);
            prop_assert!((target_weight(&out, &set).unwrap() - want).abs() <= 1e-10);
            // amplitude ratios inside each part are unchanged
            let (on, off) = rotation_factors(&set, s);
            for (i, (a, b)) in out.amplitudes().iter().zip(s0.amplitudes()).enumerate() {
                let f = if members.contains(&(i as u64)) { on } else { off };
                prop_assert!((a - b * f).norm() <= 1e-10);
            }
        }

        #[test]
        fn ideal_steps_monotone(t1 in 0.01f64..1.57, t2 in 0.01f64..1.57, f1 in 0.01f64..1.0, f2 in 0.01f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(ideal_steps(lo, f1).unwrap() >= ideal_steps(hi, f1).unwrap());
            let (flo, fhi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            prop_assert!(ideal_steps(t1, flo).unwrap() <= ideal_steps(t1, fhi).unwrap());
        }

        #[test]
        fn fixed_point_guarantee(seed in 0u64..10_000, delta in 0.05f64..1.0) {
            let p = random_probs(5, seed);
            let s0 = StateVector::from_probabilities(&p).unwrap();
            let set = ReductionSet::from_state(bits(&[0, 3], 5), &s0).unwrap();
            let s = fixed_point_min_steps(delta, &set).unwrap();
            let out = apply_fixed_point_aa(&s0, &set, s, delta).unwrap();
            prop_assert!(out.guaranteed);
            prop_assert!((out.state.norm() - 1.0).abs() <= 1e-10);
            prop_assert!(target_weight(&out.state, &set).unwrap() >= 1.0 - delta * delta - 1e-10);
        }
    }
}
