//! Dense complex statevectors: construction, seeded sampling, Pauli
//! exponentials and expectation values.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::Distribution;
use crate::error::{Error, Result};
use crate::pauli::{Bitstring, PauliHamiltonian, PauliString};

/// Name of the RNG family used for every seeded draw.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64)";

/// Largest register held as a dense vector.
pub const MAX_STATE_QUBITS: usize = 30;

const NORM_TOL: f64 = 1e-10;
const LOAD_TOL: f64 = 1e-6;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Wrap amplitudes that are already normalized to within 1e-10.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = qubits_for_len(amplitudes.len())?;
        let s = Self { n, amplitudes };
        s.check_norm()?;
        Ok(s)
    }

    /// Normalize `amplitudes` provided their norm is within `tol` of one.
    pub fn normalized(amplitudes: Vec<Complex64>, tol: f64) -> Result<Self> {
        let n = qubits_for_len(amplitudes.len())?;
        let norm = norm_sqr(&amplitudes).sqrt();
        if norm == 0.0 {
            return Err(Error::EmptyInput);
        }
        if (norm - 1.0).abs() > tol {
            return Err(Error::NormDeviation(norm - 1.0));
        }
        let amplitudes = amplitudes.into_iter().map(|a| a / norm).collect();
        Ok(Self { n, amplitudes })
    }

    /// Real non-negative amplitudes `√p_i` for a probability vector.
    pub fn from_probabilities(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("probabilities must be finite and non-negative".into()));
        }
        Self::normalized(probs.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect(), LOAD_TOL)
    }

    pub fn basis(n: usize, index: u64) -> Result<Self> {
        let dim = dim_for(n)?;
        if index as usize >= dim {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amplitudes[index as usize]
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_n(other.n)?;
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub(crate) fn from_raw_unchecked(n: usize, amplitudes: Vec<Complex64>) -> Self {
        Self { n, amplitudes }
    }

    pub(crate) fn check_norm(&self) -> Result<()> {
        let dev = self.norm() - 1.0;
        if dev.abs() > NORM_TOL {
            return Err(Error::NormDeviation(dev));
        }
        Ok(())
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: n });
        }
        Ok(())
    }

    /// Draw `shots` computational-basis outcomes with a fresh ChaCha8 stream.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<SampleResult> {
        let mut rng = rng_from_seed(seed);
        let mut out = sample_probabilities(&self.probabilities(), self.n, shots, &mut rng)?;
        out.seed = seed;
        Ok(out)
    }

    /// `exp(i·φ·P)|ψ⟩` with `φ = angle_scale · coefficient`, in place.
    pub fn apply_pauli_exponential(&mut self, coefficient: f64, p: &PauliString, angle_scale: f64) -> Result<()> {
        self.check_n(p.n())?;
        let phi = angle_scale * coefficient;
        let (c, s) = (phi.cos(), phi.sin());
        let is = Complex64::new(0.0, s);
        let x = p.x_mask();
        if x == 0 {
            for (j, a) in self.amplitudes.iter_mut().enumerate() {
                let (_, ph) = p.act(j as u64);
                *a *= Complex64::new(c, 0.0) + is * ph.to_complex();
            }
        } else {
            let top = 63 - x.leading_zeros();
            for j in 0..self.amplitudes.len() as u64 {
                // visit each pair once, from the member with the top flip bit clear
                if j >> top & 1 == 1 {
                    continue;
                }
                let k = j ^ x;
                let (_, ph_j) = p.act(j);
                let (_, ph_k) = p.act(k);
                let (aj, ak) = (self.amplitudes[j as usize], self.amplitudes[k as usize]);
                self.amplitudes[j as usize] = aj * c + is * ph_k.to_complex() * ak;
                self.amplitudes[k as usize] = ak * c + is * ph_j.to_complex() * aj;
            }
        }
        self.check_norm()
    }

    /// ⟨ψ|H|ψ⟩; the imaginary residue must be below 1e-10 relative to λ.
    pub fn expectation(&self, h: &PauliHamiltonian) -> Result<f64> {
        self.check_n(h.n())?;
        let hpsi = h.apply(&self.amplitudes)?;
        let e: Complex64 = self.amplitudes.iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
        if e.im.abs() > NORM_TOL * h.one_norm().max(1.0) {
            return Err(Error::ComplexExpectation(e.im));
        }
        Ok(e.re)
    }
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn dim_for(n: usize) -> Result<usize> {
    if n == 0 || n > MAX_STATE_QUBITS {
        return Err(Error::TooLarge { n, max: MAX_STATE_QUBITS });
    }
    Ok(1usize << n)
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("amplitude count {len} is not 2^n with n ≥ 1")));
    }
    let n = len.trailing_zeros() as usize;
    dim_for(n)?;
    Ok(n)
}

/// Parse `index real [imag]` lines; missing indices are zero amplitude.
pub fn load_state(text: &str, n: usize) -> Result<StateVector> {
    let dim = dim_for(n)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    let mut any = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad("expected \"index real [imag]\"".into()));
        }
        let index: u64 = fields[0].parse().map_err(|_| bad(format!("malformed index {:?}", fields[0])))?;
        if index as usize >= dim {
            return Err(Error::IndexOutOfRange { index, n });
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| bad(format!("malformed number {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("non-finite number {s:?}")))
            }
        };
        let re = num(fields[1])?;
        let im = if fields.len() == 3 { num(fields[2])? } else { 0.0 };
        amps[index as usize] = Complex64::new(re, im);
        any = true;
    }
    if !any {
        return Err(Error::EmptyInput);
    }
    StateVector::normalized(amps, LOAD_TOL)
}

/// Model distribution probabilities over `2^n` basis states, normalized
/// over the register (monotone non-increasing in the index).
pub fn model_probabilities(dist: &Distribution, n: usize) -> Result<Vec<f64>> {
    let dim = dim_for(n)?;
    dist.validate()?;
    let mut w: Vec<f64> = match *dist {
        Distribution::Exponential { alpha } => (0..dim).map(|l| (-alpha * l as f64).exp()).collect(),
        Distribution::Algebraic { gamma } => (0..dim).map(|l| ((l + 1) as f64).powf(-gamma)).collect(),
        Distribution::Step { m } => {
            if m as usize > dim {
                return Err(Error::InvalidParameter(format!("step width {m} exceeds 2^{n}")));
            }
            (0..dim).map(|l| if (l as u64) < m { 1.0 } else { 0.0 }).collect()
        }
    };
    // sum from the small end for accuracy
    let total: f64 = w.iter().rev().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(w)
}

pub fn model_state(dist: &Distribution, n: usize) -> Result<StateVector> {
    let p = model_probabilities(dist, n)?;
    Ok(StateVector { n, amplitudes: p.into_iter().map(|v| Complex64::new(v.sqrt(), 0.0)).collect() })
}

/// Outcome counts of a computational-basis measurement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleResult {
    pub n: usize,
    pub counts: BTreeMap<u64, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl SampleResult {
    /// Outcomes sorted by descending count, ties by ascending value.
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.counts.iter().map(|(k, c)| (*k, *c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    pub fn frequency(&self, index: u64) -> f64 {
        self.counts.get(&index).copied().unwrap_or(0) as f64 / self.shots as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bitstring", "count"])?;
        for (k, c) in &self.counts {
            let b = Bitstring::new(*k, self.n)?;
            wr.write_record([b.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Inverse-CDF multinomial draw from an explicit probability vector.
pub fn sample_probabilities<R: Rng>(probs: &[f64], n: usize, shots: u64, rng: &mut R) -> Result<SampleResult> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be ≥ 1".into()));
    }
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let last_nonzero = probs.iter().rposition(|p| *p > 0.0).ok_or(Error::EmptyInput)?;
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        let i = cdf.partition_point(|c| *c <= u).min(last_nonzero);
        *counts.entry(i as u64).or_insert(0) += 1;
    }
    Ok(SampleResult { n, counts, shots, seed: 0 })
}

/// Exact simulation of repeated measurement, jumping from one first-seen
/// outcome to the next.
///
/// The number of shots until an unseen outcome appears is geometric in the
/// unseen mass, and the outcome is then distributed proportionally among
/// the unseen states. This reproduces the discovery times of shot-by-shot
/// sampling without drawing every shot.
pub struct Discovery<'a> {
    probs: &'a [f64],
    seen: HashSet<u64>,
}

impl<'a> Discovery<'a> {
    pub fn new(probs: &'a [f64]) -> Self {
        Self { probs, seen: HashSet::new() }
    }

    pub fn with_seen(probs: &'a [f64], seen: impl IntoIterator<Item = u64>) -> Self {
        Self { probs, seen: seen.into_iter().collect() }
    }

    pub fn mark_seen(&mut self, index: u64) {
        self.seen.insert(index);
    }

    pub fn unseen_mass(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.seen.contains(&(*i as u64)))
            .map(|(_, p)| *p)
            .sum()
    }

    /// `(shots consumed, new outcome)`, or `None` once nothing unseen has
    /// nonzero probability.
    pub fn next<R: Rng>(&mut self, rng: &mut R) -> Option<(u64, u64)> {
        let total: f64 = self.probs.iter().sum();
        let q = self.unseen_mass() / total;
        if q <= 0.0 {
            return None;
        }
        let wait = if q >= 1.0 {
            1
        } else {
            let u = 1.0 - rng.random::<f64>();
            let extra = (u.ln() / (-q).ln_1p()).floor();
            if extra >= u64::MAX as f64 / 2.0 {
                u64::MAX / 2
            } else {
                1 + extra as u64
            }
        };
        let target = rng.random::<f64>() * q * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, p) in self.probs.iter().enumerate() {
            if self.seen.contains(&(i as u64)) || *p <= 0.0 {
                continue;
            }
            acc += p;
            pick = Some(i as u64);
            if acc > target {
                break;
            }
        }
        let pick = pick?;
        self.seen.insert(pick);
        Some((wait, pick))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::parse_hamiltonian;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = rng_from_seed(seed);
        let v: Vec<Complex64> = (0..1usize << n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        let norm = norm_sqr(&v).sqrt();
        StateVector::new(v.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    fn random_hamiltonian(n: usize, terms: usize, seed: u64) -> PauliHamiltonian {
        let mut rng = rng_from_seed(seed);
        let t = (0..terms)
            .map(|_| {
                let w: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                (rng.random::<f64>() * 2.0 - 1.0, w.parse().unwrap())
            })
            .collect();
        PauliHamiltonian::new(t).unwrap()
    }

    #[test]
    fn load_examples() {
        let s = load_state("0 1.0", 1).unwrap();
        assert_eq!(s.probabilities(), vec![1.0, 0.0]);
        let plus = load_state("0 0.7071067811865476\n1 0.7071067811865476", 1).unwrap();
        for p in plus.probabilities() {
            assert!((p - 0.5).abs() < 1e-10);
        }
        assert!(matches!(load_state("0 2.0", 1), Err(Error::NormDeviation(_))));
        assert!(matches!(load_state("2 1.0", 1), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(load_state("", 1), Err(Error::EmptyInput)));
        let c = load_state("1 0 1", 1).unwrap();
        assert_eq!(c.amplitude(1), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn model_examples() {
        let s = model_state(&Distribution::Step { m: 4 }, 2).unwrap();
        for p in s.probabilities() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        let e = model_state(&Distribution::Exponential { alpha: 1.0 }, 2).unwrap();
        let want = (1.0 - (-1.0f64).exp()) / (1.0 - (-4.0f64).exp());
        assert!((e.probabilities()[0] - want).abs() < 1e-14);
        assert!((e.probabilities()[0] - 0.64391).abs() < 1e-5);
        let a = model_state(&Distribution::Algebraic { gamma: 5.0 }, 10).unwrap();
        let norm: f64 = (1..=1024).map(|l| (l as f64).powi(-5)).sum();
        assert!((a.probabilities()[0] - 1.0 / norm).abs() < 1e-14);
        assert!((a.probabilities()[0] - 0.96439).abs() < 1e-5);
        assert!(model_state(&Distribution::Step { m: 5 }, 2).is_err());
        assert!(model_state(&Distribution::Algebraic { gamma: 1.0 }, 2).is_err());
    }

    #[test]
    fn model_probabilities_are_monotone() {
        for d in [Distribution::Exponential { alpha: 0.3 }, Distribution::Algebraic { gamma: 1.5 }] {
            let p = model_probabilities(&d, 8).unwrap();
            assert!(p.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn sample_examples() {
        let zero = StateVector::basis(1, 0).unwrap();
        let r = zero.sample(100, 7).unwrap();
        assert_eq!(r.counts.get(&0), Some(&100));
        assert_eq!(r.counts.len(), 1);

        let plus = load_state("0 0.7071067811865476\n1 0.7071067811865476", 1).unwrap();
        let r = plus.sample(1_000_000, 3).unwrap();
        assert!((r.frequency(0) - 0.5).abs() <= 5.0 * (0.25f64 / 1e6).sqrt());
        assert_eq!(plus.sample(1000, 11).unwrap(), plus.sample(1000, 11).unwrap());
        assert!(plus.sample(0, 1).is_err());
    }

    #[test]
    fn sample_goodness_of_fit() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut stat = 0.0;
        let mut dof = 0.0;
        for seed in 0..10 {
            let s = random_state(4, 100 + seed);
            let p = s.probabilities();
            let shots = 100_000u64;
            let r = s.sample(shots, seed).unwrap();
            for (i, pi) in p.iter().enumerate() {
                let e = pi * shots as f64;
                let o = *r.counts.get(&(i as u64)).unwrap_or(&0) as f64;
                stat += (o - e).powi(2) / e;
            }
            dof += (p.len() - 1) as f64;
        }
        let pval = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
        assert!(pval > 1e-3, "chi-square p-value {pval}");
    }

    #[test]
    fn csv_output() {
        let r = StateVector::basis(3, 5).unwrap().sample(4, 0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bitstring,count\n101,4\n");
    }

    #[test]
    fn pauli_exponential_examples() {
        let mut s = StateVector::basis(1, 0).unwrap();
        s.apply_pauli_exponential(1.0, &"Z".parse().unwrap(), 0.3).unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-15);
        assert!((s.amplitude(0) - Complex64::from_polar(1.0, 0.3)).norm() < 1e-15);

        let mut s = StateVector::basis(1, 0).unwrap();
        s.apply_pauli_exponential(1.0, &"X".parse().unwrap(), std::f64::consts::FRAC_PI_2).unwrap();
        assert!((s.probabilities()[1] - 1.0).abs() < 1e-15);
        assert!((s.amplitude(1) - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pauli_exponential_matches_dense_oracle() {
        for seed in 0..20 {
            let n = 1 + (seed as usize % 6);
            let s0 = random_state(n, seed);
            let h = random_hamiltonian(n, 1, 1000 + seed);
            let (c, p) = h.terms()[0].clone();
            let phi = 0.37 * (seed as f64 + 1.0);
            let mut s = s0.clone();
            s.apply_pauli_exponential(c, &p, phi).unwrap();
            // cos(φc) I + i sin(φc) P on the dense matrix
            let m = p.dense();
            let v = DVector::from_vec(s0.amplitudes().to_vec());
            let ang = phi * c;
            let want = &v * Complex64::new(ang.cos(), 0.0) + (&m * &v) * Complex64::new(0.0, ang.sin());
            for (a, b) in s.amplitudes().iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_examples() {
        let z = parse_hamiltonian("1.0 Z").unwrap();
        assert!((StateVector::basis(1, 0).unwrap().expectation(&z).unwrap() - 1.0).abs() < 1e-15);
        let plus = load_state("0 1\n1 1", 1);
        assert!(plus.is_err());
        let plus = StateVector::from_probabilities(&[0.5, 0.5]).unwrap();
        assert!(plus.expectation(&z).unwrap().abs() < 1e-15);
    }

    #[test]
    fn expectation_matches_dense_oracle() {
        for seed in 0..5 {
            let s = random_state(6, seed);
            let h = random_hamiltonian(6, 12, 50 + seed);
            let m = h.dense_matrix().unwrap();
            let v = DVector::from_vec(s.amplitudes().to_vec());
            let want = (v.adjoint() * &m * &v)[(0, 0)];
            assert!((s.expectation(&h).unwrap() - want.re).abs() < 1e-10);
        }
    }

    #[test]
    fn discovery_visits_everything_once() {
        let p = model_probabilities(&Distribution::Exponential { alpha: 1.0 }, 3).unwrap();
        let mut d = Discovery::new(&p);
        let mut rng = rng_from_seed(1);
        let mut seen = Vec::new();
        while let Some((w, i)) = d.next(&mut rng) {
            assert!(w >= 1);
            seen.push(i);
        }
        seen.sort();
        assert_eq!(seen, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn discovery_matches_shot_simulation() {
        // mean shots to see both outcomes of p = (0.9, 0.1)
        let p = [0.9, 0.1];
        let trials = 20_000;
        let mut rng = rng_from_seed(9);
        let mut total = 0u64;
        for _ in 0..trials {
            let mut d = Discovery::new(&p);
            let (a, _) = d.next(&mut rng).unwrap();
            let (b, _) = d.next(&mut rng).unwrap();
            total += a + b;
        }
        // E = 1 + 0.9·(1/0.1) + 0.1·(1/0.9)
        let want = 1.0 + 0.9 * 10.0 + 0.1 / 0.9;
        let got = total as f64 / trials as f64;
        assert!((got - want).abs() < 0.2, "{got} vs {want}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn exponentials_preserve_norm(seed in 0u64..1000, n in 1usize..6, steps in 1usize..30) {
            let mut s = random_state(n, seed);
            let h = random_hamiltonian(n, steps, seed + 1);
            for (c, p) in h.terms() {
                s.apply_pauli_exponential(*c, p, 0.9).unwrap();
            }
            prop_assert!((s.norm() - 1.0).abs() <= 1e-10);
        }
    }
}
