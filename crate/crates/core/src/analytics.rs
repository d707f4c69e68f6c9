//! Closed-form step counts and query complexities for the model
//! distributions, and SQD vs SQD-AA ratio curves.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability profile over basis states ordered by decreasing weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    /// `p_l ∝ e^{−αl}`.
    Exponential { alpha: f64 },
    /// `p_l ∝ (l+1)^{−γ}`.
    Algebraic { gamma: f64 },
    /// `p_l = 1/m` for `l < m`.
    Step { m: u64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Exponential { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::InvalidParameter(format!("α = {alpha} must be positive")))
            }
            Distribution::Algebraic { gamma } if !(gamma > 1.0 && gamma.is_finite()) => {
                Err(Error::InvalidParameter(format!("γ = {gamma} must exceed 1")))
            }
            Distribution::Step { m } if m == 0 => Err(Error::InvalidParameter("step width must be ≥ 1".into())),
            _ => Ok(()),
        }
    }
}

/// A distribution plus the normalization used by the calculators:
/// `n = None` takes the infinite-register limits (ζ(γ), geometric series),
/// `Some(n)` uses exact sums over `2^n` states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub distribution: Distribution,
    #[serde(default)]
    pub n: Option<usize>,
}

impl DistributionSpec {
    pub fn asymptotic(distribution: Distribution) -> Self {
        Self { distribution, n: None }
    }

    pub fn finite(distribution: Distribution, n: usize) -> Self {
        Self { distribution, n: Some(n) }
    }

    fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if let (Distribution::Step { m }, Some(n)) = (self.distribution, self.n) {
            if n < 64 && m > 1u64 << n {
                return Err(Error::InvalidParameter(format!("step width {m} exceeds 2^{n}")));
            }
        }
        Ok(())
    }

    fn register(&self) -> Option<f64> {
        self.n.map(|n| 2f64.powi(n as i32))
    }

    /// Algebraic normalization: ζ(γ) or the finite sum over the register.
    fn alg_norm(&self, gamma: f64) -> f64 {
        match self.n {
            None => zeta(gamma),
            Some(n) => harmonic(1usize << n, gamma),
        }
    }

    /// Probability of the `l`-th most probable state.
    pub fn probability(&self, l: u64) -> Result<f64> {
        self.validate()?;
        Ok(match self.distribution {
            Distribution::Exponential { alpha } => {
                let norm = match self.register() {
                    None => -(-alpha).exp_m1(),
                    Some(big) => -(-alpha).exp_m1() / -(-alpha * big).exp_m1(),
                };
                (-alpha * l as f64).exp() * norm
            }
            Distribution::Algebraic { gamma } => ((l + 1) as f64).powf(-gamma) / self.alg_norm(gamma),
            Distribution::Step { m } => {
                if l < m {
                    1.0 / m as f64
                } else {
                    0.0
                }
            }
        })
    }
}

/// Riemann ζ(γ) for γ > 1: direct sum to 1000 plus an Euler–Maclaurin tail.
pub fn zeta(gamma: f64) -> f64 {
    const N: usize = 1000;
    let head: f64 = (1..N).rev().map(|l| (l as f64).powf(-gamma)).sum();
    let nf = N as f64;
    let tail = nf.powf(1.0 - gamma) / (gamma - 1.0) + 0.5 * nf.powf(-gamma) + gamma * nf.powf(-gamma - 1.0) / 12.0
        - gamma * (gamma + 1.0) * (gamma + 2.0) * nf.powf(-gamma - 3.0) / 720.0;
    head + tail
}

/// `H_k(γ) = Σ_{l<k} (l+1)^{−γ}`.
pub fn harmonic(k: usize, gamma: f64) -> f64 {
    (1..=k).rev().map(|l| (l as f64).powf(-gamma)).sum()
}

/// Steps `s_{k+1}` for reducing the `k+1` most probable states.
pub fn analytic_steps(spec: &DistributionSpec, k: u64) -> Result<u64> {
    spec.validate()?;
    let s = match spec.distribution {
        Distribution::Exponential { alpha } => {
            let ratio = match spec.register() {
                None => (alpha * (k + 1) as f64).exp(),
                Some(big) => {
                    let left = big - (k + 1) as f64;
                    if left <= 0.0 {
                        return Err(Error::InvalidParameter(format!("k = {k} leaves no state to amplify")));
                    }
                    (alpha * (k + 1) as f64).exp() * (-alpha * big).exp_m1() / (-alpha * left).exp_m1()
                }
            };
            PI * ratio.sqrt() / 4.0
        }
        Distribution::Algebraic { gamma } => {
            let z = spec.alg_norm(gamma);
            let rest = z - harmonic(k as usize + 1, gamma);
            if rest <= 0.0 {
                return Err(Error::InvalidParameter(format!("k = {k} leaves no state to amplify")));
            }
            PI * z.sqrt() / (4.0 * rest.sqrt())
        }
        Distribution::Step { m } => {
            if k + 1 >= m {
                return Err(Error::InvalidParameter(format!("k = {k} must be below m − 1 = {}", m - 1)));
            }
            PI / (4.0 * (((m - k - 1) as f64) / m as f64).sqrt().asin())
        }
    };
    Ok(s.floor() as u64)
}

fn check_pfail(m: u64, p_fail: f64) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidParameter("m must be ≥ 1".into()));
    }
    if !(p_fail > 0.0 && p_fail < 1.0) {
        return Err(Error::InvalidParameter(format!("p_fail = {p_fail} outside (0, 1)")));
    }
    Ok(())
}

/// Shots for plain SQD to see the `m` most probable states with failure
/// probability at most `p_fail`: `(1/p_{m−1})·ln(m/p_fail)`.
pub fn qtot_sqd(spec: &DistributionSpec, m: u64, p_fail: f64) -> Result<f64> {
    check_pfail(m, p_fail)?;
    if let Distribution::Step { m: w } = spec.distribution {
        if m > w {
            return Err(Error::InvalidParameter(format!("cannot collect {m} states from a step of width {w}")));
        }
    }
    let p = spec.probability(m - 1)?;
    Ok((m as f64 / p_fail).ln() / p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectTailForm {
    /// The fully simplified tail expression.
    Final,
    /// Shots for the remaining states times the exact query count of the
    /// last AA circuit.
    Intermediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqdaaComplexity {
    pub q_tot: f64,
    pub q_aa: f64,
    pub q_dir: f64,
    pub m_star: u64,
    /// `N·m·(1+π)` for the step distribution.
    pub bound: Option<f64>,
}

/// SQD-AA query complexity to collect the `m` most probable states.
pub fn qtot_sqdaa(spec: &DistributionSpec, m: u64, shots_it: u64, p_fail: f64) -> Result<SqdaaComplexity> {
    qtot_sqdaa_with(spec, m, shots_it, p_fail, DirectTailForm::Final)
}

pub fn qtot_sqdaa_with(
    spec: &DistributionSpec,
    m: u64,
    shots_it: u64,
    p_fail: f64,
    tail: DirectTailForm,
) -> Result<SqdaaComplexity> {
    check_pfail(m, p_fail)?;
    spec.validate()?;
    if shots_it == 0 {
        return Err(Error::InvalidParameter("N_S^AA,it must be ≥ 1".into()));
    }
    let n_it = shots_it as f64;
    match spec.distribution {
        Distribution::Exponential { alpha } => {
            let mf = m as f64;
            let q_aa = n_it * (mf + PI / 2.0 * (alpha * mf / 2.0).exp_m1() / (alpha / 2.0).exp_m1());
            Ok(SqdaaComplexity { q_tot: q_aa, q_aa, q_dir: 0.0, m_star: m, bound: None })
        }
        Distribution::Step { m: w } => {
            if m > w {
                return Err(Error::InvalidParameter(format!("cannot collect {m} states from a step of width {w}")));
            }
            let mut sum = 1.0;
            for k in 1..m {
                sum += (2 * analytic_steps(spec, k - 1)? + 1) as f64;
            }
            let q_aa = n_it * sum;
            Ok(SqdaaComplexity {
                q_tot: q_aa,
                q_aa,
                q_dir: 0.0,
                m_star: m,
                bound: Some(n_it * m as f64 * (1.0 + PI)),
            })
        }
        Distribution::Algebraic { gamma } => {
            let z = spec.alg_norm(gamma);
            let mut best: Option<SqdaaComplexity> = None;
            let mut aa_sum = 0.0;
            for m_star in 1..=m {
                let k = m_star - 1;
                aa_sum += (z / (z - harmonic(k as usize, gamma))).sqrt();
                let q_aa = n_it * (m_star as f64 + PI / 2.0 * aa_sum);
                let q_dir = if m_star == m { 0.0 } else { alg_direct_tail(spec, gamma, z, m, m_star, p_fail, tail)? };
                let c = SqdaaComplexity { q_tot: q_aa + q_dir, q_aa, q_dir, m_star, bound: None };
                if best.is_none_or(|b| c.q_tot < b.q_tot) {
                    best = Some(c);
                }
            }
            Ok(best.expect("m ≥ 1"))
        }
    }
}

fn alg_direct_tail(
    spec: &DistributionSpec,
    gamma: f64,
    z: f64,
    m: u64,
    m_star: u64,
    p_fail: f64,
    tail: DirectTailForm,
) -> Result<f64> {
    let rest = z - harmonic(m_star as usize - 1, gamma);
    let log = ((m - m_star) as f64 / p_fail).ln();
    let mg = (m as f64).powf(gamma);
    Ok(match tail {
        DirectTailForm::Final => mg * PI / 2.0 * z.sqrt() * rest.sqrt() * log,
        DirectTailForm::Intermediate => {
            let s = if m_star >= 2 { analytic_steps(spec, m_star - 2)? } else { 0 };
            mg * rest * log * (2 * s + 1) as f64
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub m: u64,
    pub qtot_sqd: f64,
    pub qtot_sqdaa: f64,
    pub qtot_aa: f64,
    pub qtot_dir: f64,
    pub m_star: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityCurve {
    pub spec: DistributionSpec,
    pub shots_it: u64,
    pub p_fail: f64,
    pub rows: Vec<CurveRow>,
}

impl ComplexityCurve {
    /// First `m` whose ratio exceeds `threshold`.
    pub fn crossing(&self, threshold: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.ratio > threshold).map(|r| r.m)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["m", "Qtot_sqd", "Qtot_sqdaa", "Qtot_aa", "Qtot_dir", "m_star", "ratio"])?;
        for r in &self.rows {
            wr.write_record([
                r.m.to_string(),
                r.qtot_sqd.to_string(),
                r.qtot_sqdaa.to_string(),
                r.qtot_aa.to_string(),
                r.qtot_dir.to_string(),
                r.m_star.to_string(),
                r.ratio.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn ratio_curve(
    spec: &DistributionSpec,
    ms: impl IntoIterator<Item = u64>,
    shots_it: u64,
    p_fail: f64,
) -> Result<ComplexityCurve> {
    let mut rows = Vec::new();
    for m in ms {
        let sqd = qtot_sqd(spec, m, p_fail)?;
        let aa = qtot_sqdaa(spec, m, shots_it, p_fail)?;
        rows.push(CurveRow {
            m,
            qtot_sqd: sqd,
            qtot_sqdaa: aa.q_tot,
            qtot_aa: aa.q_aa,
            qtot_dir: aa.q_dir,
            m_star: aa.m_star,
            ratio: sqd / aa.q_tot,
        });
    }
    Ok(ComplexityCurve { spec: *spec, shots_it, p_fail, rows })
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y.ln() - my), b + (x - mx) * (x - mx)));
    num / den
}
