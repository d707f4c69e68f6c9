//! Pauli strings, Pauli-sum Hamiltonians and their computational-basis
//! matrix elements.
//!
//! A string is stored as an X mask and a Z mask over at most 64 qubits;
//! `Y` sets both. Acting on a basis state `|b⟩` it flips the bits in the X
//! mask and multiplies by `i^{#Y} · (-1)^{popcount(zmask & b)}`, which is
//! all that is needed for matrix elements and statevector products.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register supported by the bit-mask representation.
pub const MAX_QUBITS: usize = 64;
/// Guard for the dense Kronecker oracle.
pub const MAX_DENSE_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn matrix(self) -> DMatrix<Complex64> {
        let (o, l, i) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        let entries = match self {
            Pauli::I => [l, o, o, l],
            Pauli::X => [o, l, l, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [l, o, o, -l],
        };
        DMatrix::from_row_slice(2, 2, &entries)
    }
}

/// Power of `i` (0..4) picked up by a Pauli string acting on a basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuarterTurns(pub u8);

impl QuarterTurns {
    pub fn to_complex(self) -> Complex64 {
        match self.0 & 3 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

/// Computational basis state of an `n`-qubit register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bitstring {
    value: u64,
    n: u32,
}

impl Bitstring {
    pub fn new(value: u64, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!("qubit count {n} outside 1..=64")));
        }
        if n < 64 && value >> n != 0 {
            return Err(Error::IndexOutOfRange { index: value, n });
        }
        Ok(Self { value, n: n as u32 })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:0width$b}", self.value, width = self.n as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x_mask: u64,
    z_mask: u64,
}

impl PauliString {
    pub fn from_masks(n: usize, x_mask: u64, z_mask: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!("qubit count {n} outside 1..=64")));
        }
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if (x_mask | z_mask) & !full != 0 {
            return Err(Error::InvalidParameter("mask bits beyond qubit count".into()));
        }
        Ok(Self { n, x_mask, z_mask })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_masks(n, 0, 0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.z_mask
    }

    pub fn support(&self) -> u64 {
        self.x_mask | self.z_mask
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        let x = self.x_mask >> qubit & 1 == 1;
        let z = self.z_mask >> qubit & 1 == 1;
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// `Some(q)` when the string is a single `Z` on qubit `q`.
    pub fn single_z(&self) -> Option<usize> {
        (self.x_mask == 0 && self.z_mask.count_ones() == 1).then(|| self.z_mask.trailing_zeros() as usize)
    }

    pub fn word(&self) -> String {
        (0..self.n).rev().map(|q| self.get(q).as_char()).collect()
    }

    /// `P|b⟩ = phase · |b ⊕ xmask⟩`.
    #[inline]
    pub fn act(&self, basis: u64) -> (u64, QuarterTurns) {
        let y = (self.x_mask & self.z_mask).count_ones();
        let signs = (self.z_mask & basis).count_ones();
        (basis ^ self.x_mask, QuarterTurns(((y + 2 * signs) & 3) as u8))
    }

    /// Whether the two strings commute (even number of anticommuting sites).
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask);
        anti.count_ones().is_multiple_of(2)
    }

    /// Dense `2^n × 2^n` matrix built by Kronecker products of 2×2 factors.
    pub fn dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for q in (0..self.n).rev() {
            m = m.kronecker(&self.get(q).matrix());
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(word: &str) -> Result<Self> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if n > MAX_QUBITS {
            return Err(Error::TooLarge { n, max: MAX_QUBITS });
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (pos, c) in chars.into_iter().enumerate() {
            let q = n - 1 - pos;
            match Pauli::from_char(c) {
                Some(Pauli::I) => {}
                Some(Pauli::X) => x |= 1 << q,
                Some(Pauli::Y) => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                Some(Pauli::Z) => z |= 1 << q,
                None => {
                    return Err(Error::Parse { line: 0, msg: format!("invalid Pauli character {c:?}") });
                }
            }
        }
        Self::from_masks(n, x, z)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.word())
    }
}

impl Ord for PauliString {
    /// Lexicographic on the word (`I < X < Y < Z`, leftmost character first).
    fn cmp(&self, other: &Self) -> Ordering {
        self.n.cmp(&other.n).then_with(|| {
            for q in (0..self.n).rev() {
                match self.get(q).cmp(&other.get(q)) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.word())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = String::deserialize(d)?;
        w.parse().map_err(serde::de::Error::custom)
    }
}

/// Weighted sum of Pauli strings with real coefficients.
///
/// Terms are kept merged (no repeated string) and sorted lexicographically
/// by word, which is the order used for Trotter products and for the
/// reduced term count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    n: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliHamiltonian {
    pub fn new(terms: Vec<(f64, PauliString)>) -> Result<Self> {
        let n = terms.first().map(|(_, p)| p.n()).ok_or(Error::EmptyInput)?;
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (c, p) in terms {
            if p.n() != n {
                return Err(Error::DimensionMismatch { expected: n, found: p.n() });
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite coefficient for {p}")));
            }
            *merged.entry(p).or_insert(0.0) += c;
        }
        Ok(Self { n, terms: merged.into_iter().map(|(p, c)| (c, p)).collect() })
    }

    /// Hamiltonian whose computational-basis diagonal is `diag`
    /// (length `2^n`), expanded into Z strings by a Walsh–Hadamard transform.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let len = diag.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParameter("diagonal length must be a power of two ≥ 2".into()));
        }
        let n = len.trailing_zeros() as usize;
        let mut c = diag.to_vec();
        let mut h = 1;
        while h < len {
            for i in (0..len).step_by(2 * h) {
                for j in i..i + h {
                    let (a, b) = (c[j], c[j + h]);
                    c[j] = a + b;
                    c[j + h] = a - b;
                }
            }
            h *= 2;
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut terms = Vec::new();
        for (mask, v) in c.into_iter().enumerate() {
            let v = v / len as f64;
            if v.abs() > 1e-15 * scale / len as f64 {
                terms.push((v, PauliString::from_masks(n, 0, mask as u64)?));
            }
        }
        if terms.is_empty() {
            terms.push((0.0, PauliString::identity(n)?));
        }
        Self::new(terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// λ = Σ|c_i|.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    /// Serialize to the line format accepted by [`parse_hamiltonian`],
    /// with 17 significant digits per coefficient.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.terms {
            out.push_str(&format!("{c:.16e} {p}\n"));
        }
        out
    }

    fn check_bits(&self, z: &Bitstring) -> Result<()> {
        if z.n() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: z.n() });
        }
        Ok(())
    }

    /// `⟨z|H|z'⟩` by parity rules.
    pub fn matrix_element(&self, z: &Bitstring, zp: &Bitstring) -> Result<Complex64> {
        self.check_bits(z)?;
        self.check_bits(zp)?;
        Ok(self.element_unchecked(z.value(), zp.value()))
    }

    #[inline]
    pub(crate) fn element_unchecked(&self, row: u64, col: u64) -> Complex64 {
        let flip = row ^ col;
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, p) in &self.terms {
            if p.x_mask() == flip {
                let (_, phase) = p.act(col);
                acc += phase.to_complex() * *c;
            }
        }
        acc
    }

    /// `H|ψ⟩` on a full amplitude vector of length `2^n`.
    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        if amps.len() != 1usize << self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: amps.len().trailing_zeros() as usize });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (c, p) in &self.terms {
            for (j, a) in amps.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let (k, phase) = p.act(j as u64);
                out[k as usize] += phase.to_complex() * *a * *c;
            }
        }
        Ok(out)
    }

    /// Dense matrix `Σ c_i P_i` via Kronecker products; an independent
    /// check on the parity-rule path, limited to 14 qubits.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        if self.n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge { n: self.n, max: MAX_DENSE_QUBITS });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (c, p) in &self.terms {
            m += p.dense() * Complex64::new(*c, 0.0);
        }
        Ok(m)
    }

    /// Diagonal entries `⟨b|H|b⟩` for every basis state.
    pub fn diagonal(&self) -> Vec<f64> {
        let dim = 1usize << self.n;
        let diag_terms: Vec<_> = self.terms.iter().filter(|(_, p)| p.x_mask() == 0).collect();
        (0..dim as u64)
            .map(|b| {
                diag_terms
                    .iter()
                    .map(|(c, p)| if (p.z_mask() & b).count_ones() % 2 == 0 { *c } else { -*c })
                    .sum()
            })
            .collect()
    }

    /// Reduced term count L′ over the canonical (lexicographic) term order.
    pub fn reduced_term_count(&self) -> usize {
        let strings: Vec<&PauliString> = self.terms.iter().map(|(_, p)| p).collect();
        reduced_term_count_in_order(&strings)
    }
}

/// Reduced term count L′ over strings in the given order.
///
/// Consecutive strings are grouped while each new string overlaps the
/// group's support and agrees with the group's Pauli on every overlapping
/// qubit, so one layer of single-qubit basis changes serves the whole group.
/// Identity strings need no rotation and are not counted.
pub fn reduced_term_count_in_order(strings: &[&PauliString]) -> usize {
    let mut count = 0;
    // group basis as (x, z) masks over the group's support
    let mut group: Option<(u64, u64)> = None;
    for p in strings.iter().filter(|p| !p.is_identity()) {
        let joins = match group {
            Some((gx, gz)) => {
                let overlap = (gx | gz) & p.support();
                overlap != 0 && (gx & overlap) == (p.x_mask() & overlap) && (gz & overlap) == (p.z_mask() & overlap)
            }
            None => false,
        };
        if joins {
            let (gx, gz) = group.unwrap();
            group = Some((gx | p.x_mask(), gz | p.z_mask()));
        } else {
            count += 1;
            group = Some((p.x_mask(), p.z_mask()));
        }
    }
    count
}

/// Parse the `<coefficient> <pauli word>` line format; `#` starts a comment
/// line. Duplicate words are merged by adding coefficients.
pub fn parse_hamiltonian(text: &str) -> Result<PauliHamiltonian> {
    let mut terms = Vec::new();
    let mut n: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (coef, word) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(w), None) => (c, w),
            _ => {
                return Err(Error::Parse { line: line_no, msg: "expected \"<coefficient> <pauli word>\"".into() });
            }
        };
        let c: f64 = coef
            .parse()
            .map_err(|_| Error::Parse { line: line_no, msg: format!("malformed coefficient {coef:?}") })?;
        if !c.is_finite() {
            return Err(Error::Parse { line: line_no, msg: format!("non-finite coefficient {coef:?}") });
        }
        let p: PauliString = word.parse().map_err(|e| match e {
            Error::Parse { msg, .. } => Error::Parse { line: line_no, msg },
            other => other,
        })?;
        match n {
            None => n = Some(p.n()),
            Some(m) if m != p.n() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("inconsistent word length {} (expected {m})", p.n()),
                });
            }
            _ => {}
        }
        terms.push((c, p));
    }
    if terms.is_empty() {
        return Err(Error::EmptyInput);
    }
    PauliHamiltonian::new(terms)
}

impl FromStr for PauliHamiltonian {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_hamiltonian(s)
    }
}
