//! Projection of a Pauli Hamiltonian onto a span of basis states and the
//! ground-state solve inside that span.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Bitstring, PauliHamiltonian};

const HERMITIAN_TOL: f64 = 1e-10;

/// Ordered, duplicate-free list of basis states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subspace {
    basis: Vec<Bitstring>,
}

impl Subspace {
    pub fn new(basis: Vec<Bitstring>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = HashSet::new();
        for b in &basis {
            if !seen.insert(b.value()) {
                return Err(Error::InvalidParameter(format!("duplicate basis state {b}")));
            }
            if b.n() != basis[0].n() {
                return Err(Error::DimensionMismatch { expected: basis[0].n(), found: b.n() });
            }
        }
        Ok(Self { basis })
    }

    pub fn basis(&self) -> &[Bitstring] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n(&self) -> usize {
        self.basis[0].n()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSolution {
    pub energy: f64,
    pub groundvector: Vec<Complex64>,
    pub subspace: Subspace,
}

/// `(H_S)_{ij} = ⟨z_i|H|z_j⟩`.
pub fn project_hamiltonian(h: &PauliHamiltonian, s: &Subspace) -> Result<DMatrix<Complex64>> {
    if s.n() != h.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: s.n() });
    }
    let dim = s.dim();
    let pos: HashMap<u64, usize> = s.basis().iter().enumerate().map(|(i, b)| (b.value(), i)).collect();
    let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (j, zj) in s.basis().iter().enumerate() {
        for (c, p) in h.terms() {
            let (row, phase) = p.act(zj.value());
            if let Some(&i) = pos.get(&row) {
                m[(i, j)] += phase.to_complex() * *c;
            }
        }
    }
    Ok(m)
}

/// Lowest eigenpair of a Hermitian matrix.
pub fn lowest_eigenpair(hs: &DMatrix<Complex64>) -> Result<(f64, Vec<Complex64>)> {
    let dim = hs.nrows();
    if dim == 0 || hs.ncols() != dim {
        return Err(Error::InvalidParameter("subspace matrix must be square and nonempty".into()));
    }
    let scale = hs.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let asym = (hs - hs.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(asym));
    }
    if dim == 1 {
        return Ok((hs[(0, 0)].re, vec![Complex64::new(1.0, 0.0)]));
    }
    if hs.iter().all(|z| z.im == 0.0) {
        let re = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (hs[(i, j)].re + hs[(j, i)].re));
        let eig = re.symmetric_eigen();
        let imin = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(imin);
        let norm = v.norm();
        return Ok((eig.eigenvalues[imin], v.iter().map(|x| Complex64::new(x / norm, 0.0)).collect()));
    }
    let sym = (hs + hs.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let (imin, emin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, be), (i, e)| if *e < be { (i, *e) } else { (bi, be) });
    let v = eig.eigenvectors.column(imin);
    let norm = v.norm();
    Ok((emin, v.iter().map(|z| z / norm).collect()))
}

pub fn solve_subspace(hs: &DMatrix<Complex64>, subspace: Subspace) -> Result<SubspaceSolution> {
    if hs.nrows() != subspace.dim() {
        return Err(Error::DimensionMismatch { expected: subspace.dim(), found: hs.nrows() });
    }
    let (energy, groundvector) = lowest_eigenpair(hs)?;
    Ok(SubspaceSolution { energy, groundvector, subspace })
}

/// Project and solve in one call.
pub fn solve(h: &PauliHamiltonian, subspace: Subspace) -> Result<SubspaceSolution> {
    let hs = project_hamiltonian(h, &subspace)?;
    solve_subspace(&hs, subspace)
}

pub fn energy_delta(prev: &SubspaceSolution, cur: &SubspaceSolution) -> f64 {
    (prev.energy - cur.energy).abs()
}
