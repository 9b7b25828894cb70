//! Anharmonic axial trap: `H0 = p^2/2m + q (k z^2/2 + k' z^4/24)`.
//!
//! H0 is diagonalized in the eigenbasis of its harmonic part. The quartic
//! matrix elements come from ladder-operator algebra, so the primitive matrix
//! is exact and the only truncation is the primitive basis size.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Model constants of the trap, all in atomic units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub mass: f64,
    pub charge: f64,
    /// Quadratic force constant k.
    pub k: f64,
    /// Quartic force constant k'.
    pub k_quart: f64,
    /// Harmonic-oscillator functions used to diagonalize H0 (M).
    pub primitive_size: usize,
    /// Eigenstates kept for the dynamics (D).
    pub dynamical_size: usize,
    /// Qubit register states (N).
    pub computational_size: usize,
}

impl Default for TrapParams {
    /// The 111Cd+ trap: nu = 2.77 MHz, M = 50, D = 32, N = 16.
    fn default() -> Self {
        TrapParams {
            mass: 111.0 * units::AMU,
            charge: 1.0,
            k: 3.5828e-14,
            k_quart: 3.5828e-18,
            primitive_size: 50,
            dynamical_size: 32,
            computational_size: 16,
        }
    }
}

impl TrapParams {
    /// Reduced problem used for routine runs: D = 8, N = 4.
    pub fn desk() -> Self {
        TrapParams {
            dynamical_size: 8,
            computational_size: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d, n) = (self.primitive_size, self.dynamical_size, self.computational_size);
        if n == 0 || n > d || d > m {
            return Err(Error::invalid(format!(
                "basis sizes must satisfy 0 < N <= D <= M, got N={n}, D={d}, M={m}"
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid(format!("force constant k must be > 0, got {}", self.k)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be > 0, got {}", self.mass)));
        }
        if !(self.k_quart >= 0.0 && self.k_quart.is_finite()) {
            return Err(Error::invalid(format!("k' must be >= 0, got {}", self.k_quart)));
        }
        if !(self.charge > 0.0 && self.charge.is_finite()) {
            return Err(Error::invalid(format!("charge must be > 0, got {}", self.charge)));
        }
        Ok(())
    }

    /// Harmonic angular frequency sqrt(q k / m).
    pub fn omega(&self) -> f64 {
        (self.charge * self.k / self.mass).sqrt()
    }

    /// Harmonic length scale sqrt(hbar / 2 m omega).
    pub fn oscillator_length(&self) -> f64 {
        (1.0 / (2.0 * self.mass * self.omega())).sqrt()
    }
}

/// Eigenpairs of H0 and the position/dipole matrices between them.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub params: TrapParams,
    pub omega: f64,
    /// Lowest D eigenenergies, ascending.
    pub energies: Array1<f64>,
    /// M x D eigenvector coefficients in the harmonic primitive basis.
    pub vectors: Array2<f64>,
    /// <j|z|k>, D x D.
    pub z_matrix: Array2<f64>,
    /// q <j|z|k>, D x D.
    pub dipole: Array2<f64>,
}

/// z in the harmonic primitive basis, truncated to `size` functions.
/// The truncation is exact element by element because z only couples n, n+1.
fn primitive_position(size: usize, length: f64) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| {
        if j == i + 1 {
            length * (j as f64).sqrt()
        } else if i == j + 1 {
            length * (i as f64).sqrt()
        } else {
            0.0
        }
    })
}

pub fn solve_trap(params: &TrapParams) -> Result<EigenBasis> {
    params.validate()?;
    let m = params.primitive_size;
    let d = params.dynamical_size;
    let omega = params.omega();
    let length = params.oscillator_length();

    // z^4 between functions < M only visits intermediates < M + 2.
    let padded = primitive_position(m + 2, length);
    let z2 = &padded * &padded;
    let z4 = (&z2 * &z2).view((0, 0), (m, m)).into_owned();
    let quartic = params.charge * params.k_quart / 24.0;
    let mut h0 = z4 * quartic;
    for n in 0..m {
        h0[(n, n)] += omega * (n as f64 + 0.5);
    }
    let h0 = (&h0 + h0.transpose()) * 0.5;

    let eig = h0
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::numerical("diagonalization of H0 did not converge"))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut energies = Array1::zeros(d);
    let mut vectors = Array2::zeros((m, d));
    for (col, &src) in order.iter().take(d).enumerate() {
        energies[col] = eig.eigenvalues[src];
        let v = eig.eigenvectors.column(src);
        let (mut best, mut best_abs) = (0, 0.0);
        for (i, x) in v.iter().enumerate() {
            if x.abs() > best_abs + 1e-14 {
                best = i;
                best_abs = x.abs();
            }
        }
        let sign = if v[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            vectors[[i, col]] = sign * v[i];
        }
    }
    for j in 1..d {
        if energies[j] <= energies[j - 1] {
            return Err(Error::numerical(format!(
                "eigenenergies not strictly ascending at index {j}"
            )));
        }
    }

    let zp = primitive_position(m, length);
    let mut z_matrix = Array2::zeros((d, d));
    for a in 0..d {
        for b in 0..d {
            let mut acc = 0.0;
            for i in 0..m {
                let vi = vectors[[i, a]];
                if vi == 0.0 {
                    continue;
                }
                if i + 1 < m {
                    acc += vi * zp[(i, i + 1)] * vectors[[i + 1, b]];
                }
                if i > 0 {
                    acc += vi * zp[(i, i - 1)] * vectors[[i - 1, b]];
                }
            }
            z_matrix[[a, b]] = acc;
        }
    }
    let z_matrix = (&z_matrix + &z_matrix.t()) * 0.5;
    let dipole = z_matrix.mapv(|z| z * params.charge);

    Ok(EigenBasis {
        params: params.clone(),
        omega,
        energies,
        vectors,
        z_matrix,
        dipole,
    })
}

impl EigenBasis {
    /// Dynamical basis size D.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Computational register size N.
    pub fn computational_size(&self) -> usize {
        self.params.computational_size
    }

    /// Bohr frequency (E_k - E_j)/h in Hz.
    pub fn transition_frequency_hz(&self, j: usize, k: usize) -> f64 {
        units::hartree_to_hz(self.energies[k] - self.energies[j])
    }

    /// Keep only the lowest `d` states; used for few-level reductions.
    pub fn truncated(&self, d: usize) -> Result<EigenBasis> {
        if d == 0 || d > self.dim() {
            return Err(Error::invalid(format!(
                "cannot truncate a {}-state basis to {d}",
                self.dim()
            )));
        }
        let mut params = self.params.clone();
        params.dynamical_size = d;
        params.computational_size = params.computational_size.min(d);
        Ok(EigenBasis {
            params,
            omega: self.omega,
            energies: self.energies.slice(ndarray::s![..d]).to_owned(),
            vectors: self.vectors.slice(ndarray::s![.., ..d]).to_owned(),
            z_matrix: self.z_matrix.slice(ndarray::s![..d, ..d]).to_owned(),
            dipole: self.dipole.slice(ndarray::s![..d, ..d]).to_owned(),
        })
    }
}

/// One line of the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    pub frequency_hz: f64,
    pub dipole: f64,
}

/// All pairs (j, j + delta) with both indices inside the computational register.
pub fn transition_table(basis: &EigenBasis, deltas: &[usize]) -> Result<Vec<Transition>> {
    transition_table_upto(basis, deltas, basis.computational_size())
}

/// As [`transition_table`] but over the lowest `n_states` states.
pub fn transition_table_upto(basis: &EigenBasis, deltas: &[usize], n_states: usize) -> Result<Vec<Transition>> {
    if deltas.is_empty() || deltas.contains(&0) {
        return Err(Error::invalid("transition deltas must be nonempty and nonzero"));
    }
    if n_states > basis.dim() {
        return Err(Error::invalid(format!(
            "{n_states} states requested from a {}-state basis",
            basis.dim()
        )));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_unstable();
    deltas.dedup();
    let mut table = Vec::new();
    for &delta in &deltas {
        for j in 0..n_states.saturating_sub(delta) {
            let k = j + delta;
            table.push(Transition {
                lower: j,
                upper: k,
                frequency_hz: basis.transition_frequency_hz(j, k),
                dipole: basis.dipole[[j, k]],
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic() -> TrapParams {
        TrapParams {
            k_quart: 0.0,
            ..TrapParams::default()
        }
    }

    #[test]
    fn harmonic_ladder_is_equally_spaced() {
        let basis = solve_trap(&harmonic()).unwrap();
        let w = basis.omega;
        for j in 0..basis.dim() {
            let exact = w * (j as f64 + 0.5);
            assert!((basis.energies[j] - exact).abs() / exact < 1e-10);
        }
        for j in 0..basis.dim() - 1 {
            let gap = basis.energies[j + 1] - basis.energies[j];
            assert!((gap - w).abs() / w < 1e-10);
        }
    }

    #[test]
    fn harmonic_dipole_follows_ladder_algebra_and_parity() {
        let p = harmonic();
        let basis = solve_trap(&p).unwrap();
        let l = p.oscillator_length();
        for j in 0..basis.dim() {
            for k in 0..basis.dim() {
                let mu = basis.dipole[[j, k]];
                if (j as i64 - k as i64).abs() % 2 == 0 {
                    assert!(mu.abs() < 1e-8, "parity-forbidden mu[{j}][{k}] = {mu}");
                }
            }
            if j + 1 < basis.dim() {
                let exact = p.charge * l * ((j + 1) as f64).sqrt();
                let got = basis.dipole[[j, j + 1]];
                assert!((got - exact).abs() / exact < 1e-8);
            }
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_with_positive_leading_coefficient() {
        let basis = solve_trap(&TrapParams::default()).unwrap();
        let g = basis.vectors.t().dot(&basis.vectors);
        for ((i, j), x) in g.indexed_iter() {
            let t = if i == j { 1.0 } else { 0.0 };
            assert!((x - t).abs() < 1e-10);
        }
        for col in basis.vectors.columns() {
            let lead = col
                .iter()
                .cloned()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(lead > 0.0);
        }
        for ((i, j), x) in basis.z_matrix.indexed_iter() {
            assert!((x - basis.z_matrix[[j, i]]).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn anharmonic_gaps_increase() {
        let basis = solve_trap(&TrapParams::default()).unwrap();
        let table = transition_table(&basis, &[1]).unwrap();
        for w in table.windows(2) {
            assert!(w[1].frequency_hz > w[0].frequency_hz);
        }
    }

    #[test]
    fn transition_counts() {
        let basis = solve_trap(&TrapParams::default()).unwrap();
        let t1 = transition_table(&basis, &[1]).unwrap();
        assert_eq!(t1.len(), 15);
        assert_eq!((t1[0].lower, t1[0].upper), (0, 1));
        assert_eq!((t1[14].lower, t1[14].upper), (14, 15));
        let t3 = transition_table(&basis, &[3]).unwrap();
        assert_eq!(t3.len(), 13);
        assert_eq!((t3[12].lower, t3[12].upper), (12, 15));
        assert_eq!(transition_table(&basis, &[1, 3]).unwrap().len(), 28);
        assert!(transition_table(&basis, &[]).is_err());
    }

    #[test]
    fn rejects_inconsistent_sizes() {
        let p = TrapParams {
            dynamical_size: 60,
            ..TrapParams::default()
        };
        assert!(matches!(solve_trap(&p), Err(Error::InvalidInput(_))));
        let p = TrapParams {
            computational_size: 0,
            ..TrapParams::default()
        };
        assert!(solve_trap(&p).is_err());
        let p = TrapParams {
            k: -1.0,
            ..TrapParams::default()
        };
        assert!(solve_trap(&p).is_err());
    }

    #[test]
    fn solve_is_deterministic() {
        let a = solve_trap(&TrapParams::default()).unwrap();
        let b = solve_trap(&TrapParams::default()).unwrap();
        assert_eq!(a.dipole, b.dipole);
        assert_eq!(a.energies, b.energies);
    }
}
