//! Grid wavefunction <-> qubit amplitudes. Index j labels both the grid point
//! x_j and the trap eigenstate chi_j.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::gridsim::{Grid, GridWavepacket};
use crate::linalg::{self, CVector, C64};

pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QubitAmplitudes {
    pub c: CVector,
    pub delta_x: f64,
}

impl QubitAmplitudes {
    pub fn new(c: CVector, delta_x: f64) -> Result<Self> {
        let norm = linalg::vector_norm_sqr(c.as_slice().unwrap());
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!("qubit amplitudes have norm {norm}, expected 1")));
        }
        if !(delta_x > 0.0) {
            return Err(Error::invalid("grid spacing must be > 0"));
        }
        Ok(QubitAmplitudes { c, delta_x })
    }

    pub fn populations(&self) -> Array1<f64> {
        self.c.mapv(|z| z.norm_sqr())
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Basis vector e_j.
    pub fn basis_state(n: usize, j: usize, delta_x: f64) -> Result<Self> {
        if j >= n {
            return Err(Error::invalid(format!("state {j} outside a {n}-state register")));
        }
        let mut c = CVector::zeros(n);
        c[j] = C64::new(1.0, 0.0);
        Self::new(c, delta_x)
    }
}

/// `c_j = psi(x_j) sqrt(dx)`.
pub fn encode(psi: &GridWavepacket) -> Result<QubitAmplitudes> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid(format!(
            "packet must be normalized on its grid before encoding (norm {norm})"
        )));
    }
    let s = psi.grid.delta_x.sqrt();
    QubitAmplitudes::new(psi.amplitudes.mapv(|z| z * s), psi.grid.delta_x)
}

/// Localization probabilities `|psi(x_j)|^2 = |c_j|^2 / dx`.
pub fn decode(c: &QubitAmplitudes) -> Array1<f64> {
    decode_amplitudes(&c.c, c.delta_x)
}

/// [`decode`] for raw (possibly unnormalized) register amplitudes, as read
/// out after a pulse that leaks population outside the register.
pub fn decode_amplitudes(c: &CVector, delta_x: f64) -> Array1<f64> {
    c.mapv(|z| z.norm_sqr() / delta_x)
}

/// Inverse of [`encode`] back onto a grid.
pub fn to_wavepacket(c: &QubitAmplitudes, grid: &Grid) -> Result<GridWavepacket> {
    if grid.n != c.len() || (grid.delta_x - c.delta_x).abs() > 1e-15 * grid.delta_x.abs() {
        return Err(Error::invalid("grid does not match the register"));
    }
    let s = 1.0 / c.delta_x.sqrt();
    GridWavepacket::new(c.c.mapv(|z| z * s), grid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridsim::{gaussian_packet, make_grid};
    use proptest::prelude::*;

    #[test]
    fn point_packet_maps_to_basis_vector() {
        let g = make_grid(-4.0, 4.0, 16).unwrap();
        let mut amps = CVector::zeros(16);
        amps[5] = C64::new(1.0 / g.delta_x.sqrt(), 0.0);
        let psi = GridWavepacket::new(amps, g).unwrap();
        let c = encode(&psi).unwrap();
        for j in 0..16 {
            let expect = if j == 5 { 1.0 } else { 0.0 };
            assert!((c.c[j] - C64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn decode_examples() {
        let e0 = QubitAmplitudes::basis_state(16, 0, 0.5).unwrap();
        let p = decode(&e0);
        assert_eq!(p[0], 2.0);
        assert!(p.iter().skip(1).all(|&x| x == 0.0));
        let uniform = QubitAmplitudes::new(CVector::from_elem(16, C64::new(0.25, 0.0)), 0.5).unwrap();
        assert!(decode(&uniform).iter().all(|&x| (x - 0.125).abs() < 1e-15));
    }

    #[test]
    fn unnormalized_input_rejected() {
        let g = make_grid(-4.0, 4.0, 16).unwrap();
        let psi = GridWavepacket::new(CVector::from_elem(16, C64::new(1.0, 0.0)), g).unwrap();
        assert!(encode(&psi).is_err());
        assert!(QubitAmplitudes::new(CVector::from_elem(4, C64::new(1.0, 0.0)), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(sigma in 0.2f64..3.0, x0 in -2.0f64..2.0, n_exp in 2u32..7) {
            let n = 1usize << n_exp;
            let g = make_grid(-4.0, 4.0, n).unwrap();
            let psi = gaussian_packet(&g, sigma, x0).unwrap();
            let c = encode(&psi).unwrap();
            let probs = decode(&c);
            for (p, d) in probs.iter().zip(psi.density().iter()) {
                prop_assert!((p - d).abs() < 1e-12);
            }
            let total: f64 = probs.iter().sum::<f64>() * g.delta_x;
            prop_assert!((total - 1.0).abs() < 1e-12);
            let back = encode(&to_wavepacket(&c, &g).unwrap()).unwrap();
            for (a, b) in back.c.iter().zip(c.c.iter()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
