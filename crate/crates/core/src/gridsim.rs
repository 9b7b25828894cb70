//! The simulated one-particle system, its spatial grid, and the split-operator
//! construction of the elementary evolution operator `U_s(dt)`.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

/// Potential of the simulated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Potential {
    /// m omega^2 x^2 / 2 (the mass is the system mass).
    Harmonic { omega: f64 },
    /// sum_i c_i x^i
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSystem {
    pub mass: f64,
    pub potential: Potential,
    pub label: String,
}

impl Default for SimSystem {
    /// m_s = 1, V(x) = x^2/2.
    fn default() -> Self {
        SimSystem {
            mass: 1.0,
            potential: Potential::Harmonic { omega: 1.0 },
            label: "harmonic".into(),
        }
    }
}

impl SimSystem {
    pub fn potential_at(&self, x: f64) -> f64 {
        match &self.potential {
            Potential::Harmonic { omega } => 0.5 * self.mass * omega * omega * x * x,
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
        }
    }

    pub fn harmonic_frequency(&self) -> Option<f64> {
        match self.potential {
            Potential::Harmonic { omega } => Some(omega),
            Potential::Polynomial { .. } => None,
        }
    }

    fn sampled_potential(&self, grid: &Grid) -> Result<Array1<f64>> {
        let v: Array1<f64> = grid.points.iter().map(|&x| self.potential_at(x)).collect();
        if let Some(j) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "potential is not finite at grid point x = {}",
                grid.points[j]
            )));
        }
        Ok(v)
    }
}

/// Uniform grid with `x_j = x_min + (j + 1) dx`, so `x_min` itself is excluded
/// and the last point is `x_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub delta_x: f64,
    pub points: Vec<f64>,
}

pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid> {
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::invalid(format!(
            "grid needs x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
    }
    if !n.is_power_of_two() {
        log::warn!("grid size {n} is not a power of two; the Fourier steps are still exact DFTs");
    }
    let delta_x = (x_max - x_min) / n as f64;
    let mut points: Vec<f64> = (0..n).map(|j| x_min + (j + 1) as f64 * delta_x).collect();
    points[n - 1] = x_max;
    Ok(Grid {
        x_min,
        x_max,
        n,
        delta_x,
        points,
    })
}

impl Grid {
    /// Angular wave numbers in DFT order: 0, 1, ..., N/2, then negative.
    pub fn wave_numbers(&self) -> Vec<f64> {
        let n = self.n;
        let dk = std::f64::consts::TAU / (n as f64 * self.delta_x);
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                m * dk
            })
            .collect()
    }
}

/// Complex amplitudes psi(x_j) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavepacket {
    pub amplitudes: CVector,
    pub grid: Grid,
}

impl GridWavepacket {
    pub fn new(amplitudes: CVector, grid: Grid) -> Result<Self> {
        if amplitudes.len() != grid.n {
            return Err(Error::invalid(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.n
            )));
        }
        Ok(GridWavepacket { amplitudes, grid })
    }

    /// sum |psi_j|^2 dx
    pub fn norm(&self) -> f64 {
        linalg::vector_norm_sqr(self.amplitudes.as_slice().unwrap()) * self.grid.delta_x
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cannot normalize a zero or non-finite packet"));
        }
        let s = 1.0 / norm.sqrt();
        Ok(GridWavepacket {
            amplitudes: self.amplitudes.mapv(|z| z * s),
            grid: self.grid.clone(),
        })
    }

    /// |psi(x_j)|^2
    pub fn density(&self) -> Array1<f64> {
        self.amplitudes.mapv(|z| z.norm_sqr())
    }

    /// Probability weight |psi|^2 dx on the two edge points.
    pub fn boundary_weight(&self) -> f64 {
        let n = self.grid.n;
        (self.amplitudes[0].norm_sqr() + self.amplitudes[n - 1].norm_sqr()) * self.grid.delta_x
    }

    /// sum x_j |psi_j|^2 dx
    pub fn mean_position(&self) -> f64 {
        self.grid
            .points
            .iter()
            .zip(self.amplitudes.iter())
            .map(|(x, z)| x * z.norm_sqr())
            .sum::<f64>()
            * self.grid.delta_x
    }
}

/// Gaussian `exp(-(x - x0)^2 / 2 sigma)` sampled on the grid and renormalized
/// so that `sum |psi_j|^2 dx = 1`. For a harmonic system with m = omega = 1,
/// `sigma = 1` is the coherent state.
pub fn gaussian_packet(grid: &Grid, sigma: f64, x0: f64) -> Result<GridWavepacket> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("packet width must be > 0, got {sigma}")));
    }
    let prefactor = (1.0 / (std::f64::consts::PI * sigma)).powf(0.25);
    let amps: CVector = grid
        .points
        .iter()
        .map(|&x| C64::new(prefactor * (-(x - x0).powi(2) / (2.0 * sigma)).exp(), 0.0))
        .collect();
    let packet = GridWavepacket::new(amps, grid.clone())?.normalized()?;
    let leak = packet.boundary_weight();
    if leak > 1e-6 {
        log::warn!("Gaussian packet (sigma={sigma}, x0={x0}) leaks off the grid: edge weight {leak:.3e}");
    }
    Ok(packet)
}

/// Precomputed Strang splitting for one sub-step:
/// `exp(-iV dt/2) F^-1 exp(-iT dt) F exp(-iV dt/2)`.
pub struct SplitOperator {
    half_potential: CVector,
    kinetic: CVector,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl SplitOperator {
    pub fn new(system: &SimSystem, grid: &Grid, dt: f64) -> Result<Self> {
        if !(system.mass > 0.0) {
            return Err(Error::invalid("simulated mass must be > 0"));
        }
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sub-step must be >= 0, got {dt}")));
        }
        let v = system.sampled_potential(grid)?;
        let half_potential = v.mapv(|v| C64::from_polar(1.0, -0.5 * v * dt));
        let kinetic: CVector = grid
            .wave_numbers()
            .iter()
            .map(|k| C64::from_polar(1.0, -k * k / (2.0 * system.mass) * dt))
            .collect();
        let mut planner = FftPlanner::new();
        Ok(SplitOperator {
            half_potential,
            kinetic,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
            n: grid.n,
        })
    }

    /// Advance `psi` by one sub-step in place.
    pub fn apply(&self, psi: &mut [C64]) {
        debug_assert_eq!(psi.len(), self.n);
        let scale = 1.0 / self.n as f64;
        for (z, p) in psi.iter_mut().zip(self.half_potential.iter()) {
            *z *= p;
        }
        self.forward.process(psi);
        for (z, p) in psi.iter_mut().zip(self.kinetic.iter()) {
            *z *= p * scale;
        }
        self.inverse.process(psi);
        for (z, p) in psi.iter_mut().zip(self.half_potential.iter()) {
            *z *= p;
        }
    }
}

pub fn split_step(psi: &GridWavepacket, system: &SimSystem, dt: f64) -> Result<GridWavepacket> {
    let op = SplitOperator::new(system, &psi.grid, dt)?;
    let mut out = psi.clone();
    op.apply(out.amplitudes.as_slice_mut().unwrap());
    Ok(out)
}

/// How a [`GateMatrix`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateProvenance {
    /// `(U_s(delta_t / K))^K` from the split-operator recursion.
    SplitOperator {
        delta_t: f64,
        substeps: usize,
        sub_step: f64,
        potential: String,
    },
    /// Projected interaction-picture evolution produced by a control field.
    Realized { t_pulse: f64, n_steps: usize },
    /// Supplied directly.
    External,
}

/// N x N gate acting on the qubit amplitudes `c_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    pub entries: CMatrix,
    pub provenance: GateProvenance,
}

impl GateMatrix {
    pub fn new(entries: CMatrix, provenance: GateProvenance) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::invalid("gate matrix must be square and nonempty"));
        }
        Ok(GateMatrix { entries, provenance })
    }

    pub fn identity(n: usize) -> Self {
        GateMatrix {
            entries: linalg::identity(n),
            provenance: GateProvenance::External,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn unitarity_deviation(&self) -> f64 {
        linalg::unitarity_deviation(&self.entries.view())
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.entries.dot(v)
    }

    pub fn power(&self, p: usize) -> CMatrix {
        linalg::matrix_power(&self.entries.view(), p)
    }

    /// Time step of a split-operator gate.
    pub fn delta_t(&self) -> Option<f64> {
        match self.provenance {
            GateProvenance::SplitOperator { delta_t, .. } => Some(delta_t),
            _ => None,
        }
    }
}

/// Unitarity tolerance for a constructed gate; beyond it construction fails.
pub const GATE_UNITARITY_LIMIT: f64 = 1e-8;

/// `U_s(delta_t) = (U_s(delta_t / K))^K`, column j being the image of the
/// unit vector e_j. Acting on `c_j = psi(x_j) sqrt(dx)` and on `psi(x_j)`
/// alike, since the map is linear.
pub fn elementary_gate(system: &SimSystem, grid: &Grid, delta_t: f64, k: usize) -> Result<GateMatrix> {
    if k == 0 {
        return Err(Error::invalid("substep count K must be >= 1"));
    }
    let sub_step = delta_t / k as f64;
    let op = SplitOperator::new(system, grid, sub_step)?;
    let n = grid.n;
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![C64::new(0.0, 0.0); n];
            col[j] = C64::new(1.0, 0.0);
            for _ in 0..k {
                op.apply(&mut col);
            }
            col
        })
        .collect();
    let mut entries = Array2::zeros((n, n));
    for (j, col) in columns.into_iter().enumerate() {
        entries.column_mut(j).assign(&Array1::from(col));
    }
    let gate = GateMatrix {
        entries,
        provenance: GateProvenance::SplitOperator {
            delta_t,
            substeps: k,
            sub_step,
            potential: system.label.clone(),
        },
    };
    let dev = gate.unitarity_deviation();
    if dev > GATE_UNITARITY_LIMIT {
        return Err(Error::numerical(format!(
            "split-operator gate breaks unitarity: max |U^+U - 1| = {dev:.3e}"
        )));
    }
    Ok(gate)
}

/// psi after each of `n_p` gate applications, starting with psi0 itself.
pub fn classic_propagate(psi0: &GridWavepacket, gate: &GateMatrix, n_p: usize) -> Result<Vec<GridWavepacket>> {
    if gate.dim() != psi0.grid.n {
        return Err(Error::invalid(format!(
            "gate is {}x{} but the packet has {} points",
            gate.dim(),
            gate.dim(),
            psi0.grid.n
        )));
    }
    let mut out = Vec::with_capacity(n_p + 1);
    out.push(psi0.clone());
    for _ in 0..n_p {
        let next = gate.apply(&out.last().unwrap().amplitudes);
        out.push(GridWavepacket {
            amplitudes: next,
            grid: psi0.grid.clone(),
        });
    }
    Ok(out)
}

/// Squared-width parameter of a Gaussian released in a harmonic well:
/// `s(t) = s0 cos^2(wt) + (a^2/s0) sin^2(wt)` with `a = 1/(m w)` the coherent width.
pub fn harmonic_width(sigma: f64, mass: f64, omega: f64, t: f64) -> f64 {
    let a = 1.0 / (mass * omega);
    let (s, c) = (omega * t).sin_cos();
    sigma * c * c + a * a / sigma * s * s
}

/// Exact `|psi(x, t)|` of a Gaussian (released at rest) in the harmonic well,
/// sampled on the grid and renormalized there. Phases are dropped; only the
/// density is meaningful.
pub fn analytic_coherent_evolution(
    system: &SimSystem,
    grid: &Grid,
    sigma: f64,
    x0: f64,
    t: f64,
) -> Result<GridWavepacket> {
    let omega = system
        .harmonic_frequency()
        .ok_or_else(|| Error::invalid("analytic evolution needs a harmonic potential"))?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("packet width must be > 0"));
    }
    let center = x0 * (omega * t).cos();
    let width = harmonic_width(sigma, system.mass, omega, t);
    let amps: CVector = grid
        .points
        .iter()
        .map(|&x| C64::new((-(x - center).powi(2) / (2.0 * width)).exp(), 0.0))
        .collect();
    GridWavepacket::new(amps, grid.clone())?.normalized()
}

/// Densities `|psi_j|^2` of a list of packets stacked as rows.
pub fn density_rows(packets: &[GridWavepacket]) -> Array2<f64> {
    let n = packets.first().map(|p| p.grid.n).unwrap_or(0);
    let mut out = Array2::zeros((packets.len(), n));
    for (mut row, p) in out.axis_iter_mut(Axis(0)).zip(packets) {
        row.assign(&p.density());
    }
    out
}
