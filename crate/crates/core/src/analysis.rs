//! Post-processing of fields and simulated runs: spectra, band-pass
//! filtering, mean positions, fidelity decay and periodicity.

use ndarray::Array1;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::gridsim::{GateMatrix, Grid};
use crate::linalg::{matrix_power, CMatrix, CVector, C64};
use crate::propagator::{
    outer, step_operators_with, unit_vector, DissipationModel, Flow, InteractionFrame, QuantumState,
};
use crate::trap::{transition_table, EigenBasis};
use crate::units;

/// Power spectrum `|S(nu)|^2` of a field, `S = dt * DFT(E)`.
#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    /// Non-negative frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Power normalized to a peak of 1.
    pub power: Vec<f64>,
    /// Bin width, Hz.
    pub resolution: f64,
    /// `int E^2 dt` from the samples.
    pub fluence: f64,
    /// The same quantity from the two-sided spectrum, `dnu sum |S|^2`.
    pub spectral_fluence: f64,
}

impl Spectrum {
    /// Relative Parseval mismatch.
    pub fn parseval_error(&self) -> f64 {
        if self.fluence == 0.0 {
            return self.spectral_fluence.abs();
        }
        (self.spectral_fluence - self.fluence).abs() / self.fluence
    }

    /// Local maxima whose power exceeds `threshold` (relative to the peak), Hz.
    pub fn peaks(&self, threshold: f64) -> Vec<f64> {
        let p = &self.power;
        (1..p.len().saturating_sub(1))
            .filter(|&k| p[k] >= threshold && p[k] > p[k - 1] && p[k] >= p[k + 1])
            .map(|k| self.frequencies[k])
            .collect()
    }
}

fn dft(samples: &[f64]) -> Vec<C64> {
    let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn idft(buf: &mut [C64]) {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= s);
}

/// Spectrum of the raw samples; no window (the envelope already vanishes at
/// the edges).
pub fn spectrum(field: &ControlField) -> Spectrum {
    let e = field.samples();
    let m = e.len();
    let dt = field.dt();
    let s: Vec<C64> = dft(e).into_iter().map(|z| z * dt).collect();
    let dnu_au = 1.0 / (m as f64 * dt);
    let spectral_fluence = dnu_au * s.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let fluence = dt * e.iter().map(|x| x * x).sum::<f64>();
    let half = m / 2;
    let mut power: Vec<f64> = s[..=half].iter().map(|z| z.norm_sqr()).collect();
    let peak = power.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        power.iter_mut().for_each(|p| *p /= peak);
    }
    let resolution = dnu_au / units::AU_TIME_S;
    Spectrum {
        frequencies: (0..=half).map(|k| k as f64 * resolution).collect(),
        power,
        resolution,
        fluence,
        spectral_fluence,
    }
}

/// Default filter band: 0.5 MHz up to 1.05 times the highest Delta nu = 3
/// line of the register, Hz.
pub fn default_band(basis: &EigenBasis) -> Result<(f64, f64)> {
    let top = transition_table(basis, &[3])?
        .iter()
        .map(|t| t.frequency_hz)
        .fold(0.0, f64::max);
    if top == 0.0 {
        return Err(Error::invalid("register too small for Delta nu = 3 lines"));
    }
    Ok((0.5e6, 1.05 * top))
}

/// Orthogonal projection onto fields whose spectrum lies in `[lo, hi]` Hz
/// and that vanish at both ends. Idempotent by construction.
pub fn bandpass_filter(field: &ControlField, band: (f64, f64)) -> Result<ControlField> {
    let (lo, hi) = band;
    let m = field.samples().len();
    let res = 1.0 / (m as f64 * units::au_to_seconds(field.dt()));
    let nyquist = res * (m / 2) as f64;
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid(format!("invalid band [{lo}, {hi}] Hz")));
    }
    if hi > nyquist * (1.0 + 1e-12) + res {
        return Err(Error::invalid(format!(
            "band edge {hi:.4e} Hz beyond the Nyquist frequency {nyquist:.4e} Hz"
        )));
    }
    let keep: Vec<bool> = (0..m)
        .map(|k| {
            let nu = k.min(m - k) as f64 * res;
            nu >= lo && nu <= hi
        })
        .collect();
    let mask = |x: &[f64]| -> Vec<f64> {
        let mut buf = dft(x);
        buf.iter_mut().zip(&keep).for_each(|(z, &k)| {
            if !k {
                *z = C64::new(0.0, 0.0);
            }
        });
        idft(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    };

    let v = mask(field.samples());
    let mut e0 = vec![0.0; m];
    e0[0] = 1.0;
    let mut en = vec![0.0; m];
    en[m - 1] = 1.0;
    let b0 = mask(&e0);
    let bn = mask(&en);
    // Remove the component along span{P e_0, P e_n} that carries the end values.
    let g = [[b0[0], bn[0]], [b0[m - 1], bn[m - 1]]];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let scale = g[0][0].abs().max(g[1][1].abs());
    let mut out = v.clone();
    if scale > 0.0 && det.abs() > 1e-14 * scale * scale {
        let r = [v[0], v[m - 1]];
        let a = (g[1][1] * r[0] - g[0][1] * r[1]) / det;
        let b = (-g[1][0] * r[0] + g[0][0] * r[1]) / det;
        for k in 0..m {
            out[k] -= a * b0[k] + b * bn[k];
        }
    } else if scale > 0.0 {
        // Degenerate Gram matrix: one constraint direction.
        let (bv, gv, r) = if g[0][0].abs() >= g[1][1].abs() {
            (&b0, g[0][0], v[0])
        } else {
            (&bn, g[1][1], v[m - 1])
        };
        for k in 0..m {
            out[k] -= r / gv * bv[k];
        }
    }
    out[0] = 0.0;
    out[m - 1] = 0.0;
    field.with_samples(out)
}

/// `<z>` of the ion at time t of a pulse; interaction-picture phases are
/// restored before contracting with the position matrix.
pub fn mean_position_ion(state: &QuantumState, basis: &EigenBasis, t: f64) -> Result<f64> {
    let d = basis.dim();
    if state.dim() != d {
        return Err(Error::invalid(format!(
            "state has {} components, basis has {d}",
            state.dim()
        )));
    }
    let frame = InteractionFrame::new(basis);
    let z = &basis.z_matrix;
    let p = frame.phases(t);
    let rho = state.to_density();
    let mut sum = C64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            // rho_S = P^+ rho P, <z> = sum_ab rho_S[a,b] z[b,a]
            sum += p[a].conj() * rho[[a, b]] * p[b] * z[[b, a]];
        }
    }
    Ok(sum.re)
}

/// `sum_j x_j p_j dx` for decoded densities `p_j = |psi(x_j)|^2`.
pub fn mean_position_sim(probs: &Array1<f64>, grid: &Grid) -> Result<f64> {
    if probs.len() != grid.n {
        return Err(Error::invalid(format!(
            "{} densities for a {}-point grid",
            probs.len(),
            grid.n
        )));
    }
    Ok(probs.iter().zip(grid.points.iter()).map(|(p, x)| p * x).sum::<f64>() * grid.delta_x)
}

/// Apply a pulse to a set of operators (local pulse clock starting at 0).
fn apply_pulse(ops: &mut [CMatrix], field: &ControlField, frame: &InteractionFrame, diss: &DissipationModel) {
    let dt = field.dt();
    let d = frame.dim();
    for i in 0..field.n_steps() {
        let e = field.step_values(i);
        if diss.is_trivial() && e.iter().all(|&x| x == 0.0) {
            continue;
        }
        let mu = frame.step_dipoles(field.time(i), dt);
        step_operators_with(&mu, ops, dt, e, Some(diss), Flow::State, d);
    }
}

/// Fidelity of the realized register map after each of `n_p` repetitions of
/// the pulse, against `U_s^l`:
/// `F_l = N^-2 Re sum_jk <phi_j|Lambda^l(|j><k|)|phi_k>`, `phi = U_s^l |j>`.
pub fn fidelity_trace(
    gate_field: &ControlField,
    basis: &EigenBasis,
    diss: &DissipationModel,
    target: &GateMatrix,
    n_p: usize,
) -> Result<Vec<f64>> {
    let d = basis.dim();
    let n = target.dim();
    if n > d || diss.dim() != d {
        return Err(Error::invalid("gate, basis and dissipation sizes disagree"));
    }
    let frame = InteractionFrame::new(basis);
    let mut ops: Vec<CMatrix> = (0..n * n)
        .map(|x| outer(&unit_vector(d, x / n), &unit_vector(d, x % n)))
        .collect();
    let mut out = Vec::with_capacity(n_p);
    for l in 1..=n_p {
        apply_pulse(&mut ops, gate_field, &frame, diss);
        let ul = matrix_power(&target.entries.view(), l);
        let phi: Vec<CVector> = (0..n)
            .map(|j| {
                (0..d)
                    .map(|a| if a < n { ul[[a, j]] } else { C64::new(0.0, 0.0) })
                    .collect()
            })
            .collect();
        let mut sum = C64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                let r = &ops[j * n + k];
                let rk = r.dot(&phi[k]);
                sum += phi[j].iter().zip(rk.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
        }
        out.push(sum.re / (n * n) as f64);
    }
    Ok(out)
}

/// State after each of `n_p` pulses, starting from `state` (index 0).
pub fn pulse_sequence(
    state: &QuantumState,
    field: &ControlField,
    basis: &EigenBasis,
    diss: &DissipationModel,
    n_p: usize,
) -> Result<Vec<QuantumState>> {
    let d = basis.dim();
    if state.dim() != d || diss.dim() != d {
        return Err(Error::invalid("state, basis and dissipation sizes disagree"));
    }
    let frame = InteractionFrame::new(basis);
    let mut out = vec![state.clone()];
    match state {
        QuantumState::Pure(c) if diss.is_trivial() => {
            let mut v = vec![c.clone()];
            for _ in 0..n_p {
                crate::propagator::propagate_vectors(&mut v, field, &frame);
                out.push(QuantumState::Pure(v[0].clone()));
            }
        }
        _ => {
            let mut ops = vec![state.to_density()];
            for _ in 0..n_p {
                apply_pulse(&mut ops, field, &frame, diss);
                out.push(QuantumState::Mixed(ops[0].clone()));
            }
        }
    }
    Ok(out)
}

/// `max_{l < N_p/2} max_j |p_l - p_{N_p - l}|` over snapshots l = 0..=N_p.
pub fn periodicity_residual(snapshots: &[Array1<f64>]) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::invalid("periodicity needs at least two snapshots"));
    }
    let n_p = snapshots.len() - 1;
    let mut worst = 0.0f64;
    for l in 0..n_p.div_ceil(2) {
        let (a, b) = (&snapshots[l], &snapshots[n_p - l]);
        if a.len() != b.len() {
            return Err(Error::invalid("snapshots differ in length"));
        }
        worst = a.iter().zip(b.iter()).fold(worst, |m, (x, y)| m.max((x - y).abs()));
    }
    Ok(worst)
}

/// Register populations `p_j`, j < n, of a trap state.
pub fn register_populations(state: &QuantumState, n: usize) -> Array1<f64> {
    state.populations().slice(ndarray::s![..n]).to_owned()
}
