//! Interaction picture with respect to H0 and the fourth-order Runge-Kutta
//! kernels used by every propagation in the crate.
//!
//! In this frame `mu_I(t)_jk = mu_jk exp(i w_jk t)` and
//! `dc/dt = i E(t) mu_I(t) c`; a zero field leaves every state unchanged.

use ndarray::Array2;
use rayon::prelude::*;

use super::dissipation::DissipationModel;
use crate::linalg::{dagger, identity, CMatrix, CVector, C64, I};
use crate::trap::EigenBasis;

/// Work (complex multiply-adds per step) above which ensembles are stepped in parallel.
const PARALLEL_WORK: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct InteractionFrame {
    /// E_j - E_0; the common offset only contributes a global phase.
    rel_energies: Vec<f64>,
    dipole: Array2<f64>,
}

/// Direction of the Liouvillian applied to operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// `d rho/dt = i E [mu_I, rho] + L_D rho`
    State,
    /// `d eta/dt = i E [mu_I, eta] - L_D^dagger eta`, keeping Tr(eta^+ rho) fixed.
    Costate,
}

/// Rotated dipole at the three RK4 nodes of one step.
pub struct StepDipoles {
    nodes: [CMatrix; 3],
}

impl InteractionFrame {
    pub fn new(basis: &EigenBasis) -> Self {
        Self::from_parts(basis.energies.as_slice().unwrap(), basis.dipole.clone())
    }

    pub fn from_parts(energies: &[f64], dipole: Array2<f64>) -> Self {
        let e0 = energies[0];
        InteractionFrame {
            rel_energies: energies.iter().map(|e| e - e0).collect(),
            dipole,
        }
    }

    pub fn dim(&self) -> usize {
        self.rel_energies.len()
    }

    /// `exp(i (E_j - E_0) t)`
    pub fn phases(&self, t: f64) -> Vec<C64> {
        self.rel_energies.iter().map(|e| C64::from_polar(1.0, e * t)).collect()
    }

    pub fn rotated_dipole(&self, t: f64) -> CMatrix {
        let p = self.phases(t);
        let d = self.dim();
        Array2::from_shape_fn((d, d), |(a, b)| p[a] * p[b].conj() * self.dipole[[a, b]])
    }

    pub fn step_dipoles(&self, t: f64, h: f64) -> StepDipoles {
        StepDipoles {
            nodes: [
                self.rotated_dipole(t),
                self.rotated_dipole(t + 0.5 * h),
                self.rotated_dipole(t + h),
            ],
        }
    }

    /// Interaction-picture state to the Schroedinger picture at time t
    /// (up to the global phase exp(-i E_0 t)).
    pub fn to_schrodinger(&self, c: &CVector, t: f64) -> CVector {
        let p = self.phases(t);
        c.iter().zip(p.iter()).map(|(z, q)| z * q.conj()).collect()
    }
}

impl StepDipoles {
    pub fn start(&self) -> &CMatrix {
        &self.nodes[0]
    }

    pub fn end(&self) -> &CMatrix {
        &self.nodes[2]
    }
}

fn axpy(y: &CVector, a: C64, x: &CVector) -> CVector {
    let mut out = y.clone();
    out.scaled_add(a, x);
    out
}

/// One RK4 step of `dc/dt = i E mu_I c` over [t, t+h]; `h < 0` steps backward.
pub fn rk4_vector(mu: &StepDipoles, e: [f64; 3], h: f64, c: &mut CVector) {
    if e.iter().all(|&x| x == 0.0) {
        return;
    }
    let f = |node: usize, field: f64, x: &CVector| -> CVector { mu.nodes[node].dot(x).mapv(|z| z * I * field) };
    let k1 = f(0, e[0], c);
    let k2 = f(1, e[1], &axpy(c, C64::new(0.5 * h, 0.0), &k1));
    let k3 = f(1, e[1], &axpy(c, C64::new(0.5 * h, 0.0), &k2));
    let k4 = f(2, e[2], &axpy(c, C64::new(h, 0.0), &k3));
    let w = h / 6.0;
    c.scaled_add(C64::new(w, 0.0), &k1);
    c.scaled_add(C64::new(2.0 * w, 0.0), &k2);
    c.scaled_add(C64::new(2.0 * w, 0.0), &k3);
    c.scaled_add(C64::new(w, 0.0), &k4);
}

/// Propagator of one RK4 step, the map `c -> c'` of [`rk4_vector`] as a matrix.
pub fn rk4_propagator(mu: &StepDipoles, e: [f64; 3], h: f64) -> CMatrix {
    let dim = mu.nodes[0].nrows();
    let f = |node: usize, field: f64, x: &CMatrix| -> CMatrix { mu.nodes[node].dot(x).mapv(|z| z * I * field) };
    let id = identity(dim);
    let half = C64::new(0.5 * h, 0.0);
    let k1 = f(0, e[0], &id);
    let mut y = id.clone();
    y.scaled_add(half, &k1);
    let k2 = f(1, e[1], &y);
    let mut y = id.clone();
    y.scaled_add(half, &k2);
    let k3 = f(1, e[1], &y);
    let mut y = id.clone();
    y.scaled_add(C64::new(h, 0.0), &k3);
    let k4 = f(2, e[2], &y);
    let w = h / 6.0;
    let mut r = id;
    r.scaled_add(C64::new(w, 0.0), &k1);
    r.scaled_add(C64::new(2.0 * w, 0.0), &k2);
    r.scaled_add(C64::new(2.0 * w, 0.0), &k3);
    r.scaled_add(C64::new(w, 0.0), &k4);
    r
}

/// One step of the Lindblad (or costate) equation for a single operator;
/// see [`step_operators_with`].
pub fn operator_step(
    mu: &StepDipoles,
    e: [f64; 3],
    h: f64,
    diss: Option<&DissipationModel>,
    flow: Flow,
    rho: &mut CMatrix,
) {
    let dim = rho.nrows();
    step_operators_with(mu, std::slice::from_mut(rho), h, e, diss, flow, dim);
}

/// Step a set of state vectors in lock-step.
pub fn step_vectors(frame: &InteractionFrame, states: &mut [CVector], t: f64, h: f64, e: [f64; 3]) {
    if states.is_empty() || e.iter().all(|&x| x == 0.0) {
        return;
    }
    let mu = frame.step_dipoles(t, h);
    step_vectors_with(&mu, states, h, e, frame.dim());
}

pub fn step_vectors_with(mu: &StepDipoles, states: &mut [CVector], h: f64, e: [f64; 3], dim: usize) {
    if states.len() * dim * dim * 4 >= PARALLEL_WORK {
        states.par_iter_mut().for_each(|c| rk4_vector(mu, e, h, c));
    } else {
        states.iter_mut().for_each(|c| rk4_vector(mu, e, h, c));
    }
}

/// Step a set of operators in lock-step.
pub fn step_operators(
    frame: &InteractionFrame,
    states: &mut [CMatrix],
    t: f64,
    h: f64,
    e: [f64; 3],
    diss: Option<&DissipationModel>,
    flow: Flow,
) {
    if states.is_empty() {
        return;
    }
    let mu = frame.step_dipoles(t, h);
    step_operators_with(&mu, states, h, e, diss, flow, frame.dim());
}

/// Strang step: exact dissipator over |h|/2, the RK4 propagator as
/// `R rho R^+`, and the dissipator again. With `h < 0` and reversed nodes `R`
/// is the adjoint of the forward step, so the costate flow is the exact
/// discrete adjoint and reduces to `R^+ eta R` without heating.
pub fn step_operators_with(
    mu: &StepDipoles,
    states: &mut [CMatrix],
    h: f64,
    e: [f64; 3],
    diss: Option<&DissipationModel>,
    flow: Flow,
    dim: usize,
) {
    let heat = diss.filter(|d| !d.is_trivial()).map(|d| d.exp_step(0.5 * h.abs()));
    let driven = e.iter().any(|&x| x != 0.0);
    if states.is_empty() || (heat.is_none() && !driven) {
        return;
    }
    let r = driven.then(|| {
        let r = rk4_propagator(mu, e, h);
        let rd = dagger(&r.view());
        (r, rd)
    });
    let apply = |x: &mut CMatrix| {
        if let Some(heat) = &heat {
            heat.apply(x, flow);
        }
        if let Some((r, rd)) = &r {
            *x = r.dot(&x.dot(rd));
        }
        if let Some(heat) = &heat {
            heat.apply(x, flow);
        }
    };
    if states.len() * dim * dim * dim * 2 >= PARALLEL_WORK {
        states.par_iter_mut().for_each(apply);
    } else {
        states.iter_mut().for_each(apply);
    }
}
