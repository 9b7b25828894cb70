//! Closed (TDSE) and open (Lindblad) propagation of the trapped ion in the
//! interaction picture of H0, stepped with RK4 on the field sample grid.

mod dissipation;
mod frame;

pub use dissipation::{build_dissipation, build_dissipation_with, DissipationModel, PairSet, DEFAULT_DELTAS};
pub use frame::{
    operator_step, rk4_propagator, rk4_vector, step_operators, step_operators_with, step_vectors, step_vectors_with,
    Flow, InteractionFrame, StepDipoles,
};

use ndarray::{s, Array1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::gridsim::{GateMatrix, GateProvenance};
use crate::linalg::{hermitian_eigenvalues, hermiticity_deviation, trace, vector_norm_sqr, CMatrix, CVector, C64};
use crate::trap::EigenBasis;

/// Allowed norm drift of a closed propagation over one pulse.
pub const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Allowed trace drift of a Lindblad propagation.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
/// Allowed anti-Hermitian part of a propagated density matrix.
pub const HERMITICITY_LIMIT: f64 = 1e-10;
/// Most negative eigenvalue tolerated while propagating.
pub const POSITIVITY_LIMIT: f64 = -1e-6;

/// Interaction-picture state of the ion.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl QuantumState {
    pub fn pure(c: CVector) -> Result<Self> {
        let n = vector_norm_sqr(c.as_slice().unwrap()).sqrt();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!("state norm {n} differs from 1")));
        }
        Ok(QuantumState::Pure(c))
    }

    pub fn mixed(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::invalid("density matrix must be square"));
        }
        let h = hermiticity_deviation(&rho.view());
        if h > 1e-10 {
            return Err(Error::invalid(format!("density matrix not Hermitian ({h:.2e})")));
        }
        let tr = trace(&rho.view());
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::invalid(format!("density matrix trace {tr} differs from 1")));
        }
        let min = min_eigenvalue(&rho);
        if min < -1e-8 {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(QuantumState::Mixed(rho))
    }

    /// Eigenstate |j> of a D-state basis.
    pub fn basis(dim: usize, j: usize) -> Self {
        QuantumState::Pure(unit_vector(dim, j))
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(c) => c.len(),
            QuantumState::Mixed(r) => r.nrows(),
        }
    }

    pub fn populations(&self) -> Array1<f64> {
        match self {
            QuantumState::Pure(c) => c.mapv(|z| z.norm_sqr()),
            QuantumState::Mixed(r) => r.diag().mapv(|z| z.re),
        }
    }

    /// Norm squared, or trace.
    pub fn weight(&self) -> f64 {
        match self {
            QuantumState::Pure(c) => vector_norm_sqr(c.as_slice().unwrap()),
            QuantumState::Mixed(r) => trace(&r.view()).re,
        }
    }

    pub fn to_density(&self) -> CMatrix {
        match self {
            QuantumState::Pure(c) => outer(c, c),
            QuantumState::Mixed(r) => r.clone(),
        }
    }
}

pub fn unit_vector(dim: usize, j: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[j] = C64::new(1.0, 0.0);
    v
}

/// `|a><b|`
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    CMatrix::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    hermitian_eigenvalues(&rho.view())
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// States recorded along a propagation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
}

impl Trajectory {
    pub fn last(&self) -> &QuantumState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn check_dims(basis: &EigenBasis, dim: usize) -> Result<()> {
    if dim != basis.dim() {
        return Err(Error::invalid(format!(
            "state has {dim} components, basis has {}",
            basis.dim()
        )));
    }
    Ok(())
}

/// Integrate `dc/dt = i E(t) mu_I(t) c` over the field, recording every
/// `record_every` steps (and always the first and last).
pub fn propagate_tdse(
    state: &QuantumState,
    field: &ControlField,
    basis: &EigenBasis,
    record_every: usize,
) -> Result<Trajectory> {
    let QuantumState::Pure(c0) = state else {
        return Err(Error::invalid("closed propagation needs a state vector"));
    };
    check_dims(basis, c0.len())?;
    let frame = InteractionFrame::new(basis);
    let every = record_every.max(1);
    let n = field.n_steps();
    let dt = field.dt();
    let mut c = c0.clone();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
    };
    for i in 0..n {
        let t = field.time(i);
        let e = field.step_values(i);
        if e.iter().any(|&x| x != 0.0) {
            let mu = frame.step_dipoles(t, dt);
            rk4_vector(&mu, e, dt, &mut c);
        }
        if (i + 1) % every == 0 || i + 1 == n {
            traj.times.push(field.time(i + 1));
            traj.states.push(QuantumState::Pure(c.clone()));
        }
    }
    let drift = (vector_norm_sqr(c.as_slice().unwrap()) - vector_norm_sqr(c0.as_slice().unwrap())).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::numerical(format!(
            "norm drift {drift:.3e} over the pulse; reduce the time step"
        )));
    }
    Ok(traj)
}

/// Propagate several vectors through the whole field at once.
pub fn propagate_vectors(states: &mut [CVector], field: &ControlField, frame: &InteractionFrame) {
    let dt = field.dt();
    for i in 0..field.n_steps() {
        step_vectors(frame, states, field.time(i), dt, field.step_values(i));
    }
}

/// Gate realized by the field: all D eigenstates propagated, projected onto the
/// first `n` (generally sub-unitary through leakage).
pub fn evolution_operator(field: &ControlField, basis: &EigenBasis, n: usize) -> Result<GateMatrix> {
    let d = basis.dim();
    if n == 0 || n > d {
        return Err(Error::invalid(format!("projection size {n} must lie in 1..={d}")));
    }
    let frame = InteractionFrame::new(basis);
    let mut cols: Vec<CVector> = (0..d).map(|j| unit_vector(d, j)).collect();
    propagate_vectors(&mut cols, field, &frame);
    for (j, c) in cols.iter().enumerate() {
        let drift = (vector_norm_sqr(c.as_slice().unwrap()) - 1.0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::numerical(format!(
                "column {j} lost norm by {drift:.3e}; reduce the time step"
            )));
        }
    }
    let u = CMatrix::from_shape_fn((n, n), |(a, b)| cols[b][a]);
    GateMatrix::new(
        u,
        GateProvenance::Realized {
            t_pulse: field.t_pulse(),
            n_steps: field.n_steps(),
        },
    )
}

fn check_density(rho: &CMatrix, reference_trace: f64, positivity: bool) -> Result<()> {
    let tr = trace(&rho.view());
    if (tr.re - reference_trace).abs() > TRACE_DRIFT_LIMIT || tr.im.abs() > TRACE_DRIFT_LIMIT {
        return Err(Error::numerical(format!("trace drifted to {tr}; reduce the time step")));
    }
    let h = hermiticity_deviation(&rho.view());
    if h > HERMITICITY_LIMIT {
        return Err(Error::numerical(format!("density matrix lost Hermiticity ({h:.2e})")));
    }
    if positivity {
        let min = min_eigenvalue(rho);
        if min < POSITIVITY_LIMIT {
            return Err(Error::numerical(format!("density matrix eigenvalue {min:.3e} < 0")));
        }
    }
    Ok(())
}

/// Integrate the Lindblad equation; checks trace, Hermiticity and positivity at
/// every recorded point.
pub fn propagate_lindblad(
    state: &QuantumState,
    field: &ControlField,
    basis: &EigenBasis,
    diss: &DissipationModel,
    record_every: usize,
) -> Result<Trajectory> {
    let rho0 = state.to_density();
    check_dims(basis, rho0.nrows())?;
    check_dims(basis, diss.dim())?;
    let frame = InteractionFrame::new(basis);
    let every = record_every.max(1);
    let n = field.n_steps();
    let dt = field.dt();
    let tr0 = trace(&rho0.view()).re;
    let mut rho = rho0;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![QuantumState::Mixed(rho.clone())],
    };
    for i in 0..n {
        let e = field.step_values(i);
        let mu = frame.step_dipoles(field.time(i), dt);
        operator_step(&mu, e, dt, Some(diss), Flow::State, &mut rho);
        if (i + 1) % every == 0 || i + 1 == n {
            // Remove round-off anti-Hermitian parts before the checks accumulate them.
            let h = hermiticity_deviation(&rho.view());
            if h <= HERMITICITY_LIMIT {
                rho = symmetrize(&rho);
            }
            check_density(&rho, tr0, true)?;
            traj.times.push(field.time(i + 1));
            traj.states.push(QuantumState::Mixed(rho.clone()));
        }
    }
    Ok(traj)
}

/// `(A + A^+)/2`
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    CMatrix::from_shape_fn((n, n), |(i, j)| 0.5 * (a[[i, j]] + a[[j, i]].conj()))
}

/// Realized open-system map on the register: images of `|j><k|`, j,k < n,
/// after one pulse, indexed `j * n + k`.
pub fn lindblad_map(
    field: &ControlField,
    basis: &EigenBasis,
    diss: &DissipationModel,
    n: usize,
) -> Result<Vec<CMatrix>> {
    let d = basis.dim();
    if n == 0 || n > d {
        return Err(Error::invalid(format!("register size {n} must lie in 1..={d}")));
    }
    check_dims(basis, diss.dim())?;
    let frame = InteractionFrame::new(basis);
    let mut ops: Vec<CMatrix> = (0..n * n)
        .map(|idx| outer(&unit_vector(d, idx / n), &unit_vector(d, idx % n)))
        .collect();
    let dt = field.dt();
    for i in 0..field.n_steps() {
        let mu = frame.step_dipoles(field.time(i), dt);
        step_operators_with(&mu, &mut ops, dt, field.step_values(i), Some(diss), Flow::State, d);
    }
    Ok(ops)
}

/// Apply a map given as images of `|j><k|` (see [`lindblad_map`]) to an
/// operator supported on the first `n` states.
pub fn apply_map(map: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let n = (map.len() as f64).sqrt().round() as usize;
    let d = map[0].nrows();
    let mut out = CMatrix::zeros((d, d));
    for j in 0..n {
        for k in 0..n {
            let w = rho[[j, k]];
            if w != C64::new(0.0, 0.0) {
                out.scaled_add(w, &map[j * n + k]);
            }
        }
    }
    out
}

/// Restrict a D x D operator to its leading n x n block.
pub fn register_block(a: &CMatrix, n: usize) -> CMatrix {
    a.slice(s![..n, ..n]).to_owned()
}

/// Independent closed propagations run in parallel.
pub fn propagate_many(states: &[QuantumState], field: &ControlField, basis: &EigenBasis) -> Result<Vec<QuantumState>> {
    states
        .par_iter()
        .map(|s| propagate_tdse(s, field, basis, usize::MAX).map(|t| t.last().clone()))
        .collect()
}
