//! Sequential-update sweeps shared by the closed and dissipative optimizers.
//!
//! Each iteration propagates the costates backward under the previous field,
//! then the states forward while the field is corrected sample by sample.
//! The backward RK4 step is the exact adjoint of the forward step, so the
//! overlap `<eta|rho>` is conserved by the discrete dynamics under an
//! unchanged field and every objective change comes from the correction.

use log::debug;

use crate::field::ControlField;
use crate::linalg::{CMatrix, CVector, C64};
use crate::propagator::{
    step_operators_with, step_vectors_with, DissipationModel, Flow, InteractionFrame, StepDipoles,
};

/// Costate storage budget before switching to checkpointing.
const STORE_ALL_BYTES: usize = 512 << 20;

/// Object propagated by an optimization: a wave function or an operator.
pub(crate) trait Carrier: Clone + Send + Sync {
    fn step(
        mu: &StepDipoles,
        e: [f64; 3],
        h: f64,
        diss: Option<&DissipationModel>,
        flow: Flow,
        xs: &mut [Self],
        dim: usize,
    );
    /// `<eta|rho>`
    fn overlap(eta: &Self, rho: &Self) -> C64;
    /// Vectors: `<eta|mu|rho>`. Operators: `Tr(eta^+ [mu, rho])`.
    fn coupling(eta: &Self, mu: &CMatrix, rho: &Self) -> C64;
    fn bytes(dim: usize) -> usize;
}

impl Carrier for CVector {
    fn step(
        mu: &StepDipoles,
        e: [f64; 3],
        h: f64,
        _diss: Option<&DissipationModel>,
        _flow: Flow,
        xs: &mut [Self],
        dim: usize,
    ) {
        step_vectors_with(mu, xs, h, e, dim);
    }

    fn overlap(eta: &Self, rho: &Self) -> C64 {
        eta.iter().zip(rho.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    fn coupling(eta: &Self, mu: &CMatrix, rho: &Self) -> C64 {
        Self::overlap(eta, &mu.dot(rho))
    }

    fn bytes(dim: usize) -> usize {
        dim * std::mem::size_of::<C64>()
    }
}

impl Carrier for CMatrix {
    fn step(
        mu: &StepDipoles,
        e: [f64; 3],
        h: f64,
        diss: Option<&DissipationModel>,
        flow: Flow,
        xs: &mut [Self],
        dim: usize,
    ) {
        step_operators_with(mu, xs, h, e, diss, flow, dim);
    }

    fn overlap(eta: &Self, rho: &Self) -> C64 {
        eta.iter().zip(rho.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    fn coupling(eta: &Self, mu: &CMatrix, rho: &Self) -> C64 {
        let comm = mu.dot(rho) - rho.dot(mu);
        Self::overlap(eta, &comm)
    }

    fn bytes(dim: usize) -> usize {
        dim * dim * std::mem::size_of::<C64>()
    }
}

/// How the per-target overlaps combine into the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Contraction {
    /// `sum_j |<eta_j|psi_j>|^2`
    PerTarget,
    /// `|sum_j <eta_j|psi_j>|^2`
    Coherent,
    /// `sum_j Re <eta_j|rho_j>`: the objective is already linear in the states.
    Linear,
}

impl Contraction {
    pub(crate) fn objective<S: Carrier>(self, targets: &[S], states: &[S]) -> f64 {
        let ov = targets.iter().zip(states).map(|(t, s)| S::overlap(t, s));
        match self {
            Contraction::PerTarget => ov.map(|z| z.norm_sqr()).sum(),
            Contraction::Coherent => ov.sum::<C64>().norm_sqr(),
            Contraction::Linear => ov.map(|z| z.re).sum(),
        }
    }

    /// Ascent direction g(t); the field correction is `s(t) g / alpha0`.
    fn direction<S: Carrier>(self, mu: &CMatrix, costates: &[S], states: &[S]) -> f64 {
        let pairs = costates.iter().zip(states);
        match self {
            Contraction::PerTarget => -pairs
                .map(|(c, s)| (S::overlap(c, s).conj() * S::coupling(c, mu, s)).im)
                .sum::<f64>(),
            Contraction::Coherent => {
                let (tau, x) = pairs.fold((C64::new(0.0, 0.0), C64::new(0.0, 0.0)), |(t, x), (c, s)| {
                    (t + S::overlap(c, s), x + S::coupling(c, mu, s))
                });
                -(tau.conj() * x).im
            }
            Contraction::Linear => -0.5 * pairs.map(|(c, s)| S::coupling(c, mu, s).im).sum::<f64>(),
        }
    }
}

/// States, costate final conditions and dynamics of one optimization problem.
pub(crate) struct Sweep<'a, S: Carrier> {
    pub frame: &'a InteractionFrame,
    pub diss: Option<&'a DissipationModel>,
    pub contraction: Contraction,
    /// Initial states; the first `targets.len()` enter the objective, the rest
    /// are carried along for diagnostics only.
    pub initial: Vec<S>,
    pub targets: Vec<S>,
    pub alpha0: f64,
}

/// `sin^2(pi t / T)`, exactly zero at both end samples.
pub(crate) fn shape(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.0
    } else {
        (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2)
    }
}

impl<S: Carrier> Sweep<'_, S> {
    fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// Forward propagation of all states under a fixed field.
    pub fn propagate(&self, field: &ControlField) -> Vec<S> {
        let mut xs = self.initial.clone();
        let dt = field.dt();
        for i in 0..field.n_steps() {
            let e = field.step_values(i);
            if self.diss.is_none() && e.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mu = self.frame.step_dipoles(field.time(i), dt);
            S::step(&mu, e, dt, self.diss, Flow::State, &mut xs, self.dim());
        }
        xs
    }

    /// One backward step of the costates from sample i+1 to sample i.
    fn back_step(&self, field: &ControlField, i: usize, etas: &mut [S]) {
        let [a, m, b] = field.step_values(i);
        let e = [b, m, a];
        if self.diss.is_none() && e.iter().all(|&x| x == 0.0) {
            return;
        }
        let dt = field.dt();
        let mu = self.frame.step_dipoles(field.time(i + 1), -dt);
        S::step(&mu, e, -dt, self.diss, Flow::Costate, etas, self.dim());
    }

    /// Backward sweep; returns costates at every checkpoint sample.
    fn backward(&self, field: &ControlField, interval: usize) -> Vec<Option<Vec<S>>> {
        let n = field.n_steps();
        let mut store: Vec<Option<Vec<S>>> = vec![None; n + 1];
        let mut etas = self.targets.clone();
        store[n] = Some(etas.clone());
        for i in (0..n).rev() {
            self.back_step(field, i, &mut etas);
            if i % interval == 0 {
                store[i] = Some(etas.clone());
            }
        }
        store
    }

    fn checkpoint_interval(&self, n: usize) -> usize {
        let bytes = self.targets.len() * S::bytes(self.dim()) * (n + 1);
        if bytes <= STORE_ALL_BYTES {
            1
        } else {
            ((n as f64).sqrt().ceil() as usize).max(1)
        }
    }

    /// One iteration: returns the corrected field and the final states.
    pub fn iterate(&self, field: &ControlField) -> (ControlField, Vec<S>) {
        let n = field.n_steps();
        let dt = field.dt();
        let interval = self.checkpoint_interval(n);
        let mut store = self.backward(field, interval);
        let n_active = self.targets.len();

        let old = field.samples();
        let mut new = old.to_vec();
        let mut delta = vec![0.0; n + 1];
        let mut xs = self.initial.clone();
        let mut segment: Vec<Vec<S>> = Vec::new();
        let mut segment_start = 0;
        let mut max_gain = 0.0f64;

        for i in 0..n {
            // Costates at i+1, from the store or a recomputed segment.
            let eta_next: &[S] = if interval == 1 {
                store[i + 1].as_deref().unwrap()
            } else {
                if i % interval == 0 {
                    let end = (i + interval).min(n);
                    let mut etas = store[end].clone().unwrap();
                    let mut seg = vec![etas.clone()];
                    for k in (i + 1..end).rev() {
                        self.back_step(field, k, &mut etas);
                        seg.push(etas.clone());
                    }
                    seg.reverse();
                    segment = seg;
                    segment_start = i + 1;
                    if i > 0 {
                        store[i] = None;
                    }
                }
                &segment[i + 1 - segment_start]
            };

            let mu = self.frame.step_dipoles(field.time(i), dt);
            let s_next = shape(i + 1, n);
            if s_next > 0.0 {
                // The correction at t_{i+1} depends on the state there, which
                // depends on the correction: solve x = c g(x) on the secant
                // through two trial steps, starting from an extrapolation.
                let c = s_next / self.alpha0;
                let start = new[i];
                let eval = |x: f64| {
                    let end = old[i + 1] + x;
                    let mut trial = xs[..n_active].to_vec();
                    S::step(
                        &mu,
                        [start, 0.5 * (start + end), end],
                        dt,
                        self.diss,
                        Flow::State,
                        &mut trial,
                        self.dim(),
                    );
                    self.contraction.direction(mu.end(), eta_next, &trial)
                };
                let x0 = if i == 0 { 0.0 } else { 2.0 * delta[i] - delta[i - 1] };
                let g0 = eval(x0);
                let x1 = c * g0;
                let mut x = x1;
                if x1 != x0 {
                    let g1 = eval(x1);
                    let slope = (g1 - g0) / (x1 - x0);
                    let gain = c * slope;
                    max_gain = max_gain.max(gain.abs());
                    if gain < 0.5 {
                        x = c * (g0 - slope * x0) / (1.0 - gain);
                    }
                }
                delta[i + 1] = x;
                new[i + 1] = old[i + 1] + x;
            }
            let e = [new[i], 0.5 * (new[i] + new[i + 1]), new[i + 1]];
            S::step(&mu, e, dt, self.diss, Flow::State, &mut xs, self.dim());
        }
        debug!(
            "sweep done: max correction {:.3e}, max feedback gain {:.3e}",
            delta.iter().fold(0.0f64, |m, d| m.max(d.abs())),
            max_gain
        );
        let field = field.with_samples(new).expect("corrected field keeps the sampling");
        (field, xs)
    }

    pub fn objective(&self, states: &[S]) -> f64 {
        self.contraction.objective(&self.targets, &states[..self.targets.len()])
    }
}
