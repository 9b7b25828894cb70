//! Multi-target optimal control of the trap: gate synthesis with the
//! trace (`F`) or population (`P`) functional, state preparation, and the
//! density-matrix variants under heating.
//!
//! The iteration is the monotonically convergent sequential scheme
//! `E_i = E_{i-1} + dE` with the time-local correction
//! `dE(t) = -(s(t) / alpha0) Im[...]`, `s(t) = sin^2(pi t / T)`; the traced
//! objective is the terminal yield, which never decreases.

mod engine;

use std::f64::consts::PI;

use log::info;
use serde::{Deserialize, Serialize};

use crate::encoder::QubitAmplitudes;
use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::gridsim::GateMatrix;
use crate::linalg::{dagger, trace, CMatrix, CVector, C64};
use crate::propagator::{outer, unit_vector, DissipationModel, InteractionFrame};
use crate::trap::{transition_table, EigenBasis};
use crate::units;

use engine::{Carrier, Contraction, Sweep};

/// Relative slack on the objective before a decrease counts as a fault.
pub const MONOTONICITY_SLACK: f64 = 1e-10;
/// Relative improvement regarded as stagnation.
const STALL_IMPROVEMENT: f64 = 1e-12;
const STALL_ITERATIONS: usize = 20;

/// Amplitude of each guess-field line: 0.1 V/m.
pub const GUESS_AMPLITUDE: f64 = 1.945e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    /// `|Tr(U_s^+ U_P)|^2`: phase-sensitive through the trace.
    F,
    /// `sum_j |<j|U_s^+ U_P|j>|^2` plus a superposition transition fixing the
    /// relative phases.
    P,
}

impl std::str::FromStr for Functional {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" | "f" => Ok(Functional::F),
            "P" | "p" => Ok(Functional::P),
            other => Err(Error::invalid(format!("unknown functional '{other}', expected F or P"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OctConfig {
    pub t_pulse: f64,
    pub dt: f64,
    pub alpha0: f64,
    pub functional: Functional,
    /// Largest iteration index that may be reached.
    pub max_iterations: usize,
    pub fidelity_goal: f64,
    pub include_superposition_target: bool,
    /// Per-line amplitude of the guess field.
    pub guess_amplitude: f64,
}

impl OctConfig {
    /// 96 us pulse sampled every 960 ps.
    pub fn paper(functional: Functional) -> Self {
        OctConfig {
            t_pulse: units::seconds_to_au(96e-6),
            dt: units::seconds_to_au(960e-12),
            alpha0: match functional {
                Functional::P => 1e15,
                Functional::F => 4e15,
            },
            functional,
            max_iterations: 1500,
            fidelity_goal: 0.99999,
            include_superposition_target: true,
            guess_amplitude: GUESS_AMPLITUDE,
        }
    }

    /// Reduced problem: 9.6 us pulse, 10,000 samples of 960 ps.
    pub fn desk(functional: Functional) -> Self {
        OctConfig {
            t_pulse: units::seconds_to_au(9.6e-6),
            alpha0: match functional {
                Functional::P => 5e12,
                Functional::F => 3e13,
            },
            max_iterations: 500,
            fidelity_goal: 0.995,
            ..Self::paper(functional)
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_pulse / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if !(self.fidelity_goal > 0.0 && self.fidelity_goal <= 1.0) {
            return Err(Error::invalid(format!(
                "fidelity goal must lie in (0, 1], got {}",
                self.fidelity_goal
            )));
        }
        if !(self.dt > 0.0 && self.t_pulse > 0.0) {
            return Err(Error::invalid("pulse length and time step must be positive"));
        }
        let n = self.n_steps();
        if n < 2 || (n as f64 * self.dt - self.t_pulse).abs() > 1e-6 * self.t_pulse {
            return Err(Error::invalid(format!(
                "pulse length {} is not a multiple of the time step {}",
                self.t_pulse, self.dt
            )));
        }
        Ok(())
    }
}

/// `alpha0 / sin^2(pi t / T)`; infinite at the pulse edges.
pub fn penalty(t: f64, config: &OctConfig) -> f64 {
    let s = (PI * t / config.t_pulse).sin().powi(2);
    if t <= 0.0 || t >= config.t_pulse || s == 0.0 {
        f64::INFINITY
    } else {
        config.alpha0 / s
    }
}

/// Sum of `A sin(w t)` over the Delta nu = 1 and 3 lines of the register,
/// under a `sin^2` envelope.
pub fn make_guess_field(basis: &EigenBasis, config: &OctConfig) -> Result<ControlField> {
    config.validate()?;
    let lines = transition_table(basis, &[1, 3])?;
    let omegas: Vec<f64> = lines
        .iter()
        .map(|l| basis.energies[l.upper] - basis.energies[l.lower])
        .collect();
    let n = config.n_steps();
    let samples = (0..=n)
        .map(|i| {
            let t = i as f64 * config.dt;
            let sum: f64 = omegas.iter().map(|w| (w * t).sin()).sum();
            config.guess_amplitude * engine::shape(i, n) * sum
        })
        .collect();
    ControlField::new(samples, config.dt)
}

/// `|Tr(U_s^+ U_P)|^2 / N^2`
pub fn fidelity(target: &GateMatrix, realized: &GateMatrix) -> Result<f64> {
    if target.dim() != realized.dim() {
        return Err(Error::invalid(format!(
            "gate sizes differ: {} vs {}",
            target.dim(),
            realized.dim()
        )));
    }
    Ok(gate_fidelity(&target.entries, &realized.entries))
}

fn gate_fidelity(target: &CMatrix, realized: &CMatrix) -> f64 {
    let n = target.nrows() as f64;
    trace(&dagger(&target.view()).dot(realized).view()).norm_sqr() / (n * n)
}

/// Largest deviation of `arg <U_s j|U_P j>` from that of j = 0, wrapped to
/// [-pi, pi].
pub fn phase_spread(target: &GateMatrix, realized: &GateMatrix) -> f64 {
    let n = target.dim().min(realized.dim());
    let args: Vec<f64> = (0..n)
        .map(|j| {
            let z: C64 = (0..target.dim())
                .map(|a| target.entries[[a, j]].conj() * realized.entries[[a, j]])
                .sum();
            z.arg()
        })
        .collect();
    args.iter()
        .map(|a| {
            let d = a - args[0];
            (d + PI).rem_euclid(2.0 * PI) - PI
        })
        .fold(0.0f64, |m, d| m.max(d.abs()))
}

/// Transitions `|j> -> U_s|j>` on the register.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub gate: GateMatrix,
    /// Add `N^{-1/2} sum_j |j> -> N^{-1/2} sum_j U_s|j>`.
    pub superposition: bool,
}

impl TargetSet {
    pub fn new(gate: GateMatrix, superposition: bool) -> Result<Self> {
        let dev = gate.unitarity_deviation();
        if dev > 1e-8 {
            return Err(Error::invalid(format!(
                "target gate is not unitary (deviation {dev:.2e})"
            )));
        }
        Ok(TargetSet { gate, superposition })
    }

    pub fn n(&self) -> usize {
        self.gate.dim()
    }

    /// Target images `U_s|j>` embedded in a D-state space.
    fn images(&self, d: usize) -> Vec<CVector> {
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut v = CVector::zeros(d);
                for a in 0..n {
                    v[a] = self.gate.entries[[a, j]];
                }
                v
            })
            .collect()
    }

    /// (initial, target) pairs, superposition last.
    fn pairs(&self, d: usize, with_superposition: bool) -> (Vec<CVector>, Vec<CVector>) {
        let n = self.n();
        let mut init: Vec<CVector> = (0..n).map(|j| unit_vector(d, j)).collect();
        let mut targ = self.images(d);
        if with_superposition {
            let w = C64::new(1.0 / (n as f64).sqrt(), 0.0);
            init.push(init.iter().fold(CVector::zeros(d), |acc, v| acc + v) * w);
            targ.push(targ.iter().fold(CVector::zeros(d), |acc, v| acc + v) * w);
        }
        (init, targ)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OctRecord {
    pub iteration: usize,
    /// Terminal objective.
    pub objective: f64,
    pub fidelity: f64,
    /// `int E^2 dt`
    pub fluence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OctOutcome {
    GoalReached,
    Stalled,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OctTrace {
    pub records: Vec<OctRecord>,
    pub outcome: OctOutcome,
}

impl OctTrace {
    pub fn last(&self) -> &OctRecord {
        self.records
            .last()
            .expect("a trace holds at least the guess evaluation")
    }

    pub fn converged(&self) -> bool {
        self.outcome == OctOutcome::GoalReached
    }
}

type Observer<'a> = Box<dyn FnMut(&OctRecord, &ControlField) + 'a>;
type DensityFidelity = Box<dyn Fn(&[CMatrix]) -> f64>;

/// Optimization driver; the free functions below cover the common cases.
pub struct Optimizer<'a> {
    basis: &'a EigenBasis,
    config: OctConfig,
    guess: Option<ControlField>,
    start_iteration: usize,
    observer: Option<Observer<'a>>,
}

impl<'a> Optimizer<'a> {
    pub fn new(basis: &'a EigenBasis, config: &OctConfig) -> Self {
        Optimizer {
            basis,
            config: config.clone(),
            guess: None,
            start_iteration: 0,
            observer: None,
        }
    }

    /// Start from this field instead of the multi-line guess.
    pub fn guess(mut self, field: ControlField) -> Self {
        self.guess = Some(field);
        self
    }

    /// Continue a previous run: `field` is treated as iteration `iteration`.
    pub fn resume(mut self, field: ControlField, iteration: usize) -> Self {
        self.guess = Some(field);
        self.start_iteration = iteration;
        self
    }

    /// Called after every evaluated iteration (including the starting field).
    pub fn observer(mut self, f: impl FnMut(&OctRecord, &ControlField) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    fn initial_field(&mut self) -> Result<ControlField> {
        self.config.validate()?;
        match self.guess.take() {
            Some(f) => {
                if f.n_steps() != self.config.n_steps() || (f.dt() - self.config.dt).abs() > 1e-9 * self.config.dt {
                    return Err(Error::invalid(format!(
                        "starting field has {} steps of {} a.u., configuration expects {} of {}",
                        f.n_steps(),
                        f.dt(),
                        self.config.n_steps(),
                        self.config.dt
                    )));
                }
                Ok(f)
            }
            None => make_guess_field(self.basis, &self.config),
        }
    }

    fn check_register(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.basis.dim() {
            return Err(Error::invalid(format!(
                "register of {n} states does not fit a {}-state basis",
                self.basis.dim()
            )));
        }
        Ok(())
    }

    fn check_functional(&self, targets: &TargetSet) -> Result<bool> {
        match self.config.functional {
            Functional::P if !(targets.superposition && self.config.include_superposition_target) => Err(
                Error::invalid("the P functional needs the superposition target to fix relative phases"),
            ),
            Functional::P => Ok(true),
            Functional::F => Ok(false),
        }
    }

    /// Closed-system gate synthesis.
    pub fn gate(mut self, targets: &TargetSet) -> Result<(ControlField, OctTrace)> {
        let n = targets.n();
        self.check_register(n)?;
        let sup = self.check_functional(targets)?;
        let d = self.basis.dim();
        let frame = InteractionFrame::new(self.basis);
        let (initial, goal) = targets.pairs(d, sup);
        let contraction = match self.config.functional {
            Functional::F => Contraction::Coherent,
            Functional::P => Contraction::PerTarget,
        };
        let sweep = Sweep {
            frame: &frame,
            diss: None,
            contraction,
            initial,
            targets: goal,
            alpha0: self.config.alpha0,
        };
        let gate = targets.gate.entries.clone();
        let fid = move |xs: &[CVector]| {
            let u = CMatrix::from_shape_fn((n, n), |(a, j)| xs[j][a]);
            gate_fidelity(&gate, &u)
        };
        let field = self.initial_field()?;
        self.drive(&sweep, field, fid)
    }

    /// Drive the ground state to `target` (phase-insensitive).
    pub fn state_prep(mut self, target: &QubitAmplitudes) -> Result<(ControlField, OctTrace)> {
        let n = target.len();
        self.check_register(n)?;
        let d = self.basis.dim();
        let frame = InteractionFrame::new(self.basis);
        let mut goal = CVector::zeros(d);
        for (j, z) in target.c.iter().enumerate() {
            goal[j] = *z;
        }
        let sweep = Sweep {
            frame: &frame,
            diss: None,
            contraction: Contraction::PerTarget,
            initial: vec![unit_vector(d, 0)],
            targets: vec![goal],
            alpha0: self.config.alpha0,
        };
        let field = self.initial_field()?;
        let targets = sweep.targets.clone();
        self.drive(&sweep, field, move |xs: &[CVector]| {
            Contraction::PerTarget.objective(&targets, &xs[..1])
        })
    }

    /// Gate synthesis with density matrices under the heating model.
    pub fn gate_dissipative(
        mut self,
        targets: &TargetSet,
        diss: &DissipationModel,
    ) -> Result<(ControlField, OctTrace)> {
        let n = targets.n();
        self.check_register(n)?;
        let sup = self.check_functional(targets)?;
        let d = self.basis.dim();
        if diss.dim() != d {
            return Err(Error::invalid(format!(
                "dissipation model has {} states, basis has {d}",
                diss.dim()
            )));
        }
        let frame = InteractionFrame::new(self.basis);
        let (vin, vout) = targets.pairs(d, sup);
        let n_sq = (n * n) as f64;
        let (initial, goal, fid): (Vec<CMatrix>, Vec<CMatrix>, DensityFidelity) = match self.config.functional {
            // rho_jk(0) = |j><k| towards |phi_j><phi_k|: the closed limit is |Tr|^2.
            Functional::F => {
                let init = (0..n * n).map(|x| outer(&vin[x / n], &vin[x % n])).collect();
                let targ: Vec<CMatrix> = (0..n * n).map(|x| outer(&vout[x / n], &vout[x % n])).collect();
                let t2 = targ.clone();
                (
                    init,
                    targ,
                    Box::new(move |xs: &[CMatrix]| Contraction::Linear.objective(&t2, xs) / n_sq),
                )
            }
            // One pure state per transition; coherences |j><k| ride along
            // for the register fidelity.
            Functional::P => {
                let mut init: Vec<CMatrix> = vin.iter().map(|v| outer(v, v)).collect();
                let targ: Vec<CMatrix> = vout.iter().map(|v| outer(v, v)).collect();
                let mut index = vec![vec![0; n]; n];
                for (j, row) in index.iter_mut().enumerate() {
                    row[j] = j;
                }
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            index[j][k] = init.len();
                            init.push(outer(&vin[j], &vin[k]));
                        }
                    }
                }
                let phi = vout[..n].to_vec();
                (
                    init,
                    targ,
                    Box::new(move |xs: &[CMatrix]| {
                        let mut sum = C64::new(0.0, 0.0);
                        for j in 0..n {
                            for k in 0..n {
                                let r = &xs[index[j][k]];
                                sum += <CVector as Carrier>::overlap(&phi[j], &r.dot(&phi[k]));
                            }
                        }
                        sum.re / n_sq
                    }),
                )
            }
        };
        let sweep = Sweep {
            frame: &frame,
            diss: Some(diss),
            contraction: Contraction::Linear,
            initial,
            targets: goal,
            alpha0: self.config.alpha0,
        };
        let field = self.initial_field()?;
        self.drive(&sweep, field, fid)
    }

    fn drive<S: Carrier>(
        mut self,
        sweep: &Sweep<'_, S>,
        mut field: ControlField,
        fidelity: impl Fn(&[S]) -> f64,
    ) -> Result<(ControlField, OctTrace)> {
        let goal = self.config.fidelity_goal;
        let mut records = Vec::new();
        let mut emit = |rec: OctRecord, field: &ControlField, records: &mut Vec<OctRecord>| {
            info!(
                "iteration {:5}  J = {:.12e}  F = {:.10}  fluence = {:.4e}",
                rec.iteration, rec.objective, rec.fidelity, rec.fluence
            );
            if let Some(cb) = self.observer.as_mut() {
                cb(&rec, field);
            }
            records.push(rec);
        };

        let states = sweep.propagate(&field);
        let mut j = sweep.objective(&states);
        let f = fidelity(&states);
        let start = self.start_iteration;
        emit(
            OctRecord {
                iteration: start,
                objective: j,
                fidelity: f,
                fluence: field.fluence(),
            },
            &field,
            &mut records,
        );
        if f >= goal {
            return Ok((
                field,
                OctTrace {
                    records,
                    outcome: OctOutcome::GoalReached,
                },
            ));
        }

        let mut stalled = 0;
        for it in start + 1..=self.config.max_iterations {
            let (next, states) = sweep.iterate(&field);
            if next.samples().iter().any(|e| !e.is_finite()) {
                return Err(Error::numerical(format!("field became non-finite at iteration {it}")));
            }
            let j_new = sweep.objective(&states);
            if !j_new.is_finite() {
                return Err(Error::numerical(format!(
                    "objective became non-finite at iteration {it}"
                )));
            }
            let scale = j.abs().max(f64::MIN_POSITIVE);
            if j_new < j - MONOTONICITY_SLACK * scale {
                return Err(Error::numerical(format!(
                    "algorithmic fault: objective decreased from {j:.15e} to {j_new:.15e} at iteration {it} \
                     (relative {:.3e}); reduce the time step or increase alpha0",
                    (j - j_new) / scale
                )));
            }
            let f = fidelity(&states);
            field = next;
            emit(
                OctRecord {
                    iteration: it,
                    objective: j_new,
                    fidelity: f,
                    fluence: field.fluence(),
                },
                &field,
                &mut records,
            );
            if f >= goal {
                return Ok((
                    field,
                    OctTrace {
                        records,
                        outcome: OctOutcome::GoalReached,
                    },
                ));
            }
            if (j_new - j) / scale < STALL_IMPROVEMENT {
                stalled += 1;
                if stalled >= STALL_ITERATIONS {
                    return Ok((
                        field,
                        OctTrace {
                            records,
                            outcome: OctOutcome::Stalled,
                        },
                    ));
                }
            } else {
                stalled = 0;
            }
            j = j_new;
        }
        Ok((
            field,
            OctTrace {
                records,
                outcome: OctOutcome::IterationLimit,
            },
        ))
    }
}

pub fn optimize_gate(basis: &EigenBasis, targets: &TargetSet, config: &OctConfig) -> Result<(ControlField, OctTrace)> {
    Optimizer::new(basis, config).gate(targets)
}

pub fn optimize_state_prep(
    basis: &EigenBasis,
    target: &QubitAmplitudes,
    config: &OctConfig,
) -> Result<(ControlField, OctTrace)> {
    Optimizer::new(basis, config).state_prep(target)
}

pub fn optimize_gate_dissipative(
    basis: &EigenBasis,
    targets: &TargetSet,
    config: &OctConfig,
    diss: &DissipationModel,
) -> Result<(ControlField, OctTrace)> {
    Optimizer::new(basis, config).gate_dissipative(targets, diss)
}
