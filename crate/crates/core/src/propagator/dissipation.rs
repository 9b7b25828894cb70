//! Phenomenological heating: jump operators `L_jk = sqrt(g_jk) |j><k|` with
//! `g_jk = kappa |mu_jk|`.
//!
//! Because each jump connects two eigenstates, its interaction-picture phase
//! cancels in `L rho L^+` and in `L^+ L`, so the dissipator is the same
//! time-independent map in both pictures.

use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::frame::Flow;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::trap::EigenBasis;
use crate::units;

/// Jump-operator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PairSet {
    /// `|j - k|` in the given deltas, both states below D.
    #[default]
    Dynamical,
    /// `|j - k|` in the given deltas, both states below N.
    Computational,
    /// Every pair with a non-vanishing dipole element, below D.
    AllDipole,
}

#[derive(Debug, Clone)]
pub struct DissipationModel {
    pub kappa: f64,
    /// Ordered pairs (j, k): jump from k to j.
    pub pairs: Vec<(usize, usize)>,
    /// Rate of each entry of `pairs`.
    pub rates: Vec<f64>,
    /// 1 / mean rate over the averaging set, a.u. of time (infinite for kappa = 0).
    pub mean_heating_time: f64,
    dim: usize,
    /// `gamma[[j, k]]`: rate k -> j.
    gamma: Array2<f64>,
    /// Total out-rate of each state.
    out_rates: Vec<f64>,
    /// Exact steps already built, keyed by duration.
    steps: Arc<Mutex<Vec<Arc<HeatStep>>>>,
}

/// `exp(tau L_D)` for one duration: coherences decay by
/// `exp(-(G_a + G_b) tau / 2)`, populations follow `exp(tau W)` of the rate
/// matrix W.
#[derive(Debug)]
pub struct HeatStep {
    pub tau: f64,
    decay: Array2<f64>,
    populations: Array2<f64>,
}

impl HeatStep {
    /// Apply `exp(tau L_D)` (state) or `exp(tau L_D^+)` (costate) in place.
    pub fn apply(&self, x: &mut CMatrix, flow: Flow) {
        let d = x.nrows();
        let diag: Vec<C64> = (0..d).map(|a| x[[a, a]]).collect();
        x.zip_mut_with(&self.decay, |z, f| *z *= *f);
        for a in 0..d {
            x[[a, a]] = match flow {
                Flow::State => (0..d).map(|k| diag[k] * self.populations[[a, k]]).sum(),
                Flow::Costate => (0..d).map(|k| diag[k] * self.populations[[k, a]]).sum(),
            };
        }
    }
}

/// Relative dipole magnitude below which a pair counts as forbidden.
const DIPOLE_CUTOFF: f64 = 1e-10;

/// Default transition orders.
pub const DEFAULT_DELTAS: [usize; 2] = [1, 3];

/// Heating model over |j - k| in `deltas`, all states below D.
///
/// The mean heating time averages the rates of those transitions within the
/// computational register, the lines that carry the qubit dynamics.
pub fn build_dissipation(basis: &EigenBasis, kappa: f64, deltas: &[usize]) -> Result<DissipationModel> {
    build_dissipation_with(basis, kappa, deltas, PairSet::Dynamical)
}

pub fn build_dissipation_with(
    basis: &EigenBasis,
    kappa: f64,
    deltas: &[usize],
    set: PairSet,
) -> Result<DissipationModel> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    if set != PairSet::AllDipole && (deltas.is_empty() || deltas.contains(&0)) {
        return Err(Error::invalid("dissipation deltas must be nonempty and nonzero"));
    }
    let d = basis.dim();
    let n = basis.computational_size();
    let mu = &basis.dipole;
    let mu_max = mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let in_deltas = |j: usize, k: usize| deltas.contains(&j.abs_diff(k));

    let mut pairs = Vec::new();
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let keep = match set {
                PairSet::Dynamical => in_deltas(j, k),
                PairSet::Computational => in_deltas(j, k) && j < n && k < n,
                PairSet::AllDipole => mu[[j, k]].abs() > DIPOLE_CUTOFF * mu_max,
            };
            if keep {
                pairs.push((j, k));
            }
        }
    }
    let rates: Vec<f64> = pairs.iter().map(|&(j, k)| kappa * mu[[j, k]].abs()).collect();

    let avg: Vec<f64> = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .filter(|&(j, k)| j != k && (deltas.is_empty() || in_deltas(j, k)))
        .map(|(j, k)| kappa * mu[[j, k]].abs())
        .collect();
    let mean = if avg.is_empty() {
        0.0
    } else {
        avg.iter().sum::<f64>() / avg.len() as f64
    };
    let mean_heating_time = if mean > 0.0 { 1.0 / mean } else { f64::INFINITY };

    let mut gamma = Array2::zeros((d, d));
    for (&(j, k), &r) in pairs.iter().zip(&rates) {
        gamma[[j, k]] = r;
    }
    let out_rates = (0..d).map(|k| gamma.column(k).sum()).collect();
    Ok(DissipationModel {
        kappa,
        pairs,
        rates,
        mean_heating_time,
        dim: d,
        gamma,
        out_rates,
        steps: Arc::default(),
    })
}

impl DissipationModel {
    /// No dissipation on a D-state basis.
    pub fn none(dim: usize) -> Self {
        DissipationModel {
            kappa: 0.0,
            pairs: Vec::new(),
            rates: Vec::new(),
            mean_heating_time: f64::INFINITY,
            dim,
            gamma: Array2::zeros((dim, dim)),
            out_rates: vec![0.0; dim],
            steps: Arc::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_trivial(&self) -> bool {
        self.rates.iter().all(|&r| r == 0.0)
    }

    /// Rate of the jump k -> j.
    pub fn rate(&self, j: usize, k: usize) -> f64 {
        self.gamma[[j, k]]
    }

    pub fn mean_heating_time_s(&self) -> f64 {
        units::au_to_seconds(self.mean_heating_time)
    }

    /// Exact dissipative evolution over `tau` (cached per duration).
    pub fn exp_step(&self, tau: f64) -> Arc<HeatStep> {
        let mut steps = self.steps.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = steps.iter().find(|s| s.tau == tau) {
            return s.clone();
        }
        let d = self.dim;
        let w = DMatrix::from_fn(
            d,
            d,
            |a, k| if a == k { -self.out_rates[a] } else { self.gamma[[a, k]] } * tau,
        );
        let p = w.exp();
        let step = Arc::new(HeatStep {
            tau,
            decay: Array2::from_shape_fn((d, d), |(a, b)| {
                (-0.5 * (self.out_rates[a] + self.out_rates[b]) * tau).exp()
            }),
            populations: Array2::from_shape_fn((d, d), |(a, k)| p[(a, k)]),
        });
        if steps.len() >= 8 {
            steps.remove(0);
        }
        steps.push(step.clone());
        step
    }

    /// `out += s * L_D(rho)`
    pub fn add_dissipator(&self, rho: &CMatrix, out: &mut CMatrix, s: f64) {
        let d = self.dim;
        for a in 0..d {
            let gain: C64 = (0..d).map(|k| rho[[k, k]] * self.gamma[[a, k]]).sum();
            out[[a, a]] += gain * s;
            for b in 0..d {
                let g = 0.5 * (self.out_rates[a] + self.out_rates[b]);
                out[[a, b]] -= rho[[a, b]] * (s * g);
            }
        }
    }

    /// `out += s * L_D^+(eta)`
    pub fn add_adjoint_dissipator(&self, eta: &CMatrix, out: &mut CMatrix, s: f64) {
        let d = self.dim;
        for a in 0..d {
            let gain: C64 = (0..d).map(|j| eta[[j, j]] * self.gamma[[j, a]]).sum();
            out[[a, a]] += gain * s;
            for b in 0..d {
                let g = 0.5 * (self.out_rates[a] + self.out_rates[b]);
                out[[a, b]] -= eta[[a, b]] * (s * g);
            }
        }
    }
}
