//! Declarative run configuration (TOML). Physical quantities are strings
//! with unit suffixes (`"96 us"`, `"0.1 Vpm"`, `"111 amu"`); bare numbers
//! are atomic units. Unset keys take the defaults of the selected tier.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridsim::{make_grid, Grid, Potential, SimSystem};
use crate::io::hash_bytes;
use crate::oct::{Functional, OctConfig};
use crate::propagator::{PairSet, DEFAULT_DELTAS};
use crate::trap::TrapParams;
use crate::units::{parse_quantity, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// N = 4, D = 8, 10,000-step pulses.
    Desk,
    /// N = 16, D = 32, 100,000-step pulses; long-running.
    Paper,
}

impl std::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Tier::Desk),
            "paper" => Ok(Tier::Paper),
            _ => Err(Error::invalid(format!("unknown tier '{s}', expected desk or paper"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn value(&self, dim: Dimension) -> Result<f64> {
        match self {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(s) => parse_quantity(s, dim),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    tier: Option<Tier>,
    output: Option<PathBuf>,
    #[serde(default)]
    trap: RawTrap,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    oct: RawOct,
    #[serde(default)]
    dissipation: RawDissipation,
    packets: Option<Vec<Packet>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    mass: Option<Quantity>,
    charge: Option<f64>,
    k: Option<Quantity>,
    k_quart: Option<Quantity>,
    primitive_size: Option<usize>,
    dynamical_size: Option<usize>,
    computational_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    mass: Option<Quantity>,
    omega: Option<Quantity>,
    /// Polynomial potential coefficients c_0, c_1, ...; replaces `omega`.
    potential: Option<Vec<f64>>,
    x_min: Option<Quantity>,
    x_max: Option<Quantity>,
    points: Option<usize>,
    delta_t: Option<Quantity>,
    substeps: Option<usize>,
    pulses: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOct {
    t_pulse: Option<Quantity>,
    dt: Option<Quantity>,
    alpha0: Option<Quantity>,
    functional: Option<Functional>,
    max_iterations: Option<usize>,
    fidelity_goal: Option<f64>,
    superposition: Option<bool>,
    guess_amplitude: Option<Quantity>,
    checkpoint_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDissipation {
    kappa: Option<Vec<Quantity>>,
    pairs: Option<PairSet>,
    deltas: Option<Vec<usize>>,
}

/// Initial Gaussian packet of the simulated system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Packet {
    pub sigma: f64,
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub system: SimSystem,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub delta_t: f64,
    pub substeps: usize,
    pub pulses: usize,
}

impl SimConfig {
    pub fn grid(&self) -> Result<Grid> {
        make_grid(self.x_min, self.x_max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationConfig {
    pub kappas: Vec<f64>,
    pub pairs: PairSet,
    pub deltas: Vec<usize>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub tier: Tier,
    /// Where artifacts go; not part of the provenance hash.
    #[serde(skip)]
    pub output: PathBuf,
    pub trap: TrapParams,
    pub sim: SimConfig,
    /// Optimizer settings for the configured functional.
    pub oct: OctConfig,
    /// alpha0 given explicitly (otherwise each functional uses its tier default).
    pub alpha0_override: Option<f64>,
    /// Iterations between field checkpoints.
    pub checkpoint_every: usize,
    pub dissipation: DissipationConfig,
    pub packets: Vec<Packet>,
}

impl RunConfig {
    pub fn defaults(tier: Tier) -> Self {
        let (trap, points, oct, kappas, packets) = match tier {
            Tier::Desk => (
                TrapParams::desk(),
                4,
                OctConfig::desk(Functional::P),
                vec![1e-18, 5e-18, 1e-17],
                vec![Packet { sigma: 1.0, x0: -0.75 }],
            ),
            Tier::Paper => (
                TrapParams::default(),
                16,
                OctConfig::paper(Functional::P),
                vec![1e-18, 5e-18, 1e-17],
                vec![Packet { sigma: 1.0, x0: -0.75 }, Packet { sigma: 0.5, x0: -0.75 }],
            ),
        };
        RunConfig {
            tier,
            output: PathBuf::from("out"),
            trap,
            sim: SimConfig {
                system: SimSystem::default(),
                x_min: -4.0,
                x_max: 4.0,
                points,
                delta_t: TAU / 10.0,
                substeps: 10,
                pulses: 10,
            },
            oct,
            alpha0_override: None,
            checkpoint_every: 10,
            dissipation: DissipationConfig {
                kappas,
                pairs: PairSet::Dynamical,
                deltas: DEFAULT_DELTAS.to_vec(),
            },
            packets,
        }
    }

    /// Read a TOML file; `tier` overrides the file's tier.
    pub fn load(path: Option<&Path>, tier: Option<Tier>) -> Result<Self> {
        let raw: RawConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str(&text).map_err(|e| Error::Parse {
                    path: p.into(),
                    message: e.to_string(),
                })?
            }
            None => RawConfig::default(),
        };
        let cfg = Self::resolve(raw, tier)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, tier: Option<Tier>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        let cfg = Self::resolve(raw, tier)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(raw: RawConfig, tier: Option<Tier>) -> Result<Self> {
        let tier = tier.or(raw.tier).unwrap_or(Tier::Desk);
        let mut c = Self::defaults(tier);
        let q = |v: &Option<Quantity>, d: Dimension, slot: &mut f64| -> Result<()> {
            if let Some(v) = v {
                *slot = v.value(d)?;
            }
            Ok(())
        };
        if let Some(o) = raw.output {
            c.output = o;
        }

        let t = &raw.trap;
        q(&t.mass, Dimension::Mass, &mut c.trap.mass)?;
        q(&t.k, Dimension::Atomic, &mut c.trap.k)?;
        q(&t.k_quart, Dimension::Atomic, &mut c.trap.k_quart)?;
        if let Some(x) = t.charge {
            c.trap.charge = x;
        }
        if let Some(x) = t.primitive_size {
            c.trap.primitive_size = x;
        }
        if let Some(x) = t.dynamical_size {
            c.trap.dynamical_size = x;
        }
        if let Some(x) = t.computational_size {
            c.trap.computational_size = x;
            c.sim.points = x;
        }

        let s = &raw.sim;
        q(&s.mass, Dimension::Mass, &mut c.sim.system.mass)?;
        if let Some(coeffs) = &s.potential {
            c.sim.system.potential = Potential::Polynomial { coeffs: coeffs.clone() };
            c.sim.system.label = "polynomial".into();
        } else if let Some(w) = &s.omega {
            c.sim.system.potential = Potential::Harmonic {
                omega: w.value(Dimension::Atomic)?,
            };
        }
        q(&s.x_min, Dimension::Length, &mut c.sim.x_min)?;
        q(&s.x_max, Dimension::Length, &mut c.sim.x_max)?;
        q(&s.delta_t, Dimension::Time, &mut c.sim.delta_t)?;
        if let Some(x) = s.points {
            c.sim.points = x;
        }
        if let Some(x) = s.substeps {
            c.sim.substeps = x;
        }
        if let Some(x) = s.pulses {
            c.sim.pulses = x;
        }

        let o = &raw.oct;
        if let Some(f) = o.functional {
            c.oct = match tier {
                Tier::Desk => OctConfig::desk(f),
                Tier::Paper => OctConfig::paper(f),
            };
        }
        q(&o.t_pulse, Dimension::Time, &mut c.oct.t_pulse)?;
        q(&o.dt, Dimension::Time, &mut c.oct.dt)?;
        q(&o.guess_amplitude, Dimension::Field, &mut c.oct.guess_amplitude)?;
        if let Some(a) = &o.alpha0 {
            let a = a.value(Dimension::Atomic)?;
            c.alpha0_override = Some(a);
            c.oct.alpha0 = a;
        }
        if let Some(x) = o.max_iterations {
            c.oct.max_iterations = x;
        }
        if let Some(x) = o.fidelity_goal {
            c.oct.fidelity_goal = x;
        }
        if let Some(x) = o.superposition {
            c.oct.include_superposition_target = x;
        }
        if let Some(x) = o.checkpoint_every {
            c.checkpoint_every = x;
        }

        let d = &raw.dissipation;
        if let Some(k) = &d.kappa {
            c.dissipation.kappas = k.iter().map(|x| x.value(Dimension::Atomic)).collect::<Result<_>>()?;
        }
        if let Some(p) = d.pairs {
            c.dissipation.pairs = p;
        }
        if let Some(x) = &d.deltas {
            c.dissipation.deltas = x.clone();
        }
        if let Some(p) = raw.packets {
            c.packets = p;
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.oct.validate()?;
        if self.sim.points != self.trap.computational_size {
            return Err(Error::invalid(format!(
                "simulation grid has {} points but the register has {} states",
                self.sim.points, self.trap.computational_size
            )));
        }
        self.sim.grid()?;
        if !(self.sim.delta_t >= 0.0) || self.sim.substeps == 0 {
            return Err(Error::invalid("gate time step must be >= 0 with at least one substep"));
        }
        if self.dissipation.kappas.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::invalid("kappa values must be >= 0"));
        }
        if self.packets.iter().any(|p| !(p.sigma > 0.0)) {
            return Err(Error::invalid("packet widths must be > 0"));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::invalid("checkpoint_every must be >= 1"));
        }
        Ok(())
    }

    /// Optimizer settings for a functional: the tier default alpha0 of that
    /// functional unless alpha0 was set explicitly.
    pub fn oct_for(&self, functional: Functional) -> OctConfig {
        let base = match self.tier {
            Tier::Desk => OctConfig::desk(functional),
            Tier::Paper => OctConfig::paper(functional),
        };
        OctConfig {
            functional,
            alpha0: self.alpha0_override.unwrap_or(base.alpha0),
            ..self.oct.clone()
        }
    }

    /// SHA-256 of the resolved physical and numerical settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hash_bytes(&json)
    }
}
