//! Command-line front end: `trap`, `gate`, `optimize`, `simulate`, `analyze`.
//!
//! Every command resolves the run configuration, does one pipeline stage and
//! writes its artifacts under the output directory.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ndarray::Array1;
use serde::Serialize;

use crate::analysis::{
    bandpass_filter, default_band, fidelity_trace, mean_position_ion, mean_position_sim, periodicity_residual,
    pulse_sequence, register_populations, spectrum,
};
use crate::config::{Packet, RunConfig, Tier};
use crate::encoder::{encode, QubitAmplitudes};
use crate::error::{Error, Result};
use crate::gridsim::{
    analytic_coherent_evolution, classic_propagate, elementary_gate, gaussian_packet, GateMatrix, GateProvenance, Grid,
};
use crate::io::{self, Header};
use crate::linalg::{CVector, C64};
use crate::oct::{fidelity, phase_spread, Functional, OctOutcome, OctRecord, OctTrace, Optimizer, TargetSet};
use crate::propagator::{build_dissipation_with, evolution_operator, propagate_tdse, DissipationModel, QuantumState};
use crate::trap::{solve_trap, transition_table, EigenBasis};
use crate::units::{self, parse_quantity, Dimension};

#[derive(Debug, Parser)]
#[command(
    name = "iontrap",
    version,
    about = "Trapped-ion simulation of a Schroedinger evolution gate"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Problem size tier.
    #[arg(long, global = true, value_enum)]
    pub tier: Option<Tier>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated heating strengths, e.g. "1e-18,5e-18 au".
    #[arg(long, global = true)]
    pub kappa: Option<String>,
    /// Acknowledge that paper-tier optimizations and simulations take hours.
    #[arg(long, global = true)]
    pub long_running: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diagonalize the trap; write energies, transitions and dipoles.
    Trap,
    /// Build the split-operator gate U_s.
    Gate,
    /// Optimize a gate or preparation field.
    Optimize(OptimizeArgs),
    /// Apply the prepared state and successive gate pulses, with and without heating.
    Simulate(SimulateArgs),
    /// Spectrum and band-pass filtering of a field.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Gate,
    Prep,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "gate")]
    pub mode: Mode,
    /// F (trace) or P (populations plus superposition).
    #[arg(long)]
    pub functional: Option<String>,
    /// Optimize with density matrices under heating (needs a single --kappa).
    #[arg(long)]
    pub dissipative: bool,
    /// Continue from a field file (its `iteration` header, if any, numbers the start).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Index of the configured packet to prepare.
    #[arg(long, default_value_t = 0)]
    pub packet: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Gate field.
    #[arg(long)]
    pub field: PathBuf,
    /// Preparation field; without it the register starts in the exact encoding.
    #[arg(long)]
    pub prep_field: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub packet: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Band kept by the filter, "lo,hi" with units (default MHz).
    #[arg(long)]
    pub band: Option<String>,
}

/// Parse, run, and map errors to exit codes.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Apply the THREADS environment variable to the global thread pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::invalid("THREADS must be >= 1"));
        }
        // Fails only if the pool was already built, e.g. in tests.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("thread pool already initialized; THREADS ignored");
        }
    }
    Ok(())
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    configure_threads()?;
    let mut cfg = RunConfig::load(cli.config.as_deref(), cli.tier)?;
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    let kappas = cli.kappa.as_deref().map(parse_kappas).transpose()?;
    if let Some(k) = &kappas {
        cfg.dissipation.kappas = k.clone();
    }
    let long = matches!(cli.command, Command::Optimize(_) | Command::Simulate(_));
    if long && cfg.tier == Tier::Paper && !cli.long_running {
        return Err(Error::invalid(
            "paper-tier optimization and simulation take hours; pass --long-running to proceed",
        ));
    }
    let ctx = Context { hash: cfg.hash(), cfg };
    match &cli.command {
        Command::Trap => ctx.trap().map(|_| 0),
        Command::Gate => ctx.gate().map(|_| 0),
        Command::Optimize(a) => ctx.optimize(a, kappas.as_deref()),
        Command::Simulate(a) => ctx.simulate(a).map(|_| 0),
        Command::Analyze(a) => ctx.analyze(a).map(|_| 0),
    }
}

fn parse_kappas(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let (list, unit) = match text.rsplit_once(' ') {
        Some((l, u)) if u.chars().all(|c| c.is_ascii_alphabetic()) => (l, u),
        _ => (text, ""),
    };
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let k = parse_quantity(&format!("{} {unit}", s.trim()), Dimension::Atomic)?;
            if !(k >= 0.0) {
                return Err(Error::invalid(format!("kappa must be >= 0, got {k}")));
            }
            Ok(k)
        })
        .collect()
}

fn kappa_tag(k: f64) -> String {
    format!("{k:e}")
}

struct Context {
    cfg: RunConfig,
    hash: String,
}

#[derive(Serialize)]
struct BasisDoc<'a> {
    params: &'a crate::trap::TrapParams,
    omega_au: f64,
    frequency_hz: f64,
    oscillator_length_au: f64,
    energies_au: Vec<f64>,
}

#[derive(Serialize)]
struct GateDoc {
    n: usize,
    delta_t_au: Option<f64>,
    substeps: Option<usize>,
    potential: Option<String>,
    unitarity_deviation: f64,
}

#[derive(Serialize)]
struct OptimizeDoc {
    mode: &'static str,
    functional: Option<Functional>,
    kappa: Option<f64>,
    outcome: OctOutcome,
    final_record: OctRecord,
    phase_spread_rad: Option<f64>,
    peak_field_vpm: f64,
}

#[derive(Serialize)]
struct SimulateRun {
    kappa: f64,
    mean_heating_time_s: f64,
    periodicity_residual: f64,
    fidelity: Vec<f64>,
    mean_position_ion_au: Vec<f64>,
    mean_position_sim_au: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateDoc {
    packet: Packet,
    prepared_overlap: f64,
    exact_periodicity_residual: f64,
    runs: Vec<SimulateRun>,
}

#[derive(Serialize)]
struct AnalyzeDoc {
    band_hz: (f64, f64),
    resolution_hz: f64,
    parseval_error: f64,
    peaks_hz: Vec<f64>,
    nearest_line_offset_bins: Vec<f64>,
    fidelity_before: f64,
    fidelity_after: f64,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn header(&self) -> Header {
        Header::new(&self.hash).with("tier", format!("{:?}", self.cfg.tier).to_lowercase())
    }

    fn basis(&self) -> Result<EigenBasis> {
        solve_trap(&self.cfg.trap)
    }

    fn target_gate(&self) -> Result<GateMatrix> {
        let s = &self.cfg.sim;
        elementary_gate(&s.system, &s.grid()?, s.delta_t, s.substeps)
    }

    fn packet(&self, index: usize) -> Result<Packet> {
        self.cfg.packets.get(index).copied().ok_or_else(|| {
            Error::invalid(format!(
                "packet {index} requested, {} configured",
                self.cfg.packets.len()
            ))
        })
    }

    /// Row-major matrix: one CSV row per matrix row, columns `c0..`.
    fn write_matrix(&self, name: &str, m: &ndarray::Array2<f64>) -> Result<()> {
        let names: Vec<String> = (0..m.ncols()).map(|k| format!("c{k}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        io::write_csv(&self.path(name), &self.header(), &names, &rows)
    }

    fn write_amplitudes(&self, name: &str, c: &QubitAmplitudes) -> Result<()> {
        let rows: Vec<Vec<f64>> =
            c.c.iter()
                .enumerate()
                .map(|(j, z)| vec![j as f64, z.re, z.im, z.norm_sqr()])
                .collect();
        io::write_csv(
            &self.path(name),
            &self.header(),
            &["j", "re", "im", "population"],
            &rows,
        )
    }

    fn trap(&self) -> Result<EigenBasis> {
        let b = self.basis()?;
        let d = b.dim();
        let doc = BasisDoc {
            params: &b.params,
            omega_au: b.omega,
            frequency_hz: units::hartree_to_hz(b.omega),
            oscillator_length_au: b.params.oscillator_length(),
            energies_au: b.energies.to_vec(),
        };
        io::write_json(&self.path("basis.json"), &self.hash, &doc)?;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|j| vec![j as f64, b.energies[j], b.transition_frequency_hz(0, j)])
            .collect();
        io::write_csv(
            &self.path("energies.csv"),
            &self.header(),
            &["j", "E_au", "E_minus_E0_Hz"],
            &rows,
        )?;
        self.write_matrix("eigenvectors.csv", &b.vectors)?;
        self.write_matrix("z_matrix.csv", &b.z_matrix)?;
        self.write_matrix("dipole.csv", &b.dipole)?;
        let lines = transition_table(&b, &[1, 3])?;
        let rows: Vec<Vec<f64>> = lines
            .iter()
            .map(|t| vec![t.lower as f64, t.upper as f64, t.frequency_hz, t.dipole])
            .collect();
        io::write_csv(
            &self.path("transitions.csv"),
            &self.header(),
            &["lower", "upper", "frequency_Hz", "dipole_au"],
            &rows,
        )?;
        println!(
            "trap: nu = {:.6} MHz, {} states kept, {} transition lines written to {}",
            units::hartree_to_hz(b.omega) / 1e6,
            d,
            lines.len(),
            self.cfg.output.display()
        );
        Ok(b)
    }

    fn gate(&self) -> Result<GateMatrix> {
        let g = self.target_gate()?;
        let n = g.dim();
        let dev = g.unitarity_deviation();
        let (delta_t_au, substeps, potential) = match &g.provenance {
            GateProvenance::SplitOperator {
                delta_t,
                substeps,
                potential,
                ..
            } => (Some(*delta_t), Some(*substeps), Some(potential.clone())),
            _ => (None, None, None),
        };
        let doc = GateDoc {
            n,
            delta_t_au,
            substeps,
            potential,
            unitarity_deviation: dev,
        };
        io::write_json(&self.path("gate.json"), &self.hash, &doc)?;
        let rows: Vec<Vec<f64>> = g
            .entries
            .indexed_iter()
            .map(|((a, b), z)| vec![a as f64, b as f64, z.re, z.im])
            .collect();
        io::write_csv(
            &self.path("gate.csv"),
            &self.header().with("n", n),
            &["row", "col", "re", "im"],
            &rows,
        )?;
        println!("gate: {n}x{n}, max unitarity deviation {dev:.3e}");
        Ok(g)
    }

    fn optimize(&self, args: &OptimizeArgs, kappas: Option<&[f64]>) -> Result<i32> {
        let functional: Functional = match &args.functional {
            Some(f) => f.parse()?,
            None => self.cfg.oct.functional,
        };
        let kappa = if args.dissipative {
            match kappas {
                Some([k]) => Some(*k),
                Some(_) => return Err(Error::invalid("dissipative optimization takes exactly one --kappa")),
                None => return Err(Error::invalid("dissipative optimization needs --kappa")),
            }
        } else {
            None
        };
        let oct = self.cfg.oct_for(functional);
        let basis = self.basis()?;
        let stem = match (args.mode, kappa) {
            (Mode::Prep, _) => format!("prep_{}", args.packet),
            (Mode::Gate, None) => format!("gate_{functional:?}"),
            (Mode::Gate, Some(k)) => format!("gate_{functional:?}_kappa{}", kappa_tag(k)),
        };
        let field_path = self.path(&format!("field_{stem}.csv"));
        let trace_path = self.path(&format!("trace_{stem}.csv"));

        let mut opt = Optimizer::new(&basis, &oct);
        let mut previous: Vec<OctRecord> = Vec::new();
        let mut start = 0;
        if let Some(p) = &args.resume {
            let (field, header) = io::read_field(p)?;
            start = header
                .get("iteration")
                .map(str::parse)
                .transpose()
                .map_err(|_| Error::Parse {
                    path: p.clone(),
                    message: "bad iteration header".into(),
                })?
                .unwrap_or(0);
            if trace_path.exists() && start > 0 {
                previous = read_trace(&trace_path)?
                    .into_iter()
                    .filter(|r| r.iteration < start)
                    .collect();
            }
            info!("resuming from {} at iteration {start}", p.display());
            opt = opt.resume(field, start);
        }
        let every = self.cfg.checkpoint_every;
        let header = self.header().with("functional", format!("{functional:?}"));
        let ckpt_header = header.clone();
        let ckpt_path = field_path.clone();
        let mut ckpt_error: Option<Error> = None;
        let opt = opt.observer(|rec, field| {
            if rec.iteration > start && rec.iteration % every == 0 {
                let h = ckpt_header.clone().with("iteration", rec.iteration);
                if let Err(e) = io::write_field(&ckpt_path, field, &h) {
                    ckpt_error.get_or_insert(e);
                }
            }
        });

        let (field, trace, spread) = match args.mode {
            Mode::Gate => {
                let targets = TargetSet::new(self.target_gate()?, functional == Functional::P)?;
                let (field, trace) = match kappa {
                    None => opt.gate(&targets)?,
                    Some(k) => {
                        let diss = build_dissipation_with(
                            &basis,
                            k,
                            &self.cfg.dissipation.deltas,
                            self.cfg.dissipation.pairs,
                        )?;
                        opt.gate_dissipative(&targets, &diss)?
                    }
                };
                let realized = evolution_operator(&field, &basis, targets.n())?;
                (field, trace, Some(phase_spread(&targets.gate, &realized)))
            }
            Mode::Prep => {
                let packet = self.packet(args.packet)?;
                let psi = gaussian_packet(&self.cfg.sim.grid()?, packet.sigma, packet.x0)?;
                let amplitudes = encode(&psi)?;
                self.write_amplitudes(&format!("amplitudes_{stem}.csv"), &amplitudes)?;
                let (field, trace) = opt.state_prep(&amplitudes)?;
                (field, trace, None)
            }
        };
        if let Some(e) = ckpt_error {
            return Err(e);
        }
        let last = *trace.last();
        let full = OctTrace {
            records: previous.into_iter().chain(trace.records.iter().copied()).collect(),
            outcome: trace.outcome,
        };
        io::write_field(&field_path, &field, &header.clone().with("iteration", last.iteration))?;
        io::write_trace(&trace_path, &full, &header)?;
        let doc = OptimizeDoc {
            mode: match args.mode {
                Mode::Gate => "gate",
                Mode::Prep => "prep",
            },
            functional: (args.mode == Mode::Gate).then_some(functional),
            kappa,
            outcome: trace.outcome,
            final_record: last,
            phase_spread_rad: spread,
            peak_field_vpm: units::au_to_vpm(field.peak()),
        };
        io::write_json(&self.path(&format!("oct_{stem}.json")), &self.hash, &doc)?;
        println!(
            "optimize {stem}: {:?} after iteration {}, F = {:.8}, J = {:.10e}",
            trace.outcome, last.iteration, last.fidelity, last.objective
        );
        Ok(if trace.converged() { 0 } else { 4 })
    }

    fn simulate(&self, args: &SimulateArgs) -> Result<()> {
        let (gate_field, _) = io::read_field(&args.field)?;
        let prep = args
            .prep_field
            .as_deref()
            .map(io::read_field)
            .transpose()?
            .map(|(f, _)| f);
        let basis = self.basis()?;
        let target = self.target_gate()?;
        let grid = self.cfg.sim.grid()?;
        let n = grid.n;
        let d = basis.dim();
        let n_p = self.cfg.sim.pulses;
        let packet = self.packet(args.packet)?;
        let psi0 = gaussian_packet(&grid, packet.sigma, packet.x0)?;
        let c0 = encode(&psi0)?;
        self.write_amplitudes(&format!("amplitudes_packet{}.csv", args.packet), &c0)?;
        let mut ideal = CVector::zeros(d);
        for j in 0..n {
            ideal[j] = c0.c[j];
        }

        // Reference: the grid packet under U_s, and the analytic evolution.
        let exact = classic_propagate(&psi0, &target, n_p)?;
        let exact_probs: Vec<Array1<f64>> = exact.iter().map(|p| p.density()).collect();
        let mut rows = Vec::new();
        for (l, p) in exact_probs.iter().enumerate() {
            let t = l as f64 * self.cfg.sim.delta_t;
            let analytic = analytic_coherent_evolution(&self.cfg.sim.system, &grid, packet.sigma, packet.x0, t)
                .map(|a| a.density())
                .ok();
            for j in 0..n {
                let a = analytic.as_ref().map_or(f64::NAN, |a| a[j]);
                rows.push(vec![l as f64, j as f64, grid.points[j], p[j], a]);
            }
        }
        io::write_csv(
            &self.path("exact.csv"),
            &self.header(),
            &["pulse", "j", "x", "prob_gate", "prob_analytic"],
            &rows,
        )?;

        let mut kappas = vec![0.0];
        kappas.extend(self.cfg.dissipation.kappas.iter().copied().filter(|&k| k > 0.0));
        let t_prep = prep.as_ref().map_or(0.0, |f| f.t_pulse());
        let mut prepared_overlap = 1.0;
        let mut runs = Vec::new();
        for &k in &kappas {
            let diss = if k == 0.0 {
                DissipationModel::none(d)
            } else {
                build_dissipation_with(&basis, k, &self.cfg.dissipation.deltas, self.cfg.dissipation.pairs)?
            };
            let start = match &prep {
                None => QuantumState::Pure(ideal.clone()),
                Some(f) => {
                    let s = pulse_sequence(&QuantumState::basis(d, 0), f, &basis, &diss, 1)?
                        .pop()
                        .unwrap();
                    if k == 0.0 {
                        let traj = propagate_tdse(&QuantumState::basis(d, 0), f, &basis, usize::MAX)?;
                        if let QuantumState::Pure(c) = traj.last() {
                            let ov: C64 = ideal.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
                            prepared_overlap = ov.norm_sqr();
                        }
                    }
                    s
                }
            };
            let states = pulse_sequence(&start, &gate_field, &basis, &diss, n_p)?;
            let tag = kappa_tag(k);
            let mut names = vec!["pulse".to_string(), "t_au".to_string()];
            names.extend((0..d).map(|j| format!("p{j}")));
            names.push("trace".into());
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            let rows: Vec<Vec<f64>> = states
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    let p = s.populations();
                    let mut row = vec![l as f64, t_prep + l as f64 * gate_field.t_pulse()];
                    row.extend(p.iter().copied());
                    row.push(p.sum());
                    row
                })
                .collect();
            io::write_csv(
                &self.path(&format!("trajectory_kappa{tag}.csv")),
                &self.header().with("kappa_au", k),
                &names,
                &rows,
            )?;
            let probs: Vec<Array1<f64>> = states
                .iter()
                .map(|s| decode_amplitudes_from_populations(&register_populations(s, n), &grid))
                .collect();
            let mut rows = Vec::new();
            for (l, p) in probs.iter().enumerate() {
                for j in 0..n {
                    rows.push(vec![l as f64, j as f64, grid.points[j], p[j]]);
                }
            }
            io::write_csv(
                &self.path(&format!("populations_kappa{tag}.csv")),
                &self.header().with("kappa_au", k),
                &["pulse", "j", "x", "prob"],
                &rows,
            )?;
            let z: Vec<f64> = states
                .iter()
                .enumerate()
                .map(|(l, s)| mean_position_ion(s, &basis, t_prep + l as f64 * gate_field.t_pulse()))
                .collect::<Result<_>>()?;
            let x: Vec<f64> = probs
                .iter()
                .map(|p| mean_position_sim(p, &grid))
                .collect::<Result<_>>()?;
            let x_exact: Vec<f64> = exact_probs
                .iter()
                .map(|p| mean_position_sim(p, &grid))
                .collect::<Result<_>>()?;
            let rows: Vec<Vec<f64>> = (0..=n_p)
                .map(|l| vec![l as f64, z[l], units::bohr_to_nm(z[l]), x[l], x_exact[l]])
                .collect();
            io::write_csv(
                &self.path(&format!("positions_kappa{tag}.csv")),
                &self.header().with("kappa_au", k),
                &["pulse", "z_ion_au", "z_ion_nm", "x_sim", "x_gate"],
                &rows,
            )?;
            let fid = fidelity_trace(&gate_field, &basis, &diss, &target, n_p)?;
            let rows: Vec<Vec<f64>> = fid.iter().enumerate().map(|(l, f)| vec![(l + 1) as f64, *f]).collect();
            io::write_csv(
                &self.path(&format!("fidelity_kappa{tag}.csv")),
                &self.header().with("kappa_au", k),
                &["pulse", "F"],
                &rows,
            )?;
            let residual = periodicity_residual(&probs)?;
            println!(
                "simulate kappa = {k:e}: periodicity residual {residual:.3e}, fidelity after {n_p} pulses {:.6}",
                fid.last().copied().unwrap_or(1.0)
            );
            runs.push(SimulateRun {
                kappa: k,
                mean_heating_time_s: diss.mean_heating_time_s(),
                periodicity_residual: residual,
                fidelity: fid,
                mean_position_ion_au: z,
                mean_position_sim_au: x,
            });
        }
        let doc = SimulateDoc {
            packet,
            prepared_overlap,
            exact_periodicity_residual: periodicity_residual(&exact_probs)?,
            runs,
        };
        io::write_json(&self.path("simulation.json"), &self.hash, &doc)
    }

    fn analyze(&self, args: &AnalyzeArgs) -> Result<()> {
        let (field, _) = io::read_field(&args.field)?;
        let basis = self.basis()?;
        let band = match &args.band {
            Some(b) => parse_band(b)?,
            None => default_band(&basis)?,
        };
        let spec = spectrum(&field);
        let rows: Vec<Vec<f64>> = spec
            .frequencies
            .iter()
            .zip(&spec.power)
            .map(|(f, p)| vec![*f, *p])
            .collect();
        let stem = args
            .field
            .file_stem()
            .map_or("field".into(), |s| s.to_string_lossy().into_owned());
        io::write_csv(
            &self.path(&format!("spectrum_{stem}.csv")),
            &self.header(),
            &["nu_Hz", "power"],
            &rows,
        )?;
        let filtered = bandpass_filter(&field, band)?;
        io::write_field(
            &self.path(&format!("{stem}_filtered.csv")),
            &filtered,
            &self.header().with("band_hz", format!("{} {}", band.0, band.1)),
        )?;
        let peaks = spec.peaks(0.01);
        let lines: Vec<f64> = transition_table(&basis, &[1, 3])?
            .iter()
            .map(|t| t.frequency_hz)
            .collect();
        let offsets = peaks
            .iter()
            .map(|p| lines.iter().map(|l| (p - l).abs()).fold(f64::INFINITY, f64::min) / spec.resolution)
            .collect();
        let target = self.target_gate()?;
        let n = target.dim();
        let before = fidelity(&target, &evolution_operator(&field, &basis, n)?)?;
        let after = fidelity(&target, &evolution_operator(&filtered, &basis, n)?)?;
        println!(
            "analyze: {} peaks above 1%, gate fidelity {before:.8} -> {after:.8} after filtering to [{:.3}, {:.3}] MHz",
            peaks.len(),
            band.0 / 1e6,
            band.1 / 1e6
        );
        let doc = AnalyzeDoc {
            band_hz: band,
            resolution_hz: spec.resolution,
            parseval_error: spec.parseval_error(),
            peaks_hz: peaks,
            nearest_line_offset_bins: offsets,
            fidelity_before: before,
            fidelity_after: after,
        };
        io::write_json(&self.path(&format!("analysis_{stem}.json")), &self.hash, &doc)
    }
}

/// `|c_j|^2 / dx` from register populations.
fn decode_amplitudes_from_populations(p: &Array1<f64>, grid: &Grid) -> Array1<f64> {
    p / grid.delta_x
}

fn parse_band(text: &str) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| Error::invalid(format!("band must be 'lo,hi', got '{text}'")))?;
    let hz = |s: &str| -> Result<f64> {
        let s = s.trim();
        let with_unit = if s.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
            s.to_string()
        } else {
            format!("{s} MHz")
        };
        // Quantities parse to angular a.u.; convert back to Hz.
        Ok(units::hartree_to_hz(parse_quantity(&with_unit, Dimension::Frequency)?))
    };
    Ok((hz(lo)?, hz(hi)?))
}

fn read_trace(path: &Path) -> Result<Vec<OctRecord>> {
    let t = io::read_csv(path)?;
    let col = |name: &str| {
        t.column(name).ok_or_else(|| Error::Parse {
            path: path.into(),
            message: format!("missing column {name}"),
        })
    };
    let (it, j, f, fl) = (col("iteration")?, col("J")?, col("F")?, col("fluence")?);
    Ok((0..it.len())
        .map(|i| OctRecord {
            iteration: it[i] as usize,
            objective: j[i],
            fidelity: f[i],
            fluence: fl[i],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_lists() {
        assert_eq!(parse_kappas("1e-18,5e-18").unwrap(), vec![1e-18, 5e-18]);
        assert_eq!(parse_kappas("1e-18, 5e-18 au").unwrap(), vec![1e-18, 5e-18]);
        assert!(parse_kappas("-1").is_err());
    }

    #[test]
    fn bands() {
        let (lo, hi) = parse_band("0.5,16").unwrap();
        assert!((lo - 0.5e6).abs() < 1e-3 && (hi - 16e6).abs() < 1e-3);
        assert!(parse_band("3").is_err());
    }
}
