//! Acceptance suite: one verdict line per criterion, with the measured value
//! and tolerance of every sub-check printed underneath.
//!
//! Runs as a plain binary (`harness = false`). The long-running paper-tier
//! criterion runs only with `--include-ignored`/`--ignored` or
//! `IONTRAP_PAPER_TIER=1`.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use iontrap::analysis::{bandpass_filter, mean_position_ion, spectrum};
use iontrap::config::{RunConfig, Tier};
use iontrap::encoder::{decode, encode};
use iontrap::field::ControlField;
use iontrap::gridsim::{classic_propagate, elementary_gate, gaussian_packet, make_grid, GateMatrix, SimSystem};
use iontrap::linalg::{hermitian_eigenvalues, hermiticity_deviation, trace, CVector, C64};
use iontrap::oct::{fidelity, make_guess_field, phase_spread, Functional, OctConfig, OctTrace, Optimizer, TargetSet};
use iontrap::propagator::{
    build_dissipation, evolution_operator, outer, propagate_lindblad, propagate_tdse, DissipationModel, QuantumState,
};
use iontrap::trap::{solve_trap, transition_table, EigenBasis, TrapParams};
use iontrap::units;

type Criterion = Box<dyn FnOnce(&mut Option<DeskRuns>) -> Report>;

/// Sub-check results of one criterion.
#[derive(Default)]
struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.lines.push((ok, what.into()));
    }

    /// `|value/target - 1| <= rel`.
    fn relative(&mut self, what: &str, value: f64, target: f64, rel: f64) {
        let dev = (value / target - 1.0).abs();
        self.check(
            dev <= rel,
            format!("{what}: {value:.6e} vs {target:.6e}, rel dev {dev:.3e} (tol {rel:.1e})"),
        );
    }

    fn at_most(&mut self, what: &str, value: f64, limit: f64) {
        self.check(value <= limit, format!("{what}: {value:.3e} (limit {limit:.1e})"));
    }

    fn at_least(&mut self, what: &str, value: f64, limit: f64) {
        self.check(value >= limit, format!("{what}: {value:.6} (minimum {limit})"));
    }

    fn note(&mut self, what: impl Into<String>) {
        self.lines.push((true, format!("note: {}", what.into())));
    }

    fn runtime(&mut self, elapsed: Duration, budget: Duration) {
        self.check(
            elapsed <= budget,
            format!(
                "runtime {:.2} s (budget {:.0} s)",
                elapsed.as_secs_f64(),
                budget.as_secs_f64()
            ),
        );
    }
}

fn paper_basis() -> EigenBasis {
    solve_trap(&TrapParams::default()).unwrap()
}

fn harmonic_params() -> TrapParams {
    TrapParams {
        k_quart: 0.0,
        ..TrapParams::default()
    }
}

fn paper_gate() -> GateMatrix {
    let grid = make_grid(-4.0, 4.0, 16).unwrap();
    elementary_gate(&SimSystem::default(), &grid, TAU / 10.0, 10).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn padded(c: &CVector, d: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v.slice_mut(ndarray::s![..c.len()]).assign(c);
    v
}

fn monotone(trace: &OctTrace) -> (usize, f64) {
    let mut bad = 0;
    let mut worst = 0.0f64;
    for w in trace.records.windows(2) {
        let drop = w[0].objective - w[1].objective;
        if drop > 1e-10 * w[0].objective.abs() {
            bad += 1;
        }
        worst = worst.max(drop);
    }
    (bad, worst)
}

fn criterion_1() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let p = TrapParams::default();
    let omega_ref = TAU * 2.77e6 * units::AU_TIME_S;
    r.relative("omega = sqrt(qk/m) vs 2 pi x 2.77 MHz", p.omega(), omega_ref, 1e-3);

    let basis = paper_basis();
    let w = p.omega();
    let l2 = 1.0 / (2.0 * p.mass * w);
    let mut worst = (0usize, 0.0f64);
    for n in 0..=8 {
        let nf = n as f64;
        let oracle = w * (nf + 0.5) + p.charge * p.k_quart / 24.0 * 3.0 * l2 * l2 * (2.0 * nf * nf + 2.0 * nf + 1.0);
        let dev = (basis.energies[n] / oracle - 1.0).abs();
        if dev > worst.1 {
            worst = (n, dev);
        }
    }
    r.check(
        worst.1 <= 1e-2,
        format!(
            "E_n vs first-order perturbation, n <= 8: worst rel dev {:.3e} at n = {} (tol 1.0e-2)",
            worst.1, worst.0
        ),
    );

    let harmonic = solve_trap(&harmonic_params()).unwrap();
    let mu01 = harmonic.dipole[[0, 1]].abs();
    let oracle = p.charge * l2.sqrt();
    r.relative("harmonic mu_01 vs q sqrt(hbar / 2 m omega)", mu01, oracle, 1e-8);
    r.note(format!("mu_01 = {mu01:.4} a.u."));

    let nu: Vec<f64> = (0..15).map(|j| basis.transition_frequency_hz(j, j + 1)).collect();
    r.note(format!(
        "nu_(j,j+1) increasing: {}; range {:.4}..{:.4} MHz",
        nu.windows(2).all(|w| w[1] > w[0]),
        nu[0] / 1e6,
        nu[14] / 1e6
    ));
    r.runtime(start.elapsed(), Duration::from_secs(1));
    r
}

fn criterion_2() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let gate = paper_gate();
    r.at_most(
        "U_s(2 pi/10), K = 10 unitarity deviation",
        gate.unitarity_deviation(),
        1e-10,
    );

    let grid = make_grid(-4.0, 4.0, 16).unwrap();
    let psi0 = gaussian_packet(&grid, 1.0, -0.75).unwrap();
    let snaps = classic_propagate(&psi0, &gate, 10).unwrap();
    let dens: Vec<Vec<f64>> = snaps.iter().map(|p| p.density().to_vec()).collect();
    let residual = (0..=4)
        .map(|l| max_abs_diff(&dens[l], &dens[10 - l]))
        .fold(0.0, f64::max);
    r.at_most("|psi_l|^2 vs |psi_(10-l)|^2, l = 0..4", residual, 2e-3);
    let dx = grid.delta_x;
    r.note(format!("same residual on populations |c_j|^2: {:.3e}", residual * dx));

    let fine = make_grid(-4.0, 4.0, 64).unwrap();
    let period = elementary_gate(&SimSystem::default(), &fine, TAU, 100).unwrap();
    let p0 = gaussian_packet(&fine, 1.0, -0.75).unwrap();
    let back = classic_propagate(&p0, &period, 1).unwrap();
    let ret = max_abs_diff(&back[1].density().to_vec(), &p0.density().to_vec());
    r.at_most("N = 64 full-period return of |psi|^2", ret, 1e-3);
    r.note(format!(
        "N = 64 return on populations: {:.3e}; edge weight of the packet {:.2e}",
        ret * fine.delta_x,
        p0.boundary_weight()
    ));
    r.runtime(start.elapsed(), Duration::from_secs(5));
    r
}

fn criterion_3() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let grid = make_grid(-4.0, 4.0, 16).unwrap();
    let psi = gaussian_packet(&grid, 1.0, -0.75).unwrap();
    let c = encode(&psi).unwrap();
    let back = decode(&c);
    r.at_most(
        "decode(encode(psi)) vs |psi|^2",
        max_abs_diff(&back.to_vec(), &psi.density().to_vec()),
        1e-12,
    );
    let re = encode(&iontrap::encoder::to_wavepacket(&c, &grid).unwrap()).unwrap();
    let amp =
        c.c.iter()
            .zip(re.c.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    r.at_most("encode(to_wavepacket(c)) vs c", amp, 1e-12);

    let basis = paper_basis();
    let state = QuantumState::pure(padded(&c.c, basis.dim())).unwrap();
    let z = mean_position_ion(&state, &basis, 0.0).unwrap();
    r.relative(
        "|<z>| of the encoded sigma = 1, x0 = -0.75 packet vs 114.8 a.u.",
        z.abs(),
        114.8,
        0.05,
    );
    r.note(format!("<z> = {z:.3} a.u. = {:.3} nm", units::bohr_to_nm(z)));
    r.runtime(start.elapsed(), Duration::from_secs(1));
    r
}

fn desk_basis() -> EigenBasis {
    solve_trap(&TrapParams::desk()).unwrap()
}

/// Desk guess field scaled so its peak (about 1.3 V/m) matches converged fields.
fn strong_field(basis: &EigenBasis, dt: f64) -> ControlField {
    let cfg = OctConfig {
        dt,
        guess_amplitude: units::vpm_to_au(0.5),
        ..OctConfig::desk(Functional::F)
    };
    make_guess_field(basis, &cfg).unwrap()
}

fn rabi_period(basis: &EigenBasis) -> (f64, f64) {
    let two = basis.truncated(2).unwrap();
    let w01 = two.energies[1] - two.energies[0];
    let mu = two.dipole[[0, 1]].abs();
    let rabi = w01 / 2000.0;
    let e0 = rabi / mu;
    let expected = TAU / rabi;
    // Fine sampling keeps the midpoint interpolation error ((w h)^2 / 12) near 5e-5.
    let steps_per_cycle = 256.0;
    let t_end = 0.9 * expected;
    let n = (t_end / (TAU / w01) * steps_per_cycle).ceil() as usize;
    let field = ControlField::from_fn(n, t_end / n as f64, |t| e0 * (w01 * t).cos()).unwrap();
    let traj = propagate_tdse(&QuantumState::basis(2, 0), &field, &two, 1).unwrap();
    let p1: Vec<f64> = traj.states.iter().map(|s| s.populations()[1]).collect();
    // P1 = sin^2(Omega t / 2) crosses 1/2 at T/4 and 3T/4, where it is steepest.
    let crossings: Vec<f64> = p1
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] - 0.5) * (w[1] - 0.5) < 0.0)
        .map(|(i, w)| traj.times[i] + (0.5 - w[0]) / (w[1] - w[0]) * field.dt())
        .collect();
    assert_eq!(crossings.len(), 2, "expected two half-population crossings");
    (2.0 * (crossings[1] - crossings[0]), expected)
}

fn criterion_4() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let basis = desk_basis();
    let cfg = OctConfig::desk(Functional::F);
    let d = basis.dim();

    let zero = ControlField::zeros(cfg.n_steps(), cfg.dt).unwrap();
    let u = evolution_operator(&zero, &basis, d).unwrap();
    let id_dev = u.entries.indexed_iter().fold(0.0f64, |m, ((a, b), z)| {
        m.max((z - if a == b { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).norm())
    });
    r.at_most("zero field: propagator vs identity", id_dev, 1e-14);

    let (period, expected) = rabi_period(&basis);
    r.relative("two-level Rabi period vs 2 pi / (mu_01 E0)", period, expected, 1e-3);

    let field = strong_field(&basis, cfg.dt);
    let mut psi = CVector::zeros(d);
    psi[0] = C64::new(0.6, 0.0);
    psi[1] = C64::new(0.0, 0.8);
    let pure = QuantumState::pure(psi.clone()).unwrap();
    let diss = build_dissipation(&basis, 1e-17, &[1, 3]).unwrap();
    let traj = propagate_lindblad(&pure, &field, &basis, &diss, 100).unwrap();
    let (mut tr, mut herm, mut eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for s in &traj.states {
        let rho = s.to_density();
        tr = tr.max((trace(&rho.view()).re - 1.0).abs());
        herm = herm.max(hermiticity_deviation(&rho.view()));
        eig = eig.min(hermitian_eigenvalues(&rho.view())[0]);
    }
    r.at_most("Lindblad (kappa = 1e-17) trace drift", tr, 1e-8);
    r.at_most("Lindblad Hermiticity deviation", herm, 1e-10);
    r.check(
        eig >= -1e-6,
        format!("Lindblad minimum eigenvalue: {eig:.3e} (limit -1.0e-6)"),
    );

    let closed = propagate_tdse(&pure, &field, &basis, usize::MAX).unwrap();
    let open = propagate_lindblad(&pure, &field, &basis, &DissipationModel::none(d), usize::MAX).unwrap();
    let QuantumState::Pure(c) = closed.last() else {
        unreachable!()
    };
    let rho = open.last().to_density();
    let limit = (&rho - &outer(c, c)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    r.at_most("kappa = 0 Lindblad vs |c><c| from the TDSE", limit, 1e-8);

    // Same piecewise-linear field, sampled twice as densely.
    let e = field.samples();
    let mut dense = Vec::with_capacity(2 * e.len() - 1);
    for w in e.windows(2) {
        dense.extend([w[0], 0.5 * (w[0] + w[1])]);
    }
    dense.push(e[e.len() - 1]);
    let half = ControlField::new(dense, field.dt() / 2.0).unwrap();
    let fine = propagate_tdse(&pure, &half, &basis, usize::MAX).unwrap();
    let QuantumState::Pure(cf) = fine.last() else {
        unreachable!()
    };
    let halving = c.iter().zip(cf.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    r.at_most("RK4 step halving, final amplitudes", halving, 1e-6);
    r.note(format!(
        "field peak {:.3} V/m over {} steps",
        units::au_to_vpm(field.peak()),
        field.n_steps()
    ));
    r.runtime(start.elapsed(), Duration::from_secs(30));
    r
}

fn criterion_5() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let basis = paper_basis();
    for (kappa, target) in [(5e-18, 55e-3), (1e-18, 110e-3)] {
        let t = build_dissipation(&basis, kappa, &[1, 3]).unwrap().mean_heating_time_s();
        r.relative(&format!("mean heating time at kappa = {kappa:e}, s"), t, target, 0.10);
    }
    r.runtime(start.elapsed(), Duration::from_secs(1));
    r
}

/// Converged desk fields shared with the spectral criterion.
struct DeskRuns {
    fields: Vec<(Functional, ControlField)>,
}

fn desk_setup() -> (EigenBasis, RunConfig, GateMatrix) {
    let cfg = RunConfig::defaults(Tier::Desk);
    let basis = solve_trap(&cfg.trap).unwrap();
    let s = &cfg.sim;
    let gate = elementary_gate(&s.system, &s.grid().unwrap(), s.delta_t, s.substeps).unwrap();
    (basis, cfg, gate)
}

fn criterion_6(runs: &mut Option<DeskRuns>) -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let (basis, cfg, gate) = desk_setup();
    let mut fields = Vec::new();
    for functional in [Functional::F, Functional::P] {
        let oct = OctConfig {
            max_iterations: 500,
            ..cfg.oct_for(functional)
        };
        let targets = TargetSet::new(gate.clone(), functional == Functional::P).unwrap();
        let t0 = Instant::now();
        let (field, trace) = Optimizer::new(&basis, &oct).gate(&targets).unwrap();
        let (bad, worst) = monotone(&trace);
        r.check(
            bad == 0,
            format!(
                "J_{functional:?}: objective non-decreasing over {} iterations (largest drop {worst:.2e})",
                trace.records.len() - 1
            ),
        );
        let first = trace.records.iter().find(|rec| rec.fidelity >= 0.99);
        r.check(
            first.is_some(),
            format!(
                "J_{functional:?}: F >= 0.99 within 500 iterations (reached at {}, final F = {:.6} after {}, {:.0} s)",
                first.map_or("never".to_string(), |rec| rec.iteration.to_string()),
                trace.last().fidelity,
                trace.last().iteration,
                t0.elapsed().as_secs_f64()
            ),
        );
        let realized = evolution_operator(&field, &basis, targets.n()).unwrap();
        r.at_most(
            &format!("J_{functional:?}: common-phase spread, rad"),
            phase_spread(&gate, &realized),
            0.2,
        );
        fields.push((functional, field));
    }

    let kappa0 = DissipationModel::none(basis.dim());
    for functional in [Functional::F, Functional::P] {
        let oct = OctConfig {
            max_iterations: 3,
            ..cfg.oct_for(functional)
        };
        let targets = TargetSet::new(gate.clone(), functional == Functional::P).unwrap();
        let (fc, tc) = Optimizer::new(&basis, &oct).gate(&targets).unwrap();
        let (fd, td) = Optimizer::new(&basis, &oct)
            .gate_dissipative(&targets, &kappa0)
            .unwrap();
        let scale = fc.peak();
        let df = max_abs_diff(fc.samples(), fd.samples()) / scale;
        let dj = tc
            .records
            .iter()
            .zip(&td.records)
            .fold(0.0f64, |m, (a, b)| m.max((a.fidelity - b.fidelity).abs()));
        r.at_most(
            &format!("J_{functional:?}: dissipative (kappa = 0) vs closed field, relative to peak"),
            df,
            1e-6,
        );
        r.at_most(
            &format!("J_{functional:?}: dissipative (kappa = 0) vs closed fidelity trace"),
            dj,
            1e-6,
        );
    }
    *runs = Some(DeskRuns { fields });
    r.runtime(start.elapsed(), Duration::from_secs(600));
    r
}

fn criterion_7(runs: &Option<DeskRuns>) -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let (basis, _, gate) = desk_setup();
    let lines: Vec<f64> = transition_table(&basis, &[1, 3])
        .unwrap()
        .iter()
        .map(|t| t.frequency_hz)
        .collect();
    match runs {
        Some(runs) => {
            for (functional, field) in &runs.fields {
                let s = spectrum(field);
                let peaks = s.peaks(0.01);
                let offsets: Vec<f64> = peaks
                    .iter()
                    .map(|p| lines.iter().map(|l| (p - l).abs()).fold(f64::INFINITY, f64::min) / s.resolution)
                    .collect();
                let worst = offsets.iter().copied().fold(0.0, f64::max);
                r.check(
                    !peaks.is_empty() && worst <= 1.0,
                    format!(
                        "J_{functional:?} field: {} peaks above 1%, worst distance to a register line {worst:.2} bins (limit 1)",
                        peaks.len()
                    ),
                );
                let on_line: f64 = s
                    .frequencies
                    .iter()
                    .zip(&s.power)
                    .filter(|(nu, _)| lines.iter().any(|l| (*nu - l).abs() <= s.resolution))
                    .map(|(_, p)| p)
                    .sum::<f64>()
                    / s.power.iter().sum::<f64>();
                r.note(format!(
                    "J_{functional:?} field: {:.1}% of the spectral power lies within one bin of a register line",
                    100.0 * on_line
                ));
                let nyquist = 0.5 / units::au_to_seconds(field.dt());
                let full = bandpass_filter(field, (0.0, nyquist)).unwrap();
                r.at_most(
                    &format!("J_{functional:?} field: full-band filter is the identity"),
                    max_abs_diff(full.samples(), field.samples()) / field.peak(),
                    1e-10,
                );
                let band = iontrap::analysis::default_band(&basis).unwrap();
                let f1 = bandpass_filter(field, band).unwrap();
                let f2 = bandpass_filter(&f1, band).unwrap();
                r.at_most(
                    &format!("J_{functional:?} field: band-pass idempotence"),
                    max_abs_diff(f1.samples(), f2.samples()) / field.peak(),
                    1e-12,
                );
                let realized =
                    |f: &ControlField| fidelity(&gate, &evolution_operator(f, &basis, gate.dim()).unwrap()).unwrap();
                r.note(format!(
                    "J_{functional:?}: F = {:.6} before, {:.6} after the default band-pass; peak {:.2} V/m",
                    realized(field),
                    realized(&f1),
                    units::au_to_vpm(field.peak())
                ));
            }
        }
        None => r.check(false, "no converged desk fields (criterion 6 did not finish)"),
    }

    let paper = paper_basis();
    let guess = make_guess_field(&paper, &OctConfig::paper(Functional::F)).unwrap();
    let s = spectrum(&guess);
    let peaks = s.peaks(0.01);
    let paper_lines: Vec<f64> = transition_table(&paper, &[1, 3])
        .unwrap()
        .iter()
        .map(|t| t.frequency_hz)
        .collect();
    let worst = peaks
        .iter()
        .map(|p| paper_lines.iter().map(|l| (p - l).abs()).fold(f64::INFINITY, f64::min) / s.resolution)
        .fold(0.0, f64::max);
    r.check(
        peaks.len() == 28 && worst <= 1.0,
        format!(
            "paper guess field: {} spectral lines (expected 28), worst offset {worst:.2} bins",
            peaks.len()
        ),
    );
    // Line selectivity: pulse length times the smallest register line spacing.
    let selectivity = |b: &EigenBasis, t_pulse: f64| {
        let mut nu: Vec<f64> = transition_table(b, &[1, 3])
            .unwrap()
            .iter()
            .map(|t| t.frequency_hz)
            .collect();
        nu.sort_by(f64::total_cmp);
        let gap = nu.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        units::au_to_seconds(t_pulse) * gap
    };
    r.note(format!(
        "T x smallest line spacing: desk {:.2}, paper {:.2}",
        selectivity(&basis, OctConfig::desk(Functional::P).t_pulse),
        selectivity(&paper, OctConfig::paper(Functional::P).t_pulse)
    ));
    r.runtime(start.elapsed(), Duration::from_secs(10));
    r
}

fn criterion_8() -> Report {
    let mut r = Report::default();
    let start = Instant::now();
    let cfg = RunConfig::defaults(Tier::Paper);
    let basis = solve_trap(&cfg.trap).unwrap();
    let s = &cfg.sim;
    let gate = elementary_gate(&s.system, &s.grid().unwrap(), s.delta_t, s.substeps).unwrap();
    let oct = OctConfig {
        fidelity_goal: 0.999,
        ..cfg.oct_for(Functional::P)
    };
    let targets = TargetSet::new(gate.clone(), true).unwrap();
    let (field, trace) = Optimizer::new(&basis, &oct).gate(&targets).unwrap();
    r.at_least(
        "paper J_P fidelity within 1500 iterations",
        trace.last().fidelity,
        0.999,
    );
    let diss = build_dissipation(&basis, 1e-18, &[1, 3]).unwrap();
    let oct = OctConfig {
        fidelity_goal: 0.995,
        max_iterations: 300,
        ..oct
    };
    let (_, trace) = Optimizer::new(&basis, &oct)
        .guess(field)
        .gate_dissipative(&targets, &diss)
        .unwrap();
    r.at_least(
        "paper dissipative re-optimization at kappa = 1e-18",
        trace.last().fidelity,
        0.995,
    );
    r.note(format!("elapsed {:.1} h", start.elapsed().as_secs_f64() / 3600.0));
    r
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Report) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Report {
                lines: vec![(false, format!("panicked: {msg}"))],
            }
        }
    };
    let ok = report.lines.iter().all(|(ok, _)| *ok);
    println!("criterion {id} {name}: {}", if ok { "PASS" } else { "FAIL" });
    for (ok, line) in &report.lines {
        println!("    [{}] {line}", if *ok { "ok" } else { "FAIL" });
    }
    ok
}

fn main() {
    // Panics are reported as failed sub-checks.
    std::panic::set_hook(Box::new(|_| {}));
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let paper_tier = args.iter().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("IONTRAP_PAPER_TIER").is_ok_and(|v| v == "1");
    let filter = args.iter().skip(1).find(|a| !a.starts_with('-')).cloned();
    let wanted = |id: usize| {
        filter
            .as_deref()
            .is_none_or(|f| f.trim_start_matches("criterion_") == id.to_string())
    };

    let mut runs = None;
    let mut results = Vec::new();
    let criteria: [(usize, &str, Criterion); 7] = [
        (1, "trap physics", Box::new(|_| criterion_1())),
        (2, "gate construction", Box::new(|_| criterion_2())),
        (3, "encoding", Box::new(|_| criterion_3())),
        (4, "propagators", Box::new(|_| criterion_4())),
        (5, "dissipation calibration", Box::new(|_| criterion_5())),
        (6, "optimal control, desk scale", Box::new(criterion_6)),
        (7, "field realism and spectra", Box::new(|_| Report::default())),
    ];
    for (id, name, f) in criteria {
        if !wanted(id) {
            continue;
        }
        let ok = if id == 7 {
            if runs.is_none() {
                // Spectra need converged fields.
                let mut r = None;
                let _ = criterion_6(&mut r);
                runs = r;
            }
            run(id, name, || criterion_7(&runs))
        } else {
            run(id, name, || f(&mut runs))
        };
        results.push(ok);
    }
    if paper_tier && wanted(8) {
        results.push(run(8, "paper tier (long-running)", criterion_8));
    } else {
        println!("criterion 8 paper tier (long-running): SKIPPED (pass --include-ignored or set IONTRAP_PAPER_TIER=1)");
    }
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
