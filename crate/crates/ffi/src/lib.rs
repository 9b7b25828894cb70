//! C ABI over the `iontrap` core.
//!
//! Objects are opaque heap handles released with the matching `*_free`.
//! Every entry point returns an [`IontrapStatus`]; on failure the message is
//! kept per thread and read back with [`iontrap_last_error`]. Panics are
//! caught at the boundary and reported as `IONTRAP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iontrap::field::ControlField;
use iontrap::gridsim::{elementary_gate, make_grid, GateMatrix, Potential, SimSystem};
use iontrap::oct::{fidelity, make_guess_field, Functional, OctConfig};
use iontrap::propagator::{build_dissipation, evolution_operator, DEFAULT_DELTAS};
use iontrap::trap::{solve_trap, EigenBasis, TrapParams};
use iontrap::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IontrapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    NotConverged = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Problem size for [`iontrap_trap_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IontrapTier {
    Desk = 0,
    Paper = 1,
}

/// Trap constants in atomic units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IontrapTrapParams {
    pub mass: f64,
    pub charge: f64,
    pub k: f64,
    pub k_quart: f64,
    pub primitive_size: usize,
    pub dynamical_size: usize,
    pub computational_size: usize,
}

impl From<&TrapParams> for IontrapTrapParams {
    fn from(p: &TrapParams) -> Self {
        IontrapTrapParams {
            mass: p.mass,
            charge: p.charge,
            k: p.k,
            k_quart: p.k_quart,
            primitive_size: p.primitive_size,
            dynamical_size: p.dynamical_size,
            computational_size: p.computational_size,
        }
    }
}

impl From<&IontrapTrapParams> for TrapParams {
    fn from(p: &IontrapTrapParams) -> Self {
        TrapParams {
            mass: p.mass,
            charge: p.charge,
            k: p.k,
            k_quart: p.k_quart,
            primitive_size: p.primitive_size,
            dynamical_size: p.dynamical_size,
            computational_size: p.computational_size,
        }
    }
}

/// Diagonalized trap.
pub struct IontrapBasis(EigenBasis);

/// Square complex gate matrix.
pub struct IontrapGate(GateMatrix);

/// Sampled control field.
pub struct IontrapField(ControlField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IontrapStatus {
    match e {
        Error::Numerical(_) => IontrapStatus::Numerical,
        Error::NotConverged(_) => IontrapStatus::NotConverged,
        _ => IontrapStatus::InvalidInput,
    }
}

/// Internal failure carried to the boundary.
enum Fault {
    Null(&'static str),
    Small { needed: usize, given: usize },
    Core(Error),
}

impl From<Error> for Fault {
    fn from(e: Error) -> Self {
        Fault::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fault>) -> IontrapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IontrapStatus::Ok,
        Ok(Err(Fault::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            IontrapStatus::NullPointer
        }
        Ok(Err(Fault::Small { needed, given })) => {
            set_error(format!("buffer holds {given} elements, {needed} needed"));
            IontrapStatus::BufferTooSmall
        }
        Ok(Err(Fault::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IontrapStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fault> {
    p.as_ref().ok_or(Fault::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fault> {
    p.as_mut().ok_or(Fault::Null(what))
}

/// Copy into a caller buffer of `len` elements.
unsafe fn fill(values: impl ExactSizeIterator<Item = f64>, buf: *mut f64, len: usize) -> Result<(), Fault> {
    let needed = values.len();
    if buf.is_null() {
        return Err(Fault::Null("output buffer"));
    }
    if len < needed {
        return Err(Fault::Small { needed, given: len });
    }
    let dst = std::slice::from_raw_parts_mut(buf, needed);
    for (d, v) in dst.iter_mut().zip(values) {
        *d = v;
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copy the last error of this thread, NUL-terminated, into `buf`.
/// `*needed` (if non-null) receives the size including the terminator.
/// Returns `IONTRAP_STATUS_BUFFER_TOO_SMALL` when `len` is insufficient.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn iontrap_last_error(buf: *mut c_char, len: usize, needed: *mut usize) -> IontrapStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone()).unwrap_or_default();
    let bytes = msg.as_bytes_with_nul();
    if !needed.is_null() {
        *needed = bytes.len();
    }
    if len < bytes.len() || buf.is_null() {
        return IontrapStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
    IontrapStatus::Ok
}

/// Default trap constants for a tier.
///
/// # Safety
/// `params` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iontrap_trap_params_default(
    tier: IontrapTier,
    params: *mut IontrapTrapParams,
) -> IontrapStatus {
    guard(|| {
        let p = match tier {
            IontrapTier::Desk => TrapParams::desk(),
            IontrapTier::Paper => TrapParams::default(),
        };
        *out(params, "params")? = (&p).into();
        Ok(())
    })
}

/// Diagonalize the trap Hamiltonian.
///
/// # Safety
/// `params` and `basis` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iontrap_basis_solve(
    params: *const IontrapTrapParams,
    basis: *mut *mut IontrapBasis,
) -> IontrapStatus {
    guard(|| {
        let p = borrow(params, "params")?;
        let slot = out(basis, "basis")?;
        *slot = boxed(IontrapBasis(solve_trap(&p.into())?));
        Ok(())
    })
}

/// Number of retained eigenstates D.
///
/// # Safety
/// `basis` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iontrap_basis_dim(basis: *const IontrapBasis, dim: *mut usize) -> IontrapStatus {
    guard(|| {
        *out(dim, "dim")? = borrow(basis, "basis")?.0.dim();
        Ok(())
    })
}

/// Eigenenergies (hartree), D values.
///
/// # Safety
/// `basis` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iontrap_basis_energies(
    basis: *const IontrapBasis,
    buf: *mut f64,
    len: usize,
) -> IontrapStatus {
    guard(|| fill(borrow(basis, "basis")?.0.energies.iter().copied(), buf, len))
}

/// Dipole matrix q<j|z|k> (a.u.), D*D values, row-major.
///
/// # Safety
/// `basis` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iontrap_basis_dipole(basis: *const IontrapBasis, buf: *mut f64, len: usize) -> IontrapStatus {
    guard(|| fill(borrow(basis, "basis")?.0.dipole.iter().copied(), buf, len))
}

/// Mean heating time (seconds) for heating strength `kappa` (a.u.).
///
/// # Safety
/// `basis` must be a live handle and `seconds` valid.
#[no_mangle]
pub unsafe extern "C" fn iontrap_heating_time(
    basis: *const IontrapBasis,
    kappa: f64,
    seconds: *mut f64,
) -> IontrapStatus {
    guard(|| {
        let b = borrow(basis, "basis")?;
        let slot = out(seconds, "seconds")?;
        *slot = build_dissipation(&b.0, kappa, &DEFAULT_DELTAS)?.mean_heating_time_s();
        Ok(())
    })
}

/// # Safety
/// `basis` must be null or a handle from [`iontrap_basis_solve`], freed once.
#[no_mangle]
pub unsafe extern "C" fn iontrap_basis_free(basis: *mut IontrapBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Split-operator gate for a particle of mass `mass` in `m omega^2 x^2 / 2`
/// on `n` points of `[x_min, x_max]`, advanced by `delta_t` in `substeps`.
///
/// # Safety
/// `gate` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iontrap_gate_split_operator(
    n: usize,
    x_min: f64,
    x_max: f64,
    mass: f64,
    omega: f64,
    delta_t: f64,
    substeps: usize,
    gate: *mut *mut IontrapGate,
) -> IontrapStatus {
    guard(|| {
        let slot = out(gate, "gate")?;
        let system = SimSystem {
            mass,
            potential: Potential::Harmonic { omega },
            label: "harmonic".into(),
        };
        let grid = make_grid(x_min, x_max, n)?;
        *slot = boxed(IontrapGate(elementary_gate(&system, &grid, delta_t, substeps)?));
        Ok(())
    })
}

/// Gate dimension N.
///
/// # Safety
/// `gate` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iontrap_gate_dim(gate: *const IontrapGate, dim: *mut usize) -> IontrapStatus {
    guard(|| {
        *out(dim, "dim")? = borrow(gate, "gate")?.0.dim();
        Ok(())
    })
}

/// Real and imaginary parts, N*N values each, row-major.
///
/// # Safety
/// `gate` must be a live handle; `re` and `im` hold `len` doubles each.
#[no_mangle]
pub unsafe extern "C" fn iontrap_gate_entries(
    gate: *const IontrapGate,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> IontrapStatus {
    guard(|| {
        let g = &borrow(gate, "gate")?.0;
        fill(g.entries.iter().map(|z| z.re), re, len)?;
        fill(g.entries.iter().map(|z| z.im), im, len)
    })
}

/// |Tr(target^+ realized)|^2 / N^2.
///
/// # Safety
/// Both handles must be live and `value` valid.
#[no_mangle]
pub unsafe extern "C" fn iontrap_gate_fidelity(
    target: *const IontrapGate,
    realized: *const IontrapGate,
    value: *mut f64,
) -> IontrapStatus {
    guard(|| {
        let f = fidelity(&borrow(target, "target")?.0, &borrow(realized, "realized")?.0)?;
        *out(value, "value")? = f;
        Ok(())
    })
}

/// # Safety
/// `gate` must be null or a live gate handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn iontrap_gate_free(gate: *mut IontrapGate) {
    if !gate.is_null() {
        drop(Box::from_raw(gate));
    }
}

/// Field from `n_samples` values E(i dt), i = 0..n_samples-1 (a.u.).
///
/// # Safety
/// `samples` must hold `n_samples` doubles; `field` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iontrap_field_new(
    samples: *const f64,
    n_samples: usize,
    dt: f64,
    field: *mut *mut IontrapField,
) -> IontrapStatus {
    guard(|| {
        let slot = out(field, "field")?;
        if samples.is_null() {
            return Err(Fault::Null("samples"));
        }
        let values = std::slice::from_raw_parts(samples, n_samples).to_vec();
        *slot = boxed(IontrapField(ControlField::new(values, dt)?));
        Ok(())
    })
}

/// Deterministic guess: sine-shaped sum over the register's transition lines.
///
/// # Safety
/// `basis` must be a live handle and `field` valid.
#[no_mangle]
pub unsafe extern "C" fn iontrap_field_guess(
    basis: *const IontrapBasis,
    t_pulse: f64,
    dt: f64,
    field: *mut *mut IontrapField,
) -> IontrapStatus {
    guard(|| {
        let b = borrow(basis, "basis")?;
        let slot = out(field, "field")?;
        let cfg = OctConfig {
            t_pulse,
            dt,
            ..OctConfig::desk(Functional::F)
        };
        *slot = boxed(IontrapField(make_guess_field(&b.0, &cfg)?));
        Ok(())
    })
}

/// Number of samples (time steps + 1).
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn iontrap_field_len(field: *const IontrapField, len: *mut usize) -> IontrapStatus {
    guard(|| {
        *out(len, "len")? = borrow(field, "field")?.0.samples().len();
        Ok(())
    })
}

/// Copy the samples (a.u.).
///
/// # Safety
/// `field` must be a live handle and `buf` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iontrap_field_samples(field: *const IontrapField, buf: *mut f64, len: usize) -> IontrapStatus {
    guard(|| fill(borrow(field, "field")?.0.samples().iter().copied(), buf, len))
}

/// # Safety
/// `field` must be null or a live field handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn iontrap_field_free(field: *mut IontrapField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Register block (first `n` states) of the interaction-picture propagator
/// driven by `field`.
///
/// # Safety
/// Handles must be live and `gate` valid.
#[no_mangle]
pub unsafe extern "C" fn iontrap_evolution_operator(
    field: *const IontrapField,
    basis: *const IontrapBasis,
    n: usize,
    gate: *mut *mut IontrapGate,
) -> IontrapStatus {
    guard(|| {
        let f = borrow(field, "field")?;
        let b = borrow(basis, "basis")?;
        let slot = out(gate, "gate")?;
        *slot = boxed(IontrapGate(evolution_operator(&f.0, &b.0, n)?));
        Ok(())
    })
}
