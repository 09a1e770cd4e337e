// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the core crate. Objects are opaque heap handles created by
//! `cl_*_new` and released by the matching `cl_*_free`. Every fallible call
//! returns a [`ClStatus`]; on failure the message is kept per thread and read
//! with [`cl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use coherence_lab::cli;
use coherence_lab::config::Command;
use coherence_lab::exact;
use coherence_lab::meq::{self, Generator};
use coherence_lab::{Bath, BathSpec, Error, MomentVector, SecondMoments, SystemSpec};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Unsupported = 4,
    NoSteadyState = 5,
    Numerical = 6,
    Config = 7,
    Io = 8,
    BufferTooSmall = 9,
    ValidationFailed = 10,
    Panic = 99,
}

/// Master-equation generators and the exact solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClMethod {
    Exact = 0,
    Br = 1,
    Spbr = 2,
    Secular = 3,
    Collective = 4,
    Individual = 5,
}

/// `F_aa, F_bb, Re F_ab, Im F_ab` at one time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClMoments {
    pub f_aa: f64,
    pub f_bb: f64,
    pub f_ab_re: f64,
    pub f_ab_im: f64,
}

/// One pole of the exact propagator.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClPole {
    pub re: f64,
    pub im: f64,
    /// `|det G^-1|` at the pole.
    pub residual: f64,
}

/// Two modes with their frequencies and coupling weights.
pub struct ClSystem(SystemSpec);

/// A bath with its response cache.
pub struct ClBath(Bath);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ClStatus {
    match e {
        Error::Domain(_) => ClStatus::Domain,
        Error::Unsupported(_) => ClStatus::Unsupported,
        Error::NoSteadyState(_) => ClStatus::NoSteadyState,
        Error::Config { .. } => ClStatus::Config,
        Error::Io { .. } => ClStatus::Io,
        _ => ClStatus::Numerical,
    }
}

fn fail(status: ClStatus, msg: impl Into<String>) -> ClStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), ClStatus>>(f: F) -> ClStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ClStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(ClStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: coherence_lab::Result<T>) -> Result<T, ClStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, ClStatus> {
    p.as_ref().ok_or_else(|| fail(ClStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], ClStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ClStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], ClStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(ClStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn str_arg(p: *const c_char, what: &str) -> Result<String, ClStatus> {
    if p.is_null() {
        return Err(fail(ClStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(ClStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), ClStatus> {
    if out.is_null() {
        return Err(fail(ClStatus::NullPointer, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn to_c(m: &SecondMoments) -> ClMoments {
    ClMoments {
        f_aa: m.f_aa,
        f_bb: m.f_bb,
        f_ab_re: m.f_ab.re,
        f_ab_im: m.f_ab.im,
    }
}

fn generator(method: ClMethod, sys: &SystemSpec, bath: &Bath) -> Result<Generator, ClStatus> {
    lift(match method {
        ClMethod::Br => meq::br_generator(sys, bath),
        ClMethod::Spbr => meq::spbr_generator(sys, bath),
        ClMethod::Secular => meq::br_generator(sys, bath).and_then(|g| meq::secularize(&g)),
        ClMethod::Collective => meq::collective_generator(sys, bath),
        ClMethod::Individual => meq::individual_generator(sys, bath),
        ClMethod::Exact => unreachable!("exact has no generator"),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer; the handle is released with
/// [`cl_system_free`].
#[no_mangle]
pub unsafe extern "C" fn cl_system_new(
    omega_a: f64,
    omega_b: f64,
    phi_a: f64,
    phi_b: f64,
    out: *mut *mut ClSystem,
) -> ClStatus {
    guard(|| {
        let s = lift(SystemSpec::new(omega_a, omega_b, phi_a, phi_b))?;
        store(out, ClSystem(s))
    })
}

/// # Safety
/// `sys` must be null or a handle from [`cl_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_system_free(sys: *mut ClSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Super-Ohmic bath `J = j0 (nu/omega0)^z exp(-nu/omega0)` at temperature `kbt`.
///
/// # Safety
/// `out` must be a valid pointer; release with [`cl_bath_free`].
#[no_mangle]
pub unsafe extern "C" fn cl_bath_super_ohmic_new(j0: f64, omega0: f64, z: f64, kbt: f64, out: *mut *mut ClBath) -> ClStatus {
    guard(|| {
        let b = lift(Bath::new(BathSpec::super_ohmic(j0, omega0, z, kbt)))?;
        store(out, ClBath(b))
    })
}

/// Flat band `J = j0` on `[nu_min, nu_max]` (infinite ends allowed) with
/// constant occupation `n0`.
///
/// # Safety
/// `out` must be a valid pointer; release with [`cl_bath_free`].
#[no_mangle]
pub unsafe extern "C" fn cl_bath_flat_new(j0: f64, nu_min: f64, nu_max: f64, n0: f64, out: *mut *mut ClBath) -> ClStatus {
    guard(|| {
        let b = lift(Bath::new(BathSpec::flat(j0, nu_min, nu_max, n0)))?;
        store(out, ClBath(b))
    })
}

/// # Safety
/// `bath` must be null or a handle from a `cl_bath_*_new` call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cl_bath_free(bath: *mut ClBath) {
    if !bath.is_null() {
        drop(Box::from_raw(bath));
    }
}

/// Moments from vacuum at `n` times. `Exact` needs a uniform grid starting
/// at 0; the generators accept any nondecreasing times `>= 0`.
///
/// # Safety
/// Handles must be live; `times` and `out` must each hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn cl_moments(
    sys: *const ClSystem,
    bath: *const ClBath,
    method: ClMethod,
    times: *const f64,
    n: usize,
    out: *mut ClMoments,
) -> ClStatus {
    guard(|| {
        let sys = &deref(sys, "system")?.0;
        let bath = &deref(bath, "bath")?.0;
        let times = slice(times, n, "times")?;
        let out = slice_mut(out, n, "out")?;
        let ms: Vec<SecondMoments> = match method {
            ClMethod::Exact => lift(exact::exact_moments(sys, bath, times))?,
            m => {
                let g = generator(m, sys, bath)?;
                let ev = lift(meq::evolve(&g, &MomentVector::default(), times))?;
                ev.states.iter().map(SecondMoments::from_vector).collect()
            }
        };
        for (o, m) in out.iter_mut().zip(&ms) {
            *o = to_c(m);
        }
        Ok(())
    })
}

/// Long-time limit of the moments. Fails with `NO_STEADY_STATE` at
/// degeneracy.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cl_steady_state(
    sys: *const ClSystem,
    bath: *const ClBath,
    method: ClMethod,
    out: *mut ClMoments,
) -> ClStatus {
    guard(|| {
        let sys = &deref(sys, "system")?.0;
        let bath = &deref(bath, "bath")?.0;
        if out.is_null() {
            return Err(fail(ClStatus::NullPointer, "out is null"));
        }
        let m = match method {
            ClMethod::Exact => lift(exact::exact_steady_state(sys, bath))?,
            m => {
                let g = generator(m, sys, bath)?;
                SecondMoments::from_vector(&lift(meq::steady_state(&g))?)
            }
        };
        *out = to_c(&m);
        Ok(())
    })
}

/// Four generator eigenvalues (decay rates are the real parts), as
/// interleaved `re, im` pairs in `out[8]`.
///
/// # Safety
/// Handles must be live and `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn cl_generator_eigenvalues(
    sys: *const ClSystem,
    bath: *const ClBath,
    method: ClMethod,
    out: *mut f64,
) -> ClStatus {
    guard(|| {
        let sys = &deref(sys, "system")?.0;
        let bath = &deref(bath, "bath")?.0;
        let out = slice_mut(out, 8, "out")?;
        if method == ClMethod::Exact {
            return Err(fail(ClStatus::InvalidArgument, "the exact solution has no generator; use cl_find_poles"));
        }
        let g = generator(method, sys, bath)?;
        for (k, mu) in g.eigenvalues().iter().enumerate() {
            out[2 * k] = mu.re;
            out[2 * k + 1] = mu.im;
        }
        Ok(())
    })
}

/// Poles of the exact propagator. Writes up to `capacity` poles and sets
/// `*count` to the number found; returns `BUFFER_TOO_SMALL` if they did
/// not fit.
///
/// # Safety
/// Handles must be live, `out` must hold `capacity` elements and `count`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn cl_find_poles(
    sys: *const ClSystem,
    bath: *const ClBath,
    out: *mut ClPole,
    capacity: usize,
    count: *mut usize,
) -> ClStatus {
    guard(|| {
        let sys = &deref(sys, "system")?.0;
        let bath = &deref(bath, "bath")?.0;
        if count.is_null() {
            return Err(fail(ClStatus::NullPointer, "count is null"));
        }
        let out = slice_mut(out, capacity, "out")?;
        let set = lift(exact::find_poles(sys, bath))?;
        *count = set.poles.len();
        for (o, p) in out.iter_mut().zip(&set.poles) {
            *o = ClPole {
                re: p.zeta.re,
                im: p.zeta.im,
                residual: p.residual,
            };
        }
        if set.poles.len() > capacity {
            return Err(fail(ClStatus::BufferTooSmall, format!("{} poles, capacity {capacity}", set.poles.len())));
        }
        Ok(())
    })
}

/// Runs a CLI command (`"trajectory"`, `"validate"`, ...) on a config file.
/// `out_dir` may be null to use the configured directory. A failed
/// validation returns `VALIDATION_FAILED`.
///
/// # Safety
/// `config_path` and `command` must be NUL-terminated strings; `out_dir`
/// must be null or one.
#[no_mangle]
pub unsafe extern "C" fn cl_run(config_path: *const c_char, command: *const c_char, out_dir: *const c_char) -> ClStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let name = str_arg(command, "command")?;
        let cmd = Command::parse(&name).ok_or_else(|| fail(ClStatus::InvalidArgument, format!("unknown command `{name}`")))?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(out_dir, "out_dir")?))
        };
        let r = lift(cli::run_file(&path, cmd, out))?;
        if r.passed {
            Ok(())
        } else {
            Err(fail(ClStatus::ValidationFailed, format!("validation failed, see {}", r.csv.display())))
        }
    })
}
