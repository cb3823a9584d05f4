//! C ABI over `cpflow`. Handles are opaque, every entry point returns a
//! [`CpfStatus`], and the message of the last failure on the calling thread
//! is available through [`cpf_last_error`]. Symmetric tensors cross the
//! boundary as six doubles in the order `xx, yy, zz, yz, xz, xy`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cpflow::dissipation::{distance, DissipationSpec};
use cpflow::linearized::{return_map, LinearModel};
use cpflow::load::LoadProgram;
use cpflow::material::{driving_force, pk2_stress, total_density, MaterialModel};
use cpflow::point_solver::{solve, PointSolverOptions, Trajectory};
use cpflow::tensor3::{DevSym3, SymTensor3, UnitDetSpd};
use cpflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Material model handle.
pub struct CpfMaterial(MaterialModel);

/// Point trajectory handle.
pub struct CpfTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(CpfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter(_)
            | Error::DeterminantDrift(_)
            | Error::NonSpd(_)
            | Error::Singular => CpfStatus::InvalidArgument,
            Error::Config(_) | Error::Json(_) => CpfStatus::Config,
            Error::Io(_) => CpfStatus::Io,
            _ => CpfStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(CpfStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CpfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CpfStatus::Panic
        }
    }
}

unsafe fn read6(p: *const f64, name: &str) -> Result<SymTensor3, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    let mut out = [0.0; 6];
    out.copy_from_slice(std::slice::from_raw_parts(p, 6));
    Ok(SymTensor3(out))
}

unsafe fn write6(p: *mut f64, s: &SymTensor3, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    std::slice::from_raw_parts_mut(p, 6).copy_from_slice(&s.0);
    Ok(())
}

unsafe fn write1(p: *mut f64, x: f64, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    *p = x;
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CpfStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn material<'a>(m: *const CpfMaterial) -> Result<&'a MaterialModel, Failure> {
    m.as_ref().map(|h| &h.0).ok_or_else(|| null("material"))
}

unsafe fn trajectory<'a>(t: *const CpfTrajectory) -> Result<&'a Trajectory, Failure> {
    t.as_ref().map(|h| &h.0).ok_or_else(|| null("trajectory"))
}

fn unit_det(s: SymTensor3) -> Result<UnitDetSpd, Failure> {
    Ok(UnitDetSpd::new(s)?)
}

/// Copies the last error message of this thread, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cpf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Default material: neo-Hookean elasticity, log-quadratic hardening.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cpf_material_new_default(out: *mut *mut CpfMaterial) -> CpfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(CpfMaterial(MaterialModel::default())));
        Ok(())
    })
}

/// Material from a JSON object with the library's material schema.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cpf_material_from_json(
    json: *const c_char,
    out: *mut *mut CpfMaterial,
) -> CpfStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m: MaterialModel = serde_json::from_str(text).map_err(Error::from)?;
        m.validate()?;
        *out = Box::into_raw(Box::new(CpfMaterial(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cpf_material_free(m: *mut CpfMaterial) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `W(C, Cp)`; `Cp` must have unit determinant.
///
/// # Safety
/// Tensor pointers must reference six doubles; `out` one.
#[no_mangle]
pub unsafe extern "C" fn cpf_total_density(
    m: *const CpfMaterial,
    c: *const f64,
    cp: *const f64,
    out: *mut f64,
) -> CpfStatus {
    guard(|| {
        let m = material(m)?;
        let value = total_density(&read6(c, "c")?, &unit_det(read6(cp, "cp")?)?, m)?;
        write1(out, value, "out")
    })
}

/// Second Piola–Kirchhoff stress `2 ∂W/∂C`.
///
/// # Safety
/// Tensor pointers must reference six doubles.
#[no_mangle]
pub unsafe extern "C" fn cpf_pk2_stress(
    m: *const CpfMaterial,
    c: *const f64,
    cp: *const f64,
    out: *mut f64,
) -> CpfStatus {
    guard(|| {
        let m = material(m)?;
        let s = pk2_stress(&read6(c, "c")?, &unit_det(read6(cp, "cp")?)?, m)?;
        write6(out, &s, "out")
    })
}

/// Thermodynamic driving force conjugate to `Cp`.
///
/// # Safety
/// Tensor pointers must reference six doubles.
#[no_mangle]
pub unsafe extern "C" fn cpf_driving_force(
    m: *const CpfMaterial,
    c: *const f64,
    cp: *const f64,
    out: *mut f64,
) -> CpfStatus {
    guard(|| {
        let m = material(m)?;
        let s = driving_force(&read6(c, "c")?, &unit_det(read6(cp, "cp")?)?, m)?;
        write6(out, &s, "out")
    })
}

/// Dissipation distance between two plastic strains at yield radius `radius`.
///
/// # Safety
/// Tensor pointers must reference six doubles; `out` one.
#[no_mangle]
pub unsafe extern "C" fn cpf_distance(
    radius: f64,
    cp1: *const f64,
    cp2: *const f64,
    out: *mut f64,
) -> CpfStatus {
    guard(|| {
        if radius.is_nan() || radius < 0.0 {
            return Err(Failure(
                CpfStatus::InvalidArgument,
                format!("radius {radius} must be non-negative"),
            ));
        }
        let a = unit_det(read6(cp1, "cp1")?)?;
        let b = unit_det(read6(cp2, "cp2")?)?;
        write1(
            out,
            distance(&a, &b, &DissipationSpec::log_bound(radius)),
            "out",
        )
    })
}

/// Isotropic small-strain return map; `z_prev` and the result are traceless.
///
/// # Safety
/// Tensor pointers must reference six doubles.
#[no_mangle]
pub unsafe extern "C" fn cpf_linear_return_map(
    shear: f64,
    lame: f64,
    hardening: f64,
    rho: f64,
    z_prev: *const f64,
    strain: *const f64,
    out: *mut f64,
) -> CpfStatus {
    guard(|| {
        let lm = LinearModel::isotropic(shear, lame, hardening, rho);
        lm.validate()?;
        let z_prev = read6(z_prev, "z_prev")?;
        if z_prev.trace().abs() > 1e-12 * (1.0 + z_prev.norm()) {
            return Err(Failure(
                CpfStatus::InvalidArgument,
                "z_prev must be traceless".into(),
            ));
        }
        let z = return_map(&DevSym3::from_sym(&z_prev), &read6(strain, "strain")?, &lm);
        write6(out, &z.to_sym(), "out")
    })
}

/// Energetic point solve of a strain program given as JSON, from `Cp = I`.
///
/// # Safety
/// `program_json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpf_point_solve(
    m: *const CpfMaterial,
    program_json: *const c_char,
    steps: usize,
    seed: u64,
    out: *mut *mut CpfTrajectory,
) -> CpfStatus {
    guard(|| {
        let m = material(m)?;
        let program: LoadProgram =
            serde_json::from_str(read_str(program_json, "program_json")?).map_err(Error::from)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = PointSolverOptions {
            seed,
            ..Default::default()
        };
        let spec = DissipationSpec::log_bound(m.yield_radius);
        let traj = solve(&UnitDetSpd::identity(), &program, steps, m, &spec, &opts)?;
        *out = Box::into_raw(Box::new(CpfTrajectory(traj)));
        Ok(())
    })
}

/// Number of recorded times, `steps + 1`.
///
/// # Safety
/// `t` must be a live trajectory handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpf_trajectory_len(t: *const CpfTrajectory, out: *mut usize) -> CpfStatus {
    guard(|| {
        let len = trajectory(t)?.times.len();
        if out.is_null() {
            return Err(null("out"));
        }
        *out = len;
        Ok(())
    })
}

/// Time, energy and cumulative dissipation at record `i`, and `Cp` into `cp`.
///
/// # Safety
/// `t` must be a live handle; `time`, `energy`, `dissipation` one double each,
/// `cp` six doubles.
#[no_mangle]
pub unsafe extern "C" fn cpf_trajectory_record(
    t: *const CpfTrajectory,
    i: usize,
    time: *mut f64,
    energy: *mut f64,
    dissipation: *mut f64,
    cp: *mut f64,
) -> CpfStatus {
    guard(|| {
        let traj = trajectory(t)?;
        if i >= traj.times.len() {
            return Err(Failure(
                CpfStatus::OutOfRange,
                format!("record {i} of {}", traj.times.len()),
            ));
        }
        write1(time, traj.times[i], "time")?;
        write1(energy, traj.energies[i], "energy")?;
        write1(dissipation, traj.cumulative_dissipation()[i], "dissipation")?;
        write6(cp, traj.plastic_state(i).as_sym(), "cp")
    })
}

/// Energy-balance residual of the whole trajectory.
///
/// # Safety
/// `t` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cpf_trajectory_balance_residual(
    t: *const CpfTrajectory,
    out: *mut f64,
) -> CpfStatus {
    guard(|| write1(out, trajectory(t)?.balance_residual(), "out"))
}

/// Writes the trajectory CSV to `path`.
///
/// # Safety
/// `t` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cpf_trajectory_write_csv(
    t: *const CpfTrajectory,
    path: *const c_char,
) -> CpfStatus {
    guard(|| {
        let traj = trajectory(t)?;
        let file = File::create(read_str(path, "path")?).map_err(Error::from)?;
        let mut w = BufWriter::new(file);
        traj.write_csv(&mut w)?;
        std::io::Write::flush(&mut w).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cpf_trajectory_free(t: *mut CpfTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}
