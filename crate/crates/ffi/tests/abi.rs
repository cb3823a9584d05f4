use std::ffi::CString;
use std::process::Command;

use cpflow_ffi::*;

const IDENTITY: [f64; 6] = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { cpf_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn density_and_stress_vanish_at_identity() {
    unsafe {
        let mut m = std::ptr::null_mut();
        assert_eq!(cpf_material_new_default(&mut m), CpfStatus::Ok);
        let mut w = f64::NAN;
        assert_eq!(
            cpf_total_density(m, IDENTITY.as_ptr(), IDENTITY.as_ptr(), &mut w),
            CpfStatus::Ok
        );
        assert!(w.abs() < 1e-15);
        let mut s = [f64::NAN; 6];
        assert_eq!(
            cpf_pk2_stress(m, IDENTITY.as_ptr(), IDENTITY.as_ptr(), s.as_mut_ptr()),
            CpfStatus::Ok
        );
        assert!(s.iter().all(|x| x.abs() < 1e-12));
        assert_eq!(
            cpf_driving_force(m, IDENTITY.as_ptr(), IDENTITY.as_ptr(), s.as_mut_ptr()),
            CpfStatus::Ok
        );
        assert!(s.iter().all(|x| x.abs() < 1e-12));
        cpf_material_free(m);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut w = 0.0;
        assert_eq!(
            cpf_total_density(
                std::ptr::null(),
                IDENTITY.as_ptr(),
                IDENTITY.as_ptr(),
                &mut w
            ),
            CpfStatus::NullPointer
        );
        assert!(last_error().contains("material"));
        let json = CString::new(r#"{"yield_radius": -1.0}"#).unwrap();
        let mut m = std::ptr::null_mut();
        assert_eq!(
            cpf_material_from_json(json.as_ptr(), &mut m),
            CpfStatus::InvalidArgument
        );
        assert!(m.is_null());
        let json = CString::new(r#"{"bogus": 1}"#).unwrap();
        assert_eq!(
            cpf_material_from_json(json.as_ptr(), &mut m),
            CpfStatus::Config
        );
        assert!(last_error().contains("bogus"));
        let bad = [2.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let mut d = 0.0;
        assert_eq!(
            cpf_distance(0.2, bad.as_ptr(), IDENTITY.as_ptr(), &mut d),
            CpfStatus::InvalidArgument
        );
    }
}

#[test]
fn distance_of_diagonal_pair() {
    // log diag(e, 1/e, 1) has norm √2, so D = (r/2)√2.
    let e = std::f64::consts::E;
    let cp = [e, 1.0 / e, 1.0, 0.0, 0.0, 0.0];
    let mut d = 0.0;
    assert_eq!(
        unsafe { cpf_distance(0.2, IDENTITY.as_ptr(), cp.as_ptr(), &mut d) },
        CpfStatus::Ok
    );
    assert!((d - 0.1 * 2f64.sqrt()).abs() < 1e-13);
}

#[test]
fn return_map_worked_example() {
    let z_prev = [0.0; 6];
    let strain = [0.2, -0.2, 0.0, 0.0, 0.0, 0.0];
    let mut z = [0.0; 6];
    let status = unsafe {
        cpf_linear_return_map(
            1.0,
            1.0,
            1.0,
            0.1,
            z_prev.as_ptr(),
            strain.as_ptr(),
            z.as_mut_ptr(),
        )
    };
    assert_eq!(status, CpfStatus::Ok);
    let norm = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
    assert!((norm - 0.155_228_5).abs() < 1e-6);
}

#[test]
fn point_solve_round_trip() {
    unsafe {
        let mut m = std::ptr::null_mut();
        assert_eq!(cpf_material_new_default(&mut m), CpfStatus::Ok);
        let program = CString::new(
            r#"{"kind": "proportional", "direction": [0.7071067811865476, -0.7071067811865476, 0, 0, 0, 0],
                "shape": {"type": "ramp", "amplitude": 0.2}, "horizon": 1.0}"#,
        )
        .unwrap();
        let mut t = std::ptr::null_mut();
        assert_eq!(
            cpf_point_solve(m, program.as_ptr(), 32, 0, &mut t),
            CpfStatus::Ok,
            "{}",
            last_error()
        );
        let mut len = 0;
        assert_eq!(cpf_trajectory_len(t, &mut len), CpfStatus::Ok);
        assert_eq!(len, 33);
        let (mut time, mut energy, mut diss, mut cp) = (0.0, 0.0, 0.0, [0.0; 6]);
        assert_eq!(
            cpf_trajectory_record(t, 32, &mut time, &mut energy, &mut diss, cp.as_mut_ptr()),
            CpfStatus::Ok
        );
        assert!((time - 1.0).abs() < 1e-15 && diss > 0.0);
        let det = cp[0] * (cp[1] * cp[2] - cp[3] * cp[3]) - cp[5] * (cp[5] * cp[2] - cp[3] * cp[4])
            + cp[4] * (cp[5] * cp[3] - cp[1] * cp[4]);
        assert!((det - 1.0).abs() < 1e-10);
        assert_eq!(
            cpf_trajectory_record(t, 33, &mut time, &mut energy, &mut diss, cp.as_mut_ptr()),
            CpfStatus::OutOfRange
        );
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
        assert_eq!(cpf_trajectory_write_csv(t, path.as_ptr()), CpfStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text.lines().count(), 34);
        cpf_trajectory_free(t);
        cpf_material_free(m);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/cpflow.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ CpfMaterial *m = 0; return cpf_material_new_default(&m) == CPF_STATUS_OK ? 0 : 1; }}\n")).unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success()),
        Err(e) => eprintln!("no C compiler available, header check skipped: {e}"),
    }
}
