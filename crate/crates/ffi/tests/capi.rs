use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use approx::assert_relative_eq;
use momentum_entanglement_ffi::*;

fn dark(delta: f64, eta: f64) -> MeAtomParams {
    let mut p = MeAtomParams {
        gamma_a: 0.0,
        gamma_b: 0.0,
        omega_12: 0.0,
        epsilon: 0.0,
        coherence_r: 0.0,
        coherence_theta: 0.0,
        eta: 0.0,
    };
    assert_eq!(unsafe { me_params_dark_state(delta, eta, &mut p) }, MeStatus::Ok);
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { me_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(me_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn ridge_of_dark_state() {
    let p = dark(0.05, 0.1);
    let (mut c, mut w) = (0.0, 0.0);
    assert_eq!(unsafe { me_ridge(&p, &mut c, &mut w) }, MeStatus::Ok);
    assert_relative_eq!(c, -0.025, epsilon = 1e-12);
    assert_relative_eq!(w, 0.05f64.powi(2) / 4.0, max_relative = 1e-3);
}

#[test]
fn invalid_params_report_config_status() {
    let mut p = dark(0.05, 0.1);
    p.eta = -1.0;
    assert_eq!(unsafe { me_params_validate(&p) }, MeStatus::Config);
    assert!(last_error().contains("eta"));
}

#[test]
fn null_pointers_are_rejected() {
    let p = dark(0.05, 0.1);
    assert_eq!(unsafe { me_params_validate(ptr::null()) }, MeStatus::NullPointer);
    assert_eq!(
        unsafe { me_amplitude_at(&p, 0.0, 0.0, ptr::null_mut(), ptr::null_mut()) },
        MeStatus::NullPointer
    );
    unsafe {
        me_grid_free(ptr::null_mut());
        me_schmidt_free(ptr::null_mut());
    }
}

#[test]
fn trapped_state_is_numerical_error() {
    let p = dark(0.0, 0.1);
    let mut g: *mut MeGrid = ptr::null_mut();
    let s = unsafe { me_grid_sample(&p, MeGridKind::Detection, 1.0, &mut g) };
    assert_eq!(s, MeStatus::Numerical);
    assert!(g.is_null());
}

#[test]
fn grid_handle_round_trip() {
    let p = dark(0.1, 0.1);
    let mut g: *mut MeGrid = ptr::null_mut();
    assert_eq!(
        unsafe { me_grid_sample(&p, MeGridKind::Detection, 1.0, &mut g) },
        MeStatus::Ok
    );
    let (mut rows, mut cols) = (0usize, 0usize);
    assert_eq!(unsafe { me_grid_dims(g, &mut rows, &mut cols) }, MeStatus::Ok);
    assert!(rows > 0 && cols > 0);
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(
        unsafe {
            me_grid_value(
                g,
                rows / 2,
                cols / 2,
                ptr::null_mut(),
                ptr::null_mut(),
                &mut re,
                &mut im,
            )
        },
        MeStatus::Ok
    );
    assert!(re.is_finite() && im.is_finite());
    assert_eq!(
        unsafe { me_grid_value(g, rows, 0, ptr::null_mut(), ptr::null_mut(), &mut re, &mut im) },
        MeStatus::Config
    );
    let mut r = 0.0;
    assert_eq!(unsafe { me_grid_r_ratio(g, &mut r) }, MeStatus::Ok);
    assert_relative_eq!(r, 25.644080326679166, max_relative = 1e-6);
    unsafe { me_grid_free(g) };
}

#[test]
fn schmidt_handle_matches_library() {
    let p = dark(0.1, 0.1);
    let mut g: *mut MeGrid = ptr::null_mut();
    assert_eq!(
        unsafe { me_grid_sample(&p, MeGridKind::Schmidt, 1.0, &mut g) },
        MeStatus::Ok
    );
    let mut s: *mut MeSchmidt = ptr::null_mut();
    assert_eq!(unsafe { me_schmidt_decompose(g, 1e-6, &mut s) }, MeStatus::Ok);
    let mut k = 0.0;
    assert_eq!(unsafe { me_schmidt_number(s, &mut k) }, MeStatus::Ok);
    assert_relative_eq!(k, 11.903816, max_relative = 1e-4);

    let mut n = 0usize;
    assert_eq!(
        unsafe { me_schmidt_eigenvalues(s, ptr::null_mut(), 0, &mut n) },
        MeStatus::Ok
    );
    let mut ev = vec![0.0; n];
    assert_eq!(
        unsafe { me_schmidt_eigenvalues(s, ev.as_mut_ptr(), n, &mut n) },
        MeStatus::Ok
    );
    assert_relative_eq!(ev.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    unsafe {
        me_schmidt_free(s);
        me_grid_free(g);
    }
}

#[test]
fn analyze_fills_report() {
    let p = dark(0.1, 0.1);
    let mut rep = MeReport::default();
    assert_eq!(unsafe { me_analyze(&p, 1.0, &mut rep) }, MeStatus::Ok);
    assert_relative_eq!(rep.r, 25.644080326679166, max_relative = 1e-6);
    assert_relative_eq!(rep.k, 11.903816, max_relative = 1e-4);
    assert_relative_eq!(rep.pe, 2.2 * rep.k / rep.r, max_relative = 1e-12);
    assert_eq!(rep.detection_adequate, 1);
}

#[test]
fn header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/momentum_entanglement.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "me_last_error_message",
        "me_grid_sample",
        "me_grid_free",
        "me_schmidt_decompose",
        "me_schmidt_free",
        "me_analyze",
        "typedef struct MeGrid MeGrid",
        "ME_STATUS_BUDGET = 4",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/momentum_entanglement.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ MeAtomParams p; (void)p; return ME_STATUS_OK; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler found; skipping"),
    }
}
