use std::ffi::CStr;
use std::ptr;

use chns_ffi::*;

fn params(n: usize) -> ChnsParams {
    let mut p = ChnsParams {
        n: 0,
        boundary: ChnsBoundary::Periodic,
        eps: 0.0,
        theta0: 0.0,
        gamma: 0.0,
        nu: 0.0,
        tau: 0.0,
    };
    assert_eq!(unsafe { chns_params_default(&mut p) }, ChnsStatus::Ok);
    p.n = n;
    p
}

fn last_error() -> String {
    let p = chns_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn defaults_match_core() {
    let p = params(64);
    assert_eq!((p.eps, p.theta0, p.gamma, p.nu, p.tau), (0.05, 3.0, 1.0, 1.0, 1e-3));
    assert_eq!(p.boundary, ChnsBoundary::Physical);
}

#[test]
fn lifecycle_conserves_mass() {
    let p = params(16);
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { chns_sim_new(&p, 0.1, 0.05, 3, &mut sim) }, ChnsStatus::Ok);
    assert_eq!(unsafe { chns_sim_n(sim) }, 16);

    let mut m0 = 0.0;
    assert_eq!(unsafe { chns_sim_mass(sim, &mut m0) }, ChnsStatus::Ok);
    assert!((m0 - 0.1).abs() < 1e-15);
    assert_eq!(unsafe { chns_sim_step(sim, 5) }, ChnsStatus::Ok);
    assert!((unsafe { chns_sim_time(sim) } - 5e-3).abs() < 1e-15);

    let mut m = 0.0;
    assert_eq!(unsafe { chns_sim_mass(sim, &mut m) }, ChnsStatus::Ok);
    assert!((m - m0).abs() <= 1e-11);

    let mut phi = vec![0.0; 256];
    assert_eq!(
        unsafe { chns_sim_get_phase(sim, phi.as_mut_ptr(), phi.len()) },
        ChnsStatus::Ok
    );
    assert!(phi.iter().all(|v| v.abs() < 1.0));
    let mut pr = vec![0.0; 256];
    assert_eq!(
        unsafe { chns_sim_get_pressure(sim, pr.as_mut_ptr(), pr.len()) },
        ChnsStatus::Ok
    );
    let (mut ux, mut uy) = (vec![0.0; 256], vec![0.0; 256]);
    assert_eq!(
        unsafe { chns_sim_get_velocity(sim, ux.as_mut_ptr(), uy.as_mut_ptr(), 256) },
        ChnsStatus::Ok
    );
    assert!(ux.iter().chain(&uy).all(|v| v.is_finite()));

    let mut e = f64::NAN;
    assert_eq!(unsafe { chns_sim_energy(sim, &mut e) }, ChnsStatus::Ok);
    assert!(e.is_finite());
    unsafe { chns_sim_free(sim) };
}

#[test]
fn phase_round_trips_through_constructor() {
    let p = params(8);
    let values: Vec<f64> = (0..64).map(|k| 0.01 * ((k % 7) as f64 - 3.0)).collect();
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { chns_sim_new_from_phase(&p, values.as_ptr(), values.len(), &mut sim) },
        ChnsStatus::Ok
    );
    let mut back = vec![0.0; 64];
    assert_eq!(
        unsafe { chns_sim_get_phase(sim, back.as_mut_ptr(), 64) },
        ChnsStatus::Ok
    );
    assert_eq!(back, values);
    unsafe { chns_sim_free(sim) };
}

#[test]
fn errors_are_reported() {
    let mut sim = ptr::null_mut();
    assert_eq!(
        unsafe { chns_sim_new(ptr::null(), 0.0, 0.01, 1, &mut sim) },
        ChnsStatus::NullPointer
    );
    assert!(last_error().contains("params"));

    let mut p = params(8);
    p.tau = -1.0;
    assert_eq!(
        unsafe { chns_sim_new(&p, 0.0, 0.01, 1, &mut sim) },
        ChnsStatus::InvalidArgument
    );
    assert!(last_error().contains("tau"));

    let p = params(8);
    let bad = vec![1.5; 64];
    assert_eq!(
        unsafe { chns_sim_new_from_phase(&p, bad.as_ptr(), 64, &mut sim) },
        ChnsStatus::OutOfBounds
    );
    assert!(sim.is_null());

    assert_eq!(unsafe { chns_sim_new(&p, 0.0, 0.01, 1, &mut sim) }, ChnsStatus::Ok);
    let mut short = vec![0.0; 10];
    assert_eq!(
        unsafe { chns_sim_get_phase(sim, short.as_mut_ptr(), short.len()) },
        ChnsStatus::InvalidArgument
    );
    assert_eq!(unsafe { chns_sim_step(ptr::null_mut(), 1) }, ChnsStatus::NullPointer);
    unsafe { chns_sim_free(sim) };
    unsafe { chns_sim_free(ptr::null_mut()) };
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/chns.h")).unwrap();
    for name in [
        "chns_last_error",
        "chns_params_default",
        "chns_sim_new",
        "chns_sim_new_from_phase",
        "chns_sim_free",
        "chns_sim_step",
        "chns_sim_get_phase",
        "chns_sim_get_pressure",
        "chns_sim_get_velocity",
        "chns_sim_energy",
        "chns_sim_mass",
        "typedef struct ChnsSim ChnsSim",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
