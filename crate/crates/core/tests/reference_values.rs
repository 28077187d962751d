//! Published operating point for the multiscale coefficient with `f = 1` and
//! `eps = H = 1/32`, on a coarser fine mesh (`Nf = 256`) than the published
//! `Nf = 1024`.

use msfem::basis::{build_trial_space, BuildOptions};
use msfem::coefficient::multiscale_field;
use msfem::oversampling::InterpKind;
use msfem::solve::{reference_solve, run_online};
use msfem::{Forcing, TwoLevelMesh};

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want
}

#[test]
fn table_errors_at_h_one_thirty_second() {
    let mesh = TwoLevelMesh::new(32, 256).unwrap();
    let a = multiscale_field(&mesh);
    let f = Forcing::constant(&mesh, 1.0);
    let u = reference_solve(&mesh, &a, &f).unwrap();
    let mut reports = Vec::new();
    for include_edge_basis in [true, false] {
        let opts = BuildOptions {
            eps: 1.0 / 32.0,
            interp_kind: InterpKind::Optimal,
            include_edge_basis,
        };
        let art = build_trial_space(&mesh, &a, &opts).unwrap().artifact;
        reports.push(run_online("table", &art, &mesh, &a, &f, true, Some(&u)).unwrap().report);
    }
    let (full, interp) = (&reports[0], &reports[1]);
    assert!((full.kbar_e - 1.0).abs() < 0.05, "kbar_e {}", full.kbar_e);
    assert!(close(full.e_a_ms, 4.16e-2, 0.1), "{full:?}");
    assert!(close(full.e_a, 2.67e-2, 0.1), "{full:?}");
    assert!(close(full.e_l2_ms, 1.73e-3, 0.1), "{full:?}");
    assert!(close(full.e_l2, 8.75e-4, 0.1), "{full:?}");
    assert!(close(interp.e_a_ms, 7.57e-2, 0.1), "{interp:?}");
    assert!(close(interp.e_l2_ms, 5.95e-3, 0.1), "{interp:?}");
}
