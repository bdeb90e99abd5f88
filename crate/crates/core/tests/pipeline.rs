use erasure_core::analysis::aggregate;
use erasure_core::config::RunConfig;
use erasure_core::energetics::ledger_check;
use erasure_core::ensemble::run_sweep;
use erasure_core::io::{read_csv, write_csv};
use erasure_core::measurement::{mi_quadrature, Action};
use erasure_core::protocol::ErasureRun;

fn small() -> RunConfig {
    RunConfig::from_json_str(r#"{"preset":"fast-bath","n_runs":40,"d_list":[0.75,0.85],"protocol":{"tau_ref_s":3}}"#).unwrap()
}

#[test]
fn sweep_runs_persist_and_reaggregate() {
    let cfg = small();
    let points = run_sweep(&cfg).unwrap();
    assert_eq!(points.len(), 2);
    let dir = tempfile::tempdir().unwrap();
    for p in &points {
        let path = dir.path().join("runs.csv");
        write_csv(&p.feedback, &path).unwrap();
        let back: Vec<ErasureRun> = read_csv(&path).unwrap();
        assert_eq!(back, p.feedback);
        assert_eq!(aggregate(&back).unwrap(), p.feedback_stats);
    }
}

#[test]
fn feedback_never_pays_for_a_left_reading() {
    let cfg = small();
    let info = mi_quadrature(&cfg.mixture, &cfg.sensor).unwrap();
    for p in run_sweep(&cfg).unwrap() {
        for r in &p.feedback {
            match r.action {
                Action::NoAction => {
                    assert!(r.m.unwrap() <= 0.0);
                    assert_eq!(r.w_total, 0.0);
                }
                Action::Act => assert!(r.m.unwrap() > 0.0),
            }
        }
        assert!(ledger_check(&p.feedback, info, cfg.p_target).unwrap().report.satisfied);
        // open loop pays the switch work on every run
        assert_eq!(p.openloop_stats.zero_mass, 0.0);
    }
}

#[test]
fn seed_changes_results() {
    let a = run_sweep(&small()).unwrap();
    let b = run_sweep(&small().with_seed(1)).unwrap();
    assert_ne!(a[0].feedback, b[0].feedback);
}
