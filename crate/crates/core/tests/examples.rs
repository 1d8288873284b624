// Every example compiles as a module here and its `run` entry point is executed.
#[allow(dead_code)]
mod filter_responses {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/filter_responses.rs"));
}
#[allow(dead_code)]
mod signal_space_lock {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/signal_space_lock.rs"));
}
#[allow(dead_code)]
mod model_hierarchy {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/model_hierarchy.rs"));
}
#[allow(dead_code)]
mod integrator_schemes {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/integrator_schemes.rs"));
}
#[allow(dead_code)]
mod lock_detection {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/lock_detection.rs"));
}
#[allow(dead_code)]
mod averaging_sweep {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/averaging_sweep.rs"));
}
#[allow(dead_code)]
mod limit_cycles {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/limit_cycles.rs"));
}
#[allow(dead_code)]
mod pullin_scan {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pullin_scan.rs"));
}
#[allow(dead_code)]
mod step_size_trap {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/step_size_trap.rs"));
}
#[allow(dead_code)]
mod phase_portrait {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/phase_portrait.rs"));
}
#[allow(dead_code)]
mod scenario_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenario_report.rs"));
}

#[test]
fn filter_responses_runs() {
    filter_responses::run().expect("filter_responses example failed");
}

#[test]
fn signal_space_lock_runs() {
    signal_space_lock::run().expect("signal_space_lock example failed");
}

#[test]
fn model_hierarchy_runs() {
    model_hierarchy::run().expect("model_hierarchy example failed");
}

#[test]
fn integrator_schemes_runs() {
    integrator_schemes::run().expect("integrator_schemes example failed");
}

#[test]
fn lock_detection_runs() {
    lock_detection::run().expect("lock_detection example failed");
}

#[test]
fn averaging_sweep_runs() {
    averaging_sweep::run().expect("averaging_sweep example failed");
}

#[test]
fn limit_cycles_runs() {
    limit_cycles::run().expect("limit_cycles example failed");
}

#[test]
fn pullin_scan_runs() {
    pullin_scan::run().expect("pullin_scan example failed");
}

#[test]
fn step_size_trap_runs() {
    step_size_trap::run().expect("step_size_trap example failed");
}

#[test]
fn phase_portrait_runs() {
    phase_portrait::run().expect("phase_portrait example failed");
}

#[test]
fn scenario_report_runs() {
    scenario_report::run().expect("scenario_report example failed");
}
