mod common;

use common::{fd_check, joint_fd_worst, mini_joint, op_cases};
use semaug::trinet::{Mode, Reduction};

const TOL: f64 = 1e-4;

#[test]
fn every_op_matches_central_differences() {
    for (name, inputs, build) in op_cases() {
        let worst = fd_check(&inputs, build);
        assert!(worst < TOL, "{name}: worst relative error {worst:e}");
    }
}

#[test]
fn joint_loss_gradients_in_training_mode() {
    for (seed, reduction) in [(1, Reduction::Mean), (2, Reduction::Sum)] {
        let m = mini_joint(seed, reduction, false);
        let worst = joint_fd_worst(&m, Mode::Train);
        assert!(worst < TOL, "{reduction:?}: {worst:e}");
    }
}

#[test]
fn stopped_extractor_flow_drops_trinet_terms_from_extractor_gradient() {
    // Detaching the TriNet input leaves only the classifier term in the
    // extractor gradient, so it no longer matches the full derivative.
    let stopped = mini_joint(3, Reduction::Mean, true);
    assert!(joint_fd_worst(&stopped, Mode::Infer) > 1e-2);
    let full = mini_joint(3, Reduction::Mean, false);
    assert!(joint_fd_worst(&full, Mode::Infer) < TOL);
}
