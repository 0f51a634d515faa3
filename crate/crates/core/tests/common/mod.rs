//! Oracle checks shared by the focused test targets and the acceptance report.
//! Every check panics on the first mismatch.
#![allow(dead_code)]

pub mod filter_checks;
pub mod planner_checks;
pub mod termination_checks;
pub mod weight_checks;
