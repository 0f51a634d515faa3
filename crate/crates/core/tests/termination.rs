mod common;

use common::termination_checks;

#[test]
fn zero_noise_rows_localize_within_n_minus_one_epochs() {
    termination_checks::zero_noise_rows_localize_within_n_minus_one_epochs();
}
