//! Randomized property suites, 1000 cases each.

mod common;

#[test]
fn beta_cdf_is_monotone() {
    common::beta_cdf_is_monotone().unwrap();
}

#[test]
fn tabulated_cdf_is_monotone() {
    common::tabulated_cdf_is_monotone().unwrap();
}

#[test]
fn peak_age_dominates_average() {
    common::peak_age_dominates_average().unwrap();
}

#[test]
fn eta_residual_and_range() {
    common::eta_residual_and_range().unwrap();
}

#[test]
fn eta_decreases_with_closer_neighbors() {
    common::eta_decreases_with_closer_neighbors().unwrap();
}

#[test]
fn eta_decreases_with_added_neighbor() {
    common::eta_decreases_with_added_neighbor().unwrap();
}

#[test]
fn age_recursion_holds_over_full_runs() {
    common::age_recursion_holds_over_full_runs().unwrap();
}

#[test]
fn same_seed_same_metrics() {
    common::same_seed_same_metrics().unwrap();
}
