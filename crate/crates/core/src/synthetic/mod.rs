//! Generators with exactly known mutual information.

mod gaussian;
mod pairs;

pub use gaussian::{
    exact_gaussian_curve, exact_gaussian_mi, sample_gaussian, sample_gaussian_grid, GaussianSpec,
};
pub use pairs::{
    exact_pair_mi, expected_pair_mi_curve, sample_matching, sample_pairs, PairMatching,
    RandomPairSpec,
};
