//! Entropy and mutual-information estimation between complementary regions
//! of high-dimensional data, with exact synthetic oracles and scaling-law
//! analysis.
//!
//! The estimators share one interface: a [`data::Dataset`], a
//! [`data::Partition`] of its coordinates into regions A and B, and a config.
//!
//! * [`knn`]: Kraskov-Stögbauer-Grassberger nearest-neighbour statistics.
//! * [`mine`]: the Donsker-Varadhan lower bound optimized over a neural score.
//! * [`autoregressive`]: exact prefix entropies from masked autoregressive
//!   models, combined across a forward and a reverse ordering.
//!
//! [`analysis::sweep`] turns any of them into a [`analysis::ScalingCurve`] over
//! the cut size `L`, which [`analysis::classify`] ranks against area, volume,
//! logarithmic, power-law and all-to-all growth.

pub mod analysis;
pub mod autoregressive;
pub mod data;
pub mod diffnet;
pub mod error;
pub mod estimate;
pub mod knn;
pub mod mine;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimate::MiEstimate;

pub(crate) fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

/// `(0..n).map(f)`, spread over the rayon pool when the `parallel` feature is on.
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
