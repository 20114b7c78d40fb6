//! Cardinal-probabilistic interaction indices: exact computation, tree
//! extraction, proxy training and the proxy-adjusted Monte Carlo estimator.

pub mod coalition;
pub mod error;
pub mod exact;
pub mod extraction;
pub mod game;
pub mod gbt;
pub mod indices;
pub mod interaction;
pub mod msr;
pub mod numeric;
pub mod pipeline;
pub mod sampling;
pub mod trees;

pub use coalition::Coalition;
pub use error::{Error, Result};
pub use game::Game;
pub use indices::{IndexFamily, IndexSpec};
pub use interaction::{InteractionVector, Provenance};
pub use trees::TreeEnsemble;
