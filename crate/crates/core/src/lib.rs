//! Self-improving demonstrations for goal-oriented navigation on discrete
//! graph environments.
//!
//! An agent is first trained by imitation on shortest-path data, then rolls
//! out its own episodes; successful ones become the next round's
//! demonstrations and a fresh agent is trained on them.

pub mod datasets;
pub mod envmodel;
pub mod error;
pub mod eval;
pub mod policy;
pub mod rollout;
pub mod sidloop;
pub mod vocab;
mod world;

pub use error::{Result, SidError};
pub use world::World;
