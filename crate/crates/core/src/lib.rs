//! Covert data collection by a full-duplex UAV.
//!
//! The UAV flies a closed trajectory over ground users, schedules one of
//! them per time slot, and jams with artificial noise so the unscheduled
//! users cannot tell whether anyone is transmitting. This crate models the
//! channel and the wardens' optimal detector in closed form, builds a
//! hover-and-fly initial design, and improves it with a penalty successive
//! convex approximation whose subproblems are second-order cone programs.

pub mod channel;
pub mod conic;
pub mod detection;
pub mod error;
pub mod geom;
pub mod psca;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod shaf;
pub mod validation;

pub use error::{Error, Result};
pub use geom::Point;
pub use scenario::Scenario;

/// Book chapters, compiled so their examples run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenario.md")]
    mod scenario {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/initialization.md")]
    mod initialization {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/cones.md")]
    mod cones {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
