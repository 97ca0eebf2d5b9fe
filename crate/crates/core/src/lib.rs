//! Coherent correlation OTDR toolkit.
//!
//! A synthetic measurement chain (PRBS probe, Rayleigh fiber fingerprint,
//! temperature and vibration events, receiver noise, pulse-compression
//! correlation) and a low-complexity analysis chain on top of it:
//! phase-increment waterfalls, threshold detection and localization, and a
//! drift-plus-tone model fit that separates temperature changes from
//! vibrations.
//!
//! The guide in `book/` walks through each stage; its code snippets are
//! compiled and run as doctests of this crate.

pub mod characterize;
pub mod cli;
pub mod correlator;
pub mod detect;
mod error;
pub mod fiber_sim;
pub mod io;
pub mod pipeline;
pub mod probe;
pub mod waterfall;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/probe.md")]
    mod probe {}
    #[doc = include_str!("../../../book/src/fiber.md")]
    mod fiber {}
    #[doc = include_str!("../../../book/src/correlation.md")]
    mod correlation {}
    #[doc = include_str!("../../../book/src/waterfall.md")]
    mod waterfall {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/characterization.md")]
    mod characterization {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
}
