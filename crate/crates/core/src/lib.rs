//! Spectral-edge laboratory for random periodic band matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`circulant`]: the band graph, its spectrum and exact walk counts.
//! * [`sampler`]: seeded random sign and phase band matrices.
//! * [`cheby`]: Chebyshev algebra, non-backtracking moments and the
//!   semicircle comparison.
//! * [`paths`]: exhaustive path enumeration, cumulants and diagram shapes.
//! * [`edge`]: Monte Carlo statistics of the extreme eigenvalues.

mod ddouble;
mod error;
mod linalg;

pub mod cheby;
pub mod circulant;
pub mod edge;
pub mod paths;
pub mod sampler;

pub use error::{Error, Result};

/// Formats a float for CSV output with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

// The guide's snippets run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/circulant.md")]
    mod circulant {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/edge.md")]
    mod edge {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
