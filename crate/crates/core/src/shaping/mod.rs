//! Probabilistic shaping sources.
//!
//! [`mb`] fits Maxwell-Boltzmann point probabilities to a target entropy,
//! [`ess`] is the enumerative sphere shaping distribution matcher, and [`pas`]
//! combines either amplitude shaper with uniform signs into a square-QAM source.

pub mod ess;
pub mod mb;
pub mod pas;

pub use ess::EssCode;
pub use mb::{mb_distribution, mb_fit, MbDistribution};
pub use pas::{AmplitudeShaper, PasSource};
