//! Online load balancing on unrelated machines with bounded recourse.
pub mod genflow;
pub mod instance;
pub mod lp;
pub mod matching;
pub mod oracle;
pub mod fractional;
pub mod rounding;
pub mod adversary;
pub mod harness;
