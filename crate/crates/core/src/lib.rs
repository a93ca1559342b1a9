//! Privacy-preserving location alerts over Hidden Vector Encryption.
//!
//! The crate is layered bottom-up:
//!
//! - [`bilinear`]: composite-order bilinear group (insecure exponent-space
//!   reference backend) with fixed-base power tables and operation counters.
//! - [`hve`]: key setup, encryption, token generation and query.
//! - [`encoding`]: grid addressing and the baseline, hierarchical and Gray
//!   cell encodings.
//! - [`minimize`]: cube minimization of cell-ID sets into wildcard tokens.
//! - [`expansion`]: budgeted alert-zone enlargement.
//! - [`engine`]: token store and parallel matching.
//! - [`bench`]: synthetic workloads and the benchmark report.

pub mod bilinear;
pub mod hve;
pub mod encoding;
pub mod minimize;
pub mod expansion;
pub mod engine;
pub mod bench;
