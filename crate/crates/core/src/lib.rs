//! Symbolic execution of WebAssembly smart contracts.
//!
//! The crate decodes Wasm 1.0 binaries, runs them on a symbolic stack
//! machine whose values are bit-vector expressions, models the EOSIO and
//! Ethereum (EWasm) host interfaces, and checks six vulnerability oracles
//! over the recorded execution traces:
//!
//! - fake EOS transfer, forged transfer notification, and block-info
//!   dependency for EOSIO contracts entered through `apply`;
//! - greedy (receives Ether, can never send), dangerous delegatecall, and
//!   block-info dependency for EWasm contracts entered through `main`.
//!
//! Path feasibility is decided in QF_BV. Queries can go to any SMT-LIB2
//! solver process (`z3 -in` works out of the box) or to the bundled
//! bit-blasting solver, so analyses run without external tooling.
//!
//! [`report::analyze_bytes`] is the high-level entry point; the layers
//! underneath ([`loader`], [`symbolic`], [`engine`], [`host`],
//! [`detectors`]) are public for direct use and testing.

pub mod detectors;
pub mod engine;
pub mod host;
pub mod loader;
pub mod report;
pub mod symbolic;
