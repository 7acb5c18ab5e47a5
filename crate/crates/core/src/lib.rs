//! Core of verigrade: exercise bank, Dafny-subset frontend, verifier
//! orchestration, specification oracles, test-mode rewriting and progress
//! tracking. The HTTP gateway and the Python bindings are thin layers over
//! this crate.

pub mod attempt;
pub mod backend;
pub mod bank;
pub mod oracle;
pub mod progress;
pub mod syntax;
pub mod testmode;
