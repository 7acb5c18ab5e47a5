//! HTTP service and administration commands over the verigrade core.

pub mod admin;
pub mod config;
pub mod server;
