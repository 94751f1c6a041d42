//! Energy-minimizing placement of processing demands on fog hosts behind
//! PON, spine-and-leaf or cloud-only backhaul networks.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod harness;
pub mod opt;
pub mod par;
pub mod power;
pub mod topology;
