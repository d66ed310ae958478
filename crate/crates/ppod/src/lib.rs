//! Std companion to `ppod-core`: TCP transport, the networked dealer
//! service, dataset and config file handling, and session orchestration.

pub mod config;
pub mod data;
pub mod dealer;
pub mod runner;
pub mod tcp;
