//! The `pvp` command line and the live operator service.

pub mod bridge;
pub mod commands;
pub mod preview;
pub mod service;
