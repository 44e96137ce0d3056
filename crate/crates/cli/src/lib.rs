//! Scenario runner: TOML run configurations, CSV and JSON results, and a
//! CSV comparison tool.

pub mod compare;
pub mod config;
pub mod run;
