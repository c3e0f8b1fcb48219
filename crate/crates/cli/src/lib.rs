//! Experiment harness around the `covert-uav` planner: initialization,
//! full solves, oracle validation suites and parameter sweeps, all writing
//! plot-ready CSV and JSON.

pub mod artifacts;
pub mod commands;

/// The harness chapter of the book, compiled so its example runs as a doctest.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
