//! Blocksworld event sequencing.
//!
//! Given a source and a target arrangement of colored blocks, predict the
//! sequence of `move(X, Y, t)` events that turns one into the other. The
//! crate provides the symbolic domain model and transition rules, an exact
//! planner enumerating every minimal sequence, a seeded dataset generator,
//! three learned sequencers (an MLP, tabular Q-learning and rule induction),
//! evaluation metrics with an inductive-generalization benchmark, and a
//! mapping from object detections onto block scenes.

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod ilp;
pub mod logic;
pub mod mlp;
pub mod model;
pub mod planner;
pub mod qlearn;
pub mod reimagine;
pub mod sequencer;
