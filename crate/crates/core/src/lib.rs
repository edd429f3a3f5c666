//! Replay engine for evaluating code review recommenders on repository
//! history.
//!
//! The pipeline ingests commit and pull-request event streams ([`corpus`]),
//! replays them into an evolving knowledge state ([`ledger`]), scores
//! candidate reviewers with nine scoring functions ([`recommenders`]),
//! re-runs history with one seeded reviewer replacement per pull request
//! ([`simulator`]), and reports quarterly outcomes — review expertise,
//! workload concentration, and files at risk to turnover ([`metrics`]).
//! A deterministic synthetic corpus generator ([`synth`]) backs tests and
//! demos.

pub mod corpus;
pub mod ledger;
pub mod metrics;
pub mod recommenders;
pub mod simulator;
pub mod synth;
