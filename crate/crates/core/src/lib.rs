//! Stubbornness-gain synthesis for tripartite and sign consensus on
//! three-cluster signed networks.

pub mod cli;
pub mod closed_loop;
pub mod matalg;
pub mod network;
pub mod outcome;
pub mod signcons;
pub mod simulate;
pub mod tripartite;

use serde::{Deserialize, Serialize};

/// A gains file of either kind. Sign records carry null vectors and a
/// margin, so they are tried first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainsRecord {
    Sign(signcons::SignRecord),
    Tripartite(tripartite::TripartiteRecord),
}
