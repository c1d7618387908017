use std::fmt;

use serde::Serialize;

use crate::network::Labeling;

/// Result of a synthesis run: either a certified controller or the reasons
/// every candidate was rejected. Rejection never claims that the consensus
/// target is unreachable, only that this construction did not certify it.
#[derive(Debug, Clone)]
pub enum Outcome<T> {
    Certified(T),
    Infeasible(Infeasibility),
}

impl<T> Outcome<T> {
    pub fn certified(self) -> Option<T> {
        match self {
            Outcome::Certified(t) => Some(t),
            Outcome::Infeasible(_) => None,
        }
    }

    pub fn as_certified(&self) -> Option<&T> {
        match self {
            Outcome::Certified(t) => Some(t),
            Outcome::Infeasible(_) => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Outcome::Certified(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    #[serde(serialize_with = "ser_opt_labeling")]
    pub labeling: Option<Labeling>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Infeasibility {
    pub attempts: Vec<Attempt>,
}

impl Infeasibility {
    pub fn push(&mut self, labeling: Option<Labeling>, reason: impl Into<String>) {
        self.attempts.push(Attempt { labeling, reason: reason.into() });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.attempts.iter().any(|a| a.reason.contains(needle))
    }
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .attempts
            .iter()
            .map(|a| match a.labeling {
                Some(l) => format!("{l}: {}", a.reason),
                None => a.reason.clone(),
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn ser_opt_labeling<S: serde::Serializer>(l: &Option<Labeling>, s: S) -> Result<S::Ok, S::Error> {
    l.map(|l| l.one_based()).serialize(s)
}
