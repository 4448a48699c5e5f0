//! Negotiating agents: experimental conditions, role prompts, and the
//! model-backed and scripted implementations of [`Agent`].

pub mod llm;
pub mod prompt;
pub mod scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{AnnotatedTurn, NegotiationState};
use crate::money::Money;
use crate::transport::TransportError;

pub use llm::LlmAgent;
pub use prompt::{build_role_prompt, PromptTemplates, RolePrompt};
pub use scripted::{AnchorSeller, ConcessionBuyer, PolicyParams, ScriptedAgent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    SellerAnchor,
    SellerAnchorBuyerInformed,
}

impl Condition {
    pub const ALL: [Condition; 3] = [
        Condition::Baseline,
        Condition::SellerAnchor,
        Condition::SellerAnchorBuyerInformed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::SellerAnchor => "seller_anchor",
            Condition::SellerAnchorBuyerInformed => "seller_anchor_buyer_informed",
        }
    }

    pub fn seller_anchors(self) -> bool {
        self != Condition::Baseline
    }

    pub fn buyer_informed(self) -> bool {
        self == Condition::SellerAnchorBuyerInformed
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown condition {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Seller,
    Buyer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Role::Seller => "Seller",
            Role::Buyer => "Buyer",
        }
    }

    pub fn other(self) -> Role {
        match self {
            Role::Seller => Role::Buyer,
            Role::Buyer => Role::Seller,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "seller" => Ok(Role::Seller),
            "buyer" => Ok(Role::Buyer),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

/// Machine-readable state declared by an agent alongside its text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlTrailer {
    pub state: NegotiationState,
    pub price: Option<Money>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentUtterance {
    pub text: String,
    pub control: Option<ControlTrailer>,
}

impl AgentUtterance {
    pub fn text(text: impl Into<String>) -> Self {
        AgentUtterance {
            text: text.into(),
            control: None,
        }
    }

    pub fn declared(text: impl Into<String>, state: NegotiationState, price: Option<Money>) -> Self {
        AgentUtterance {
            text: text.into(),
            control: Some(ControlTrailer { state, price }),
        }
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("scripted policy exhausted: {0}")]
    PolicyExhausted(String),
    #[error("agent was asked to speak out of turn: {0}")]
    OutOfTurn(String),
}

/// One side of a negotiation. Agents see the full annotated history, including
/// the greeting, and return their next utterance.
pub trait Agent: Send {
    fn role(&self) -> Role;

    fn next_utterance(&mut self, history: &[AnnotatedTurn]) -> Result<AgentUtterance, AgentError>;

    /// Answers a free-form request (for example a questionnaire) after the
    /// conversation in `history`.
    fn answer(&mut self, history: &[AnnotatedTurn], request: &str) -> Result<String, AgentError>;
}
