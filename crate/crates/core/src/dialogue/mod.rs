//! The alternating seller/buyer negotiation loop.

pub mod classify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentError, Agent, Condition, Role};
use crate::catalog::Scenario;
use crate::money::Money;
use crate::persona::PersonalityProfile;

pub use classify::{classify_text, classify_utterance, extract_amounts, format_trailer, parse_trailer, split_trailer};

/// Fixed opening line spoken by the seller; counts as turn 1.
pub const GREETING: &str = "Hi, how can I help you?";

pub const DEFAULT_MAX_TURNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NegotiationState {
    #[serde(rename = "offer")]
    Offer,
    #[serde(rename = "pondering")]
    Pondering,
    #[serde(rename = "accept")]
    Accept,
    #[serde(rename = "breakdown")]
    Breakdown,
    #[serde(rename = "chit-chat")]
    ChitChat,
}

impl NegotiationState {
    pub const ALL: [NegotiationState; 5] = [
        NegotiationState::Offer,
        NegotiationState::Pondering,
        NegotiationState::Accept,
        NegotiationState::Breakdown,
        NegotiationState::ChitChat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NegotiationState::Offer => "offer",
            NegotiationState::Pondering => "pondering",
            NegotiationState::Accept => "accept",
            NegotiationState::Breakdown => "breakdown",
            NegotiationState::ChitChat => "chit-chat",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        match norm.as_str() {
            "chitchat" => Some(NegotiationState::ChitChat),
            other => NegotiationState::ALL.into_iter().find(|st| st.as_str() == other),
        }
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, NegotiationState::Accept | NegotiationState::Breakdown)
    }
}

impl fmt::Display for NegotiationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotated utterance. `index` is 1-based; the greeting is turn 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    pub index: usize,
    pub role: Role,
    pub text: String,
    pub state: NegotiationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<Money>,
    /// Whether the annotation came from a control trailer rather than text cues.
    pub declared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Accepted { final_price: Money },
    Broken,
    MaxTurns,
}

impl Outcome {
    pub fn final_price(&self) -> Option<Money> {
        match self {
            Outcome::Accepted { final_price } => Some(*final_price),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Accepted { .. } => "accepted",
            Outcome::Broken => "broken",
            Outcome::MaxTurns => "max_turns",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub scenario_id: String,
    pub condition: Condition,
    pub seller_persona: PersonalityProfile,
    pub buyer_persona: PersonalityProfile,
    pub turns: Vec<AnnotatedTurn>,
    pub outcome: Outcome,
}

impl Transcript {
    /// Plain-text log, one `Role: text` paragraph per turn.
    pub fn render(&self) -> String {
        self.turns
            .iter()
            .map(|t| format!("{}: {}", t.role.title(), t.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

pub struct SessionSetup<'a> {
    pub session_id: &'a str,
    pub scenario: &'a Scenario,
    pub condition: Condition,
    pub seller_persona: &'a PersonalityProfile,
    pub buyer_persona: &'a PersonalityProfile,
    pub t_max: usize,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{role} agent failed at turn {turn}: {source}")]
    Agent {
        role: Role,
        turn: usize,
        partial: Vec<AnnotatedTurn>,
        #[source]
        source: AgentError,
    },
    #[error("turn sink failed: {0}")]
    Sink(String),
    #[error("t_max must be at least 2, got {0}")]
    InvalidMaxTurns(usize),
}

impl SessionError {
    pub fn partial(&self) -> &[AnnotatedTurn] {
        match self {
            SessionError::Agent { partial, .. } => partial,
            _ => &[],
        }
    }
}

/// Most recent offered price at or before the end of `turns`.
pub fn price_on_table(turns: &[AnnotatedTurn]) -> Option<Money> {
    turns
        .iter()
        .rev()
        .find(|t| t.state == NegotiationState::Offer && t.price.is_some())
        .and_then(|t| t.price)
}

pub fn run_session(
    seller: &mut dyn Agent,
    buyer: &mut dyn Agent,
    setup: &SessionSetup<'_>,
) -> Result<Transcript, SessionError> {
    run_session_with(seller, buyer, setup, |_| Ok(()))
}

/// Runs one session, handing every annotated turn to `on_turn` as soon as it
/// exists so callers can persist incrementally.
pub fn run_session_with(
    seller: &mut dyn Agent,
    buyer: &mut dyn Agent,
    setup: &SessionSetup<'_>,
    mut on_turn: impl FnMut(&AnnotatedTurn) -> Result<(), String>,
) -> Result<Transcript, SessionError> {
    if setup.t_max < 2 {
        return Err(SessionError::InvalidMaxTurns(setup.t_max));
    }
    let mut turns: Vec<AnnotatedTurn> = Vec::with_capacity(setup.t_max);
    let greeting = AnnotatedTurn {
        index: 1,
        role: Role::Seller,
        text: GREETING.to_string(),
        state: NegotiationState::ChitChat,
        price: None,
        declared: false,
    };
    on_turn(&greeting).map_err(SessionError::Sink)?;
    turns.push(greeting);

    let mut outcome = Outcome::MaxTurns;
    while turns.len() < setup.t_max {
        let index = turns.len() + 1;
        let role = if index.is_multiple_of(2) { Role::Buyer } else { Role::Seller };
        let agent: &mut dyn Agent = match role {
            Role::Seller => &mut *seller,
            Role::Buyer => &mut *buyer,
        };
        let utterance = match agent.next_utterance(&turns) {
            Ok(u) => u,
            Err(source) => {
                return Err(SessionError::Agent {
                    role,
                    turn: index,
                    partial: turns,
                    source,
                })
            }
        };
        let table = price_on_table(&turns);
        let (state, price) = classify_utterance(&utterance, table);
        let turn = AnnotatedTurn {
            index,
            role,
            text: utterance.text,
            state,
            price,
            declared: utterance.control.is_some(),
        };
        on_turn(&turn).map_err(SessionError::Sink)?;
        turns.push(turn);
        match state {
            NegotiationState::Accept => {
                outcome = match price.or(table) {
                    Some(final_price) => Outcome::Accepted { final_price },
                    None => Outcome::Broken,
                };
                break;
            }
            NegotiationState::Breakdown => {
                outcome = Outcome::Broken;
                break;
            }
            _ => {}
        }
    }

    Ok(Transcript {
        session_id: setup.session_id.to_string(),
        scenario_id: setup.scenario.id.clone(),
        condition: setup.condition,
        seller_persona: *setup.seller_persona,
        buyer_persona: *setup.buyer_persona,
        turns,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::scripted::ScriptedAgent;
    use crate::persona::{PersonalityProfile, TraitSetting};

    fn scenario() -> Scenario {
        Scenario {
            id: "apt".into(),
            title: "apartment".into(),
            description: "a flat".into(),
            seller_target: "2550".parse().unwrap(),
            buyer_target: "1530".parse().unwrap(),
        }
    }

    fn profile() -> PersonalityProfile {
        PersonalityProfile::new([TraitSetting::ALL[0]; 5])
    }

    fn run(seller: Vec<&str>, buyer: Vec<&str>, t_max: usize) -> Result<Transcript, SessionError> {
        let sc = scenario();
        let p = profile();
        let setup = SessionSetup {
            session_id: "apt.i0.baseline",
            scenario: &sc,
            condition: Condition::Baseline,
            seller_persona: &p,
            buyer_persona: &p,
            t_max,
        };
        let mut s = ScriptedAgent::new(Role::Seller, seller.into_iter().map(String::from).collect());
        let mut b = ScriptedAgent::new(Role::Buyer, buyer.into_iter().map(String::from).collect());
        run_session(&mut s, &mut b, &setup)
    }

    #[test]
    fn state_names_round_trip() {
        for s in NegotiationState::ALL {
            assert_eq!(NegotiationState::parse(s.as_str()), Some(s));
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.as_str()));
        }
        assert_eq!(NegotiationState::parse("CHIT_CHAT"), Some(NegotiationState::ChitChat));
        assert_eq!(NegotiationState::parse("haggle"), None);
    }

    #[test]
    fn accept_takes_price_on_table() {
        let t = run(
            vec!["It is $2550.", "How about $2300?"],
            vec!["What's the price?", "Around $1900 maybe?", "Deal!"],
            20,
        )
        .unwrap();
        assert_eq!(t.turns.len(), 6);
        assert_eq!(t.turns[0].text, GREETING);
        assert_eq!(t.outcome, Outcome::Accepted { final_price: "2300".parse().unwrap() });
        let roles: Vec<Role> = t.turns.iter().map(|t| t.role).collect();
        assert_eq!(roles, vec![Role::Seller, Role::Buyer, Role::Seller, Role::Buyer, Role::Seller, Role::Buyer]);
    }

    #[test]
    fn cap_and_breakdown() {
        let t = run(vec!["Nice weather.", "Sunny."], vec!["Indeed.", "Yes."], 5).unwrap();
        assert_eq!(t.turns.len(), 5);
        assert_eq!(t.outcome, Outcome::MaxTurns);

        let t = run(vec!["It is $2550."], vec!["Hello.", "No deal, I'll walk away."], 20).unwrap();
        assert_eq!(t.outcome, Outcome::Broken);
        assert_eq!(t.turns.len(), 4);
    }

    #[test]
    fn accept_without_any_price_is_broken() {
        let t = run(vec!["Hello there."], vec!["Deal!"], 20).unwrap();
        assert_eq!(t.outcome, Outcome::Broken);
    }

    #[test]
    fn accept_prefers_declared_price() {
        let t = run(
            vec!["It is $2550."],
            vec!["Hi.", "Fine.\n<<state=accept price=2500>>"],
            20,
        )
        .unwrap();
        assert_eq!(t.outcome.final_price(), Some("2500".parse().unwrap()));
        assert!(t.turns.last().unwrap().declared);
        assert_eq!(t.turns.last().unwrap().text, "Fine.");
    }

    #[test]
    fn agent_failure_keeps_partial_transcript() {
        let err = run(vec!["It is $2550."], vec!["Hi.", "Hmm."], 20).map(|_| ()).unwrap_err();
        // the scripted seller has one line; its second turn (5) fails
        match &err {
            SessionError::Agent { turn, role, .. } => {
                assert_eq!(*turn, 5);
                assert_eq!(*role, Role::Seller);
            }
            other => panic!("unexpected {other}"),
        }
        assert_eq!(err.partial().len(), 4);
        assert!(run(vec![], vec![], 1).is_err());
    }
}
