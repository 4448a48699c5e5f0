//! Deterministic stand-ins for model-backed agents.
//!
//! Both policies are pure functions of the annotated history, so the same
//! scenario and parameters always produce the same utterances.

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{Agent, AgentError, AgentUtterance, Condition, Role};
use crate::catalog::Scenario;
use crate::dialogue::{AnnotatedTurn, NegotiationState};
use crate::metrics::derive_price_bounds;
use crate::money::Money;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub anchor_multiplier: f64,
    pub concession_rate: f64,
    /// Seller floor; defaults to the derived seller minimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<Money>,
    pub open_ratio: f64,
    pub step: f64,
    pub accept_gap: f64,
    pub susceptibility_coeff: f64,
    /// Fixed questionnaire answers returned by [`Agent::answer`].
    pub survey_scores: [u8; 16],
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            anchor_multiplier: 1.1,
            concession_rate: 0.5,
            floor: None,
            open_ratio: 0.9,
            step: 0.7,
            accept_gap: 0.0,
            susceptibility_coeff: 0.5,
            survey_scores: [5; 16],
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            (self.anchor_multiplier >= 1.0, "anchor_multiplier must be >= 1"),
            (self.concession_rate > 0.0 && self.concession_rate < 1.0, "concession_rate must be in (0,1)"),
            (self.open_ratio > 0.0 && self.open_ratio <= 1.0, "open_ratio must be in (0,1]"),
            (self.step > 0.0 && self.step < 1.0, "step must be in (0,1)"),
            (self.accept_gap >= 0.0, "accept_gap must be >= 0"),
            (
                (0.0..=1.0).contains(&self.susceptibility_coeff),
                "susceptibility_coeff must be in [0,1]",
            ),
            (
                self.survey_scores.iter().all(|s| (1..=7).contains(s)),
                "survey scores must be in 1..=7",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(msg.to_string());
            }
        }
        Ok(())
    }
}

fn dec(x: f64) -> Decimal {
    Decimal::from_f64(x).expect("finite policy parameter")
}

fn survey_text(scores: &[u8; 16]) -> String {
    scores
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n")
}

fn check_open(history: &[AnnotatedTurn], who: &str) -> Result<(), AgentError> {
    match history.last() {
        Some(t) if t.state.is_absorbing() => Err(AgentError::PolicyExhausted(format!(
            "{who} asked to continue after {} at turn {}",
            t.state, t.index
        ))),
        _ => Ok(()),
    }
}

fn offers(history: &[AnnotatedTurn], role: Role) -> impl Iterator<Item = Money> + '_ {
    history
        .iter()
        .filter(move |t| t.role == role && t.state == NegotiationState::Offer)
        .filter_map(|t| t.price)
}

/// Opens at `anchor_multiplier x target` under anchoring conditions (at the
/// target otherwise) and concedes a fixed fraction of the distance to its
/// floor after every buyer offer. Accepts a buyer offer that meets its next
/// offer.
pub struct AnchorSeller {
    params: PolicyParams,
    target: Money,
    floor: Money,
    anchors: bool,
}

impl AnchorSeller {
    pub fn new(params: PolicyParams, scenario: &Scenario, condition: Condition) -> Self {
        let floor = params.floor.unwrap_or_else(|| {
            derive_price_bounds(scenario.seller_target, scenario.buyer_target)
                .map(|b| b.seller_min)
                .unwrap_or(scenario.buyer_target)
        });
        AnchorSeller {
            target: scenario.seller_target,
            floor,
            anchors: condition.seller_anchors(),
            params,
        }
    }

    pub fn opening_offer(&self) -> Money {
        if self.anchors {
            self.target.scale(dec(self.params.anchor_multiplier)).round_cents()
        } else {
            self.target
        }
    }

    pub fn concede(&self, last: Money) -> Money {
        let gap = last.decimal() - self.floor.decimal();
        let next = Money::new(last.decimal() - dec(self.params.concession_rate) * gap).round_cents();
        // cent rounding can stall just above the floor
        if next >= last || next < self.floor {
            self.floor.min(last)
        } else {
            next
        }
    }
}

impl Agent for AnchorSeller {
    fn role(&self) -> Role {
        Role::Seller
    }

    fn next_utterance(&mut self, history: &[AnnotatedTurn]) -> Result<AgentUtterance, AgentError> {
        check_open(history, "seller")?;
        let Some(own_last) = offers(history, Role::Seller).last() else {
            let p = self.opening_offer();
            return Ok(AgentUtterance::declared(
                format!("The price is ${p}."),
                NegotiationState::Offer,
                Some(p),
            ));
        };
        let own_last_index = history
            .iter()
            .rposition(|t| t.role == Role::Seller && t.state == NegotiationState::Offer)
            .expect("seller offer exists");
        let buyer_since = history[own_last_index..]
            .iter()
            .filter(|t| t.role == Role::Buyer && t.state == NegotiationState::Offer)
            .filter_map(|t| t.price)
            .next_back();
        let Some(bid) = buyer_since else {
            return Ok(AgentUtterance::declared(
                format!("My price is still ${own_last}."),
                NegotiationState::Offer,
                Some(own_last),
            ));
        };
        let next = self.concede(own_last);
        if bid >= next {
            return Ok(AgentUtterance::declared(
                format!("Deal! ${bid} works for me."),
                NegotiationState::Accept,
                Some(bid),
            ));
        }
        Ok(AgentUtterance::declared(
            format!("I can come down to ${next}."),
            NegotiationState::Offer,
            Some(next),
        ))
    }

    fn answer(&mut self, _history: &[AnnotatedTurn], _request: &str) -> Result<String, AgentError> {
        Ok(survey_text(&self.params.survey_scores))
    }
}

/// Anchors its reference price at `(1 - c) * buyer_target + c * first_offer`
/// and moves its own offer a fixed fraction toward that reference each turn.
/// Accepts a seller offer within `accept_gap` of its next offer. Under the
/// informed condition the coefficient is halved.
pub struct ConcessionBuyer {
    params: PolicyParams,
    target: Money,
    title: String,
    coeff: f64,
}

impl ConcessionBuyer {
    pub fn new(params: PolicyParams, scenario: &Scenario, condition: Condition) -> Self {
        let coeff = if condition.buyer_informed() {
            params.susceptibility_coeff / 2.0
        } else {
            params.susceptibility_coeff
        };
        ConcessionBuyer {
            target: scenario.buyer_target,
            title: scenario.title.clone(),
            coeff,
            params,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coeff
    }

    pub fn reference(&self, first_seller_offer: Money) -> Money {
        let c = dec(self.coeff);
        Money::new((Decimal::ONE - c) * self.target.decimal() + c * first_seller_offer.decimal()).round_cents()
    }

    pub fn next_offer(&self, own_last: Option<Money>, reference: Money) -> Money {
        match own_last {
            None => self.target.scale(dec(self.params.open_ratio)).round_cents(),
            Some(last) => Money::new(last.decimal() + dec(self.params.step) * (reference.decimal() - last.decimal()))
                .round_cents(),
        }
    }
}

impl Agent for ConcessionBuyer {
    fn role(&self) -> Role {
        Role::Buyer
    }

    fn next_utterance(&mut self, history: &[AnnotatedTurn]) -> Result<AgentUtterance, AgentError> {
        check_open(history, "buyer")?;
        let Some(first) = offers(history, Role::Seller).next() else {
            return Ok(AgentUtterance::declared(
                format!("Hello, I'm interested in your {}. Could you please tell me the price?", self.title),
                NegotiationState::ChitChat,
                None,
            ));
        };
        let reference = self.reference(first);
        let next = self.next_offer(offers(history, Role::Buyer).last(), reference);
        let standing = history
            .last()
            .filter(|t| t.role == Role::Seller && t.state == NegotiationState::Offer)
            .and_then(|t| t.price);
        if let Some(ask) = standing {
            if (ask.decimal() - next.decimal()) <= dec(self.params.accept_gap) {
                return Ok(AgentUtterance::declared(
                    format!("Deal, I'll take it at ${ask}."),
                    NegotiationState::Accept,
                    Some(ask),
                ));
            }
        }
        Ok(AgentUtterance::declared(
            format!("How about ${next}?"),
            NegotiationState::Offer,
            Some(next),
        ))
    }

    fn answer(&mut self, _history: &[AnnotatedTurn], _request: &str) -> Result<String, AgentError> {
        Ok(survey_text(&self.params.survey_scores))
    }
}

/// Replays a fixed list of raw replies (trailers allowed) and fails once the
/// list runs out.
pub struct ScriptedAgent {
    role: Role,
    lines: Vec<String>,
    next: usize,
    answers: Vec<String>,
}

impl ScriptedAgent {
    pub fn new(role: Role, lines: Vec<String>) -> Self {
        ScriptedAgent {
            role,
            lines,
            next: 0,
            answers: Vec::new(),
        }
    }

    /// Replies returned by successive [`Agent::answer`] calls; the last repeats.
    pub fn with_answers(mut self, answers: Vec<String>) -> Self {
        self.answers = answers;
        self
    }
}

impl Agent for ScriptedAgent {
    fn role(&self) -> Role {
        self.role
    }

    fn next_utterance(&mut self, _history: &[AnnotatedTurn]) -> Result<AgentUtterance, AgentError> {
        let line = self.lines.get(self.next).ok_or_else(|| {
            AgentError::PolicyExhausted(format!("{} script has {} lines", self.role, self.lines.len()))
        })?;
        self.next += 1;
        Ok(crate::dialogue::split_trailer(line))
    }

    fn answer(&mut self, _history: &[AnnotatedTurn], _request: &str) -> Result<String, AgentError> {
        if self.answers.is_empty() {
            return Err(AgentError::PolicyExhausted("no scripted answers".into()));
        }
        let i = self.next.min(self.answers.len() - 1);
        self.next += 1;
        Ok(self.answers[i].clone())
    }
}
