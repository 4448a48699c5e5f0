//! Agent backed by a chat-completion model.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Agent, AgentError, AgentUtterance, Role, RolePrompt};
use crate::dialogue::{split_trailer, AnnotatedTurn};
use crate::transport::{ChatClient, ChatMessage, ChatRequest, ChatRole, Scalar};

pub struct LlmAgent {
    prompt: RolePrompt,
    client: Arc<ChatClient>,
    model_id: String,
    temperature: f64,
    extra_params: BTreeMap<String, Scalar>,
}

impl LlmAgent {
    pub fn new(prompt: RolePrompt, client: Arc<ChatClient>, model_id: impl Into<String>, temperature: f64) -> Self {
        LlmAgent {
            prompt,
            client,
            model_id: model_id.into(),
            temperature,
            extra_params: BTreeMap::new(),
        }
    }

    pub fn with_extra_params(mut self, extra: BTreeMap<String, Scalar>) -> Self {
        self.extra_params = extra;
        self
    }

    pub fn prompt(&self) -> &RolePrompt {
        &self.prompt
    }

    /// The agent's own turns become assistant messages and the counterpart's
    /// become user messages; adjacent same-role turns are merged.
    pub fn build_request(&self, history: &[AnnotatedTurn], extra_user: Option<&str>) -> ChatRequest {
        let mut messages: Vec<ChatMessage> = Vec::new();
        let items = history
            .iter()
            .map(|t| {
                let role = if t.role == self.prompt.role { ChatRole::Assistant } else { ChatRole::User };
                (role, t.text.as_str())
            })
            .chain(extra_user.map(|u| (ChatRole::User, u)));
        for (role, text) in items {
            match messages.last_mut() {
                Some(last) if last.role == role => {
                    last.content.push_str("\n\n");
                    last.content.push_str(text);
                }
                _ => messages.push(ChatMessage {
                    role,
                    content: text.to_string(),
                }),
            }
        }
        ChatRequest {
            model_id: self.model_id.clone(),
            system_text: self.prompt.system_text.clone(),
            messages,
            temperature: self.temperature,
            extra_params: self.extra_params.clone(),
        }
    }
}

impl Agent for LlmAgent {
    fn role(&self) -> Role {
        self.prompt.role
    }

    fn next_utterance(&mut self, history: &[AnnotatedTurn]) -> Result<AgentUtterance, AgentError> {
        if history.last().is_some_and(|t| t.role == self.prompt.role) {
            return Err(AgentError::OutOfTurn(format!("{} spoke last", self.prompt.role)));
        }
        let response = self.client.chat(&self.build_request(history, None))?;
        Ok(split_trailer(&response.text))
    }

    fn answer(&mut self, history: &[AnnotatedTurn], request: &str) -> Result<String, AgentError> {
        let response = self.client.chat(&self.build_request(history, Some(request)))?;
        Ok(split_trailer(&response.text).text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::NegotiationState;
    use crate::transport::{BackendConfig, MockBackend, MockClock};

    fn turn(index: usize, role: Role, text: &str) -> AnnotatedTurn {
        AnnotatedTurn {
            index,
            role,
            text: text.into(),
            state: NegotiationState::ChitChat,
            price: None,
            declared: false,
        }
    }

    fn agent(role: Role, backend: Arc<MockBackend>) -> LlmAgent {
        let client = ChatClient::with_clock(backend, BackendConfig::default(), Arc::new(MockClock::new())).unwrap();
        LlmAgent::new(
            RolePrompt {
                role,
                system_text: "sys".into(),
            },
            Arc::new(client),
            "model-x",
            1.0,
        )
    }

    #[test]
    fn maps_roles_and_parses_trailer() {
        let backend = Arc::new(MockBackend::scripted(vec![Ok(
            "How about $1,900?\n<<state=offer price=1900>>".into(),
        )]));
        let mut buyer = agent(Role::Buyer, backend.clone());
        let history = vec![
            turn(1, Role::Seller, "Hi, how can I help you?"),
            turn(2, Role::Buyer, "What's the price?"),
            turn(3, Role::Seller, "It is $2550."),
        ];
        let u = buyer.next_utterance(&history).unwrap();
        assert_eq!(u.text, "How about $1,900?");
        assert_eq!(u.control.unwrap().price, Some("1900".parse().unwrap()));
        let sent = &backend.calls()[0];
        assert_eq!(sent.system_text, "sys");
        let roles: Vec<ChatRole> = sent.messages.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![ChatRole::User, ChatRole::Assistant, ChatRole::User]);
    }

    #[test]
    fn survey_request_is_merged_after_own_last_turn() {
        let backend = Arc::new(MockBackend::scripted(vec![Ok("1. 5".into())]));
        let mut seller = agent(Role::Seller, backend.clone());
        let history = vec![turn(1, Role::Seller, "Hi"), turn(2, Role::Buyer, "Deal")];
        seller.answer(&history, "Rate it").unwrap();
        let sent = &backend.calls()[0];
        assert_eq!(sent.messages.len(), 2);
        assert_eq!(sent.messages[1].content, "Deal\n\nRate it");
        assert!(seller.next_utterance(&history[..1]).is_err());
    }
}
