//! Records chat completions from a backend to a fixture file, then replays
//! them offline. A mock stands in for the remote model here; with a real
//! deployment the inner backend is an `HttpBackend`.

use std::sync::Arc;

use anchorbench::agents::{Agent, LlmAgent, RolePrompt, Role};
use anchorbench::dialogue::{classify_utterance, AnnotatedTurn, NegotiationState, GREETING};
use anchorbench::transport::replay::{record_and_replay, ReplayMode};
use anchorbench::transport::{BackendConfig, ChatClient, MockBackend};

fn buyer(client: Arc<ChatClient>) -> LlmAgent {
    let prompt = RolePrompt {
        role: Role::Buyer,
        system_text: "You are a buyer.".into(),
    };
    LlmAgent::new(prompt, client, "demo-model", 1.0)
}

fn main() {
    let dir = std::env::temp_dir().join(format!("anchorbench-replay-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let fixture = dir.join("fixture.jsonl");
    let history = vec![AnnotatedTurn {
        index: 1,
        role: Role::Seller,
        text: GREETING.into(),
        state: NegotiationState::ChitChat,
        price: None,
        declared: false,
    }];

    let upstream = Arc::new(MockBackend::scripted(vec![Ok(
        "Hello, what is the price?\n<<state=chit-chat>>".into(),
    )]));
    let recorder = record_and_replay(ReplayMode::Record, &fixture, Some(upstream.clone())).unwrap();
    let client = Arc::new(ChatClient::new(recorder, BackendConfig::default()).unwrap());
    let live = buyer(client).next_utterance(&history).unwrap();
    println!("recorded: {:?}  (upstream calls: {})", live.text, upstream.call_count());

    let replayer = record_and_replay(ReplayMode::Replay, &fixture, None).unwrap();
    let client = Arc::new(ChatClient::new(replayer, BackendConfig::default()).unwrap());
    let again = buyer(client).next_utterance(&history).unwrap();
    println!("replayed: {:?}  state {:?}", again.text, classify_utterance(&again, None).0);
    assert_eq!(live, again);
    std::fs::remove_dir_all(&dir).ok();
}
