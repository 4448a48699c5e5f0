//! Annotates free-text negotiation turns with state and price, with and
//! without a machine-readable control trailer.

use anchorbench::dialogue::{classify_utterance, extract_amounts, split_trailer, GREETING};

fn main() {
    let turns = [
        GREETING,
        "Hello, I'm interested in your Single-story Apartment. Could you please tell me the price?",
        "Oh, I'm so glad you asked! It is available for $2,750.",
        "While $2750 is above my budget, perhaps we could consider a price around $1800 to $2000?",
        "Here's a daring thought: why don't we meet closer to $2450?",
        "Let me think about that for a moment.",
        "Meeting at $2450 works. Let's go for it!",
        "Fine, $2400 then.\n<<state=offer price=2400>>",
    ];
    let mut table = None;
    for raw in turns {
        let u = split_trailer(raw);
        let (state, price) = classify_utterance(&u, table);
        let amounts: Vec<String> = extract_amounts(&u.text).iter().map(|a| a.value.to_string()).collect();
        println!(
            "{:<11} {:>6} {:<8} amounts [{}]  {}",
            state.as_str(),
            price.map(|p| p.to_string()).unwrap_or_else(|| "--".into()),
            if u.control.is_some() { "trailer" } else { "text" },
            amounts.join(", "),
            u.text
        );
        if state.as_str() == "offer" {
            table = price;
        }
    }
}
