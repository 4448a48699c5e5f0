//! Samples a Big Five profile and renders it as adjective phrases.
//!
//! cargo run --example persona_rendering -- [seed]

use anchorbench::persona::{render_persona_text, sample_profile, trait_score, AdjectiveLexicon, Dimension};
use anchorbench::rng::stream;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let lexicon = AdjectiveLexicon::builtin();
    let profile = sample_profile(&mut stream(seed, "profile"));
    for dim in Dimension::ALL {
        println!("{:<18} {:>2}", dim.name(), trait_score(&profile, dim));
    }
    let text = render_persona_text(&profile, &lexicon, 3, &mut stream(seed, "persona")).unwrap();
    println!("\n{}", text.rendered);
}
