//! One negotiation per condition between the deterministic scripted agents.

use anchorbench::agents::{AnchorSeller, Condition, ConcessionBuyer, PolicyParams};
use anchorbench::catalog::Scenario;
use anchorbench::dialogue::{run_session, SessionSetup, DEFAULT_MAX_TURNS};
use anchorbench::metrics::{derive_price_bounds, seller_utility};
use anchorbench::persona::{PersonalityProfile, TraitSetting};

fn main() {
    let scenario = Scenario {
        id: "apartment".into(),
        title: "Single-story Apartment".into(),
        description: "A single-story apartment.".into(),
        seller_target: "2550".parse().unwrap(),
        buyer_target: "1530".parse().unwrap(),
    };
    let persona = PersonalityProfile::new([TraitSetting::ALL[0]; 5]);
    let params = PolicyParams::default();
    let bounds = derive_price_bounds(scenario.seller_target, scenario.buyer_target).unwrap();
    for condition in Condition::ALL {
        let mut seller = AnchorSeller::new(params.clone(), &scenario, condition);
        let mut buyer = ConcessionBuyer::new(params.clone(), &scenario, condition);
        let setup = SessionSetup {
            session_id: condition.as_str(),
            scenario: &scenario,
            condition,
            seller_persona: &persona,
            buyer_persona: &persona,
            t_max: DEFAULT_MAX_TURNS,
        };
        let t = run_session(&mut seller, &mut buyer, &setup).unwrap();
        println!("== {condition} ==");
        println!("{}", t.render());
        if let Some(p) = t.outcome.final_price() {
            println!("seller utility {:.4}\n", seller_utility(&bounds, p));
        }
    }
}
