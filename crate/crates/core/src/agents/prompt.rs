//! Role prompt assembly from `$`-placeholder text templates.

use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Condition, Role};
use crate::catalog::Scenario;
use crate::persona::PersonaText;

pub const SELLER_SETTING: &str = "seller_setting.txt";
pub const BUYER_SETTING: &str = "buyer_setting.txt";
pub const SELLER_ANCHOR: &str = "seller_anchor.txt";
pub const BUYER_INFORMED: &str = "seller_anchor_buyer_informed.txt";
pub const CONTROL_PROTOCOL: &str = "control_protocol.txt";

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$(PRODUCT|TARGET_PRICE|DESCRIPTION|PERSONA_TEXT)\b").expect("placeholder regex"));

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub seller_setting: String,
    pub buyer_setting: String,
    pub seller_anchor: String,
    pub buyer_informed: String,
    /// Appended last when present; asks the model to end with a state trailer.
    pub control_protocol: Option<String>,
}

impl PromptTemplates {
    pub fn builtin() -> Self {
        PromptTemplates {
            seller_setting: include_str!("../../data/templates/seller_setting.txt").to_string(),
            buyer_setting: include_str!("../../data/templates/buyer_setting.txt").to_string(),
            seller_anchor: include_str!("../../data/templates/seller_anchor.txt").to_string(),
            buyer_informed: include_str!("../../data/templates/seller_anchor_buyer_informed.txt").to_string(),
            control_protocol: Some(include_str!("../../data/templates/control_protocol.txt").to_string()),
        }
    }

    /// Reads the five template files from `dir`. A missing control protocol
    /// file disables the trailer instruction.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        let control = match read(CONTROL_PROTOCOL) {
            Ok(text) => Some(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(e),
        };
        Ok(PromptTemplates {
            seller_setting: read(SELLER_SETTING)?,
            buyer_setting: read(BUYER_SETTING)?,
            seller_anchor: read(SELLER_ANCHOR)?,
            buyer_informed: read(BUYER_INFORMED)?,
            control_protocol: control,
        })
    }

    pub fn without_control_protocol(mut self) -> Self {
        self.control_protocol = None;
        self
    }

    /// Hex sha256 over all blocks, for the experiment manifest.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for block in [
            &self.seller_setting,
            &self.buyer_setting,
            &self.seller_anchor,
            &self.buyer_informed,
        ] {
            h.update((block.len() as u64).to_le_bytes());
            h.update(block.as_bytes());
        }
        if let Some(c) = &self.control_protocol {
            h.update(c.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates::builtin()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePrompt {
    pub role: Role,
    pub system_text: String,
}

/// Substitutes placeholders in one pass, so substituted values are never
/// themselves expanded.
fn fill(template: &str, role: Role, scenario: &Scenario, persona: &PersonaText) -> String {
    PLACEHOLDER
        .replace_all(template, |caps: &Captures| match &caps[1] {
            "PRODUCT" => scenario.title.clone(),
            "TARGET_PRICE" => match role {
                Role::Seller => format!("${}", scenario.seller_target),
                Role::Buyer => format!("${}", scenario.buyer_target),
            },
            "DESCRIPTION" => scenario.description.clone(),
            "PERSONA_TEXT" => persona.rendered.clone(),
            _ => unreachable!("placeholder regex"),
        })
        .into_owned()
}

pub fn build_role_prompt(
    role: Role,
    scenario: &Scenario,
    persona: &PersonaText,
    condition: Condition,
    templates: &PromptTemplates,
) -> RolePrompt {
    let mut blocks = vec![match role {
        Role::Seller => fill(&templates.seller_setting, role, scenario, persona),
        Role::Buyer => fill(&templates.buyer_setting, role, scenario, persona),
    }];
    match role {
        Role::Seller if condition.seller_anchors() => blocks.push(templates.seller_anchor.clone()),
        Role::Buyer if condition.buyer_informed() => blocks.push(templates.buyer_informed.clone()),
        _ => {}
    }
    if let Some(control) = &templates.control_protocol {
        blocks.push(control.clone());
    }
    let system_text = blocks
        .iter()
        .map(|b| b.trim_end())
        .collect::<Vec<_>>()
        .join("\n\n");
    RolePrompt { role, system_text }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::PersonaPhrase;

    fn scenario() -> Scenario {
        Scenario {
            id: "apartment".into(),
            title: "apartment".into(),
            description: "Two bedrooms near the park; costs $PRODUCT dollars".into(),
            seller_target: "2550".parse().unwrap(),
            buyer_target: "1530".parse().unwrap(),
        }
    }

    fn persona() -> PersonaText {
        PersonaText {
            phrases: Vec::<PersonaPhrase>::new(),
            rendered: "a bit nervous, very bold".into(),
        }
    }

    fn prompt(role: Role, c: Condition) -> String {
        build_role_prompt(role, &scenario(), &persona(), c, &PromptTemplates::builtin()).system_text
    }

    #[test]
    fn buyer_baseline() {
        let t = prompt(Role::Buyer, Condition::Baseline);
        assert!(t.starts_with("Act as a buyer and try to strike a deal for a apartment with a lower price"));
        assert!(t.contains("You can accept a higher price though"));
        assert!(t.contains("You would like to pay for $1530."));
        assert!(t.contains("You have the following personality: a bit nervous, very bold."));
        assert!(!t.contains("Two bedrooms"));
        assert!(!t.contains("Stay Focused"));
    }

    #[test]
    fn seller_blocks_by_condition() {
        let base = prompt(Role::Seller, Condition::Baseline);
        assert!(base.contains("Your target price for this item is $2550."));
        // substituted values are not expanded again
        assert!(base.contains("costs $PRODUCT dollars"));
        assert!(!base.contains("anchoring effect"));
        let anchor_block = PromptTemplates::builtin().seller_anchor;
        for c in [Condition::SellerAnchor, Condition::SellerAnchorBuyerInformed] {
            assert!(prompt(Role::Seller, c).contains(anchor_block.trim_end()));
        }
        assert!(!prompt(Role::Buyer, Condition::SellerAnchor).contains("anchoring"));
    }

    #[test]
    fn informed_buyer_gets_all_strategies() {
        let t = prompt(Role::Buyer, Condition::SellerAnchorBuyerInformed);
        assert!(t.contains("Set a Counter-Anchor if Needed"));
        assert!(t.contains("1. Stay Focused on Your Target Price"));
        assert!(t.contains("3. Ask for Justification of the High Price"));
        assert!(t.contains(PromptTemplates::builtin().buyer_informed.trim_end()));
    }

    #[test]
    fn control_protocol_is_separate_and_optional() {
        let with = prompt(Role::Buyer, Condition::Baseline);
        assert!(with.ends_with(PromptTemplates::builtin().control_protocol.unwrap().trim_end()));
        let without = build_role_prompt(
            Role::Buyer,
            &scenario(),
            &persona(),
            Condition::Baseline,
            &PromptTemplates::builtin().without_control_protocol(),
        );
        assert!(!without.system_text.contains("<<state="));
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/templates");
        let loaded = PromptTemplates::load_dir(&dir).unwrap();
        assert_eq!(loaded, PromptTemplates::builtin());
        assert_eq!(loaded.digest(), PromptTemplates::builtin().digest());
        assert_ne!(loaded.digest(), PromptTemplates::builtin().without_control_protocol().digest());
    }
}
