//! Utterance annotation: control trailers and fallback text classification.

use std::sync::LazyLock;

use regex::Regex;
use rust_decimal::Decimal;

use super::NegotiationState;
use crate::agents::{AgentUtterance, ControlTrailer};
use crate::money::Money;

static TRAILER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^<<\s*state\s*=\s*([a-z_\-]+)\s*(?:price\s*=\s*\\?\$?\s*([0-9][0-9,]*(?:\.[0-9]{1,2})?))?\s*>>$",
    )
    .expect("trailer regex")
});

static ANY_TRAILER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*<<.*>>\s*$").expect("trailer line regex"));

/// Splits a raw model reply into display text and an optional control
/// trailer. A trailer-shaped final line is always stripped; it only becomes a
/// control when it is well formed.
pub fn split_trailer(raw: &str) -> AgentUtterance {
    let trimmed = raw.trim_end();
    let (body, last) = match trimmed.rfind('\n') {
        Some(pos) => (&trimmed[..pos], trimmed[pos + 1..].trim()),
        None => ("", trimmed.trim()),
    };
    if !ANY_TRAILER.is_match(last) {
        return AgentUtterance::text(trimmed.trim());
    }
    let control = parse_trailer(last);
    let text = body.trim().to_string();
    AgentUtterance { text, control }
}

pub fn parse_trailer(line: &str) -> Option<ControlTrailer> {
    let caps = TRAILER.captures(line.trim())?;
    let state = NegotiationState::parse(&caps[1])?;
    let price = match caps.get(2) {
        Some(m) => Some(m.as_str().replace(',', "").parse::<Money>().ok()?),
        None => None,
    };
    if state == NegotiationState::Offer && price.is_none() {
        return None;
    }
    Some(ControlTrailer { state, price })
}

pub fn format_trailer(trailer: &ControlTrailer) -> String {
    match trailer.price {
        Some(p) => format!("<<state={} price={}>>", trailer.state.as_str(), p),
        None => format!("<<state={}>>", trailer.state.as_str()),
    }
}

/// A currency amount found in free text, with its byte span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Amount {
    pub value: Money,
    pub start: usize,
    pub end: usize,
}

const NUMBER: &str = r"(\d{1,3}(?:,\d{3})+|\d+)(?:\.(\d{1,2}))?";

static DOLLAR_AMOUNT: LazyLock<Regex> = LazyLock::new(|| {
    let single = format!(r"\\?\$\s?{NUMBER}");
    let range = format!(
        r"{single}\s*(?:to|-|–|—|and)\s*(?:\\?\$\s?)?{NUMBER}(?:\s*(?:dollars|bucks|usd)\b)?",
    );
    Regex::new(&format!(r"(?i){range}|{single}|\b{NUMBER}\s*(?:dollars|bucks|usd)\b")).expect("amount regex")
});

fn number_from(int: &str, frac: Option<&str>) -> Option<Money> {
    let digits = int.replace(',', "");
    let text = match frac {
        Some(f) => format!("{digits}.{f}"),
        None => digits,
    };
    text.parse().ok()
}

/// Extracts currency amounts: `$2,550`, `\$1530`, `2550 dollars`, and ranges
/// such as `$1800 to $2000`, which count as their midpoint.
pub fn extract_amounts(text: &str) -> Vec<Amount> {
    let mut out = Vec::new();
    for caps in DOLLAR_AMOUNT.captures_iter(text) {
        let whole = caps.get(0).expect("match");
        let value = if let (Some(a), Some(b)) = (caps.get(1), caps.get(3)) {
            let lo = number_from(a.as_str(), caps.get(2).map(|m| m.as_str()));
            let hi = number_from(b.as_str(), caps.get(4).map(|m| m.as_str()));
            match (lo, hi) {
                (Some(lo), Some(hi)) => Some(Money::new((lo.decimal() + hi.decimal()) / Decimal::TWO)),
                _ => None,
            }
        } else if let Some(a) = caps.get(5) {
            number_from(a.as_str(), caps.get(6).map(|m| m.as_str()))
        } else if let Some(a) = caps.get(7) {
            number_from(a.as_str(), caps.get(8).map(|m| m.as_str()))
        } else {
            None
        };
        if let Some(value) = value {
            out.push(Amount {
                value,
                start: whole.start(),
                end: whole.end(),
            });
        }
    }
    out
}

static ACCEPT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:let['’]?s (?:go for it|go ahead|do it|move forward|finalize|proceed|close the deal|make it official|shake on it)|(?:it['’]?s|we have|you['’]?ve got) a deal|deal!|^deal\b|i (?:happily |gladly )?accept|i['’]?ll take it|i will take it|agreed[.!]|we have an agreement|i agree to)",
    )
    .expect("accept regex")
});

static BREAKDOWN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:walk away|walking away|no deal|not interested anymore|no longer interested|i['’]?ll pass|i will pass|end (?:the|this) negotiation|can['’]?t (?:reach|make) a deal|look elsewhere|i['’]?m out\b|goodbye)",
    )
    .expect("breakdown regex")
});

static PONDER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(?:let me think|i need to think|think about it|thinking|not sure|consider(?:ing)?|hmm+|let me check|i['’]?ll get back|reflect on)",
    )
    .expect("ponder regex")
});

static OFFER_CUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?:how about|what about|closer to|around|settle|meet(?:ing)?|middle|offer|for|is|at|aim|reduce it to|down to|up to|to|say|would|budget|of|price|pay|go with|counter)\W*(?:just\s+|say\s+|a tad\s+|to\s+|,\s*)*$",
    )
    .expect("offer cue regex")
});

static REFERENCE_BEFORE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:while|although|though|since|from|than|beyond|above)\b[^.?!;]*$")
        .expect("reference regex")
});

static REFERENCE_AFTER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)^\s*(?:is|feels|seems|still|sounds)\s+(?:still\s+|quite\s+|really\s+)?(?:a bit|quite|a little|significantly|stretching|steep|above|beyond|too|more|lower|higher|challenging|low|high|a significant|a step|feels|a touch)",
    )
    .expect("reference after regex")
});

/// Picks the amount most likely to be the speaker's own proposal.
fn offered_amount(text: &str, amounts: &[Amount], previous: Option<Money>) -> Option<(Money, i32)> {
    let mut best: Option<(Money, i32)> = None;
    for a in amounts {
        let before_start = text[..a.start]
            .char_indices()
            .rev()
            .nth(59)
            .map(|(i, _)| i)
            .unwrap_or(0);
        let before = &text[before_start..a.start];
        let clause = before.rsplit(['.', '?', '!']).next().unwrap_or(before);
        let after = &text[a.end..];
        let mut score = 0;
        if OFFER_CUE.is_match(before) {
            score += 2;
        }
        if REFERENCE_BEFORE.is_match(clause) {
            score -= 2;
        }
        if REFERENCE_AFTER.is_match(after) {
            score -= 2;
        }
        if Some(a.value) == previous {
            score -= 1;
        }
        // later mentions win ties
        if best.is_none_or(|(_, s)| score >= s) {
            best = Some((a.value, score));
        }
    }
    best
}

/// Annotates one utterance. A well-formed control trailer wins verbatim;
/// otherwise text cues are checked in precedence order accept, breakdown,
/// offer, pondering, chit-chat.
pub fn classify_utterance(
    utterance: &AgentUtterance,
    previous_price_on_table: Option<Money>,
) -> (NegotiationState, Option<Money>) {
    if let Some(control) = &utterance.control {
        return (control.state, control.price);
    }
    classify_text(&utterance.text, previous_price_on_table)
}

pub fn classify_text(text: &str, previous_price_on_table: Option<Money>) -> (NegotiationState, Option<Money>) {
    let amounts = extract_amounts(text);
    let proposal = offered_amount(text, &amounts, previous_price_on_table);
    if ACCEPT.is_match(text) {
        let price = proposal.map(|(m, _)| m).or(previous_price_on_table);
        return (NegotiationState::Accept, price);
    }
    if BREAKDOWN.is_match(text) {
        return (NegotiationState::Breakdown, None);
    }
    if let Some((price, score)) = proposal {
        if score >= 0 {
            return (NegotiationState::Offer, Some(price));
        }
        return (NegotiationState::Pondering, None);
    }
    if PONDER.is_match(text) {
        return (NegotiationState::Pondering, None);
    }
    (NegotiationState::ChitChat, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn amounts() {
        let got: Vec<Money> = extract_amounts("It's $2,550 or \\$1530 or 2550 dollars, maybe $19.99.")
            .into_iter()
            .map(|a| a.value)
            .collect();
        assert_eq!(got, vec![m("2550"), m("1530"), m("2550"), m("19.99")]);
        let range = extract_amounts("a price around $1800 to $2000?");
        assert_eq!(range.len(), 1);
        assert_eq!(range[0].value, m("1900"));
        assert!(extract_amounts("no money here, 42 apples").is_empty());
    }

    #[test]
    fn trailer_wins() {
        let u = split_trailer("Fine, whatever you say.\n<<state=accept price=2450>>");
        assert_eq!(u.text, "Fine, whatever you say.");
        assert_eq!(classify_utterance(&u, None), (NegotiationState::Accept, Some(m("2450"))));
        let u = split_trailer("Let me think.\n  <<state=pondering>>  ");
        assert_eq!(classify_utterance(&u, Some(m("10"))), (NegotiationState::Pondering, None));
        let u = split_trailer("<<state=chit-chat>>");
        assert_eq!(u.text, "");
        assert_eq!(u.control.unwrap().state, NegotiationState::ChitChat);
    }

    #[test]
    fn malformed_trailer_falls_back_but_is_stripped() {
        let u = split_trailer("How about $2,100?\n<<state=haggle price=2100>>");
        assert!(u.control.is_none());
        assert_eq!(u.text, "How about $2,100?");
        assert_eq!(classify_utterance(&u, None), (NegotiationState::Offer, Some(m("2100"))));
        assert!(parse_trailer("<<state=offer>>").is_none());
        let t = ControlTrailer { state: NegotiationState::Offer, price: Some(m("2,450".replace(',', "").as_str())) };
        assert_eq!(parse_trailer(&format_trailer(&t)), Some(t));
    }

    #[test]
    fn fallback_examples() {
        assert_eq!(classify_text("Hi, how can I help you?", None), (NegotiationState::ChitChat, None));
        assert_eq!(
            classify_text("The price for this kind of unique experience is \\$2550.", None),
            (NegotiationState::Offer, Some(m("2550")))
        );
        assert_eq!(
            classify_text("I'm sorry, I will walk away from this.", Some(m("20"))),
            (NegotiationState::Breakdown, None)
        );
        assert_eq!(
            classify_text("Hmm, let me think about that for a moment.", Some(m("20"))),
            (NegotiationState::Pondering, None)
        );
        assert_eq!(
            classify_text("Deal! See you tomorrow.", Some(m("2150"))),
            (NegotiationState::Accept, Some(m("2150")))
        );
    }
}
