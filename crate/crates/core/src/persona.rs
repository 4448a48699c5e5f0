//! Big Five personality profiles and adjective-based persona text.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.json");

#[derive(Debug, Error)]
pub enum PersonaError {
    #[error("lexicon list {key} has {available} adjectives, {needed} needed")]
    LexiconTooSmall {
        key: String,
        available: usize,
        needed: usize,
    },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("reading lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Dimension {
    Ope,
    Con,
    Ext,
    Agr,
    Neu,
}

impl Dimension {
    /// Canonical order: OPE, CON, EXT, AGR, NEU.
    pub const ALL: [Dimension; 5] = [
        Dimension::Ope,
        Dimension::Con,
        Dimension::Ext,
        Dimension::Agr,
        Dimension::Neu,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Dimension::Ope => "OPE",
            Dimension::Con => "CON",
            Dimension::Ext => "EXT",
            Dimension::Agr => "AGR",
            Dimension::Neu => "NEU",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Ope => "Openness",
            Dimension::Con => "Conscientiousness",
            Dimension::Ext => "Extraversion",
            Dimension::Agr => "Agreeableness",
            Dimension::Neu => "Neuroticism",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown dimension {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Polarity::Negative => '-',
            Polarity::Positive => '+',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intensity {
    Low,
    Moderate,
    High,
}

impl Intensity {
    pub fn rank(self) -> i8 {
        match self {
            Intensity::Low => 1,
            Intensity::Moderate => 2,
            Intensity::High => 3,
        }
    }

    /// Prefix applied to each adjective of a dimension with this intensity.
    pub fn modifier(self) -> &'static str {
        match self {
            Intensity::Low => "a bit ",
            Intensity::Moderate => "",
            Intensity::High => "very ",
        }
    }
}

/// One of the six (polarity, intensity) values a dimension can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraitSetting {
    pub polarity: Polarity,
    pub intensity: Intensity,
}

impl TraitSetting {
    pub const ALL: [TraitSetting; 6] = [
        TraitSetting::new(Polarity::Negative, Intensity::High),
        TraitSetting::new(Polarity::Negative, Intensity::Moderate),
        TraitSetting::new(Polarity::Negative, Intensity::Low),
        TraitSetting::new(Polarity::Positive, Intensity::Low),
        TraitSetting::new(Polarity::Positive, Intensity::Moderate),
        TraitSetting::new(Polarity::Positive, Intensity::High),
    ];

    pub const fn new(polarity: Polarity, intensity: Intensity) -> Self {
        TraitSetting {
            polarity,
            intensity,
        }
    }

    /// Signed intensity rank in {-3, -2, -1, 1, 2, 3}.
    pub fn score(self) -> i8 {
        self.polarity.sign() * self.intensity.rank()
    }

    pub fn from_score(score: i8) -> Option<Self> {
        TraitSetting::ALL.into_iter().find(|s| s.score() == score)
    }
}

/// Compact form used in captions and files: `a bit +`, `-`, `very +`.
impl fmt::Display for TraitSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.intensity.modifier(), self.polarity.symbol())
    }
}

impl FromStr for TraitSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (intensity, rest) = if let Some(rest) = s.strip_prefix("a bit ") {
            (Intensity::Low, rest)
        } else if let Some(rest) = s.strip_prefix("very ") {
            (Intensity::High, rest)
        } else {
            (Intensity::Moderate, s)
        };
        let polarity = match rest.trim() {
            "+" => Polarity::Positive,
            "-" | "−" => Polarity::Negative,
            other => return Err(format!("bad polarity {other:?} in trait setting {s:?}")),
        };
        Ok(TraitSetting::new(polarity, intensity))
    }
}

impl Serialize for TraitSetting {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TraitSetting {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A complete Big Five profile: one setting per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PersonalityProfile {
    settings: [TraitSetting; 5],
}

impl PersonalityProfile {
    /// Settings given in canonical dimension order.
    pub fn new(settings: [TraitSetting; 5]) -> Self {
        PersonalityProfile { settings }
    }

    pub fn setting(&self, dim: Dimension) -> TraitSetting {
        self.settings[dim.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dimension, TraitSetting)> + '_ {
        Dimension::ALL.into_iter().zip(self.settings)
    }
}

/// `(a bit +, -, very +, +, a bit +)`, canonical order.
impl fmt::Display for PersonalityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.settings.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

impl Serialize for PersonalityProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<Dimension, TraitSetting> = self.iter().collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PersonalityProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<Dimension, TraitSetting>::deserialize(deserializer)?;
        let mut settings = [TraitSetting::ALL[0]; 5];
        for dim in Dimension::ALL {
            settings[dim.index()] = *map
                .get(&dim)
                .ok_or_else(|| serde::de::Error::custom(format!("profile missing {dim}")))?;
        }
        Ok(PersonalityProfile { settings })
    }
}

/// Draws each dimension independently and uniformly from the six settings.
pub fn sample_profile<R: Rng + ?Sized>(rng: &mut R) -> PersonalityProfile {
    let mut settings = [TraitSetting::ALL[0]; 5];
    for slot in &mut settings {
        *slot = TraitSetting::ALL[rng.random_range(0..TraitSetting::ALL.len())];
    }
    PersonalityProfile { settings }
}

/// Signed score of one dimension, see [`TraitSetting::score`].
pub fn trait_score(profile: &PersonalityProfile, dim: Dimension) -> i8 {
    profile.setting(dim).score()
}

/// Adjective lists keyed by `(dimension, polarity)`.
///
/// The on-disk form is a JSON object with the ten keys `"OPE.+"`, `"OPE.-"`,
/// ..., `"NEU.-"`, each an array of strings. Multi-word entries such as
/// `"adventurous and daring"` are single adjectives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjectiveLexicon {
    entries: BTreeMap<(Dimension, Polarity), Vec<String>>,
}

impl AdjectiveLexicon {
    pub fn builtin() -> Self {
        AdjectiveLexicon::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PersonaError> {
        let text = std::fs::read_to_string(path).map_err(|source| PersonaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        AdjectiveLexicon::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, PersonaError> {
        let raw: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| PersonaError::InvalidLexicon(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (key, words) in raw {
            let parsed = parse_key(&key)
                .ok_or_else(|| PersonaError::InvalidLexicon(format!("unknown key {key:?}")))?;
            entries.insert(parsed, words);
        }
        AdjectiveLexicon::new(entries)
    }

    pub fn new(entries: BTreeMap<(Dimension, Polarity), Vec<String>>) -> Result<Self, PersonaError> {
        let mut seen = HashSet::new();
        for dim in Dimension::ALL {
            for polarity in [Polarity::Positive, Polarity::Negative] {
                let key = lexicon_key(dim, polarity);
                let words = entries
                    .get(&(dim, polarity))
                    .ok_or_else(|| PersonaError::InvalidLexicon(format!("missing key {key}")))?;
                if words.is_empty() {
                    return Err(PersonaError::InvalidLexicon(format!("{key} is empty")));
                }
                for word in words {
                    if word.trim().is_empty() {
                        return Err(PersonaError::InvalidLexicon(format!("{key} has a blank entry")));
                    }
                    // Also rejects cross-list repeats so a rendered persona never repeats a word.
                    if !seen.insert(word.as_str()) {
                        return Err(PersonaError::InvalidLexicon(format!(
                            "adjective {word:?} appears more than once"
                        )));
                    }
                }
            }
        }
        Ok(AdjectiveLexicon { entries })
    }

    pub fn adjectives(&self, dim: Dimension, polarity: Polarity) -> &[String] {
        &self.entries[&(dim, polarity)]
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, &Vec<String>> = self
            .entries
            .iter()
            .map(|((d, p), words)| (lexicon_key(*d, *p), words))
            .collect();
        serde_json::to_string_pretty(&map).expect("lexicon serializes")
    }
}

fn lexicon_key(dim: Dimension, polarity: Polarity) -> String {
    format!("{}.{}", dim.code(), polarity.symbol())
}

fn parse_key(key: &str) -> Option<(Dimension, Polarity)> {
    let (dim, pol) = key.split_once('.')?;
    let dim = dim.parse().ok()?;
    let polarity = match pol {
        "+" => Polarity::Positive,
        "-" => Polarity::Negative,
        _ => return None,
    };
    Some((dim, polarity))
}

/// One modified adjective, remembering which dimension produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaPhrase {
    pub dimension: Dimension,
    pub adjective: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaText {
    pub phrases: Vec<PersonaPhrase>,
    pub rendered: String,
}

impl PersonaText {
    pub fn as_str(&self) -> &str {
        &self.rendered
    }
}

impl fmt::Display for PersonaText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

/// Samples `n` adjectives per dimension from the list matching the profile's
/// polarity, prefixes each with the intensity modifier and shuffles all
/// `5 * n` phrases into one comma-joined string.
pub fn render_persona_text<R: Rng + ?Sized>(
    profile: &PersonalityProfile,
    lexicon: &AdjectiveLexicon,
    n: usize,
    rng: &mut R,
) -> Result<PersonaText, PersonaError> {
    let mut phrases = Vec::with_capacity(5 * n);
    for (dim, setting) in profile.iter() {
        let words = lexicon.adjectives(dim, setting.polarity);
        if words.len() < n {
            return Err(PersonaError::LexiconTooSmall {
                key: lexicon_key(dim, setting.polarity),
                available: words.len(),
                needed: n,
            });
        }
        for word in words.choose_multiple(rng, n) {
            phrases.push(PersonaPhrase {
                dimension: dim,
                adjective: word.clone(),
                text: format!("{}{}", setting.intensity.modifier(), word),
            });
        }
    }
    phrases.shuffle(rng);
    let rendered = phrases
        .iter()
        .map(|p| p.text.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    Ok(PersonaText { phrases, rendered })
}
