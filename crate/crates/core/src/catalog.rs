//! Negotiation scenarios and session planning.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::agents::Condition;
use crate::money::Money;
use crate::persona::{sample_profile, PersonalityProfile};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: record {index} (line {line}): {message}")]
    Validation {
        path: String,
        index: usize,
        line: usize,
        message: String,
    },
    #[error("reading catalog {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub description: String,
    pub seller_target: Money,
    pub buyer_target: Money,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.title.trim().is_empty() {
            return Err("title is empty".into());
        }
        if self.description.trim().is_empty() {
            return Err("description is empty".into());
        }
        if !self.buyer_target.is_positive() {
            return Err(format!("buyer_target {} must be positive", self.buyer_target));
        }
        if self.buyer_target >= self.seller_target {
            return Err(format!(
                "buyer_target {} must be below seller_target {}",
                self.buyer_target, self.seller_target
            ));
        }
        for (name, m) in [("seller_target", self.seller_target), ("buyer_target", self.buyer_target)] {
            if m.fraction_digits() > 2 {
                return Err(format!("{name} {m} has more than two fraction digits"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Catalog {
    pub scenarios: Vec<Scenario>,
}

#[derive(Deserialize)]
struct RawRecord<'a> {
    id: String,
    title: String,
    description: String,
    #[serde(borrow)]
    seller_target: &'a RawValue,
    #[serde(borrow)]
    buyer_target: &'a RawValue,
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Parses a price written either as a JSON number or a JSON string, without
/// going through `f64`.
fn raw_money(raw: &RawValue) -> Result<Money, String> {
    let text = raw.get().trim();
    let inner = match text.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
        Some(s) => s,
        None => text,
    };
    inner
        .parse::<Money>()
        .map_err(|_| format!("price {text} is not a plain decimal number"))
}

impl Catalog {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, String> {
        let mut ids = HashSet::new();
        for (i, s) in scenarios.iter().enumerate() {
            s.validate().map_err(|m| format!("record {i}: {m}"))?;
            if !ids.insert(s.id.as_str()) {
                return Err(format!("record {i}: duplicate id {:?}", s.id));
            }
        }
        Ok(Catalog { scenarios })
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Catalog::parse(&text, &path.display().to_string())
    }

    /// Parses the JSON array form. Errors carry the 1-based line of the
    /// offending record.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CatalogError> {
        let records: Vec<&RawValue> =
            serde_json::from_str(text).map_err(|e| CatalogError::Parse {
                path: origin.to_string(),
                line: e.line(),
                message: e.to_string(),
            })?;
        let base = text.as_ptr() as usize;
        let mut scenarios = Vec::with_capacity(records.len());
        let mut ids = HashSet::new();
        for (index, raw) in records.iter().enumerate() {
            let line = line_of(text, raw.get().as_ptr() as usize - base);
            let validation = |message: String| CatalogError::Validation {
                path: origin.to_string(),
                index,
                line,
                message,
            };
            let rec: RawRecord = serde_json::from_str(raw.get()).map_err(|e| CatalogError::Parse {
                path: origin.to_string(),
                line: line + e.line() - 1,
                message: e.to_string(),
            })?;
            let scenario = Scenario {
                seller_target: raw_money(rec.seller_target).map_err(validation)?,
                buyer_target: raw_money(rec.buyer_target).map_err(validation)?,
                id: rec.id,
                title: rec.title,
                description: rec.description,
            };
            scenario.validate().map_err(validation)?;
            if !ids.insert(scenario.id.clone()) {
                return Err(validation(format!("duplicate id {:?}", scenario.id)));
            }
            scenarios.push(scenario);
        }
        Ok(Catalog { scenarios })
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Writes the catalog in the same JSON array form [`Catalog::parse`] reads.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.scenarios).expect("catalog serializes")
    }
}

/// Key of a paired cell: all conditions of one cell share personas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub scenario_id: String,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub scenario_id: String,
    pub iteration: u32,
    pub condition: Condition,
    pub seller_profile: PersonalityProfile,
    pub buyer_profile: PersonalityProfile,
}

impl SessionPlan {
    pub fn cell(&self) -> CellKey {
        CellKey {
            scenario_id: self.scenario_id.clone(),
            iteration: self.iteration,
        }
    }
}

pub fn session_id(scenario_id: &str, iteration: u32, condition: Condition) -> String {
    format!("{scenario_id}.i{iteration}.{}", condition.as_str())
}

/// Plans `|catalog| * per_product * |conditions|` sessions. Profiles are drawn
/// once per (scenario, iteration) cell, seller first, and shared by every
/// condition of that cell.
pub fn plan_sessions<R: Rng + ?Sized>(
    catalog: &Catalog,
    per_product: u32,
    conditions: &[Condition],
    rng: &mut R,
) -> Vec<SessionPlan> {
    let mut plans = Vec::with_capacity(catalog.len() * per_product as usize * conditions.len());
    for scenario in &catalog.scenarios {
        for iteration in 1..=per_product {
            let seller_profile = sample_profile(rng);
            let buyer_profile = sample_profile(rng);
            for &condition in conditions {
                plans.push(SessionPlan {
                    session_id: session_id(&scenario.id, iteration, condition),
                    scenario_id: scenario.id.clone(),
                    iteration,
                    condition,
                    seller_profile,
                    buyer_profile,
                });
            }
        }
    }
    plans
}
