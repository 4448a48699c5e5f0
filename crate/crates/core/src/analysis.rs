//! Cross-condition analysis over stored runs: pairing with exclusions,
//! utility and satisfaction tables, paired tests, trait/susceptibility
//! correlations and the questionnaire stability check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, Condition, Role};
use crate::catalog::CellKey;
use crate::dialogue::{Outcome, Transcript};
use crate::metrics::susceptibility;
use crate::persona::Dimension;
use crate::stats::{self, CorrelationResult, PairedSample, StatsError, TestResult};
use crate::survey::{
    self, aggregate_response, DimensionScores, Questionnaire, SatisfactionDimension, SurveyError, SurveyResponse,
    ITEM_COUNT,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no cells are accepted under both {0} and {1}")]
    NoPairs(Condition, Condition),
    #[error("writing report {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utilities {
    pub seller: f64,
    pub buyer: f64,
}

impl Utilities {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Seller => self.seller,
            Role::Buyer => self.buyer,
        }
    }
}

/// Everything the analysis needs about one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub session_id: String,
    pub scenario_id: String,
    pub iteration: u32,
    pub condition: Condition,
    /// `None` when the session failed before reaching an outcome.
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Present iff the outcome is accepted.
    pub utilities: Option<Utilities>,
    #[serde(default)]
    pub surveys: BTreeMap<Role, SurveyResponse>,
    pub buyer_traits: BTreeMap<Dimension, i8>,
    pub seller_traits: BTreeMap<Dimension, i8>,
}

impl RunRecord {
    pub fn cell(&self) -> CellKey {
        CellKey {
            scenario_id: self.scenario_id.clone(),
            iteration: self.iteration,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self.outcome, Some(Outcome::Accepted { .. }))
    }

    pub fn satisfaction(&self, role: Role) -> Option<DimensionScores> {
        self.surveys.get(&role).map(aggregate_response)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairMetric {
    Utility(Role),
    Satisfaction(Role, SatisfactionDimension),
}

impl PairMetric {
    pub fn value(self, record: &RunRecord) -> Option<f64> {
        if !record.is_accepted() {
            return None;
        }
        match self {
            PairMetric::Utility(role) => record.utilities.map(|u| u.get(role)),
            PairMetric::Satisfaction(role, dim) => record.satisfaction(role).map(|d| d.get(dim)),
        }
    }

    pub fn label(self) -> String {
        match self {
            PairMetric::Utility(role) => format!("{role} utility"),
            PairMetric::Satisfaction(role, dim) => format!("{role} {dim}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub sample: PairedSample,
    pub cells: Vec<CellKey>,
    pub excluded: Vec<CellKey>,
}

fn by_cell(records: &[RunRecord], condition: Condition) -> BTreeMap<CellKey, &RunRecord> {
    records
        .iter()
        .filter(|r| r.condition == condition)
        .map(|r| (r.cell(), r))
        .collect()
}

/// Matches cells present under both conditions; a cell is kept only when the
/// metric exists (accepted, and surveyed where needed) under both. Pairs come
/// out in cell-key order.
pub fn pair_runs(
    records: &[RunRecord],
    a: Condition,
    b: Condition,
    metric: PairMetric,
) -> Result<Pairing, AnalysisError> {
    let ra = by_cell(records, a);
    let rb = by_cell(records, b);
    let all: BTreeSet<&CellKey> = ra.keys().chain(rb.keys()).collect();
    let mut pairs = Vec::new();
    let mut cells = Vec::new();
    let mut excluded = Vec::new();
    for cell in all {
        let va = ra.get(cell).and_then(|r| metric.value(r));
        let vb = rb.get(cell).and_then(|r| metric.value(r));
        match (va, vb) {
            (Some(x), Some(y)) => {
                pairs.push((x, y));
                cells.push(cell.clone());
            }
            _ => excluded.push(cell.clone()),
        }
    }
    if pairs.is_empty() {
        return Err(AnalysisError::NoPairs(a, b));
    }
    Ok(Pairing {
        sample: PairedSample::new(pairs, a.as_str(), b.as_str()),
        cells,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Absent when fewer than two values exist.
    pub sd: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let (mean, sd) = stats::mean_sd(values).ok()?;
        Some(Summary {
            n: values.len(),
            mean,
            sd: sd.ok(),
        })
    }

    fn fmt_pm(&self) -> String {
        match self.sd {
            Some(sd) => format!("{:.2} ± {:.2}", self.mean, sd),
            None => format!("{:.2} ± n/a", self.mean),
        }
    }
}

/// Per-condition summaries over accepted runs. Cells with no data are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConditionTable {
    pub sessions: BTreeMap<Condition, usize>,
    pub accepted: BTreeMap<Condition, usize>,
    pub utility: BTreeMap<(Role, Condition), Summary>,
    pub satisfaction: BTreeMap<(Role, Condition, SatisfactionDimension), Summary>,
    /// Raw per-item means, one row per (role, condition).
    pub item_means: BTreeMap<(Role, Condition), [f64; ITEM_COUNT]>,
}

impl ConditionTable {
    pub fn utility(&self, role: Role, condition: Condition) -> Option<&Summary> {
        self.utility.get(&(role, condition))
    }

    pub fn satisfaction(&self, role: Role, condition: Condition, dim: SatisfactionDimension) -> Option<&Summary> {
        self.satisfaction.get(&(role, condition, dim))
    }
}

const ROLES: [Role; 2] = [Role::Seller, Role::Buyer];

pub fn condition_table(records: &[RunRecord]) -> ConditionTable {
    let mut t = ConditionTable::default();
    for cond in Condition::ALL {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.condition == cond).collect();
        if runs.is_empty() {
            continue;
        }
        let accepted: Vec<&RunRecord> = runs.iter().copied().filter(|r| r.is_accepted()).collect();
        t.sessions.insert(cond, runs.len());
        t.accepted.insert(cond, accepted.len());
        for role in ROLES {
            let utils: Vec<f64> = accepted.iter().filter_map(|r| r.utilities.map(|u| u.get(role))).collect();
            if let Some(s) = Summary::of(&utils) {
                t.utility.insert((role, cond), s);
            }
            let responses: Vec<SurveyResponse> =
                accepted.iter().filter_map(|r| r.surveys.get(&role).cloned()).collect();
            if responses.is_empty() {
                continue;
            }
            let dims: Vec<DimensionScores> = responses.iter().map(aggregate_response).collect();
            for dim in SatisfactionDimension::ALL {
                let vals: Vec<f64> = dims.iter().map(|d| d.get(dim)).collect();
                if let Some(s) = Summary::of(&vals) {
                    t.satisfaction.insert((role, cond, dim), s);
                }
            }
            if let Ok(means) = survey::item_means(&responses) {
                t.item_means.insert((role, cond), means);
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityCell {
    pub cell: CellKey,
    pub buyer_traits: BTreeMap<Dimension, i8>,
    pub delta_u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityReport {
    pub cells: Vec<SusceptibilityCell>,
    pub excluded: usize,
    pub by_dimension: BTreeMap<Dimension, Result<CorrelationResult, StatsError>>,
}

/// Spearman correlation between each buyer trait score and the buyer's
/// utility drop from baseline to seller_anchor, over paired accepted cells.
pub fn susceptibility_correlations(records: &[RunRecord]) -> Result<SusceptibilityReport, AnalysisError> {
    let pairing = pair_runs(
        records,
        Condition::Baseline,
        Condition::SellerAnchor,
        PairMetric::Utility(Role::Buyer),
    )?;
    let base = by_cell(records, Condition::Baseline);
    let cells: Vec<SusceptibilityCell> = pairing
        .cells
        .iter()
        .zip(&pairing.sample.pairs)
        .map(|(cell, &(ub, ua))| SusceptibilityCell {
            cell: cell.clone(),
            buyer_traits: base[cell].buyer_traits.clone(),
            delta_u: susceptibility(ub, ua),
        })
        .collect();
    let deltas: Vec<f64> = cells.iter().map(|c| c.delta_u).collect();
    let by_dimension = Dimension::ALL
        .into_iter()
        .map(|dim| {
            let scores: Vec<f64> = cells
                .iter()
                .map(|c| f64::from(c.buyer_traits.get(&dim).copied().unwrap_or(0)))
                .collect();
            (dim, stats::spearman(&scores, &deltas))
        })
        .collect();
    Ok(SusceptibilityReport {
        cells,
        excluded: pairing.excluded.len(),
        by_dimension,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStability {
    pub item: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResurveyReport {
    pub responses: Vec<SurveyResponse>,
    pub items: Vec<ItemStability>,
    pub dimensions: BTreeMap<SatisfactionDimension, Summary>,
}

/// Summarizes repeated answers to the same questionnaire.
pub fn stability(responses: Vec<SurveyResponse>) -> ResurveyReport {
    let items = (1..=ITEM_COUNT)
        .map(|item| {
            let vals: Vec<f64> = responses.iter().map(|r| f64::from(r.item(item))).collect();
            let s = Summary::of(&vals);
            ItemStability {
                item,
                mean: s.map(|s| s.mean).unwrap_or(f64::NAN),
                sd: s.and_then(|s| s.sd),
            }
        })
        .collect();
    let dims: Vec<DimensionScores> = responses.iter().map(aggregate_response).collect();
    let dimensions = SatisfactionDimension::ALL
        .into_iter()
        .filter_map(|dim| {
            let vals: Vec<f64> = dims.iter().map(|d| d.get(dim)).collect();
            Summary::of(&vals).map(|s| (dim, s))
        })
        .collect();
    ResurveyReport {
        responses,
        items,
        dimensions,
    }
}

/// Asks `agent` to evaluate a finished transcript as `role`, `times` times,
/// without any dialogue history of its own.
pub fn resurvey(
    transcript: &Transcript,
    agent: &mut dyn Agent,
    role: Role,
    questionnaire: &Questionnaire,
    times: usize,
) -> Result<ResurveyReport, SurveyError> {
    let request = survey::resurvey_request(transcript, role, questionnaire);
    let mut responses = Vec::with_capacity(times);
    for _ in 0..times {
        let r = survey::ask_until_valid(&transcript.session_id, role, |_| agent.answer(&[], &request))?;
        responses.push(r);
    }
    Ok(stability(responses))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: PairMetric,
    pub a: Condition,
    pub b: Condition,
    pub n: usize,
    pub excluded: usize,
    pub result: Result<TestResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub table: ConditionTable,
    pub comparisons: Vec<ComparisonRow>,
    pub susceptibility: Option<SusceptibilityReport>,
}

const COMPARISONS: [(Condition, Condition); 2] = [
    (Condition::Baseline, Condition::SellerAnchor),
    (Condition::SellerAnchor, Condition::SellerAnchorBuyerInformed),
];

pub fn analyze(records: &[RunRecord]) -> AnalysisReport {
    let table = condition_table(records);
    let mut metrics = Vec::new();
    for role in ROLES {
        metrics.push(PairMetric::Utility(role));
    }
    for role in ROLES {
        for dim in SatisfactionDimension::ALL {
            metrics.push(PairMetric::Satisfaction(role, dim));
        }
    }
    let mut comparisons = Vec::new();
    for (a, b) in COMPARISONS {
        if !table.sessions.contains_key(&a) || !table.sessions.contains_key(&b) {
            continue;
        }
        for &metric in &metrics {
            match pair_runs(records, a, b, metric) {
                Ok(p) => comparisons.push(ComparisonRow {
                    metric,
                    a,
                    b,
                    n: p.sample.pairs.len(),
                    excluded: p.excluded.len(),
                    result: stats::paired_t_test(&p.sample).map_err(|e| e.to_string()),
                }),
                Err(_) if matches!(metric, PairMetric::Satisfaction(..)) => {}
                Err(e) => comparisons.push(ComparisonRow {
                    metric,
                    a,
                    b,
                    n: 0,
                    excluded: 0,
                    result: Err(e.to_string()),
                }),
            }
        }
    }
    let susceptibility = susceptibility_correlations(records).ok();
    AnalysisReport {
        table,
        comparisons,
        susceptibility,
    }
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

impl AnalysisReport {
    /// Human-readable report. Deterministic for a given set of records.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let t = &self.table;
        writeln!(out, "Sessions").unwrap();
        for (cond, n) in &t.sessions {
            writeln!(out, "  {:<30} {:>5} total {:>5} accepted", cond, n, t.accepted.get(cond).unwrap_or(&0)).unwrap();
        }
        writeln!(out, "\nUtility (accepted runs, mean ± sd)").unwrap();
        for role in ROLES {
            for cond in t.sessions.keys() {
                let cell = t
                    .utility(role, *cond)
                    .map(|s| format!("{} (n={})", s.fmt_pm(), s.n))
                    .unwrap_or_else(|| "absent".into());
                writeln!(out, "  {:<7} {:<30} {}", role, cond, cell).unwrap();
            }
        }
        if !t.satisfaction.is_empty() {
            writeln!(out, "\nSatisfaction (accepted, surveyed runs)").unwrap();
            for role in ROLES {
                for cond in t.sessions.keys() {
                    let cells: Vec<String> = SatisfactionDimension::ALL
                        .iter()
                        .map(|&d| {
                            t.satisfaction(role, *cond, d)
                                .map(|s| format!("{}={:.2}", d, s.mean))
                                .unwrap_or_else(|| format!("{d}=absent"))
                        })
                        .collect();
                    writeln!(out, "  {:<7} {:<30} {}", role, cond, cells.join(" ")).unwrap();
                }
            }
        }
        writeln!(out, "\nPaired t-tests (two-sided, alpha 0.05)").unwrap();
        for row in &self.comparisons {
            let res = match &row.result {
                Ok(r) => format!(
                    "t={:.4} p={:.6} df={} mean_diff={:.4}{}",
                    r.statistic,
                    r.p_value,
                    r.dof,
                    r.mean_diff,
                    if r.significant_at_05 { " *" } else { "" }
                ),
                Err(e) => format!("not computed: {e}"),
            };
            writeln!(
                out,
                "  {:<22} {} vs {} n={} excluded={} {}",
                row.metric.label(),
                row.a,
                row.b,
                row.n,
                row.excluded,
                res
            )
            .unwrap();
        }
        if let Some(s) = &self.susceptibility {
            writeln!(out, "\nBuyer susceptibility vs traits (Spearman, {} cells, {} excluded)", s.cells.len(), s.excluded)
                .unwrap();
            for (dim, r) in &s.by_dimension {
                match r {
                    Ok(c) => writeln!(out, "  {} rho={:.4} p={:.6}", dim.code(), c.rho, c.p_value).unwrap(),
                    Err(e) => writeln!(out, "  {} not computed: {e}", dim.code()).unwrap(),
                }
            }
        }
        out
    }

    /// Writes `utility.csv`, `satisfaction.csv`, `items.csv`, `tests.csv`,
    /// `susceptibility.csv` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), AnalysisError> {
        let io = |path: &Path, e: &dyn std::fmt::Display| AnalysisError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, &e))?;
        let csv_file = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<(), AnalysisError> {
            let path = dir.join(name);
            let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, &e))?;
            w.write_record(header).map_err(|e| io(&path, &e))?;
            for row in rows {
                w.write_record(&row).map_err(|e| io(&path, &e))?;
            }
            w.flush().map_err(|e| io(&path, &e))
        };
        let t = &self.table;
        csv_file(
            "utility.csv",
            &["role", "condition", "sessions", "n", "mean", "sd"],
            t.utility
                .iter()
                .map(|((role, cond), s)| {
                    vec![
                        role.to_string(),
                        cond.to_string(),
                        t.sessions[cond].to_string(),
                        s.n.to_string(),
                        f6(s.mean),
                        s.sd.map(f6).unwrap_or_default(),
                    ]
                })
                .collect(),
        )?;
        csv_file(
            "satisfaction.csv",
            &["role", "condition", "dimension", "n", "mean", "sd"],
            t.satisfaction
                .iter()
                .map(|((role, cond, dim), s)| {
                    vec![
                        role.to_string(),
                        cond.to_string(),
                        dim.to_string(),
                        s.n.to_string(),
                        f6(s.mean),
                        s.sd.map(f6).unwrap_or_default(),
                    ]
                })
                .collect(),
        )?;
        let mut item_header = vec!["role".to_string(), "condition".to_string()];
        item_header.extend((1..=ITEM_COUNT).map(|i| format!("item{i}")));
        let item_header: Vec<&str> = item_header.iter().map(String::as_str).collect();
        csv_file(
            "items.csv",
            &item_header,
            t.item_means
                .iter()
                .map(|((role, cond), means)| {
                    let mut row = vec![role.to_string(), cond.to_string()];
                    row.extend(means.iter().map(|&m| f6(m)));
                    row
                })
                .collect(),
        )?;
        csv_file(
            "tests.csv",
            &["metric", "a", "b", "n", "excluded", "t", "p", "df", "mean_diff", "significant", "error"],
            self.comparisons
                .iter()
                .map(|row| {
                    let mut v = vec![
                        row.metric.label(),
                        row.a.to_string(),
                        row.b.to_string(),
                        row.n.to_string(),
                        row.excluded.to_string(),
                    ];
                    match &row.result {
                        Ok(r) => v.extend([
                            f6(r.statistic),
                            f6(r.p_value),
                            r.dof.to_string(),
                            f6(r.mean_diff),
                            r.significant_at_05.to_string(),
                            String::new(),
                        ]),
                        Err(e) => v.extend([String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()]),
                    }
                    v
                })
                .collect(),
        )?;
        let sus_rows = self
            .susceptibility
            .as_ref()
            .map(|s| {
                s.by_dimension
                    .iter()
                    .map(|(dim, r)| match r {
                        Ok(c) => vec![dim.code().to_string(), c.n.to_string(), f6(c.rho), f6(c.p_value), String::new()],
                        Err(e) => vec![dim.code().to_string(), s.cells.len().to_string(), String::new(), String::new(), e.to_string()],
                    })
                    .collect()
            })
            .unwrap_or_default();
        csv_file("susceptibility.csv", &["dimension", "n", "rho", "p", "error"], sus_rows)?;
        let report = dir.join("report.txt");
        std::fs::write(&report, self.to_text()).map_err(|e| io(&report, &e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedAgent;
    use crate::metrics::{buyer_utility, derive_price_bounds, seller_utility};
    use crate::money::Money;

    fn rec(scenario: &str, iteration: u32, condition: Condition, price: Option<&str>) -> RunRecord {
        let (outcome, utilities) = match price {
            Some(p) => {
                let p: Money = p.parse().unwrap();
                let b = derive_price_bounds("2550".parse().unwrap(), "1530".parse().unwrap()).unwrap();
                (
                    Some(Outcome::Accepted { final_price: p }),
                    Some(Utilities {
                        seller: seller_utility(&b, p),
                        buyer: buyer_utility(&b, p),
                    }),
                )
            }
            None => (Some(Outcome::MaxTurns), None),
        };
        RunRecord {
            session_id: crate::catalog::session_id(scenario, iteration, condition),
            scenario_id: scenario.into(),
            iteration,
            condition,
            outcome,
            failure: None,
            utilities,
            surveys: BTreeMap::new(),
            buyer_traits: Dimension::ALL.iter().map(|&d| (d, 0)).collect(),
            seller_traits: Dimension::ALL.iter().map(|&d| (d, 0)).collect(),
        }
    }

    #[test]
    fn exclusion_rule() {
        let records = vec![
            rec("a", 0, Condition::Baseline, Some("2000")),
            rec("a", 0, Condition::SellerAnchor, None),
            rec("b", 0, Condition::Baseline, Some("2100")),
            rec("b", 0, Condition::SellerAnchor, Some("2200")),
        ];
        let p = pair_runs(&records, Condition::Baseline, Condition::SellerAnchor, PairMetric::Utility(Role::Seller))
            .unwrap();
        assert_eq!(p.sample.pairs.len(), 1);
        assert_eq!(p.excluded, vec![CellKey { scenario_id: "a".into(), iteration: 0 }]);
        assert!(matches!(
            pair_runs(&records[..2], Condition::Baseline, Condition::SellerAnchor, PairMetric::Utility(Role::Seller)),
            Err(AnalysisError::NoPairs(..))
        ));
    }

    #[test]
    fn ten_cells_two_exclusions() {
        let mut records = Vec::new();
        for i in 0..10u32 {
            let base = format!("{}", 2000 + i * 10);
            let anchor = format!("{}", 2100 + i * 10);
            records.push(rec("x", i, Condition::Baseline, if i == 3 { None } else { Some(&base) }));
            records.push(rec("x", i, Condition::SellerAnchor, if i == 7 { None } else { Some(&anchor) }));
        }
        let p = pair_runs(&records, Condition::Baseline, Condition::SellerAnchor, PairMetric::Utility(Role::Seller))
            .unwrap();
        let kept: Vec<u32> = p.cells.iter().map(|c| c.iteration).collect();
        assert_eq!(kept, vec![0, 1, 2, 4, 5, 6, 8, 9]);
        assert_eq!(p.excluded.len(), 2);
        let b = derive_price_bounds("2550".parse().unwrap(), "1530".parse().unwrap()).unwrap();
        for (&(x, y), it) in p.sample.pairs.iter().zip(&kept) {
            assert_eq!(x, seller_utility(&b, Money::from_units(2000 + 10 * i64::from(*it))));
            assert_eq!(y, seller_utility(&b, Money::from_units(2100 + 10 * i64::from(*it))));
        }
    }

    #[test]
    fn table_at_seller_target() {
        let records: Vec<RunRecord> = (0..4).map(|i| rec("a", i, Condition::Baseline, Some("2550"))).collect();
        let t = condition_table(&records);
        let s = t.utility(Role::Seller, Condition::Baseline).unwrap();
        assert_eq!((s.n, s.mean, s.sd), (4, 1.0, Some(0.0)));
        let b = t.utility(Role::Buyer, Condition::Baseline).unwrap();
        assert!((b.mean - (4.0 / 7.0 - 1.0)).abs() < 1e-12);
        assert_eq!(b.sd, Some(0.0));
        assert!(t.utility(Role::Seller, Condition::SellerAnchor).is_none());
        assert!(!t.sessions.contains_key(&Condition::SellerAnchor));
    }

    #[test]
    fn table_matches_brute_force() {
        let prices = ["1900", "2000", "2150.5", "2300", "2449.99"];
        let records: Vec<RunRecord> = prices
            .iter()
            .enumerate()
            .map(|(i, p)| rec("a", i as u32, Condition::SellerAnchor, Some(p)))
            .chain([rec("a", 9, Condition::SellerAnchor, None)])
            .collect();
        let t = condition_table(&records);
        let us: Vec<f64> = records.iter().filter_map(|r| r.utilities.map(|u| u.seller)).collect();
        let m = us.iter().sum::<f64>() / us.len() as f64;
        let sd = (us.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (us.len() - 1) as f64).sqrt();
        let s = t.utility(Role::Seller, Condition::SellerAnchor).unwrap();
        assert!((s.mean - m).abs() < 1e-12 && (s.sd.unwrap() - sd).abs() < 1e-12);
        assert_eq!(t.sessions[&Condition::SellerAnchor], 6);
        assert_eq!(t.accepted[&Condition::SellerAnchor], 5);
        for r in &records {
            if let Some(u) = r.utilities {
                assert!((u.seller + u.buyer - 4.0 / 7.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn susceptibility_tracks_extraversion() {
        let mut records = Vec::new();
        for (i, ext) in [-3i8, -2, -1, 1, 2, 3].iter().enumerate() {
            let mut b = rec("s", i as u32, Condition::Baseline, Some("2000"));
            let anchor_price = format!("{}", 2000 + 50 * (i + 1));
            let mut a = rec("s", i as u32, Condition::SellerAnchor, Some(&anchor_price));
            b.buyer_traits.insert(Dimension::Ext, *ext);
            a.buyer_traits.insert(Dimension::Ext, *ext);
            b.buyer_traits.insert(Dimension::Ope, (i % 2) as i8);
            records.push(b);
            records.push(a);
        }
        let s = susceptibility_correlations(&records).unwrap();
        assert_eq!(s.cells.len(), 6);
        assert!((s.by_dimension[&Dimension::Ext].as_ref().unwrap().rho - 1.0).abs() < 1e-12);
        assert!(matches!(s.by_dimension[&Dimension::Neu], Err(StatsError::ConstantInput)));

        // identical deltas everywhere
        let flat: Vec<RunRecord> = (0..5u32)
            .flat_map(|i| {
                let mut b = rec("f", i, Condition::Baseline, Some("2000"));
                b.buyer_traits.insert(Dimension::Agr, i as i8 - 2);
                [b, rec("f", i, Condition::SellerAnchor, Some("2100"))]
            })
            .collect();
        let s = susceptibility_correlations(&flat).unwrap();
        assert!(s.by_dimension.values().all(|r| matches!(r, Err(StatsError::ConstantInput))));
    }

    fn transcript() -> Transcript {
        use crate::persona::{PersonalityProfile, TraitSetting};
        Transcript {
            session_id: "t".into(),
            scenario_id: "t".into(),
            condition: Condition::Baseline,
            seller_persona: PersonalityProfile::new([TraitSetting::ALL[0]; 5]),
            buyer_persona: PersonalityProfile::new([TraitSetting::ALL[0]; 5]),
            turns: vec![],
            outcome: Outcome::Accepted { final_price: Money::from_units(10) },
        }
    }

    #[test]
    fn resurvey_deterministic_responder() {
        let answer = "5, 6, 2, 5, 1, 7, 4, 6, 5, 6, 5, 5, 5, 5, 5, 5".to_string();
        let mut agent = ScriptedAgent::new(Role::Buyer, vec![]).with_answers(vec![answer]);
        let q = Questionnaire::builtin();
        let r = resurvey(&transcript(), &mut agent, Role::Buyer, &q, 5).unwrap();
        assert!(r.items.iter().all(|i| i.sd == Some(0.0)));
        let once = resurvey(&transcript(), &mut agent, Role::Buyer, &q, 1).unwrap();
        assert!(once.items.iter().all(|i| i.sd.is_none()));
        assert_eq!(once.items[0].mean, 5.0);
    }

    #[test]
    fn resurvey_five_fixed_vectors() {
        let vectors = [
            "5,6,2,5,1,7,4,6,5,6,5,5,5,5,5,5",
            "4,5,2,6,1,7,4,6,6,7,6,5,6,5,6,6",
            "6,6,1,6,2,6,5,6,6,6,6,6,6,6,6,6",
            "5,5,3,5,1,7,4,5,5,6,5,5,5,6,5,5",
            "5,6,2,5,2,7,5,6,5,6,6,5,5,5,5,6",
        ];
        let mut agent =
            ScriptedAgent::new(Role::Buyer, vec![]).with_answers(vectors.iter().map(|s| s.to_string()).collect());
        let r = resurvey(&transcript(), &mut agent, Role::Buyer, &Questionnaire::builtin(), 5).unwrap();
        // item 1: 5,4,6,5,5 -> mean 5, sd sqrt(0.5)
        assert!((r.items[0].mean - 5.0).abs() < 1e-9);
        assert!((r.items[0].sd.unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        // item 3: 2,2,1,3,2 -> mean 2, sd sqrt(0.5)
        assert!((r.items[2].mean - 2.0).abs() < 1e-9);
        assert!((r.items[2].sd.unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        // item 5: 1,1,2,1,2 -> mean 1.4, sd sqrt(0.3)
        assert!((r.items[4].mean - 1.4).abs() < 1e-9);
        assert!((r.items[4].sd.unwrap() - 0.3f64.sqrt()).abs() < 1e-9);
        // item 10: 6,7,6,6,6 -> mean 6.2, sd sqrt(0.2)
        assert!((r.items[9].mean - 6.2).abs() < 1e-9);
        assert!((r.items[9].sd.unwrap() - 0.2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn report_is_deterministic() {
        let records = vec![
            rec("a", 0, Condition::Baseline, Some("2000")),
            rec("a", 0, Condition::SellerAnchor, Some("2100")),
            rec("b", 0, Condition::Baseline, Some("2050")),
            rec("b", 0, Condition::SellerAnchor, Some("2300")),
            rec("c", 0, Condition::Baseline, Some("1990")),
            rec("c", 0, Condition::SellerAnchor, Some("2250")),
        ];
        let a = analyze(&records);
        let b = analyze(&records);
        assert_eq!(a.to_text(), b.to_text());
        assert!(a.to_text().contains("seller utility"));
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("utility.csv")).unwrap();
        assert!(csv.starts_with("role,condition,sessions,n,mean,sd\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
