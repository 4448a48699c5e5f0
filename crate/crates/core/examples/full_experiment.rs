//! Plans, runs, surveys and analyzes a small scripted experiment on disk.
//!
//! cargo run --example full_experiment -- [output-dir]

use std::path::PathBuf;

use anchorbench::agents::PolicyParams;
use anchorbench::catalog::{Catalog, Scenario};
use anchorbench::experiment::{
    analyze_experiment, plan_experiment, run_experiment, survey_experiment, AgentSource, ExperimentConfig, Resources,
    RunOptions,
};
use anchorbench::store::ExperimentStore;
use anchorbench::Money;

fn main() {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("anchorbench-demo"));
    let catalog = Catalog::new(
        (0..12)
            .map(|i| Scenario {
                id: format!("item{i:02}"),
                title: format!("Used item {i}"),
                description: "Gently used, works well.".into(),
                seller_target: Money::from_units(300 + 40 * i),
                buyer_target: Money::from_units(200 + 30 * i),
            })
            .collect(),
    )
    .unwrap();
    let resources = Resources::default();
    let config = ExperimentConfig::scripted("demo", 7, PolicyParams::default());
    let manifest = plan_experiment(&catalog, &config, &resources).unwrap();
    ExperimentStore::create(&root, &manifest).unwrap();
    let agents = AgentSource::from_spec(&config.seller).unwrap();

    let run = run_experiment(&root, &agents, &agents, &resources, RunOptions::default()).unwrap();
    println!("run: completed {} skipped {}", run.completed, run.skipped);
    let survey = survey_experiment(&root, &agents, &agents, &resources).unwrap();
    println!("survey: administered {}", survey.administered);
    let report = analyze_experiment(&root, &root.join("report")).unwrap();
    println!("{}", report.to_text());
    println!("store and report under {}", root.display());
}
