//! Paired t-test and Spearman correlation on small fixed samples.

use anchorbench::stats::{mean_sd, paired_t_test, spearman, PairedSample};

fn main() {
    let baseline = [0.31, 0.12, 0.45, 0.27, 0.38, 0.19, 0.52, 0.22, 0.41, 0.33];
    let anchored = [0.18, 0.15, 0.29, 0.20, 0.31, 0.02, 0.36, 0.25, 0.27, 0.21];
    for (name, xs) in [("baseline", &baseline), ("seller_anchor", &anchored)] {
        let (m, sd) = mean_sd(xs).unwrap();
        println!("{name:<14} mean {m:.3} sd {:.3}", sd.unwrap());
    }
    let sample = PairedSample::new(baseline.iter().copied().zip(anchored).collect(), "baseline", "seller_anchor");
    let t = paired_t_test(&sample).unwrap();
    println!(
        "paired t({}) = {:.4}, p = {:.5}, significant: {}",
        t.dof, t.statistic, t.p_value, t.significant_at_05
    );
    let traits = [-3.0, 1.0, 2.0, -1.0, 0.0, 3.0, -2.0, 1.0, 2.0, 0.0];
    let drops: Vec<f64> = baseline.iter().zip(anchored).map(|(b, a)| b - a).collect();
    let c = spearman(&traits, &drops).unwrap();
    println!("spearman rho = {:.4}, p = {:.4}, n = {}", c.rho, c.p_value, c.n);
}
