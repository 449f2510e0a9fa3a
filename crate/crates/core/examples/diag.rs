use fundus_core::synth::{CohortGenerator, CohortSpec};
use fundus_core::vesselgraph::analyze;

fn main() {
    let mut worst: f64 = 0.0;
    let mut sum_dl = 0.0;
    let mut node_miss = 0usize;
    let mut gen_fail = 0usize;
    let mut total = 0usize;
    for seed in 0..80u64 {
        let gen = CohortGenerator::new(CohortSpec::null(3, 1000 + seed)).unwrap();
        for i in 0..gen.len() {
            total += 1;
            let (bundle, truth) = match gen.bundle(i, false) {
                Ok(v) => v,
                Err(e) => {
                    gen_fail += 1;
                    println!("seed {} member {i}: generation failed: {e}", 1000 + seed);
                    continue;
                }
            };
            let g = analyze(&bundle.vessel_mask, true).unwrap();
            let m = g.metrics();
            let dl = 100.0 * (m.total_length - truth.expected.graph_total_length)
                / truth.expected.graph_total_length;
            sum_dl += dl;
            if dl.abs() > worst.abs() {
                worst = dl;
            }
            if m.nodes != truth.expected.graph_nodes || m.branches != truth.expected.graph_branches {
                node_miss += 1;
                println!(
                    "seed {} member {i}: nodes {}/{} branches {}/{}",
                    1000 + seed, m.nodes, truth.expected.graph_nodes, m.branches, truth.expected.graph_branches
                );
            }
        }
    }
    println!(
        "{total} bundles, gen failures {gen_fail}, count mismatches {node_miss}, worst dl {worst:+.2}%, mean dl {:+.2}%",
        sum_dl / total as f64
    );
}
