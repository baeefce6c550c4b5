//! Corrupts a simulator-built tree and lets the detectors find the damage.

use tugwar::lint::synthetic::{inject_flaws, reference_params, reference_tree};
use tugwar::lint::{run_detectors, DetectorId, LintConfig};
use tugwar::models::QFunction;
use tugwar::GameConfig;

fn main() -> tugwar::Result<()> {
    let cfg = LintConfig::default();
    let q = QFunction::new(16, 4)?;
    let mut tree = reference_tree(&GameConfig::default(), &q, &reference_params(), 4)?;
    println!("clean tree: {} reports", run_detectors(&tree, &DetectorId::ALL, &cfg).len());

    let manifest = inject_flaws(&mut tree, &cfg, 4);
    for i in &manifest.injections {
        println!("injected {} at node {}: {}", i.detector, i.node, i.description);
    }
    for r in run_detectors(&tree, &DetectorId::ALL, &cfg) {
        let tag = if r.severe { " severe" } else { "" };
        println!("{:<18} nodes {:?}{tag}: {}", r.detector.name(), r.nodes, r.message);
    }
    Ok(())
}
