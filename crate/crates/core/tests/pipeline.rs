use std::collections::BTreeMap;

use spurious_core::eval::clique_count;
use spurious_core::graph::parse_graph;
use spurious_core::model::{corrupt, forward_sample, read_network, NoiseChannel};
use spurious_core::sed::{run_sed, SedConfig};

#[test]
fn asia_clique_is_broken_at_the_spurious_edge() {
    let bn = read_network(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/asia.json")).unwrap();
    let clean = forward_sample(&bn, 10_000, 17).unwrap();
    let noisy = corrupt(&clean, &NoiseChannel::symmetric(bn.variables(), &[("bronc", 0.05)]).unwrap(), 18).unwrap();
    let learned = parse_graph(
        "asia -> tub\nsmoke -> lung\nsmoke -> bronc\nbronc -> dysp\ntub -> either\nlung -> either\neither -> xray\neither -> dysp\nsmoke -> dysp",
    )
    .unwrap();
    let out = run_sed(&learned, &noisy, &SedConfig::default()).unwrap();
    assert_eq!(clique_count(&out.graph), 0);
    assert_eq!(out.log.len(), 1);
    assert_eq!(out.log[0].noisy_variable, "bronc");
    assert_eq!(out.log[0].edge, "smoke -> dysp");
    assert!(out.graph.edge_set().is_subset(&learned.edge_set()));

    let again: BTreeMap<_, _> =
        run_sed(&learned, &noisy, &SedConfig::default()).unwrap().log.into_iter().map(|r| (r.order, r.edge)).collect();
    assert_eq!(again.values().collect::<Vec<_>>(), vec!["smoke -> dysp"]);
}
