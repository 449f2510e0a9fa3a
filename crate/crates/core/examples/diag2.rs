use fundus_core::synth::{CohortGenerator, CohortSpec};
use fundus_core::vesselgraph::{analyze, extract_graph, skeletonize, NodeKind};

fn main() {
    let gen = CohortGenerator::new(CohortSpec::null(3, 1056)).unwrap();
    let (bundle, _) = gen.bundle(4, false).unwrap();
    let skel = skeletonize(&bundle.vessel_mask);
    let raw = extract_graph(&skel).unwrap();
    let g = analyze(&bundle.vessel_mask, true).unwrap();
    println!("raw {}n/{}b final {}n/{}b comps {}", raw.nodes.len(), raw.branches.len(), g.metrics().nodes, g.metrics().branches, g.components());
    // junctions with degree != 3 and != 4 are suspicious (trees have deg-3/4 junctions)
    let deg = g.degrees();
    for n in g.nodes.iter().filter(|n| n.kind == NodeKind::Junction) {
        if deg[n.id] != 3 && deg[n.id] != 4 {
            println!("junction deg {} at ({:.0},{:.0})", deg[n.id], n.position.x, n.position.y);
        }
    }
    // components with more than one junction = merged/contact structures (trees have <= 1)
    let mut parent: Vec<usize> = (0..g.nodes.len()).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize { if p[i] != i { let r = find(p, p[i]); p[i] = r; } p[i] }
    for b in &g.branches {
        let (a, c) = (find(&mut parent, b.nodes.0), find(&mut parent, b.nodes.1));
        if a != c { parent[a] = c; }
    }
    let mut jcount = std::collections::HashMap::new();
    for n in &g.nodes {
        if n.kind == NodeKind::Junction {
            let r = find(&mut parent, n.id);
            *jcount.entry(r).or_insert(0usize) += 1;
        }
    }
    for (root, count) in jcount {
        if count > 1 {
            let n = &g.nodes[root];
            println!("component with {count} junctions near ({:.0},{:.0})", n.position.x, n.position.y);
            let (cx, cy) = (n.position.x as usize, n.position.y as usize);
            for y in cy.saturating_sub(10)..=(cy + 10).min(skel.height() - 1) {
                let row: String = (cx.saturating_sub(13)..=(cx + 13).min(skel.width() - 1))
                    .map(|x| match (bundle.vessel_mask.get(x, y), skel.get(x, y)) {
                        (_, true) => '#',
                        (true, false) => 'o',
                        _ => '.',
                    })
                    .collect();
                println!("{row}");
            }
        }
    }
}
