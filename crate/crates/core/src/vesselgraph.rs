//! Vessel skeleton analysis: Zhang-Suen thinning of the binary vessel
//! mask and extraction of the node/branch graph with pixel-metric
//! lengths (unit cost for axial steps, sqrt(2) for diagonal steps).
//!
//! Junction pixels that touch 8-adjacently are merged into a single
//! node, so a thick crossing counts once. Isolated single pixels carry
//! no length and are dropped from the graph. An isolated cycle becomes
//! one branch anchored at a single node; such anchors are reported as
//! junctions even though their degree is 2.

use std::io::{self, Write};

use crate::error::{CoreError, Result};
use crate::geometry::Point;
use crate::mask::BinaryMask;

/// Branches strictly shorter than this (in px) that end at an endpoint
/// are treated as skeletonization spurs by `analyze`.
pub const SPUR_LENGTH: f64 = 3.0;

/// Junction-to-junction branches whose pixel path is shorter than this
/// are contracted by `analyze`: thinning a thick crossing can split
/// one anatomical junction into nearby pixels a step or two apart.
pub const JUNCTION_LINK_LENGTH: f64 = 3.0;

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Endpoint,
    Junction,
}

#[derive(Debug, Clone)]
pub struct VesselNode {
    pub id: usize,
    pub position: Point,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct VesselBranch {
    pub id: usize,
    /// Node ids at the two ends (equal for cycles and self-loops).
    pub nodes: (usize, usize),
    /// Skeleton pixels from end to end, inclusive.
    pub path: Vec<(usize, usize)>,
    /// Sum of step costs along the path.
    pub length: f64,
}

#[derive(Debug, Clone, Default)]
pub struct VesselGraph {
    pub nodes: Vec<VesselNode>,
    pub branches: Vec<VesselBranch>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphMetrics {
    pub nodes: usize,
    pub branches: usize,
    pub total_length: f64,
}

impl VesselGraph {
    pub fn metrics(&self) -> GraphMetrics {
        GraphMetrics {
            nodes: self.nodes.len(),
            branches: self.branches.len(),
            total_length: self.branches.iter().map(|b| b.length).sum(),
        }
    }

    /// Branch incidences per node; a cycle contributes 2 to its anchor.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.nodes.len()];
        for b in &self.branches {
            deg[b.nodes.0] += 1;
            deg[b.nodes.1] += 1;
        }
        deg
    }

    /// Number of connected components over the node set.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let root = find(parent, parent[i]);
                parent[i] = root;
            }
            parent[i]
        }
        for b in &self.branches {
            let (a, bb) = (find(&mut parent, b.nodes.0), find(&mut parent, b.nodes.1));
            if a != bb {
                parent[a] = bb;
            }
        }
        let mut roots: Vec<usize> = (0..self.nodes.len())
            .map(|i| find(&mut parent, i))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

/// Metrics reported by the measurement table.
pub fn graph_metrics(graph: &VesselGraph) -> GraphMetrics {
    graph.metrics()
}

#[inline]
fn neighbors8(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    const OFFSETS: [(i64, i64); 8] = [
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
    ];
    OFFSETS.into_iter().filter_map(move |(dx, dy)| {
        let xx = x as i64 + dx;
        let yy = y as i64 + dy;
        if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
            Some((xx as usize, yy as usize))
        } else {
            None
        }
    })
}

/// Number of distinct branch exits around a skeleton pixel: the count
/// of 0-to-1 transitions walking the 8-neighbor ring. One exit marks a
/// line end, two a path interior, three or more a junction.
fn crossing_number(mask: &BinaryMask, x: usize, y: usize) -> u32 {
    const RING: [(i64, i64); 8] = [
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
    ];
    let at = |i: usize| {
        let (dx, dy) = RING[i % 8];
        mask.get_i(x as i64 + dx, y as i64 + dy) as u8
    };
    (0..8).filter(|&i| at(i) == 0 && at(i + 1) == 1).count() as u32
}

/// Zhang-Suen ordered neighborhood p2..p9 (N, NE, E, SE, S, SW, W, NW).
#[inline]
fn zs_neighborhood(grid: &[u8], w: usize, h: usize, x: usize, y: usize) -> [u8; 8] {
    let at = |dx: i64, dy: i64| -> u8 {
        let xx = x as i64 + dx;
        let yy = y as i64 + dy;
        if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h {
            grid[yy as usize * w + xx as usize]
        } else {
            0
        }
    };
    [
        at(0, -1),
        at(1, -1),
        at(1, 0),
        at(1, 1),
        at(0, 1),
        at(-1, 1),
        at(-1, 0),
        at(-1, -1),
    ]
}

#[inline]
fn transitions(n: &[u8; 8]) -> u32 {
    let mut a = 0;
    for i in 0..8 {
        if n[i] == 0 && n[(i + 1) % 8] != 0 {
            a += 1;
        }
    }
    a
}

/// Number of 8-connected components the ring neighbors form among
/// themselves (the center removed). Ring order is N, NE, E, SE, S,
/// SW, W, NW.
fn neighbor_components(n: &[u8; 8]) -> u32 {
    const POS: [(i64, i64); 8] = [
        (0, -1),
        (1, -1),
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
    ];
    let mut seen = [false; 8];
    let mut components = 0;
    for start in 0..8 {
        if n[start] == 0 || seen[start] {
            continue;
        }
        components += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..8 {
                if n[j] != 0 && !seen[j] {
                    let (ax, ay) = POS[i];
                    let (bx, by) = POS[j];
                    if (ax - bx).abs() <= 1 && (ay - by).abs() <= 1 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
    }
    components
}

/// Morphological thinning to a 1-px-wide, 8-connected skeleton.
///
/// Zhang-Suen passes do the bulk of the work, hardened in two ways:
/// each deletion is re-checked sequentially so parallel deletion
/// cannot sever 2-px diagonal bands, and the neighbor-count condition
/// starts at 3 so band ends do not erode lengthwise. The 2-px diagonal
/// staircases Zhang-Suen is known to leave are reduced by Holt's
/// staircase-removal templates (which never match line ends, so length
/// is preserved), and remaining redundant corner pixels at thick
/// junctions are eroded when their removal keeps the neighborhood
/// singly connected. Deletion-only, so the skeleton is a subset of the
/// input support.
pub fn skeletonize(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut grid: Vec<u8> = mask.bytes().iter().map(|&v| (v != 0) as u8).collect();
    let mut active: Vec<(usize, usize)> = mask.iter_on().collect();
    let mut to_delete: Vec<usize> = Vec::new();

    // Apply the frozen candidate list with a sequential re-check: a
    // candidate is only deleted while it stays a simple non-endpoint
    // point against the partially updated grid.
    let apply = |grid: &mut Vec<u8>, to_delete: &[usize]| -> bool {
        let mut changed = false;
        for &i in to_delete {
            let (x, y) = (i % w, i / w);
            let n = zs_neighborhood(grid, w, h, x, y);
            let count: u32 = n.iter().map(|&v| v as u32).sum();
            if count >= 2 && neighbor_components(&n) == 1 {
                grid[i] = 0;
                changed = true;
            }
        }
        changed
    };

    loop {
        let mut changed = false;
        for step in 0..2 {
            to_delete.clear();
            for &(x, y) in &active {
                let i = y * w + x;
                if grid[i] == 0 {
                    continue;
                }
                let n = zs_neighborhood(&grid, w, h, x, y);
                let b: u32 = n.iter().map(|&v| v as u32).sum();
                if !(3..=6).contains(&b) || transitions(&n) != 1 {
                    continue;
                }
                let (p2, p4, p6, p8) = (n[0], n[2], n[4], n[6]);
                let ok = if step == 0 {
                    p2 & p4 & p6 == 0 && p4 & p6 & p8 == 0
                } else {
                    p2 & p4 & p8 == 0 && p2 & p6 & p8 == 0
                };
                if ok {
                    to_delete.push(i);
                }
            }
            changed |= apply(&mut grid, &to_delete);
        }

        // Holt staircase removal, north- then south-biased pass.
        for south in [false, true] {
            to_delete.clear();
            for &(x, y) in &active {
                let i = y * w + x;
                if grid[i] == 0 {
                    continue;
                }
                let n = zs_neighborhood(&grid, w, h, x, y);
                if transitions(&n) >= 3 {
                    continue; // never relocate a junction
                }
                let [p2, p3, p4, p5, p6, p7, p8, p9] = n.map(|v| v != 0);
                let matched = if !south {
                    p2 && ((p4 && !p3 && !p7 && (!p6 || !p8))
                        || (p8 && !p9 && !p5 && (!p6 || !p4)))
                } else {
                    p6 && ((p4 && !p5 && !p9 && (!p2 || !p8))
                        || (p8 && !p7 && !p3 && (!p2 || !p4)))
                };
                if matched {
                    to_delete.push(i);
                }
            }
            changed |= apply(&mut grid, &to_delete);
        }

        // Redundant corners at thick junctions (solid 2x2 leftovers):
        // erode pixels with three or more neighbors, fewer than three
        // exit runs and a singly connected punctured neighborhood. The
        // neighbor-count floor keeps this from creeping along lines.
        to_delete.clear();
        for &(x, y) in &active {
            let i = y * w + x;
            if grid[i] == 0 {
                continue;
            }
            let n = zs_neighborhood(&grid, w, h, x, y);
            let count: u32 = n.iter().map(|&v| v as u32).sum();
            if count >= 3 && transitions(&n) < 3 && neighbor_components(&n) == 1 {
                to_delete.push(i);
            }
        }
        changed |= apply(&mut grid, &to_delete);

        if !changed {
            break;
        }
        active.retain(|&(x, y)| grid[y * w + x] != 0);
    }

    // A solid 2x2 core can survive at a dense crossing where every
    // pixel reads as a junction. Break each block, preferring a pixel
    // whose removal keeps its neighbors in one piece.
    loop {
        let mut deleted = false;
        for y in 0..h.saturating_sub(1) {
            for x in 0..w.saturating_sub(1) {
                let i = y * w + x;
                if grid[i] == 0
                    || grid[i + 1] == 0
                    || grid[i + w] == 0
                    || grid[i + w + 1] == 0
                {
                    continue;
                }
                let block = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)];
                let pick = block
                    .iter()
                    .find(|&&(bx, by)| {
                        neighbor_components(&zs_neighborhood(&grid, w, h, bx, by)) == 1
                    })
                    .or_else(|| {
                        block.iter().max_by_key(|&&(bx, by)| {
                            zs_neighborhood(&grid, w, h, bx, by)
                                .iter()
                                .map(|&v| v as u32)
                                .sum::<u32>()
                        })
                    })
                    .copied();
                if let Some((bx, by)) = pick {
                    grid[by * w + bx] = 0;
                    deleted = true;
                }
            }
        }
        if !deleted {
            break;
        }
    }

    let mut out = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if grid[y * w + x] != 0 {
                out.set(x, y, true);
            }
        }
    }
    out
}

#[inline]
fn step_cost(a: (usize, usize), b: (usize, usize)) -> f64 {
    if a.0 == b.0 || a.1 == b.1 {
        1.0
    } else {
        SQRT2
    }
}

/// Raw step length of a branch's pixel path, without the cluster-reach
/// adjustments folded into `length`; the structural thresholds for
/// spurs and split junctions compare against this.
fn path_step_length(branch: &VesselBranch) -> f64 {
    branch
        .path
        .windows(2)
        .map(|p| step_cost(p[0], p[1]))
        .sum()
}

/// Next pixel of a path walk. With one continuation it is taken as-is;
/// where branches run close together the walk drops candidates glued to
/// the previous pixel and prefers the axial continuation, which keeps
/// traces on their own branch across diagonal contacts.
fn walk_next(
    skeleton: &BinaryMask,
    cur: (usize, usize),
    prev: (usize, usize),
) -> Option<(usize, usize)> {
    let (w, h) = (skeleton.width(), skeleton.height());
    let mut candidates: Vec<(usize, usize)> = neighbors8(cur.0, cur.1, w, h)
        .filter(|&(nx, ny)| skeleton.get(nx, ny) && (nx, ny) != prev)
        .collect();
    match candidates.len() {
        0 => None,
        1 => Some(candidates[0]),
        _ => {
            let adjacent = |a: (usize, usize), b: (usize, usize)| {
                a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
            };
            let filtered: Vec<(usize, usize)> = candidates
                .iter()
                .copied()
                .filter(|&c| !adjacent(c, prev))
                .collect();
            if !filtered.is_empty() {
                candidates = filtered;
            }
            candidates
                .iter()
                .copied()
                .find(|&(nx, ny)| nx == cur.0 || ny == cur.1)
                .or(Some(candidates[0]))
        }
    }
}

/// Extract the node/branch graph of a thinned mask. Pixels are
/// classified by crossing number; junction pixels that touch merge into
/// one node and branch lengths extend to the merged node's centroid.
pub fn extract_graph(skeleton: &BinaryMask) -> Result<VesselGraph> {
    let (w, h) = (skeleton.width(), skeleton.height());
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            if skeleton.get(x, y)
                && skeleton.get(x + 1, y)
                && skeleton.get(x, y + 1)
                && skeleton.get(x + 1, y + 1)
            {
                return Err(CoreError::NotSkeleton { x, y });
            }
        }
    }

    const NO_NODE: u32 = u32::MAX;
    let on_pixels: Vec<(usize, usize)> = skeleton.iter_on().collect();
    let mut crossing = vec![0u8; w * h];
    for &(x, y) in &on_pixels {
        crossing[y * w + x] = crossing_number(skeleton, x, y) as u8;
    }

    let mut graph = VesselGraph::default();
    let mut node_at = vec![NO_NODE; w * h];

    // Junction clusters: 8-connected groups of pixels with 3+ exits.
    let mut stack = Vec::new();
    for &(x, y) in &on_pixels {
        let i = y * w + x;
        if crossing[i] < 3 || node_at[i] != NO_NODE {
            continue;
        }
        let id = graph.nodes.len();
        let mut cluster = Vec::new();
        node_at[i] = id as u32;
        stack.push((x, y));
        while let Some((cx, cy)) = stack.pop() {
            cluster.push((cx, cy));
            for (nx, ny) in neighbors8(cx, cy, w, h) {
                let j = ny * w + nx;
                if skeleton.get(nx, ny) && crossing[j] >= 3 && node_at[j] == NO_NODE {
                    node_at[j] = id as u32;
                    stack.push((nx, ny));
                }
            }
        }
        let n = cluster.len() as f64;
        let position = Point::new(
            cluster.iter().map(|p| p.0 as f64).sum::<f64>() / n,
            cluster.iter().map(|p| p.1 as f64).sum::<f64>() / n,
        );
        graph.nodes.push(VesselNode {
            id,
            position,
            kind: NodeKind::Junction,
        });
    }

    // Line ends: exactly one exit run (isolated pixels have none and
    // carry no length; they are dropped).
    for &(x, y) in &on_pixels {
        let i = y * w + x;
        if crossing[i] == 1 && node_at[i] == NO_NODE {
            let id = graph.nodes.len();
            node_at[i] = id as u32;
            graph.nodes.push(VesselNode {
                id,
                position: Point::new(x as f64, y as f64),
                kind: NodeKind::Endpoint,
            });
        }
    }

    // Extending a branch to its node's centroid recovers the steps a
    // multi-pixel junction cluster swallows.
    let cluster_reach = |node: &VesselNode, px: (usize, usize)| {
        let dx = (px.0 as f64 - node.position.x).abs();
        let dy = (px.1 as f64 - node.position.y).abs();
        dx.max(dy) + (SQRT2 - 1.0) * dx.min(dy)
    };

    // Trace maximal paths out of every node pixel.
    let mut consumed = vec![false; w * h];
    let mut direct_edges: std::collections::HashSet<(usize, usize)> =
        std::collections::HashSet::new();
    let node_pixels: Vec<(usize, usize)> = on_pixels
        .iter()
        .copied()
        .filter(|&(x, y)| node_at[y * w + x] != NO_NODE)
        .collect();

    for &(sx, sy) in &node_pixels {
        let start_node = node_at[sy * w + sx] as usize;
        for (qx, qy) in neighbors8(sx, sy, w, h) {
            if !skeleton.get(qx, qy) {
                continue;
            }
            let qi = qy * w + qx;
            if node_at[qi] != NO_NODE {
                // Direct node-to-node adjacency; cluster-internal
                // contacts are not branches.
                let other = node_at[qi] as usize;
                if other == start_node {
                    continue;
                }
                let key = ((sy * w + sx).min(qi), (sy * w + sx).max(qi));
                if direct_edges.insert(key) {
                    let id = graph.branches.len();
                    let length = step_cost((sx, sy), (qx, qy))
                        + cluster_reach(&graph.nodes[start_node], (sx, sy))
                        + cluster_reach(&graph.nodes[other], (qx, qy));
                    graph.branches.push(VesselBranch {
                        id,
                        nodes: (start_node, other),
                        path: vec![(sx, sy), (qx, qy)],
                        length,
                    });
                }
                continue;
            }
            if consumed[qi] {
                continue;
            }
            // Walk through path pixels until the next node pixel.
            let mut path = vec![(sx, sy), (qx, qy)];
            let mut length = step_cost((sx, sy), (qx, qy));
            let mut prev = (sx, sy);
            let mut cur = (qx, qy);
            loop {
                consumed[cur.1 * w + cur.0] = true;
                let Some(next) = walk_next(skeleton, cur, prev) else {
                    break; // dangling chain, treat as a branch end
                };
                // A corner pixel whose whole neighborhood is the three
                // pixels of this very step is a thinning leftover;
                // absorb it so it cannot read as a stray cycle.
                for (rx, ry) in neighbors8(cur.0, cur.1, w, h) {
                    let ri = ry * w + rx;
                    if skeleton.get(rx, ry)
                        && (rx, ry) != next
                        && (rx, ry) != prev
                        && node_at[ri] == NO_NODE
                        && neighbors8(rx, ry, w, h)
                            .filter(|&(nx, ny)| skeleton.get(nx, ny))
                            .all(|p| p == prev || p == cur || p == next)
                    {
                        consumed[ri] = true;
                    }
                }
                let ni = next.1 * w + next.0;
                if node_at[ni] == NO_NODE && consumed[ni] {
                    if std::env::var_os("FUNDUS_TRACE_DEBUG").is_some() {
                        eprintln!(
                            "walk from node {start_node} broke at {:?} -> {:?} after {} px",
                            cur,
                            next,
                            path.len()
                        );
                    }
                    break;
                }
                length += step_cost(cur, next);
                path.push(next);
                if node_at[ni] != NO_NODE {
                    let id = graph.branches.len();
                    let end_node = node_at[ni] as usize;
                    let length = length
                        + cluster_reach(&graph.nodes[start_node], (sx, sy))
                        + cluster_reach(&graph.nodes[end_node], next);
                    graph.branches.push(VesselBranch {
                        id,
                        nodes: (start_node, end_node),
                        path,
                        length,
                    });
                    break;
                }
                prev = cur;
                cur = next;
            }
        }
    }

    // Whatever path pixels remain form isolated cycles: one branch
    // anchored at a single node.
    for &(x, y) in &on_pixels {
        let i = y * w + x;
        if crossing[i] != 2 || consumed[i] || node_at[i] != NO_NODE {
            continue;
        }
        let anchor_id = graph.nodes.len();
        graph.nodes.push(VesselNode {
            id: anchor_id,
            position: Point::new(x as f64, y as f64),
            kind: NodeKind::Junction,
        });
        let mut path = vec![(x, y)];
        let mut length = 0.0;
        let mut prev = (x, y);
        let mut cur = neighbors8(x, y, w, h)
            .find(|&(nx, ny)| skeleton.get(nx, ny))
            .expect("cycle pixel has neighbors");
        length += step_cost((x, y), cur);
        path.push(cur);
        consumed[i] = true;
        while cur != (x, y) {
            consumed[cur.1 * w + cur.0] = true;
            let Some(next) = walk_next(skeleton, cur, prev) else {
                break;
            };
            if next != (x, y) && consumed[next.1 * w + next.0] {
                break;
            }
            length += step_cost(cur, next);
            path.push(next);
            prev = cur;
            cur = next;
        }
        let id = graph.branches.len();
        graph.branches.push(VesselBranch {
            id,
            nodes: (anchor_id, anchor_id),
            path,
            length,
        });
    }

    Ok(graph)
}

/// Merge junction nodes connected by branches shorter than
/// `JUNCTION_LINK_LENGTH` into single nodes, dropping the linking
/// branches (and any sub-6-px loops the merge collapses).
fn contract_junction_links(graph: VesselGraph) -> VesselGraph {
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    let mut parent: Vec<usize> = (0..graph.nodes.len()).collect();
    let mut contracted = vec![false; graph.branches.len()];
    let mut any = false;
    for (bi, b) in graph.branches.iter().enumerate() {
        if b.nodes.0 == b.nodes.1 {
            // Sub-6-px rings are pinhole artifacts of thinning.
            if path_step_length(b) < 2.0 * JUNCTION_LINK_LENGTH {
                contracted[bi] = true;
                any = true;
            }
            continue;
        }
        if path_step_length(b) < JUNCTION_LINK_LENGTH
            && graph.nodes[b.nodes.0].kind == NodeKind::Junction
            && graph.nodes[b.nodes.1].kind == NodeKind::Junction
        {
            let (a, c) = (find(&mut parent, b.nodes.0), find(&mut parent, b.nodes.1));
            if a != c {
                parent[a] = c;
            }
            contracted[bi] = true;
            any = true;
        }
    }
    if !any {
        return graph;
    }

    // Compact ids: one node per merge root, positioned at the mean of
    // its members.
    let mut new_id = vec![usize::MAX; graph.nodes.len()];
    let mut nodes: Vec<VesselNode> = Vec::new();
    for i in 0..graph.nodes.len() {
        let root = find(&mut parent, i);
        if new_id[root] == usize::MAX {
            new_id[root] = nodes.len();
            nodes.push(VesselNode {
                id: nodes.len(),
                position: Point::new(0.0, 0.0),
                kind: graph.nodes[i].kind,
            });
        }
        new_id[i] = new_id[root];
    }
    let mut sums = vec![(0.0, 0.0, 0usize); nodes.len()];
    for n in &graph.nodes {
        let id = new_id[n.id];
        sums[id].0 += n.position.x;
        sums[id].1 += n.position.y;
        sums[id].2 += 1;
        if n.kind == NodeKind::Junction {
            nodes[id].kind = NodeKind::Junction;
        }
    }
    for (node, (sx, sy, count)) in nodes.iter_mut().zip(&sums) {
        node.position = Point::new(sx / *count as f64, sy / *count as f64);
    }

    let mut branches = Vec::new();
    for (bi, b) in graph.branches.iter().enumerate() {
        if contracted[bi] {
            continue;
        }
        let a = new_id[b.nodes.0];
        let c = new_id[b.nodes.1];
        // A short loop closed by the merge is the same thinning
        // artifact seen from the other side.
        if a == c && b.nodes.0 != b.nodes.1 && path_step_length(b) < 2.0 * JUNCTION_LINK_LENGTH {
            continue;
        }
        branches.push(VesselBranch {
            id: branches.len(),
            nodes: (a, c),
            path: b.path.clone(),
            length: b.length,
        });
    }
    // Dropping a ring can leave its anchor with no branches.
    let mut degree = vec![0usize; nodes.len()];
    for b in &branches {
        degree[b.nodes.0] += 1;
        degree[b.nodes.1] += 1;
    }
    if degree.iter().any(|&d| d == 0) {
        let mut keep_id = vec![usize::MAX; nodes.len()];
        let mut kept = Vec::new();
        for node in nodes {
            if degree[node.id] > 0 {
                keep_id[node.id] = kept.len();
                kept.push(VesselNode {
                    id: kept.len(),
                    position: node.position,
                    kind: node.kind,
                });
            }
        }
        for b in &mut branches {
            b.nodes = (keep_id[b.nodes.0], keep_id[b.nodes.1]);
        }
        return VesselGraph {
            nodes: kept,
            branches,
        };
    }
    VesselGraph { nodes, branches }
}

/// Remove skeletonization spurs at the graph level: branches shorter
/// than `SPUR_LENGTH` with a free endpoint are dropped, nodes left
/// without branches disappear, junctions whose degree fell to 2 are
/// spliced through (their two branches join into one, as a clean
/// re-trace would produce) and those left with degree 1 become
/// endpoints.
fn prune_spur_branches(graph: VesselGraph) -> VesselGraph {
    let degrees = graph.degrees();
    let is_spur = |b: &VesselBranch| {
        path_step_length(b) < SPUR_LENGTH
            && (b.nodes.0 != b.nodes.1)
            && [b.nodes.0, b.nodes.1].iter().any(|&n| {
                graph.nodes[n].kind == NodeKind::Endpoint && degrees[n] == 1
            })
    };
    if !graph.branches.iter().any(|b| is_spur(b)) {
        return graph;
    }
    let mut branches: Vec<VesselBranch> = graph
        .branches
        .iter()
        .filter(|b| !is_spur(b))
        .cloned()
        .collect();

    // Splice chains through nodes that now have exactly two distinct
    // branch ends.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
    for (bi, b) in branches.iter().enumerate() {
        incident[b.nodes.0].push(bi);
        if b.nodes.1 != b.nodes.0 {
            incident[b.nodes.1].push(bi);
        }
    }
    let mut dead_branch = vec![false; branches.len()];
    for node in &graph.nodes {
        if node.kind != NodeKind::Junction || incident[node.id].len() != 2 {
            continue;
        }
        let (bi, bj) = (incident[node.id][0], incident[node.id][1]);
        if bi == bj || dead_branch[bi] || dead_branch[bj] {
            continue;
        }
        let other = |b: &VesselBranch| {
            if b.nodes.0 == node.id {
                b.nodes.1
            } else {
                b.nodes.0
            }
        };
        let (a, c) = (other(&branches[bi]), other(&branches[bj]));
        if a == node.id || c == node.id {
            continue; // self-loop through this node stays a cycle
        }
        // path[0] lies on the nodes.0 side by construction.
        let mut path = branches[bi].path.clone();
        if branches[bi].nodes.0 == node.id {
            path.reverse();
        }
        let mut tail = branches[bj].path.clone();
        if branches[bj].nodes.1 == node.id {
            tail.reverse();
        }
        path.extend(tail.into_iter().skip(1));
        let length = branches[bi].length + branches[bj].length;
        branches[bi] = VesselBranch {
            id: branches[bi].id,
            nodes: (a, c),
            path,
            length,
        };
        dead_branch[bj] = true;
        for end in if a == c { vec![a] } else { vec![a, c] } {
            for slot in incident[end].iter_mut() {
                if *slot == bj {
                    *slot = bi;
                }
            }
        }
        incident[node.id].clear();
    }
    let branches: Vec<VesselBranch> = branches
        .into_iter()
        .enumerate()
        .filter(|(bi, _)| !dead_branch[*bi])
        .map(|(_, b)| b)
        .collect();

    // Keep only nodes still carrying branches; demote ex-junctions
    // with a single branch to endpoints.
    let mut degree = vec![0usize; graph.nodes.len()];
    for b in &branches {
        degree[b.nodes.0] += 1;
        degree[b.nodes.1] += 1;
    }
    let mut new_id = vec![usize::MAX; graph.nodes.len()];
    let mut nodes = Vec::new();
    for node in &graph.nodes {
        if degree[node.id] == 0 {
            continue;
        }
        new_id[node.id] = nodes.len();
        nodes.push(VesselNode {
            id: nodes.len(),
            position: node.position,
            kind: if degree[node.id] == 1 {
                NodeKind::Endpoint
            } else {
                node.kind
            },
        });
    }
    let branches = branches
        .into_iter()
        .enumerate()
        .map(|(id, b)| VesselBranch {
            id,
            nodes: (new_id[b.nodes.0], new_id[b.nodes.1]),
            path: b.path,
            length: b.length,
        })
        .collect();
    VesselGraph { nodes, branches }
}

/// Skeletonize a vessel mask and extract its graph. Split junctions a
/// few pixels apart are contracted; with `prune_spurs` set, branches
/// shorter than `SPUR_LENGTH` that end at a free endpoint are removed
/// and the chains they interrupted are spliced back together.
pub fn analyze(mask: &BinaryMask, prune_spurs: bool) -> Result<VesselGraph> {
    let skeleton = skeletonize(mask);
    let mut graph = contract_junction_links(extract_graph(&skeleton)?);
    if prune_spurs {
        // A removed spur can expose another (a two-pronged tip loses
        // one prong first); iterate to the fixpoint.
        loop {
            let before = graph.branches.len();
            graph = prune_spur_branches(graph);
            if graph.branches.len() == before {
                break;
            }
        }
    }
    Ok(graph)
}

/// Audit dump: one CSV table of nodes (id, x, y, kind) and one of
/// branches (id, node ids, length).
pub fn write_graph_csv(
    graph: &VesselGraph,
    nodes_out: &mut dyn Write,
    branches_out: &mut dyn Write,
) -> io::Result<()> {
    writeln!(nodes_out, "node_id,x,y,kind")?;
    for n in &graph.nodes {
        let kind = match n.kind {
            NodeKind::Endpoint => "endpoint",
            NodeKind::Junction => "junction",
        };
        writeln!(nodes_out, "{},{},{},{}", n.id, n.position.x, n.position.y, kind)?;
    }
    writeln!(branches_out, "branch_id,node_a,node_b,length")?;
    for b in &graph.branches {
        writeln!(
            branches_out,
            "{},{},{},{}",
            b.id, b.nodes.0, b.nodes.1, b.length
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mask_from(coords: &[(usize, usize)], w: usize, h: usize) -> BinaryMask {
        let mut m = BinaryMask::new(w, h);
        for &(x, y) in coords {
            m.set(x, y, true);
        }
        m
    }

    #[test]
    fn thinning_reduces_bar_to_line() {
        // 5-px-tall horizontal bar.
        let mut m = BinaryMask::new(40, 15);
        for y in 5..10 {
            for x in 3..33 {
                m.set(x, y, true);
            }
        }
        let s = skeletonize(&m);
        // Every column in the interior keeps exactly one pixel.
        for x in 8..28 {
            let col = (0..15).filter(|&y| s.get(x, y)).count();
            assert_eq!(col, 1, "column {x} has {col} pixels");
        }
        for (x, y) in s.iter_on() {
            assert!(m.get(x, y), "skeleton escaped the input support");
        }
    }

    #[test]
    fn thinning_fixed_points() {
        let line = mask_from(&(5..16).map(|x| (x, 4)).collect::<Vec<_>>(), 24, 9);
        assert_eq!(skeletonize(&line), line);

        let empty = BinaryMask::new(10, 10);
        assert_eq!(skeletonize(&empty), empty);
    }

    #[test]
    fn straight_line_graph() {
        let line = mask_from(&(5..16).map(|x| (x, 4)).collect::<Vec<_>>(), 24, 9);
        let g = extract_graph(&line).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.branches.len(), 1);
        assert_abs_diff_eq!(g.branches[0].length, 10.0, epsilon = 1e-12);
        assert!(g.nodes.iter().all(|n| n.kind == NodeKind::Endpoint));
    }

    #[test]
    fn diagonal_line_length() {
        let diag = mask_from(&(0..11).map(|i| (i + 2, i + 2)).collect::<Vec<_>>(), 16, 16);
        let g = extract_graph(&diag).unwrap();
        assert_eq!(g.branches.len(), 1);
        assert_abs_diff_eq!(g.branches[0].length, 10.0 * SQRT2, epsilon = 1e-12);
    }

    #[test]
    fn plus_sign_graph() {
        // Two crossing 21-px lines.
        let mut coords = Vec::new();
        for i in 0..21 {
            coords.push((i + 2, 12));
            coords.push((12, i + 2));
        }
        coords.dedup();
        let m = mask_from(&coords, 26, 26);
        let g = extract_graph(&m).unwrap();
        assert_eq!(g.nodes.len(), 5);
        assert_eq!(g.branches.len(), 4);
        let total = g.metrics().total_length;
        assert!((total - 40.0).abs() <= 2.0, "total length {total}");
        let junctions = g
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Junction)
            .count();
        assert_eq!(junctions, 1);
    }

    #[test]
    fn empty_graph_metrics() {
        let g = extract_graph(&BinaryMask::new(8, 8)).unwrap();
        let m = g.metrics();
        assert_eq!((m.nodes, m.branches), (0, 0));
        assert_eq!(m.total_length, 0.0);
    }

    #[test]
    fn rejects_thick_input() {
        let mut m = BinaryMask::new(8, 8);
        for y in 2..4 {
            for x in 2..4 {
                m.set(x, y, true);
            }
        }
        assert!(matches!(
            extract_graph(&m),
            Err(CoreError::NotSkeleton { .. })
        ));
    }

    #[test]
    fn isolated_cycle_is_single_branch() {
        // An 8-connected diamond ring.
        let coords = [
            (5, 3),
            (6, 4),
            (7, 5),
            (6, 6),
            (5, 7),
            (4, 6),
            (3, 5),
            (4, 4),
        ];
        let m = mask_from(&coords, 12, 12);
        let g = extract_graph(&m).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.branches.len(), 1);
        assert_eq!(g.branches[0].nodes.0, g.branches[0].nodes.1);
        assert_abs_diff_eq!(g.branches[0].length, 8.0 * SQRT2, epsilon = 1e-12);
    }

    #[test]
    fn euler_relation_on_trees() {
        // A fork: stem plus two arms, one component.
        let mut coords: Vec<(usize, usize)> = (2..12).map(|x| (x, 10)).collect();
        coords.extend((0..6).map(|i| (12 + i, 10 - i)));
        coords.extend((0..6).map(|i| (12 + i, 10 + i)));
        let m = mask_from(&coords, 24, 24);
        let g = extract_graph(&m).unwrap();
        assert_eq!(g.branches.len(), g.nodes.len() - g.components());

        // Adding a disjoint segment adds 2 nodes and 1 branch.
        let mut coords2 = coords.clone();
        coords2.extend((2..9).map(|x| (x, 20)));
        let g2 = extract_graph(&mask_from(&coords2, 24, 24)).unwrap();
        assert_eq!(g2.nodes.len(), g.nodes.len() + 2);
        assert_eq!(g2.branches.len(), g.branches.len() + 1);
    }

    #[test]
    fn length_bounds_vs_pixel_count() {
        let mut coords: Vec<(usize, usize)> = (2..22).map(|x| (x, 10)).collect();
        coords.extend((0..8).map(|i| (8 + i, 10 - i)));
        let m = mask_from(&coords, 30, 30);
        let g = extract_graph(&m).unwrap();
        let total = g.metrics().total_length;
        let px = m.count() as f64;
        let nodes = g.nodes.len() as f64;
        assert!(total >= px - nodes, "total {total}, px {px}");
        assert!(total <= SQRT2 * px, "total {total}, px {px}");
    }

    #[test]
    fn metrics_invariant_under_flip_and_quarter_rotation() {
        let mut coords: Vec<(usize, usize)> = (5..25).map(|x| (x, 15)).collect();
        coords.extend((0..7).map(|i| (15 + i, 15 - i)));
        let m = mask_from(&coords, 31, 31);
        let base = extract_graph(&m).unwrap().metrics();

        let flipped = extract_graph(&m.hflip()).unwrap().metrics();
        assert_eq!(base.nodes, flipped.nodes);
        assert_eq!(base.branches, flipped.branches);
        assert_abs_diff_eq!(base.total_length, flipped.total_length, epsilon = 1e-9);

        let turned = m.rotate_about(Point::new(15.0, 15.0), 90.0);
        let rot = extract_graph(&turned).unwrap().metrics();
        assert_eq!(base.nodes, rot.nodes);
        assert_eq!(base.branches, rot.branches);
        assert_abs_diff_eq!(base.total_length, rot.total_length, epsilon = 1e-9);
    }

    #[test]
    fn spur_pruning_removes_short_twigs() {
        // Long horizontal line with a 2-px spur hanging off the middle.
        let mut coords: Vec<(usize, usize)> = (2..22).map(|x| (x, 10)).collect();
        coords.push((12, 9));
        coords.push((12, 8));
        let m = mask_from(&coords, 26, 20);

        let raw = analyze(&m, false).unwrap().metrics();
        assert_eq!(raw.nodes, 4); // 3 endpoints + 1 junction
        assert_eq!(raw.branches, 3);

        let pruned = analyze(&m, true).unwrap().metrics();
        assert_eq!(pruned.nodes, 2);
        assert_eq!(pruned.branches, 1);
        assert_abs_diff_eq!(pruned.total_length, 19.0, epsilon = 1e-9);
    }
}
