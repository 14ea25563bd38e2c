//! Synthetic structural-role benchmarks.
//!
//! Two families: a cycle basis with shapes attached by bridge edges
//! (labels are the shapes' structural roles, 17 in total including the
//! cycle role), and Barabási–Albert graphs with shapes planted over
//! existing nodes (labels come from spectral clustering of graphlet
//! orbit vectors, 10 clusters).

pub mod graphlets;
pub mod spectral;

pub use graphlets::{graphlet_vector, orbit_counts, ORBITS};
pub use spectral::{kmeans, spectral_cluster};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Shapes attachable to the synthetic benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeKind {
    House,
    Star,
    Diamond,
    Fan,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::House,
        ShapeKind::Star,
        ShapeKind::Diamond,
        ShapeKind::Fan,
    ];
}

struct ShapeTemplate {
    nodes: usize,
    edges: &'static [(usize, usize)],
    /// Structural-role label of each template node. Roles refine the
    /// orbit partition of the shape with its attachment node marked.
    roles: &'static [u32],
    /// Node that receives the bridge edge in the cycle benchmark.
    attachment: usize,
}

/// House: 4-cycle a-b-c-d with a roof node adjacent to a and b.
/// Attachment at base node c.
const HOUSE: ShapeTemplate = ShapeTemplate {
    nodes: 5,
    edges: &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (1, 4)],
    roles: &[2, 3, 4, 5, 1],
    attachment: 2,
};

/// Star: center with five leaves; attachment at one leaf.
const STAR: ShapeTemplate = ShapeTemplate {
    nodes: 6,
    edges: &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
    roles: &[6, 7, 8, 8, 8, 8],
    attachment: 1,
};

/// Diamond: 4-clique minus one edge; attachment at a degree-3 node.
const DIAMOND: ShapeTemplate = ShapeTemplate {
    nodes: 4,
    edges: &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)],
    roles: &[9, 10, 11, 11],
    attachment: 0,
};

/// Fan: a center adjacent to every node of a 4-path; attachment at one
/// path end.
const FAN: ShapeTemplate = ShapeTemplate {
    nodes: 5,
    edges: &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (2, 3), (3, 4)],
    roles: &[12, 13, 14, 15, 16],
    attachment: 1,
};

fn template(kind: ShapeKind) -> &'static ShapeTemplate {
    match kind {
        ShapeKind::House => &HOUSE,
        ShapeKind::Star => &STAR,
        ShapeKind::Diamond => &DIAMOND,
        ShapeKind::Fan => &FAN,
    }
}

/// Cycle-benchmark label count: the cycle role plus 16 shape roles.
pub const CYCLE_LABEL_COUNT: usize = 17;
/// BA-benchmark cluster count.
pub const BA_LABEL_COUNT: usize = 10;
/// BA preferential-attachment parameter.
pub const BA_ATTACHMENT: usize = 3;

/// Human-readable names for the cycle benchmark's role labels.
pub fn cycle_role_names() -> Vec<String> {
    [
        "cycle",
        "house-roof",
        "house-roof-adj-far",
        "house-roof-adj-attach",
        "house-base-attach",
        "house-base-free",
        "star-center",
        "star-leaf-attach",
        "star-leaf",
        "diamond-hub-attach",
        "diamond-hub-free",
        "diamond-rim",
        "fan-center",
        "fan-end-attach",
        "fan-inner-near",
        "fan-inner-far",
        "fan-end-far",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Instances of each shape kind to generate.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ShapeCounts {
    pub house: usize,
    pub star: usize,
    pub diamond: usize,
    pub fan: usize,
}

impl ShapeCounts {
    pub fn uniform(count: usize) -> Self {
        Self {
            house: count,
            star: count,
            diamond: count,
            fan: count,
        }
    }

    pub fn get(&self, kind: ShapeKind) -> usize {
        match kind {
            ShapeKind::House => self.house,
            ShapeKind::Star => self.star,
            ShapeKind::Diamond => self.diamond,
            ShapeKind::Fan => self.fan,
        }
    }
}

/// Parameters for one synthetic graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub base_size: usize,
    pub shape_counts: ShapeCounts,
    pub noise_edges: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Single-graph cycle benchmark: 500 cycle nodes, 100 shapes per
    /// kind, 1000 noise edges.
    pub fn cycle_single(seed: u64) -> Self {
        Self {
            base_size: 500,
            shape_counts: ShapeCounts::uniform(100),
            noise_edges: 1000,
            seed,
        }
    }

    /// Single-graph BA benchmark: 200 nodes, a moderate number of
    /// planted shapes, no noise edges.
    pub fn ba_single(seed: u64) -> Self {
        Self {
            base_size: 200,
            shape_counts: ShapeCounts::uniform(10),
            noise_edges: 0,
            seed,
        }
    }
}

/// Parameters for a multi-graph benchmark with per-graph shape counts
/// drawn uniformly from `count_range`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiSpec {
    pub graphs: usize,
    pub base_size: usize,
    pub count_range: (usize, usize),
    pub noise_edges: usize,
    pub seed: u64,
}

impl MultiSpec {
    /// Ten graphs, 50-node cycle basis, 1..=15 shapes per kind, 100
    /// noise edges each.
    pub fn cycle_multi(seed: u64) -> Self {
        Self {
            graphs: 10,
            base_size: 50,
            count_range: (1, 15),
            noise_edges: 100,
            seed,
        }
    }

    /// Ten 200-node BA graphs, 1..=15 planted shapes per kind.
    pub fn ba_multi(seed: u64) -> Self {
        Self {
            graphs: 10,
            base_size: 200,
            count_range: (1, 15),
            noise_edges: 0,
            seed,
        }
    }
}

/// Where a shape instance landed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Placement {
    pub shape: ShapeKind,
    pub nodes: Vec<u32>,
    pub attachment: Option<u32>,
    pub bridge_to: Option<u32>,
}

/// Generation record: the exact role partition, shape placements and
/// seeds needed to audit a generated graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: String,
    pub seed: u64,
    pub base_size: usize,
    pub role_names: Vec<String>,
    pub placements: Vec<Placement>,
    pub noise_edge_count: usize,
    pub pre_plant_edge_count: Option<usize>,
}

fn add_noise_edges(
    node_count: usize,
    edges: &mut Vec<(u32, u32)>,
    existing: &mut HashSet<(u32, u32)>,
    count: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let mut attempts = 0usize;
    let mut added = 0usize;
    while added < count {
        attempts += 1;
        if attempts > 100 * count + 10_000 {
            return Err(Error::Config(
                "could not place noise edges: graph too dense".into(),
            ));
        }
        let u = rng.gen_range(0..node_count as u32);
        let v = rng.gen_range(0..node_count as u32);
        if u == v {
            continue;
        }
        let key = (u.min(v), u.max(v));
        if existing.insert(key) {
            edges.push(key);
            added += 1;
        }
    }
    Ok(())
}

/// Cycle benchmark: a cycle basis, shape instances attached by one
/// bridge edge each, noise edges, and structural-role labels.
pub fn gen_cycle_dataset(spec: &SyntheticSpec) -> Result<(Graph, DatasetMeta)> {
    if spec.base_size < 3 {
        return Err(Error::Config("cycle base needs >= 3 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut existing = HashSet::new();
    let mut labels: Vec<Option<u32>> = vec![Some(0); spec.base_size];
    for i in 0..spec.base_size as u32 {
        let j = (i + 1) % spec.base_size as u32;
        let key = (i.min(j), i.max(j));
        existing.insert(key);
        edges.push(key);
    }
    let mut placements = Vec::new();
    let mut next = spec.base_size as u32;
    for kind in ShapeKind::ALL {
        let tpl = template(kind);
        for _ in 0..spec.shape_counts.get(kind) {
            let base = next;
            next += tpl.nodes as u32;
            for &(a, b) in tpl.edges {
                let key = (base + a.min(b) as u32, base + a.max(b) as u32);
                existing.insert(key);
                edges.push(key);
            }
            labels.extend(tpl.roles.iter().map(|&r| Some(r)));
            let cycle_node = rng.gen_range(0..spec.base_size as u32);
            let attach = base + tpl.attachment as u32;
            let key = (cycle_node.min(attach), cycle_node.max(attach));
            existing.insert(key);
            edges.push(key);
            placements.push(Placement {
                shape: kind,
                nodes: (base..next).collect(),
                attachment: Some(attach),
                bridge_to: Some(cycle_node),
            });
        }
    }
    let node_count = next as usize;
    add_noise_edges(node_count, &mut edges, &mut existing, spec.noise_edges, &mut rng)?;
    let graph = Graph::from_edges(node_count, &edges)?.with_labels(labels)?;
    let meta = DatasetMeta {
        kind: "cycle".into(),
        seed: spec.seed,
        base_size: spec.base_size,
        role_names: cycle_role_names(),
        placements,
        noise_edge_count: spec.noise_edges,
        pre_plant_edge_count: None,
    };
    Ok((graph, meta))
}

/// Plain Barabási–Albert graph: a (m+1)-clique seed, then each new node
/// attaches to `m` distinct existing nodes with probability
/// proportional to degree. Exactly `C(m+1,2) + (n-m-1)*m` edges.
pub fn ba_graph(node_count: usize, m: usize, rng: &mut impl Rng) -> Result<Graph> {
    if m == 0 || node_count < m + 1 {
        return Err(Error::Config(format!(
            "BA graph needs at least {} nodes for m={m}",
            m + 1
        )));
    }
    let mut edges = Vec::new();
    // degree-weighted slot list: node i appears degree(i) times
    let mut slots: Vec<u32> = Vec::new();
    for a in 0..(m + 1) as u32 {
        for b in (a + 1)..(m + 1) as u32 {
            edges.push((a, b));
            slots.push(a);
            slots.push(b);
        }
    }
    for new in (m + 1)..node_count {
        let mut targets: Vec<u32> = Vec::with_capacity(m);
        while targets.len() < m {
            let pick = slots[rng.gen_range(0..slots.len())];
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
        for &t in &targets {
            edges.push((t, new as u32));
            slots.push(t);
            slots.push(new as u32);
        }
    }
    Graph::from_edges(node_count, &edges)
}

/// BA structure with shapes planted over sampled existing nodes.
fn ba_structure(
    spec: &SyntheticSpec,
    rng: &mut impl Rng,
) -> Result<(Vec<(u32, u32)>, Vec<Placement>, usize)> {
    if spec.base_size < BA_ATTACHMENT + 1 {
        return Err(Error::Config(format!(
            "BA base needs >= {} nodes",
            BA_ATTACHMENT + 1
        )));
    }
    let base = ba_graph(spec.base_size, BA_ATTACHMENT, rng)?;
    let pre_plant = base.edge_count();
    let mut edges = base.edges();
    let mut existing: HashSet<(u32, u32)> = edges.iter().copied().collect();
    let mut placements = Vec::new();
    for kind in ShapeKind::ALL {
        let tpl = template(kind);
        for _ in 0..spec.shape_counts.get(kind) {
            // sample distinct host nodes
            let mut hosts: Vec<u32> = Vec::with_capacity(tpl.nodes);
            while hosts.len() < tpl.nodes {
                let pick = rng.gen_range(0..spec.base_size as u32);
                if !hosts.contains(&pick) {
                    hosts.push(pick);
                }
            }
            for &(a, b) in tpl.edges {
                let (x, y) = (hosts[a], hosts[b]);
                let key = (x.min(y), x.max(y));
                if existing.insert(key) {
                    edges.push(key);
                }
            }
            placements.push(Placement {
                shape: kind,
                nodes: hosts,
                attachment: None,
                bridge_to: None,
            });
        }
    }
    add_noise_edges(
        spec.base_size,
        &mut edges,
        &mut existing,
        spec.noise_edges,
        rng,
    )?;
    Ok((edges, placements, pre_plant))
}

fn ba_meta(spec: &SyntheticSpec, placements: Vec<Placement>, pre_plant: usize) -> DatasetMeta {
    DatasetMeta {
        kind: "ba".into(),
        seed: spec.seed,
        base_size: spec.base_size,
        role_names: (0..BA_LABEL_COUNT).map(|c| format!("cluster-{c}")).collect(),
        placements,
        noise_edge_count: spec.noise_edges,
        pre_plant_edge_count: Some(pre_plant),
    }
}

/// Single-graph BA benchmark with labels from spectral clustering of
/// per-node graphlet orbit vectors.
pub fn gen_ba_dataset(spec: &SyntheticSpec) -> Result<(Graph, DatasetMeta)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (edges, placements, pre_plant) = ba_structure(spec, &mut rng)?;
    let graph = Graph::from_edges(spec.base_size, &edges)?;
    let counts = orbit_counts(&graph);
    let rows: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| c.iter().map(|&v| v as f64).collect())
        .collect();
    let vectors = Tensor::from_rows(&rows)?;
    let labels = spectral_cluster(&vectors, BA_LABEL_COUNT, &mut rng)?;
    let graph = graph.with_labels(labels.into_iter().map(Some).collect())?;
    Ok((graph, ba_meta(spec, placements, pre_plant)))
}

fn multi_specs(ms: &MultiSpec) -> Result<(Vec<SyntheticSpec>, ChaCha8Rng)> {
    if ms.count_range.0 > ms.count_range.1 {
        return Err(Error::Config("bad shape count range".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(ms.seed);
    let specs = (0..ms.graphs)
        .map(|_| {
            let counts = ShapeCounts {
                house: master.gen_range(ms.count_range.0..=ms.count_range.1),
                star: master.gen_range(ms.count_range.0..=ms.count_range.1),
                diamond: master.gen_range(ms.count_range.0..=ms.count_range.1),
                fan: master.gen_range(ms.count_range.0..=ms.count_range.1),
            };
            SyntheticSpec {
                base_size: ms.base_size,
                shape_counts: counts,
                noise_edges: ms.noise_edges,
                seed: master.gen(),
            }
        })
        .collect();
    Ok((specs, master))
}

/// Multi-graph cycle benchmark: per-graph shape counts drawn from the
/// configured range; role labels are consistent across graphs by
/// construction.
pub fn gen_cycle_multi(ms: &MultiSpec) -> Result<Vec<(Graph, DatasetMeta)>> {
    let (specs, _) = multi_specs(ms)?;
    specs.iter().map(gen_cycle_dataset).collect()
}

/// Multi-graph BA benchmark. Graphlet vectors of *all* graphs are
/// clustered jointly so that labels mean the same thing in every graph.
pub fn gen_ba_multi(ms: &MultiSpec) -> Result<Vec<(Graph, DatasetMeta)>> {
    let (specs, mut master) = multi_specs(ms)?;
    let mut structures = Vec::new();
    let mut all_rows: Vec<Vec<f64>> = Vec::new();
    for spec in &specs {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (edges, placements, pre_plant) = ba_structure(spec, &mut rng)?;
        let graph = Graph::from_edges(spec.base_size, &edges)?;
        for c in orbit_counts(&graph) {
            all_rows.push(c.iter().map(|&v| v as f64).collect());
        }
        structures.push((graph, ba_meta(spec, placements, pre_plant)));
    }
    let vectors = Tensor::from_rows(&all_rows)?;
    let labels = spectral_cluster(&vectors, BA_LABEL_COUNT, &mut master)?;
    let mut offset = 0;
    let mut out = Vec::with_capacity(structures.len());
    for (graph, meta) in structures {
        let n = graph.node_count();
        let slice: Vec<Option<u32>> = labels[offset..offset + n].iter().map(|&l| Some(l)).collect();
        offset += n;
        out.push((graph.with_labels(slice)?, meta));
    }
    Ok(out)
}
