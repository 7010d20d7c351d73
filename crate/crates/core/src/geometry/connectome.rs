//! Weighted connectome graph and its CSV format:
//!
//! ```text
//! # FKGRAPH 1, k=<float>
//! node,region_id,x,y,z,volume
//! edge,i,j,n_ij,l_ij
//! ```
//!
//! Edge endpoints are 0-based indices into the node rows, in file order.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{Point, RegionId};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub region: RegionId,
    pub position: Point,
    /// |Omega_i| in mm^3.
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Number of tracts joining the two regions.
    pub tracts: f64,
    /// Mean tract length, mm.
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct Connectome {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    scale: f64,
    weights: Vec<f64>,
    laplacian: CsrMatrix,
}

impl Connectome {
    /// Builds the graph with weights `w_ij = k n_ij / l_ij` and Laplacian `L = K - A`.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, scale: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::param("nodes", "connectome has no nodes"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("k", format!("must be > 0, got {scale}")));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !(n.volume > 0.0) {
                return Err(Error::param(
                    "volume",
                    format!("node {i} has volume {}", n.volume),
                ));
            }
        }
        let m = nodes.len();
        let mut seen = HashSet::new();
        let mut weights = Vec::with_capacity(edges.len());
        for e in &edges {
            if e.i >= m || e.j >= m {
                return Err(Error::param(
                    "edge",
                    format!("({}, {}) references a missing node", e.i, e.j),
                ));
            }
            if e.i == e.j {
                return Err(Error::param("edge", format!("self-edge at node {}", e.i)));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::param(
                    "edge",
                    format!("duplicate edge ({}, {})", e.i, e.j),
                ));
            }
            if !(e.length > 0.0) {
                return Err(Error::param(
                    "l_ij",
                    format!("edge ({}, {}) has length {}", e.i, e.j, e.length),
                ));
            }
            if !(e.tracts >= 0.0) {
                return Err(Error::param(
                    "n_ij",
                    format!("edge ({}, {}) has tract count {}", e.i, e.j, e.tracts),
                ));
            }
            weights.push(scale * e.tracts / e.length);
        }

        let components = components(m, &edges);
        if components.len() > 1 {
            return Err(Error::Disconnected { components });
        }

        let mut b = TripletBuilder::with_capacity(m, m, m + 4 * edges.len());
        let mut degree = vec![0.0; m];
        for (e, w) in edges.iter().zip(&weights) {
            b.push(e.i, e.j, -w);
            b.push(e.j, e.i, -w);
            degree[e.i] += w;
            degree[e.j] += w;
        }
        for (i, d) in degree.iter().enumerate() {
            b.push(i, i, *d);
        }
        Ok(Self {
            nodes,
            edges,
            scale,
            weights,
            laplacian: b.build(),
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Edge weights in the order of `edges()`, 1/year.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    pub fn region_ids(&self) -> Vec<RegionId> {
        let mut ids: Vec<RegionId> = self.nodes.iter().map(|n| n.region).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn region_measures(&self) -> BTreeMap<RegionId, f64> {
        let mut out = BTreeMap::new();
        for n in &self.nodes {
            *out.entry(n.region).or_insert(0.0) += n.volume;
        }
        out
    }

    /// Same graph with every edge weight rescaled by a new `k`.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), self.edges.clone(), scale)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut scale = None;
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(h) = rest.strip_prefix("FKGRAPH") {
                    let mut parts = h.split(',').map(str::trim);
                    match parts.next() {
                        Some("1") => {}
                        v => return Err(err(line, format!("unsupported graph version {v:?}"))),
                    }
                    for p in parts {
                        if let Some(k) = p.strip_prefix("k=") {
                            scale = Some(
                                k.trim()
                                    .parse::<f64>()
                                    .map_err(|_| err(line, format!("cannot parse k `{k}`")))?,
                            );
                        }
                    }
                } else if line == 1 {
                    return Err(err(line, "expected `# FKGRAPH 1, k=<float>` header".into()));
                }
                continue;
            }
            if line == 1 {
                return Err(err(line, "expected `# FKGRAPH 1, k=<float>` header".into()));
            }
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let num = |t: &str| -> Result<f64> {
                t.parse::<f64>()
                    .map_err(|_| err(line, format!("cannot parse `{t}`")))
            };
            let idx = |t: &str| -> Result<usize> {
                t.parse::<usize>()
                    .map_err(|_| err(line, format!("cannot parse index `{t}`")))
            };
            match f[0] {
                "node" if f.len() == 6 && f[1] == "region_id" => {}
                "edge" if f.len() == 5 && f[1] == "i" => {}
                "node" if f.len() == 6 => {
                    let region = f[1]
                        .parse::<RegionId>()
                        .map_err(|_| err(line, format!("cannot parse region id `{}`", f[1])))?;
                    nodes.push(Node {
                        region,
                        position: [num(f[2])?, num(f[3])?, num(f[4])?],
                        volume: num(f[5])?,
                    });
                }
                "edge" if f.len() == 5 => edges.push(Edge {
                    i: idx(f[1])?,
                    j: idx(f[2])?,
                    tracts: num(f[3])?,
                    length: num(f[4])?,
                }),
                _ => return Err(err(line, format!("unrecognized row `{l}`"))),
            }
        }
        let scale =
            scale.ok_or_else(|| err(1, "missing `# FKGRAPH 1, k=<float>` header".into()))?;
        Self::new(nodes, edges, scale)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# FKGRAPH 1, k={:?}", self.scale).unwrap();
        writeln!(out, "node,region_id,x,y,z,volume").unwrap();
        for n in &self.nodes {
            writeln!(
                out,
                "node,{},{:?},{:?},{:?},{:?}",
                n.region, n.position[0], n.position[1], n.position[2], n.volume
            )
            .unwrap();
        }
        writeln!(out, "edge,i,j,n_ij,l_ij").unwrap();
        for e in &self.edges {
            writeln!(out, "edge,{},{},{:?},{:?}", e.i, e.j, e.tracts, e.length).unwrap();
        }
        out
    }

    /// Path graph over consecutive region ids `first_id..first_id + count`,
    /// one node per region placed at slab centres along x, optionally with
    /// extra `(i, j)` edges.
    pub fn chain(
        count: usize,
        spacing: f64,
        volume: f64,
        tracts: f64,
        first_id: RegionId,
        shortcuts: &[(usize, usize)],
        scale: f64,
    ) -> Result<Self> {
        let nodes = (0..count)
            .map(|i| Node {
                region: first_id + i as RegionId,
                position: [(i as f64 + 0.5) * spacing, 0.0, 0.0],
                volume,
            })
            .collect();
        let mut edges: Vec<Edge> = (1..count)
            .map(|i| Edge {
                i: i - 1,
                j: i,
                tracts,
                length: spacing,
            })
            .collect();
        for &(i, j) in shortcuts {
            edges.push(Edge {
                i,
                j,
                tracts,
                length: spacing * (i.abs_diff(j)) as f64,
            });
        }
        Self::new(nodes, edges, scale)
    }
}

fn components(m: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m];
    for e in edges {
        adj[e.i].push(e.j);
        adj[e.j].push(e.i);
    }
    let mut comp = vec![usize::MAX; m];
    let mut out = Vec::new();
    for start in 0..m {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(region: RegionId) -> Node {
        Node {
            region,
            position: [0.0; 3],
            volume: 1.0,
        }
    }

    fn edge(i: usize, j: usize, tracts: f64, length: f64) -> Edge {
        Edge {
            i,
            j,
            tracts,
            length,
        }
    }

    #[test]
    fn weight_is_scale_times_tracts_over_length() {
        let g = Connectome::new(vec![node(1), node(2)], vec![edge(0, 1, 12.0, 4.0)], 1.0).unwrap();
        assert_eq!(g.weights(), &[3.0]);
        assert_eq!(g.laplacian().get(0, 1), -3.0);
        assert_eq!(g.laplacian().get(1, 1), 3.0);
    }

    #[test]
    fn triangle_laplacian() {
        let g = Connectome::new(
            vec![node(1), node(2), node(3)],
            vec![
                edge(0, 1, 1.0, 1.0),
                edge(1, 2, 1.0, 1.0),
                edge(0, 2, 1.0, 1.0),
            ],
            1.0,
        )
        .unwrap();
        let l = g.laplacian();
        for i in 0..3 {
            assert_eq!(l.get(i, i), 2.0);
            for j in 0..3 {
                if i != j {
                    assert_eq!(l.get(i, j), -1.0);
                }
            }
            assert_eq!(l.row(i).map(|(_, v)| v).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn disconnected_graph_names_components() {
        let err = Connectome::new(
            vec![node(1), node(2), node(3), node(4)],
            vec![edge(0, 1, 1.0, 1.0), edge(2, 3, 1.0, 1.0)],
            1.0,
        )
        .unwrap_err();
        match err {
            Error::Disconnected { components } => {
                assert_eq!(components, vec![vec![0, 1], vec![2, 3]]);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rejects_nonpositive_length_and_self_edges() {
        assert!(Connectome::new(vec![node(1), node(2)], vec![edge(0, 1, 1.0, 0.0)], 1.0).is_err());
        assert!(Connectome::new(vec![node(1)], vec![edge(0, 0, 1.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = Connectome::chain(4, 2.5, 3.0, 10.0, 1, &[(0, 3)], 0.5).unwrap();
        let text = g.to_csv();
        let h = Connectome::parse(&text, Path::new("g.csv")).unwrap();
        assert_eq!(h.nodes(), g.nodes());
        assert_eq!(h.edges(), g.edges());
        assert_eq!(h.weights(), g.weights());
        assert_eq!(h.to_csv(), text);
    }

    #[test]
    fn parse_reports_bad_rows() {
        let text = "# FKGRAPH 1, k=1\nnode,region_id,x,y,z,volume\nnode,1,0,0,0,abc\n";
        match Connectome::parse(text, Path::new("g.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
