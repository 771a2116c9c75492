use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envmodel::generate::GeneratorParams;
use crate::error::{Result, SidError};

/// Tolerance for the unit-norm check on stored (9-significant-digit) features.
pub const FEATURE_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Unseen,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Unseen => "unseen",
        })
    }
}

impl FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "unseen" => Ok(SplitTag::Unseen),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// One directional view of a panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewObservation {
    pub feature: Vec<f64>,
    /// Relative heading in radians, `2πi/K` for view `i`.
    pub heading: f64,
    pub attributes: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    pub id: String,
    pub position: [f64; 3],
    pub room_id: String,
    pub panorama: Vec<ViewObservation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub id: String,
    pub room_type: String,
    pub member_viewpoints: BTreeSet<String>,
}

/// Seed and parameters a generated graph came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Heading of view `i` in a `k`-view panorama.
pub fn heading(i: usize, k: usize) -> f64 {
    2.0 * PI * i as f64 / k as f64
}

pub(crate) fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Undirected navigation graph. Viewpoints and rooms are kept sorted by id, so
/// viewpoint index order coincides with lexicographic id order.
#[derive(Debug, Clone)]
pub struct EnvironmentGraph {
    env_id: String,
    split: SplitTag,
    k: usize,
    feature_dim: usize,
    viewpoints: Vec<Viewpoint>,
    rooms: Vec<Room>,
    edges: Vec<Edge>,
    provenance: Option<Provenance>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    room_of: Vec<usize>,
    // all-pairs geodesic distances, row-major
    geodesic: Vec<f64>,
}

impl PartialEq for EnvironmentGraph {
    fn eq(&self, other: &Self) -> bool {
        self.env_id == other.env_id
            && self.split == other.split
            && self.k == other.k
            && self.feature_dim == other.feature_dim
            && self.viewpoints == other.viewpoints
            && self.rooms == other.rooms
            && self.edges == other.edges
            && self.provenance == other.provenance
    }
}

impl EnvironmentGraph {
    /// Builds a graph from parts, validating every structural invariant.
    /// Edge weights are derived from endpoint positions.
    pub fn new(
        env_id: impl Into<String>,
        split: SplitTag,
        k: usize,
        feature_dim: usize,
        mut viewpoints: Vec<Viewpoint>,
        mut rooms: Vec<Room>,
        edge_pairs: &[(String, String)],
        provenance: Option<Provenance>,
    ) -> Result<Self> {
        let env_id = env_id.into();
        if k < 4 || k % 2 != 0 {
            return Err(SidError::OddPanorama(k));
        }
        if feature_dim == 0 {
            return Err(SidError::InvalidGraph("feature dimension must be positive".into()));
        }
        if viewpoints.is_empty() {
            return Err(SidError::InvalidGraph("graph has no viewpoints".into()));
        }
        viewpoints.sort_by(|a, b| a.id.cmp(&b.id));
        rooms.sort_by(|a, b| a.id.cmp(&b.id));

        let mut index = HashMap::with_capacity(viewpoints.len());
        for (i, vp) in viewpoints.iter().enumerate() {
            if index.insert(vp.id.clone(), i).is_some() {
                return Err(SidError::InvalidGraph(format!("duplicate viewpoint `{}`", vp.id)));
            }
        }
        let room_index: HashMap<&str, usize> =
            rooms.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
        if room_index.len() != rooms.len() {
            return Err(SidError::InvalidGraph("duplicate room id".into()));
        }

        let mut room_of = vec![usize::MAX; viewpoints.len()];
        for vp in &viewpoints {
            validate_viewpoint(vp, k, feature_dim)?;
            let r = *room_index.get(vp.room_id.as_str()).ok_or_else(|| {
                SidError::InvalidGraph(format!("viewpoint `{}` names unknown room `{}`", vp.id, vp.room_id))
            })?;
            room_of[index[&vp.id]] = r;
        }
        for (ri, room) in rooms.iter().enumerate() {
            if room.member_viewpoints.is_empty() {
                return Err(SidError::InvalidGraph(format!("room `{}` is empty", room.id)));
            }
            for m in &room.member_viewpoints {
                let vi = *index.get(m).ok_or_else(|| SidError::UnknownViewpoint(m.clone()))?;
                if room_of[vi] != ri {
                    return Err(SidError::InvalidGraph(format!(
                        "room `{}` lists `{m}` which belongs elsewhere",
                        room.id
                    )));
                }
            }
        }
        let members: usize = rooms.iter().map(|r| r.member_viewpoints.len()).sum();
        if members != viewpoints.len() {
            return Err(SidError::InvalidGraph("rooms do not partition the viewpoints".into()));
        }

        let n = viewpoints.len();
        let mut seen = BTreeSet::new();
        let mut edges = Vec::with_capacity(edge_pairs.len());
        for (x, y) in edge_pairs {
            let xi = *index.get(x).ok_or_else(|| SidError::UnknownViewpoint(x.clone()))?;
            let yi = *index.get(y).ok_or_else(|| SidError::UnknownViewpoint(y.clone()))?;
            if xi == yi {
                return Err(SidError::InvalidGraph(format!("self-loop at `{x}`")));
            }
            let (a, b) = if xi < yi { (xi, yi) } else { (yi, xi) };
            if !seen.insert((a, b)) {
                return Err(SidError::InvalidGraph(format!("duplicate edge `{x}`-`{y}`")));
            }
            let weight = euclidean(&viewpoints[a].position, &viewpoints[b].position);
            if !(weight > 0.0) {
                return Err(SidError::InvalidGraph(format!("zero-length edge `{x}`-`{y}`")));
            }
            edges.push(Edge { a, b, weight });
        }
        edges.sort_by(|e, f| (e.a, e.b).cmp(&(f.a, f.b)));

        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by(|p, q| p.0.cmp(&q.0));
        }

        let mut graph = Self {
            env_id,
            split,
            k,
            feature_dim,
            viewpoints,
            rooms,
            edges,
            provenance,
            index,
            adjacency,
            room_of,
            geodesic: Vec::new(),
        };
        graph.geodesic = crate::envmodel::paths::all_pairs(&graph);
        if graph.geodesic.iter().any(|d| !d.is_finite()) {
            return Err(SidError::InvalidGraph(format!("graph `{}` is not connected", graph.env_id)));
        }
        Ok(graph)
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    /// Relabels the split tag; used when the same generated layout serves a different role.
    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn viewpoint(&self, idx: usize) -> &Viewpoint {
        &self.viewpoints[idx]
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| SidError::UnknownViewpoint(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.viewpoints[idx].id
    }

    /// Neighbors of `idx` as `(index, weight)`, ascending by index.
    pub fn neighbors(&self, idx: usize) -> &[(usize, f64)] {
        &self.adjacency[idx]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|(_, w)| *w)
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.edge_weight(a, b).is_some()
    }

    pub fn room_of(&self, idx: usize) -> usize {
        self.room_of[idx]
    }

    pub fn room(&self, room_idx: usize) -> &Room {
        &self.rooms[room_idx]
    }

    /// Room indices that share a door with `room_idx`, ascending.
    pub fn neighbor_rooms(&self, room_idx: usize) -> Vec<usize> {
        let mut out = BTreeSet::new();
        for e in &self.edges {
            let (ra, rb) = (self.room_of[e.a], self.room_of[e.b]);
            if ra != rb {
                if ra == room_idx {
                    out.insert(rb);
                } else if rb == room_idx {
                    out.insert(ra);
                }
            }
        }
        out.into_iter().collect()
    }

    /// Precomputed geodesic distance between viewpoint indices (meters).
    pub fn geodesic(&self, a: usize, b: usize) -> f64 {
        self.geodesic[a * self.viewpoints.len() + b]
    }
}

fn validate_viewpoint(vp: &Viewpoint, k: usize, feature_dim: usize) -> Result<()> {
    let bad = |msg: String| Err(SidError::InvalidGraph(format!("viewpoint `{}`: {msg}", vp.id)));
    if vp.position.iter().any(|c| !c.is_finite()) {
        return bad("non-finite position".into());
    }
    if vp.panorama.len() != k {
        return bad(format!("panorama has {} views, expected {k}", vp.panorama.len()));
    }
    for (i, view) in vp.panorama.iter().enumerate() {
        if view.heading != heading(i, k) {
            return bad(format!("view {i} heading is not 2*pi*{i}/{k}"));
        }
        if view.feature.len() != feature_dim {
            return bad(format!("view {i} feature has dimension {}", view.feature.len()));
        }
        if view.feature.iter().any(|x| !x.is_finite()) {
            return bad(format!("view {i} feature is not finite"));
        }
        let norm = view.feature.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > FEATURE_NORM_TOLERANCE {
            return bad(format!("view {i} feature norm {norm} is not 1"));
        }
        if view.attributes.is_empty() {
            return bad(format!("view {i} has no attributes"));
        }
    }
    Ok(())
}
