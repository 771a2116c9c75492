//! Line-oriented text format for environment graphs.
//!
//! ```text
//! sid-environment 1
//! env_id env-7
//! split train
//! k 12
//! feature_dim 16
//! [provenance]
//! seed 7
//! params {...}
//! [rooms] 4
//! room_00 bedroom vp_00_00 vp_00_01
//! [viewpoints] 8
//! vp_00_00 room_00 <x> <y> <z>
//! view 0 bedroom,lamp,red <f_0> ... <f_d-1>
//! [edges] 9
//! vp_00_00 vp_00_01 <weight>
//! [end]
//! ```
//!
//! Floats carry 9 significant digits. Headings are implied by view index and
//! edge weights are recomputed from positions on load.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::envmodel::generate::GeneratorParams;
use crate::envmodel::graph::{heading, EnvironmentGraph, Provenance, Room, SplitTag, ViewObservation, Viewpoint};
use crate::error::{Result, SidError};

const MAGIC: &str = "sid-environment 1";

fn float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn serialize_environment(graph: &EnvironmentGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "env_id {}", graph.env_id());
    let _ = writeln!(out, "split {}", graph.split());
    let _ = writeln!(out, "k {}", graph.k());
    let _ = writeln!(out, "feature_dim {}", graph.feature_dim());
    if let Some(p) = graph.provenance() {
        let _ = writeln!(out, "[provenance]");
        let _ = writeln!(out, "seed {}", p.seed);
        let params = serde_json::to_string(&p.params).expect("params serialize");
        let _ = writeln!(out, "params {params}");
    }
    let _ = writeln!(out, "[rooms] {}", graph.rooms().len());
    for room in graph.rooms() {
        let members: Vec<&str> = room.member_viewpoints.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{} {} {}", room.id, room.room_type, members.join(" "));
    }
    let _ = writeln!(out, "[viewpoints] {}", graph.len());
    for vp in graph.viewpoints() {
        let [x, y, z] = vp.position;
        let _ = writeln!(out, "{} {} {} {} {}", vp.id, vp.room_id, float(x), float(y), float(z));
        for (i, view) in vp.panorama.iter().enumerate() {
            let attrs: Vec<&str> = view.attributes.iter().map(String::as_str).collect();
            let _ = write!(out, "view {i} {}", attrs.join(","));
            for f in &view.feature {
                let _ = write!(out, " {}", float(*f));
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "[edges] {}", graph.edges().len());
    for e in graph.edges() {
        let _ = writeln!(out, "{} {} {}", graph.id(e.a), graph.id(e.b), float(e.weight));
    }
    let _ = writeln!(out, "[end]");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(SidError::parse(self.last + 1, format!("unexpected end of document, expected {what}"))),
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next(key)?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| SidError::parse(n, format!("expected `{key} <value>`")))?;
        Ok((n, rest))
    }
}

fn num<T: std::str::FromStr>(n: usize, s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| SidError::parse(n, format!("invalid {what} `{s}`")))
}

fn section_count(n: usize, line: &str, name: &str) -> Result<usize> {
    let rest = line
        .strip_prefix(name)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| SidError::parse(n, format!("expected section `{name}`")))?;
    num(n, rest, "section count")
}

pub fn parse_environment(text: &str) -> Result<EnvironmentGraph> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let (n, magic) = lines.next("header")?;
    if magic != MAGIC {
        return Err(SidError::parse(n, format!("expected header `{MAGIC}`")));
    }
    let (_, env_id) = lines.keyed("env_id")?;
    let (n, split) = lines.keyed("split")?;
    let split: SplitTag = split.parse().map_err(|e: String| SidError::parse(n, e))?;
    let (n, k) = lines.keyed("k")?;
    let k: usize = num(n, k, "k")?;
    let (n, dim) = lines.keyed("feature_dim")?;
    let feature_dim: usize = num(n, dim, "feature dimension")?;

    let (mut n, mut line) = lines.next("section")?;
    let mut provenance = None;
    if line == "[provenance]" {
        let (sn, seed) = lines.keyed("seed")?;
        let seed: u64 = num(sn, seed, "seed")?;
        let (pn, params) = lines.keyed("params")?;
        let params: GeneratorParams =
            serde_json::from_str(params).map_err(|e| SidError::parse(pn, format!("invalid params: {e}")))?;
        provenance = Some(Provenance { seed, params });
        (n, line) = lines.next("section")?;
    }

    let room_count = section_count(n, line, "[rooms]")?;
    let mut rooms = Vec::with_capacity(room_count);
    for _ in 0..room_count {
        let (n, line) = lines.next("room")?;
        let mut parts = line.split(' ');
        let (Some(id), Some(room_type)) = (parts.next(), parts.next()) else {
            return Err(SidError::parse(n, "expected `<room id> <room type> <viewpoint ids...>`"));
        };
        let members: BTreeSet<String> = parts.map(str::to_string).collect();
        if members.is_empty() {
            return Err(SidError::parse(n, format!("room `{id}` lists no viewpoints")));
        }
        rooms.push(Room { id: id.to_string(), room_type: room_type.to_string(), member_viewpoints: members });
    }

    let (n, line) = lines.next("[viewpoints]")?;
    let vp_count = section_count(n, line, "[viewpoints]")?;
    let mut viewpoints = Vec::with_capacity(vp_count);
    for _ in 0..vp_count {
        let (n, line) = lines.next("viewpoint")?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 5 {
            return Err(SidError::parse(n, "expected `<id> <room> <x> <y> <z>`"));
        }
        let position = [
            num(n, parts[2], "coordinate")?,
            num(n, parts[3], "coordinate")?,
            num(n, parts[4], "coordinate")?,
        ];
        let mut panorama = Vec::with_capacity(k);
        for i in 0..k {
            let (vn, vline) = lines.next("view")?;
            let parts: Vec<&str> = vline.split(' ').collect();
            if parts.len() != 3 + feature_dim || parts[0] != "view" {
                return Err(SidError::parse(vn, format!("expected `view <index> <attributes> <{feature_dim} floats>`")));
            }
            let idx: usize = num(vn, parts[1], "view index")?;
            if idx != i {
                return Err(SidError::parse(vn, format!("expected view {i}, found {idx}")));
            }
            let attributes: BTreeSet<String> =
                parts[2].split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
            let feature = parts[3..]
                .iter()
                .map(|s| num(vn, s, "feature value"))
                .collect::<Result<Vec<f64>>>()?;
            panorama.push(ViewObservation { feature, heading: heading(i, k), attributes });
        }
        viewpoints.push(Viewpoint {
            id: parts[0].to_string(),
            position,
            room_id: parts[1].to_string(),
            panorama,
        });
    }

    let (n, line) = lines.next("[edges]")?;
    let edge_count = section_count(n, line, "[edges]")?;
    let mut pairs = Vec::with_capacity(edge_count);
    let mut stated = Vec::with_capacity(edge_count);
    for _ in 0..edge_count {
        let (n, line) = lines.next("edge")?;
        let parts: Vec<&str> = line.split(' ').collect();
        if parts.len() != 3 {
            return Err(SidError::parse(n, "expected `<id> <id> <weight>`"));
        }
        let w: f64 = num(n, parts[2], "edge weight")?;
        pairs.push((parts[0].to_string(), parts[1].to_string()));
        stated.push((n, w));
    }
    let (n, line) = lines.next("[end]")?;
    if line != "[end]" {
        return Err(SidError::parse(n, "expected `[end]`"));
    }
    if let Some((n, _)) = lines.inner.next() {
        return Err(SidError::parse(n + 1, "trailing content after `[end]`"));
    }

    let graph = EnvironmentGraph::new(env_id, split, k, feature_dim, viewpoints, rooms, &pairs, provenance)?;
    for ((a, b), (n, w)) in pairs.iter().zip(stated) {
        let actual = graph
            .edge_weight(graph.index_of(a)?, graph.index_of(b)?)
            .expect("edge was just inserted");
        if (actual - w).abs() > 1e-7 * actual.max(1.0) {
            return Err(SidError::parse(n, format!("edge weight {w} disagrees with endpoint distance {actual}")));
        }
    }
    Ok(graph)
}

pub fn write_environment(path: &Path, graph: &EnvironmentGraph) -> Result<()> {
    std::fs::write(path, serialize_environment(graph)).map_err(|e| SidError::io(path, e))
}

pub fn read_environment(path: &Path) -> Result<EnvironmentGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| SidError::io(path, e))?;
    parse_environment(&text).map_err(|e| match e {
        SidError::Parse { line, message } => SidError::Format {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        },
        other => other,
    })
}
