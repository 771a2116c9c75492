//! Seeded procedural generator for indoor navigation graphs.
//!
//! Rooms sit on a square grid; a random spanning tree of grid-adjacent rooms
//! (plus a few extra doors) keeps the graph connected. Each view carries a
//! room-type token, an object token and a color token. Its feature is the
//! weighted sum of the token embeddings plus Gaussian noise, unit-normalized.
//! With distractors on, some rooms are twins of another room: same type, same
//! objects and noise, but a different color on every view.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envmodel::graph::{euclidean, heading, EnvironmentGraph, Provenance, Room, SplitTag, ViewObservation, Viewpoint};
use crate::error::{Result, SidError};
use crate::vocab::{is_valid_token, AttributeVocabulary};

const OBJECT_POOL: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub rooms: usize,
    pub vps_per_room: usize,
    pub k: usize,
    pub feature_dim: usize,
    pub vocabulary: AttributeVocabulary,
    /// Force same-type twin rooms that differ only in a salient attribute.
    pub distractors: bool,
    pub room_size_m: f64,
    pub room_type_weight: f64,
    pub feature_noise: f64,
    pub extra_door_prob: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            rooms: 8,
            vps_per_room: 3,
            k: 12,
            feature_dim: 16,
            vocabulary: AttributeVocabulary::default(),
            distractors: true,
            room_size_m: 5.0,
            room_type_weight: 1.2,
            feature_noise: 0.6,
            extra_door_prob: 0.25,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SidError::InvalidParams(m.to_string()));
        if self.k % 2 != 0 || self.k < 4 {
            return Err(SidError::OddPanorama(self.k));
        }
        if self.rooms < 4 {
            return bad("at least 4 rooms are required");
        }
        if self.vps_per_room < 2 {
            return bad("at least 2 viewpoints per room are required");
        }
        if self.vps_per_room > 99 || self.rooms > 99 {
            return bad("at most 99 rooms and 99 viewpoints per room");
        }
        if self.feature_dim < 2 {
            return bad("feature dimension must be at least 2");
        }
        let v = &self.vocabulary;
        if v.room_types.is_empty() || v.objects.is_empty() || v.colors.len() < 2 {
            return bad("vocabulary needs room types, objects and at least two colors");
        }
        let all: Vec<&String> = v.room_types.iter().chain(&v.objects).chain(&v.colors).collect();
        if let Some(t) = all.iter().find(|t| !is_valid_token(t)) {
            return bad(&format!("invalid vocabulary token `{t}`"));
        }
        if all.iter().collect::<BTreeSet<_>>().len() != all.len() {
            return bad("vocabulary tokens must be distinct");
        }
        if !(self.room_size_m > 0.0 && self.room_size_m.is_finite()) {
            return bad("room size must be positive");
        }
        if !(self.feature_noise >= 0.0 && self.room_type_weight >= 0.0) {
            return bad("feature weights must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.extra_door_prob) {
            return bad("extra door probability must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn distractor_pairs(&self) -> usize {
        if self.distractors {
            (self.rooms / 4).max(1)
        } else {
            0
        }
    }
}

/// Rounds to 9 significant digits, the precision environment files carry.
pub(crate) fn round_sig9(x: f64) -> f64 {
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Unit embedding of a token; identical across environments and seeds.
pub fn token_embedding(token: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()) ^ 0x5eed_7a61_e3b0_0001);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

#[derive(Clone)]
struct ViewSpec {
    object: usize,
    color: usize,
    noise: Vec<f64>,
}

pub fn generate_environment(seed: u64, params: &GeneratorParams) -> Result<EnvironmentGraph> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = &params.vocabulary;
    let n_rooms = params.rooms;
    let per_room = params.vps_per_room;
    let size = params.room_size_m;
    let cols = (n_rooms as f64).sqrt().ceil() as usize;

    // Doors: random spanning tree over grid-adjacent rooms, then extras.
    let mut candidates = Vec::new();
    for r in 0..n_rooms {
        let (c, row) = (r % cols, r / cols);
        if c + 1 < cols && r + 1 < n_rooms {
            candidates.push((r, r + 1));
        }
        if (row + 1) * cols + c < n_rooms {
            candidates.push((r, r + cols));
        }
    }
    candidates.shuffle(&mut rng);
    let mut dsu = Dsu((0..n_rooms).collect());
    let mut doors = Vec::new();
    let mut extras = Vec::new();
    for &(a, b) in &candidates {
        if dsu.union(a, b) {
            doors.push((a, b));
        } else {
            extras.push((a, b));
        }
    }
    for pair in extras {
        if rng.random::<f64>() < params.extra_door_prob {
            doors.push(pair);
        }
    }
    doors.sort();

    // Room types, with forced same-type twins.
    let mut room_types: Vec<usize> = (0..n_rooms)
        .map(|_| rng.random_range(0..vocab.room_types.len()))
        .collect();
    let mut twin_of: Vec<Option<usize>> = vec![None; n_rooms];
    let mut order: Vec<usize> = (0..n_rooms).collect();
    order.shuffle(&mut rng);
    for p in 0..params.distractor_pairs() {
        let (src, twin) = (order[2 * p], order[2 * p + 1]);
        room_types[twin] = room_types[src];
        twin_of[twin] = Some(src);
    }

    // Viewpoint positions.
    let mut positions: Vec<Vec<[f64; 3]>> = Vec::with_capacity(n_rooms);
    for r in 0..n_rooms {
        let (ox, oy) = ((r % cols) as f64 * size, (r / cols) as f64 * size);
        let mut pts: Vec<[f64; 3]> = Vec::with_capacity(per_room);
        let mut attempts = 0;
        while pts.len() < per_room {
            let p = [
                round_sig9(ox + size * (0.1 + 0.8 * rng.random::<f64>())),
                round_sig9(oy + size * (0.1 + 0.8 * rng.random::<f64>())),
                0.0,
            ];
            attempts += 1;
            let min_gap = if attempts < 200 { 0.12 * size } else { 1e-3 };
            if pts.iter().all(|q| euclidean(q, &p) >= min_gap) {
                pts.push(p);
            }
        }
        positions.push(pts);
    }

    // View attribute draws; twins copy their source and swap every color.
    let n_types = vocab.room_types.len();
    let pool = OBJECT_POOL.min(vocab.objects.len());
    let mut specs: Vec<Vec<Vec<ViewSpec>>> = vec![Vec::new(); n_rooms];
    for r in 0..n_rooms {
        let t = room_types[r];
        specs[r] = (0..per_room)
            .map(|_| {
                (0..params.k)
                    .map(|_| ViewSpec {
                        object: (t * 2 + rng.random_range(0..pool)) % vocab.objects.len(),
                        color: rng.random_range(0..vocab.colors.len()),
                        noise: (0..params.feature_dim)
                            .map(|_| rng.sample::<f64, _>(StandardNormal) / (params.feature_dim as f64).sqrt())
                            .collect(),
                    })
                    .collect()
            })
            .collect();
    }
    for r in 0..n_rooms {
        if let Some(src) = twin_of[r] {
            let mut copied = specs[src].clone();
            for view in copied.iter_mut().flatten() {
                let shift = rng.random_range(1..vocab.colors.len());
                view.color = (view.color + shift) % vocab.colors.len();
            }
            specs[r] = copied;
        }
    }
    debug_assert!(room_types.iter().all(|&t| t < n_types));

    let emb = |tok: &str| token_embedding(tok, params.feature_dim);
    let room_type_emb: Vec<Vec<f64>> = vocab.room_types.iter().map(|t| emb(t)).collect();
    let object_emb: Vec<Vec<f64>> = vocab.objects.iter().map(|t| emb(t)).collect();
    let color_emb: Vec<Vec<f64>> = vocab.colors.iter().map(|t| emb(t)).collect();

    let mut viewpoints = Vec::with_capacity(n_rooms * per_room);
    let mut rooms = Vec::with_capacity(n_rooms);
    let vp_id = |r: usize, j: usize| format!("vp_{r:02}_{j:02}");
    let room_id = |r: usize| format!("room_{r:02}");
    for r in 0..n_rooms {
        let t = room_types[r];
        let mut members = BTreeSet::new();
        for j in 0..per_room {
            let panorama = specs[r][j]
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut f: Vec<f64> = (0..params.feature_dim)
                        .map(|d| {
                            params.room_type_weight * room_type_emb[t][d]
                                + object_emb[s.object][d]
                                + color_emb[s.color][d]
                                + params.feature_noise * s.noise[d]
                        })
                        .collect();
                    normalize(&mut f);
                    f.iter_mut().for_each(|x| *x = round_sig9(*x));
                    ViewObservation {
                        feature: f,
                        heading: heading(i, params.k),
                        attributes: [
                            vocab.room_types[t].clone(),
                            vocab.objects[s.object].clone(),
                            vocab.colors[s.color].clone(),
                        ]
                        .into_iter()
                        .collect(),
                    }
                })
                .collect();
            members.insert(vp_id(r, j));
            viewpoints.push(Viewpoint {
                id: vp_id(r, j),
                position: positions[r][j],
                room_id: room_id(r),
                panorama,
            });
        }
        rooms.push(Room { id: room_id(r), room_type: vocab.room_types[t].clone(), member_viewpoints: members });
    }

    // Intra-room edges: Euclidean MST plus short pairs.
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    for r in 0..n_rooms {
        let pts = &positions[r];
        let mut in_tree = vec![false; per_room];
        in_tree[0] = true;
        for _ in 1..per_room {
            let mut best: Option<(f64, usize, usize)> = None;
            for a in (0..per_room).filter(|&a| in_tree[a]) {
                for b in (0..per_room).filter(|&b| !in_tree[b]) {
                    let d = euclidean(&pts[a], &pts[b]);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, a, b));
                    }
                }
            }
            let (_, a, b) = best.expect("room has an unconnected viewpoint");
            in_tree[b] = true;
            edges.insert(ordered(vp_id(r, a), vp_id(r, b)));
        }
        for a in 0..per_room {
            for b in a + 1..per_room {
                if euclidean(&pts[a], &pts[b]) <= 0.5 * size {
                    edges.insert(ordered(vp_id(r, a), vp_id(r, b)));
                }
            }
        }
    }
    // Door edges join the closest viewpoint pair of two rooms.
    for &(ra, rb) in &doors {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..per_room {
            for b in 0..per_room {
                let d = euclidean(&positions[ra][a], &positions[rb][b]);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("rooms are non-empty");
        edges.insert(ordered(vp_id(ra, a), vp_id(rb, b)));
    }
    let edge_pairs: Vec<(String, String)> = edges.into_iter().collect();

    EnvironmentGraph::new(
        format!("env-{seed}"),
        SplitTag::Train,
        params.k,
        params.feature_dim,
        viewpoints,
        rooms,
        &edge_pairs,
        Some(Provenance { seed, params: params.clone() }),
    )
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}
