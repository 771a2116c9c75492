//! Templated symbolic captions and the visual-to-language goal transfer.

use crate::datasets::{Caption, CaptionStyle, DemoSample, DemonstrationSet, Goal, Modality};
use crate::envmodel::{EnvironmentGraph, Room, ViewObservation};
use crate::error::{Result, SidError};
use crate::World;

/// Expands a fixed template over the view's attributes.
///
/// * `detail`: room type, every other attribute, `near`, first neighbor room type.
/// * `reverie_like`: the non-room attributes only.
/// * `soon_like`: attributes, `in`, room type, `near`, every neighbor room type.
///
/// Neighbor rooms are taken in the order given; duplicates of a type are dropped.
pub fn caption_view(view: &ViewObservation, room: &Room, neighbors: &[&Room], style: CaptionStyle) -> Caption {
    let room_type = room.room_type.as_str();
    let attrs: Vec<String> = view
        .attributes
        .iter()
        .filter(|a| a.as_str() != room_type)
        .cloned()
        .collect();
    let mut neighbor_types: Vec<&str> = Vec::new();
    for r in neighbors {
        if !neighbor_types.contains(&r.room_type.as_str()) {
            neighbor_types.push(&r.room_type);
        }
    }
    let mut tokens: Vec<String> = Vec::new();
    match style {
        CaptionStyle::Detail => {
            tokens.push(room_type.to_string());
            tokens.extend(attrs);
            if let Some(nb) = neighbor_types.first() {
                tokens.push("near".into());
                tokens.push(nb.to_string());
            }
        }
        CaptionStyle::ReverieLike => {
            tokens.extend(attrs);
            if tokens.is_empty() {
                tokens.push(room_type.to_string());
            }
        }
        CaptionStyle::SoonLike => {
            tokens.extend(attrs);
            tokens.push("in".into());
            tokens.push(room_type.to_string());
            if !neighbor_types.is_empty() {
                tokens.push("near".into());
                tokens.extend(neighbor_types.iter().map(|t| t.to_string()));
            }
        }
    }
    Caption { tokens, style }
}

/// Caption for view `view_index` of viewpoint `vp` in `graph`.
pub(crate) fn caption_target(graph: &EnvironmentGraph, vp: usize, view_index: usize, style: CaptionStyle) -> Caption {
    let room_idx = graph.room_of(vp);
    let neighbors: Vec<&Room> = graph.neighbor_rooms(room_idx).into_iter().map(|r| graph.room(r)).collect();
    caption_view(&graph.viewpoint(vp).panorama[view_index], graph.room(room_idx), &neighbors, style)
}

/// View indices kept by the interleaved half-panorama selection: 0, 2, ..., K-2.
pub fn interleaved_indices(k: usize) -> Result<Vec<usize>> {
    if k % 2 != 0 || k == 0 {
        return Err(SidError::OddPanorama(k));
    }
    Ok((0..k).step_by(2).collect())
}

pub fn select_interleaved_views(panorama: &[ViewObservation]) -> Result<Vec<&ViewObservation>> {
    Ok(interleaved_indices(panorama.len())?
        .into_iter()
        .map(|i| &panorama[i])
        .collect())
}

/// Replaces visual goals on the interleaved views with captions, keeping the
/// trajectories. Samples on the other views are dropped.
pub fn transfer_to_language(demos: &DemonstrationSet, style: CaptionStyle, world: &World) -> Result<DemonstrationSet> {
    let mut out = Vec::new();
    for (i, s) in demos.samples().iter().enumerate() {
        if s.goal.modality != Modality::Visual {
            return Err(SidError::InvalidGoal(format!("sample {i} already has a language goal")));
        }
        let graph = world.get(s.env_id())?;
        let view = s
            .goal
            .view_index
            .ok_or_else(|| SidError::InvalidGoal(format!("sample {i} has no view index")))?;
        if !interleaved_indices(graph.k())?.contains(&view) {
            continue;
        }
        let target = graph.index_of(&s.goal.target_viewpoint)?;
        let caption = caption_target(graph, target, view, style);
        out.push(DemoSample {
            goal: Goal::language(s.goal.target_viewpoint.clone(), caption),
            trajectory: s.trajectory.clone(),
        });
    }
    let mut set = DemonstrationSet::new(demos.round_tag, out)?;
    set.episodes = demos.episodes;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::heading;

    fn view(attrs: &[&str]) -> ViewObservation {
        ViewObservation {
            feature: vec![1.0, 0.0],
            heading: heading(0, 4),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn room(id: &str, ty: &str) -> Room {
        Room { id: id.into(), room_type: ty.into(), member_viewpoints: [format!("{id}_vp")].into_iter().collect() }
    }

    #[test]
    fn detail_template() {
        let v = view(&["bedroom", "lamp", "red"]);
        let hall = room("r1", "hallway");
        let c = caption_view(&v, &room("r0", "bedroom"), &[&hall], CaptionStyle::Detail);
        assert_eq!(c.tokens, ["bedroom", "lamp", "red", "near", "hallway"]);
        assert_eq!(c.style, CaptionStyle::Detail);
    }

    #[test]
    fn reverie_is_shorter_than_detail() {
        let v = view(&["bedroom", "lamp", "red"]);
        let r = room("r0", "bedroom");
        for neighbors in [vec![], vec![room("r1", "hallway")]] {
            let nb: Vec<&Room> = neighbors.iter().collect();
            let d = caption_view(&v, &r, &nb, CaptionStyle::Detail);
            let rv = caption_view(&v, &r, &nb, CaptionStyle::ReverieLike);
            assert!(rv.tokens.len() < d.tokens.len());
        }
    }

    #[test]
    fn soon_lists_all_neighbor_types() {
        let v = view(&["kitchen", "stove", "white"]);
        let (a, b, c) = (room("r1", "hallway"), room("r2", "dining_room"), room("r3", "hallway"));
        let cap = caption_view(&v, &room("r0", "kitchen"), &[&a, &b, &c], CaptionStyle::SoonLike);
        assert_eq!(cap.tokens, ["stove", "white", "in", "kitchen", "near", "hallway", "dining_room"]);
    }

    #[test]
    fn interleaved_selection() {
        assert_eq!(interleaved_indices(36).unwrap().len(), 18);
        assert_eq!(interleaved_indices(4).unwrap(), vec![0, 2]);
        assert!(matches!(interleaved_indices(5), Err(SidError::OddPanorama(5))));
        let k = 12;
        let pano: Vec<ViewObservation> = (0..k)
            .map(|i| ViewObservation { heading: heading(i, k), ..view(&["a"]) })
            .collect();
        let picked = select_interleaved_views(&pano).unwrap();
        assert_eq!(picked.len(), k / 2);
        let min_gap = 4.0 * std::f64::consts::PI / k as f64;
        for (i, a) in picked.iter().enumerate() {
            for b in &picked[i + 1..] {
                let d = (a.heading - b.heading).abs();
                let d = d.min(2.0 * std::f64::consts::PI - d);
                assert!(d >= min_gap - 1e-12);
            }
        }
    }
}
