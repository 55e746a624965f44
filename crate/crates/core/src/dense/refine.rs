use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::iuv::{IuvMap, BACKGROUND};
use crate::error::{invariant, Error, Result};
use crate::objectives::SparseKeypointSet;

/// Body parts consistent with each sparse keypoint id.
///
/// Keypoints without an entry are never judged inconsistent.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KeypointPartTable {
    pub entries: BTreeMap<usize, Vec<u8>>,
}

impl KeypointPartTable {
    /// Default table for models whose part `k + 1` is driven by joint `k` and whose sparse
    /// keypoints are the joints: a joint agrees with its own part, its parent's part and
    /// the parts of its children.
    pub fn from_kinematic_tree(parents: &[Option<usize>]) -> Self {
        let mut entries = BTreeMap::new();
        for (k, parent) in parents.iter().enumerate() {
            let mut parts = vec![(k + 1) as u8];
            if let Some(p) = parent {
                parts.push((*p + 1) as u8);
            }
            parts.extend(parents.iter().enumerate().filter(|(_, p)| **p == Some(k)).map(|(c, _)| (c + 1) as u8));
            parts.sort_unstable();
            parts.dedup();
            entries.insert(k, parts);
        }
        Self { entries }
    }

    pub fn validate(&self, part_count: usize) -> Result<()> {
        for (id, parts) in &self.entries {
            if parts.iter().any(|&p| p == 0 || p as usize > part_count) {
                return Err(invariant("keypoint_part_table", alloc::format!("keypoint {id} lists a part outside 1..={part_count}")));
            }
        }
        Ok(())
    }

    pub fn is_consistent(&self, keypoint: usize, part: u8) -> bool {
        self.entries.get(&keypoint).map_or(true, |parts| parts.contains(&part))
    }
}

/// Most frequent non-background part in the 3×3 grid around a pixel.
/// Ties go to the smaller part id.
fn poll(map: &IuvMap, x: u32, y: u32) -> Option<u8> {
    let mut counts = [0u8; 256];
    for (nx, ny) in map.neighbourhood(x, y) {
        let p = map.get(nx, ny).part;
        if p != 0 {
            counts[p as usize] += 1;
        }
    }
    let mut best: Option<(u8, u8)> = None;
    for (part, &n) in counts.iter().enumerate().skip(1) {
        if n > 0 && best.map_or(true, |(_, m)| n > m) {
            best = Some((part as u8, n));
        }
    }
    best.map(|(p, _)| p)
}

/// Clears every pixel of `part` reachable from `(x, y)` through chained 3×3 neighbourhoods.
/// Returns the number of pixels cleared.
fn clear_region(map: &mut IuvMap, x: u32, y: u32, part: u8) -> usize {
    let mut cleared = 0;
    let mut queue = VecDeque::new();
    if map.get(x, y).part == part {
        map.set(x, y, BACKGROUND);
        cleared += 1;
    }
    queue.push_back((x, y));
    while let Some((cx, cy)) = queue.pop_front() {
        let around: Vec<(u32, u32)> = map.neighbourhood(cx, cy).collect();
        for (nx, ny) in around {
            if map.get(nx, ny).part == part {
                map.set(nx, ny, BACKGROUND);
                cleared += 1;
                queue.push_back((nx, ny));
            }
        }
    }
    cleared
}

/// Removes IUV regions that contradict visible sparse keypoints.
///
/// Keypoints are visited in ascending id order. For each one the majority part of its
/// 3×3 neighbourhood is checked against `table`; an inconsistent part is flood-filled to
/// background starting at the keypoint, matching on part id only. Passes repeat until no
/// pixel changes, so the result is a fixed point.
pub fn refine_iuv(map: &IuvMap, keypoints: &SparseKeypointSet, table: &KeypointPartTable) -> Result<IuvMap> {
    keypoints.validate()?;
    let mut order: Vec<usize> = (0..keypoints.len()).filter(|&i| keypoints.visible[i]).collect();
    order.sort_by_key(|&i| (keypoints.ids[i], i));

    let mut pixels = Vec::with_capacity(order.len());
    for &i in &order {
        let [x, y] = keypoints.positions[i];
        let (px, py) = (libm::round(x), libm::round(y));
        if !(px >= 0.0 && py >= 0.0 && px < map.width() as f64 && py < map.height() as f64) {
            return Err(Error::KeypointOutsideFrame { id: keypoints.ids[i], x, y, width: map.width(), height: map.height() });
        }
        pixels.push((keypoints.ids[i], px as u32, py as u32));
    }

    let mut out = map.clone();
    loop {
        let mut changed = 0;
        for &(id, x, y) in &pixels {
            if let Some(part) = poll(&out, x, y) {
                if !table.is_consistent(id, part) {
                    changed += clear_region(&mut out, x, y, part);
                }
            }
        }
        if changed == 0 {
            return Ok(out);
        }
    }
}
