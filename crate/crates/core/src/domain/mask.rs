use serde::{Deserialize, Serialize};

use super::{Gallery, Lattice, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    /// Node in Ω: its value is an unknown.
    Free,
    /// Node in box \ Ω: its value is prescribed data.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRun {
    pub status: NodeStatus,
    pub len: usize,
}

/// Partition of the lattice nodes into FREE (Ω) and FIXED, with a labelled removed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaskRepr", into = "MaskRepr")]
pub struct DomainMask {
    lattice: Lattice,
    status: Vec<NodeStatus>,
    removed: Vec<usize>,
    gallery: Gallery,
    flags: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    lattice: Lattice,
    runs: Vec<StatusRun>,
    removed: Vec<usize>,
    gallery: Gallery,
    flags: Vec<String>,
}

impl TryFrom<MaskRepr> for DomainMask {
    type Error = Error;
    fn try_from(r: MaskRepr) -> Result<Self> {
        let mut status = Vec::with_capacity(r.lattice.node_count());
        for run in &r.runs {
            status.extend(std::iter::repeat_n(run.status, run.len));
        }
        let mut m = DomainMask::new(r.lattice, status, r.removed, r.gallery)?;
        m.flags = r.flags;
        Ok(m)
    }
}

impl From<DomainMask> for MaskRepr {
    fn from(m: DomainMask) -> Self {
        MaskRepr {
            runs: m.runs(),
            lattice: m.lattice,
            removed: m.removed,
            gallery: m.gallery,
            flags: m.flags,
        }
    }
}

impl DomainMask {
    pub fn new(lattice: Lattice, status: Vec<NodeStatus>, mut removed: Vec<usize>, gallery: Gallery) -> Result<Self> {
        if status.len() != lattice.node_count() {
            return Err(Error::config(
                "mask.status",
                format!("{} statuses for {} nodes", status.len(), lattice.node_count()),
            ));
        }
        removed.sort_unstable();
        removed.dedup();
        for &r in &removed {
            if r >= status.len() || status[r] != NodeStatus::Fixed {
                return Err(Error::config("mask.removed", format!("removed node {r} is not a FIXED node")));
            }
        }
        for (i, s) in status.iter().enumerate() {
            if *s == NodeStatus::Free && lattice.is_edge_node(i) {
                return Err(Error::config("mask.status", format!("FREE node {i} touches the outermost layer")));
            }
        }
        Ok(Self {
            lattice,
            status,
            removed,
            gallery,
            flags: Vec::new(),
        })
    }

    /// Mask with FREE exactly on `free` (everything else FIXED) and no removed set.
    pub fn from_free_nodes(lattice: Lattice, free: &[usize]) -> Result<Self> {
        let mut status = vec![NodeStatus::Fixed; lattice.node_count()];
        for &i in free {
            if i >= status.len() {
                return Err(Error::config("mask.free", format!("node {i} out of range")));
            }
            status[i] = NodeStatus::Free;
        }
        Self::new(lattice, status, Vec::new(), Gallery::Custom)
    }

    pub(crate) fn with_flags(mut self, flags: Vec<String>) -> Self {
        self.flags = flags;
        self
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
    pub fn status(&self, i: usize) -> NodeStatus {
        self.status[i]
    }
    pub fn statuses(&self) -> &[NodeStatus] {
        &self.status
    }
    pub fn is_free(&self, i: usize) -> bool {
        self.status[i] == NodeStatus::Free
    }
    pub fn removed(&self) -> &[usize] {
        &self.removed
    }
    pub fn gallery(&self) -> &Gallery {
        &self.gallery
    }
    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.status.len()).filter(|&i| self.is_free(i)).collect()
    }
    pub fn fixed_nodes(&self) -> Vec<usize> {
        (0..self.status.len()).filter(|&i| !self.is_free(i)).collect()
    }
    pub fn free_count(&self) -> usize {
        self.status.iter().filter(|s| **s == NodeStatus::Free).count()
    }

    /// The gallery's distinguished boundary point, if any.
    pub fn point_of_interest(&self) -> Option<Point> {
        self.gallery.point_of_interest(&self.lattice)
    }

    /// FIXED nodes with a FREE neighbour in the sup-norm sense.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let l = &self.lattice;
        let m = l.cells() as i64;
        let dim = l.dim();
        (0..self.status.len())
            .filter(|&i| {
                if self.is_free(i) {
                    return false;
                }
                let c = l.coords(i);
                let ys: &[i64] = if dim == 1 { &[0] } else { &[-1, 0, 1] };
                for &dy in ys {
                    for dx in [-1i64, 0, 1] {
                        let (x, y) = (c[0] as i64 + dx, c[1] as i64 + dy);
                        if (dx, dy) == (0, 0) || x < 0 || y < 0 || x >= m || (dim == 2 && y >= m) {
                            continue;
                        }
                        if self.is_free(l.index([x as usize, y as usize])) {
                            return true;
                        }
                    }
                }
                false
            })
            .collect()
    }

    /// Run-length encoding of the node statuses.
    pub fn runs(&self) -> Vec<StatusRun> {
        let mut out: Vec<StatusRun> = Vec::new();
        for &s in &self.status {
            match out.last_mut() {
                Some(r) if r.status == s => r.len += 1,
                _ => out.push(StatusRun { status: s, len: 1 }),
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_punctured_ball;

    #[test]
    fn rejects_free_edge_and_free_removed() {
        let l = Lattice::default_box(1, 8).unwrap();
        let mut st = vec![NodeStatus::Fixed; 8];
        st[0] = NodeStatus::Free;
        assert!(DomainMask::new(l, st, vec![], Gallery::Custom).is_err());
        let mut st = vec![NodeStatus::Fixed; 8];
        st[3] = NodeStatus::Free;
        assert!(DomainMask::new(l, st.clone(), vec![3], Gallery::Custom).is_err());
        assert!(DomainMask::new(l, st, vec![4], Gallery::Custom).is_ok());
    }

    #[test]
    fn json_roundtrip_is_run_length_encoded() {
        let l = Lattice::default_box(1, 64).unwrap();
        let m = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        let js = m.to_json().unwrap();
        assert!(js.contains("\"runs\""));
        assert!(!js.contains("\"status\": [")); // no per-node array
        let back = DomainMask::from_json(&js).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.runs().len(), 5);
    }

    #[test]
    fn boundary_nodes_touch_free_set() {
        let l = Lattice::default_box(2, 16).unwrap();
        let m = make_punctured_ball(&l, [0.0, 0.0], 1.0).unwrap();
        let b = m.boundary_nodes();
        assert!(b.contains(&m.removed()[0]));
        assert!(b.iter().all(|&i| !m.is_free(i)));
    }
}
