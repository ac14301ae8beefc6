//! Structured quadrilateral meshing of a microstructure window.
//!
//! The window `[0,W]²` is divided into `divisions²` equal squares; each
//! element takes the phase of the microstructure at its centroid. Corners are
//! labeled A=(0,0), B=(W,0), C=(W,W), D=(0,W) and the four boundary edges
//! carry named node sets for boundary conditions.

use serde::Serialize;

use crate::microgen::{Microstructure, Phase};

/// Node index lists for the four boundary edges, ordered along each edge.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeSets {
    /// Bottom edge y = 0, from A to B.
    pub ab: Vec<u32>,
    /// Right edge x = W, from B to C.
    pub bc: Vec<u32>,
    /// Top edge y = W, from C to D (stored left-to-right).
    pub cd: Vec<u32>,
    /// Left edge x = 0, from D to A (stored bottom-to-top).
    pub da: Vec<u32>,
}

/// Structured 4-node quadrilateral mesh with per-element phase tags.
#[derive(Debug, Clone)]
pub struct QuadMesh {
    /// Node coordinates in pixels; node `(i, j)` sits at index `j*(d+1)+i`.
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node indices per element.
    pub elements: Vec<[u32; 4]>,
    /// Phase of each element (sampled at its centroid).
    pub phase: Vec<Phase>,
    /// Elements per side.
    pub divisions: u32,
    /// Window size in pixels.
    pub window_px: u32,
    pub edge_sets: EdgeSets,
}

/// Mesh a microstructure with `divisions` elements per side (≥ 2).
pub fn pixelate(ms: &Microstructure, divisions: u32) -> QuadMesh {
    assert!(divisions >= 2, "divisions must be ≥ 2");
    let d = divisions;
    let w = f64::from(ms.window_px);
    let h = w / f64::from(d);

    let n_per_side = d + 1;
    let mut nodes = Vec::with_capacity((n_per_side * n_per_side) as usize);
    for j in 0..n_per_side {
        for i in 0..n_per_side {
            nodes.push([f64::from(i) * h, f64::from(j) * h]);
        }
    }

    let node_at = |i: u32, j: u32| j * n_per_side + i;
    let mut elements = Vec::with_capacity((d * d) as usize);
    let mut phase = Vec::with_capacity((d * d) as usize);
    for ey in 0..d {
        for ex in 0..d {
            elements.push([
                node_at(ex, ey),
                node_at(ex + 1, ey),
                node_at(ex + 1, ey + 1),
                node_at(ex, ey + 1),
            ]);
            let cx = (f64::from(ex) + 0.5) * h;
            let cy = (f64::from(ey) + 0.5) * h;
            phase.push(ms.phase_at(cx, cy));
        }
    }

    let edge_sets = EdgeSets {
        ab: (0..n_per_side).map(|i| node_at(i, 0)).collect(),
        bc: (0..n_per_side).map(|j| node_at(d, j)).collect(),
        cd: (0..n_per_side).map(|i| node_at(i, d)).collect(),
        da: (0..n_per_side).map(|j| node_at(0, j)).collect(),
    };

    QuadMesh {
        nodes,
        elements,
        phase,
        divisions: d,
        window_px: ms.window_px,
        edge_sets,
    }
}

impl QuadMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Area of each (equal-sized) element.
    pub fn element_area(&self) -> f64 {
        let h = f64::from(self.window_px) / f64::from(self.divisions);
        h * h
    }

    /// Fiber area fraction of the mesh. All elements have equal area, so this
    /// is the fiber element count over the total.
    pub fn volume_fraction(&self) -> f64 {
        let fiber = self.phase.iter().filter(|p| **p == Phase::Fiber).count();
        fiber as f64 / self.phase.len() as f64
    }

    /// Element indices belonging to `phase`.
    pub fn elements_of_phase(&self, phase: Phase) -> Vec<usize> {
        self.phase
            .iter()
            .enumerate()
            .filter_map(|(i, p)| (*p == phase).then_some(i))
            .collect()
    }

    /// Node and element tables as CSV strings (`node_id,x,y` and
    /// `element_id,n0,n1,n2,n3,phase`).
    pub fn to_csv_tables(&self) -> (String, String) {
        let mut nodes = String::from("node_id,x,y\n");
        for (i, n) in self.nodes.iter().enumerate() {
            nodes.push_str(&format!("{i},{:.17e},{:.17e}\n", n[0], n[1]));
        }
        let mut elements = String::from("element_id,n0,n1,n2,n3,phase\n");
        for (i, (e, p)) in self.elements.iter().zip(&self.phase).enumerate() {
            let tag = match p {
                Phase::Fiber => "F",
                Phase::Matrix => "M",
            };
            elements.push_str(&format!("{i},{},{},{},{},{tag}\n", e[0], e[1], e[2], e[3]));
        }
        (nodes, elements)
    }
}
