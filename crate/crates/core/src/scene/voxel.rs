//! Rasterization of a [`SceneSpec`] onto a uniform Yee grid.
//!
//! Field and material arrays share one node-padded layout of
//! `(nx + 1) × (ny + 1) × (nz + 1)` entries with `k` fastest. An x-edge at
//! `(i, j, k)` spans the nodes `(i, j, k)` and `(i + 1, j, k)`; entries outside
//! a component's valid range are padding.

use serde::{Deserialize, Serialize};

use super::{Aabb, SceneSpec};
use crate::constants::C0;
use crate::error::{Error, Result};
use crate::materials::{MaterialClass, MaterialSpec, SolverMaterial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

/// Outer termination of one grid face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Pec,
    Pmc,
    /// Convolutional PML backed by PEC.
    Cpml,
}

/// Lumped resistor (optionally a Thévenin voltage source) on one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedElement {
    pub axis: Axis,
    pub index: [usize; 3],
    pub resistance: f64,
    /// Background medium of the edge.
    pub eps_r: f64,
    pub sigma: f64,
    pub is_source: bool,
}

/// Measurement site of the active port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortSite {
    pub label_index: usize,
    /// Index into [`VoxelGrid::lumped`] of the gap element.
    pub element: usize,
    /// z-edge whose surrounding H loop gives the port current.
    pub current_edge: [usize; 3],
    pub reference_impedance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    /// Cell counts (nx, ny, nz).
    pub dims: [usize; 3],
    pub delta: f64,
    /// Coordinates of node (0, 0, 0) in metres.
    pub origin: [f64; 3],
    pub pml: usize,
    /// Face terminations ordered x-, x+, y-, y+, z-, z+.
    pub boundaries: [Boundary; 6],
    /// Material table; id 0 is vacuum.
    pub materials: Vec<MaterialSpec>,
    pub design_frequency: f64,
    pub edge_material: [Vec<u8>; 3],
    pub cell_material: Vec<u8>,
    pub lumped: Vec<LumpedElement>,
    pub port: Option<PortSite>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelOptions {
    pub delta: f64,
    pub pml: usize,
    /// Vacuum gap between scene bounds and the PML on every face (m).
    pub air_margin: f64,
    /// Smallest number of cells allowed across any volumetric feature.
    pub min_feature_cells: f64,
}

impl VoxelOptions {
    /// Quarter-wavelength margin at `f` and a three-cell feature rule.
    pub fn new(delta: f64, pml: usize, f: f64) -> Self {
        Self {
            delta,
            pml,
            air_margin: C0 / f / 4.0,
            min_feature_cells: 3.0,
        }
    }
}

const TOL: f64 = 1e-9;

impl VoxelGrid {
    /// All-vacuum grid with PEC faces.
    pub fn new(dims: [usize; 3], delta: f64, origin: [f64; 3]) -> Self {
        let n = (dims[0] + 1) * (dims[1] + 1) * (dims[2] + 1);
        Self {
            dims,
            delta,
            origin,
            pml: 0,
            boundaries: [Boundary::Pec; 6],
            materials: vec![MaterialSpec::Vacuum],
            design_frequency: crate::constants::F_DESIGN,
            edge_material: [vec![0; n], vec![0; n], vec![0; n]],
            cell_material: vec![0; dims[0] * dims[1] * dims[2]],
            lumped: Vec::new(),
            port: None,
        }
    }

    /// Grid centred on the origin in x/y with `z` starting at `z0`.
    pub fn centered(dims: [usize; 3], delta: f64, z0: f64) -> Self {
        let origin = [
            -(dims[0] as f64) * delta / 2.0,
            -(dims[1] as f64) * delta / 2.0,
            z0,
        ];
        Self::new(dims, delta, origin)
    }

    pub fn with_cpml(mut self, pml: usize) -> Self {
        self.pml = pml;
        self.boundaries = [Boundary::Cpml; 6];
        self
    }

    pub fn n_nodes(&self) -> usize {
        (self.dims[0] + 1) * (self.dims[1] + 1) * (self.dims[2] + 1)
    }

    pub fn strides(&self) -> [usize; 3] {
        let sz = 1;
        let sy = self.dims[2] + 1;
        let sx = (self.dims[1] + 1) * sy;
        [sx, sy, sz]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.dims[1] + 1) + j) * (self.dims[2] + 1) + k
    }

    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Number of valid entries of an `axis`-oriented edge along each axis.
    pub fn edge_counts(&self, axis: Axis) -> [usize; 3] {
        let mut c = [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1];
        c[axis as usize] -= 1;
        c
    }

    pub fn node_coord(&self, a: usize, i: f64) -> f64 {
        self.origin[a] + i * self.delta
    }

    pub fn edge_midpoint(&self, axis: Axis, ijk: [usize; 3]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..3 {
            let off = if a == axis as usize { 0.5 } else { 0.0 };
            p[a] = self.node_coord(a, ijk[a] as f64 + off);
        }
        p
    }

    /// Nearest node index along axis `a`, unclamped. Exact ties round toward
    /// the grid centre so mirrored points snap to mirrored nodes.
    fn nearest_index(&self, a: usize, x: f64) -> f64 {
        let v = (x - self.origin[a]) / self.delta;
        let lo = v.floor();
        if ((v - lo) - 0.5).abs() <= TOL {
            if lo + 0.5 < self.dims[a] as f64 / 2.0 {
                lo + 1.0
            } else {
                lo
            }
        } else {
            v.round()
        }
    }

    /// Nearest node to a physical point.
    pub fn nearest_node(&self, p: [f64; 3]) -> [usize; 3] {
        let mut out = [0; 3];
        for a in 0..3 {
            out[a] = self.nearest_index(a, p[a]).clamp(0.0, self.dims[a] as f64) as usize;
        }
        out
    }

    /// Register a material (deduplicated) and return its id.
    pub fn material_id(&mut self, spec: &MaterialSpec) -> u8 {
        if let Some(pos) = self.materials.iter().position(|m| m == spec) {
            return pos as u8;
        }
        assert!(self.materials.len() < 255, "material table overflow");
        self.materials.push(spec.clone());
        (self.materials.len() - 1) as u8
    }

    fn index_range(&self, a: usize, count: usize, lo: f64, hi: f64, off: f64) -> Option<(usize, usize)> {
        let lo = ((lo - self.origin[a]) / self.delta - off - TOL).ceil();
        let hi = ((hi - self.origin[a]) / self.delta - off + TOL).floor();
        let lo = lo.max(0.0);
        let hi = hi.min(count as f64 - 1.0);
        if hi < lo {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }

    /// Assign `material` to every edge and cell whose midpoint lies in `b`
    /// (closed), overriding previous assignments. A zero-extent axis (sheet
    /// or wire) is snapped to the nearest grid plane first.
    pub fn paint(&mut self, b: &Aabb, material: &MaterialSpec) {
        let id = self.material_id(material);
        let mut b = *b;
        for a in 0..3 {
            if b.max[a] - b.min[a] <= TOL * self.delta {
                let n = self.nearest_index(a, b.min[a]);
                b.min[a] = self.origin[a] + n * self.delta;
                b.max[a] = b.min[a];
            }
        }
        let b = &b;
        for axis in Axis::ALL {
            let counts = self.edge_counts(axis);
            let mut r = [(0, 0); 3];
            let mut empty = false;
            for a in 0..3 {
                let off = if a == axis as usize { 0.5 } else { 0.0 };
                match self.index_range(a, counts[a], b.min[a], b.max[a], off) {
                    Some(x) => r[a] = x,
                    None => empty = true,
                }
            }
            if empty {
                continue;
            }
            for i in r[0].0..=r[0].1 {
                for j in r[1].0..=r[1].1 {
                    let base = self.idx(i, j, 0);
                    self.edge_material[axis as usize][base + r[2].0..=base + r[2].1].fill(id);
                }
            }
        }
        let mut r = [(0, 0); 3];
        for a in 0..3 {
            match self.index_range(a, self.dims[a], b.min[a], b.max[a], 0.5) {
                Some(x) => r[a] = x,
                None => return,
            }
        }
        for i in r[0].0..=r[0].1 {
            for j in r[1].0..=r[1].1 {
                let base = self.cell_idx(i, j, 0);
                self.cell_material[base + r[2].0..=base + r[2].1].fill(id);
            }
        }
    }

    /// Number of `axis` edges carrying material `id`.
    pub fn edge_count(&self, axis: Axis, id: u8) -> usize {
        let c = self.edge_counts(axis);
        let mut n = 0;
        for i in 0..c[0] {
            for j in 0..c[1] {
                let base = self.idx(i, j, 0);
                n += self.edge_material[axis as usize][base..base + c[2]]
                    .iter()
                    .filter(|&&m| m == id)
                    .count();
            }
        }
        n
    }

    pub fn cell_count(&self, id: u8) -> usize {
        self.cell_material.iter().filter(|&&m| m == id).count()
    }

    pub fn find_material(&self, spec: &MaterialSpec) -> Option<u8> {
        self.materials.iter().position(|m| m == spec).map(|p| p as u8)
    }

    /// Place a lumped element on a z-edge and return its index.
    pub fn add_lumped_z(&mut self, node: [usize; 3], resistance: f64, is_source: bool) -> usize {
        let id = self.edge_material[2][self.idx(node[0], node[1], node[2])];
        let (eps_r, sigma) = match self.materials[id as usize]
            .to_solver(self.design_frequency, self.delta)
        {
            Ok(SolverMaterial::Lossy { eps_r, sigma }) => (eps_r, sigma),
            _ => (1.0, 0.0),
        };
        self.lumped.push(LumpedElement {
            axis: Axis::Z,
            index: node,
            resistance,
            eps_r,
            sigma,
            is_source,
        });
        self.lumped.len() - 1
    }

    /// Make a lumped source on the z-edge at `node` the active port, with the
    /// current measured on the z-edge directly above.
    pub fn set_port(&mut self, node: [usize; 3], reference_impedance: f64, label_index: usize) {
        let element = self.add_lumped_z(node, reference_impedance, true);
        self.port = Some(PortSite {
            label_index,
            element,
            current_edge: [node[0], node[1], node[2] + 1],
            reference_impedance,
        });
    }

    /// Point reflection through the grid centre in x/y (z unchanged).
    pub fn point_reflected(&self) -> VoxelGrid {
        let [nx, ny, nz] = self.dims;
        let mut out = self.clone();
        for axis in Axis::ALL {
            let c = self.edge_counts(axis);
            for i in 0..c[0] {
                for j in 0..c[1] {
                    let (ri, rj) = match axis {
                        Axis::X => (nx - 1 - i, ny - j),
                        Axis::Y => (nx - i, ny - 1 - j),
                        Axis::Z => (nx - i, ny - j),
                    };
                    for k in 0..c[2] {
                        out.edge_material[axis as usize][self.idx(ri, rj, k)] =
                            self.edge_material[axis as usize][self.idx(i, j, k)];
                    }
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    out.cell_material[self.cell_idx(nx - 1 - i, ny - 1 - j, k)] =
                        self.cell_material[self.cell_idx(i, j, k)];
                }
            }
        }
        for (l, src) in out.lumped.iter_mut().zip(&self.lumped) {
            l.index = [nx - src.index[0], ny - src.index[1], src.index[2]];
        }
        if let Some(p) = out.port.as_mut() {
            p.current_edge = [nx - p.current_edge[0], ny - p.current_edge[1], p.current_edge[2]];
        }
        out
    }

    /// Rotation by +90° about z, `(x, y) → (−y, x)`, for grids centred in x/y.
    pub fn rotated_90_z(&self) -> VoxelGrid {
        let [nx, ny, nz] = self.dims;
        let mut out = VoxelGrid::new([ny, nx, nz], self.delta, [self.origin[1], self.origin[0], self.origin[2]]);
        out.pml = self.pml;
        let b = self.boundaries;
        out.boundaries = [b[2], b[3], b[0], b[1], b[4], b[5]];
        out.materials = self.materials.clone();
        out.design_frequency = self.design_frequency;
        // new x-edges come from old y-edges, new y-edges from old x-edges
        for ip in 0..=ny {
            for jp in 0..=nx {
                for k in 0..=nz {
                    let dst = out.idx(ip, jp, k);
                    if ip < ny {
                        out.edge_material[0][dst] = self.edge_material[1][self.idx(jp, ny - 1 - ip, k)];
                    }
                    if jp < nx {
                        out.edge_material[1][dst] = self.edge_material[0][self.idx(jp, ny - ip, k)];
                    }
                    if k < nz {
                        out.edge_material[2][dst] = self.edge_material[2][self.idx(jp, ny - ip, k)];
                    }
                }
            }
        }
        for ip in 0..ny {
            for jp in 0..nx {
                for k in 0..nz {
                    let dst = out.cell_idx(ip, jp, k);
                    out.cell_material[dst] = self.cell_material[self.cell_idx(jp, ny - 1 - ip, k)];
                }
            }
        }
        out.lumped = self
            .lumped
            .iter()
            .map(|l| {
                assert_eq!(l.axis, Axis::Z, "only z-directed lumped elements rotate");
                LumpedElement {
                    index: [ny - l.index[1], l.index[0], l.index[2]],
                    ..*l
                }
            })
            .collect();
        out.port = self.port.map(|p| PortSite {
            current_edge: [ny - p.current_edge[1], p.current_edge[0], p.current_edge[2]],
            ..p
        });
        out
    }
}

/// Rasterize with the default quarter-wavelength air margin.
pub fn voxelize(scene: &SceneSpec, delta: f64, pml: usize) -> Result<VoxelGrid> {
    voxelize_with(scene, &VoxelOptions::new(delta, pml, scene.design_frequency))
}

pub fn voxelize_with(scene: &SceneSpec, opts: &VoxelOptions) -> Result<VoxelGrid> {
    let delta = opts.delta;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    for obj in &scene.objects {
        obj.material.validate()?;
        let Some(b) = obj.bounds() else { continue };
        let extents: Vec<f64> = (0..3).map(|a| b.max[a] - b.min[a]).collect();
        if extents.iter().all(|e| *e > 0.0) {
            let thinnest = extents.iter().cloned().fold(f64::INFINITY, f64::min);
            if thinnest < opts.min_feature_cells * delta * (1.0 - 1e-9) {
                return Err(Error::Resolution(format!(
                    "`{}` is {:.4} mm thick; delta {:.4} mm gives fewer than {} cells",
                    obj.name,
                    thinnest * 1e3,
                    delta * 1e3,
                    opts.min_feature_cells
                )));
            }
        }
    }

    let bounds = scene
        .bounds()
        .unwrap_or(Aabb::new([0.0; 3], [0.0; 3]));
    let pad = opts.air_margin + opts.pml as f64 * delta;
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..3 {
        let lo = ((bounds.min[a] - opts.air_margin) / delta + TOL).floor() - opts.pml as f64;
        let hi = ((bounds.max[a] + opts.air_margin) / delta - TOL).ceil() + opts.pml as f64;
        origin[a] = lo * delta;
        dims[a] = (hi - lo) as usize;
        debug_assert!(hi * delta - bounds.max[a] >= pad - 1e-12);
    }

    let mut grid = VoxelGrid::new(dims, delta, origin);
    grid.design_frequency = scene.design_frequency;
    if opts.pml > 0 {
        grid = grid.with_cpml(opts.pml);
    }

    // Paint in increasing priority; within a class, later objects win.
    let mut order: Vec<usize> = (0..scene.objects.len()).collect();
    order.sort_by_key(|&n| scene.objects[n].material.class());
    for n in order {
        let obj = &scene.objects[n];
        for part in &obj.parts {
            grid.paint(part, &obj.material);
        }
    }

    if let Some(port) = scene.port {
        let node = grid.nearest_node([port.position[0], port.position[1], port.z_gap]);
        // The gap keeps the medium it sits in, ignoring the PEC probe.
        let mid = grid.edge_midpoint(Axis::Z, node);
        let background = scene
            .objects
            .iter()
            .filter(|o| o.material.class() < MaterialClass::Pec && o.contains(mid, TOL * delta))
            .max_by_key(|o| o.material.class())
            .map(|o| o.material.clone())
            .unwrap_or(MaterialSpec::Vacuum);
        let idx = grid.idx(node[0], node[1], node[2]);
        let bg = grid.material_id(&background);
        grid.edge_material[2][idx] = bg;
        grid.set_port(node, port.reference_impedance, port.index);
    }
    Ok(grid)
}
