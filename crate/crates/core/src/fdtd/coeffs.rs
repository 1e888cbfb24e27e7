//! Per-edge update coefficients.
//!
//! Edges reference a small coefficient table through a `u8` id so that the
//! hot loops read one byte of material data per edge. Lumped elements get
//! their own ids.

use super::SimConfig;
use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::materials::SolverMaterial;
use crate::scene::{Axis, Boundary, VoxelGrid};

#[derive(Debug, Clone)]
pub struct UpdateCoeffs {
    /// `E ← ca·E + cb·(curl H differences)` per id.
    pub ca: Vec<f64>,
    pub cb: Vec<f64>,
    pub eps_r: Vec<f64>,
    pub sigma: Vec<f64>,
    pub pec: Vec<bool>,
    /// Id of every edge, per orientation, in the grid's node-padded layout.
    pub ids: [Vec<u8>; 3],
    /// H update factor `dt / (μ0 Δ)`.
    pub ch: f64,
    /// Source coupling `E ← E − cs·Vs` for each lumped source: (axis, flat index, cs).
    pub sources: Vec<(Axis, usize, f64)>,
}

/// Semi-implicit conductive-medium coefficients with an optional lumped
/// resistance spread over one cell.
pub(crate) fn lossy_pair(eps_r: f64, sigma: f64, dt: f64, delta: f64) -> (f64, f64) {
    let eps = EPS0 * eps_r;
    let loss = sigma * dt / (2.0 * eps);
    let ca = (1.0 - loss) / (1.0 + loss);
    let cb = (dt / (eps * delta)) / (1.0 + loss);
    (ca, cb)
}

pub fn init_coeffs(grid: &VoxelGrid, cfg: &SimConfig) -> Result<UpdateCoeffs> {
    let dt = cfg.dt;
    let delta = grid.delta;
    if (delta - cfg.delta).abs() > 1e-12 * delta {
        return Err(Error::Config(format!(
            "grid spacing {delta:e} m differs from configured {:e} m",
            cfg.delta
        )));
    }
    let mut c = UpdateCoeffs {
        ca: Vec::new(),
        cb: Vec::new(),
        eps_r: Vec::new(),
        sigma: Vec::new(),
        pec: Vec::new(),
        ids: grid.edge_material.clone(),
        ch: dt / (MU0 * delta),
        sources: Vec::new(),
    };
    let mut pec_id = None;
    for (n, m) in grid.materials.iter().enumerate() {
        match m.to_solver(grid.design_frequency, delta)? {
            SolverMaterial::Pec => {
                c.ca.push(0.0);
                c.cb.push(0.0);
                c.eps_r.push(1.0);
                c.sigma.push(0.0);
                c.pec.push(true);
                pec_id.get_or_insert(n as u8);
            }
            SolverMaterial::Lossy { eps_r, sigma } => {
                let (ca, cb) = lossy_pair(eps_r, sigma, dt, delta);
                c.ca.push(ca);
                c.cb.push(cb);
                c.eps_r.push(eps_r);
                c.sigma.push(sigma);
                c.pec.push(false);
            }
        }
    }
    let pec_id = match pec_id {
        Some(id) => id,
        None => {
            c.ca.push(0.0);
            c.cb.push(0.0);
            c.eps_r.push(1.0);
            c.sigma.push(0.0);
            c.pec.push(true);
            (c.ca.len() - 1) as u8
        }
    };
    let n_mat = grid.materials.len();
    for axis in Axis::ALL {
        let counts = grid.edge_counts(axis);
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                for k in 0..counts[2] {
                    let id = c.ids[axis as usize][grid.idx(i, j, k)];
                    if id as usize >= n_mat {
                        return Err(Error::Config(format!(
                            "edge {axis:?}({i},{j},{k}) references unknown material id {id}"
                        )));
                    }
                }
            }
        }
    }

    // Tangential E on PEC-backed faces is pinned to zero.
    let [nx, ny, nz] = grid.dims;
    let n = [nx, ny, nz];
    for face in 0..6 {
        if grid.boundaries[face] == Boundary::Pmc {
            continue;
        }
        let a = face / 2;
        let pos = if face % 2 == 0 { 0 } else { n[a] };
        for axis in Axis::ALL {
            if axis as usize == a {
                continue;
            }
            let counts = grid.edge_counts(axis);
            let mut lo = [0usize; 3];
            let mut hi = counts;
            lo[a] = pos;
            hi[a] = pos + 1;
            for i in lo[0]..hi[0] {
                for j in lo[1]..hi[1] {
                    for k in lo[2]..hi[2] {
                        c.ids[axis as usize][grid.idx(i, j, k)] = pec_id;
                    }
                }
            }
        }
    }

    for el in &grid.lumped {
        let loss_sigma = el.sigma + 1.0 / (el.resistance * delta);
        let (ca, cb) = lossy_pair(el.eps_r, loss_sigma, dt, delta);
        let eps = EPS0 * el.eps_r;
        let denom = 1.0 + loss_sigma * dt / (2.0 * eps);
        let cs = dt / (eps * el.resistance * delta * delta) / denom;
        c.ca.push(ca);
        c.cb.push(cb);
        c.eps_r.push(el.eps_r);
        c.sigma.push(loss_sigma);
        c.pec.push(false);
        if c.ca.len() > 256 {
            return Err(Error::Config("too many distinct edge coefficients".into()));
        }
        let id = (c.ca.len() - 1) as u8;
        let flat = grid.idx(el.index[0], el.index[1], el.index[2]);
        c.ids[el.axis as usize][flat] = id;
        if el.is_source {
            c.sources.push((el.axis, flat, cs));
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{dielectric_loss_sigma, DielectricSpec, MaterialSpec};
    use crate::ports::SourceWaveform;
    use crate::scene::Aabb;

    fn cfg(delta: f64) -> SimConfig {
        SimConfig::new(delta, 0.99, SourceWaveform::default()).unwrap()
    }

    #[test]
    fn vacuum_grid_is_uniform() {
        let g = VoxelGrid::new([4, 4, 4], 1e-3, [0.0; 3]);
        let cfg = cfg(1e-3);
        let c = init_coeffs(&g, &cfg).unwrap();
        assert_eq!(c.ca[0], 1.0);
        assert_eq!(c.cb[0], cfg.dt / (EPS0 * 1e-3));
    }

    #[test]
    fn lcp_pair_matches_scalar_formula() {
        let mut g = VoxelGrid::new([4, 4, 4], 1e-3, [0.0; 3]);
        let lcp = MaterialSpec::Dielectric(DielectricSpec::LCP);
        g.paint(&Aabb::new([0.0; 3], [4e-3; 3]), &lcp);
        let cfg = cfg(1e-3);
        let c = init_coeffs(&g, &cfg).unwrap();
        let id = g.find_material(&lcp).unwrap() as usize;
        let sigma = dielectric_loss_sigma(&DielectricSpec::LCP, 5.5e9).unwrap();
        let eps = EPS0 * 2.9;
        let x = sigma * cfg.dt / (2.0 * eps);
        let ca = (1.0 - x) / (1.0 + x);
        let cb = cfg.dt / (eps * 1e-3) / (1.0 + x);
        assert!((c.ca[id] - ca).abs() < 1e-15);
        assert!((c.cb[id] - cb).abs() / cb < 1e-14);
        assert!(c.ca[id] > 0.0 && c.ca[id] < 1.0);
    }

    #[test]
    fn strong_conductor_limits() {
        let (ca, cb) = lossy_pair(1.0, 1e7, 1e-12, 1e-3);
        assert!(ca < -0.99 && ca > -1.0);
        assert!(cb < 1e-3 * lossy_pair(1.0, 0.0, 1e-12, 1e-3).1);
        let mut g = VoxelGrid::new([4, 4, 4], 1e-3, [0.0; 3]);
        g.paint(&Aabb::new([0.0; 3], [4e-3; 3]), &MaterialSpec::BulkConductor { sigma: 2e8 });
        let c = init_coeffs(&g, &cfg(1e-3)).unwrap();
        let id = g.find_material(&MaterialSpec::BulkConductor { sigma: 2e8 }).unwrap() as usize;
        assert!(c.pec[id]);
        assert_eq!((c.ca[id], c.cb[id]), (0.0, 0.0));
    }

    #[test]
    fn unknown_material_is_config_error() {
        let mut g = VoxelGrid::new([4, 4, 4], 1e-3, [0.0; 3]);
        let i = g.idx(1, 1, 1);
        g.edge_material[0][i] = 7;
        assert!(matches!(init_coeffs(&g, &cfg(1e-3)), Err(Error::Config(_))));
    }

    #[test]
    fn boundary_tangential_edges_are_pec() {
        let g = VoxelGrid::new([4, 4, 4], 1e-3, [0.0; 3]);
        let c = init_coeffs(&g, &cfg(1e-3)).unwrap();
        let ex_face = c.ids[0][g.idx(1, 0, 2)];
        assert!(c.pec[ex_face as usize]);
        assert!(!c.pec[c.ids[0][g.idx(1, 2, 2)] as usize]);
    }
}
