//! Parametric antenna description and the six liquid-slug states.
//!
//! Scene coordinates are SI metres with the substrate centred on the origin
//! in x/y and the ground plane at `z = 0`. The microfluidic channel is a
//! rectangular ring of square cross-section resting on the substrate; the
//! liquid slug is a contiguous stretch of that ring.

mod voxel;

pub use voxel::{
    voxelize, voxelize_with, Axis, Boundary, LumpedElement, PortSite, VoxelGrid, VoxelOptions,
};

use serde::{Deserialize, Serialize};

use crate::constants::{C0, F_DESIGN};
use crate::error::{Error, Result};
use crate::materials::{DielectricSpec, GrapheneSpec, MaterialSpec};

const MM: f64 = 1.0e-3;

/// Closed axis-aligned box in metres. Zero extent along an axis is allowed
/// (sheets, wires).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tol && p[a] <= self.max[a] + tol)
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|a| self.max[a] - self.min[a]).product()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub material: MaterialSpec,
    /// Union of boxes.
    pub parts: Vec<Aabb>,
}

impl SceneObject {
    pub fn contains(&self, p: [f64; 3], tol: f64) -> bool {
        self.parts.iter().any(|b| b.contains(p, tol))
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let first = *self.parts.first()?;
        Some(self.parts.iter().fold(first, |acc, b| acc.union(b)))
    }
}

/// Probe-fed lumped port: a vertical gap edge at the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePort {
    pub index: usize,
    /// (x, y) of the probe in metres.
    pub position: [f64; 2],
    /// z of the bottom of the gap (ground plane).
    pub z_gap: f64,
    pub reference_impedance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    pub port: Option<ProbePort>,
    /// Frequency used for material reduction and the air-margin rule (Hz).
    pub design_frequency: f64,
}

impl SceneSpec {
    pub fn empty() -> Self {
        Self {
            objects: Vec::new(),
            port: None,
            design_frequency: F_DESIGN,
        }
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let mut it = self.objects.iter().filter_map(|o| o.bounds());
        let first = it.next()?;
        Some(it.fold(first, |acc, b| acc.union(&b)))
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }
}

/// Feed arrangement of the probe relative to the liquid slug.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FeedLayout {
    /// Probe offset `Lg` from the slug centre toward the substrate centre,
    /// joined to the channel by a PEC strip on top of the substrate.
    InwardStrip {
        /// Strip width (mm).
        strip_width: f64,
    },
    /// Probe directly under the slug, shifted along the ring by `offset`
    /// (mm, positive in the direction of increasing arclength).
    UnderSlug { offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaMaterials {
    pub substrate: DielectricSpec,
    pub channel_wall: DielectricSpec,
    pub liquid: MaterialSpec,
    pub ground: MaterialSpec,
}

impl Default for AntennaMaterials {
    fn default() -> Self {
        Self {
            substrate: DielectricSpec::LCP,
            channel_wall: DielectricSpec::PMMA,
            liquid: MaterialSpec::Graphene(GrapheneSpec::default()),
            ground: MaterialSpec::Pec,
        }
    }
}

/// Antenna geometry; lengths in millimetres, volume in millilitres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaParams {
    #[serde(rename = "Ls")]
    pub ls: f64,
    #[serde(rename = "Ws")]
    pub ws: f64,
    #[serde(rename = "Hs")]
    pub hs: f64,
    #[serde(rename = "Lm")]
    pub lm: f64,
    #[serde(rename = "Wm")]
    pub wm: f64,
    #[serde(rename = "Dm")]
    pub dm: f64,
    #[serde(rename = "Lg")]
    pub lg: f64,
    pub slug_volume: f64,
    pub feed: FeedLayout,
    /// Port reference impedance (Ω).
    pub reference_impedance: f64,
    pub materials: AntennaMaterials,
}

impl AntennaParams {
    /// Reference geometry with the tuned slug, feed and liquid conductivity.
    pub fn paper_table1() -> Self {
        Self {
            ls: 68.0,
            ws: 56.0,
            hs: 3.0,
            lm: 46.0,
            wm: 35.0,
            dm: 3.0,
            lg: 12.0,
            // Slug volume, feed and liquid conductivity are tuned so all six
            // states resonate near 5.5 GHz at 1 mm resolution.
            slug_volume: 0.27,
            feed: FeedLayout::UnderSlug { offset: 0.0 },
            reference_impedance: 50.0,
            materials: AntennaMaterials {
                liquid: MaterialSpec::Graphene(GrapheneSpec {
                    bulk_sigma_override: Some(200.0),
                    ..GrapheneSpec::default()
                }),
                ..AntennaMaterials::default()
            },
        }
    }

    /// Reference geometry with the full 1 ml liquid volume.
    pub fn paper_table1_1ml() -> Self {
        Self {
            slug_volume: 1.0,
            ..Self::paper_table1()
        }
    }

    /// Errors carry the offending field name.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let fields = [
            ("Ls", self.ls),
            ("Ws", self.ws),
            ("Hs", self.hs),
            ("Lm", self.lm),
            ("Wm", self.wm),
            ("Dm", self.dm),
            ("slug_volume", self.slug_volume),
            ("reference_impedance", self.reference_impedance),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err((name.into(), format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.lm + self.dm < self.ls) {
            return Err(("Lm".into(), "Lm + Dm must be < Ls".into()));
        }
        if !(self.wm + self.dm < self.ws) {
            return Err(("Wm".into(), "Wm + Dm must be < Ws".into()));
        }
        if !(self.lg >= 0.0 && self.lg < self.lm.min(self.wm) / 2.0) {
            return Err(("Lg".into(), "0 <= Lg < min(Lm, Wm)/2 required".into()));
        }
        match self.feed {
            FeedLayout::InwardStrip { strip_width } => {
                if !(strip_width > 0.0) || strip_width > self.dm {
                    return Err(("feed.strip_width".into(), "must be in (0, Dm]".into()));
                }
            }
            FeedLayout::UnderSlug { offset } => {
                if !offset.is_finite() || offset.abs() > self.slug_length() / 2.0 {
                    return Err(("feed.offset".into(), "must lie within the slug".into()));
                }
            }
        }
        let m = &self.materials;
        m.substrate
            .validate()
            .map_err(|e| ("materials.substrate".into(), e.to_string()))?;
        m.channel_wall
            .validate()
            .map_err(|e| ("materials.channel_wall".into(), e.to_string()))?;
        m.liquid
            .validate()
            .map_err(|e| ("materials.liquid".into(), e.to_string()))?;
        m.ground
            .validate()
            .map_err(|e| ("materials.ground".into(), e.to_string()))?;
        Ok(())
    }

    /// Centreline perimeter of the channel ring (mm).
    pub fn ring_perimeter(&self) -> f64 {
        2.0 * (self.lm + self.wm)
    }

    /// Slug length along the ring centreline (mm) from its volume and the
    /// square `Dm × Dm` cross-section.
    pub fn slug_length(&self) -> f64 {
        self.slug_volume * 1000.0 / (self.dm * self.dm)
    }

    pub fn ring(&self) -> Ring {
        Ring {
            half_x: self.lm / 2.0,
            half_y: self.wm / 2.0,
        }
    }
}

/// Centreline rectangle of the channel (mm). Arclength starts at the
/// midpoint of the +x side and runs counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub half_x: f64,
    pub half_y: f64,
}

/// One straight side of the ring in arclength terms.
#[derive(Debug, Clone, Copy)]
struct Side {
    s0: f64,
    s1: f64,
    start: [f64; 2],
    dir: [f64; 2],
}

impl Ring {
    pub fn perimeter(&self) -> f64 {
        4.0 * (self.half_x + self.half_y)
    }

    fn sides(&self) -> [Side; 5] {
        let (a, b) = (self.half_x, self.half_y);
        let l = [b, 2.0 * a, 2.0 * b, 2.0 * a, b];
        let starts = [[a, 0.0], [a, b], [-a, b], [-a, -b], [a, -b]];
        let dirs = [[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut s = 0.0;
        let mut out = [Side {
            s0: 0.0,
            s1: 0.0,
            start: [0.0; 2],
            dir: [0.0; 2],
        }; 5];
        for n in 0..5 {
            out[n] = Side {
                s0: s,
                s1: s + l[n],
                start: starts[n],
                dir: dirs[n],
            };
            s += l[n];
        }
        out
    }

    /// Point on the centreline at arclength `s` (mm, wrapped).
    pub fn point(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(self.perimeter());
        for side in self.sides() {
            if s <= side.s1 {
                let t = s - side.s0;
                return [side.start[0] + t * side.dir[0], side.start[1] + t * side.dir[1]];
            }
        }
        unreachable!("arclength wrapped into range")
    }

    /// Unit tangent at arclength `s`; at a corner, the tangent of the side
    /// that starts there.
    pub fn tangent(&self, s: f64) -> [f64; 2] {
        let s = s.rem_euclid(self.perimeter());
        for side in self.sides() {
            if s < side.s1 {
                return side.dir;
            }
        }
        [0.0, 1.0]
    }

    /// Centreline pieces `(start, end)` covered by the arclength interval
    /// `[s_lo, s_hi]`, together with flags telling whether each end sits on
    /// a corner.
    fn pieces(&self, s_lo: f64, s_hi: f64) -> Vec<([f64; 2], [f64; 2], bool, bool)> {
        let p = self.perimeter();
        let mut out = Vec::new();
        // unwrap into at most two laps
        let mut lo = s_lo.rem_euclid(p);
        let mut len = s_hi - s_lo;
        while len > 1e-12 {
            let chunk = len.min(p - lo);
            for side in self.sides() {
                let a = lo.max(side.s0);
                let b = (lo + chunk).min(side.s1);
                if b - a > 1e-12 {
                    let pa = [
                        side.start[0] + (a - side.s0) * side.dir[0],
                        side.start[1] + (a - side.s0) * side.dir[1],
                    ];
                    let pb = [
                        side.start[0] + (b - side.s0) * side.dir[0],
                        side.start[1] + (b - side.s0) * side.dir[1],
                    ];
                    let is_corner = |s: f64| self.is_corner(s);
                    out.push((pa, pb, is_corner(a), is_corner(b)));
                }
            }
            len -= chunk;
            lo = 0.0;
        }
        out
    }

    fn is_corner(&self, s: f64) -> bool {
        let (a, b) = (self.half_x, self.half_y);
        let corners = [b, b + 2.0 * a, 3.0 * b + 2.0 * a, 3.0 * b + 4.0 * a];
        corners.iter().any(|c| (s.rem_euclid(self.perimeter()) - c).abs() < 1e-9)
    }
}

/// Liquid slug location labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
}

impl Location {
    pub const ALL: [Location; 6] = [
        Location::L1,
        Location::L2,
        Location::L3,
        Location::L4,
        Location::L5,
        Location::L6,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Location::L1 => "L1",
            Location::L2 => "L2",
            Location::L3 => "L3",
            Location::L4 => "L4",
            Location::L5 => "L5",
            Location::L6 => "L6",
        }
    }

    pub fn parse(s: &str) -> Option<Location> {
        Location::ALL.into_iter().find(|l| l.label() == s.trim())
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }

    /// Beam label and azimuth (degrees) of the state's target direction.
    pub fn beam(self) -> (&'static str, f64) {
        match self {
            Location::L2 => ("B2", 0.0),
            Location::L3 => ("B3", 45.0),
            Location::L4 => ("B4", 135.0),
            Location::L5 => ("B5", 180.0),
            Location::L6 => ("B6", 225.0),
            Location::L1 => ("B1", 315.0),
        }
    }

    /// The state whose layout is the point reflection of this one.
    pub fn mirror(self) -> Location {
        match self {
            Location::L2 => Location::L5,
            Location::L5 => Location::L2,
            Location::L3 => Location::L6,
            Location::L6 => Location::L3,
            Location::L4 => Location::L1,
            Location::L1 => Location::L4,
        }
    }

    /// Slug-centre arclength on the ring (mm): the midpoints of the ±x
    /// sides and the four corners, so that the slug sits at the azimuth of
    /// the state's target beam.
    pub fn slug_center_arclength(self, ring: &Ring) -> f64 {
        let (a, b) = (ring.half_x, ring.half_y);
        match self {
            Location::L2 => 0.0,
            Location::L3 => b,
            Location::L4 => b + 2.0 * a,
            Location::L5 => 2.0 * b + 2.0 * a,
            Location::L6 => 3.0 * b + 2.0 * a,
            Location::L1 => 3.0 * b + 4.0 * a,
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Probe placement for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortPlacement {
    pub index: usize,
    /// (x, y) on the ground plane (mm).
    pub position: [f64; 2],
    pub reference_impedance: f64,
}

fn inward_unit(p: [f64; 2]) -> [f64; 2] {
    let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
    [-p[0] / n, -p[1] / n]
}

/// Port paired with `state`.
pub fn state_port_map(params: &AntennaParams, state: Location) -> PortPlacement {
    let ring = params.ring();
    let s = state.slug_center_arclength(&ring);
    let c = ring.point(s);
    let position = match params.feed {
        FeedLayout::InwardStrip { .. } => {
            let u = inward_unit(c);
            [c[0] + params.lg * u[0], c[1] + params.lg * u[1]]
        }
        FeedLayout::UnderSlug { offset } => ring.point(s + offset),
    };
    PortPlacement {
        index: state.index(),
        position,
        reference_impedance: params.reference_impedance,
    }
}

/// Half-wave resonator estimate `c / (2 L sqrt(eps_eff))`.
pub fn patch_cavity_resonance(length: f64, eps_eff: f64) -> Result<f64> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Domain(format!("length must be > 0, got {length}")));
    }
    if !(eps_eff >= 1.0) || !eps_eff.is_finite() {
        return Err(Error::Domain(format!("eps_eff must be >= 1, got {eps_eff}")));
    }
    Ok(C0 / (2.0 * length * eps_eff.sqrt()))
}

/// Closed-form effective permittivity of a microstrip of width `w` on a
/// substrate of height `h` (Hammerstad, `w/h >= 1` branch).
pub fn microstrip_eps_eff(eps_r: f64, w: f64, h: f64) -> f64 {
    (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 / (1.0 + 12.0 * h / w).sqrt()
}

/// Open-end length extension of a microstrip of width `w` on height `h`
/// (Hammerstad), used as the fringing correction of a patch edge.
pub fn microstrip_open_end(eps_eff: f64, w: f64, h: f64) -> f64 {
    0.412 * h * (eps_eff + 0.3) * (w / h + 0.264) / ((eps_eff - 0.258) * (w / h + 0.8))
}

fn mm3(p: [f64; 3]) -> [f64; 3] {
    [p[0] * MM, p[1] * MM, p[2] * MM]
}

/// Boxes of the channel duct covering the centreline pieces of `[s_lo, s_hi]`.
fn duct_boxes(params: &AntennaParams, s_lo: f64, s_hi: f64) -> Vec<Aabb> {
    let r = params.dm / 2.0;
    let z0 = params.hs;
    let z1 = params.hs + params.dm;
    params
        .ring()
        .pieces(s_lo, s_hi)
        .into_iter()
        .map(|(a, b, a_corner, b_corner)| {
            let mut lo = [a[0].min(b[0]) - r, a[1].min(b[1]) - r];
            let mut hi = [a[0].max(b[0]) + r, a[1].max(b[1]) + r];
            // Ends not on a corner are cut flush with the centreline point.
            let along = if (a[0] - b[0]).abs() > (a[1] - b[1]).abs() { 0 } else { 1 };
            for (p, corner) in [(a, a_corner), (b, b_corner)] {
                if !corner {
                    if (p[along] - lo[along] - r).abs() < 1e-9 {
                        lo[along] += r;
                    } else {
                        hi[along] -= r;
                    }
                }
            }
            Aabb::new(mm3([lo[0], lo[1], z0]), mm3([hi[0], hi[1], z1]))
        })
        .collect()
}

/// Assemble the scene for one liquid location.
pub fn build_scene(params: &AntennaParams, state: Location) -> Result<SceneSpec> {
    params
        .validate()
        .map_err(|(f, m)| Error::Geometry(format!("antenna.{f}: {m}")))?;
    let ring = params.ring();
    let perimeter = ring.perimeter();
    let slug_len = params.slug_length();
    if slug_len >= perimeter {
        return Err(Error::Geometry(format!(
            "slug length {slug_len:.3} mm exceeds ring perimeter {perimeter:.3} mm"
        )));
    }
    let (hx, hy) = (params.ls / 2.0, params.ws / 2.0);
    let mut objects = vec![
        SceneObject {
            name: "ground".into(),
            material: params.materials.ground.clone(),
            parts: vec![Aabb::new(mm3([-hx, -hy, 0.0]), mm3([hx, hy, 0.0]))],
        },
        SceneObject {
            name: "substrate".into(),
            material: MaterialSpec::Dielectric(params.materials.substrate),
            parts: vec![Aabb::new(mm3([-hx, -hy, 0.0]), mm3([hx, hy, params.hs]))],
        },
        SceneObject {
            name: "channel".into(),
            material: MaterialSpec::Dielectric(params.materials.channel_wall),
            parts: duct_boxes(params, 0.0, perimeter),
        },
    ];

    let s_center = state.slug_center_arclength(&ring);
    let slug = duct_boxes(params, s_center - slug_len / 2.0, s_center + slug_len / 2.0);
    objects.push(SceneObject {
        name: "slug".into(),
        material: params.materials.liquid.clone(),
        parts: slug.clone(),
    });

    let port = state_port_map(params, state);
    let [px, py] = port.position;
    if px.abs() > hx || py.abs() > hy {
        return Err(Error::Geometry(format!(
            "port {} at ({px:.3}, {py:.3}) mm lies outside the substrate",
            port.index
        )));
    }
    objects.push(SceneObject {
        name: "probe".into(),
        material: MaterialSpec::Pec,
        parts: vec![Aabb::new(mm3([px, py, 0.0]), mm3([px, py, params.hs]))],
    });
    if let FeedLayout::InwardStrip { strip_width } = params.feed {
        objects.push(SceneObject {
            name: "feed_strip".into(),
            material: MaterialSpec::Pec,
            parts: strip_boxes(params, state, port.position, strip_width, &slug),
        });
    }

    Ok(SceneSpec {
        objects,
        port: Some(ProbePort {
            index: port.index,
            position: [px * MM, py * MM],
            z_gap: 0.0,
            reference_impedance: params.reference_impedance,
        }),
        design_frequency: F_DESIGN,
    })
}

/// Sheet boxes on the substrate top joining the probe to the channel's
/// inner face. Diagonal runs are approximated by an axis-aligned L: first
/// along x, then along y. The y leg is dropped when the x run already ends
/// under the slug.
fn strip_boxes(params: &AntennaParams, state: Location, probe: [f64; 2], width: f64, slug: &[Aabb]) -> Vec<Aabb> {
    let ring = params.ring();
    let c = ring.point(state.slug_center_arclength(&ring));
    let r = params.dm / 2.0;
    let w = width / 2.0;
    let z = params.hs;
    // end point: slug centre pulled back to the inner duct face along each axis
    let sign = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v.signum() };
    let target = [c[0] - r * sign(c[0]), c[1] - r * sign(c[1])];
    let mut out = Vec::new();
    let (x0, x1) = (probe[0].min(target[0]), probe[0].max(target[0]));
    let on_centreline = mm3([c[0], probe[1], params.hs + r]);
    let ends_on_x_side = c[1].abs() < 1e-12 || slug.iter().any(|b| b.contains(on_centreline, 1e-12));
    let ty = if ends_on_x_side { probe[1] } else { target[1] };
    if x1 - x0 > 1e-12 {
        out.push(Aabb::new(mm3([x0, probe[1] - w, z]), mm3([x1, probe[1] + w, z])));
    }
    let (y0, y1) = (probe[1].min(ty), probe[1].max(ty));
    if y1 - y0 > 1e-12 {
        out.push(Aabb::new(
            mm3([target[0] - w, y0 - w, z]),
            mm3([target[0] + w, y1 + w, z]),
        ));
    }
    if out.is_empty() {
        out.push(Aabb::new(mm3([probe[0] - w, probe[1] - w, z]), mm3([probe[0] + w, probe[1] + w, z])));
    }
    out
}

/// Free-space wavelength at the design frequency (m).
pub fn design_wavelength() -> f64 {
    C0 / F_DESIGN
}
