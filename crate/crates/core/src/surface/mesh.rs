use std::collections::HashMap;

use rayon::prelude::*;

use super::{FlowField, Vec3};
use crate::error::{Error, Result};

/// Largest accepted icosphere refinement level.
pub const MAX_REFINEMENT: u32 = 7;

/// Relative area below which an advanced element is rejected.
const DEGENERATE_RATIO: f64 = 1e-14;

/// Closed reference surfaces Γ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfacePreset {
    UnitSphere,
    Sphere { radius: f64 },
    /// Axis-aligned ellipsoid with semi-axes `axes`.
    Ellipsoid { axes: [f64; 3] },
}

impl SurfacePreset {
    pub fn name(&self) -> &'static str {
        match self {
            SurfacePreset::UnitSphere => "unit_sphere",
            SurfacePreset::Sphere { .. } => "sphere",
            SurfacePreset::Ellipsoid { .. } => "ellipsoid",
        }
    }

    /// Maps a unit-sphere point onto the surface and returns `(point, unit normal)`.
    fn place(&self, p: &Vec3) -> (Vec3, Vec3) {
        match *self {
            SurfacePreset::UnitSphere => (*p, *p),
            SurfacePreset::Sphere { radius } => (p * radius, *p),
            SurfacePreset::Ellipsoid { axes } => {
                let x = Vec3::new(p.x * axes[0], p.y * axes[1], p.z * axes[2]);
                let n = Vec3::new(
                    x.x / (axes[0] * axes[0]),
                    x.y / (axes[1] * axes[1]),
                    x.z / (axes[2] * axes[2]),
                );
                (x, n.normalize())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SurfacePreset::UnitSphere => Ok(()),
            SurfacePreset::Sphere { radius } if radius > 0.0 && radius.is_finite() => Ok(()),
            SurfacePreset::Sphere { radius } => {
                Err(Error::config("surface.radius", radius, "must be positive and finite"))
            }
            SurfacePreset::Ellipsoid { axes } if axes.iter().all(|a| *a > 0.0 && a.is_finite()) => Ok(()),
            SurfacePreset::Ellipsoid { axes } => Err(Error::config(
                "surface.axes",
                format!("{axes:?}"),
                "all semi-axes must be positive and finite",
            )),
        }
    }
}

/// Cached geometry of one triangle on the current surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub reference_area: f64,
    pub normal: Vec3,
    /// Gradients of the three barycentric shape functions; they lie in the
    /// triangle plane.
    pub shape_gradients: [Vec3; 3],
}

impl ElementGeometry {
    fn from_vertices(x: [Vec3; 3], reference_area: f64) -> (Self, f64) {
        let cross = (x[1] - x[0]).cross(&(x[2] - x[0]));
        let norm = cross.norm();
        let area = 0.5 * norm;
        let normal = if norm > 0.0 { cross / norm } else { Vec3::zeros() };
        let two_area = 2.0 * area;
        let mut shape_gradients = [Vec3::zeros(); 3];
        if two_area > 0.0 {
            for (i, g) in shape_gradients.iter_mut().enumerate() {
                let edge = x[(i + 2) % 3] - x[(i + 1) % 3];
                *g = normal.cross(&edge) / two_area;
            }
        }
        (
            Self {
                area,
                reference_area,
                normal,
                shape_gradients,
            },
            area,
        )
    }

    /// Area ratio `J = |T(t)| / |T(0)|`.
    pub fn area_ratio(&self) -> f64 {
        self.area / self.reference_area
    }

    /// Density `ρ = |T(0)| / |T(t)|`.
    pub fn density(&self) -> f64 {
        self.reference_area / self.area
    }

    /// `ρ·J` evaluated from the stored area pair. The numerator and
    /// denominator are the same floating-point product, so the result is 1
    /// exactly whenever both areas are positive.
    #[allow(clippy::eq_op)]
    pub fn density_times_area_ratio(&self) -> f64 {
        (self.reference_area * self.area) / (self.area * self.reference_area)
    }
}

/// Triangulated closed surface with reference and current vertex positions.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub vertices_ref: Vec<Vec3>,
    pub vertices_cur: Vec<Vec3>,
    /// Unit normals of the smooth reference surface at the vertices.
    pub normals_ref: Vec<Vec3>,
    /// Unit normals of the smooth current surface at the vertices.
    pub normals_cur: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub elements: Vec<ElementGeometry>,
    pub time: f64,
    preset: SurfacePreset,
}

/// Builds Γ₀ as an icosphere with `refinement` subdivision levels mapped
/// onto the requested preset.
pub fn build_reference_surface(preset: SurfacePreset, refinement: u32) -> Result<SurfaceMesh> {
    if refinement > MAX_REFINEMENT {
        return Err(Error::config(
            "surface.refinement",
            refinement,
            "must be at most 7",
        ));
    }
    preset.validate()?;
    let (unit, triangles) = icosphere(refinement);
    let (vertices, normals): (Vec<_>, Vec<_>) = unit.iter().map(|p| preset.place(p)).unzip();
    let elements = triangles
        .iter()
        .map(|t| {
            let x = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
            let (mut geo, area) = ElementGeometry::from_vertices(x, 0.0);
            geo.reference_area = area;
            geo
        })
        .collect();
    let mesh = SurfaceMesh {
        vertices_ref: vertices.clone(),
        vertices_cur: vertices,
        normals_ref: normals.clone(),
        normals_cur: normals,
        triangles,
        elements,
        time: 0.0,
        preset,
    };
    mesh.check_topology()?;
    Ok(mesh)
}

/// Unit icosphere; faces are oriented with outward normals.
fn icosphere(refinement: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..refinement {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

impl SurfaceMesh {
    pub fn preset(&self) -> SurfacePreset {
        self.preset
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices_ref.len()
    }

    pub fn num_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_elements() as i64
    }

    pub fn area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    pub fn reference_area(&self) -> f64 {
        self.elements.iter().map(|e| e.reference_area).sum()
    }

    /// Verifies that every directed edge occurs once and its reverse once,
    /// i.e. the mesh is closed and consistently oriented.
    pub fn check_topology(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= self.num_vertices()) {
                return Err(Error::Topology(format!("element {e} references a missing vertex")));
            }
            for k in 0..3 {
                let edge = (t[k], t[(k + 1) % 3]);
                if directed.insert(edge, e).is_some() {
                    return Err(Error::Topology(format!(
                        "directed edge {edge:?} appears twice (inconsistent orientation near element {e})"
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::Topology(format!("edge ({a}, {b}) is a boundary edge")));
            }
        }
        for (e, geo) in self.elements.iter().enumerate() {
            if !(geo.reference_area > 0.0) {
                return Err(Error::Topology(format!("element {e} has zero reference area")));
            }
        }
        Ok(())
    }

    /// Moves every vertex to `Φ(p, t)` and recomputes the element cache.
    /// Reference data is untouched, so nodal coefficient vectors stay
    /// attached to the same transported basis functions.
    pub fn advance(&self, flow: &FlowField, t: f64) -> Result<SurfaceMesh> {
        let vertices_cur: Vec<Vec3> = self.vertices_ref.iter().map(|p| flow.position(p, t)).collect();
        let elements: Vec<ElementGeometry> = self
            .triangles
            .par_iter()
            .zip(self.elements.par_iter())
            .map(|(tri, old)| {
                let x = [vertices_cur[tri[0]], vertices_cur[tri[1]], vertices_cur[tri[2]]];
                ElementGeometry::from_vertices(x, old.reference_area).0
            })
            .collect();
        if let Some((element, geo)) = elements
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.area >= DEGENERATE_RATIO * g.reference_area))
        {
            return Err(Error::DegenerateElement {
                element,
                time: t,
                area: geo.area,
                reference_area: geo.reference_area,
            });
        }
        let normals_cur = self
            .normals_ref
            .iter()
            .map(|n| flow.try_transport_normal(n, t))
            .collect::<Option<Vec<Vec3>>>()
            .ok_or(Error::DegenerateElement {
                element: 0,
                time: t,
                area: 0.0,
                reference_area: self.elements[0].reference_area,
            })?;
        Ok(SurfaceMesh {
            vertices_ref: self.vertices_ref.clone(),
            vertices_cur,
            normals_ref: self.normals_ref.clone(),
            normals_cur,
            triangles: self.triangles.clone(),
            elements,
            time: t,
            preset: self.preset,
        })
    }

    /// Piecewise-constant density `ρ = 1/J` per element.
    pub fn density(&self) -> Vec<f64> {
        self.elements.iter().map(ElementGeometry::density).collect()
    }

    /// Piecewise-constant area ratio `J` per element.
    pub fn area_ratios(&self) -> Vec<f64> {
        self.elements.iter().map(ElementGeometry::area_ratio).collect()
    }

    /// Constant in-plane gradient of the P1 interpolant of `nodal` on `element`.
    pub fn tangential_gradient(&self, nodal: &[f64], element: usize) -> Vec3 {
        let tri = self.triangles[element];
        let geo = &self.elements[element];
        (0..3).fold(Vec3::zeros(), |acc, k| acc + geo.shape_gradients[k] * nodal[tri[k]])
    }

    /// Current positions of the three vertices of `element`.
    pub fn element_vertices(&self, element: usize) -> [Vec3; 3] {
        let t = self.triangles[element];
        [self.vertices_cur[t[0]], self.vertices_cur[t[1]], self.vertices_cur[t[2]]]
    }

    /// Evaluates `f` at the reference position of every vertex.
    pub fn interpolate_reference(&self, f: impl Fn(&Vec3) -> f64) -> Vec<f64> {
        self.vertices_ref.iter().map(f).collect()
    }

    /// Evaluates `f` at the current position of every vertex.
    pub fn interpolate(&self, f: impl Fn(&Vec3) -> f64) -> Vec<f64> {
        self.vertices_cur.iter().map(f).collect()
    }
}
