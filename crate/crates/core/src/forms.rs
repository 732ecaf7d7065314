//! P1 assembly of the bilinear forms on the current mesh.
//!
//! The velocity `V` and the tangential transport field `V_a^τ = V_τ − V_a`
//! enter through their nodal interpolants. With the transported basis this makes
//! the discrete transport formulas hold exactly on each affine element.

use rayon::prelude::*;

use crate::error::Result;
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::sparse::SparseMatrix;
use crate::surface::{tangential_projector, FlowField, FlowPreset, Mat3, SurfaceMesh, Vec3};

/// All matrices of one time level. `a_n[(i, j)] = a_N(χ_j, χ_i)`.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub m: SparseMatrix,
    pub g: SparseMatrix,
    pub a_n: SparseMatrix,
    pub a_s: SparseMatrix,
    pub b_mat: SparseMatrix,
    pub m_rho: SparseMatrix,
    pub a_s_rho: SparseMatrix,
    pub time: f64,
}

/// Nodal samples of the velocity fields at the current vertices.
#[derive(Debug, Clone)]
pub struct NodalVelocities {
    pub v: Vec<Vec3>,
    /// `V_a^τ`, with tangential parts taken against the smooth normal.
    pub w: Vec<Vec3>,
    /// `∂•V_a^τ` along vertex trajectories.
    pub dw: Vec<Vec3>,
}

impl NodalVelocities {
    pub fn sample(mesh: &SurfaceMesh, flow: &FlowField) -> Self {
        let t = mesh.time;
        let v = mesh.vertices_cur.iter().map(|x| flow.velocity(x, t)).collect();
        let (w, dw) = if matches!(flow.preset, FlowPreset::Static {}) && flow.advective.is_zero() {
            let n = mesh.num_vertices();
            (vec![Vec3::zeros(); n], vec![Vec3::zeros(); n])
        } else {
            let w = mesh
                .vertices_ref
                .iter()
                .zip(&mesh.normals_ref)
                .map(|(p, n)| flow.transport_tangent_along(p, n, t))
                .collect();
            let dw = mesh
                .vertices_ref
                .iter()
                .zip(&mesh.normals_ref)
                .map(|(p, n)| flow.transport_tangent_rate(p, n, t))
                .collect();
            (w, dw)
        };
        Self { v, w, dw }
    }
}

/// Surface Jacobian `G_ij = D_j V_i` of the interpolated velocity on an
/// element, and its trace.
fn element_velocity_jacobian(mesh: &SurfaceMesh, e: usize, v: &[Vec3]) -> (Mat3, f64) {
    let tri = mesh.triangles[e];
    let geo = &mesh.elements[e];
    let g = (0..3).fold(Mat3::zeros(), |acc, k| acc + v[tri[k]] * geo.shape_gradients[k].transpose());
    let div = g.trace();
    (g, div)
}

#[derive(Default)]
struct LocalBlocks {
    m: [[f64; 3]; 3],
    g: [[f64; 3]; 3],
    a_n: [[f64; 3]; 3],
    a_s: [[f64; 3]; 3],
    b: [[f64; 3]; 3],
    m_rho: [[f64; 3]; 3],
    a_s_rho: [[f64; 3]; 3],
}

fn scatter(
    mesh: &SurfaceMesh,
    locals: &[[[f64; 3]; 3]],
    triplets: &mut Vec<(usize, usize, f64)>,
) -> SparseMatrix {
    triplets.clear();
    for (tri, local) in mesh.triangles.iter().zip(locals) {
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    let n = mesh.num_vertices();
    SparseMatrix::from_triplets(n, n, triplets)
}

fn stiffness(grads: &[Vec3; 3], area: f64, tensor: Option<&Mat3>) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area
                * match tensor {
                    Some(t) => grads[i].dot(&(t * grads[j])),
                    None => grads[i].dot(&grads[j]),
                };
        }
    }
    k
}

fn scale(m: &[[f64; 3]; 3], s: f64) -> [[f64; 3]; 3] {
    m.map(|row| row.map(|v| v * s))
}

/// Assembles every form on `mesh` at `mesh.time`.
pub fn assemble(mesh: &SurfaceMesh, flow: &FlowField, policy: QuadraturePolicy) -> Result<FormMatrices> {
    let vel = NodalVelocities::sample(mesh, flow);
    let locals: Vec<LocalBlocks> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let tri = mesh.triangles[e];
            let geo = &mesh.elements[e];
            let rho = geo.density();
            let mass = policy.local_mass(geo.area);
            let (jac, div) = element_velocity_jacobian(mesh, e, &vel.v);
            let rate = Mat3::identity() * div - (jac + jac.transpose());
            let mut a_n = [[0.0; 3]; 3];
            for (i, row) in a_n.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    *entry = (0..3)
                        .map(|k| mass[j][k] * vel.w[tri[k]].dot(&geo.shape_gradients[i]))
                        .sum();
                }
            }
            let a_s = stiffness(&geo.shape_gradients, geo.area, None);
            LocalBlocks {
                m: mass,
                g: scale(&mass, div),
                a_n,
                b: stiffness(&geo.shape_gradients, geo.area, Some(&rate)),
                m_rho: scale(&mass, rho),
                a_s_rho: scale(&a_s, rho),
                a_s,
            }
        })
        .collect();
    let mut triplets = Vec::with_capacity(9 * mesh.num_elements());
    let pick = |f: fn(&LocalBlocks) -> [[f64; 3]; 3]| locals.iter().map(f).collect::<Vec<_>>();
    Ok(FormMatrices {
        m: scatter(mesh, &pick(|l| l.m), &mut triplets),
        g: scatter(mesh, &pick(|l| l.g), &mut triplets),
        a_n: scatter(mesh, &pick(|l| l.a_n), &mut triplets),
        a_s: scatter(mesh, &pick(|l| l.a_s), &mut triplets),
        b_mat: scatter(mesh, &pick(|l| l.b), &mut triplets),
        m_rho: scatter(mesh, &pick(|l| l.m_rho), &mut triplets),
        a_s_rho: scatter(mesh, &pick(|l| l.a_s_rho), &mut triplets),
        time: mesh.time,
    })
}

/// Mass matrix only, optionally weighted by the element density.
pub fn assemble_mass(mesh: &SurfaceMesh, policy: QuadraturePolicy, weighted: bool) -> SparseMatrix {
    let locals: Vec<_> = mesh
        .elements
        .iter()
        .map(|geo| scale(&policy.local_mass(geo.area), if weighted { geo.density() } else { 1.0 }))
        .collect();
    scatter(mesh, &locals, &mut Vec::new())
}

/// Stiffness matrix only, optionally weighted by the element density.
pub fn assemble_stiffness(mesh: &SurfaceMesh, weighted: bool) -> SparseMatrix {
    let locals: Vec<_> = mesh
        .elements
        .iter()
        .map(|geo| {
            scale(
                &stiffness(&geo.shape_gradients, geo.area, None),
                if weighted { geo.density() } else { 1.0 },
            )
        })
        .collect();
    scatter(mesh, &locals, &mut Vec::new())
}

/// `(P_adv)_ij = ∫ B_adv χ_j · ∇χ_i`, the production matrix of `a_N`.
///
/// On each element `B_adv = ∂•W + (∇_Γ·V)W − G W + (W·ν)Gᵀν` for the
/// interpolated `W = V_a^τ`; the last term accounts for `W` not lying
/// exactly in the flat element plane and vanishes for tangential `W`.
pub fn assemble_adv_production(mesh: &SurfaceMesh, flow: &FlowField, policy: QuadraturePolicy) -> SparseMatrix {
    let vel = NodalVelocities::sample(mesh, flow);
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let tri = mesh.triangles[e];
            let geo = &mesh.elements[e];
            let mass = policy.local_mass(geo.area);
            let (jac, div) = element_velocity_jacobian(mesh, e, &vel.v);
            let nu = geo.normal;
            let badv: [Vec3; 3] = std::array::from_fn(|k| {
                let w = vel.w[tri[k]];
                vel.dw[tri[k]] + w * div - jac * w + jac.transpose() * nu * w.dot(&nu)
            });
            let mut local = [[0.0; 3]; 3];
            for (i, row) in local.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    *entry = (0..3).map(|k| mass[j][k] * badv[k].dot(&geo.shape_gradients[i])).sum();
                }
            }
            local
        })
        .collect();
    scatter(mesh, &locals, &mut Vec::new())
}

/// `∫ ρ B̃(V)∇χ_j·∇χ_i` with `B̃ = −2D(V)`, the production matrix of the
/// weighted stiffness form.
pub fn assemble_weighted_stiffness_production(mesh: &SurfaceMesh, flow: &FlowField) -> SparseMatrix {
    let vel = NodalVelocities::sample(mesh, flow);
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let geo = &mesh.elements[e];
            let (jac, _) = element_velocity_jacobian(mesh, e, &vel.v);
            let p = tangential_projector(&geo.normal);
            let d = p * (jac + jac.transpose()) * 0.5 * p;
            stiffness(&geo.shape_gradients, geo.area * geo.density(), Some(&(d * -2.0)))
        })
        .collect();
    scatter(mesh, &locals, &mut Vec::new())
}

/// Element-wise `∇_Γ·V_h` of the interpolated velocity.
pub fn element_divergence(mesh: &SurfaceMesh, flow: &FlowField) -> Vec<f64> {
    let v: Vec<Vec3> = mesh.vertices_cur.iter().map(|x| flow.velocity(x, mesh.time)).collect();
    (0..mesh.num_elements()).map(|e| element_velocity_jacobian(mesh, e, &v).1).collect()
}

/// Pointwise `B(V) = (∇_Γ·V)I − 2D(V)` for the smooth flow velocity.
pub fn rate_tensor_b(flow: &FlowField, _x: &Vec3, t: f64, normal: &Vec3) -> Mat3 {
    let p = tangential_projector(normal);
    let grad_gamma = flow.velocity_jacobian(t) * p;
    let div = grad_gamma.trace();
    let d = p * (grad_gamma + grad_gamma.transpose()) * 0.5 * p;
    Mat3::identity() * div - d * 2.0
}

/// Pointwise `B_adv = ∂•V_a^τ + (∇_Γ·V)V_a^τ − (∇_Γ V)V_a^τ` at a point of
/// the smooth surface `Γ(t)` with unit normal `normal`.
pub fn adv_tensor_badv(flow: &FlowField, x: &Vec3, t: f64, normal: &Vec3) -> Vec3 {
    let p = tangential_projector(normal);
    let grad_gamma = flow.velocity_jacobian(t) * p;
    let div = grad_gamma.trace();
    let w = flow.velocity_split(x, normal, t).v_a_tau;
    let (l, _) = flow.preset.affine(t);
    let p_ref = flow.reference_point(x, t);
    let n_ref = (l.transpose() * normal).normalize();
    flow.transport_tangent_rate(&p_ref, &n_ref, t) + w * div - grad_gamma * w
}

fn check_nodal(params: &PotentialParams, nodal: &[f64]) -> Result<()> {
    for &u in nodal {
        if !u.is_finite() || (params.is_sharp() && u.abs() >= 1.0) {
            return Err(crate::Error::Domain {
                value: u,
                domain: if params.is_sharp() {
                    "(-1, 1) for the sharp potential"
                } else {
                    "finite real"
                },
            });
        }
    }
    Ok(())
}

/// `∫ c_E (θ/2)φ_δ(u_h) χ_j` with `c_E = ρ_E` when `weighted`, else 1.
pub fn phi_load(
    mesh: &SurfaceMesh,
    params: &PotentialParams,
    nodal: &[f64],
    policy: QuadraturePolicy,
    weighted: bool,
) -> Result<Vec<f64>> {
    check_nodal(params, nodal)?;
    let half_theta = 0.5 * params.theta;
    let locals: Vec<[f64; 3]> = mesh
        .triangles
        .par_iter()
        .zip(mesh.elements.par_iter())
        .map(|(tri, geo)| {
            let c = if weighted { geo.density() } else { 1.0 };
            let mut err = None;
            let out = policy.integrate_against_basis(geo.area * c, tri.map(|k| nodal[k]), |r| {
                params.phi(r).unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                }) * half_theta
            });
            err.map_or(Ok(out), Err)
        })
        .collect::<Result<_>>()?;
    let mut load = vec![0.0; mesh.num_vertices()];
    for (tri, local) in mesh.triangles.iter().zip(&locals) {
        for i in 0..3 {
            load[tri[i]] += local[i];
        }
    }
    Ok(load)
}

/// Jacobian of [`phi_load`]: `∫ c_E (θ/2)φ_δ'(u_h) χ_i χ_j`.
pub fn phi_jacobian(
    mesh: &SurfaceMesh,
    params: &PotentialParams,
    nodal: &[f64],
    policy: QuadraturePolicy,
    weighted: bool,
) -> Result<SparseMatrix> {
    check_nodal(params, nodal)?;
    let half_theta = 0.5 * params.theta;
    let locals: Vec<[[f64; 3]; 3]> = mesh
        .triangles
        .par_iter()
        .zip(mesh.elements.par_iter())
        .map(|(tri, geo)| {
            let c = if weighted { geo.density() } else { 1.0 };
            let u = tri.map(|k| nodal[k]);
            let mut local = [[0.0; 3]; 3];
            for (lam, w) in policy.points() {
                let r = lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2];
                let d = half_theta * params.phi_prime(r)? * w * geo.area * c;
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] += d * lam[i] * lam[j];
                    }
                }
            }
            Ok(local)
        })
        .collect::<Result<_>>()?;
    Ok(scatter(mesh, &locals, &mut Vec::new()))
}

/// `∫ c_E ((θ/2)φ_δ(u_h) − u_h) χ_j`, the discrete `m(F^δ'(u_h), χ_j)`.
pub fn nonlinear_load(
    mesh: &SurfaceMesh,
    params: &PotentialParams,
    nodal: &[f64],
    policy: QuadraturePolicy,
    weighted: bool,
) -> Result<Vec<f64>> {
    check_nodal(params, nodal)?;
    let locals: Vec<[f64; 3]> = mesh
        .triangles
        .par_iter()
        .zip(mesh.elements.par_iter())
        .map(|(tri, geo)| {
            let c = if weighted { geo.density() } else { 1.0 };
            let mut err = None;
            let out = policy.integrate_against_basis(geo.area * c, tri.map(|k| nodal[k]), |r| {
                params.f_prime(r).unwrap_or_else(|e| {
                    err = Some(e);
                    0.0
                })
            });
            err.map_or(Ok(out), Err)
        })
        .collect::<Result<_>>()?;
    let mut load = vec![0.0; mesh.num_vertices()];
    for (tri, local) in mesh.triangles.iter().zip(&locals) {
        for i in 0..3 {
            load[tri[i]] += local[i];
        }
    }
    Ok(load)
}
