//! P1 assembly on a tagged triangulation.
//!
//! Displacement degrees of freedom live on nodes off the clamped boundary.
//! At contact nodes the two degrees of freedom are the normal and tangential
//! components in the frame `(ν, τ)`, `τ = (−ν_y, ν_x)`; elsewhere they are
//! Cartesian. All matrices are dense.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix};
use rayon::prelude::*;

use super::mesh::{BoundaryTag, Mesh};
use crate::error::{Error, Result};
use crate::spaces::Coeffs;

/// Voigt strain operator of one element: rows `ε_xx, ε_yy, γ_xy`, columns
/// `(x₀, y₀, x₁, y₁, x₂, y₂)`.
pub type StrainMatrix = SMatrix<f64, 3, 6>;

/// Plane strain elasticity tensor in Voigt form.
pub fn plane_strain_tensor(lambda: f64, mu: f64) -> Matrix3<f64> {
    Matrix3::new(lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu)
}

/// Voigt weights realizing `ε : ε`.
pub fn strain_inner_tensor() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, 0.5))
}

/// Gradients of the barycentric coordinates and the element area.
pub fn element_gradients(p: [[f64; 2]; 3]) -> ([f64; 3], [f64; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for k in 0..3 {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        b[k] = (p[i][1] - p[j][1]) / det;
        c[k] = (p[j][0] - p[i][0]) / det;
    }
    (b, c, 0.5 * det.abs())
}

pub fn strain_matrix(b: &[f64; 3], c: &[f64; 3]) -> StrainMatrix {
    let mut s = StrainMatrix::zeros();
    for k in 0..3 {
        s[(0, 2 * k)] = b[k];
        s[(1, 2 * k + 1)] = c[k];
        s[(2, 2 * k)] = c[k];
        s[(2, 2 * k + 1)] = b[k];
    }
    s
}

/// `area · Bᵀ D B`.
pub fn element_stiffness(p: [[f64; 2]; 3], d: &Matrix3<f64>) -> SMatrix<f64, 6, 6> {
    let (b, c, area) = element_gradients(p);
    let s = strain_matrix(&b, &c);
    s.transpose() * d * s * area
}

struct ElementBlocks {
    nodes: [usize; 3],
    area: f64,
    strain: StrainMatrix,
    elastic: SMatrix<f64, 6, 6>,
    energy: SMatrix<f64, 6, 6>,
    mass: Matrix3<f64>,
    laplace: Matrix3<f64>,
    /// `∫ φ_j div v_i`, rows over the six displacement components.
    divergence: SMatrix<f64, 6, 3>,
}

/// Assembled matrices and index maps of one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    /// First displacement dof of each node, `None` on clamped nodes.
    pub node_dof: Vec<Option<usize>>,
    /// Columns are the directions of the two local dofs of each node.
    pub frames: Vec<[[f64; 2]; 2]>,
    /// Nodes on contact edges, in increasing order; these index W.
    pub contact_nodes: Vec<usize>,
    /// Lumped boundary mass of each contact node.
    pub contact_weights: Vec<f64>,
    /// Normal dof of each contact node, `None` when the node is clamped.
    pub contact_normal_dof: Vec<Option<usize>>,
    pub normals: Vec<[f64; 2]>,
    /// Map from V-arrays to Cartesian nodal displacements (2·nodes × dim V).
    pub lift: DMatrix<f64>,
    /// Element strains (3·elements × dim V).
    pub strain: DMatrix<f64>,
    /// `∫ ε(u) : ε(v)`.
    pub gram_v: DMatrix<f64>,
    /// Vector L² mass.
    pub mass_v: DMatrix<f64>,
    /// Elasticity with the given tensor.
    pub stiffness: DMatrix<f64>,
    pub mass_y: DMatrix<f64>,
    pub laplace_y: DMatrix<f64>,
    /// `∫ ζ div v` (dim V × dim Y).
    pub divergence: DMatrix<f64>,
    /// Boundary trace (2·contact nodes × dim V): normal then tangential
    /// component per contact node.
    pub trace: DMatrix<f64>,
    /// Area weights for recovering nodal values from element values.
    pub node_elements: Vec<Vec<(usize, f64)>>,
    /// Assembled body load for a unit density in x and y (2 × dim V rows).
    pub unit_body: [Coeffs; 2],
    /// Assembled traction load on traction edges for unit tractions.
    pub unit_traction: [Coeffs; 2],
}

impl Discretization {
    pub fn new(mesh: Mesh, elastic: &Matrix3<f64>) -> Result<Self> {
        let n = mesh.nodes().len();
        let mut clamped = vec![false; n];
        for e in mesh.edges_tagged(BoundaryTag::Clamped) {
            clamped[e.a] = true;
            clamped[e.b] = true;
        }

        let mut normal_sum = vec![[0.0f64; 2]; n];
        let mut weight = vec![0.0f64; n];
        let mut on_contact = vec![false; n];
        for e in mesh.edges_tagged(BoundaryTag::Contact) {
            for v in [e.a, e.b] {
                on_contact[v] = true;
                weight[v] += 0.5 * e.length;
                normal_sum[v][0] += e.normal[0];
                normal_sum[v][1] += e.normal[1];
            }
        }

        let mut node_dof = vec![None; n];
        let mut frames = vec![[[1.0, 0.0], [0.0, 1.0]]; n];
        let mut normals = vec![[0.0; 2]; n];
        let mut dim = 0;
        for i in 0..n {
            if on_contact[i] {
                let len = normal_sum[i][0].hypot(normal_sum[i][1]);
                if len < 1e-12 {
                    return Err(Error::Mesh(format!("contact normal at node {i} is undefined")));
                }
                let nu = [normal_sum[i][0] / len, normal_sum[i][1] / len];
                normals[i] = nu;
                frames[i] = [nu, [-nu[1], nu[0]]];
            }
            if !clamped[i] {
                node_dof[i] = Some(dim);
                dim += 2;
            }
        }
        if dim == 0 {
            return Err(Error::Mesh("every node is clamped; the displacement space is empty".into()));
        }

        let contact_nodes: Vec<usize> = (0..n).filter(|&i| on_contact[i]).collect();
        let contact_weights = contact_nodes.iter().map(|&i| weight[i]).collect();
        let contact_normal_dof = contact_nodes.iter().map(|&i| node_dof[i]).collect();
        let contact_normals: Vec<[f64; 2]> = contact_nodes.iter().map(|&i| normals[i]).collect();

        let mut lift = DMatrix::zeros(2 * n, dim);
        for i in 0..n {
            if let Some(d) = node_dof[i] {
                for (k, dir) in frames[i].iter().enumerate() {
                    lift[(2 * i, d + k)] = dir[0];
                    lift[(2 * i + 1, d + k)] = dir[1];
                }
            }
        }

        let nodes = mesh.nodes();
        let energy_tensor = strain_inner_tensor();
        // element blocks in parallel, scattered sequentially in element order
        let blocks: Vec<ElementBlocks> = mesh
            .triangles()
            .par_iter()
            .map(|t| {
                let p = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
                let (b, c, area) = element_gradients(p);
                let s = strain_matrix(&b, &c);
                let st = s.transpose();
                let mut mass = Matrix3::from_element(area / 12.0);
                mass.fill_diagonal(area / 6.0);
                let mut laplace = Matrix3::zeros();
                let mut divergence = SMatrix::<f64, 6, 3>::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        laplace[(i, j)] = area * (b[i] * b[j] + c[i] * c[j]);
                        divergence[(2 * i, j)] = area / 3.0 * b[i];
                        divergence[(2 * i + 1, j)] = area / 3.0 * c[i];
                    }
                }
                ElementBlocks {
                    nodes: *t,
                    area,
                    strain: s,
                    elastic: st * elastic * s * area,
                    energy: st * energy_tensor * s * area,
                    mass,
                    laplace,
                    divergence,
                }
            })
            .collect();

        let ne = blocks.len();
        let mut k_full = DMatrix::zeros(2 * n, 2 * n);
        let mut g_full = DMatrix::zeros(2 * n, 2 * n);
        let mut mv_full = DMatrix::zeros(2 * n, 2 * n);
        let mut mass_y = DMatrix::zeros(n, n);
        let mut laplace_y = DMatrix::zeros(n, n);
        let mut div_full = DMatrix::zeros(2 * n, n);
        let mut strain_full = DMatrix::zeros(3 * ne, 2 * n);
        let mut node_area = vec![0.0; n];
        let mut body_full = [DVector::zeros(2 * n), DVector::zeros(2 * n)];
        for (e, blk) in blocks.iter().enumerate() {
            let comp = |k: usize| 2 * blk.nodes[k / 2] + k % 2;
            for a in 0..6 {
                for b in 0..6 {
                    k_full[(comp(a), comp(b))] += blk.elastic[(a, b)];
                    g_full[(comp(a), comp(b))] += blk.energy[(a, b)];
                }
                for j in 0..3 {
                    div_full[(comp(a), blk.nodes[j])] += blk.divergence[(a, j)];
                }
                for r in 0..3 {
                    strain_full[(3 * e + r, comp(a))] = blk.strain[(r, a)];
                }
            }
            for i in 0..3 {
                let ni = blk.nodes[i];
                node_area[ni] += blk.area;
                body_full[0][2 * ni] += blk.area / 3.0;
                body_full[1][2 * ni + 1] += blk.area / 3.0;
                for j in 0..3 {
                    let nj = blk.nodes[j];
                    mass_y[(ni, nj)] += blk.mass[(i, j)];
                    laplace_y[(ni, nj)] += blk.laplace[(i, j)];
                    mv_full[(2 * ni, 2 * nj)] += blk.mass[(i, j)];
                    mv_full[(2 * ni + 1, 2 * nj + 1)] += blk.mass[(i, j)];
                }
            }
        }
        let mut node_elements = vec![Vec::new(); n];
        for (e, blk) in blocks.iter().enumerate() {
            for &ni in &blk.nodes {
                node_elements[ni].push((e, blk.area / node_area[ni]));
            }
        }
        let mut traction_full = [DVector::zeros(2 * n), DVector::zeros(2 * n)];
        for e in mesh.edges_tagged(BoundaryTag::Traction) {
            for v in [e.a, e.b] {
                traction_full[0][2 * v] += 0.5 * e.length;
                traction_full[1][2 * v + 1] += 0.5 * e.length;
            }
        }

        let lt = lift.transpose();
        let rotate = |m: &DMatrix<f64>| {
            let r = &lt * m * &lift;
            (&r + r.transpose()) * 0.5
        };
        let mut trace = DMatrix::zeros(2 * contact_nodes.len(), dim);
        for (k, &i) in contact_nodes.iter().enumerate() {
            if let Some(d) = node_dof[i] {
                trace[(2 * k, d)] = 1.0;
                trace[(2 * k + 1, d + 1)] = 1.0;
            }
        }

        Ok(Self {
            gram_v: rotate(&g_full),
            mass_v: rotate(&mv_full),
            stiffness: rotate(&k_full),
            divergence: &lt * div_full,
            strain: strain_full * &lift,
            unit_body: [&lt * &body_full[0], &lt * &body_full[1]],
            unit_traction: [&lt * &traction_full[0], &lt * &traction_full[1]],
            mesh,
            node_dof,
            frames,
            contact_nodes,
            contact_weights,
            contact_normal_dof,
            normals: contact_normals,
            lift,
            mass_y,
            laplace_y,
            trace,
            node_elements,
        })
    }

    pub fn dim_v(&self) -> usize {
        self.lift.ncols()
    }

    pub fn dim_y(&self) -> usize {
        self.mass_y.nrows()
    }

    pub fn dim_w(&self) -> usize {
        self.contact_nodes.len()
    }

    /// Normal dofs of unclamped contact nodes.
    pub fn normal_dofs(&self) -> Vec<usize> {
        self.contact_normal_dof.iter().flatten().copied().collect()
    }

    /// Cartesian displacement of every node.
    pub fn nodal_vectors(&self, v: &Coeffs) -> Vec<[f64; 2]> {
        let full = &self.lift * v;
        (0..self.mesh.nodes().len()).map(|i| [full[2 * i], full[2 * i + 1]]).collect()
    }

    /// Squared strain norm `ε : ε` on each element.
    pub fn element_strain_energy(&self, v: &Coeffs) -> Vec<f64> {
        let s = &self.strain * v;
        (0..s.len() / 3).map(|e| s[3 * e].powi(2) + s[3 * e + 1].powi(2) + 0.5 * s[3 * e + 2].powi(2)).collect()
    }

    /// Area-weighted nodal average of element values.
    pub fn recover_nodal(&self, element_values: &[f64]) -> Coeffs {
        DVector::from_iterator(
            self.node_elements.len(),
            self.node_elements.iter().map(|list| list.iter().map(|&(e, w)| w * element_values[e]).sum::<f64>()),
        )
    }

    /// Lumped boundary mass of the contact trace, one weight per trace row.
    pub fn trace_mass(&self) -> DMatrix<f64> {
        let diag = DVector::from_iterator(
            2 * self.contact_weights.len(),
            self.contact_weights.iter().flat_map(|&m| [m, m]),
        );
        DMatrix::from_diagonal(&diag)
    }
}
