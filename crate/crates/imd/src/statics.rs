//! Discrete static equilibrium for nodal stress fields.
//!
//! Stresses are interpolated with the same linear/bilinear shape functions as
//! displacements; the unknown vector `T` stacks `(sigma_11, sigma_22,
//! sigma_12)` per node. Weak equilibrium against every unconstrained
//! displacement test function gives the linear system `B * T = Q`, where `Q`
//! collects boundary tractions and point forces.
//!
//! All domain integrals in this crate — the rows of `B`, the objective, the
//! duality pairing, and the recovery averages — run over the single shared
//! quadrature-point cache built here, so discrete identities between them
//! hold to machine precision rather than to quadrature error.

use crate::geometry::{ElementKind, GroupRole, Mesh};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StaticsError {
    #[error("boundary condition error: {0}")]
    Config(String),
    #[error("assembly error: {0}")]
    Assembly(String),
}

/// Quadrature rule for triangles; quads always use the 2x2 Gauss rule.
///
/// Both rules integrate the (affine) equilibrium integrands of `Tri3`
/// elements exactly; the four-point rule additionally integrates cubics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleRule {
    /// Three interior points, degree-2 exact.
    #[default]
    ThreePoint,
    /// Centroid with negative weight plus three points, degree-3 exact.
    FourPoint,
}

/// Reference-element quadrature: `(weight, xi, eta)`.
fn reference_rule(kind: ElementKind, tri_rule: TriangleRule) -> Vec<(f64, f64, f64)> {
    match kind {
        ElementKind::Tri3 => match tri_rule {
            TriangleRule::ThreePoint => {
                let w = 1.0 / 6.0;
                vec![
                    (w, 1.0 / 6.0, 1.0 / 6.0),
                    (w, 2.0 / 3.0, 1.0 / 6.0),
                    (w, 1.0 / 6.0, 2.0 / 3.0),
                ]
            }
            TriangleRule::FourPoint => vec![
                (-27.0 / 96.0, 1.0 / 3.0, 1.0 / 3.0),
                (25.0 / 96.0, 0.2, 0.2),
                (25.0 / 96.0, 0.6, 0.2),
                (25.0 / 96.0, 0.2, 0.6),
            ],
        },
        ElementKind::Quad4 => {
            let g = 1.0 / 3.0_f64.sqrt();
            vec![
                (1.0, -g, -g),
                (1.0, g, -g),
                (1.0, -g, g),
                (1.0, g, g),
            ]
        }
    }
}

/// Shape function values at a reference point.
fn shape_values(kind: ElementKind, xi: f64, eta: f64) -> Vec<f64> {
    match kind {
        ElementKind::Tri3 => vec![1.0 - xi - eta, xi, eta],
        ElementKind::Quad4 => vec![
            0.25 * (1.0 - xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 - eta),
            0.25 * (1.0 + xi) * (1.0 + eta),
            0.25 * (1.0 - xi) * (1.0 + eta),
        ],
    }
}

/// Shape function gradients w.r.t. reference coordinates.
fn shape_gradients(kind: ElementKind, xi: f64, eta: f64) -> Vec<[f64; 2]> {
    match kind {
        ElementKind::Tri3 => vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
        ElementKind::Quad4 => vec![
            [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
            [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
            [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
            [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
        ],
    }
}

/// One quadrature point with everything needed to integrate over it:
/// shape values `eta`, physical shape gradients `grad`, and the measure
/// `w_detj = weight * |J|`.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub elem: usize,
    pub eta: Vec<f64>,
    pub grad: Vec<[f64; 2]>,
    pub w_detj: f64,
    pub x: f64,
    pub y: f64,
}

/// The shared quadrature-point cache; iteration order is deterministic
/// (elements in id order, reference points in rule order).
#[derive(Debug, Clone)]
pub struct QpCache {
    pub points: Vec<QuadPoint>,
    pub tri_rule: TriangleRule,
}

impl QpCache {
    /// Total measure, i.e. the mesh area re-computed by quadrature.
    pub fn total_measure(&self) -> f64 {
        self.points.iter().map(|q| q.w_detj).sum()
    }
}

pub fn build_qp_cache(mesh: &Mesh, tri_rule: TriangleRule) -> Result<QpCache, StaticsError> {
    let mut points = Vec::new();
    for el in &mesh.elements {
        let coords: Vec<[f64; 2]> = el.nodes.iter().map(|&n| mesh.node_xy(n)).collect();
        for (w, xi, eta) in reference_rule(el.kind, tri_rule) {
            let vals = shape_values(el.kind, xi, eta);
            let ref_grads = shape_gradients(el.kind, xi, eta);
            // Jacobian of the reference-to-physical map.
            let mut j = [[0.0; 2]; 2];
            for (a, g) in ref_grads.iter().enumerate() {
                j[0][0] += coords[a][0] * g[0];
                j[0][1] += coords[a][0] * g[1];
                j[1][0] += coords[a][1] * g[0];
                j[1][1] += coords[a][1] * g[1];
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det <= 0.0 {
                return Err(StaticsError::Assembly(format!(
                    "element {} has non-positive Jacobian {det} at a quadrature point",
                    el.id
                )));
            }
            // Physical gradients: J^{-T} * reference gradient.
            let inv_det = 1.0 / det;
            let grad: Vec<[f64; 2]> = ref_grads
                .iter()
                .map(|g| {
                    [
                        inv_det * (j[1][1] * g[0] - j[1][0] * g[1]),
                        inv_det * (-j[0][1] * g[0] + j[0][0] * g[1]),
                    ]
                })
                .collect();
            let (mut x, mut y) = (0.0, 0.0);
            for (a, &v) in vals.iter().enumerate() {
                x += v * coords[a][0];
                y += v * coords[a][1];
            }
            points.push(QuadPoint {
                elem: el.id,
                eta: vals,
                grad,
                w_detj: w * det,
                x,
                y,
            });
        }
    }
    Ok(QpCache { points, tri_rule })
}

/// Sparse matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Compresses `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &mut Vec<(usize, usize, f64)>,
    ) -> CsrMatrix {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < nrows && c < ncols);
            if rows.last() == Some(&r) && indices.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
        }
        let mut indptr = vec![0usize; nrows + 1];
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A * x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    /// `y = A^T * x`.
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(0.0);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
    }

    pub fn to_dense_col_major(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                dense[self.indices[k] * self.nrows + r] = self.values[k];
            }
        }
        dense
    }
}

/// Maps node components to equation numbers; supported nodes are clamped in
/// both components and eliminated (no equation rows).
#[derive(Debug, Clone)]
pub struct DofMap {
    /// `dof[node][component]`; `None` when clamped.
    pub dof: Vec<[Option<usize>; 2]>,
    pub num_dofs: usize,
    pub clamped_nodes: usize,
}

impl DofMap {
    pub fn build(mesh: &Mesh, support_tags: &[String]) -> Result<DofMap, StaticsError> {
        let mut clamped = vec![false; mesh.num_nodes()];
        for tag in support_tags {
            let g = mesh
                .group(tag)
                .ok_or_else(|| StaticsError::Config(format!("unknown boundary group `{tag}`")))?;
            for &(elem, edge) in &g.edges {
                let (a, b) = mesh.elements[elem].edge_nodes(edge);
                clamped[a] = true;
                clamped[b] = true;
            }
        }
        let mut dof = vec![[None, None]; mesh.num_nodes()];
        let mut next = 0;
        for (n, d) in dof.iter_mut().enumerate() {
            if !clamped[n] {
                *d = [Some(next), Some(next + 1)];
                next += 2;
            }
        }
        Ok(DofMap {
            dof,
            num_dofs: next,
            clamped_nodes: clamped.iter().filter(|&&c| c).count(),
        })
    }
}

/// A concentrated force in N applied at a mesh node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointForce {
    pub node: usize,
    pub fx: f64,
    pub fy: f64,
}

/// Boundary conditions by group tag: clamped groups, constant edge tractions
/// in N/m, and nodal point forces in N.
#[derive(Debug, Clone, Default)]
pub struct BoundaryConditions {
    pub support_tags: Vec<String>,
    pub tractions: Vec<(String, [f64; 2])>,
    pub point_forces: Vec<PointForce>,
}

/// Reads boundary conditions off the roles stored in the mesh groups:
/// `Support` groups clamp, `Traction` groups with a vector load.
pub fn bc_from_groups(mesh: &Mesh) -> BoundaryConditions {
    let mut bc = BoundaryConditions::default();
    for g in &mesh.groups {
        match g.role {
            GroupRole::Support => bc.support_tags.push(g.tag.clone()),
            GroupRole::Traction => {
                if let Some(t) = g.traction {
                    bc.tractions.push((g.tag.clone(), t));
                }
            }
        }
    }
    bc
}

/// The assembled equilibrium system `B * T = Q`.
///
/// Rows of `B` are unconstrained displacement equations; columns are nodal
/// stress unknowns in the layout `T[3n + c]`, `c = 0,1,2` for
/// `(sigma_11, sigma_22, sigma_12)` at node `n`.
#[derive(Debug, Clone)]
pub struct StaticsSystem {
    pub b: CsrMatrix,
    pub q: Vec<f64>,
    pub dof_map: DofMap,
    pub cache: QpCache,
    pub num_stress_dofs: usize,
}

impl StaticsSystem {
    pub fn num_equations(&self) -> usize {
        self.b.nrows
    }
}

pub fn assemble(
    mesh: &Mesh,
    bc: &BoundaryConditions,
    tri_rule: TriangleRule,
) -> Result<StaticsSystem, StaticsError> {
    // Validate tags and support/traction exclusivity per edge.
    let mut supported_edges = std::collections::HashSet::new();
    for tag in &bc.support_tags {
        let g = mesh
            .group(tag)
            .ok_or_else(|| StaticsError::Config(format!("unknown boundary group `{tag}`")))?;
        supported_edges.extend(g.edges.iter().copied());
    }
    for (tag, _) in &bc.tractions {
        let g = mesh
            .group(tag)
            .ok_or_else(|| StaticsError::Config(format!("unknown boundary group `{tag}`")))?;
        for e in &g.edges {
            if supported_edges.contains(e) {
                return Err(StaticsError::Config(format!(
                    "group `{tag}` applies traction to a supported edge ({}:{})",
                    e.0, e.1
                )));
            }
        }
    }

    let dof_map = DofMap::build(mesh, &bc.support_tags)?;
    if dof_map.num_dofs == 0 {
        return Err(StaticsError::Config(
            "every node is clamped; no equilibrium equations remain".into(),
        ));
    }
    let cache = build_qp_cache(mesh, tri_rule)?;
    let num_stress_dofs = 3 * mesh.num_nodes();

    // B entries: the virtual work of the nodal stress l-component against
    // test function phi_a e_x is  sum_qp w|J| * eta_l * dphi_a/dx  on the
    // sigma_11 column and ... * dphi_a/dy on the sigma_12 column; the e_y
    // test function pairs dphi_a/dy with sigma_22 and dphi_a/dx with
    // sigma_12.
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for qp in &cache.points {
        let enodes = &mesh.elements[qp.elem].nodes;
        for (a, &na) in enodes.iter().enumerate() {
            let gx = qp.w_detj * qp.grad[a][0];
            let gy = qp.w_detj * qp.grad[a][1];
            let [dx, dy] = dof_map.dof[na];
            for (l, &nl) in enodes.iter().enumerate() {
                let e = qp.eta[l];
                if let Some(row) = dx {
                    triplets.push((row, 3 * nl, e * gx));
                    triplets.push((row, 3 * nl + 2, e * gy));
                }
                if let Some(row) = dy {
                    triplets.push((row, 3 * nl + 1, e * gy));
                    triplets.push((row, 3 * nl + 2, e * gx));
                }
            }
        }
    }
    let b = CsrMatrix::from_triplets(dof_map.num_dofs, num_stress_dofs, &mut triplets);

    // Q: consistent load vector. A constant traction on a straight edge with
    // linear shape functions lumps t*len/2 onto each end node.
    let mut q = vec![0.0; dof_map.num_dofs];
    for (tag, [tx, ty]) in &bc.tractions {
        let g = mesh.group(tag).expect("validated above");
        let mut total_len = 0.0;
        for &(elem, edge) in &g.edges {
            let (na, nb) = mesh.elements[elem].edge_nodes(edge);
            let pa = mesh.node_xy(na);
            let pb = mesh.node_xy(nb);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            total_len += len;
            for node in [na, nb] {
                let [dx, dy] = dof_map.dof[node];
                if let Some(i) = dx {
                    q[i] += 0.5 * len * tx;
                }
                if let Some(i) = dy {
                    q[i] += 0.5 * len * ty;
                }
            }
        }
        if total_len <= 0.0 {
            return Err(StaticsError::Config(format!(
                "traction group `{tag}` has zero total edge length"
            )));
        }
    }
    for pf in &bc.point_forces {
        if pf.node >= mesh.num_nodes() {
            return Err(StaticsError::Config(format!(
                "point force node {} out of range",
                pf.node
            )));
        }
        let [dx, dy] = dof_map.dof[pf.node];
        match (dx, dy) {
            (Some(ix), Some(iy)) => {
                q[ix] += pf.fx;
                q[iy] += pf.fy;
            }
            // A force on a clamped node does no virtual work; it is carried
            // directly by the support.
            _ => {}
        }
    }

    Ok(StaticsSystem {
        b,
        q,
        dof_map,
        cache,
        num_stress_dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_rect_mesh, ElementKind};
    use approx::assert_relative_eq;

    fn bc_left_clamp_right_pull(t: [f64; 2]) -> BoundaryConditions {
        BoundaryConditions {
            support_tags: vec!["left".into()],
            tractions: vec![("right".into(), t)],
            point_forces: vec![],
        }
    }

    #[test]
    fn quadrature_measures_match_area() {
        for kind in [ElementKind::Tri3, ElementKind::Quad4] {
            for rule in [TriangleRule::ThreePoint, TriangleRule::FourPoint] {
                let m = generate_rect_mesh(2.0, 1.5, 3, 2, kind).unwrap();
                let cache = build_qp_cache(&m, rule).unwrap();
                assert_relative_eq!(cache.total_measure(), 3.0, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn quadrature_points_inside_elements() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2, ElementKind::Tri3).unwrap();
        let cache = build_qp_cache(&m, TriangleRule::ThreePoint).unwrap();
        assert_eq!(cache.points.len(), 3 * m.num_elements());
        for q in &cache.points {
            assert!(q.x > 0.0 && q.x < 1.0 && q.y > 0.0 && q.y < 1.0);
            assert!(q.w_detj > 0.0);
            // Partition of unity and vanishing gradient sums.
            let s: f64 = q.eta.iter().sum();
            assert_relative_eq!(s, 1.0, max_relative = 1e-14);
            let gx: f64 = q.grad.iter().map(|g| g[0]).sum();
            let gy: f64 = q.grad.iter().map(|g| g[1]).sum();
            assert!(gx.abs() < 1e-13 && gy.abs() < 1e-13);
        }
    }

    #[test]
    fn csr_matvec_matches_dense_oracle() {
        use nalgebra::DMatrix;
        let mut triplets = vec![
            (0, 1, 2.0),
            (0, 1, 3.0), // duplicate to be summed
            (2, 0, -1.0),
            (2, 3, 4.0),
            (4, 2, 0.5),
        ];
        let a = CsrMatrix::from_triplets(5, 4, &mut triplets);
        assert_eq!(a.nnz(), 4);
        let dense = DMatrix::from_column_slice(5, 4, &a.to_dense_col_major());
        let x = nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0, 0.25]);
        let mut y = vec![0.0; 5];
        a.matvec(x.as_slice(), &mut y);
        let y_ref = &dense * &x;
        for i in 0..5 {
            assert_relative_eq!(y[i], y_ref[i], max_relative = 1e-15);
        }
        let w = nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut z = vec![0.0; 4];
        a.matvec_transpose(w.as_slice(), &mut z);
        let z_ref = dense.transpose() * &w;
        for i in 0..4 {
            assert_relative_eq!(z[i], z_ref[i], max_relative = 1e-15);
        }
    }

    #[test]
    fn dof_map_eliminates_supported_nodes() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2, ElementKind::Quad4).unwrap();
        let dm = DofMap::build(&m, &["left".into()]).unwrap();
        // 9 nodes, 3 on the left edge are clamped.
        assert_eq!(dm.clamped_nodes, 3);
        assert_eq!(dm.num_dofs, 12);
    }

    /// Constant-stress patch test: with boundary tractions t = sigma* . n on
    /// all free edges, the interpolant of the constant stress satisfies the
    /// discrete equilibrium exactly.
    fn patch_test(kind: ElementKind, rule: TriangleRule) {
        let m = generate_rect_mesh(2.0, 1.0, 3, 2, kind).unwrap();
        let s = [1.5, -0.75, 0.6]; // sigma11, sigma22, sigma12
        let bc = BoundaryConditions {
            support_tags: vec!["left".into()],
            tractions: vec![
                // n = (1,0): t = (s11, s12); n = (0,1): t = (s12, s22);
                // n = (0,-1): t = (-s12, -s22).
                ("right".into(), [s[0], s[2]]),
                ("top".into(), [s[2], s[1]]),
                ("bottom".into(), [-s[2], -s[1]]),
            ],
            point_forces: vec![],
        };
        let sys = assemble(&m, &bc, rule).unwrap();
        let mut t = vec![0.0; sys.num_stress_dofs];
        for n in 0..m.num_nodes() {
            t[3 * n] = s[0];
            t[3 * n + 1] = s[1];
            t[3 * n + 2] = s[2];
        }
        let mut bt = vec![0.0; sys.num_equations()];
        sys.b.matvec(&t, &mut bt);
        let scale = sys.q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (i, (&lhs, &rhs)) in bt.iter().zip(sys.q.iter()).enumerate() {
            assert!(
                (lhs - rhs).abs() <= 1e-12 * scale,
                "row {i}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn patch_test_all_elements_and_rules() {
        patch_test(ElementKind::Quad4, TriangleRule::ThreePoint);
        patch_test(ElementKind::Tri3, TriangleRule::ThreePoint);
        patch_test(ElementKind::Tri3, TriangleRule::FourPoint);
    }

    /// Interior test functions do no work against constant stress fields:
    /// those rows of B annihilate the constant interpolant.
    #[test]
    fn interior_rows_annihilate_constants() {
        let m = generate_rect_mesh(1.0, 1.0, 4, 4, ElementKind::Tri3).unwrap();
        let bc = bc_left_clamp_right_pull([1.0, 0.0]);
        let sys = assemble(&m, &bc, TriangleRule::ThreePoint).unwrap();
        let mut t = vec![0.0; sys.num_stress_dofs];
        for n in 0..m.num_nodes() {
            t[3 * n] = 2.0;
            t[3 * n + 1] = -1.0;
            t[3 * n + 2] = 0.5;
        }
        let mut bt = vec![0.0; sys.num_equations()];
        sys.b.matvec(&t, &mut bt);
        let boundary: std::collections::HashSet<usize> = m
            .boundary_edges()
            .keys()
            .flat_map(|&(a, b)| [a, b])
            .collect();
        for n in 0..m.num_nodes() {
            if boundary.contains(&n) {
                continue;
            }
            for c in 0..2 {
                if let Some(row) = sys.dof_map.dof[n][c] {
                    assert!(bt[row].abs() < 1e-13, "interior row {row} = {}", bt[row]);
                }
            }
        }
    }

    #[test]
    fn traction_lumping_splits_edge_loads() {
        // Unit square, one quad, pull right edge with (3, 0): each of the two
        // right-edge nodes receives 3 * 1.0 / 2 in x.
        let m = generate_rect_mesh(1.0, 1.0, 1, 1, ElementKind::Quad4).unwrap();
        let bc = bc_left_clamp_right_pull([3.0, 0.0]);
        let sys = assemble(&m, &bc, TriangleRule::ThreePoint).unwrap();
        let total: f64 = sys.q.iter().sum();
        assert_relative_eq!(total, 3.0, max_relative = 1e-15);
        let nonzero: Vec<f64> = sys.q.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero, vec![1.5, 1.5]);
    }

    #[test]
    fn point_force_lands_on_node_dofs() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2, ElementKind::Quad4).unwrap();
        let node = 8; // top-right corner
        let bc = BoundaryConditions {
            support_tags: vec!["left".into()],
            tractions: vec![],
            point_forces: vec![PointForce {
                node,
                fx: 2.0,
                fy: -1.0,
            }],
        };
        let sys = assemble(&m, &bc, TriangleRule::ThreePoint).unwrap();
        let [dx, dy] = sys.dof_map.dof[node];
        assert_eq!(sys.q[dx.unwrap()], 2.0);
        assert_eq!(sys.q[dy.unwrap()], -1.0);
        assert_eq!(sys.q.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn traction_on_supported_edge_rejected() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2, ElementKind::Quad4).unwrap();
        let bc = BoundaryConditions {
            support_tags: vec!["left".into()],
            tractions: vec![("left".into(), [1.0, 0.0])],
            point_forces: vec![],
        };
        match assemble(&m, &bc, TriangleRule::ThreePoint) {
            Err(StaticsError::Config(msg)) => assert!(msg.contains("supported")),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_group_tag_rejected() {
        let m = generate_rect_mesh(1.0, 1.0, 2, 2, ElementKind::Quad4).unwrap();
        let bc = BoundaryConditions {
            support_tags: vec!["west".into()],
            ..Default::default()
        };
        assert!(matches!(
            assemble(&m, &bc, TriangleRule::ThreePoint),
            Err(StaticsError::Config(_))
        ));
    }
}
