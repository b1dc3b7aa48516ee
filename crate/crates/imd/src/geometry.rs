//! Meshes for the 2D design domains: structured rectangles, L-shaped domains
//! with an optional rounded reentrant corner, and a small text mesh format.
//!
//! A [`Mesh`] is immutable after construction and safe to share across
//! threads. Boundary entities are tagged through [`BoundaryGroup`]s so that
//! supports and tractions can be attached by name.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use spade::{ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use thiserror::Error;

/// Relative tolerance for the mesh-area consistency invariant.
pub const AREA_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("element {elem}: {msg}")]
    BadElement { elem: usize, msg: String },
    #[error("node {node}: {msg}")]
    BadNode { node: usize, msg: String },
    #[error("boundary group `{tag}`: {msg}")]
    BadGroup { tag: String, msg: String },
    #[error("mesh inconsistency: {0}")]
    Inconsistent(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A mesh vertex. Ids are dense `0..num_nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Tri3,
    Quad4,
}

impl ElementKind {
    pub fn num_nodes(self) -> usize {
        match self {
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Tri3 => "tri3",
            ElementKind::Quad4 => "quad4",
        }
    }
}

/// A linear element with counter-clockwise node ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    pub kind: ElementKind,
    pub nodes: Vec<usize>,
}

impl Element {
    /// Node pair of local edge `e`; edge `e` runs from local node `e` to
    /// local node `(e+1) % num_nodes`, counter-clockwise.
    pub fn edge_nodes(&self, e: usize) -> (usize, usize) {
        let k = self.nodes.len();
        (self.nodes[e % k], self.nodes[(e + 1) % k])
    }

    pub fn num_edges(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupRole {
    Support,
    Traction,
}

/// A named set of boundary edges, either clamped (`Support`) or carrying a
/// constant traction vector in N/m (`Traction`). Generated meshes tag groups
/// with a neutral `Traction` role and no vector; run configurations assign
/// the actual roles by tag.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGroup {
    pub tag: String,
    pub role: GroupRole,
    /// Constant traction `[tx, ty]` in N/m; `None` for supports and for
    /// groups that have not been assigned a load.
    pub traction: Option<[f64; 2]>,
    /// Edges as `(element id, local edge index)` pairs.
    pub edges: Vec<(usize, usize)>,
}

/// An immutable 2D mesh with tagged boundary groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub groups: Vec<BoundaryGroup>,
    /// Domain area in m^2; consistent with the element-area sum to
    /// [`AREA_REL_TOL`] relative.
    pub area: f64,
}

impl Mesh {
    /// Builds a mesh, computes its area as the element-area sum, and checks
    /// all invariants.
    pub fn new(
        nodes: Vec<Node>,
        elements: Vec<Element>,
        groups: Vec<BoundaryGroup>,
    ) -> Result<Mesh, GeometryError> {
        let area = elements
            .iter()
            .map(|e| element_area(&nodes, e))
            .sum::<f64>();
        let mesh = Mesh {
            nodes,
            elements,
            groups,
            area,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_xy(&self, id: usize) -> [f64; 2] {
        let n = &self.nodes[id];
        [n.x, n.y]
    }

    pub fn group(&self, tag: &str) -> Option<&BoundaryGroup> {
        self.groups.iter().find(|g| g.tag == tag)
    }

    pub fn element_area(&self, e: usize) -> f64 {
        element_area(&self.nodes, &self.elements[e])
    }

    /// All boundary edges as a map from the unordered node pair to the unique
    /// `(element id, local edge index)` owning it.
    pub fn boundary_edges(&self) -> HashMap<(usize, usize), (usize, usize)> {
        let mut count: HashMap<(usize, usize), (usize, (usize, usize))> = HashMap::new();
        for el in &self.elements {
            for e in 0..el.num_edges() {
                let (a, b) = el.edge_nodes(e);
                let key = (a.min(b), a.max(b));
                let entry = count.entry(key).or_insert((0, (el.id, e)));
                entry.0 += 1;
            }
        }
        count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|(k, (_, owner))| (k, owner))
            .collect()
    }

    /// Checks every mesh invariant; construction and the file reader call
    /// this, so a `Mesh` in hand is always valid.
    pub fn validate(&self) -> Result<(), GeometryError> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(GeometryError::BadNode {
                    node: n.id,
                    msg: format!("ids must be dense 0..{}, found at slot {i}", self.nodes.len()),
                });
            }
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(GeometryError::BadNode {
                    node: n.id,
                    msg: "non-finite coordinates".into(),
                });
            }
        }
        for (i, el) in self.elements.iter().enumerate() {
            if el.id != i {
                return Err(GeometryError::BadElement {
                    elem: el.id,
                    msg: "ids must be dense".into(),
                });
            }
            if el.nodes.len() != el.kind.num_nodes() {
                return Err(GeometryError::BadElement {
                    elem: el.id,
                    msg: format!(
                        "{} needs {} nodes, got {}",
                        el.kind.name(),
                        el.kind.num_nodes(),
                        el.nodes.len()
                    ),
                });
            }
            for &n in &el.nodes {
                if n >= self.nodes.len() {
                    return Err(GeometryError::BadElement {
                        elem: el.id,
                        msg: format!("node id {n} out of range"),
                    });
                }
            }
            for a in 0..el.nodes.len() {
                for b in a + 1..el.nodes.len() {
                    if el.nodes[a] == el.nodes[b] {
                        return Err(GeometryError::BadElement {
                            elem: el.id,
                            msg: format!("repeated node {}", el.nodes[a]),
                        });
                    }
                }
            }
            check_orientation(&self.nodes, el)?;
        }
        let sum: f64 = (0..self.elements.len()).map(|e| self.element_area(e)).sum();
        if (sum - self.area).abs() > AREA_REL_TOL * self.area.abs().max(1e-300) {
            return Err(GeometryError::Inconsistent(format!(
                "stored area {} vs element sum {}",
                self.area, sum
            )));
        }

        let boundary = self.boundary_edges();
        let mut support_claimed: HashMap<(usize, usize), &str> = HashMap::new();
        for g in &self.groups {
            if g.role == GroupRole::Support && g.traction.is_some() {
                return Err(GeometryError::BadGroup {
                    tag: g.tag.clone(),
                    msg: "support groups carry no traction vector".into(),
                });
            }
            for &(elem, edge) in &g.edges {
                if elem >= self.elements.len() || edge >= self.elements[elem].num_edges() {
                    return Err(GeometryError::BadGroup {
                        tag: g.tag.clone(),
                        msg: format!("edge ({elem}:{edge}) out of range"),
                    });
                }
                let (a, b) = self.elements[elem].edge_nodes(edge);
                let key = (a.min(b), a.max(b));
                if !boundary.contains_key(&key) {
                    return Err(GeometryError::BadGroup {
                        tag: g.tag.clone(),
                        msg: format!("edge ({elem}:{edge}) is not on the mesh boundary"),
                    });
                }
                if g.role == GroupRole::Support {
                    if let Some(other) = support_claimed.insert(key, &g.tag) {
                        if other != g.tag {
                            return Err(GeometryError::BadGroup {
                                tag: g.tag.clone(),
                                msg: format!("edge ({elem}:{edge}) already in support group `{other}`"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn element_area(nodes: &[Node], el: &Element) -> f64 {
    // Shoelace formula; exact for straight-sided elements.
    let mut acc = 0.0;
    let k = el.nodes.len();
    for i in 0..k {
        let a = &nodes[el.nodes[i]];
        let b = &nodes[el.nodes[(i + 1) % k]];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn check_orientation(nodes: &[Node], el: &Element) -> Result<(), GeometryError> {
    match el.kind {
        ElementKind::Tri3 => {
            if element_area(nodes, el) <= 0.0 {
                return Err(GeometryError::BadElement {
                    elem: el.id,
                    msg: "non-positive Jacobian (clockwise or degenerate triangle)".into(),
                });
            }
        }
        ElementKind::Quad4 => {
            // The bilinear map's Jacobian determinant is affine in the master
            // coordinates, so positivity at the four corners implies
            // positivity everywhere on [-1,1]^2. The corner Jacobian at node
            // i is half the cross product of the two incident edges.
            let p: Vec<[f64; 2]> = el.nodes.iter().map(|&n| [nodes[n].x, nodes[n].y]).collect();
            for i in 0..4 {
                let a = p[i];
                let b = p[(i + 1) % 4];
                let d = p[(i + 3) % 4];
                let cross = (b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]);
                if cross <= 0.0 {
                    return Err(GeometryError::BadElement {
                        elem: el.id,
                        msg: format!("non-positive Jacobian at corner {i}"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Structured grid over `[0,length] x [0,height]` with `nx * ny` cells.
///
/// `Quad4` keeps one element per cell; `Tri3` splits each cell along the
/// (lower-left, upper-right) diagonal. Boundary groups `left`, `right`,
/// `top`, `bottom` are tagged with a neutral role.
pub fn generate_rect_mesh(
    length: f64,
    height: f64,
    nx: usize,
    ny: usize,
    kind: ElementKind,
) -> Result<Mesh, GeometryError> {
    if !(length > 0.0) || !(height > 0.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "rectangle dimensions must be positive, got {length} x {height}"
        )));
    }
    if nx < 1 || ny < 1 {
        return Err(GeometryError::InvalidArgument(format!(
            "cell counts must be at least 1, got {nx} x {ny}"
        )));
    }
    let node_id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Node {
                id: node_id(i, j),
                x: length * i as f64 / nx as f64,
                y: height * j as f64 / ny as f64,
            });
        }
    }
    let mut elements = Vec::new();
    // (element id, local edge index) collectors for the four sides.
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = [
                node_id(i, j),
                node_id(i + 1, j),
                node_id(i + 1, j + 1),
                node_id(i, j + 1),
            ];
            match kind {
                ElementKind::Quad4 => {
                    let id = elements.len();
                    elements.push(Element {
                        id,
                        kind,
                        nodes: c.to_vec(),
                    });
                    // Local edges: 0 bottom, 1 right, 2 top, 3 left.
                    if j == 0 {
                        bottom.push((id, 0));
                    }
                    if i + 1 == nx {
                        right.push((id, 1));
                    }
                    if j + 1 == ny {
                        top.push((id, 2));
                    }
                    if i == 0 {
                        left.push((id, 3));
                    }
                }
                ElementKind::Tri3 => {
                    // Lower triangle (c0, c1, c2): edges 0 bottom, 1 right.
                    let lo = elements.len();
                    elements.push(Element {
                        id: lo,
                        kind,
                        nodes: vec![c[0], c[1], c[2]],
                    });
                    // Upper triangle (c0, c2, c3): edges 1 top, 2 left.
                    let hi = elements.len();
                    elements.push(Element {
                        id: hi,
                        kind,
                        nodes: vec![c[0], c[2], c[3]],
                    });
                    if j == 0 {
                        bottom.push((lo, 0));
                    }
                    if i + 1 == nx {
                        right.push((lo, 1));
                    }
                    if j + 1 == ny {
                        top.push((hi, 1));
                    }
                    if i == 0 {
                        left.push((hi, 2));
                    }
                }
            }
        }
    }
    let neutral = |tag: &str, edges: Vec<(usize, usize)>| BoundaryGroup {
        tag: tag.to_string(),
        role: GroupRole::Traction,
        traction: None,
        edges,
    };
    let groups = vec![
        neutral("left", left),
        neutral("right", right),
        neutral("top", top),
        neutral("bottom", bottom),
    ];
    let mut mesh = Mesh::new(nodes, elements, groups)?;
    // The generator knows the exact area; element sums agree to roundoff.
    mesh.area = length * height;
    mesh.validate()?;
    Ok(mesh)
}

/// Number of polyline segments approximating the quarter-circle fillet.
pub const FILLET_SEGMENTS: usize = 8;

/// Unstructured triangulation of an L-shaped domain.
///
/// The domain is the union of a horizontal arm `[0,leg] x [0,thickness]` and
/// a vertical arm `[0,thickness] x [0,leg]`. A `corner_radius > 0` rounds the
/// reentrant corner at `(thickness, thickness)` with a quarter-circle fillet
/// tangent to both inner edges, approximated by [`FILLET_SEGMENTS`] straight
/// segments. Rounding a reentrant corner fills the notch up to the arc, so
/// the area changes by `(1 - pi/4) * corner_radius^2` relative to the sharp
/// domain (up to the polyline approximation).
///
/// Tagged groups: `top` — the upper edge of the vertical arm (`y = leg`),
/// `right` — the right edge of the horizontal arm (`x = leg`). Only `Tri3`
/// meshes are produced; requesting `Quad4` is an error.
pub fn generate_lshape_mesh(
    leg: f64,
    thickness: f64,
    corner_radius: f64,
    target_h: f64,
    kind: ElementKind,
) -> Result<Mesh, GeometryError> {
    if kind != ElementKind::Tri3 {
        return Err(GeometryError::InvalidArgument(
            "the L-shape generator produces unstructured tri3 meshes only".into(),
        ));
    }
    if !(leg > 0.0) || !(thickness > 0.0) || thickness >= leg {
        return Err(GeometryError::InvalidArgument(format!(
            "need 0 < thickness < leg, got thickness {thickness}, leg {leg}"
        )));
    }
    if !(corner_radius >= 0.0) || corner_radius >= thickness || thickness + corner_radius > leg {
        return Err(GeometryError::InvalidArgument(format!(
            "infeasible fillet radius {corner_radius} for thickness {thickness}, leg {leg}"
        )));
    }
    if !(target_h > 0.0) {
        return Err(GeometryError::InvalidArgument(format!(
            "target element size must be positive, got {target_h}"
        )));
    }

    // Counter-clockwise boundary polygon, material on the left of travel.
    let t = thickness;
    let r = corner_radius;
    let mut poly: Vec<[f64; 2]> = Vec::new();
    poly.push([0.0, 0.0]);
    poly.push([leg, 0.0]);
    poly.push([leg, t]);
    if r > 0.0 {
        // Fillet arc centered at (t + r, t + r), swept from the tangent point
        // on y = t to the tangent point on x = t.
        let (cx, cy) = (t + r, t + r);
        for k in 0..=FILLET_SEGMENTS {
            let theta = 1.5 * std::f64::consts::PI
                - (k as f64 / FILLET_SEGMENTS as f64) * 0.5 * std::f64::consts::PI;
            poly.push([cx + r * theta.cos(), cy + r * theta.sin()]);
        }
    } else {
        poly.push([t, t]);
    }
    poly.push([t, leg]);
    poly.push([0.0, leg]);

    // Pre-split boundary segments to the target size so that boundary
    // resolution matches the interior; constraint edges are kept intact
    // during refinement.
    let mut boundary_pts: Vec<[f64; 2]> = Vec::new();
    let np = poly.len();
    for i in 0..np {
        let a = poly[i];
        let b = poly[(i + 1) % np];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let pieces = (len / target_h).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let s = k as f64 / pieces as f64;
            boundary_pts.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }

    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::new();
    let mut handles = Vec::with_capacity(boundary_pts.len());
    for p in &boundary_pts {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| GeometryError::Inconsistent(format!("triangulation insert: {e:?}")))?;
        handles.push(h);
    }
    let nb = handles.len();
    for i in 0..nb {
        cdt.add_constraint(handles[i], handles[(i + 1) % nb]);
    }
    // Equilateral triangle of side target_h has area ~0.433*h^2; aim there.
    // The vertex budget must outpace the expected count or refinement aborts.
    let max_area = 0.45 * target_h * target_h;
    let expected_vertices = (leg * leg / max_area).ceil() as usize;
    let refinement = RefinementParameters::<f64>::new()
        .exclude_outer_faces(true)
        .keep_constraint_edges()
        .with_max_additional_vertices(8 * expected_vertices + 20_000)
        .with_max_allowed_area(max_area);
    let outcome = cdt.refine(refinement);
    if !outcome.refinement_complete {
        return Err(GeometryError::Inconsistent(
            "triangle refinement hit its vertex budget before reaching the target size".into(),
        ));
    }
    let excluded: std::collections::HashSet<usize> = outcome
        .excluded_faces
        .iter()
        .map(|f| f.index())
        .collect();

    // Nodes in triangulation order; only vertices used by kept faces.
    let mut node_of_vertex: Vec<Option<usize>> = vec![None; cdt.num_vertices()];
    let mut nodes: Vec<Node> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix().index()) {
            continue;
        }
        let vs = face.vertices();
        let mut ids = [0usize; 3];
        for (slot, v) in vs.iter().enumerate() {
            let vi = v.fix().index();
            let id = match node_of_vertex[vi] {
                Some(id) => id,
                None => {
                    let id = nodes.len();
                    let pos = v.position();
                    nodes.push(Node {
                        id,
                        x: pos.x,
                        y: pos.y,
                    });
                    node_of_vertex[vi] = Some(id);
                    id
                }
            };
            ids[slot] = id;
        }
        elements.push(Element {
            id: elements.len(),
            kind: ElementKind::Tri3,
            nodes: ids.to_vec(),
        });
    }
    if elements.is_empty() {
        return Err(GeometryError::Inconsistent(
            "triangulation produced no interior faces".into(),
        ));
    }

    // Tag the supported and loaded edges among the boundary edges.
    let mesh_tmp = Mesh {
        nodes,
        elements,
        groups: Vec::new(),
        area: 0.0,
    };
    let tol = 1e-9 * leg;
    let mut top_edges = Vec::new();
    let mut right_edges = Vec::new();
    for ((a, b), owner) in mesh_tmp.boundary_edges() {
        let pa = mesh_tmp.node_xy(a);
        let pb = mesh_tmp.node_xy(b);
        if (pa[1] - leg).abs() <= tol && (pb[1] - leg).abs() <= tol {
            top_edges.push(owner);
        } else if (pa[0] - leg).abs() <= tol && (pb[0] - leg).abs() <= tol {
            right_edges.push(owner);
        }
    }
    // Deterministic group ordering independent of hash-map iteration.
    top_edges.sort_unstable();
    right_edges.sort_unstable();
    if top_edges.is_empty() || right_edges.is_empty() {
        return Err(GeometryError::Inconsistent(
            "failed to locate the tagged boundary segments".into(),
        ));
    }
    let neutral = |tag: &str, edges: Vec<(usize, usize)>| BoundaryGroup {
        tag: tag.to_string(),
        role: GroupRole::Traction,
        traction: None,
        edges,
    };
    Mesh::new(
        mesh_tmp.nodes,
        mesh_tmp.elements,
        vec![neutral("top", top_edges), neutral("right", right_edges)],
    )
}

/// Serializes a mesh in the text format:
///
/// ```text
/// mesh2d <num_nodes> <num_elements> <num_groups>
/// n <id> <x> <y>
/// e <id> tri3|quad4 <n0> <n1> <n2> [<n3>]
/// g <tag> support|traction [tx ty] <elem:edge> ...
/// ```
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "mesh2d {} {} {}",
        mesh.nodes.len(),
        mesh.elements.len(),
        mesh.groups.len()
    );
    for n in &mesh.nodes {
        let _ = writeln!(out, "n {} {} {}", n.id, n.x, n.y);
    }
    for e in &mesh.elements {
        let ids: Vec<String> = e.nodes.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "e {} {} {}", e.id, e.kind.name(), ids.join(" "));
    }
    for g in &mesh.groups {
        let role = match g.role {
            GroupRole::Support => "support",
            GroupRole::Traction => "traction",
        };
        let mut line = format!("g {} {}", g.tag, role);
        if let Some([tx, ty]) = g.traction {
            let _ = write!(line, " {} {}", tx, ty);
        }
        for (elem, edge) in &g.edges {
            let _ = write!(line, " {}:{}", elem, edge);
        }
        let _ = writeln!(out, "{}", line);
    }
    out
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), GeometryError> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

/// Parses the text mesh format and validates all mesh invariants.
pub fn mesh_from_str(text: &str) -> Result<Mesh, GeometryError> {
    let parse = |line: usize, tok: &str, what: &str| -> Result<f64, GeometryError> {
        tok.parse::<f64>().map_err(|_| GeometryError::Parse {
            line,
            msg: format!("expected {what}, got `{tok}`"),
        })
    };
    let parse_usize = |line: usize, tok: &str, what: &str| -> Result<usize, GeometryError> {
        tok.parse::<usize>().map_err(|_| GeometryError::Parse {
            line,
            msg: format!("expected {what}, got `{tok}`"),
        })
    };

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(GeometryError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "mesh2d" {
        return Err(GeometryError::Parse {
            line: hline,
            msg: "header must be `mesh2d <num_nodes> <num_elements> <num_groups>`".into(),
        });
    }
    let nn = parse_usize(hline, h[1], "node count")?;
    let ne = parse_usize(hline, h[2], "element count")?;
    let ng = parse_usize(hline, h[3], "group count")?;

    let mut nodes: Vec<Node> = Vec::with_capacity(nn);
    let mut elements: Vec<Element> = Vec::with_capacity(ne);
    let mut groups: Vec<BoundaryGroup> = Vec::with_capacity(ng);
    for (line, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "n" => {
                if toks.len() != 4 {
                    return Err(GeometryError::Parse {
                        line,
                        msg: "node line must be `n <id> <x> <y>`".into(),
                    });
                }
                nodes.push(Node {
                    id: parse_usize(line, toks[1], "node id")?,
                    x: parse(line, toks[2], "x coordinate")?,
                    y: parse(line, toks[3], "y coordinate")?,
                });
            }
            "e" => {
                if toks.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        msg: "element line must be `e <id> <kind> <nodes...>`".into(),
                    });
                }
                let kind = match toks[2] {
                    "tri3" => ElementKind::Tri3,
                    "quad4" => ElementKind::Quad4,
                    other => {
                        return Err(GeometryError::Parse {
                            line,
                            msg: format!("unknown element kind `{other}`"),
                        })
                    }
                };
                let want = kind.num_nodes();
                if toks.len() != 3 + want {
                    return Err(GeometryError::Parse {
                        line,
                        msg: format!("{} needs {} node ids", kind.name(), want),
                    });
                }
                let mut ids = Vec::with_capacity(want);
                for t in &toks[3..] {
                    ids.push(parse_usize(line, t, "node id")?);
                }
                elements.push(Element {
                    id: parse_usize(line, toks[1], "element id")?,
                    kind,
                    nodes: ids,
                });
            }
            "g" => {
                if toks.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        msg: "group line must be `g <tag> <role> [tx ty] <elem:edge>...`".into(),
                    });
                }
                let tag = toks[1].to_string();
                let role = match toks[2] {
                    "support" => GroupRole::Support,
                    "traction" => GroupRole::Traction,
                    other => {
                        return Err(GeometryError::Parse {
                            line,
                            msg: format!("unknown group role `{other}`"),
                        })
                    }
                };
                let mut rest = &toks[3..];
                // An optional traction vector: two tokens without a colon.
                let mut traction = None;
                if rest.len() >= 2 && !rest[0].contains(':') && !rest[1].contains(':') {
                    traction = Some([
                        parse(line, rest[0], "traction tx")?,
                        parse(line, rest[1], "traction ty")?,
                    ]);
                    rest = &rest[2..];
                }
                let mut edges = Vec::with_capacity(rest.len());
                for t in rest {
                    let (a, b) = t.split_once(':').ok_or_else(|| GeometryError::Parse {
                        line,
                        msg: format!("expected `<elem>:<edge>`, got `{t}`"),
                    })?;
                    edges.push((
                        parse_usize(line, a, "element id")?,
                        parse_usize(line, b, "local edge index")?,
                    ));
                }
                groups.push(BoundaryGroup {
                    tag,
                    role,
                    traction,
                    edges,
                });
            }
            other => {
                return Err(GeometryError::Parse {
                    line,
                    msg: format!("unknown record `{other}`"),
                })
            }
        }
    }
    if nodes.len() != nn || elements.len() != ne || groups.len() != ng {
        return Err(GeometryError::Parse {
            line: hline,
            msg: format!(
                "header promised {nn} nodes / {ne} elements / {ng} groups, found {} / {} / {}",
                nodes.len(),
                elements.len(),
                groups.len()
            ),
        });
    }
    Mesh::new(nodes, elements, groups)
}

pub fn load_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    mesh_from_str(&text)
}
