//! Run configurations and the command pipeline behind the `imd` binary.
//!
//! A [`RunConfig`] (JSON) describes one design problem: the domain and mesh
//! density, which boundary groups are clamped or loaded, the cost method and
//! exponent(s), the budget stiffness `E0`, and numerical knobs. [`prepare`]
//! turns a configuration into an assembled, decomposed problem that can be
//! solved repeatedly at different exponents; the `cmd_*` functions implement
//! the four subcommands (`mesh`, `solve`, `sweep`, `report`) on top of it
//! and write their artifacts — text meshes, VTK/CSV fields, CSV sweep
//! tables, text reports — into an output directory.
//!
//! Exports are deterministic: re-running a command with the same
//! configuration reproduces every output byte for byte, and a value exported
//! both to VTK and to CSV is rendered by the same formatter in both places.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{
    generate_lshape_mesh, generate_rect_mesh, save_mesh, ElementKind, GeometryError, GroupRole,
    Mesh,
};
use crate::nullspace::{decompose, NullSpaceError, NullSpaceRep};
use crate::objective::{
    ExponentParams, MethodTag, Objective, ObjectiveError, SmoothingParams,
};
use crate::optimizer::{
    minimize, OptimizerConfig, OptimizerError, OptimizerReport, Termination,
};
use crate::recovery::{
    finish_solve, lambda_p, ModuliField, ModuliSample, RecoveryError, SolveResult,
};
use crate::statics::{
    assemble, PointForce, StaticsError, StaticsSystem, TriangleRule,
};
use crate::verify::vp_scale;

/// Rank tolerance handed to the equilibrium null-space decomposition.
const RANK_TOL: f64 = 1e-10;

/// Relative monotonicity slack for sweep verdicts, matching the tolerance
/// the verification sweeps use for solver noise.
const SWEEP_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Errors and exit codes.
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum InterfaceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Statics(#[from] StaticsError),
    #[error(transparent)]
    NullSpace(#[from] NullSpaceError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl InterfaceError {
    /// Process exit code for the error class: 1 I/O, 2 configuration,
    /// 3 mesh generation, 4 inconsistent statics, 5 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            InterfaceError::Io { .. } => 1,
            InterfaceError::Config(_) => 2,
            InterfaceError::Geometry(_) => 3,
            InterfaceError::Statics(_) | InterfaceError::NullSpace(_) => 4,
            InterfaceError::Objective(_)
            | InterfaceError::Optimizer(_)
            | InterfaceError::Recovery(_) => 5,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InterfaceError + '_ {
    move |source| InterfaceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Run configuration.
// ---------------------------------------------------------------------------

/// A cost exponent that serializes as a JSON number, with `p = inf` spelled
/// as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Exponent;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or the string \"inf\"")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Exponent, E> {
                Ok(Exponent(v as f64))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Exponent, E> {
                Ok(Exponent(v))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Exponent, E> {
                parse_exponent(v).map(Exponent).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Parses one exponent token: a decimal number or `inf` (case-insensitive).
pub fn parse_exponent(token: &str) -> Result<f64, String> {
    let t = token.trim();
    if t.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("invalid exponent `{token}`: expected a number or \"inf\"")),
    }
}

/// Parses a comma-separated exponent list, e.g. `1,2,3,100,inf`.
pub fn parse_exponent_list(list: &str) -> Result<Vec<f64>, InterfaceError> {
    list.split(',')
        .map(|tok| parse_exponent(tok).map_err(InterfaceError::Config))
        .collect()
}

/// The meshed domain of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainSpec {
    /// Rectangle `[0, length] x [0, height]` on a structured `nx x ny` grid;
    /// boundary groups `left`, `right`, `top`, `bottom`.
    Rect {
        length: f64,
        height: f64,
        nx: usize,
        ny: usize,
    },
    /// L-shaped domain (two `leg x thickness` arms sharing the origin
    /// corner, reentrant corner optionally rounded), triangulated at element
    /// size `target_h`; boundary groups `top` and `right`.
    Lshape {
        leg: f64,
        thickness: f64,
        corner_radius: f64,
        target_h: f64,
    },
}

impl DomainSpec {
    fn default_element(&self) -> ElementKind {
        match self {
            DomainSpec::Rect { .. } => ElementKind::Quad4,
            DomainSpec::Lshape { .. } => ElementKind::Tri3,
        }
    }

    fn describe(&self) -> String {
        match self {
            DomainSpec::Rect {
                length,
                height,
                nx,
                ny,
            } => format!("rectangle {length} x {height} m, {nx} x {ny} grid"),
            DomainSpec::Lshape {
                leg,
                thickness,
                corner_radius,
                target_h,
            } => format!(
                "L-shape leg {leg} m, thickness {thickness} m, corner radius \
                 {corner_radius} m, element size {target_h} m"
            ),
        }
    }
}

/// Constant traction vector [N/m] on one boundary group.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TractionSpec {
    pub group: String,
    /// Components `[t_x, t_y]` in N/m.
    pub t: [f64; 2],
}

/// Concentrated force [N] at one mesh node.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointForceSpec {
    pub node: usize,
    pub fx: f64,
    pub fy: f64,
}

/// Quadrature selection; quads always use the 2x2 Gauss rule.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Triangle rule: `"3pt"` (default) or `"4pt"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triangle: Option<String>,
}

impl QuadratureSpec {
    fn rule(&self) -> Result<TriangleRule, InterfaceError> {
        match self.triangle.as_deref() {
            None | Some("3pt") => Ok(TriangleRule::ThreePoint),
            Some("4pt") => Ok(TriangleRule::FourPoint),
            Some(other) => Err(InterfaceError::Config(format!(
                "unknown triangle quadrature `{other}`: expected \"3pt\" or \"4pt\""
            ))),
        }
    }
}

/// Optional overrides of the minimizer defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ftol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_period: Option<usize>,
}

impl OptimizerSpec {
    fn build(&self) -> OptimizerConfig {
        let mut config = OptimizerConfig::default();
        if let Some(ftol) = self.ftol {
            config.ftol = ftol;
        }
        if self.gtol.is_some() {
            config.gtol = self.gtol;
        }
        if let Some(max_iters) = self.max_iters {
            config.max_iters = max_iters;
        }
        if self.restart_period.is_some() {
            config.restart_period = self.restart_period;
        }
        config
    }
}

/// Smoothing of the non-differentiable objectives (`sp` at any `p`, and
/// `p = 1` for both methods).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSpec {
    /// Smoothing radius relative to the max-norm of the particular stress
    /// solution; the default is the library default (`1e-8`). Larger values
    /// converge faster at an O(eps_rel) relative bias in the optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_rel: Option<f64>,
}

/// One complete run description, deserialized from a JSON file.
///
/// The `notes` field is free-form (typically physical units and provenance
/// of the numbers) and is ignored by the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<serde_json::Value>,
    pub domain: DomainSpec,
    /// Element kind, `"quad4"` or `"tri3"`; defaults to `quad4` for
    /// rectangles and `tri3` for L-shapes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
    /// Tags of clamped boundary groups.
    #[serde(default)]
    pub supports: Vec<String>,
    /// Loaded boundary groups with their traction vectors.
    #[serde(default)]
    pub tractions: Vec<TractionSpec>,
    /// Concentrated nodal forces.
    #[serde(default)]
    pub point_forces: Vec<PointForceSpec>,
    /// Cost method, `"vp"` or `"sp"`; the `--method` flag overrides it.
    #[serde(default = "default_method")]
    pub method: String,
    /// Cost exponent for `solve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Exponent>,
    /// Cost exponents for `sweep`/`report`; the `--p` flag overrides it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_list: Vec<Exponent>,
    /// Budget stiffness `E0` [N/m]: the allowed p-mean of the cost density.
    pub e0: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub optimizer: OptimizerSpec,
    #[serde(default)]
    pub smoothing: SmoothingSpec,
    /// Output directory; the `--out` flag overrides it, and the current
    /// directory is the fallback.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_method() -> String {
    "vp".to_string()
}

impl RunConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig, InterfaceError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| {
            InterfaceError::Config(format!("{}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Checks everything that does not require building the mesh.
    pub fn validate(&self) -> Result<(), InterfaceError> {
        if !(self.e0 > 0.0) || !self.e0.is_finite() {
            return Err(InterfaceError::Config(format!(
                "e0 must be a positive finite stiffness, got {}",
                self.e0
            )));
        }
        self.method_tag()?;
        self.quadrature.rule()?;
        self.element_kind()?;
        for p in self.p.iter().chain(&self.p_list) {
            if !(p.0 >= 1.0) {
                return Err(InterfaceError::Config(format!(
                    "cost exponent must satisfy 1 <= p <= inf, got {}",
                    p.0
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for tag in &self.supports {
            if !seen.insert(tag.as_str()) {
                return Err(InterfaceError::Config(format!(
                    "support group `{tag}` listed twice"
                )));
            }
        }
        let mut loaded = BTreeSet::new();
        for tr in &self.tractions {
            if seen.contains(tr.group.as_str()) {
                return Err(InterfaceError::Config(format!(
                    "group `{}` is both a support and a traction group",
                    tr.group
                )));
            }
            if !loaded.insert(tr.group.as_str()) {
                return Err(InterfaceError::Config(format!(
                    "traction group `{}` listed twice",
                    tr.group
                )));
            }
            if !tr.t.iter().all(|v| v.is_finite()) {
                return Err(InterfaceError::Config(format!(
                    "traction on `{}` has non-finite components",
                    tr.group
                )));
            }
        }
        for pf in &self.point_forces {
            if !pf.fx.is_finite() || !pf.fy.is_finite() {
                return Err(InterfaceError::Config(format!(
                    "point force at node {} has non-finite components",
                    pf.node
                )));
            }
        }
        Ok(())
    }

    pub fn method_tag(&self) -> Result<MethodTag, InterfaceError> {
        self.method
            .parse::<MethodTag>()
            .map_err(InterfaceError::Config)
    }

    pub fn element_kind(&self) -> Result<ElementKind, InterfaceError> {
        let kind = match self.element.as_deref() {
            None => self.domain.default_element(),
            Some("quad4") => ElementKind::Quad4,
            Some("tri3") => ElementKind::Tri3,
            Some(other) => {
                return Err(InterfaceError::Config(format!(
                    "unknown element kind `{other}`: expected \"quad4\" or \"tri3\""
                )))
            }
        };
        if matches!(self.domain, DomainSpec::Lshape { .. }) && kind == ElementKind::Quad4 {
            return Err(InterfaceError::Config(
                "the L-shape domain is meshed with tri3 elements only".into(),
            ));
        }
        Ok(kind)
    }
}

// ---------------------------------------------------------------------------
// Mesh building and problem preparation.
// ---------------------------------------------------------------------------

/// Generates the configured mesh and stamps the configured support/traction
/// roles onto its boundary groups, so a saved mesh carries its boundary
/// conditions.
pub fn build_mesh(config: &RunConfig) -> Result<Mesh, InterfaceError> {
    let kind = config.element_kind()?;
    let mut mesh = match config.domain {
        DomainSpec::Rect {
            length,
            height,
            nx,
            ny,
        } => generate_rect_mesh(length, height, nx, ny, kind)?,
        DomainSpec::Lshape {
            leg,
            thickness,
            corner_radius,
            target_h,
        } => generate_lshape_mesh(leg, thickness, corner_radius, target_h, kind)?,
    };

    let known = mesh_tags(&mesh).join(", ");
    for tag in &config.supports {
        match mesh.groups.iter_mut().find(|g| g.tag == *tag) {
            Some(group) => {
                group.role = GroupRole::Support;
                group.traction = None;
            }
            None => {
                return Err(InterfaceError::Config(format!(
                    "support group `{tag}` does not exist in the mesh (groups: {})",
                    known
                )))
            }
        }
    }
    for tr in &config.tractions {
        match mesh.groups.iter_mut().find(|g| g.tag == tr.group) {
            Some(group) => {
                group.role = GroupRole::Traction;
                group.traction = Some(tr.t);
            }
            None => {
                return Err(InterfaceError::Config(format!(
                    "traction group `{}` does not exist in the mesh (groups: {})",
                    tr.group,
                    known
                )))
            }
        }
    }
    for pf in &config.point_forces {
        if pf.node >= mesh.num_nodes() {
            return Err(InterfaceError::Config(format!(
                "point force node {} out of range: mesh has {} nodes",
                pf.node,
                mesh.num_nodes()
            )));
        }
    }
    Ok(mesh)
}

fn mesh_tags(mesh: &Mesh) -> Vec<&str> {
    mesh.groups.iter().map(|g| g.tag.as_str()).collect()
}

/// An assembled and decomposed problem, ready to be solved at any exponent.
pub struct Prepared {
    pub config: RunConfig,
    pub mesh: Mesh,
    pub system: StaticsSystem,
    pub rep: NullSpaceRep,
    /// False when the load vanishes identically; such runs skip the
    /// minimization and report zero compliance with an all-void design.
    pub loaded: bool,
}

/// Builds the mesh, assembles equilibrium, and decomposes its null space.
pub fn prepare(config: RunConfig) -> Result<Prepared, InterfaceError> {
    if config.supports.is_empty() {
        return Err(InterfaceError::Config(
            "no support groups: the structure is not anchored".into(),
        ));
    }
    let mesh = build_mesh(&config)?;
    let mut bc = crate::statics::bc_from_groups(&mesh);
    bc.point_forces = config
        .point_forces
        .iter()
        .map(|pf| PointForce {
            node: pf.node,
            fx: pf.fx,
            fy: pf.fy,
        })
        .collect();
    let system = assemble(&mesh, &bc, config.quadrature.rule()?)?;
    let loaded = system.q.iter().any(|&v| v != 0.0);
    let rep = decompose(&system, RANK_TOL)?;
    Ok(Prepared {
        config,
        mesh,
        system,
        rep,
        loaded,
    })
}

/// One design solve with its exponent bookkeeping.
pub struct Solution {
    pub method: MethodTag,
    pub params: ExponentParams,
    /// Total cost budget `Lambda = |Omega|^{1/p} * E0`.
    pub lambda: f64,
    pub result: SolveResult,
    /// True when the run was skipped because the load vanishes.
    pub unloaded: bool,
}

impl Prepared {
    /// Minimizes the reduced objective at exponent `p` and recovers the
    /// moduli. A zero-load problem short-circuits to zero compliance and an
    /// all-void design.
    pub fn solve(&self, method: MethodTag, p: f64) -> Result<Solution, InterfaceError> {
        let params = ExponentParams::new(p)?;
        let lambda = lambda_p(self.mesh.area, p, self.config.e0);
        if !self.loaded {
            return Ok(Solution {
                method,
                params,
                lambda,
                result: self.zero_result(),
                unloaded: true,
            });
        }
        let t0_inf = self.rep.t0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let smoothing = match self.config.smoothing.eps_rel {
            Some(eps_rel) => SmoothingParams::with_relative(method, &params, t0_inf, eps_rel),
            None => SmoothingParams::default_for(method, &params, t0_inf),
        };
        let objective = Objective::new(
            &self.system.cache,
            &self.mesh,
            &self.rep,
            method,
            params,
            smoothing,
        )?;
        let alpha0 = vec![0.0; objective.num_design_dofs()];
        let optimizer = self.config.optimizer.build();
        let (alpha, report) = minimize(
            |a, g| objective.value_and_grad_or_value(a, g),
            &alpha0,
            &optimizer,
        )?;
        let result = finish_solve(&objective, alpha, report, self.config.e0)?;
        Ok(Solution {
            method,
            params,
            lambda,
            result,
            unloaded: false,
        })
    }

    fn zero_result(&self) -> SolveResult {
        let void = ModuliSample {
            k: 0.0,
            mu: 0.0,
            young: 0.0,
            poisson: 0.0,
            void: true,
        };
        SolveResult {
            alpha_hat: vec![0.0; self.rep.nullity],
            t_hat: vec![0.0; self.system.num_stress_dofs],
            energy: 0.0,
            compliance: 0.0,
            moduli: ModuliField {
                at_qps: vec![void; self.system.cache.points.len()],
                at_nodes: vec![void; self.mesh.num_nodes()],
            },
            report: OptimizerReport {
                iterations: 0,
                value: 0.0,
                grad_norm: 0.0,
                termination: Termination::Gtol,
                evals: 0,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Field export: VTK legacy ASCII and RFC 4180 CSV.
// ---------------------------------------------------------------------------

/// The one float formatter behind every exported field value, so VTK and
/// CSV files agree byte for byte on shared values.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.9e}")
}

fn fmt_exponent(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

/// Writes nodal scalar fields on a mesh as a legacy ASCII VTK 3.0
/// unstructured grid. Every field must hold one value per mesh node; an
/// empty field list writes just the grid.
pub fn export_vtk(
    mesh: &Mesh,
    fields: &[(&str, &[f64])],
    title: &str,
    path: &Path,
) -> Result<(), InterfaceError> {
    for (name, values) in fields {
        if values.len() != mesh.num_nodes() {
            return Err(InterfaceError::Config(format!(
                "field `{name}` has {} values for {} mesh nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(InterfaceError::Config(format!(
                "field name `{name}` must be non-empty without whitespace"
            )));
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.num_nodes());
    for node in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0", fmt_value(node.x), fmt_value(node.y));
    }
    let list_len: usize = mesh.elements.iter().map(|e| 1 + e.nodes.len()).sum();
    let _ = writeln!(out, "CELLS {} {list_len}", mesh.num_elements());
    for elem in &mesh.elements {
        let _ = write!(out, "{}", elem.nodes.len());
        for &n in &elem.nodes {
            let _ = write!(out, " {n}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.num_elements());
    for elem in &mesh.elements {
        let code = match elem.kind {
            ElementKind::Tri3 => 5,
            ElementKind::Quad4 => 9,
        };
        let _ = writeln!(out, "{code}");
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.num_nodes());
        for (name, values) in fields {
            let _ = writeln!(out, "SCALARS {name} double 1");
            out.push_str("LOOKUP_TABLE default\n");
            for &v in *values {
                out.push_str(&fmt_value(v));
                out.push('\n');
            }
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes an RFC 4180 CSV file: CRLF record separators, minimal quoting.
pub fn export_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), InterfaceError> {
    let mut out = String::new();
    for (i, row) in std::iter::once(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .chain(rows.iter())
        .enumerate()
    {
        if row.len() != header.len() {
            return Err(InterfaceError::Config(format!(
                "CSV row {i} has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        let line: Vec<String> = row.iter().map(|f| csv_quote(f)).collect();
        out.push_str(&line.join(","));
        out.push_str("\r\n");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Physical stress components at one quadrature point, interpolated from
/// the nodal stress vector (layout `[s_xx, s_yy, s_xy]` per node).
fn qp_stress(mesh: &Mesh, system: &StaticsSystem, t_hat: &[f64], qp: usize) -> [f64; 3] {
    let point = &system.cache.points[qp];
    let elem = &mesh.elements[point.elem];
    let mut s = [0.0; 3];
    for (l, &node) in elem.nodes.iter().enumerate() {
        for (c, sc) in s.iter_mut().enumerate() {
            *sc += point.eta[l] * t_hat[3 * node + c];
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

/// What a command produced: text for stdout and the files it wrote.
pub struct CmdOutput {
    pub stdout: String,
    pub files: Vec<PathBuf>,
}

fn resolve_out_dir(
    config: &RunConfig,
    cli_out: Option<&Path>,
) -> Result<PathBuf, InterfaceError> {
    let dir = cli_out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

/// `imd mesh`: generate the configured mesh, write it as a text mesh file,
/// and report its size.
pub fn cmd_mesh(config_path: &Path, cli_out: Option<&Path>) -> Result<CmdOutput, InterfaceError> {
    let config = RunConfig::load(config_path)?;
    let mesh = build_mesh(&config)?;
    let dir = resolve_out_dir(&config, cli_out)?;
    let path = dir.join("mesh.txt");
    save_mesh(&mesh, &path)?;
    let stdout = format!(
        "{}\nmesh: {} nodes, {} elements, area {} m^2\nwrote {}\n",
        config.domain.describe(),
        mesh.num_nodes(),
        mesh.num_elements(),
        fmt_value(mesh.area),
        path.display()
    );
    Ok(CmdOutput {
        stdout,
        files: vec![path],
    })
}

#[derive(Serialize)]
struct SolveSummary {
    method: &'static str,
    p: Exponent,
    r: f64,
    e0: f64,
    area: f64,
    lambda: f64,
    energy: f64,
    compliance: f64,
    iterations: usize,
    evals: usize,
    grad_norm: f64,
    termination: &'static str,
    nodes: usize,
    elements: usize,
    unloaded: bool,
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Ftol => "ftol",
        Termination::Gtol => "gtol",
        Termination::MaxIters => "max-iters",
        Termination::LineSearchStall => "line-search-stall",
    }
}

/// `imd solve`: run one design problem and export the summary plus the
/// recovered moduli and stress fields at nodes (VTK + CSV) and quadrature
/// points (CSV).
pub fn cmd_solve(
    config_path: &Path,
    cli_out: Option<&Path>,
    cli_p: Option<&str>,
    cli_method: Option<&str>,
) -> Result<CmdOutput, InterfaceError> {
    let config = RunConfig::load(config_path)?;
    let method = match cli_method {
        Some(m) => m.parse::<MethodTag>().map_err(InterfaceError::Config)?,
        None => config.method_tag()?,
    };
    let p = match cli_p {
        Some(list) => {
            let ps = parse_exponent_list(list)?;
            if ps.len() != 1 {
                return Err(InterfaceError::Config(format!(
                    "solve runs a single exponent, got {} (use sweep for lists)",
                    ps.len()
                )));
            }
            ps[0]
        }
        None => match config.p {
            Some(p) => p.0,
            None => {
                return Err(InterfaceError::Config(
                    "no exponent: set `p` in the configuration or pass --p".into(),
                ))
            }
        },
    };
    if !(p >= 1.0) {
        return Err(InterfaceError::Config(format!(
            "cost exponent must satisfy 1 <= p <= inf, got {p}"
        )));
    }

    let dir = resolve_out_dir(&config, cli_out)?;
    let prep = prepare(config)?;
    let sol = prep.solve(method, p)?;
    let mesh = &prep.mesh;

    let summary = SolveSummary {
        method: method.name(),
        p: Exponent(p),
        r: sol.params.r,
        e0: prep.config.e0,
        area: mesh.area,
        lambda: sol.lambda,
        energy: sol.result.energy,
        compliance: sol.result.compliance,
        iterations: sol.result.report.iterations,
        evals: sol.result.report.evals,
        grad_norm: sol.result.report.grad_norm,
        termination: termination_name(sol.result.report.termination),
        nodes: mesh.num_nodes(),
        elements: mesh.num_elements(),
        unloaded: sol.unloaded,
    };
    let summary_path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| InterfaceError::Config(format!("summary serialization: {e}")))? + "\n";
    std::fs::write(&summary_path, text).map_err(io_err(&summary_path))?;

    // Nodal fields: recovered moduli plus the stress components, which live
    // on the nodes already.
    let n = mesh.num_nodes();
    let mut nodal: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 7];
    for (i, sample) in sol.result.moduli.at_nodes.iter().enumerate() {
        nodal[0].push(sample.k);
        nodal[1].push(sample.mu);
        nodal[2].push(sample.young);
        nodal[3].push(sample.poisson);
        nodal[4].push(sol.result.t_hat[3 * i]);
        nodal[5].push(sol.result.t_hat[3 * i + 1]);
        nodal[6].push(sol.result.t_hat[3 * i + 2]);
    }
    const NODAL_NAMES: [&str; 7] = ["k", "mu", "young", "poisson", "sxx", "syy", "sxy"];
    let fields: Vec<(&str, &[f64])> = NODAL_NAMES
        .iter()
        .zip(&nodal)
        .map(|(name, values)| (*name, values.as_slice()))
        .collect();
    let vtk_path = dir.join("fields.vtk");
    let title = format!("imd {} p={} moduli and stress", method.name(), fmt_exponent(p));
    export_vtk(mesh, &fields, &title, &vtk_path)?;

    let nodes_path = dir.join("nodes.csv");
    let node_rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![
                i.to_string(),
                fmt_value(mesh.nodes[i].x),
                fmt_value(mesh.nodes[i].y),
            ];
            row.extend(nodal.iter().map(|field| fmt_value(field[i])));
            row
        })
        .collect();
    export_csv(
        &nodes_path,
        &["node", "x", "y", "k", "mu", "young", "poisson", "sxx", "syy", "sxy"],
        &node_rows,
    )?;

    let qp_path = dir.join("qpoints.csv");
    let qp_rows: Vec<Vec<String>> = sol
        .result
        .moduli
        .at_qps
        .iter()
        .enumerate()
        .map(|(q, sample)| {
            let point = &prep.system.cache.points[q];
            let s = qp_stress(mesh, &prep.system, &sol.result.t_hat, q);
            vec![
                point.elem.to_string(),
                fmt_value(point.x),
                fmt_value(point.y),
                fmt_value(point.w_detj),
                fmt_value(sample.k),
                fmt_value(sample.mu),
                fmt_value(sample.young),
                fmt_value(sample.poisson),
                fmt_value(s[0]),
                fmt_value(s[1]),
                fmt_value(s[2]),
            ]
        })
        .collect();
    export_csv(
        &qp_path,
        &[
            "element", "x", "y", "weight", "k", "mu", "young", "poisson", "sxx", "syy", "sxy",
        ],
        &qp_rows,
    )?;

    let mut stdout = String::new();
    if sol.unloaded {
        stdout.push_str("warning: the load vanishes; compliance is 0 and the design is void\n");
    }
    let _ = writeln!(
        stdout,
        "{} p={}: compliance {} N*m (r = {:.6}, lambda = {}, {} iterations, {})",
        method.name(),
        fmt_exponent(p),
        fmt_value(sol.result.compliance),
        sol.params.r,
        fmt_value(sol.lambda),
        sol.result.report.iterations,
        termination_name(sol.result.report.termination)
    );
    for path in [&summary_path, &vtk_path, &nodes_path, &qp_path] {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    Ok(CmdOutput {
        stdout,
        files: vec![summary_path, vtk_path, nodes_path, qp_path],
    })
}

/// The solved compliance table of one sweep, with monotonicity verdicts.
pub struct Sweep {
    pub prep: Prepared,
    pub solutions: Vec<(f64, Solution, Solution)>,
    /// Verdict for the summed-method law (`C_sp` nondecreasing in `p`).
    pub summed_verdict: String,
    /// Verdict for the split-method law (`C_vp / 3^{1/p}` nondecreasing).
    pub split_verdict: String,
}

fn sweep_exponents(
    config: &RunConfig,
    cli_p: Option<&str>,
) -> Result<Vec<f64>, InterfaceError> {
    let mut ps = match cli_p {
        Some(list) => parse_exponent_list(list)?,
        None => config.p_list.iter().map(|p| p.0).collect(),
    };
    if ps.len() < 2 {
        return Err(InterfaceError::Config(format!(
            "sweep needs at least two exponents, got {}",
            ps.len()
        )));
    }
    if let Some(&bad) = ps.iter().find(|&&p| !(p >= 1.0)) {
        return Err(InterfaceError::Config(format!(
            "cost exponent must satisfy 1 <= p <= inf, got {bad}"
        )));
    }
    ps.sort_by(|a, b| a.partial_cmp(b).expect("no NaN after validation"));
    if let Some(w) = ps.windows(2).find(|w| w[0] == w[1]) {
        return Err(InterfaceError::Config(format!(
            "duplicate exponent {} in sweep list",
            fmt_exponent(w[0])
        )));
    }
    Ok(ps)
}

/// Solves both methods over the exponent list and checks the two
/// monotonicity laws; violations become verdict strings, not errors.
pub fn run_sweep(config: RunConfig, cli_p: Option<&str>) -> Result<Sweep, InterfaceError> {
    let ps = sweep_exponents(&config, cli_p)?;
    let prep = prepare(config)?;
    let mut solutions = Vec::with_capacity(ps.len());
    for &p in &ps {
        let vp = prep.solve(MethodTag::Vp, p)?;
        let sp = prep.solve(MethodTag::Sp, p)?;
        solutions.push((p, vp, sp));
    }
    let verdict = |law: &str, values: Vec<(f64, f64)>| -> String {
        for w in values.windows(2) {
            let ((pa, a), (pb, b)) = (w[0], w[1]);
            if a > b * (1.0 + SWEEP_TOL) {
                return format!(
                    "violated: {law} decreases from {} at p = {} to {} at p = {}",
                    fmt_value(a),
                    fmt_exponent(pa),
                    fmt_value(b),
                    fmt_exponent(pb)
                );
            }
        }
        "ok".to_string()
    };
    let summed_verdict = verdict(
        "C_sp",
        solutions
            .iter()
            .map(|(p, _, sp)| (*p, sp.result.compliance))
            .collect(),
    );
    let split_verdict = verdict(
        "C_vp / 3^(1/p)",
        solutions
            .iter()
            .map(|(p, vp, _)| (*p, vp.result.compliance / vp_scale(*p)))
            .collect(),
    );
    Ok(Sweep {
        prep,
        solutions,
        summed_verdict,
        split_verdict,
    })
}

fn sweep_csv_rows(sweep: &Sweep) -> Vec<Vec<String>> {
    sweep
        .solutions
        .iter()
        .map(|(p, vp, sp)| {
            vec![
                fmt_exponent(*p),
                fmt_value(vp.result.compliance),
                fmt_value(sp.result.compliance),
                fmt_value(vp.result.compliance / vp_scale(*p)),
            ]
        })
        .collect()
}

fn sweep_table(sweep: &Sweep) -> String {
    let mut rows = vec![[
        "p".to_string(),
        "C_vp".to_string(),
        "C_sp".to_string(),
        "C_vp/3^(1/p)".to_string(),
    ]];
    for (p, vp, sp) in &sweep.solutions {
        rows.push([
            fmt_exponent(*p),
            fmt_value(vp.result.compliance),
            fmt_value(sp.result.compliance),
            fmt_value(vp.result.compliance / vp_scale(*p)),
        ]);
    }
    let mut widths = [0usize; 4];
    for row in &rows {
        for (w, field) in widths.iter_mut().zip(row) {
            *w = (*w).max(field.len());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(widths)
            .map(|(field, w)| format!("{field:>w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    let _ = writeln!(out, "summed-method monotonicity: {}", sweep.summed_verdict);
    let _ = writeln!(out, "split-method scaled monotonicity: {}", sweep.split_verdict);
    out
}

/// `imd sweep`: tabulate both methods' compliances over the exponent list,
/// write them as CSV, and print the aligned table with verdicts.
pub fn cmd_sweep(
    config_path: &Path,
    cli_out: Option<&Path>,
    cli_p: Option<&str>,
    cli_method: Option<&str>,
) -> Result<CmdOutput, InterfaceError> {
    if cli_method.is_some() {
        return Err(InterfaceError::Config(
            "sweep always runs both methods; drop --method".into(),
        ));
    }
    let config = RunConfig::load(config_path)?;
    let dir = resolve_out_dir(&config, cli_out)?;
    let sweep = run_sweep(config, cli_p)?;
    let csv_path = dir.join("sweep.csv");
    export_csv(
        &csv_path,
        &["p", "c_vp", "c_sp", "c_vp_scaled"],
        &sweep_csv_rows(&sweep),
    )?;
    let mut stdout = String::new();
    if !sweep.prep.loaded {
        stdout.push_str("warning: the load vanishes; all compliances are 0\n");
    }
    stdout.push_str(&sweep_table(&sweep));
    let _ = writeln!(stdout, "wrote {}", csv_path.display());
    Ok(CmdOutput {
        stdout,
        files: vec![csv_path],
    })
}

/// Measure-weighted statistics of one recovered design, for reports.
struct FieldStats {
    void_fraction: f64,
    max_young: f64,
    mean_young: f64,
    poisson_range: [f64; 2],
}

fn field_stats(prep: &Prepared, sol: &Solution) -> FieldStats {
    let mut measure = 0.0;
    let mut void_measure = 0.0;
    let mut young_int = 0.0;
    let mut max_young = 0.0_f64;
    let mut poisson_range = [f64::INFINITY, f64::NEG_INFINITY];
    for (point, sample) in prep
        .system
        .cache
        .points
        .iter()
        .zip(&sol.result.moduli.at_qps)
    {
        let w = point.w_detj;
        measure += w;
        if sample.void {
            void_measure += w;
        } else {
            poisson_range[0] = poisson_range[0].min(sample.poisson);
            poisson_range[1] = poisson_range[1].max(sample.poisson);
        }
        young_int += w * sample.young;
        max_young = max_young.max(sample.young);
    }
    if poisson_range[0] > poisson_range[1] {
        poisson_range = [0.0, 0.0];
    }
    FieldStats {
        void_fraction: if measure > 0.0 { void_measure / measure } else { 1.0 },
        max_young,
        mean_young: if measure > 0.0 { young_int / measure } else { 0.0 },
        poisson_range,
    }
}

/// `imd report`: run the sweep and write a text report that adds
/// per-solve statistics of the recovered designs to the compliance table.
pub fn cmd_report(
    config_path: &Path,
    cli_out: Option<&Path>,
    cli_p: Option<&str>,
    cli_method: Option<&str>,
) -> Result<CmdOutput, InterfaceError> {
    if cli_method.is_some() {
        return Err(InterfaceError::Config(
            "report always runs both methods; drop --method".into(),
        ));
    }
    let config = RunConfig::load(config_path)?;
    let dir = resolve_out_dir(&config, cli_out)?;
    let sweep = run_sweep(config, cli_p)?;

    let mut report = String::new();
    let _ = writeln!(report, "domain: {}", sweep.prep.config.domain.describe());
    let _ = writeln!(
        report,
        "mesh: {} nodes, {} elements, area {} m^2",
        sweep.prep.mesh.num_nodes(),
        sweep.prep.mesh.num_elements(),
        fmt_value(sweep.prep.mesh.area)
    );
    let _ = writeln!(
        report,
        "budget stiffness E0 = {} N/m",
        fmt_value(sweep.prep.config.e0)
    );
    if !sweep.prep.loaded {
        report.push_str("warning: the load vanishes; all compliances are 0\n");
    }
    report.push('\n');
    report.push_str(&sweep_table(&sweep));
    for (p, vp, sp) in &sweep.solutions {
        for sol in [vp, sp] {
            let stats = field_stats(&sweep.prep, sol);
            report.push('\n');
            let _ = writeln!(report, "{} p={}:", sol.method.name(), fmt_exponent(*p));
            let _ = writeln!(
                report,
                "  compliance {} N*m in {} iterations ({})",
                fmt_value(sol.result.compliance),
                sol.result.report.iterations,
                termination_name(sol.result.report.termination)
            );
            let _ = writeln!(
                report,
                "  void fraction {:.4}, young mean {} max {} N/m, poisson in [{:.4}, {:.4}]",
                stats.void_fraction,
                fmt_value(stats.mean_young),
                fmt_value(stats.max_young),
                stats.poisson_range[0],
                stats.poisson_range[1]
            );
        }
    }

    let csv_path = dir.join("sweep.csv");
    export_csv(
        &csv_path,
        &["p", "c_vp", "c_sp", "c_vp_scaled"],
        &sweep_csv_rows(&sweep),
    )?;
    let report_path = dir.join("report.txt");
    std::fs::write(&report_path, &report).map_err(io_err(&report_path))?;
    let mut stdout = report;
    let _ = writeln!(stdout, "\nwrote {}", report_path.display());
    let _ = writeln!(stdout, "wrote {}", csv_path.display());
    Ok(CmdOutput {
        stdout,
        files: vec![report_path, csv_path],
    })
}

// ---------------------------------------------------------------------------
// Thread-pool control.
// ---------------------------------------------------------------------------

/// Caps the global worker pool from the `IMD_THREADS` environment variable.
/// Returns the applied cap, or `None` when the variable is unset. Ignored
/// with a warning when a global pool already exists.
pub fn configure_threads() -> Result<Option<usize>, InterfaceError> {
    let value = match std::env::var("IMD_THREADS") {
        Ok(v) => v,
        Err(std::env::VarError::NotPresent) => return Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            return Err(InterfaceError::Config(
                "IMD_THREADS is not valid unicode".into(),
            ))
        }
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            InterfaceError::Config(format!(
                "IMD_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    if rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .is_err()
    {
        eprintln!("warning: thread pool already initialized; IMD_THREADS ignored");
    }
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn rect_config_json() -> String {
        r#"{
            "domain": {"shape": "rect", "length": 2.0, "height": 1.0, "nx": 6, "ny": 3},
            "supports": ["left"],
            "tractions": [{"group": "right", "t": [0.0, -5.0]}],
            "p": 2,
            "p_list": [1, 2, "inf"],
            "e0": 100.0
        }"#
        .to_string()
    }

    fn rect_config() -> RunConfig {
        let config: RunConfig = serde_json::from_str(&rect_config_json()).unwrap();
        config.validate().unwrap();
        config
    }

    #[test]
    fn exponent_parses_numbers_and_inf() {
        let e: Exponent = serde_json::from_str("2.5").unwrap();
        assert_eq!(e.0, 2.5);
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.0.is_infinite());
        let e: Exponent = serde_json::from_str("\"Inf\"").unwrap();
        assert!(e.0.is_infinite());
        assert!(serde_json::from_str::<Exponent>("\"two\"").is_err());
    }

    #[test]
    fn exponent_serializes_inf_as_string() {
        assert_eq!(serde_json::to_string(&Exponent(2.0)).unwrap(), "2.0");
        assert_eq!(
            serde_json::to_string(&Exponent(f64::INFINITY)).unwrap(),
            "\"inf\""
        );
    }

    #[test]
    fn exponent_list_parses_and_rejects() {
        let ps = parse_exponent_list("1, 2,100,inf").unwrap();
        assert_eq!(ps.len(), 4);
        assert!(ps[3].is_infinite());
        assert!(parse_exponent_list("1,x").is_err());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let bad = r#"{"domain": {"shape": "rect", "length": 1, "height": 1,
                       "nx": 2, "ny": 2}, "e0": 1.0, "wat": 3}"#;
        let err = serde_json::from_str::<RunConfig>(bad).unwrap_err();
        assert!(err.to_string().contains("wat"));
    }

    #[test]
    fn config_defaults_and_validation() {
        let config = rect_config();
        assert_eq!(config.method, "vp");
        assert_eq!(config.element_kind().unwrap(), ElementKind::Quad4);
        assert_eq!(config.p.unwrap().0, 2.0);
        assert!(config.p_list[2].0.is_infinite());

        let mut bad = rect_config();
        bad.e0 = -1.0;
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);

        let mut bad = rect_config();
        bad.method = "xx".into();
        assert!(bad.validate().is_err());

        let mut bad = rect_config();
        bad.p = Some(Exponent(0.5));
        assert!(bad.validate().is_err());

        let mut bad = rect_config();
        bad.supports.push("left".into());
        assert!(bad.validate().is_err());

        let mut bad = rect_config();
        bad.tractions.push(TractionSpec {
            group: "left".into(),
            t: [1.0, 0.0],
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn lshape_rejects_quads() {
        let mut config = rect_config();
        config.domain = DomainSpec::Lshape {
            leg: 2.0,
            thickness: 1.0,
            corner_radius: 0.0,
            target_h: 0.5,
        };
        config.element = Some("quad4".into());
        assert!(matches!(
            config.element_kind(),
            Err(InterfaceError::Config(_))
        ));
        config.element = None;
        assert_eq!(config.element_kind().unwrap(), ElementKind::Tri3);
    }

    #[test]
    fn build_mesh_applies_roles_and_checks_tags() {
        let config = rect_config();
        let mesh = build_mesh(&config).unwrap();
        let left = mesh.group("left").unwrap();
        assert_eq!(left.role, GroupRole::Support);
        let right = mesh.group("right").unwrap();
        assert_eq!(right.role, GroupRole::Traction);
        assert_eq!(right.traction, Some([0.0, -5.0]));

        let mut bad = rect_config();
        bad.supports = vec!["nope".into()];
        let err = build_mesh(&bad).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("left"), "lists available tags");
    }

    #[test]
    fn prepare_rejects_unanchored_and_bad_nodes() {
        let mut config = rect_config();
        config.supports.clear();
        let err = prepare(config).err().expect("unanchored config rejected");
        assert_eq!(err.exit_code(), 2);

        let mut config = rect_config();
        config.point_forces.push(PointForceSpec {
            node: 10_000,
            fx: 1.0,
            fy: 0.0,
        });
        assert!(prepare(config).is_err());
    }

    #[test]
    fn solve_produces_positive_compliance() {
        let prep = prepare(rect_config()).unwrap();
        assert!(prep.loaded);
        let sol = prep.solve(MethodTag::Vp, 2.0).unwrap();
        assert!(sol.result.compliance > 0.0);
        assert!(!sol.unloaded);
        // lambda = area^(1/p) * e0 at p = 2.
        assert!((sol.lambda - prep.mesh.area.sqrt() * 100.0).abs() < 1e-12);
    }

    #[test]
    fn unloaded_solve_short_circuits() {
        let mut config = rect_config();
        config.tractions.clear();
        let prep = prepare(config).unwrap();
        assert!(!prep.loaded);
        let sol = prep.solve(MethodTag::Sp, 3.0).unwrap();
        assert!(sol.unloaded);
        assert_eq!(sol.result.compliance, 0.0);
        assert_eq!(sol.result.report.iterations, 0);
        assert!(sol.result.moduli.at_nodes.iter().all(|s| s.void));
        assert_eq!(sol.result.moduli.at_qps.len(), prep.system.cache.points.len());
    }

    #[test]
    fn vtk_export_matches_golden_bytes() {
        use crate::geometry::{BoundaryGroup, Element, Node};
        let mesh = Mesh::new(
            vec![
                Node { id: 0, x: 0.0, y: 0.0 },
                Node { id: 1, x: 1.0, y: 0.0 },
                Node { id: 2, x: 1.0, y: 1.0 },
                Node { id: 3, x: 0.0, y: 1.0 },
            ],
            vec![Element {
                id: 0,
                kind: ElementKind::Quad4,
                nodes: vec![0, 1, 2, 3],
            }],
            vec![BoundaryGroup {
                tag: "all".into(),
                role: GroupRole::Traction,
                traction: None,
                edges: vec![(0, 0), (0, 1), (0, 2), (0, 3)],
            }],
        )
        .unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("unit.vtk");
        let field = [0.0, 1.0, 2.0, 0.25];
        export_vtk(&mesh, &[("young", &field)], "unit square", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected = "\
# vtk DataFile Version 3.0
unit square
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0.000000000e0 0.000000000e0 0
1.000000000e0 0.000000000e0 0
1.000000000e0 1.000000000e0 0
0.000000000e0 1.000000000e0 0
CELLS 1 5
4 0 1 2 3
CELL_TYPES 1
9
POINT_DATA 4
SCALARS young double 1
LOOKUP_TABLE default
0.000000000e0
1.000000000e0
2.000000000e0
2.500000000e-1
";
        assert_eq!(text, expected);

        // An empty field list writes just the grid.
        export_vtk(&mesh, &[], "unit square", &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("CELL_TYPES 1\n9\n"));

        // Size mismatches are rejected.
        let short = [1.0; 3];
        assert!(export_vtk(&mesh, &[("young", &short)], "t", &path).is_err());
    }

    #[test]
    fn csv_export_is_rfc4180() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        export_csv(
            &path,
            &["a", "b"],
            &[
                vec!["1".into(), "plain".into()],
                vec!["2".into(), "with,comma".into()],
                vec!["3".into(), "with\"quote".into()],
            ],
        )
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text,
            "a,b\r\n1,plain\r\n2,\"with,comma\"\r\n3,\"with\"\"quote\"\r\n"
        );

        let err = export_csv(&path, &["a"], &[vec!["1".into(), "2".into()]]);
        assert!(err.is_err());
    }

    #[test]
    fn sweep_exponents_validated() {
        let config = rect_config();
        assert_eq!(
            sweep_exponents(&config, None).unwrap(),
            vec![1.0, 2.0, f64::INFINITY]
        );
        // CLI list overrides, is sorted, rejects duplicates and shorts.
        assert_eq!(
            sweep_exponents(&config, Some("3,2")).unwrap(),
            vec![2.0, 3.0]
        );
        assert!(sweep_exponents(&config, Some("2,2")).is_err());
        assert!(sweep_exponents(&config, Some("2")).is_err());
        let mut no_list = rect_config();
        no_list.p_list.clear();
        assert!(sweep_exponents(&no_list, None).is_err());
    }

    #[test]
    fn sweep_rows_and_verdicts() {
        let mut config = rect_config();
        config.p_list = vec![Exponent(1.0), Exponent(2.0)];
        // Loose solves keep this test fast; the laws hold regardless.
        config.optimizer.ftol = Some(1e-9);
        config.smoothing.eps_rel = Some(1e-5);
        let sweep = run_sweep(config, None).unwrap();
        assert_eq!(sweep.solutions.len(), 2);
        assert_eq!(sweep.summed_verdict, "ok");
        assert_eq!(sweep.split_verdict, "ok");
        // At p = 1 both methods minimize the same functional.
        let (_, vp1, sp1) = &sweep.solutions[0];
        let rel = (vp1.result.compliance - sp1.result.compliance).abs()
            / vp1.result.compliance;
        assert!(rel < 1e-4, "vp and sp agree at p = 1, got {rel:.2e}");
        let table = sweep_table(&sweep);
        assert!(table.contains("C_vp"));
        assert!(table.contains("summed-method monotonicity: ok"));
    }

    #[test]
    fn commands_write_artifacts() {
        let dir = tempdir().unwrap();
        let config_path = dir.path().join("run.json");
        std::fs::write(&config_path, rect_config_json()).unwrap();
        let out = dir.path().join("out");

        let mesh_out = cmd_mesh(&config_path, Some(&out)).unwrap();
        assert!(mesh_out.files[0].exists());
        assert!(mesh_out.stdout.contains("nodes"));
        // The saved mesh carries the configured boundary conditions.
        let saved = crate::geometry::load_mesh(&mesh_out.files[0]).unwrap();
        assert_eq!(saved.group("left").unwrap().role, GroupRole::Support);

        let solve_out =
            cmd_solve(&config_path, Some(&out), Some("2"), Some("vp")).unwrap();
        assert_eq!(solve_out.files.len(), 4);
        for f in &solve_out.files {
            assert!(f.exists(), "{} missing", f.display());
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&solve_out.files[0]).unwrap())
                .unwrap();
        assert_eq!(summary["method"], "vp");
        assert_eq!(summary["p"], 2.0);
        assert!(summary["compliance"].as_f64().unwrap() > 0.0);

        // The VTK file and the nodes CSV agree value for value.
        let vtk = std::fs::read_to_string(&solve_out.files[1]).unwrap();
        let csv = std::fs::read_to_string(&solve_out.files[2]).unwrap();
        let vtk_young: Vec<&str> = vtk
            .lines()
            .skip_while(|l| !l.starts_with("SCALARS young"))
            .skip(2)
            .take_while(|l| !l.starts_with("SCALARS"))
            .collect();
        let csv_young: Vec<&str> = csv
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').nth(5).unwrap())
            .collect();
        assert_eq!(vtk_young, csv_young);

        // Solve rejects exponent lists.
        assert!(cmd_solve(&config_path, Some(&out), Some("1,2"), None).is_err());

        // Sweep writes the CSV and reports verdicts; --method is rejected.
        let sweep_out = cmd_sweep(&config_path, Some(&out), Some("1,3"), None).unwrap();
        let csv = std::fs::read_to_string(&sweep_out.files[0]).unwrap();
        assert!(csv.starts_with("p,c_vp,c_sp,c_vp_scaled\r\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(sweep_out.stdout.contains("monotonicity"));
        assert!(cmd_sweep(&config_path, Some(&out), Some("1,3"), Some("vp")).is_err());

        // Report adds field statistics.
        let report_out = cmd_report(&config_path, Some(&out), Some("1,3"), None).unwrap();
        assert!(report_out.stdout.contains("void fraction"));
        assert!(report_out.files[0].exists());
    }

    #[test]
    fn solve_reruns_are_bit_identical() {
        let dir = tempdir().unwrap();
        let config_path = dir.path().join("run.json");
        std::fs::write(&config_path, rect_config_json()).unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        cmd_solve(&config_path, Some(&out_a), None, None).unwrap();
        cmd_solve(&config_path, Some(&out_b), None, None).unwrap();
        for name in ["summary.json", "fields.vtk", "nodes.csv", "qpoints.csv"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn missing_config_is_io_error() {
        let err = RunConfig::load(Path::new("/nonexistent/run.json")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{not json").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().exit_code(), 2);
    }
}
