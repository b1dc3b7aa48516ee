//! Independent correctness instruments.
//!
//! Everything here exists to check the solver from the outside rather than
//! to produce designs:
//!
//! * closed-form solutions of the small cost-allocation problems that the
//!   pointwise recovery is built on, together with a brute-force grid
//!   oracle that knows nothing about the closed forms;
//! * a duality gap probe: any kinematically admissible displacement yields
//!   a certified lower bound on the optimal reduced energy, evaluated with
//!   the same quadrature so the bound is exact up to rounding;
//! * pointwise optimality residuals for the stress/strain power laws that
//!   characterize an exact primal/dual pair;
//! * a monotonicity checker for compliance sweeps over the cost exponent.

use crate::geometry::Mesh;
use crate::objective::{ExponentParams, MethodTag, BETA};
use crate::statics::{CsrMatrix, QpCache, StaticsSystem};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("monotonicity violated: {0}")]
    Monotonicity(String),
}

/// Tolerance slack on the unit bound of the `p = 1` locking constraint, so
/// that candidates rescaled to sit exactly on the bound are not rejected
/// for a rounding error. It costs at most the same relative slack in the
/// certified bound.
const LOCK_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Piecewise-constant cost-allocation problems and their closed forms.
// ---------------------------------------------------------------------------

/// A piecewise-constant non-negative demand field: each cell carries a
/// measure and one demand value per component.
#[derive(Debug, Clone)]
pub struct CellField {
    /// `(measure, demands)` per cell; measures positive, demands >= 0.
    pub cells: Vec<(f64, Vec<f64>)>,
}

impl CellField {
    fn validate(&self) -> Result<(), VerifyError> {
        if self.cells.is_empty() {
            return Err(VerifyError::InvalidArgument("no cells".into()));
        }
        for (j, (m, a)) in self.cells.iter().enumerate() {
            if !(*m > 0.0) || !m.is_finite() {
                return Err(VerifyError::InvalidArgument(format!(
                    "cell {j}: measure must be positive and finite, got {m}"
                )));
            }
            if a.is_empty() {
                return Err(VerifyError::InvalidArgument(format!(
                    "cell {j}: no demand components"
                )));
            }
            for (i, &v) in a.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(VerifyError::InvalidArgument(format!(
                        "cell {j} component {i}: demand must be >= 0 and finite, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form solution of a cost-allocation problem: the optimal value,
/// the per-cell minimizer, and whether it is unique (an all-zero demand
/// makes every feasible allocation optimal).
#[derive(Debug, Clone)]
pub struct LemmaSolution {
    pub value: f64,
    pub minimizer: Vec<Vec<f64>>,
    pub unique: bool,
}

fn check_lemma_inputs(a: &CellField, p: f64, lambda: f64) -> Result<(), VerifyError> {
    a.validate()?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(VerifyError::InvalidArgument(format!(
            "exponent must satisfy 1 <= p < inf, got {p}"
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(VerifyError::InvalidArgument(format!(
            "budget must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Minimize `sum_j meas_j * sum_i a_ji / u_ji` over `u >= 0` subject to the
/// component-wise budget `(sum_j meas_j sum_i u_ji^p)^{1/p} <= lambda`.
///
/// With `r = 2p/(p+1)` the optimal value is `(sum meas_j sum_i
/// sqrt(a_ji)^r)^{2/r} / lambda` and the minimizer is the power law
/// `u_ji = lambda (sqrt(a_ji) / ||sqrt(a)||_r)^{2-r}`, which spends the
/// budget exactly.
pub fn lemma_split(a: &CellField, p: f64, lambda: f64) -> Result<LemmaSolution, VerifyError> {
    check_lemma_inputs(a, p, lambda)?;
    let r = 2.0 * p / (p + 1.0);
    let mut norm_pow = 0.0;
    for (m, cell) in &a.cells {
        for &ai in cell {
            norm_pow += m * ai.sqrt().powf(r);
        }
    }
    if norm_pow == 0.0 {
        return Ok(LemmaSolution {
            value: 0.0,
            minimizer: a.cells.iter().map(|(_, c)| vec![0.0; c.len()]).collect(),
            unique: false,
        });
    }
    let norm = norm_pow.powf(1.0 / r);
    let minimizer = a
        .cells
        .iter()
        .map(|(_, cell)| {
            cell.iter()
                .map(|&ai| lambda * (ai.sqrt() / norm).powf(2.0 - r))
                .collect()
        })
        .collect();
    Ok(LemmaSolution {
        value: norm * norm / lambda,
        minimizer,
        unique: true,
    })
}

/// Minimize the same cost subject to the summed budget
/// `(sum_j meas_j (sum_i u_ji)^p)^{1/p} <= lambda`.
///
/// The optimal value is `(sum meas_j (sum_i sqrt(a_ji))^r)^{2/r} / lambda`;
/// within each cell the optimal split is proportional to `sqrt(a_ji)`.
pub fn lemma_sum(a: &CellField, p: f64, lambda: f64) -> Result<LemmaSolution, VerifyError> {
    check_lemma_inputs(a, p, lambda)?;
    let r = 2.0 * p / (p + 1.0);
    let sums: Vec<f64> = a
        .cells
        .iter()
        .map(|(_, cell)| cell.iter().map(|&ai| ai.sqrt()).sum())
        .collect();
    let norm_pow: f64 = a
        .cells
        .iter()
        .zip(&sums)
        .map(|((m, _), &s)| m * s.powf(r))
        .sum();
    if norm_pow == 0.0 {
        return Ok(LemmaSolution {
            value: 0.0,
            minimizer: a.cells.iter().map(|(_, c)| vec![0.0; c.len()]).collect(),
            unique: false,
        });
    }
    let norm = norm_pow.powf(1.0 / r);
    let minimizer = a
        .cells
        .iter()
        .zip(&sums)
        .map(|((_, cell), &s)| {
            if s == 0.0 {
                return vec![0.0; cell.len()];
            }
            let total = lambda * (s / norm).powf(2.0 - r);
            cell.iter().map(|&ai| (ai.sqrt() / s) * total).collect()
        })
        .collect();
    Ok(LemmaSolution {
        value: norm * norm / lambda,
        minimizer,
        unique: true,
    })
}

// ---------------------------------------------------------------------------
// Brute-force oracle for the cost-allocation problems.
// ---------------------------------------------------------------------------

/// One free coordinate of the oracle search: a window, hard bounds, and
/// whether the grid is linear (split fractions) or logarithmic (budgets).
struct FreeDim {
    lo: f64,
    hi: f64,
    min: f64,
    max: f64,
    linear: bool,
}

/// Relative floor of the initial search window for logarithmic dimensions.
const ORACLE_FLOOR: f64 = 1e-5;
/// Points per axis per refinement round.
const ORACLE_POINTS: usize = 24;

/// Nested grid refinement: evaluate the product grid, recentre a shrunken
/// window on the best feasible point, repeat. The evaluated points always
/// satisfy the constraint with equality, so the result is an upper bound
/// on the true minimum that tightens with the effective resolution.
fn refine_search<E>(dims: &mut [FreeDim], g: usize, rounds: usize, eval: E) -> Option<f64>
where
    E: Fn(&[f64]) -> Option<f64>,
{
    if dims.is_empty() {
        return eval(&[]);
    }
    let mut best_val = f64::INFINITY;
    let mut best_pt: Vec<f64> = Vec::new();
    let mut vals = vec![0.0; dims.len()];
    for _ in 0..rounds {
        let grids: Vec<Vec<f64>> = dims
            .iter()
            .map(|d| {
                (0..g)
                    .map(|k| {
                        let f = k as f64 / (g - 1) as f64;
                        if d.linear {
                            d.lo + f * (d.hi - d.lo)
                        } else {
                            d.lo * (d.hi / d.lo).powf(f)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut idx = vec![0usize; dims.len()];
        'grid: loop {
            for (v, (i, grid)) in vals.iter_mut().zip(idx.iter().zip(&grids)) {
                *v = grid[*i];
            }
            if let Some(val) = eval(&vals) {
                if val < best_val {
                    best_val = val;
                    best_pt = vals.clone();
                }
            }
            for (i, _) in idx.iter_mut().zip(&grids) {
                *i += 1;
                if *i < g {
                    continue 'grid;
                }
                *i = 0;
            }
            break;
        }
        if best_pt.is_empty() {
            return None;
        }
        for (d, &b) in dims.iter_mut().zip(&best_pt) {
            if d.linear {
                let step = (d.hi - d.lo) / (g - 1) as f64;
                d.lo = (b - 2.0 * step).max(d.min);
                d.hi = (b + 2.0 * step).min(d.max);
            } else {
                let ratio = (d.hi / d.lo).powf(1.0 / (g - 1) as f64);
                d.lo = (b / (ratio * ratio)).max(d.min);
                d.hi = (b * ratio * ratio).min(d.max);
            }
        }
    }
    best_val.is_finite().then_some(best_val)
}

/// Rounds needed so that nested refinement with `g` points per axis is at
/// least as fine as a single pass with `resolution` points per axis.
fn rounds_for(resolution: usize, g: usize) -> usize {
    if resolution <= g {
        return 1;
    }
    // Each round multiplies the window by 4/(g-1) while keeping g points.
    let shrink = (g - 1) as f64 / 4.0;
    let need = (resolution - 1) as f64 / (g - 1) as f64;
    1 + (need.ln() / shrink.ln()).ceil() as usize
}

/// Grid-search the cost-allocation minimum without using the closed forms:
/// a logarithmic grid over the active-budget surface (the last coordinate
/// is eliminated through the constraint), refined around the best point
/// until the effective resolution reaches `resolution` points per axis.
///
/// Restricted to at most 3 cells and 2 components per cell so the search
/// space stays at most 5-dimensional.
pub fn brute_force_oracle(
    a: &CellField,
    p: f64,
    lambda: f64,
    method: MethodTag,
    resolution: usize,
) -> Result<f64, VerifyError> {
    check_lemma_inputs(a, p, lambda)?;
    if resolution < 2 {
        return Err(VerifyError::InvalidArgument(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    if a.cells.len() > 3 {
        return Err(VerifyError::InvalidArgument(format!(
            "oracle supports at most 3 cells, got {}",
            a.cells.len()
        )));
    }
    if let Some((j, _)) = a
        .cells
        .iter()
        .enumerate()
        .find(|(_, (_, c))| c.len() > 2)
    {
        return Err(VerifyError::InvalidArgument(format!(
            "oracle supports at most 2 components per cell, cell {j} has more"
        )));
    }
    let g = resolution.min(ORACLE_POINTS);
    let rounds = rounds_for(resolution, g);
    let lp = lambda.powf(p);
    let result = match method {
        MethodTag::Vp => {
            // Flatten the positive-demand components; zero-demand ones take
            // an optimal allocation of zero and drop out of both sums.
            let active: Vec<(f64, f64)> = a
                .cells
                .iter()
                .flat_map(|(m, c)| c.iter().filter(|&&ai| ai > 0.0).map(|&ai| (*m, ai)))
                .collect();
            if active.is_empty() {
                return Ok(0.0);
            }
            let k = active.len();
            let mut dims: Vec<FreeDim> = active[..k - 1]
                .iter()
                .map(|&(m, _)| {
                    let hi = (lp / m).powf(1.0 / p);
                    FreeDim {
                        lo: hi * ORACLE_FLOOR,
                        hi,
                        min: hi * ORACLE_FLOOR * ORACLE_FLOOR,
                        max: hi,
                        linear: false,
                    }
                })
                .collect();
            let (m_last, a_last) = active[k - 1];
            refine_search(&mut dims, g, rounds, |u: &[f64]| {
                let mut used = 0.0;
                let mut value = 0.0;
                for (&(m, ai), &ui) in active[..k - 1].iter().zip(u) {
                    used += m * ui.powf(p);
                    value += m * ai / ui;
                }
                let rem = lp - used;
                if rem <= 0.0 {
                    return None;
                }
                let u_last = (rem / m_last).powf(1.0 / p);
                Some(value + m_last * a_last / u_last)
            })
        }
        MethodTag::Sp => {
            // Keep cells with any positive demand; the per-cell budget is
            // the component sum, with an optional split fraction when both
            // components are active.
            struct SpCell {
                m: f64,
                a: Vec<f64>,
            }
            let active: Vec<SpCell> = a
                .cells
                .iter()
                .filter(|(_, c)| c.iter().any(|&ai| ai > 0.0))
                .map(|(m, c)| SpCell {
                    m: *m,
                    a: c.iter().copied().filter(|&ai| ai > 0.0).collect(),
                })
                .collect();
            if active.is_empty() {
                return Ok(0.0);
            }
            let mc = active.len();
            let mut dims: Vec<FreeDim> = active[..mc - 1]
                .iter()
                .map(|cell| {
                    let hi = (lp / cell.m).powf(1.0 / p);
                    FreeDim {
                        lo: hi * ORACLE_FLOOR,
                        hi,
                        min: hi * ORACLE_FLOOR * ORACLE_FLOOR,
                        max: hi,
                        linear: false,
                    }
                })
                .collect();
            // One linear split dimension per two-component cell.
            let split_owner: Vec<usize> = active
                .iter()
                .enumerate()
                .filter(|(_, c)| c.a.len() == 2)
                .map(|(j, _)| j)
                .collect();
            for _ in &split_owner {
                dims.push(FreeDim {
                    lo: ORACLE_FLOOR,
                    hi: 1.0 - ORACLE_FLOOR,
                    min: ORACLE_FLOOR * ORACLE_FLOOR,
                    max: 1.0 - ORACLE_FLOOR * ORACLE_FLOOR,
                    linear: true,
                });
            }
            refine_search(&mut dims, g, rounds, |vars: &[f64]| {
                let (budgets, splits) = vars.split_at(mc - 1);
                let mut used = 0.0;
                for (cell, &s) in active[..mc - 1].iter().zip(budgets) {
                    used += cell.m * s.powf(p);
                }
                let rem = lp - used;
                if rem <= 0.0 {
                    return None;
                }
                let s_last = (rem / active[mc - 1].m).powf(1.0 / p);
                let mut value = 0.0;
                let mut split_at = 0usize;
                for (j, cell) in active.iter().enumerate() {
                    let s = if j + 1 == mc { s_last } else { budgets[j] };
                    match cell.a.len() {
                        1 => value += cell.m * cell.a[0] / s,
                        _ => {
                            let phi = splits[split_at];
                            split_at += 1;
                            value +=
                                cell.m * (cell.a[0] / (phi * s) + cell.a[1] / ((1.0 - phi) * s));
                        }
                    }
                }
                Some(value)
            })
        }
    };
    result.ok_or_else(|| {
        VerifyError::Numerical("no feasible grid point on the budget surface".into())
    })
}

// ---------------------------------------------------------------------------
// Dual candidates and certified lower bounds.
// ---------------------------------------------------------------------------

/// A kinematically admissible displacement field: one `(x, y)` pair per
/// mesh node, exactly zero on supported nodes.
#[derive(Debug, Clone)]
pub struct DualCandidate {
    pub v: Vec<f64>,
}

impl DualCandidate {
    pub fn scaled(&self, c: f64) -> DualCandidate {
        DualCandidate {
            v: self.v.iter().map(|&x| c * x).collect(),
        }
    }
}

/// Kelvin strain coordinates `(t, e1, e2)` of a nodal displacement at every
/// quadrature point, in cache order: `t = (e11 + e22)/sqrt(2)`,
/// `e1 = (e11 - e22)/sqrt(2)`, `e2 = sqrt(2) e12`.
pub fn strain_kelvin(cache: &QpCache, mesh: &Mesh, v: &[f64]) -> Vec<[f64; 3]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cache
        .points
        .par_iter()
        .map(|qp| {
            let enodes = &mesh.elements[qp.elem].nodes;
            let (mut t, mut e1, mut e2) = (0.0, 0.0, 0.0);
            for (l, &n) in enodes.iter().enumerate() {
                let [gx, gy] = qp.grad[l];
                let (vx, vy) = (v[2 * n], v[2 * n + 1]);
                t += gx * vx + gy * vy;
                e1 += gx * vx - gy * vy;
                e2 += gy * vx + gx * vy;
            }
            [t * s, e1 * s, e2 * s]
        })
        .collect()
}

/// The strain norm paired in duality with the local stress norm: for the
/// split method `(|t|^{r'} + beta^{2-r'} ||dev||^{r'})^{1/r'}` (the maximum
/// form at `r' = inf`), for the summed method `max(|t|, ||dev||/beta)`.
pub fn dual_norm(eps: [f64; 3], method: MethodTag, params: &ExponentParams) -> f64 {
    let t = eps[0].abs();
    let dev = eps[1].hypot(eps[2]);
    match method {
        MethodTag::Sp => t.max(dev / BETA),
        MethodTag::Vp => {
            let rp = params.r_prime;
            if rp.is_infinite() {
                t.max(dev / BETA)
            } else {
                (t.powf(rp) + BETA.powf(2.0 - rp) * dev.powf(rp)).powf(1.0 / rp)
            }
        }
    }
}

fn check_candidate(
    cand: &DualCandidate,
    mesh: &Mesh,
    system: &StaticsSystem,
) -> Result<(), VerifyError> {
    if cand.v.len() != 2 * mesh.num_nodes() {
        return Err(VerifyError::Dimension(format!(
            "candidate has {} entries, mesh needs {}",
            cand.v.len(),
            2 * mesh.num_nodes()
        )));
    }
    for (node, dofs) in system.dof_map.dof.iter().enumerate() {
        for (c, dof) in dofs.iter().enumerate() {
            if dof.is_none() && cand.v[2 * node + c] != 0.0 {
                return Err(VerifyError::InvalidArgument(format!(
                    "candidate is nonzero on supported node {node}"
                )));
            }
        }
    }
    Ok(())
}

/// Work of the applied loads against a candidate displacement.
fn load_work(cand: &DualCandidate, system: &StaticsSystem) -> f64 {
    let mut f = 0.0;
    for (node, dofs) in system.dof_map.dof.iter().enumerate() {
        for (c, dof) in dofs.iter().enumerate() {
            if let Some(d) = dof {
                f += system.q[*d] * cand.v[2 * node + c];
            }
        }
    }
    f
}

/// Concave dual functional whose every value is a lower bound on the
/// optimal reduced energy: `f(v) - (1/r') * sum w |detJ| dual_norm^{r'}`.
///
/// At `p = 1` the dissipation term degenerates into the hard constraint
/// `dual_norm <= 1`: the value is `f(v)` when the candidate satisfies it
/// (with [`LOCK_TOL`] slack) and `-inf` otherwise.
///
/// The bound holds for the discrete minimum because the load work equals
/// the same-quadrature pairing `sum w tau . eps(v)` for every equilibrated
/// stress, and the pointwise product inequality does the rest; it requires
/// the positive-weight quadrature rules (the default ones).
pub fn dual_value(
    cand: &DualCandidate,
    method: MethodTag,
    params: &ExponentParams,
    mesh: &Mesh,
    system: &StaticsSystem,
) -> Result<f64, VerifyError> {
    check_candidate(cand, mesh, system)?;
    let f = load_work(cand, system);
    let strains = strain_kelvin(&system.cache, mesh, &cand.v);
    if params.is_p_one() {
        let maxn = strains
            .iter()
            .map(|&e| dual_norm(e, method, params))
            .fold(0.0, f64::max);
        return Ok(if maxn <= 1.0 + LOCK_TOL {
            f
        } else {
            f64::NEG_INFINITY
        });
    }
    let rp = params.r_prime;
    let dissipation: f64 = strains
        .par_iter()
        .zip(&system.cache.points)
        .map(|(&e, qp)| qp.w_detj * dual_norm(e, method, params).powf(rp))
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(f - dissipation / rp)
}

/// A candidate together with its best scalar rescaling.
#[derive(Debug, Clone, Copy)]
pub struct ScaledDual {
    pub c_star: f64,
    pub value: f64,
}

/// Maximize `dual_value(c * v)` over the amplitude `c >= 0` in closed form:
/// with `F = f(v)` and `D = sum w dual_norm^{r'}`, the optimum is
/// `c* = (F/D)^{r-1}` with value `F c* / r`; at `p = 1` it is `c* = 1/max
/// dual_norm` with value `F c*`. Candidates doing no positive work get
/// `(0, 0)`.
pub fn best_scaled_dual(
    cand: &DualCandidate,
    method: MethodTag,
    params: &ExponentParams,
    mesh: &Mesh,
    system: &StaticsSystem,
) -> Result<ScaledDual, VerifyError> {
    check_candidate(cand, mesh, system)?;
    let f = load_work(cand, system);
    if !(f > 0.0) {
        return Ok(ScaledDual {
            c_star: 0.0,
            value: 0.0,
        });
    }
    let strains = strain_kelvin(&system.cache, mesh, &cand.v);
    if params.is_p_one() {
        let maxn = strains
            .iter()
            .map(|&e| dual_norm(e, method, params))
            .fold(0.0, f64::max);
        if maxn == 0.0 {
            return Err(VerifyError::Numerical(
                "positive load work with identically zero strain".into(),
            ));
        }
        let c_star = 1.0 / maxn;
        return Ok(ScaledDual {
            c_star,
            value: f * c_star,
        });
    }
    let rp = params.r_prime;
    let d: f64 = strains
        .iter()
        .zip(&system.cache.points)
        .map(|(&e, qp)| qp.w_detj * dual_norm(e, method, params).powf(rp))
        .sum();
    if d == 0.0 {
        return Err(VerifyError::Numerical(
            "positive load work with identically zero strain".into(),
        ));
    }
    let c_star = (f / d).powf(params.r - 1.0);
    Ok(ScaledDual {
        c_star,
        value: c_star * f / params.r,
    })
}

/// Stiffness matrix of the homogeneous body whose constitutive law is the
/// identity in Kelvin coordinates, on the free displacement dofs.
fn assemble_unit_stiffness(mesh: &Mesh, system: &StaticsSystem) -> CsrMatrix {
    let n = system.dof_map.num_dofs;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for qp in &system.cache.points {
        let enodes = &mesh.elements[qp.elem].nodes;
        for (l, &nl) in enodes.iter().enumerate() {
            let [lx, ly] = qp.grad[l];
            let dl = system.dof_map.dof[nl];
            for (m, &nm) in enodes.iter().enumerate() {
                let [mx, my] = qp.grad[m];
                let dm = system.dof_map.dof[nm];
                // Kelvin-strain column dot products, times the qp weight.
                let kxx = 0.5 * (2.0 * lx * mx + ly * my);
                let kxy = 0.5 * ly * mx;
                let kyx = 0.5 * lx * my;
                let kyy = 0.5 * (2.0 * ly * my + lx * mx);
                let w = qp.w_detj;
                if let (Some(a), Some(b)) = (dl[0], dm[0]) {
                    triplets.push((a, b, w * kxx));
                }
                if let (Some(a), Some(b)) = (dl[0], dm[1]) {
                    triplets.push((a, b, w * kyx));
                }
                if let (Some(a), Some(b)) = (dl[1], dm[0]) {
                    triplets.push((a, b, w * kxy));
                }
                if let (Some(a), Some(b)) = (dl[1], dm[1]) {
                    triplets.push((a, b, w * kyy));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &mut triplets)
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite system.
fn cg_solve(
    k: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>, VerifyError> {
    let n = b.len();
    let mut diag = vec![0.0; n];
    for row in 0..n {
        for idx in k.indptr[row]..k.indptr[row + 1] {
            if k.indices[idx] == row {
                diag[row] = k.values[idx];
            }
        }
        if !(diag[row] > 0.0) {
            return Err(VerifyError::Numerical(format!(
                "non-positive stiffness diagonal at dof {row}; are the supports sufficient?"
            )));
        }
    }
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut kp = vec![0.0; n];
    for _ in 0..max_iters {
        k.matvec(&p, &mut kp);
        let pkp: f64 = p.iter().zip(&kp).map(|(a, b)| a * b).sum();
        if !(pkp > 0.0) {
            return Err(VerifyError::Numerical(
                "stiffness matrix is not positive definite along a search direction".into(),
            ));
        }
        let alpha = rz / pkp;
        for ((xi, ri), (pi, kpi)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&kp)) {
            *xi += alpha * pi;
            *ri -= alpha * kpi;
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(x);
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&diag) {
            *zi = ri / di;
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(VerifyError::Numerical(format!(
        "conjugate gradients did not reach relative tolerance {rel_tol} in {max_iters} iterations"
    )))
}

/// Solve the homogeneous elastic body (identity constitutive law in Kelvin
/// coordinates) under the assembled loads and return the displacement as a
/// dual candidate. Any admissible field certifies a bound; this one is a
/// good all-round choice and is line-searched afterwards.
pub fn homogeneous_candidate(
    mesh: &Mesh,
    system: &StaticsSystem,
) -> Result<DualCandidate, VerifyError> {
    if system.dof_map.num_dofs == 0 {
        return Err(VerifyError::InvalidArgument(
            "every node is supported; no admissible displacements".into(),
        ));
    }
    let k = assemble_unit_stiffness(mesh, system);
    let x = cg_solve(&k, &system.q, 1e-10, 200_000)?;
    let mut v = vec![0.0; 2 * mesh.num_nodes()];
    for (node, dofs) in system.dof_map.dof.iter().enumerate() {
        for (c, dof) in dofs.iter().enumerate() {
            if let Some(d) = dof {
                v[2 * node + c] = x[*d];
            }
        }
    }
    Ok(DualCandidate { v })
}

// ---------------------------------------------------------------------------
// Pointwise optimality laws.
// ---------------------------------------------------------------------------

/// Forward power law of the split method: the strain paired with a stress
/// at an optimal point, `t_eps = |t|^{r-2} t`, `dev_eps = beta^{2-r}
/// ||dev||^{r-2} dev` (Kelvin coordinates, zero at zero).
pub fn strain_from_stress(tau: [f64; 3], params: &ExponentParams) -> [f64; 3] {
    let r = params.r;
    let t = tau[0];
    let dev = tau[1].hypot(tau[2]);
    let te = if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(r - 1.0)
    };
    let scale = if dev == 0.0 {
        0.0
    } else {
        BETA.powf(2.0 - r) * dev.powf(r - 2.0)
    };
    [te, scale * tau[1], scale * tau[2]]
}

/// Inverse power law (same structure with the conjugate exponent):
/// `t = |t_eps|^{r'-2} t_eps`, `dev = beta^{2-r'} ||dev_eps||^{r'-2}
/// dev_eps`. Mutually inverse with [`strain_from_stress`] away from zero.
pub fn stress_from_strain(eps: [f64; 3], params: &ExponentParams) -> Result<[f64; 3], VerifyError> {
    let rp = params.r_prime;
    if rp.is_infinite() {
        return Err(VerifyError::InvalidArgument(
            "the inverse power law is undefined at p = 1".into(),
        ));
    }
    let t = eps[0];
    let dev = eps[1].hypot(eps[2]);
    let te = if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(rp - 1.0)
    };
    let scale = if dev == 0.0 {
        0.0
    } else {
        BETA.powf(2.0 - rp) * dev.powf(rp - 2.0)
    };
    Ok([te, scale * eps[1], scale * eps[2]])
}

/// Pointwise residual statistics of the stress/strain optimality laws over
/// the quadrature points.
#[derive(Debug, Clone, Copy)]
pub struct ResidualStats {
    /// Largest pointwise residual norm.
    pub max: f64,
    /// Quadrature-weighted L2 aggregate of the residual norms.
    pub l2: f64,
}

/// Residual of the optimality system linking a stress field and a strain
/// field (both in Kelvin coordinates at the cache's quadrature points).
///
/// For the split method with `r > 1` the law is single-valued and the
/// residual is the distance to the power-law image. For the summed method
/// (and either method at `p = 1`) the law is a set inclusion: the trace
/// part must lie in `w^{r-1} * [-1, 1]` (pinned to the matching endpoint
/// when the stress trace is nonzero) and the deviator part in the ball of
/// radius `beta w^{r-1}` (pinned to the aligned boundary point when the
/// stress deviator is nonzero), with `w = |t| + beta ||dev||`; the residual
/// is the Euclidean distance to the set.
pub fn optimality_residual(
    tau: &[[f64; 3]],
    eps: &[[f64; 3]],
    cache: &QpCache,
    method: MethodTag,
    params: &ExponentParams,
) -> Result<ResidualStats, VerifyError> {
    if tau.len() != cache.points.len() || eps.len() != cache.points.len() {
        return Err(VerifyError::Dimension(format!(
            "{} stress and {} strain samples for {} quadrature points",
            tau.len(),
            eps.len(),
            cache.points.len()
        )));
    }
    let r = params.r;
    let effective = if r == 1.0 { MethodTag::Sp } else { method };
    let mut max = 0.0_f64;
    let mut l2 = 0.0;
    for ((&s, &e), qp) in tau.iter().zip(eps).zip(&cache.points) {
        let res2 = match effective {
            MethodTag::Vp => {
                let target = strain_from_stress(s, params);
                let dt = e[0] - target[0];
                let d1 = e[1] - target[1];
                let d2 = e[2] - target[2];
                dt * dt + d1 * d1 + d2 * d2
            }
            MethodTag::Sp => {
                let t = s[0];
                let dev = s[1].hypot(s[2]);
                // 0^0 = 1 makes w^{r-1} the correct multivalued bound at
                // p = 1 even for zero stress.
                let m = (t.abs() + BETA * dev).powf(r - 1.0);
                let rt = if t != 0.0 {
                    e[0] - t.signum() * m
                } else {
                    (e[0].abs() - m).max(0.0)
                };
                let rd = if dev > 0.0 {
                    let c = BETA * m / dev;
                    (e[1] - c * s[1]).hypot(e[2] - c * s[2])
                } else {
                    (e[1].hypot(e[2]) - BETA * m).max(0.0)
                };
                rt * rt + rd * rd
            }
        };
        max = max.max(res2.sqrt());
        l2 += qp.w_detj * res2;
    }
    Ok(ResidualStats { max, l2: l2.sqrt() })
}

// ---------------------------------------------------------------------------
// Compliance monotonicity sweeps.
// ---------------------------------------------------------------------------

/// One row of a compliance sweep over the cost exponent.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub p: f64,
    pub c_vp: f64,
    pub c_sp: f64,
    /// `c_vp / 3^{1/p}`: the rescaling under which the split-method
    /// compliance is nondecreasing in `p`.
    pub c_vp_scaled: f64,
}

/// Scale factor `(1 + beta^2)^{1/p} = 3^{1/p}` relating the two methods'
/// budgets in the plane.
pub fn vp_scale(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        3.0_f64.powf(1.0 / p)
    }
}

/// Run `solve(p, method) -> compliance` over an increasing exponent list
/// and check the two monotonicity laws: the summed-method compliance is
/// nondecreasing in `p`, and so is the split-method compliance divided by
/// `3^{1/p}`. Returns the table; fails with the first violated pair.
pub fn monotonicity_sweep<F>(
    mut solve: F,
    p_list: &[f64],
    tol: f64,
) -> Result<Vec<SweepRow>, VerifyError>
where
    F: FnMut(f64, MethodTag) -> Result<f64, VerifyError>,
{
    if p_list.len() < 2 {
        return Err(VerifyError::InvalidArgument(
            "need at least two exponents to check monotonicity".into(),
        ));
    }
    for w in p_list.windows(2) {
        if !(w[0] < w[1]) {
            return Err(VerifyError::InvalidArgument(format!(
                "exponent list must be strictly increasing, got {} before {}",
                w[0], w[1]
            )));
        }
    }
    if !(p_list[0] >= 1.0) {
        return Err(VerifyError::InvalidArgument(format!(
            "exponents must be >= 1, got {}",
            p_list[0]
        )));
    }
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let c_vp = solve(p, MethodTag::Vp)?;
        let c_sp = solve(p, MethodTag::Sp)?;
        rows.push(SweepRow {
            p,
            c_vp,
            c_sp,
            c_vp_scaled: c_vp / vp_scale(p),
        });
    }
    for w in rows.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.c_sp > b.c_sp * (1.0 + tol) {
            return Err(VerifyError::Monotonicity(format!(
                "summed-method compliance decreases from {} at p = {} to {} at p = {}",
                a.c_sp, a.p, b.c_sp, b.p
            )));
        }
        if a.c_vp_scaled > b.c_vp_scaled * (1.0 + tol) {
            return Err(VerifyError::Monotonicity(format!(
                "scaled split-method compliance decreases from {} at p = {} to {} at p = {}",
                a.c_vp_scaled, a.p, b.c_vp_scaled, b.p
            )));
        }
    }
    Ok(rows)
}
