//! Post-processing of an optimal stress field into the minimal compliance
//! and the optimal isotropic moduli.
//!
//! Once the reduced energy has been minimized, everything else is algebra:
//! the budget `Lambda = |Omega|^{1/p} * E0` fixes a scaling constant, the
//! optimal bulk/shear pair at each point is a power law in the local trace
//! and deviator of the stress, and the compliance is `(r * energy)^{2/r} /
//! Lambda`. The recovered fields saturate the cost budget exactly (up to
//! quadrature) and reproduce the compliance through the stress-energy
//! integral `sum (Tr^2/(d k) + ||dev||^2/(2 mu))`; both identities are kept
//! as unit tests since they hold for *any* stress field, optimal or not.

use crate::geometry::Mesh;
use crate::objective::{ExponentParams, MethodTag, Objective, SmoothingParams, BETA};
use crate::optimizer::OptimizerReport;
use crate::statics::QpCache;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("zero-load problem; moduli undefined")]
    ZeroLoad,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// The data fixing the admissible-design budget of one run.
#[derive(Debug, Clone, Copy)]
pub struct DesignProblem {
    pub method: MethodTag,
    pub params: ExponentParams,
    /// Reference stiffness `E0` [N/m]: the allowed p-mean of the cost
    /// density over the domain.
    pub e0: f64,
    /// Domain area [m^2].
    pub area: f64,
    /// Total cost budget `Lambda = |Omega|^{1/p} * E0`.
    pub lambda: f64,
}

impl DesignProblem {
    pub fn new(
        method: MethodTag,
        params: ExponentParams,
        e0: f64,
        area: f64,
    ) -> Result<Self, RecoveryError> {
        if !(e0 > 0.0) || !e0.is_finite() {
            return Err(RecoveryError::InvalidArgument(format!(
                "reference stiffness must be positive and finite, got {e0}"
            )));
        }
        if !(area > 0.0) || !area.is_finite() {
            return Err(RecoveryError::InvalidArgument(format!(
                "domain area must be positive and finite, got {area}"
            )));
        }
        Ok(DesignProblem {
            method,
            params,
            e0,
            area,
            lambda: lambda_p(area, params.p, e0),
        })
    }
}

/// Cost budget `Lambda = area^{1/p} * e0`; `area^0 = 1` at `p = inf`, the
/// plain product at `p = 1`.
pub fn lambda_p(area: f64, p: f64, e0: f64) -> f64 {
    if p.is_infinite() {
        e0
    } else {
        area.powf(1.0 / p) * e0
    }
}

/// Minimal compliance from the optimal reduced energy:
/// `C = (r * energy)^{2/r} / lambda`.
pub fn compliance_from_energy(energy: f64, r: f64, lambda: f64) -> f64 {
    (r * energy).powf(2.0 / r) / lambda
}

/// The recovered isotropic material at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuliSample {
    /// Bulk modulus [N/m].
    pub k: f64,
    /// Shear modulus [N/m].
    pub mu: f64,
    /// Young modulus [N/m]; zero whenever either modulus vanishes.
    pub young: f64,
    /// Poisson ratio in `[-1, 1]`; reported as 0 in voids.
    pub poisson: f64,
    /// True where the material vanishes entirely (`k = mu = 0`).
    pub void: bool,
}

impl ModuliSample {
    fn from_k_mu(k: f64, mu: f64) -> ModuliSample {
        let (young, poisson) = young_poisson(k, mu);
        ModuliSample {
            k,
            mu,
            young,
            poisson,
            void: k == 0.0 && mu == 0.0,
        }
    }

    fn void() -> ModuliSample {
        ModuliSample {
            k: 0.0,
            mu: 0.0,
            young: 0.0,
            poisson: 0.0,
            void: true,
        }
    }
}

/// Young modulus and Poisson ratio of the plane isotropic material with
/// bulk `k` and shear `mu`: `E = 4 k mu / (k + mu)`, `nu = (k - mu)/(k + mu)`.
/// The void pair `(0, 0)` maps to `(0, 0)`.
pub fn young_poisson(k: f64, mu: f64) -> (f64, f64) {
    if k == 0.0 && mu == 0.0 {
        return (0.0, 0.0);
    }
    (4.0 * k * mu / (k + mu), (k - mu) / (k + mu))
}

/// Recovered moduli at every quadrature point (cache order) plus a
/// volume-weighted average at every mesh node (node order), the latter for
/// nodal field export.
#[derive(Debug, Clone)]
pub struct ModuliField {
    pub at_qps: Vec<ModuliSample>,
    pub at_nodes: Vec<ModuliSample>,
}

/// Optimal `(d*k, 2*mu)` for the split-cost method at one point, given the
/// scaling constant `c` and the exponent `e = 2 - r = 2/(p+1)`.
///
/// At `p = inf` the exponent is 0 and `0^0 = 1` makes both moduli equal `c`
/// wherever the stress is nonzero — the flat, load-independent design the
/// limit calls for. Truly zero stress is routed to the void sample before
/// this kernel runs.
#[inline]
fn sample_vp(t_abs: f64, dev: f64, c: f64, e: f64) -> (f64, f64) {
    (c * t_abs.powf(e), c * (dev / BETA).powf(e))
}

/// Optimal `(d*k, 2*mu)` for the summed-cost method: both moduli share the
/// weight `w^{r-1}` with `w = |Tr| + beta * ||dev||` (positive here).
#[inline]
fn sample_sp(t_abs: f64, dev: f64, c: f64, r_minus_1: f64) -> (f64, f64) {
    let w = t_abs + BETA * dev;
    let scale = c / w.powf(r_minus_1);
    (scale * t_abs, scale * (dev / BETA))
}

/// Recover the optimal moduli field from the stress in Kelvin coordinates
/// at the quadrature points (`kelvins`, cache order) and the optimal
/// reduced energy.
pub fn recover(
    cache: &QpCache,
    mesh: &Mesh,
    kelvins: &[[f64; 3]],
    energy: f64,
    problem: &DesignProblem,
) -> Result<ModuliField, RecoveryError> {
    if kelvins.len() != cache.points.len() {
        return Err(RecoveryError::Dimension(format!(
            "{} stress samples for {} quadrature points",
            kelvins.len(),
            cache.points.len()
        )));
    }
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(RecoveryError::ZeroLoad);
    }
    let p = problem.params.p;
    let r = problem.params.r;
    // c = Lambda * (r * energy)^{-1/p}; the exponent vanishes at p = inf.
    let c = if p.is_infinite() {
        problem.lambda
    } else {
        problem.lambda * (r * energy).powf(-1.0 / p)
    };
    let method = problem.method;
    let d = problem.params.d as f64;
    let at_qps: Vec<ModuliSample> = kelvins
        .par_iter()
        .map(|&[t, d1, d2]| {
            let t_abs = t.abs();
            let dev = d1.hypot(d2);
            if t_abs == 0.0 && dev == 0.0 {
                return ModuliSample::void();
            }
            let (dk, two_mu) = match method {
                MethodTag::Vp => sample_vp(t_abs, dev, c, 2.0 - r),
                MethodTag::Sp => sample_sp(t_abs, dev, c, r - 1.0),
            };
            ModuliSample::from_k_mu(dk / d, two_mu / 2.0)
        })
        .collect();
    let at_nodes = average_to_nodes(cache, mesh, &at_qps);
    Ok(ModuliField { at_qps, at_nodes })
}

/// Average quadrature-point moduli to nodes with the shape-function/volume
/// weights `eta_l * w * |detJ|`, then rebuild the derived quantities from
/// the averaged bulk/shear pair.
fn average_to_nodes(cache: &QpCache, mesh: &Mesh, at_qps: &[ModuliSample]) -> Vec<ModuliSample> {
    let nn = mesh.num_nodes();
    let mut wsum = vec![0.0; nn];
    let mut wk = vec![0.0; nn];
    let mut wmu = vec![0.0; nn];
    for (qp, s) in cache.points.iter().zip(at_qps) {
        let enodes = &mesh.elements[qp.elem].nodes;
        for (l, &n) in enodes.iter().enumerate() {
            let w = qp.eta[l] * qp.w_detj;
            wsum[n] += w;
            wk[n] += w * s.k;
            wmu[n] += w * s.mu;
        }
    }
    (0..nn)
        .map(|n| {
            if wsum[n] <= 0.0 {
                return ModuliSample::void();
            }
            // The four-point triangle rule carries a negative centroid
            // weight; clamp the rare slightly-negative average.
            let k = (wk[n] / wsum[n]).max(0.0);
            let mu = (wmu[n] / wsum[n]).max(0.0);
            ModuliSample::from_k_mu(k, mu)
        })
        .collect()
}

/// Everything produced by one design solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Minimizer in design coordinates.
    pub alpha_hat: Vec<f64>,
    /// Optimal nodal stress vector `T0 + N * alpha_hat`.
    pub t_hat: Vec<f64>,
    /// Optimal reduced energy, evaluated with the exact (unsmoothed)
    /// integrand even when the minimization itself was smoothed.
    pub energy: f64,
    /// Minimal compliance [N*m].
    pub compliance: f64,
    /// Recovered moduli fields.
    pub moduli: ModuliField,
    /// How the minimization went.
    pub report: OptimizerReport,
}

/// Assemble a [`SolveResult`] from a minimizer of `objective`: re-evaluate
/// the energy without smoothing, recover the moduli, and convert the energy
/// to a compliance under the budget set by `e0`.
pub fn finish_solve(
    objective: &Objective,
    alpha_hat: Vec<f64>,
    report: OptimizerReport,
    e0: f64,
) -> Result<SolveResult, RecoveryError> {
    let exact = Objective {
        cache: objective.cache,
        mesh: objective.mesh,
        rep: objective.rep,
        method: objective.method,
        params: objective.params,
        smoothing: SmoothingParams::none(),
    };
    let t_hat = exact.stress_vector(&alpha_hat);
    let kelvins = exact.qp_kelvin(&t_hat);
    let energy = exact.value_from_stress(&t_hat);
    let problem = DesignProblem::new(exact.method, exact.params, e0, exact.mesh.area)?;
    let moduli = recover(exact.cache, exact.mesh, &kelvins, energy, &problem)?;
    let compliance = compliance_from_energy(energy, exact.params.r, problem.lambda);
    Ok(SolveResult {
        alpha_hat,
        t_hat,
        energy,
        compliance,
        moduli,
        report,
    })
}
