//! The reduced objective: cost-power integrals of the stress field and their
//! gradients with respect to the null-space coefficients.
//!
//! With stresses parameterized as `T(alpha) = T0 + N*alpha`, the design
//! problem becomes the unconstrained minimization of
//!
//! ```text
//! Phi(alpha) = sum_qp (w|J| / r) * |||tau(qp)|||^r,    r = 2p/(p+1),
//! ```
//!
//! where `|||.|||` is the method's local stress norm built from the scaled
//! trace `Tr sigma = tr(sigma)/sqrt(2)` and the deviator norm:
//!
//! * volumetric/deviatoric split (`Vp`): `(|Tr|^r + beta^{2-r} ||dev||^r)^{1/r}`
//! * single-power sum (`Sp`): `|Tr| + beta ||dev||`
//!
//! with `beta = sqrt(2)` in two dimensions. Both are evaluated over the
//! shared quadrature cache from [`crate::statics`], so every other integral
//! in the pipeline (duality pairing, recovery) is consistent with `Phi` to
//! machine precision.

use crate::geometry::Mesh;
use crate::nullspace::NullSpaceRep;
use crate::statics::QpCache;
use rayon::prelude::*;
use thiserror::Error;

/// `beta^2 = d(d+1)/2 - 1` for `d = 2`.
pub const BETA: f64 = std::f64::consts::SQRT_2;

/// Row block size for the deterministic parallel matrix products.
const ROW_CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("invalid cost exponent: {0}")]
    InvalidExponent(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Exponents derived from the cost exponent `p` of the `L^p` constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentParams {
    /// Cost exponent in `[1, inf]`.
    pub p: f64,
    /// Stress-power exponent `r = 2p/(p+1)`, in `[1, 2]`; `p = inf` gives 2.
    pub r: f64,
    /// Conjugate stress exponent `r' = 2p/(p-1)`; `+inf` at `p = 1`.
    pub r_prime: f64,
    /// Deviator weight `sqrt(d(d+1)/2 - 1)`.
    pub beta: f64,
    /// Spatial dimension (fixed).
    pub d: usize,
}

impl ExponentParams {
    pub fn new(p: f64) -> Result<Self, ObjectiveError> {
        if !(p >= 1.0) {
            return Err(ObjectiveError::InvalidExponent(format!(
                "p must satisfy 1 <= p <= inf, got {p}"
            )));
        }
        let r = if p.is_infinite() {
            2.0
        } else {
            2.0 * p / (p + 1.0)
        };
        let r_prime = if p == 1.0 {
            f64::INFINITY
        } else if p.is_infinite() {
            2.0
        } else {
            2.0 * p / (p - 1.0)
        };
        Ok(ExponentParams {
            p,
            r,
            r_prime,
            beta: BETA,
            d: 2,
        })
    }

    pub fn is_p_one(&self) -> bool {
        self.p == 1.0
    }
}

/// Which of the two isotropic-moduli cost measures is being minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    /// Separate p-mean costs for the volumetric and deviatoric moduli.
    Vp,
    /// A single p-mean cost of the weighted modulus sum.
    Sp,
}

impl MethodTag {
    pub fn name(self) -> &'static str {
        match self {
            MethodTag::Vp => "vp",
            MethodTag::Sp => "sp",
        }
    }
}

impl std::str::FromStr for MethodTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vp" => Ok(MethodTag::Vp),
            "sp" => Ok(MethodTag::Sp),
            other => Err(format!("unknown method `{other}`, expected `vp` or `sp`")),
        }
    }
}

/// Regularization of the non-smooth magnitudes in the objective.
///
/// When `eps_abs > 0`, `|x|` becomes `sqrt(x^2 + eps^2)` and `||v||` becomes
/// `sqrt(||v||^2 + eps^2)` in *both* the value and the gradient, so the pair
/// stays exact for each other; `eps_abs = 0` reproduces the plain functional
/// and its (sub)gradient where defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub eps_abs: f64,
}

impl SmoothingParams {
    pub fn none() -> Self {
        SmoothingParams { eps_abs: 0.0 }
    }

    /// Default policy: smooth the genuinely kinked cases — the `Sp` norm and
    /// the `p = 1` limit — at a scale relative to the particular solution;
    /// the `Vp` integrand with `p > 1` is differentiable and stays exact.
    pub fn default_for(method: MethodTag, params: &ExponentParams, t0_inf_norm: f64) -> Self {
        Self::with_relative(method, params, t0_inf_norm, 1e-8)
    }

    pub fn with_relative(
        method: MethodTag,
        params: &ExponentParams,
        t0_inf_norm: f64,
        eps_rel: f64,
    ) -> Self {
        if method == MethodTag::Sp || params.is_p_one() {
            SmoothingParams {
                eps_abs: eps_rel * (t0_inf_norm + 1.0),
            }
        } else {
            SmoothingParams::none()
        }
    }
}

/// Scaled trace and deviator of a symmetric tensor `(s11, s22, s12)`:
/// `Tr = (s11 + s22)/sqrt(2)` and `dev = sigma - (tr sigma / 2) I` as
/// `(d11, d22, d12)`.
pub fn tr_dev_split(sigma: [f64; 3]) -> (f64, [f64; 3]) {
    let mean = 0.5 * (sigma[0] + sigma[1]);
    (
        (sigma[0] + sigma[1]) / std::f64::consts::SQRT_2,
        [sigma[0] - mean, sigma[1] - mean, sigma[2]],
    )
}

/// Frobenius norm of a symmetric tensor `(s11, s22, s12)` (off-diagonal
/// counted twice).
pub fn frobenius_norm(sigma: [f64; 3]) -> f64 {
    (sigma[0] * sigma[0] + sigma[1] * sigma[1] + 2.0 * sigma[2] * sigma[2]).sqrt()
}

/// Orthonormal (Kelvin) coordinates `(t, d1, d2)` of a symmetric tensor:
/// `t` the scaled trace, `(d1, d2)` the deviator so that `d1^2 + d2^2`
/// is the deviator's squared Frobenius norm.
#[inline]
pub fn kelvin(sigma: [f64; 3]) -> [f64; 3] {
    let s = std::f64::consts::SQRT_2;
    [
        (sigma[0] + sigma[1]) / s,
        (sigma[0] - sigma[1]) / s,
        s * sigma[2],
    ]
}

/// The method's local stress norm.
pub fn local_norm(sigma: [f64; 3], method: MethodTag, params: &ExponentParams) -> f64 {
    let [t, d1, d2] = kelvin(sigma);
    let dev = (d1 * d1 + d2 * d2).sqrt();
    match method {
        MethodTag::Vp => {
            let r = params.r;
            (t.abs().powf(r) + params.beta.powf(2.0 - r) * dev.powf(r)).powf(1.0 / r)
        }
        MethodTag::Sp => t.abs() + params.beta * dev,
    }
}

/// Per-unit-measure integrand value and its gradient with respect to the
/// Kelvin coordinates. `beta_pow = beta^(2-r)` is precomputed.
#[inline]
fn local_vp(t: f64, d1: f64, d2: f64, r: f64, beta_pow: f64, eps: f64) -> (f64, f64, f64, f64) {
    if eps > 0.0 {
        let s1 = (t * t + eps * eps).sqrt();
        let s2 = (d1 * d1 + d2 * d2 + eps * eps).sqrt();
        let val = (s1.powf(r) + beta_pow * s2.powf(r)) / r;
        let gt = s1.powf(r - 2.0) * t;
        let c2 = beta_pow * s2.powf(r - 2.0);
        (val, gt, c2 * d1, c2 * d2)
    } else {
        let s1 = t.abs();
        let s2 = (d1 * d1 + d2 * d2).sqrt();
        let val = (s1.powf(r) + beta_pow * s2.powf(r)) / r;
        // sign(t) * |t|^(r-1) rather than |t|^(r-2) * t, to avoid 0/0.
        let gt = if s1 == 0.0 {
            0.0
        } else {
            t.signum() * s1.powf(r - 1.0)
        };
        let c2 = if s2 == 0.0 {
            0.0
        } else {
            beta_pow * s2.powf(r - 2.0)
        };
        (val, gt, c2 * d1, c2 * d2)
    }
}

#[inline]
fn local_sp(t: f64, d1: f64, d2: f64, r: f64, beta: f64, eps: f64) -> (f64, f64, f64, f64) {
    let s1 = (t * t + eps * eps).sqrt();
    let s2 = (d1 * d1 + d2 * d2 + eps * eps).sqrt();
    let a = s1 + beta * s2;
    let val = a.powf(r) / r;
    let ar1 = a.powf(r - 1.0);
    let gt = if s1 == 0.0 { 0.0 } else { ar1 * t / s1 };
    let c2 = if s2 == 0.0 { 0.0 } else { ar1 * beta / s2 };
    (val, gt, c2 * d1, c2 * d2)
}

/// The reduced functional `Phi(alpha)` over a fixed discretization.
///
/// Evaluations are deterministic for a given input regardless of the rayon
/// thread count: parallel work is split at fixed block boundaries and
/// combined serially in block order.
pub struct Objective<'a> {
    pub cache: &'a QpCache,
    pub mesh: &'a Mesh,
    pub rep: &'a NullSpaceRep,
    pub method: MethodTag,
    pub params: ExponentParams,
    pub smoothing: SmoothingParams,
}

impl<'a> Objective<'a> {
    pub fn new(
        cache: &'a QpCache,
        mesh: &'a Mesh,
        rep: &'a NullSpaceRep,
        method: MethodTag,
        params: ExponentParams,
        smoothing: SmoothingParams,
    ) -> Result<Self, ObjectiveError> {
        if rep.num_stress_dofs != 3 * mesh.num_nodes() {
            return Err(ObjectiveError::Dimension(format!(
                "null-space representation has {} stress dofs, mesh implies {}",
                rep.num_stress_dofs,
                3 * mesh.num_nodes()
            )));
        }
        Ok(Objective {
            cache,
            mesh,
            rep,
            method,
            params,
            smoothing,
        })
    }

    /// At `r = 1` the two local norms coincide; route the volumetric/
    /// deviatoric method through the sum form so the equality is bitwise.
    #[inline]
    fn effective_method(&self) -> MethodTag {
        if self.params.r == 1.0 {
            MethodTag::Sp
        } else {
            self.method
        }
    }

    pub fn num_design_dofs(&self) -> usize {
        self.rep.nullity
    }

    /// `T(alpha) = T0 + N * alpha`, computed in parallel row blocks.
    pub fn stress_vector(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.rep.nullity);
        let s = self.rep.nullity;
        let mut t = vec![0.0; self.rep.num_stress_dofs];
        if s == 0 {
            t.copy_from_slice(&self.rep.t0);
            return t;
        }
        let t0 = &self.rep.t0;
        let basis = &self.rep.basis;
        t.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * ROW_CHUNK;
            for (k, ti) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let row = &basis[i * s..(i + 1) * s];
                let mut acc = t0[i];
                for (n, a) in row.iter().zip(alpha) {
                    acc += n * a;
                }
                *ti = acc;
            }
        });
        t
    }

    /// Kelvin coordinates `(t, d1, d2)` of the stress at every quadrature
    /// point, in cache order.
    pub fn qp_kelvin(&self, stress: &[f64]) -> Vec<[f64; 3]> {
        self.cache
            .points
            .par_iter()
            .map(|qp| {
                let enodes = &self.mesh.elements[qp.elem].nodes;
                let mut sigma = [0.0; 3];
                for (l, &n) in enodes.iter().enumerate() {
                    let e = qp.eta[l];
                    sigma[0] += e * stress[3 * n];
                    sigma[1] += e * stress[3 * n + 1];
                    sigma[2] += e * stress[3 * n + 2];
                }
                kelvin(sigma)
            })
            .collect()
    }

    pub fn value(&self, alpha: &[f64]) -> f64 {
        let stress = self.stress_vector(alpha);
        self.value_from_stress(&stress)
    }

    /// `Phi` evaluated at an explicit stress vector (not necessarily
    /// equilibrated); used by the recovery layer and tests.
    pub fn value_from_stress(&self, stress: &[f64]) -> f64 {
        let kelvins = self.qp_kelvin(stress);
        let (r, beta, eps) = (self.params.r, self.params.beta, self.smoothing.eps_abs);
        let beta_pow = beta.powf(2.0 - r);
        let method = self.effective_method();
        let locals: Vec<f64> = kelvins
            .par_iter()
            .zip(&self.cache.points)
            .map(|(&[t, d1, d2], qp)| {
                let (val, _, _, _) = match method {
                    MethodTag::Vp => local_vp(t, d1, d2, r, beta_pow, eps),
                    MethodTag::Sp => local_sp(t, d1, d2, r, beta, eps),
                };
                qp.w_detj * val
            })
            .collect();
        locals.iter().sum()
    }

    /// Optimizer-callback adapter: value, plus gradient when requested.
    pub fn value_and_grad_or_value(&self, alpha: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match grad {
            Some(g) => self.value_and_grad(alpha, g),
            None => self.value(alpha),
        }
    }

    /// Value and gradient in one pass; `grad` must have length `nullity`.
    pub fn value_and_grad(&self, alpha: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(grad.len(), self.rep.nullity);
        let stress = self.stress_vector(alpha);
        let kelvins = self.qp_kelvin(&stress);
        let (r, beta, eps) = (self.params.r, self.params.beta, self.smoothing.eps_abs);
        let beta_pow = beta.powf(2.0 - r);
        let method = self.effective_method();
        let locals: Vec<(f64, f64, f64, f64)> = kelvins
            .par_iter()
            .zip(&self.cache.points)
            .map(|(&[t, d1, d2], qp)| {
                let (val, gt, gd1, gd2) = match method {
                    MethodTag::Vp => local_vp(t, d1, d2, r, beta_pow, eps),
                    MethodTag::Sp => local_sp(t, d1, d2, r, beta, eps),
                };
                (
                    qp.w_detj * val,
                    qp.w_detj * gt,
                    qp.w_detj * gd1,
                    qp.w_detj * gd2,
                )
            })
            .collect();

        // Serial scatter in quadrature order: Phi and the stress-space
        // gradient z = dPhi/dT (chain rule through the Kelvin map).
        let mut phi = 0.0;
        let mut z = vec![0.0; self.rep.num_stress_dofs];
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let sqrt2 = std::f64::consts::SQRT_2;
        for (qp, &(val, gt, gd1, gd2)) in self.cache.points.iter().zip(&locals) {
            phi += val;
            let enodes = &self.mesh.elements[qp.elem].nodes;
            for (l, &n) in enodes.iter().enumerate() {
                let e = qp.eta[l];
                z[3 * n] += e * (gt + gd1) * inv_sqrt2;
                z[3 * n + 1] += e * (gt - gd1) * inv_sqrt2;
                z[3 * n + 2] += e * sqrt2 * gd2;
            }
        }

        // grad = N^T z, reduced in fixed row blocks.
        let s = self.rep.nullity;
        if s == 0 {
            return phi;
        }
        let basis = &self.rep.basis;
        let partials: Vec<Vec<f64>> = basis
            .par_chunks(ROW_CHUNK * s)
            .zip(z.par_chunks(ROW_CHUNK))
            .map(|(rows, zc)| {
                let mut local = vec![0.0; s];
                for (row, &zi) in rows.chunks(s).zip(zc) {
                    if zi != 0.0 {
                        for (g, &n) in local.iter_mut().zip(row) {
                            *g += n * zi;
                        }
                    }
                }
                local
            })
            .collect();
        grad.fill(0.0);
        for part in &partials {
            for (g, p) in grad.iter_mut().zip(part) {
                *g += p;
            }
        }
        phi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_rect_mesh, Element, ElementKind, Mesh, Node};
    use crate::nullspace::{decompose, NullSpaceRep};
    use crate::statics::{assemble, build_qp_cache, BoundaryConditions, TriangleRule};
    use approx::assert_relative_eq;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2024)
    }

    #[test]
    fn tr_dev_split_identity_tensor() {
        let (tr, dev) = tr_dev_split([1.0, 1.0, 0.0]);
        assert_relative_eq!(tr, std::f64::consts::SQRT_2, max_relative = 1e-15);
        assert_eq!(dev, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn tr_dev_split_pure_shear_diagonal() {
        let (tr, dev) = tr_dev_split([1.0, -1.0, 0.0]);
        assert_eq!(tr, 0.0);
        assert_eq!(dev, [1.0, -1.0, 0.0]);
        assert_relative_eq!(
            frobenius_norm(dev),
            std::f64::consts::SQRT_2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn inner_product_identity_random_tensors() {
        let mut rng = rng();
        for _ in 0..50 {
            let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let e: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let dot = s[0] * e[0] + s[1] * e[1] + 2.0 * s[2] * e[2];
            let (ts, ds) = tr_dev_split(s);
            let (te, de) = tr_dev_split(e);
            let split_dot = ts * te + ds[0] * de[0] + ds[1] * de[1] + 2.0 * ds[2] * de[2];
            assert_relative_eq!(dot, split_dot, max_relative = 1e-14, epsilon = 1e-15);
            // The Kelvin coordinates realize the same inner product.
            let ks = kelvin(s);
            let ke = kelvin(e);
            let kdot: f64 = ks.iter().zip(&ke).map(|(a, b)| a * b).sum();
            assert_relative_eq!(dot, kdot, max_relative = 1e-14, epsilon = 1e-15);
        }
    }

    #[test]
    fn local_norm_special_values() {
        let p2 = ExponentParams::new(2.0).unwrap();
        let pinf = ExponentParams::new(f64::INFINITY).unwrap();
        // r = 2 reduces the split norm to the Frobenius norm.
        let mut rng = rng();
        for _ in 0..20 {
            let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            assert_relative_eq!(
                local_norm(s, MethodTag::Vp, &pinf),
                frobenius_norm(s),
                max_relative = 1e-13
            );
        }
        // Identity tensor: pure trace for both methods.
        let i = [1.0, 1.0, 0.0];
        assert_relative_eq!(
            local_norm(i, MethodTag::Sp, &p2),
            std::f64::consts::SQRT_2,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            local_norm(i, MethodTag::Vp, &p2),
            std::f64::consts::SQRT_2,
            max_relative = 1e-15
        );
        // Trace-free diagonal: the deviator weight doubles the norm.
        let d = [1.0, -1.0, 0.0];
        assert_relative_eq!(local_norm(d, MethodTag::Sp, &p2), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn exponent_params_limits() {
        let p1 = ExponentParams::new(1.0).unwrap();
        assert_eq!(p1.r, 1.0);
        assert!(p1.r_prime.is_infinite());
        let pinf = ExponentParams::new(f64::INFINITY).unwrap();
        assert_eq!(pinf.r, 2.0);
        assert_eq!(pinf.r_prime, 2.0);
        let p3 = ExponentParams::new(3.0).unwrap();
        assert_relative_eq!(p3.r, 1.5, max_relative = 1e-15);
        assert_relative_eq!(p3.r_prime, 3.0, max_relative = 1e-15);
        assert!(ExponentParams::new(0.5).is_err());
        assert!(ExponentParams::new(f64::NAN).is_err());
    }

    /// Norm sandwich at r = 2: `sp/sqrt(3) <= ||sigma|| <= sp`, both sides
    /// attained.
    #[test]
    fn norm_equivalence_at_r_two() {
        let pinf = ExponentParams::new(f64::INFINITY).unwrap();
        let mut rng = rng();
        for _ in 0..200 {
            let s: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let vp = local_norm(s, MethodTag::Vp, &pinf);
            let sp = local_norm(s, MethodTag::Sp, &pinf);
            assert!(vp <= sp * (1.0 + 1e-14));
            assert!(vp >= sp / 3.0_f64.sqrt() * (1.0 - 1e-14));
        }
        // Upper bound attained by a pure-trace tensor.
        let pure_trace = [2.0, 2.0, 0.0];
        assert_relative_eq!(
            local_norm(pure_trace, MethodTag::Vp, &pinf),
            local_norm(pure_trace, MethodTag::Sp, &pinf),
            max_relative = 1e-14
        );
        // Lower bound attained when (|Tr|, ||dev||) is parallel to (1, sqrt 2).
        let extremal = [std::f64::consts::SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2];
        assert_relative_eq!(
            local_norm(extremal, MethodTag::Vp, &pinf),
            local_norm(extremal, MethodTag::Sp, &pinf) / 3.0_f64.sqrt(),
            max_relative = 1e-14
        );
    }

    /// A null-space representation with zero design freedom pinning the
    /// nodal stresses to a given vector.
    fn fixed_rep(t0: Vec<f64>) -> NullSpaceRep {
        let m = t0.len();
        NullSpaceRep {
            t0,
            basis: Vec::new(),
            num_stress_dofs: m,
            nullity: 0,
            rank: m,
            rank_tol: 1e-10,
        }
    }

    /// Hand-checked quadrature on one triangle with linearly varying stress:
    /// nodes (0,0), (2,0), (0,1), |J| = 2, three-point rule.
    #[test]
    fn phi_matches_hand_quadrature_oracle() {
        let nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0 },
            Node { id: 1, x: 2.0, y: 0.0 },
            Node { id: 2, x: 0.0, y: 1.0 },
        ];
        let elements = vec![Element {
            id: 0,
            kind: ElementKind::Tri3,
            nodes: vec![0, 1, 2],
        }];
        let mesh = Mesh::new(nodes, elements, vec![]).unwrap();
        let cache = build_qp_cache(&mesh, TriangleRule::ThreePoint).unwrap();
        let rep = fixed_rep(vec![
            1.0, 0.5, 0.25, // node 0: s11, s22, s12
            -0.5, 2.0, 1.0, // node 1
            0.0, -1.0, 0.5, // node 2
        ]);

        let vp = Objective::new(
            &cache,
            &mesh,
            &rep,
            MethodTag::Vp,
            ExponentParams::new(2.0).unwrap(),
            SmoothingParams::none(),
        )
        .unwrap();
        assert_relative_eq!(vp.value(&[]), 1.297992704378283, max_relative = 1e-12);

        let sp = Objective::new(
            &cache,
            &mesh,
            &rep,
            MethodTag::Sp,
            ExponentParams::new(3.0).unwrap(),
            SmoothingParams::none(),
        )
        .unwrap();
        assert_relative_eq!(sp.value(&[]), 1.854415476634317, max_relative = 1e-12);
    }

    #[test]
    fn phi_of_uniform_stress_is_pointwise_power() {
        // Unit-area mesh, constant nodal stress: Phi = local_norm^r / r.
        let mesh = generate_rect_mesh(1.0, 1.0, 3, 3, ElementKind::Tri3).unwrap();
        let cache = build_qp_cache(&mesh, TriangleRule::ThreePoint).unwrap();
        let sigma = [1.2, -0.4, 0.7];
        let mut t0 = Vec::new();
        for _ in 0..mesh.num_nodes() {
            t0.extend_from_slice(&sigma);
        }
        let rep = fixed_rep(t0);
        for (method, p) in [(MethodTag::Vp, 2.0), (MethodTag::Sp, 3.0), (MethodTag::Vp, 1.0)] {
            let params = ExponentParams::new(p).unwrap();
            let obj =
                Objective::new(&cache, &mesh, &rep, method, params, SmoothingParams::none())
                    .unwrap();
            let expected = local_norm(sigma, method, &params).powf(params.r) / params.r;
            assert_relative_eq!(obj.value(&[]), expected, max_relative = 1e-12);
        }
    }

    fn small_system() -> (Mesh, crate::statics::StaticsSystem) {
        let mesh = generate_rect_mesh(2.0, 1.0, 4, 2, ElementKind::Quad4).unwrap();
        let bc = BoundaryConditions {
            support_tags: vec!["left".into()],
            tractions: vec![("right".into(), [1.0, -2.0])],
            point_forces: vec![],
        };
        let sys = assemble(&mesh, &bc, TriangleRule::ThreePoint).unwrap();
        (mesh, sys)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (mesh, sys) = small_system();
        let rep = decompose(&sys, 1e-10).unwrap();
        let mut rng = rng();
        let alpha: Vec<f64> = (0..rep.nullity).map(|_| rng.random_range(-0.5..0.5)).collect();
        let t0_inf = rep.t0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        for (method, p) in [
            (MethodTag::Vp, 2.0),
            (MethodTag::Vp, 3.0),
            (MethodTag::Sp, 2.0),
            (MethodTag::Sp, 3.0),
            (MethodTag::Vp, 1.0),
        ] {
            let params = ExponentParams::new(p).unwrap();
            let smoothing = SmoothingParams::default_for(method, &params, t0_inf);
            let obj =
                Objective::new(&sys.cache, &mesh, &rep, method, params, smoothing).unwrap();
            let mut grad = vec![0.0; rep.nullity];
            obj.value_and_grad(&alpha, &mut grad);
            let norm_a = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
            let h = 1e-6 * (norm_a + 1.0);
            // Directional derivatives along random unit directions avoid the
            // cancellation noise of per-component differences on tiny
            // entries.
            for _ in 0..5 {
                let mut v: Vec<f64> =
                    (0..rep.nullity).map(|_| rng.random_range(-1.0..1.0)).collect();
                let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= vn);
                let ap: Vec<f64> = alpha.iter().zip(&v).map(|(a, d)| a + h * d).collect();
                let am: Vec<f64> = alpha.iter().zip(&v).map(|(a, d)| a - h * d).collect();
                let fd = (obj.value(&ap) - obj.value(&am)) / (2.0 * h);
                let gv: f64 = grad.iter().zip(&v).map(|(g, d)| g * d).sum();
                assert!(
                    (gv - fd).abs() <= 1e-5 * gv.abs().max(fd.abs()).max(1e-12),
                    "{:?} p={p}: directional grad {gv} vs fd {fd}",
                    method
                );
            }
        }
    }

    #[test]
    fn zero_stress_element_contributes_zero_gradient() {
        // With T0 = 0 and alpha = 0 the whole field vanishes; for p > 1 the
        // gradient of Phi at zero stress is zero.
        let (mesh, sys) = small_system();
        let mut rep = decompose(&sys, 1e-10).unwrap();
        rep.t0.fill(0.0);
        let params = ExponentParams::new(2.0).unwrap();
        let obj = Objective::new(
            &sys.cache,
            &mesh,
            &rep,
            MethodTag::Vp,
            params,
            SmoothingParams::none(),
        )
        .unwrap();
        let alpha = vec![0.0; rep.nullity];
        let mut grad = vec![1.0; rep.nullity];
        let val = obj.value_and_grad(&alpha, &mut grad);
        assert_eq!(val, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn convexity_along_segments() {
        let (mesh, sys) = small_system();
        let rep = decompose(&sys, 1e-10).unwrap();
        let mut rng = rng();
        for (method, p) in [(MethodTag::Vp, 2.0), (MethodTag::Sp, 3.0)] {
            let params = ExponentParams::new(p).unwrap();
            let obj = Objective::new(
                &sys.cache,
                &mesh,
                &rep,
                method,
                params,
                SmoothingParams::none(),
            )
            .unwrap();
            for _ in 0..5 {
                let a1: Vec<f64> =
                    (0..rep.nullity).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a2: Vec<f64> =
                    (0..rep.nullity).map(|_| rng.random_range(-1.0..1.0)).collect();
                let f1 = obj.value(&a1);
                let f2 = obj.value(&a2);
                for lam in [0.25, 0.5, 0.75] {
                    let mid: Vec<f64> = a1
                        .iter()
                        .zip(&a2)
                        .map(|(x, y)| lam * x + (1.0 - lam) * y)
                        .collect();
                    let fm = obj.value(&mid);
                    let bound = lam * f1 + (1.0 - lam) * f2;
                    assert!(
                        fm <= bound + 1e-12 * bound.abs(),
                        "{method:?} p={p}: {fm} > {bound}"
                    );
                }
            }
        }
    }

    #[test]
    fn homogeneity_of_degree_r_without_particular_solution() {
        let (mesh, sys) = small_system();
        let mut rep = decompose(&sys, 1e-10).unwrap();
        rep.t0.fill(0.0);
        let mut rng = rng();
        let alpha: Vec<f64> = (0..rep.nullity).map(|_| rng.random_range(-1.0..1.0)).collect();
        for (method, p) in [(MethodTag::Vp, 2.0), (MethodTag::Sp, 3.0)] {
            let params = ExponentParams::new(p).unwrap();
            let obj = Objective::new(
                &sys.cache,
                &mesh,
                &rep,
                method,
                params,
                SmoothingParams::none(),
            )
            .unwrap();
            let scaled: Vec<f64> = alpha.iter().map(|a| 3.0 * a).collect();
            assert_relative_eq!(
                obj.value(&scaled),
                3.0_f64.powf(params.r) * obj.value(&alpha),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn p_one_collapses_both_methods_bitwise() {
        let (mesh, sys) = small_system();
        let rep = decompose(&sys, 1e-10).unwrap();
        let params = ExponentParams::new(1.0).unwrap();
        let t0_inf = rep.t0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut rng = rng();
        let alpha: Vec<f64> = (0..rep.nullity).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut values = Vec::new();
        for method in [MethodTag::Vp, MethodTag::Sp] {
            let smoothing = SmoothingParams::default_for(method, &params, t0_inf);
            let obj =
                Objective::new(&sys.cache, &mesh, &rep, method, params, smoothing).unwrap();
            values.push(obj.value(&alpha));
        }
        assert_eq!(values[0], values[1]);
    }
}
