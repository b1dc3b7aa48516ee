//! Compliance-minimal distribution of isotropic elastic moduli in 2D.
//!
//! This crate distributes a bulk modulus `k` and a shear modulus `mu` over a
//! plane domain so that the compliance of the loaded structure becomes
//! minimal while a cost measure of the moduli stays within a fixed budget
//! `Lambda`. Two cost measures are supported, selected by [`objective::MethodTag`]:
//!
//! * **vp** — bounds the `L^p` norm of the moduli eigenvalue pair
//!   `(d*k, beta^(2/p) * 2*mu)`,
//! * **sp** — bounds the `L^p` norm of the weighted sum `d*k + 2*beta^2*mu`,
//!
//! where `d = 2` and `beta = sqrt(d*(d+1)/2 - 1) = sqrt(2)`.
//!
//! Both design problems reduce to an unconstrained convex minimization over
//! statically admissible stress fields: the equilibrium conditions are
//! assembled as a linear system `B*T = Q` over nodal stresses, every
//! admissible stress is written as `T0 + N*alpha` via a null-space basis, and
//! the resulting functional `Phi_h(alpha)` — an `r`-th power integral of a
//! method-specific stress norm with `r = 2p/(p+1)` — is minimized by
//! nonlinear conjugate gradients. The optimal moduli follow from the optimal
//! stress in closed form, including the Young modulus / Poisson ratio
//! conversion.
//!
//! Module map:
//!
//! * [`geometry`] — meshes for the benchmark domains plus a text mesh format,
//! * [`statics`] — element interpolation, quadrature, equilibrium assembly,
//! * [`nullspace`] — particular solution and null-space basis of `B`,
//! * [`objective`] — the discretized functionals `Phi_h` and their gradients,
//! * [`optimizer`] — conjugate-gradient minimization with restarts,
//! * [`recovery`] — compliance and moduli fields from the optimal stress,
//! * [`verify`] — closed-form minimizers vs. brute-force oracles, duality
//!   bounds, optimality residuals, monotonicity sweeps,
//! * [`interface`] — configuration, solve/sweep drivers, VTK/CSV export.
//!
//! The `imd` binary exposes the pipeline as `imd mesh|solve|sweep|report`;
//! the `examples/` directory demonstrates each capability as a library call.

pub mod geometry;
pub mod interface;
pub mod nullspace;
pub mod objective;
pub mod optimizer;
pub mod recovery;
pub mod statics;
pub mod verify;
