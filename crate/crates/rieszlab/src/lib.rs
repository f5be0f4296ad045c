//! A numerical laboratory for truncated Riesz-type transforms of
//! finitely supported measures.
//!
//! Everything here works with one object: a finite collection of
//! weighted atoms in R^d, paired with the antisymmetric kernel
//! `K(x) = (x_i/|x|)^n |x|^{-s}` for an exponent `0 < s < 1` and an odd
//! power `n`. On top of the truncated transform the crate builds the
//! machinery used to study when such transforms can be bounded: Menger
//! style symmetrization energies, exact square-sum regroupings, density
//! functionals, a variational defect with its analytic derivative, and
//! the multiscale energy growth that rules out reflectionless measures.
//!
//! Every routine is deterministic for fixed seeds, at any thread count:
//! parallel reductions are always merged in a fixed order.
//!
//! ## Modules
//!
//! - [`measure`]: atoms, weights, balls, densities, thin-boundary
//!   search.
//! - [`kernel`]: the kernel itself and fused pair evaluations.
//! - [`generators`]: self-similar (Cantor) measures, segments, seeded
//!   clouds.
//! - [`transform`]: truncated fields, adjoint, weighted inner products,
//!   operator norm by power iteration, annulus diagnostics.
//! - [`tree`]: a treecode accelerator for the same field, with an
//!   accuracy dial.
//! - [`symmetrization`]: the permutation form, triple energies (exact
//!   and Monte Carlo), and the two exact regrouping identities.
//! - [`defect`]: Lipschitz test functions, transform pairings, the ball
//!   defect functional, perturbation curves and the variational
//!   derivative.
//! - [`blowup`]: maximal-density balls, multiscale energy profiles over
//!   doubling chains, and the energy-to-density falsifier ratio.
//! - [`io`]: JSON and CSV measure files.
//! - [`error`]: one error enum; exit code 1 means bad input, 2 means a
//!   numerical degeneracy (truncation tie, coincident points, massless
//!   ball).
//!
//! ## Examples
//!
//! Each major capability has a runnable demonstration:
//!
//! ```bash
//! cargo run --release --example cantor_measures          # generators, flat s-density
//! cargo run --release --example density_profile          # plain vs Poisson density, thin balls
//! cargo run --release --example truncated_transform      # fields, cutoff dependence
//! cargo run --release --example treecode_speedup         # accelerator accuracy/time trade
//! cargo run --release --example operator_norm            # power iteration, norm growth
//! cargo run --release --example symmetrization_identities # exact regroupings
//! cargo run --release --example comparability            # permutation form vs maxdist^-2s
//! cargo run --release --example monte_carlo_energy       # estimator vs exact triple sum
//! cargo run --release --example reflectionless_pairing   # test-function pairings
//! cargo run --release --example variational_derivative   # defect, curve, g'(0), FD order
//! cargo run --release --example blowup_growth            # energy growth per doubling
//! ```
//!
//! A thin batch front end (`rieszlab`) wraps the same entry points and
//! prints one JSON report per invocation; see the repository README.

pub mod blowup;
pub mod defect;
pub mod error;
pub mod generators;
pub mod io;
pub mod kernel;
pub mod measure;
pub mod symmetrization;
pub mod transform;
pub mod tree;
mod vecmath;
