//! Leader selection for undirected consensus networks.
//!
//! A network of agents runs consensus dynamics under white-noise forcing.
//! A subset of nodes — the *leaders* — is given access to absolute state
//! information; everyone else uses only relative measurements. The quality
//! of a leader set is the steady-state mean-square deviation from consensus,
//! which for both problem variants reduces to the trace of an inverse of a
//! (modified or grounded) graph Laplacian:
//!
//! * noise-corrupted leaders: `J(x) = tr((L + Dκ Dx)⁻¹)` — leaders measure
//!   their own state through noise with feedback gains `κ`,
//! * noise-free leaders: `J_f = tr(L_f⁻¹)` — leaders are pinned exactly and
//!   `L_f` is the principal submatrix of `L` on the followers.
//!
//! Picking the best `N_l` leaders is combinatorial, so the crate computes
//! certified *sandwiches* around the optimum:
//!
//! * lower bounds from convex relaxations — a log-barrier interior-point
//!   method for the noise-corrupted problem ([`noise_corrupted::cr1_lower_bound`])
//!   and an ADMM solver with PSD/simplex projections for the noise-free one
//!   ([`noise_free::cr2_solve`]),
//! * upper bounds from greedy selection plus one-for-one swap refinement,
//!   made O(n²) per step by the low-rank inverse-update kernels in
//!   [`lowrank`].
//!
//! [`sensor`] carries the equivalent best-linear-unbiased-estimation view:
//! choosing leaders is the same problem as choosing which nodes receive
//! absolute position sensors.
//!
//! Everything is deterministic: graph generators take explicit seeds and the
//! solvers are straight-line numeric code, so experiment outputs replay
//! bit-identically.

pub mod error;
pub mod graph;
pub mod lowrank;
pub mod noise_corrupted;
pub mod noise_free;
pub mod sensor;

pub use error::Error;

/// Convenience alias used throughout: every fallible operation returns this.
pub type Result<T> = std::result::Result<T, Error>;
