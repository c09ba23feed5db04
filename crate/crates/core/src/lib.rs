//! Rank-one barrier walks for the extreme eigenvalues of sample covariance
//! matrices.
//!
//! The Gram matrix A = Σₖ XₖXₖᵀ of m isotropic samples in ℝⁿ is built one
//! rank-one update at a time. Two barriers travel with it: a lower barrier
//! that stays strictly below λ_min and an upper barrier that stays strictly
//! above λ_max. Their positions are steered by Stieltjes potentials
//! (tr((A − u)⁻¹) and tr((u − A)⁻¹)), and at the end of the walk they certify
//! bounds that approach the Marchenko–Pastur edges (√m ∓ √n)².
//!
//! Modules:
//! - [`spectral`]: eigendecomposition, rank-one updates, potentials.
//! - [`samplers`]: seeded isotropic sample generators.
//! - [`tail`]: empirical tail-projection and moment checks.
//! - [`lower`] / [`upper`]: the two barrier walks.
//! - [`walk`]: options and diagnostics shared by the walks.
//! - [`mp`]: Marchenko–Pastur reference law.
//! - [`harness`]: experiment configs and the CLI backend.

pub mod error;
pub mod harness;
pub mod lower;
pub mod mp;
pub mod samplers;
mod secular;
pub mod spectral;
pub mod tail;
pub mod upper;
pub mod walk;

pub use error::{BarrierSide, Error, Result};
pub use samplers::{Family, SampleBatch, SamplerModel};
pub use spectral::{
    eigendecompose, rank_one_update, sherman_morrison_trace, stieltjes_lower, stieltjes_upper,
    RankOneVector, SymmetricSpectrum, UpdateMode,
};
