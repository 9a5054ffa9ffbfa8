//! Noncommutative tori, their finite coverings and the Moyal plane, realised as
//! exact algebra on Fourier coefficients together with numerical checks of the
//! analytic estimates that connect them.

pub mod covering;
pub mod error;
pub mod gaussian;
pub mod lattice;
pub mod moyal;
pub mod periodize;
pub mod poly;
pub mod quad;
pub mod torus;

pub use error::{Error, Result};
pub use lattice::{window_points, LatticePoint, SkewMatrix, SupportWindow, ThetaEntry};
pub use torus::{f_eps_rank_one, GnsVector, OpNormEstimate, TorusElement};
pub use covering::{build_tower, ordered_phase, CoveringGroupElement, CoveringMap, TowerSpec};
pub use gaussian::{moyal_fourier, moyal_product, ComplexGaussian, SchwartzGaussian};
pub use moyal::{
    opnorm_calibration, oscillator_function, oscillator_tensor, plane_wave_mul, scaling_identity_check, MoyalMatrix,
    MoyalRepr, OpNormCheck, PlaneWave,
};
pub use periodize::{
    decay_translate, lattice_sum_decay, level_star, linear_fit, partial_sums, periodize, periodize_complex,
    square_condition, Candidate, DecayRow, DecayTable, LevelElement, LinearFit, PartialSums, RankOneCandidate,
    SquareRow,
};
