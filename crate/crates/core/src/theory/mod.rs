//! Detection boundaries, rank-loss constants and rank-signal moments.

mod boundary;
mod characteristics;
mod constants;
mod quad;

pub use boundary::{boundary_infimum, check_boundary_system, rho, BoundarySystem};
pub use characteristics::{
    anomaly_characteristics, anomaly_characteristics_mc, u_moments, uniform_sampler, AnomalyCharacteristics, UMoments,
};
pub use constants::{
    rho_tilde, theta_tau, upsilon0, upsilon0_from_samples, upsilon0_numeric, xi_sigma, zeta_g, BaseFamily, Mixing,
    ThetaSetting,
};
