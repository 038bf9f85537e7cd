//! Half-space Lame resolvent with free boundary conditions.

pub mod bvp;
pub mod energy;
pub mod field;
pub mod modes;
pub mod scan;
pub mod volevich;

pub use bvp::{decay_rate, oracle_bvp, BvpProfile};
pub use field::{
    full_lame_halfspace, full_lame_halfspace_at, solve_halfspace_trace, vertical_nodes, HalfLameSolution, HalfSpaceField, ModeResidual, RhsData,
};
pub use modes::{boundary_coeffs, boundary_coeffs_at, coefficient_maps, dense_coefficients, evaluate_mode, CoefficientMaps, ModeState};
pub use volevich::{l1_operator_ratio, solve_halfspace_volevich, volevich_symbols, VolevichOptions, VolevichReport};
pub use energy::{energy_uniqueness_check, EnergyOptions, EnergyReport, EnergyTrial};
pub use scan::{half_mode_family, halfspace_resolvent_scan};
