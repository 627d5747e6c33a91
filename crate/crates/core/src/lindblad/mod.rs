//! Zero-temperature master equation for the cavity and both mirrors in a
//! truncated Fock space. Used as an independent check on the linearized
//! Gaussian solver.
//!
//! Tensor order is (cavity, mirror 1, mirror 2), cavity most significant.

mod master;
mod measures;
mod ops;
mod state;

pub use master::{
    integrate_master_equation, lindblad_rhs, simulate_master_equation, LeakEvent, LeakPolicy,
    LindbladSystem, MasterOptions, MasterReport,
};
pub use measures::{
    log_negativity_dm, mutual_information_dm, partial_transpose_dm, von_neumann_entropy_dm,
    MirrorOperators,
};
pub use ops::{
    adjoint, annihilation, build_hamiltonian, build_operators, embed, identity, kron, quadratures,
    FockConfig, Operator, Operators, C64,
};
pub use state::{
    coherent_state, expectation, fock_state, partial_trace, thermal_state, DensityOperator,
};

use crate::error::Result;
use crate::gaussian::GaussianObservables;
use crate::meanfield::MeanFieldState;

/// Product of coherent states at the given classical amplitudes, with
/// mirror amplitudes `β = (q + ip)/√2`.
pub fn coherent_product(means: &MeanFieldState, cfg: &FockConfig) -> Result<DensityOperator> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = [
        (means.alpha(), cfg.n_cav),
        (C64::new(means.q1 * s, means.p1 * s), cfg.n_m1),
        (C64::new(means.q2 * s, means.p2 * s), cfg.n_m2),
    ];
    let parts = amps
        .iter()
        .map(|(a, n)| DensityOperator::pure(&coherent_state(*a, *n), vec![*n]))
        .collect::<Result<Vec<_>>>()?;
    DensityOperator::product(&parts)
}

/// Mirror observables of a full three-mode state.
pub fn mirror_observables(
    rho: &DensityOperator,
    ops: &MirrorOperators,
    sync_means: bool,
) -> Result<GaussianObservables> {
    ops.observables(&partial_trace(rho, &[1, 2])?, sync_means)
}
