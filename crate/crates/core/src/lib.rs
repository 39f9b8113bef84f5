//! Mean-field simulation and stability analysis of a driven-dissipative
//! condensate whose two density-wave modes couple to two quadratures of a
//! lossy cavity field.
//!
//! Modules:
//! - [`model`]: parameters, grid, fields, order parameters, symmetries.
//! - [`dynamics`]: real-time evolution, imaginary-time relaxation, limit cycles.
//! - [`stability`]: excitation spectra of the uniform state and thresholds.
//! - [`threemode`]: the truncated three-level collective model.
//! - [`scan`]: point classification and phase-diagram sweeps.

pub mod dynamics;
pub mod error;
pub mod model;
pub mod scan;
pub mod spectral;
pub mod stability;
pub mod threemode;

pub use dynamics::{
    closed_energy, detect_limit_cycle, evolve_real_time, find_steady_state,
    relax_imaginary_time, relax_step, seed_state, steady_residual, EvolveConfig, LimitCycle, RelaxConfig,
    SteadyState, Trajectory,
};
pub use error::{Error, Result};
pub use model::{
    apply_z2, cavity_steady, dissipative_phase_shift, effective_potential, gauge_to_equal_pumps,
    order_parameters, CavityAmplitude, CondensateField, Grid, ModelParams, OrderParameters,
    PhaseLabel, PhaseShift,
};
pub use scan::{classify_point, CellRecord, ClassifyConfig, PhaseTable};
pub use stability::{
    adiabatic_entries, adiabatic_spectrum, beyond_adiabatic_roots, classify_stability,
    instability_criterion, np_threshold, poly_roots, Spectrum, SpectrumSource, StabilityVerdict,
};
pub use threemode::{TMParams, TMState};

pub use num_complex::Complex64;
