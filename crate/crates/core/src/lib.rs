//! Discrete Hamiltonian mechanics on integer phase-space lattices.
//!
//! Integer states `(Q, P)` evolve by hopping to the next lattice site on their
//! own energy contour, so an integer energy is conserved exactly and every
//! step is invertible. Single-pair updates compose into multi-pair evolutions
//! and into a checkerboard field automaton; the resulting one-step maps are
//! permutations of finite energy shells and can be analysed spectrally.

pub mod census;
pub mod contour;
pub mod dual;
pub mod evolver;
pub mod field;
pub mod hamiltonian;
pub mod margolus;
pub mod model;
pub mod spectral;

pub use contour::{
    classify_site, enumerate_shell, next_site, prev_site, trace_component, ContourError,
    ContourTrace, ShellDynamics, Site, SiteClass,
};
pub use dual::{DualRational, Rational};
pub use hamiltonian::{
    IntegerFunction1D, InterpolatedPoint, ModelError, PowerLawFamily, SeparableHamiltonian1D,
};
pub use evolver::{
    apply_pair, step, step_inverse, EvolveError, PairIndexOrder, PhaseState, RestrictedHamiltonianProvider,
    VectorHamiltonian,
};
pub use field::{FieldError, FieldHamiltonianSpec, FieldState, FieldSystem, LatticeShape, Parity};
pub use margolus::{margolus_step, margolus_unstep, MargolusRule, MargolusState};
pub use model::{BuiltModel, FunctionSpec, ModelSpec, ModelSpecError};
pub use spectral::{ShellPermutation, SpectralError, SpectrumEntry, TruncationConfig};
