//! Driven, dissipative dynamics of multi-level bistable quantum systems.
//!
//! The crate solves the symmetric quartic double well, rotates its lowest N
//! levels into the discrete variable representation (the basis diagonalizing
//! the position operator), couples every transition to an Ohmic bath through
//! the complex correlation function Q(t), and then offers three routes to
//! the relaxation dynamics:
//!
//! * the non-Markovian generalized master equation for the diagonal
//!   populations, with memory kernels and a nondiagonal-preparation
//!   inhomogeneity ([`gme::propagate_gme`]);
//! * its time-local Markovian approximation ([`gme::markov_reference`]) and
//!   the period-averaged, Bessel-dressed rate matrix with its decay
//!   eigenvalue ([`rates::averaged_rates`], [`rates::decay_rate`]);
//! * the high-temperature cluster-path series beyond the sequential order
//!   ([`rates::higher_order_rates`]).
//!
//! Internal units: hbar = M = omega_0 = 1, so the harmonic length x0 = 1,
//! temperatures are in T0 = hbar*omega_0/k_B and drive amplitudes in
//! s0 = hbar*omega_0/x0.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release -p dwell --example spectrum_and_dvr
//! cargo run --release -p dwell --example bath_correlation
//! cargo run --release -p dwell --example population_decay
//! cargo run --release -p dwell --example rate_vs_amplitude
//! cargo run --release -p dwell --example rate_vs_levels
//! cargo run --release -p dwell --example higher_order_series
//! ```
//!
//! * **`spectrum_and_dvr`** - double-well eigenvalues, tunneling splittings,
//!   position matrix, and the DVR transition elements
//! * **`bath_correlation`** - Q(t) by quadrature and closed form, the
//!   high-temperature asymptote, and a CSV dump of the table
//! * **`population_decay`** - left-well population from the full memory
//!   equation against the Markovian reference, with the fitted decay rate
//! * **`rate_vs_amplitude`** - averaged transfer rate vs drive amplitude at
//!   several temperatures (the nonmonotonic resonance structure)
//! * **`rate_vs_levels`** - static and driven rates vs the number of levels
//!   kept in the truncation
//! * **`higher_order_series`** - cluster-path series at high temperature,
//!   order by order
//!
//! A thin CLI wraps the same machinery for batch runs:
//!
//! ```bash
//! cargo run --release -p dwell --bin simulate -- run.cfg --mode avg-rates --out data/
//! ```

pub mod bath;
pub mod cli;
pub mod dvr;
pub mod gme;
pub mod kernels;
pub mod numeric;
pub mod rates;
pub mod spectrum;

pub use bath::{BathModel, QSource, QTable};
pub use dvr::{DvrBasis, InitialState};
pub use gme::{PropagationSpec, Trajectory};
pub use kernels::{DriveSpec, KernelSet};
pub use rates::RateMatrix;
pub use spectrum::{GridSpec, PotentialSpec, Spectrum};
