//! Delayed discrete-time Cournot map for a mixed oligopoly: one public,
//! welfare-maximizing firm with bounded-rational gradient adjustment and
//! `n` private firms with naive best responses, each reacting to delayed
//! observations of its rivals.
//!
//! ```
//! use mixed_cournot::{positive_equilibrium, MarketParams};
//!
//! let p = MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.4, 1.0, 4).unwrap();
//! let e = positive_equilibrium(&p).unwrap();
//! assert!((e.point[0] - 0.9375).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod params;
pub mod spectral;

pub use bifurcation::{
    critical_alpha, flip_boundary, ns_boundary, stability_loss, stability_region, BifurcationKind, BifurcationPoint,
    ParityCase, RegionRow,
};
pub use dynamics::{
    bifurcation_diagram, classify_attractor, largest_lyapunov, phase_portrait, AttractorSummary, AttractorType,
    DiagramRow, InitialPolicy, LyapunovEstimate, SweepSpec,
};
pub use equilibria::{
    boundary_equilibrium, check_assumptions, positive_equilibrium, reduced_fixed_point, Assumption, AssumptionReport,
    Equilibrium,
};
pub use error::{Error, Result};
pub use model::{simulate, step, HistoryState, OutputVector, Trajectory};
pub use params::{DelayConfig, MarketParams, Primitives};
pub use spectral::{
    delay_free_stable, epsilon_triple, full_char_poly, poly_roots, reduced_char_poly, CharPoly, Classification,
    EpsilonTriple, EquilibriumChoice, SpectrumReport,
};
