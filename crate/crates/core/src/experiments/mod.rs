//! Named configurations, drive protocols, the exact-dynamics oracle and
//! figure datasets.

pub mod configs;
pub mod figures;
pub mod oracle;
pub mod protocol;

pub use configs::{NamedConfiguration, DEFAULT_G, DEFAULT_N_SITES};
pub use figures::{figure_data, reproduce_figure, scattering_initial_state, stability_curves, FigureName, FigureOptions};
pub use oracle::{calibrate, oracle_exact_dynamics, CalibrationReport, ExactDynamics};
pub use protocol::{
    bell_protocol, find_optimal_duration, released_fidelity, run_protocol, w_protocol, OptimalDuration,
    ProtocolOptions, ProtocolResult, ReleaseTime, DEFAULT_T_END,
};
