//! Fiber simulation: Rayleigh scatterer field, connector reflections,
//! time-dependent temperature and vibration phase perturbations, and the two
//! synthesis paths (direct fingerprints and received waveforms).

mod layout;
mod scenario;
mod synth;

pub use layout::{
    build_fiber, BackscatterParams, CellGrid, Connector, FiberLayout, FiberModel, Section, SectionKind,
    SPEED_OF_LIGHT,
};
pub use scenario::{round_trip_phase, Event, EventKind, EventScenario, MeasurementSchedule, DEFAULT_K_T};
pub use synth::{
    perturbed_reflectivity, received_len, synthesize_fingerprint, synthesize_received_waveform, FrameId,
    NoiseSpec,
};
