//! Single-photon forward model: conditions, scenes, photon events and the
//! synthetic imaging variants generator.

mod condition;
mod events;
mod rate;
mod scene;
mod simulate;

pub use condition::{depth_to_bin, SimulationCondition, SPEED_OF_LIGHT};
pub use events::{Histogram, PhotonEvent, PhotonEvents};
pub use rate::{
    neg_log_likelihood, poisson_nll_term, sbr_background_per_bin, GaussianIrf, RateModel,
};
pub use scene::SceneTruth;
pub use simulate::{
    generate_variants, sample_background, sample_signal_count, sample_signal_times, simulate,
    variant_seed,
};
