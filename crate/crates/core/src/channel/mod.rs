//! Multipath channel models: delay/power profiles, per-symbol fading
//! processes, and the transmit/receive path that produces the windows the
//! estimators consume.

pub mod fading;
pub mod profile;
pub mod transmit;

pub use fading::{realize_jakes, realize_static, ChannelRealization, JAKES_OSCILLATORS};
pub use profile::{
    builtin_profiles, coherence_params, find_profile, quantize_profile, ChannelProfile,
    CoherenceParams, Doppler, TapSet, SPEED_OF_LIGHT,
};
pub use transmit::{transmit, RxStream};

#[derive(Debug, thiserror::Error)]
pub enum ChannelError {
    #[error("profile has no paths")]
    EmptyProfile,
    #[error("bad profile: {0}")]
    BadProfile(String),
    #[error("bad doppler spec: {0}")]
    BadDoppler(String),
    #[error("unknown profile '{0}'")]
    UnknownProfile(String),
    #[error("guard violated: delay spread {l} exceeds guard length {m}")]
    GuardViolated { l: usize, m: usize },
    #[error("bad receive window: {0}")]
    BadWindow(String),
}
