//! TDS-OFDM link simulation and sparse channel estimation.
//!
//! The transmitted frame replaces the cyclic prefix with a known
//! pseudo-noise training sequence. The receiver exploits two things about
//! the terrestrial broadcast channel: the impulse response is sparse, and
//! its support drifts slowly across frames compared to the tap gains. A
//! coarse correlation stage turns that persistence into partial prior
//! knowledge (probable delays, rough gains, path-count and delay-spread
//! bounds), and a priori-aided hard-thresholding loop refines it from the
//! short inter-block-interference-free region of each guard interval.
//!
//! Modules:
//! - [`numerics`]: FFT plans, Toeplitz operators, least squares, op counting
//! - [`signal`]: PN sequences, QPSK mapping, frame assembly
//! - [`channel`]: multipath profiles, fading, noise, receive windows
//! - [`estimator`]: coarse acquisition, the aided loop, baselines
//! - [`harness`]: reproducible Monte-Carlo experiments and CSV output

pub mod channel;
pub mod estimator;
pub mod harness;
pub mod numerics;
pub mod signal;
