//! The end-device role: clip acquisition and the three pipelines.

pub mod clock;
mod pipeline;
mod recorder;
mod synth;

pub use clock::{now_us, ComputeScale};
pub use pipeline::{
    Configuration, Device, DeviceError, DeviceOptions, DeviceRunReport, LinkEmulator, LocalModel, Phase, RunFailure,
    DEFAULT_REPLY_TIMEOUT,
};
pub use recorder::{acquire_clip, ClipSource, Recording, CHUNK_SAMPLES, RECORDER_SAMPLE_RATE};
pub use synth::{synth_clip, CAR_HORN_HZ, SYNTH_PEAK};
