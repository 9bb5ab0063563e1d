//! Gait recordings: event detection, stride segmentation, outlier rejection,
//! stride matching and the transparency criterion.

pub mod events;
pub mod matching;
pub mod outliers;
pub mod pipeline;
pub mod recording;
pub mod strides;
pub mod transparency;

pub use events::{detect_events, pair_events, EventKind, GaitEvent, StridePair};
pub use matching::{match_unperturbed, swing_filter, AlignedSwing};
pub use outliers::{outlier_filter, outlier_flags, Partition};
pub use pipeline::{onset_datasets, preprocess, transparency, OnsetDataset, PreprocessOptions, Preprocessed};
pub use recording::{read_recording, GaitRecording, PerturbationEvent};
pub use strides::{segment_strides, Ensemble, Stride};
pub use transparency::{isv_ave, transparency_metrics, JointTransparency, TransparencyReport};
