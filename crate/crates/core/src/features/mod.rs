//! Everything that produces features for the analytic classifier.

mod dataset;
mod extractor;
mod manifest;
mod synth;

pub use dataset::{load_features, save_features, LabeledDataset};
pub use extractor::{pretrain_extractor, ExtractorModel, Gradients, PretrainConfig, Pretrained};
pub use manifest::{load_manifest, write_manifest, Manifest, ManifestTask, MfccInfo};
pub use synth::{gen_synth, SynthSpec};
