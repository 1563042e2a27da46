//! Datasets: attribute matrices, labeled feature sets, preprocessing and the
//! synthetic benchmark generator.

mod attributes;
mod features;
mod preprocess;
mod synth;

pub use attributes::{load_attributes, AttributeMatrix, ClassRole};
pub use features::{load_features, save_features, FeatureSet, FEATURE_MAGIC, FEATURE_VERSION};
pub use preprocess::{l2_normalize, standardize, Standardizer, MIN_STD};
pub use synth::{synth_generate, SynthBenchmark, SynthSpec};
