use std::sync::OnceLock;

use pcgeo_core::{synth, train_model, CodecConfig, GicModel};

/// Small model trained on 7-bit synthetic scenes.
pub fn small_config() -> CodecConfig {
    CodecConfig { codebook_sizes: vec![32, 8, 4, 1], ..CodecConfig::default() }
}

pub fn model() -> &'static GicModel {
    static MODEL: OnceLock<GicModel> = OnceLock::new();
    MODEL.get_or_init(|| train_model(&synth::training_corpus(11, 8, 7), &small_config()).expect("training"))
}
