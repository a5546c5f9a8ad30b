//! Content-based boundary detection: Mel-spectrogram features, the
//! convolutional classifier with target smearing, sliding-window likelihood
//! curves, and last-layer fine-tuning. A feature-proxy path accepts
//! synthetic spectrogram matrices directly so the model path can be
//! exercised without licensed recordings.

pub mod boundary;
pub mod cache;
pub mod mel;
pub mod wav;

pub use boundary::{
    build_audio_arch, extract_patch, finetune_last_layer, make_training_set,
    predict_audio_likelihood, smear_targets, train_audio_model, validate_audio_arch,
    AudioArchConfig, AudioSampleOptions, AudioWindowSample, LabelSource, SmearConfig,
    SmearedTarget,
};
pub use cache::{read_spectrogram, write_spectrogram};
pub use mel::{mel_center_frequencies, mel_filterbank, mel_spectrogram, MelConfig, MelSpectrogram};
pub use wav::{parse_wav, read_wav_mono16, write_wav_mono16, WavAudio};
