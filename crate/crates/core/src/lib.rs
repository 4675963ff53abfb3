//! Cross-era Chinese word segmentation.
//!
//! A character BiGRU encoder feeds per-character states into one key-value
//! dictionary memory per era. A sentence-level era discriminator selects
//! (hard switching) or mixes (soft switching) the memory outputs, which are
//! fused with the character states and decoded by a linear-chain CRF over
//! BMES tags. Training minimises `alpha * crf_nll + (1 - alpha) * era_xent`.
//!
//! Everything runs on a small define-by-run autodiff engine over `f64`
//! matrices ([`autodiff`]), so gradients can be checked against finite
//! differences end to end.
//!
//! The runnable programs under `examples/` walk through each part:
//!
//! | example | shows |
//! |---|---|
//! | `bmes_and_preprocess` | tagging scheme, repair rule, token replacement |
//! | `lexicon_candidates` | dictionary building and candidate extraction |
//! | `crf_decoding` | partition function, marginals and Viterbi |
//! | `gradient_check` | finite-difference checks of the full model |
//! | `switch_modes` | hard and soft switching, sum and concat fusion |
//! | `train_synthetic` | end-to-end training on the synthetic two-era corpus |
//! | `evaluate_report` | scoring, checkpoints, segmentation and the report |
//! | `alpha_sweep` | the loss-weight grid search |
//!
//! ```
//! use crosswise::corpus::{words_to_bmes, bmes_to_words, Tag};
//!
//! let tags = words_to_bmes(&["等待", "谁", "来"]).unwrap();
//! assert_eq!(tags, [Tag::B, Tag::E, Tag::S, Tag::S]);
//! let chars: Vec<char> = "等待谁来".chars().collect();
//! assert_eq!(bmes_to_words(&chars, &tags).unwrap(), ["等待", "谁", "来"]);
//! ```

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod crf;
pub mod encoder;
pub mod error;
pub mod lexicon;
pub mod memory;
pub mod metrics;
pub mod model;
pub mod switcher;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use config::{Config, FusionMode, SwitchMode};
pub use error::{Error, Result};
pub use trainer::{train, Segmenter};
