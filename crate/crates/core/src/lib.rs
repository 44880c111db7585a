//! Character n-gram text classification.
//!
//! The pipeline lowercases each text, marks its boundaries, extracts every
//! character n-gram from length 1 up to a configurable maximum, weights the
//! counts with sublinear TF-IDF or BM25, normalizes each instance (L2 or
//! per-instance MinMax) and feeds the result to a class-weighted,
//! L2-regularized logistic regression. Nothing else is used: no word
//! tokenizer, no lexicon, no language-specific resource.
//!
//! ```
//! use charclf::{corpus, config, pipeline};
//!
//! let d = corpus::parse_dataset(
//!     "id\ttext\ttask1\n\
//!      1\tyou idiot\tHOF\n2\tidiot fool\tHOF\n3\tlovely day\tNOT\n4\tlovely cat\tNOT\n",
//! ).unwrap();
//! let mut cfg = config::PipelineConfig::default();
//! cfg.ngram.max_len = 4;
//! let model = pipeline::fit(&d, &cfg).unwrap();
//! assert_eq!(model.predict("what an idiot"), "HOF");
//! ```
//!
//! The guide in `book/` walks through each stage; its code blocks are
//! compiled and run as doc-tests of this crate.

pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod leaderboard;
pub mod linear_model;
pub mod model_selection;
pub mod pipeline;
pub mod synth;
pub mod weighting;

pub use config::PipelineConfig;
pub use corpus::Dataset;
pub use error::{Error, Result};
pub use pipeline::LinearModel;

// `cargo test --doc` runs every Rust block of the guide through these.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/features.md")]
    pub mod features {}
    #[doc = include_str!("../../../book/src/weighting.md")]
    pub mod weighting {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    pub mod classifier {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/leaderboard.md")]
    pub mod leaderboard {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
