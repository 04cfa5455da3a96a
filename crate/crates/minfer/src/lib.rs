//! Membership inference attacks against simple trained models, with the
//! calibration, evaluation, and privacy-bound machinery around them.

pub mod attacks;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod models;
pub mod numeric;
pub mod rng;
pub mod shadow;

pub use attacks::{AttackKind, ScoreRecord, TauEstimate};
pub use data::{Dataset, Sample, SplitMode, SplitSpec};
pub use error::{Error, Result};
pub use models::{LossReport, ModelKind, ModelParams};
pub use rng::RngSeed;

// Compile the guide's code blocks as doctests, so the book cannot
// drift from the library it documents.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            mod $name {}
        };
    }

    chapter!(introduction, "introduction.md");
    chapter!(posterior, "posterior.md");
    chapter!(gaussian, "gaussian.md");
    chapter!(attacks, "attacks.md");
    chapter!(shadows, "shadows.md");
    chapter!(evaluation, "evaluation.md");
    chapter!(privacy, "privacy.md");
    chapter!(cli, "cli.md");
}
