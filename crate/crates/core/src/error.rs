use thiserror::Error;

use crate::alignment::AlignError;
use crate::assets::AssetError;
use crate::encoder::EncoderError;
use crate::eval::EvalError;
use crate::tokenizer::TokenizerError;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
