use thiserror::Error;

use crate::contour::{ContourError, FamilyContourError};
use crate::corpus::CorpusError;
use crate::export::ExportError;
use crate::g2p::G2pError;
use crate::ipa::IpaError;
use crate::kde::KdeError;
use crate::per::PerError;
use crate::projection::ProjectionError;
use crate::registry::RegistryError;
use crate::selection::SelectionError;
use crate::stats::StatsError;
use crate::typology::TypologyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Ipa(#[from] IpaError),
    #[error(transparent)]
    G2p(#[from] G2pError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Kde(#[from] KdeError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    FamilyContour(#[from] FamilyContourError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Typology(#[from] TypologyError),
    #[error(transparent)]
    Per(#[from] PerError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("config: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Output {
        context: String,
        source: std::io::Error,
    },
}

impl Error {
    /// 2 for bad input data, 3 for failures writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Output { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
