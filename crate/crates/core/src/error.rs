use thiserror::Error;

use crate::fe::FeError;
use crate::mesh::MeshError;
use crate::params::ParamError;
use crate::slab::SlabError;
use crate::sparse::LinAlgError;

#[derive(Debug, Error)]
pub enum DwrError {
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Slab(#[from] SlabError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("primal solve failed on slab {slab}: {source}")]
    PrimalSolve { slab: usize, source: LinAlgError },
    #[error("dual solve failed on slab {slab}: {source}")]
    DualSolve { slab: usize, source: LinAlgError },
    #[error("slab {slab} has no stored {what}")]
    MissingStorage { slab: usize, what: &'static str },
    #[error("the goal functional needs a known reference solution")]
    NoReferenceSolution,
    #[error("DWR loop {loop_index}: {source}")]
    Loop {
        loop_index: usize,
        source: Box<DwrError>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}
