use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::autodiff::DensityError;
use crate::compiler::CompileError;
use crate::data::DataError;
use crate::frontend::FrontendError;
use crate::graph::GraphError;
use crate::sampler::SampleError;

/// Any failure of the modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("simulation failed: {0}")]
    Simulation(String),
}
