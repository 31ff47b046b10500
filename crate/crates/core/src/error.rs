use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh file, line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("quadrature degree {0} is outside the supported range 0..=20")]
    UnsupportedDegree(usize),

    #[error("field is not admissible: {0}")]
    NotAdmissible(String),

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("singular local system on element {element}")]
    SingularLocalSystem { element: usize },

    #[error("linear solver failed: {reason} (relative residual {residual:.3e})")]
    SolverBreakdown { reason: String, residual: f64 },

    #[error("equilibration violated: worst residual {worst:.3e} at deflection dof {dof} (tolerance {tolerance:.3e})")]
    EquilibrationResidual { worst: f64, dof: usize, tolerance: f64 },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
