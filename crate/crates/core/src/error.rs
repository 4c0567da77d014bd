use std::fmt;

use thiserror::Error;

/// Metric-space axiom named in validation failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Cardinality,
    Labels,
    Diagonal,
    Symmetry,
    Positivity,
    Finiteness,
    RemotePoint,
    Triangle,
    Ultrametric,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axiom::Cardinality => "cardinality",
            Axiom::Labels => "labels",
            Axiom::Diagonal => "diagonal",
            Axiom::Symmetry => "symmetry",
            Axiom::Positivity => "positivity",
            Axiom::Finiteness => "finiteness",
            Axiom::RemotePoint => "remote-point",
            Axiom::Triangle => "triangle",
            Axiom::Ultrametric => "ultrametric",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown point {0}")]
    UnknownPoint(String),

    #[error("{axiom} axiom violated: {detail}")]
    Axiom { axiom: Axiom, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn axiom(axiom: Axiom, detail: impl Into<String>) -> Self {
        Error::Axiom {
            axiom,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// The violated axiom, when this is a validation failure.
    pub fn violated_axiom(&self) -> Option<Axiom> {
        match self {
            Error::Axiom { axiom, .. } => Some(*axiom),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
