// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input text. `line` is 1-based; `column` is 1-based when known.
    #[error("parse error at line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    /// Nodes with zero degree have no defined transition probabilities.
    #[error("graph has {} zero-degree node(s): {}", .0.len(), preview(.0))]
    IsolatedNodes(Vec<usize>),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn preview(nodes: &[usize]) -> String {
    const SHOWN: usize = 10;
    let head: Vec<String> = nodes.iter().take(SHOWN).map(|n| n.to_string()).collect();
    if nodes.len() > SHOWN {
        format!("{}, ...", head.join(", "))
    } else {
        head.join(", ")
    }
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for I/O, 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Parse { .. } | Error::Validation(_) | Error::IsolatedNodes(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
