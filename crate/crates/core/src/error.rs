use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("record on line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("record on line {line} ({id}): {}", .violations.join("; "))]
    InvalidRecord {
        line: usize,
        id: String,
        violations: Vec<String>,
    },
    #[error("invalid {what}: {}", .violations.join("; "))]
    Invalid {
        what: &'static str,
        violations: Vec<String>,
    },
    #[error("intent value {0} is not one of 1 (straight), 2 (left), 3 (right)")]
    BadIntent(i64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
