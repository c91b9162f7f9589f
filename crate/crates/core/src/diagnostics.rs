//! Non-fatal conditions raised while parsing or combining inputs.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    /// A qrels line repeated an existing judgment with the same grade.
    DuplicateJudgment {
        line: usize,
        topic: String,
        doc: String,
    },
    /// A topic ranking exceeded the evaluation depth and was cut.
    TruncatedRanking {
        topic: String,
        retrieved: usize,
        depth: usize,
    },
    /// Intersecting topic sets left nothing to evaluate.
    EmptyCoreTopics,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DuplicateJudgment { line, topic, doc } => {
                write!(
                    f,
                    "line {line}: duplicate judgment for ({topic}, {doc}) ignored"
                )
            }
            Warning::TruncatedRanking {
                topic,
                retrieved,
                depth,
            } => write!(
                f,
                "topic {topic}: {retrieved} documents retrieved, truncated to {depth}"
            ),
            Warning::EmptyCoreTopics => write!(f, "core topic intersection is empty"),
        }
    }
}

/// Collects warnings and forwards each one to the `log` facade.
#[derive(Debug, Default, Clone)]
pub struct Diagnostics {
    warnings: Vec<Warning>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn warn(&mut self, warning: Warning) {
        log::warn!("{warning}");
        self.warnings.push(warning);
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    pub fn is_empty(&self) -> bool {
        self.warnings.is_empty()
    }
}
