use std::io::{self, Write};

use scribble_core::Diagnostic;
use serde::Serialize;

use crate::{BenchReport, CliError, RenderReport, ValidateReport};

/// One line of machine-readable output.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Progress {
        frames_done: usize,
        total: usize,
    },
    Render(RenderReport),
    Bench(BenchReport),
    Validate(ValidateReport),
    Listening {
        addr: String,
    },
    ClientDone {
        next_frame: u64,
        effects: usize,
    },
    Error {
        code: String,
        detail: String,
        diagnostics: Vec<Diagnostic>,
    },
}

impl Record {
    pub fn error(e: &CliError) -> Self {
        Record::Error {
            code: e.code().to_string(),
            detail: e.to_string(),
            diagnostics: e.diagnostics().to_vec(),
        }
    }

    pub fn write_line<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        let line = serde_json::to_string(self).map_err(io::Error::other)?;
        writeln!(out, "{line}")?;
        out.flush()
    }
}
