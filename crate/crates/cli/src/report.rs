use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use compeval_core::CountSummary;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// Counts the report was computed from.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub records: usize,
    pub k: usize,
    pub n_ordinary: u64,
    pub s_ordinary: u64,
    pub n_complementary: u64,
    pub s_complementary: u64,
}

impl InputDigest {
    pub fn new(records: usize, s: &CountSummary) -> Self {
        Self {
            records,
            k: s.num_options(),
            n_ordinary: s.n_ordinary(),
            s_ordinary: s.s_ordinary(),
            n_complementary: s.n_complementary(),
            s_complementary: s.s_complementary(),
        }
    }
}

/// Top-level output of every reporting command. Carries no timestamps, so
/// the same command on the same input gives the same bytes.
#[derive(Debug, Serialize)]
pub struct ReportDocument<A: Serialize, B: Serialize> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: A,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    pub result: B,
}

impl<A: Serialize, B: Serialize> ReportDocument<A, B> {
    pub fn new(command: &'static str, args: A, result: B) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "compeval",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args,
            seed: None,
            input: None,
            result,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_input(mut self, input: InputDigest) -> Self {
        self.input = Some(input);
        self
    }
}

pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

pub fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(io::BufWriter::new(File::create(p)?))),
        None => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

pub fn write_json(path: Option<&Path>, doc: &impl Serialize) -> io::Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, doc)?;
    out.write_all(b"\n")?;
    out.flush()
}
