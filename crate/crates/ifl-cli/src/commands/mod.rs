use std::path::PathBuf;

use crate::emit::Output;

pub mod cont;
pub mod crossing;
pub mod lowtemp;
pub mod obs;
pub mod sle;

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub tol: f64,
}

/// One artifact of a run.
pub struct Outcome {
    pub name: String,
    pub output: Output,
    /// False when a checked tolerance was violated.
    pub ok: bool,
    pub inputs: Vec<PathBuf>,
}

impl Outcome {
    pub fn new(name: &str, output: Output) -> Self {
        Outcome {
            name: name.to_string(),
            output,
            ok: true,
            inputs: Vec::new(),
        }
    }

    pub fn with_input(mut self, path: PathBuf) -> Self {
        self.inputs.push(path);
        self
    }
}
