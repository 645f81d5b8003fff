//! Command layer of the `qgraph` binary. Each subcommand is a [`Command`]
//! looked up by name in a [`CommandRegistry`]; commands return a JSON report
//! plus optional CSV artifacts and never print themselves.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::Path;

use serde_json::Value;

pub use config::RunConfig;

/// Bad files, flags or combinations; exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    CheckFailed = 1,
    InputError = 2,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::CheckFailed
        }
    }

    /// A numerical breakdown counts as a failed check; anything else is an input problem.
    pub fn for_error(err: &anyhow::Error) -> Self {
        match err.downcast_ref::<qgraph::Error>() {
            Some(qgraph::Error::LinearAlgebra(_)) => Status::CheckFailed,
            _ => Status::InputError,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: Value,
    /// `(file name, contents)` written next to the report with `--out`.
    pub artifacts: Vec<(String, String)>,
}

impl Outcome {
    pub fn new(pass: bool, report: impl serde::Serialize) -> anyhow::Result<Self> {
        Ok(Outcome {
            status: Status::from_pass(pass),
            report: serde_json::to_value(report)?,
            artifacts: Vec::new(),
        })
    }

    pub fn with_artifact(mut self, name: impl Into<String>, contents: String) -> Self {
        self.artifacts.push((name.into(), contents));
        self
    }

    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("reports serialize") + "\n"
    }

    /// Writes `<command>.json` and the artifacts into `dir`.
    pub fn write_to(&self, dir: &Path, command: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{command}.json")), self.report_json())?;
        for (name, contents) in &self.artifacts {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }
}

pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig) -> anyhow::Result<Outcome>;
}

pub struct CommandRegistry {
    commands: Vec<Box<dyn Command>>,
}

impl Default for CommandRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl CommandRegistry {
    pub fn empty() -> Self {
        CommandRegistry {
            commands: Vec::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(commands::Validate));
        r.register(Box::new(commands::SpectrumCmd));
        r.register(Box::new(commands::Expansion));
        r.register(Box::new(commands::PotentialCmd));
        r
    }

    /// Replaces any command of the same name.
    pub fn register(&mut self, cmd: Box<dyn Command>) {
        self.commands.retain(|c| c.name() != cmd.name());
        self.commands.push(cmd);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.commands.iter().map(|c| c.name()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&dyn Command> {
        self.commands
            .iter()
            .find(|c| c.name() == name)
            .map(|c| c.as_ref())
    }

    /// Runs a command; errors become an outcome with an `error` report.
    pub fn run(&self, name: &str, cfg: &RunConfig) -> Outcome {
        let result = match self.get(name) {
            None => Err(InputError(format!("unknown command `{name}`")).into()),
            Some(cmd) => cfg
                .check()
                .map_err(anyhow::Error::from)
                .and_then(|_| cmd.run(cfg)),
        };
        result.unwrap_or_else(|err| Outcome {
            status: Status::for_error(&err),
            report: serde_json::json!({
                "command": name,
                "error": format!("{err:#}"),
            }),
            artifacts: Vec::new(),
        })
    }
}
