//! Library side of the `aoi` binary, so the whole command line can be driven
//! in-process from tests.

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub mod args;
mod commands;
mod report;
mod validate;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Rejected user input, reported with [`EXIT_INVALID`].
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub(crate) fn invalid(msg: String) -> anyhow::Error {
    Invalid(msg).into()
}

pub(crate) struct Streams<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

fn dispatch(cli: &Cli, s: &mut Streams) -> anyhow::Result<()> {
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a, s),
        Command::Simulate(a) => commands::cmd_simulate(a, s),
        Command::Optimal(a) => commands::cmd_optimal(a, s),
        Command::Sweep(a) => commands::cmd_sweep(a, s),
        Command::Validate(a) => validate::cmd_validate(a, s),
    }
}

/// Parse `args` (program name first) and run the command. Returns the exit
/// code: 0 on success, 1 on a failed computation or check, 2 on bad input.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut s = Streams { out, err };
    match dispatch(&cli, &mut s) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(s.err, "error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                EXIT_INVALID
            } else {
                EXIT_FAILURE
            }
        }
    }
}
