mod accept;
mod data;
mod models;
mod registry;

use crate::cli::Command;
use crate::config::RunConfig;
use crate::error::{CliResult, Outcome};
use crate::output::Output;

pub fn dispatch(cmd: &Command, cfg: &mut RunConfig, out: Option<&Output>) -> CliResult<Outcome> {
    if let Command::Accept(a) = cmd {
        return accept::accept(a, cfg, out);
    }
    let out = out.expect("every command but accept has an output directory");
    match cmd {
        Command::Simulate(a) => data::simulate(a, cfg, out),
        Command::Eps(a) => data::eps(a, cfg, out),
        Command::Figure3(a) => data::figure3(a, cfg, out),
        Command::Train(a) => models::train(a, cfg, out),
        Command::Evaluate(a) => models::evaluate(a, cfg, out),
        Command::Enroll(a) => registry::enroll(a, cfg, out),
        Command::Verify(a) => registry::verify(a, cfg, out),
        Command::Auth(a) => registry::auth(a, cfg, out),
        Command::Accept(_) => unreachable!(),
    }
}
