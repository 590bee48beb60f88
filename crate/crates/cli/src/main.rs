use clap::Parser;

fn main() -> std::process::ExitCode {
    twp::app::execute(&twp::app::Cli::parse()).into()
}
