use std::process::ExitCode;

fn main() -> ExitCode {
    sirnet_cli::exit_code(sirnet_cli::cli_main(std::env::args_os()))
}
