use std::process::exit;

fn main() {
    exit(cvhi::run_cli(std::env::args_os()));
}
