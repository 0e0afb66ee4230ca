use std::process::exit;

fn main() {
    exit(stiffbuck_cli::entry());
}
