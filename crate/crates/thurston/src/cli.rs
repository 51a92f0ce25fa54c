//! Command-line interface (placeholder; filled in with subcommands).

pub fn run(_args: Vec<String>) -> i32 {
    eprintln!("no subcommands wired up yet");
    2
}
