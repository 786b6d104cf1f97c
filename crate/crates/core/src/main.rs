use clap::error::ErrorKind;
use clap::Parser;

use relwalk::cli::{error_json, exit_code, run, Cli, EXIT_CONFIG};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = serde_json::json!({ "status": "error", "kind": "usage", "message": e.to_string() });
            eprintln!("{msg}");
            std::process::exit(EXIT_CONFIG);
        }
    };
    let result = run(&cli);
    match &result {
        Ok(o) => eprintln!("wrote {} files to {}", o.manifest.files.len() + 1, o.out_dir.display()),
        Err(e) => eprintln!("{}", error_json(e)),
    }
    std::process::exit(exit_code(&result));
}
