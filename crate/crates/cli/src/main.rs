use clap::{Parser, Subcommand};
use gerbelab_cli::{run_scenario, Overrides, RunError, Scenario};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gerbelab", version, about = "Run gerbe and semi-flat mirror scenarios from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write `<stem>.report.json` plus any CSV tables.
    Run {
        config: PathBuf,
        /// Output directory. Defaults to $GERBELAB_OUT, then ./out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the numerical tolerance of kinds that take one.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("GERBELAB_OUT").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn write_outputs(dir: &Path, stem: &str, report: &gerbelab_cli::Report) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join(format!("{stem}.report.json"));
    std::fs::write(&path, serde_json::to_string_pretty(report).expect("serializable") + "\n")?;
    written.push(path);
    for t in &report.tables {
        let path = dir.join(format!("{stem}.{}.csv", t.name));
        std::fs::write(&path, t.to_csv())?;
        written.push(path);
    }
    Ok(written)
}

fn run(config: &Path, out: Option<PathBuf>, overrides: Overrides) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", config.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let report = run_scenario(&scenario, overrides)?;
    for c in &report.checks {
        println!("{} {} = {:.6e}", if c.pass { "pass" } else { "FAIL" }, c.name, c.value);
    }
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let dir = output_dir(out);
    match write_outputs(&dir, stem, &report) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", dir.display());
            std::process::exit(4);
        }
    }
    println!("{} in {:.2}s", if report.passed { "passed" } else { "failed" }, report.timing.seconds);
    Ok(report.passed)
}

fn main() -> ExitCode {
    let Cli { command: Command::Run { config, out, seed, tol } } = Cli::parse();
    match run(&config, out, Overrides { seed, tol }) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
