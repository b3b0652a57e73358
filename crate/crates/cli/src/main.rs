use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynflow::capability::{parse_capability, parse_script, replay};
use dynflow::format::{parse_system_file, print_system_file};
use dynflow::report::{run_capability_checks, run_checks, run_corpus, CheckOptions, Property, Report};

/// Bounded checking of dynamic intransitive noninterference.
#[derive(Parser)]
#[command(name = "dynflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check properties of a `.nif` system or a `.cap` configuration.
    Check {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Select a named policy variant of a `.nif` file.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Parse a `.nif` file and print it in normal form.
    Print { file: PathBuf },
    /// Replay a `.trace` script against a `.cap` configuration.
    Replay {
        config: PathBuf,
        script: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check the bundled systems, or export them to a directory.
    Corpus {
        #[command(flatten)]
        run: RunArgs,
        /// Write the bundled files to DIR instead of checking them.
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated properties: ta, mayta, mustta, unwinding, locality,
    /// locality-sender, locality-receiver, static, gk, lpurge, isec, drm,
    /// theorem-mustunwind, state-box, state-diamond.
    #[arg(long, value_name = "LIST")]
    property: Option<String>,
    /// Trace-length bound (exploration depth for `.cap` files).
    #[arg(long, value_name = "K")]
    depth: Option<usize>,
    /// Boundary margin of the theorem-mustunwind cross-check.
    #[arg(long, value_name = "M", default_value_t = 1)]
    margin: usize,
    /// Policy domain for the gk property.
    #[arg(long, value_name = "DOMAIN")]
    policy_domain: Option<String>,
    /// Keep edges leaving domains that own no action.
    #[arg(long)]
    no_normalize: bool,
    /// Omit wall-clock timings.
    #[arg(long)]
    no_timing: bool,
    /// Print a JSON report instead of the summary.
    #[arg(long)]
    json: bool,
}

const CAP_DEFAULT_DEPTH: usize = 3;
const CAP_DEFAULT_PROPERTIES: [Property; 3] = [Property::Drm, Property::Locality, Property::Unwinding];

impl RunArgs {
    fn options(&self, default_depth: usize) -> CheckOptions {
        CheckOptions {
            depth: self.depth.unwrap_or(default_depth),
            margin: self.margin,
            policy_domain: self.policy_domain.clone(),
            normalize: !self.no_normalize,
            timing: !self.no_timing,
        }
    }

    fn properties(&self, default: &[Property]) -> Result<Vec<Property>, String> {
        match &self.property {
            None => Ok(default.to_vec()),
            Some(list) => Property::parse_list(list).map_err(|e| e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn emit(reports: &[Report], json: bool) -> u8 {
    if json {
        let value = if reports.len() == 1 {
            serde_json::to_string_pretty(&reports[0])
        } else {
            serde_json::to_string_pretty(reports)
        };
        println!("{}", value.expect("reports serialize"));
    } else {
        for r in reports {
            print!("{}", r.summary());
        }
    }
    reports.iter().map(|r| r.exit_code() as u8).max().unwrap_or(0)
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Check { file, run, variant } => {
            let text = read(&file)?;
            let is_cap = file.extension().is_some_and(|e| e == "cap");
            let report = if is_cap {
                if variant.is_some() {
                    return Err("--variant applies to .nif files only".into());
                }
                let props = run.properties(&CAP_DEFAULT_PROPERTIES)?;
                run_capability_checks(&text, &label(&file), &props, &run.options(CAP_DEFAULT_DEPTH))
            } else {
                let props = run.properties(&Property::DEFAULT)?;
                run_checks(&text, &label(&file), variant.as_deref(), &props, &run.options(6))
            }
            .map_err(|e| format!("{}: {e}", file.display()))?;
            Ok(emit(&[report], run.json))
        }
        Command::Print { file } => {
            let text = read(&file)?;
            let parsed = parse_system_file(&text).map_err(|e| format!("{}: {e}", file.display()))?;
            print!("{}", print_system_file(&parsed));
            Ok(0)
        }
        Command::Replay { config, script, json } => {
            let c = parse_capability(&read(&config)?).map_err(|e| format!("{}: {e}", config.display()))?;
            let items = parse_script(&c, &read(&script)?).map_err(|e| format!("{}: {e}", script.display()))?;
            let r = replay(&c, &items);
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("replay serializes"));
            } else {
                println!("initial {}", r.initial);
                for s in &r.steps {
                    let mark = if s.changed { " " } else { "!" };
                    println!("{:>4}{mark} {:<28} {}", s.line, s.action, s.state);
                }
                for f in &r.failures {
                    println!("FAILED {f}");
                }
                println!(
                    "{} steps, {} of {} expectations met",
                    r.steps.len(),
                    r.expectations - r.failures.len(),
                    r.expectations
                );
            }
            Ok(if r.passed() { 0 } else { 1 })
        }
        Command::Corpus { run, export } => {
            if let Some(dir) = export {
                fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                let files = dynflow::corpus::ALL.into_iter().chain([
                    ("two_process.cap", dynflow::corpus::CAPABILITY),
                    ("grant.trace", dynflow::corpus::CAPABILITY_SCRIPT),
                ]);
                for (name, text) in files {
                    let path = dir.join(name);
                    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
                    println!("{}", path.display());
                }
                return Ok(0);
            }
            let props = run.properties(&Property::DEFAULT)?;
            let reports = run_corpus(&props, &run.options(6)).map_err(|e| e.to_string())?;
            Ok(emit(&reports, run.json))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
