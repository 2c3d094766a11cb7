use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use exposure_core::InteractionScript;
use exposure_fuzz::campaign::{self, CampaignError, CampaignOptions, ValidationOutcome};
use exposure_fuzz::record::{record_session, RecordOptions};
use exposure_fuzz::report::{emit_report, load_report, ReportFormat};
use exposure_fuzz::session::{import_har, RecordedSession};
use exposure_fuzz::webdriver::WebDriver;
use exposure_fuzz::DriveOptions;

const EXIT_ABORTED: u8 = 2;
const EXIT_FAIL_V: u8 = 3;

#[derive(Parser)]
#[command(name = "exposure-fuzz", version, about = "Flags API response fields a web page never uses")]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record a session by driving the script through a capture proxy.
    Record {
        /// Interaction script.
        #[arg(long)]
        config: PathBuf,
        /// Where to write the session archive.
        #[arg(long)]
        out: PathBuf,
        /// Capture proxy port; 0 picks a free one.
        #[arg(long, default_value_t = 0)]
        proxy_port: u16,
        #[arg(long, env = "EXPOSURE_WEBDRIVER_URL")]
        driver: String,
        /// Send all upstream traffic to this address instead of resolving hosts.
        #[arg(long)]
        upstream: Option<SocketAddr>,
        /// Free text stored in the archive.
        #[arg(long, default_value = "")]
        notes: String,
    },
    /// Convert a HAR 1.2 capture into a session archive.
    ImportHar {
        /// HAR file exported from a browser.
        #[arg(long)]
        har: PathBuf,
        /// Substring of the target API's URL path.
        #[arg(long)]
        target: String,
        /// Where to write the session archive.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that the session replays deterministically and build the ignore mask.
    Preflight {
        #[command(flatten)]
        common: Common,
    },
    /// Run a full campaign.
    Fuzz {
        #[command(flatten)]
        common: Common,
        /// Parallel workers, each with its own replay server.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a CSV of per-field verdicts here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Skip the simultaneous-removal check.
        #[arg(long)]
        no_validate: bool,
    },
    /// Re-run the simultaneous-removal check for a saved report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// JSON report from an earlier `fuzz` run.
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Interaction script.
    #[arg(long)]
    config: PathBuf,
    /// Session archive from `record` or `import-har`.
    #[arg(long)]
    session: PathBuf,
    /// WebDriver endpoint(s); several may be given comma-separated.
    #[arg(long, env = "EXPOSURE_WEBDRIVER_URL", value_delimiter = ',', required = true)]
    driver: Vec<String>,
    /// Unmutated replays used to build the ignore mask.
    #[arg(long, default_value_t = campaign::DEFAULT_REPLAYS)]
    replays: usize,
    /// WAIT_LOCATE ceiling in ms; overrides the script's TIMEOUT.
    #[arg(long)]
    timeout: Option<u64>,
    /// Also match request bodies when replaying.
    #[arg(long)]
    strict_bodies: bool,
    /// Serialize the page even when an awaited element never appears.
    #[arg(long)]
    capture_on_timeout: bool,
    /// Extra WebDriver capabilities as a JSON object.
    #[arg(long)]
    capabilities: Option<String>,
}

impl Common {
    fn load(&self) -> Result<(InteractionScript, Arc<RecordedSession>, CampaignOptions)> {
        let script = load_script(&self.config)?;
        let session = RecordedSession::load(&self.session)
            .with_context(|| format!("loading session {}", self.session.display()))?;
        let mut options = CampaignOptions::new("");
        options.drivers = self.driver.clone();
        options.replays = self.replays;
        options.strict_bodies = self.strict_bodies;
        options.drive = drive_options(self.timeout, self.capture_on_timeout, self.capabilities.as_deref())?;
        Ok((script, Arc::new(session), options))
    }
}

fn drive_options(timeout: Option<u64>, capture_on_timeout: bool, caps: Option<&str>) -> Result<DriveOptions> {
    let capabilities = caps
        .map(serde_json::from_str::<serde_json::Value>)
        .transpose()
        .context("--capabilities is not JSON")?;
    if capabilities.as_ref().is_some_and(|c| !c.is_object()) {
        bail!("--capabilities must be a JSON object");
    }
    Ok(DriveOptions {
        timeout_ms: timeout,
        capture_on_timeout,
        capabilities,
    })
}

fn load_script(path: &Path) -> Result<InteractionScript> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    InteractionScript::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

enum Outcome {
    Ok,
    FailV,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Record {
            config,
            out,
            proxy_port,
            driver,
            upstream,
            notes,
        } => {
            let script = load_script(&config)?;
            let options = RecordOptions {
                upstream,
                drive: DriveOptions::default(),
                notes,
            };
            let session = record_session(&script, proxy_port, &WebDriver::new(&driver), &options)?;
            session.save(&out)?;
            println!(
                "recorded {} exchanges; target #{} {}",
                session.exchanges.len(),
                session.target_index,
                session.target().url
            );
        }
        Command::ImportHar { har, target, out } => {
            let text = fs::read_to_string(&har).with_context(|| format!("reading {}", har.display()))?;
            let session = import_har(&text, &target)?;
            session.save(&out)?;
            println!(
                "imported {} exchanges; target #{} {}",
                session.exchanges.len(),
                session.target_index,
                session.target().url
            );
        }
        Command::Preflight { common } => {
            let (script, session, options) = common.load()?;
            let pf = campaign::preflight(&script, &session, &options)?;
            println!(
                "preflight passed: {} replays, ignore mask size {}, {} fields to test",
                options.replays,
                pf.mask.len(),
                session.target_tree()?.enumerate_leaves().len()
            );
        }
        Command::Fuzz {
            common,
            workers,
            report,
            csv,
            no_validate,
        } => {
            let (script, session, mut options) = common.load()?;
            options.workers = workers;
            options.validate = !no_validate;
            let result = campaign::run_campaign(&script, &session, &options)?;
            if let Some(path) = &report {
                emit_report(&result, ReportFormat::Json, path)?;
            }
            if let Some(path) = &csv {
                emit_report(&result, ReportFormat::Csv, path)?;
            }
            println!(
                "{} of {} fields flagged as excessive ({} iterations, {:.1} tests/min)",
                result.flagged.len(),
                result.total_fields,
                result.iterations,
                result.tests_per_minute
            );
            for v in &result.flagged {
                println!("  {}", v.path);
            }
            println!("validation: {}", result.validation.outcome);
            if result.validation.outcome == ValidationOutcome::FailV {
                if let Some(detail) = &result.validation.detail {
                    eprintln!("Fail_V: {detail}");
                }
                return Ok(Outcome::FailV);
            }
        }
        Command::Validate { common, report } => {
            let (script, session, options) = common.load()?;
            let saved = load_report(&report)?;
            let pf = campaign::preflight(&script, &session, &options)?;
            let result = campaign::validate_simultaneous(&saved.flagged_paths(), &script, &session, &pf, &options)?;
            println!("validation: {}", result.outcome);
            if result.outcome == ValidationOutcome::FailV {
                if let Some(detail) = &result.detail {
                    eprintln!("Fail_V: {detail}");
                }
                return Ok(Outcome::FailV);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::FailV) => ExitCode::from(EXIT_FAIL_V),
        Err(e) => {
            if let Some(reason) = e.downcast_ref::<CampaignError>().and_then(CampaignError::abort_reason) {
                eprintln!("campaign aborted (reason {reason}): {e}");
                return ExitCode::from(EXIT_ABORTED);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
