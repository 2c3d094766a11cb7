//! Campaign orchestration: preflight, one mutated run per leaf field,
//! verdicts, and the simultaneous-removal check.

use std::fmt;
use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Instant;

use exposure_core::{
    build_ignore_mask, compare, parse_html, ApiResponseTree, ComparisonResult, Condition, Divergence, DomError,
    DomTree, FieldPath, IgnoreMask, InteractionScript, MutationError, NodeAddress, Verdict,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{drive, CampaignState, DriveError, DriveOptions, DriveResult, FailureReason};
use crate::replay::{ReplayError, ReplayPlan, ReplayServer};
use crate::session::{RecordedSession, SessionError};
use crate::webdriver::WebDriver;

pub const DEFAULT_REPLAYS: usize = 3;
/// Consecutive failed drive attempts after which the campaign gives up.
pub const SYSTEMIC_FAILURE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldVerdictKind {
    Excessive,
    NonExcessive,
    ClientError,
    StateNotReached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldVerdict {
    pub path: FieldPath,
    pub verdict: FieldVerdictKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<ComparisonResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationOutcome {
    Pass,
    #[serde(rename = "Fail_V")]
    FailV,
    Skipped,
}

impl fmt::Display for ValidationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "Pass",
            Self::FailV => "Fail_V",
            Self::Skipped => "Skipped",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub outcome: ValidationOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

impl ValidationResult {
    fn new(outcome: ValidationOutcome, detail: Option<String>, divergence: Option<Divergence>) -> Self {
        Self {
            outcome,
            detail,
            divergence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total_fields: usize,
    pub excessive: usize,
    pub non_excessive: usize,
    pub client_error: usize,
    pub state_not_reached: usize,
}

impl Summary {
    pub fn from_verdicts<'a>(verdicts: impl IntoIterator<Item = &'a FieldVerdict>) -> Self {
        let mut s = Self::default();
        for v in verdicts {
            s.total_fields += 1;
            match v.verdict {
                FieldVerdictKind::Excessive => s.excessive += 1,
                FieldVerdictKind::NonExcessive => s.non_excessive += 1,
                FieldVerdictKind::ClientError => s.client_error += 1,
                FieldVerdictKind::StateNotReached => s.state_not_reached += 1,
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub target_url: String,
    pub total_fields: usize,
    /// Mutated runs executed, one per field; retries are counted separately.
    pub iterations: usize,
    pub retries: usize,
    pub flagged: Vec<FieldVerdict>,
    pub others: Vec<FieldVerdict>,
    pub mask_size: usize,
    pub validation: ValidationResult,
    pub campaign_wall_time_ms: u64,
    pub workers: usize,
    pub tests_per_minute: f64,
    pub summary: Summary,
}

impl FuzzReport {
    pub fn flagged_paths(&self) -> Vec<FieldPath> {
        self.flagged.iter().map(|v| v.path.clone()).collect()
    }

    pub fn verdicts(&self) -> impl Iterator<Item = &FieldVerdict> {
        self.flagged.iter().chain(&self.others)
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("target nondeterministic: {0}")]
    TargetNondeterministic(String),
    #[error("nondeterministic requests, not in the session: {}", miss_log.join(", "))]
    NondeterministicRequests { miss_log: Vec<String> },
    #[error("page uses shadow roots ({count} found)")]
    ShadowRoots { count: u64 },
    #[error("baseline run did not reach the updated state: {0:?}")]
    BaselineStateNotReached(CampaignState),
    #[error("campaign aborted after {} completed fields: {cause}", partial.len())]
    Aborted { cause: String, partial: Vec<FieldVerdict> },
    #[error("no WebDriver endpoint configured")]
    NoDriver,
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Dom(DomError),
}

impl CampaignError {
    /// The failure class letter for campaigns the target cannot support.
    pub fn abort_reason(&self) -> Option<char> {
        match self {
            Self::TargetNondeterministic(_) => Some('B'),
            Self::NondeterministicRequests { .. } => Some('F'),
            Self::ShadowRoots { .. } => Some('S'),
            _ => None,
        }
    }
}

impl From<DomError> for CampaignError {
    fn from(e: DomError) -> Self {
        match e {
            DomError::TargetNondeterministic(d) => Self::TargetNondeterministic(d.to_string()),
            other => Self::Dom(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignOptions {
    /// WebDriver endpoints, assigned to workers round-robin.
    pub drivers: Vec<String>,
    pub workers: usize,
    pub replays: usize,
    pub drive: DriveOptions,
    pub strict_bodies: bool,
    pub validate: bool,
}

impl CampaignOptions {
    pub fn new(driver: &str) -> Self {
        Self {
            drivers: vec![driver.to_string()],
            workers: 1,
            replays: DEFAULT_REPLAYS,
            drive: DriveOptions::default(),
            strict_bodies: false,
            validate: true,
        }
    }

    fn driver(&self, worker: usize) -> Result<WebDriver, CampaignError> {
        if self.drivers.is_empty() {
            return Err(CampaignError::NoDriver);
        }
        Ok(WebDriver::new(&self.drivers[worker % self.drivers.len()]))
    }

    fn plan(&self, session: &Arc<RecordedSession>) -> ReplayPlan {
        let mut plan = ReplayPlan::baseline(Arc::clone(session));
        plan.strict_bodies = self.strict_bodies;
        plan
    }
}

#[derive(Debug, Clone)]
pub struct Preflight {
    pub baseline: DomTree,
    pub baseline_html: String,
    pub mask: IgnoreMask,
    pub baseline_errors: Vec<String>,
}

fn unmutated_run(
    script: &InteractionScript,
    server: &ReplayServer,
    driver: &WebDriver,
    options: &CampaignOptions,
) -> Result<DriveResult, CampaignError> {
    server.begin_run(None);
    let result = drive(script, driver, server.port(), &options.drive)?;
    let misses = server.miss_log();
    if !misses.is_empty() {
        return Err(CampaignError::NondeterministicRequests { miss_log: misses });
    }
    if result.shadow_roots > 0 {
        return Err(CampaignError::ShadowRoots {
            count: result.shadow_roots,
        });
    }
    Ok(result)
}

/// One baseline run plus `options.replays` further unmutated runs, which
/// define the ignore mask.
pub fn preflight(
    script: &InteractionScript,
    session: &Arc<RecordedSession>,
    options: &CampaignOptions,
) -> Result<Preflight, CampaignError> {
    let driver = options.driver(0)?;
    let server = ReplayServer::start(options.plan(session))?;
    let baseline_run = unmutated_run(script, &server, &driver, options)?;
    let baseline_html = match (&baseline_run.final_state, baseline_run.dom_html) {
        (CampaignState::S2PageUpdated, Some(html)) => html,
        (state, _) => return Err(CampaignError::BaselineStateNotReached(state.clone())),
    };
    let baseline = parse_html(&baseline_html)?;
    let mut replays = Vec::with_capacity(options.replays);
    for i in 0..options.replays {
        let run = unmutated_run(script, &server, &driver, options)?;
        match (&run.final_state, run.dom_html) {
            (CampaignState::S2PageUpdated, Some(html)) => replays.push(parse_html(&html)?),
            (state, _) => {
                return Err(CampaignError::TargetNondeterministic(format!(
                    "unmutated replay {} ended in {state:?}",
                    i + 1
                )))
            }
        }
    }
    let mask = build_ignore_mask(&baseline, &replays)?;
    log::info!("preflight done: {} replays, mask size {}", options.replays, mask.len());
    Ok(Preflight {
        baseline,
        baseline_html,
        mask,
        baseline_errors: baseline_run.client_errors,
    })
}

fn synthesized(detail: String) -> ComparisonResult {
    ComparisonResult {
        verdict: Verdict::StructurallyDifferent,
        first_divergence: Some(Divergence {
            address: NodeAddress::root(),
            condition: Condition::C1,
            detail,
        }),
    }
}

/// Verdict for one mutated run against the preflight baseline.
pub fn classify(
    result: &DriveResult,
    preflight: &Preflight,
) -> (FieldVerdictKind, Option<ComparisonResult>, Option<String>) {
    let known: HashSet<&String> = preflight.baseline_errors.iter().collect();
    let new_errors: Vec<&str> = result
        .client_errors
        .iter()
        .filter(|e| !known.contains(e))
        .map(String::as_str)
        .collect();
    if !new_errors.is_empty() {
        return (FieldVerdictKind::ClientError, None, Some(new_errors.join("; ")));
    }
    match (&result.final_state, &result.dom_html) {
        (CampaignState::S2PageUpdated, Some(html)) => match parse_html(html) {
            Ok(tree) => {
                let cmp = compare(&preflight.baseline, &tree, &preflight.mask);
                let kind = if cmp.is_identical() {
                    FieldVerdictKind::Excessive
                } else {
                    FieldVerdictKind::NonExcessive
                };
                (kind, Some(cmp), None)
            }
            Err(e) => (FieldVerdictKind::NonExcessive, Some(synthesized(e.to_string())), None),
        },
        (CampaignState::Failed(reason @ (FailureReason::AreaNotFound | FailureReason::AreaAmbiguous { .. })), _) => {
            (FieldVerdictKind::NonExcessive, Some(synthesized(reason.to_string())), None)
        }
        (CampaignState::Failed(reason), _) => (FieldVerdictKind::StateNotReached, None, Some(reason.to_string())),
        (state, _) => (FieldVerdictKind::StateNotReached, None, Some(format!("ended in {state:?}"))),
    }
}

struct Progress {
    next: AtomicUsize,
    iterations: AtomicUsize,
    retries: AtomicUsize,
    consecutive_failures: AtomicUsize,
    stop: AtomicBool,
    cause: Mutex<Option<String>>,
    verdicts: Mutex<Vec<FieldVerdict>>,
}

impl Progress {
    fn abort(&self, cause: String) {
        self.cause.lock().expect("progress poisoned").get_or_insert(cause);
        self.stop.store(true, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone)]
pub struct FieldRuns {
    pub verdicts: Vec<FieldVerdict>,
    pub iterations: usize,
    pub retries: usize,
    pub workers: usize,
    pub wall_time_ms: u64,
}

/// Runs one mutated drive per field across the worker pool. Each worker
/// owns its replay server and opens a fresh browser session per field.
pub fn fuzz_fields(
    script: &InteractionScript,
    session: &Arc<RecordedSession>,
    tree: &ApiResponseTree,
    fields: &[FieldPath],
    preflight: &Preflight,
    options: &CampaignOptions,
) -> Result<FieldRuns, CampaignError> {
    let started = Instant::now();
    let workers = options.workers.clamp(1, fields.len().max(1));
    let progress = Progress {
        next: AtomicUsize::new(0),
        iterations: AtomicUsize::new(0),
        retries: AtomicUsize::new(0),
        consecutive_failures: AtomicUsize::new(0),
        stop: AtomicBool::new(false),
        cause: Mutex::new(None),
        verdicts: Mutex::new(Vec::with_capacity(fields.len())),
    };
    thread::scope(|scope| {
        for worker in 0..workers {
            let progress = &progress;
            scope.spawn(move || {
                if let Err(e) = worker_loop(worker, script, session, tree, fields, preflight, options, progress) {
                    progress.abort(e.to_string());
                }
            });
        }
    });
    let mut verdicts = progress.verdicts.into_inner().expect("progress poisoned");
    verdicts.sort_by_key(|v| v.path.to_string());
    if let Some(cause) = progress.cause.into_inner().expect("progress poisoned") {
        return Err(CampaignError::Aborted {
            cause,
            partial: verdicts,
        });
    }
    Ok(FieldRuns {
        verdicts,
        iterations: progress.iterations.into_inner(),
        retries: progress.retries.into_inner(),
        workers,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

#[allow(clippy::too_many_arguments)]
fn worker_loop(
    worker: usize,
    script: &InteractionScript,
    session: &Arc<RecordedSession>,
    tree: &ApiResponseTree,
    fields: &[FieldPath],
    preflight: &Preflight,
    options: &CampaignOptions,
    progress: &Progress,
) -> Result<(), CampaignError> {
    let driver = options.driver(worker)?;
    let server = ReplayServer::start(options.plan(session))?;
    while !progress.stop.load(Ordering::SeqCst) {
        let index = progress.next.fetch_add(1, Ordering::SeqCst);
        let Some(path) = fields.get(index) else {
            break;
        };
        let body = tree.apply_deletion(path)?;
        let started = Instant::now();
        progress.iterations.fetch_add(1, Ordering::SeqCst);
        let mut outcome = None;
        let mut last_error = String::new();
        for attempt in 0..2 {
            if attempt > 0 {
                progress.retries.fetch_add(1, Ordering::SeqCst);
            }
            server.begin_run(Some(body.clone()));
            match drive(script, &driver, server.port(), &options.drive) {
                Ok(result) => {
                    progress.consecutive_failures.store(0, Ordering::SeqCst);
                    outcome = Some(result);
                    break;
                }
                Err(e) => {
                    last_error = e.to_string();
                    log::warn!("worker {worker}: drive for {path} failed: {e}");
                    let failures = progress.consecutive_failures.fetch_add(1, Ordering::SeqCst) + 1;
                    if failures >= SYSTEMIC_FAILURE_LIMIT {
                        progress.abort(format!("{failures} consecutive driver failures, last: {e}"));
                        return Ok(());
                    }
                }
            }
        }
        let (verdict, divergence, detail) = match &outcome {
            Some(result) => classify(result, preflight),
            None => (
                FieldVerdictKind::ClientError,
                None,
                Some(format!("driver failure after retry: {last_error}")),
            ),
        };
        log::info!("iteration {}/{} {path}: {verdict:?}", index + 1, fields.len());
        progress.verdicts.lock().expect("progress poisoned").push(FieldVerdict {
            path: path.clone(),
            verdict,
            divergence,
            detail,
            duration_ms: started.elapsed().as_millis() as u64,
        });
    }
    Ok(())
}

/// Removes every flagged field at once and checks the page is still
/// identical to the baseline.
pub fn validate_simultaneous(
    flagged: &[FieldPath],
    script: &InteractionScript,
    session: &Arc<RecordedSession>,
    preflight: &Preflight,
    options: &CampaignOptions,
) -> Result<ValidationResult, CampaignError> {
    if flagged.is_empty() {
        return Ok(ValidationResult::new(
            ValidationOutcome::Pass,
            Some("no flagged fields".into()),
            None,
        ));
    }
    let tree = session.target_tree()?;
    let body = tree.apply_all_deletions(flagged)?;
    let driver = options.driver(0)?;
    let server = ReplayServer::start(options.plan(session))?;
    server.begin_run(Some(body));
    let result = drive(script, &driver, server.port(), &options.drive)?;
    let (kind, comparison, detail) = classify(&result, preflight);
    Ok(match kind {
        FieldVerdictKind::Excessive => ValidationResult::new(ValidationOutcome::Pass, None, None),
        _ => ValidationResult::new(
            ValidationOutcome::FailV,
            detail.or_else(|| Some(format!("removing all {} flagged fields changed the page", flagged.len()))),
            comparison.and_then(|c| c.first_divergence),
        ),
    })
}

/// The whole workflow: preflight, per-field runs, validation, report.
pub fn run_campaign(
    script: &InteractionScript,
    session: &Arc<RecordedSession>,
    options: &CampaignOptions,
) -> Result<FuzzReport, CampaignError> {
    let started = Instant::now();
    let tree = session.target_tree()?;
    let fields = tree.enumerate_leaves();
    let preflight = preflight(script, session, options)?;
    log::info!("fuzzing {} fields with {} workers", fields.len(), options.workers.max(1));
    let runs = fuzz_fields(script, session, &tree, &fields, &preflight, options)?;
    let (flagged, others): (Vec<_>, Vec<_>) = runs
        .verdicts
        .into_iter()
        .partition(|v| v.verdict == FieldVerdictKind::Excessive);
    let validation = if options.validate {
        let paths: Vec<FieldPath> = flagged.iter().map(|v| v.path.clone()).collect();
        validate_simultaneous(&paths, script, session, &preflight, options)?
    } else {
        ValidationResult::new(ValidationOutcome::Skipped, None, None)
    };
    let summary = Summary::from_verdicts(flagged.iter().chain(&others));
    let minutes = runs.wall_time_ms.max(1) as f64 / 60_000.0;
    Ok(FuzzReport {
        target_url: session.target().url.clone(),
        total_fields: fields.len(),
        iterations: runs.iterations,
        retries: runs.retries,
        flagged,
        others,
        mask_size: preflight.mask.len(),
        validation,
        campaign_wall_time_ms: started.elapsed().as_millis() as u64,
        workers: runs.workers,
        tests_per_minute: runs.iterations as f64 / minutes,
        summary,
    })
}
