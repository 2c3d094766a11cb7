//! Excessive data exposure fuzzer.
//!
//! A recorded session is replayed to a browser while one leaf field of the
//! target API response is deleted per run. Fields whose deletion leaves the
//! rendered page identical to the baseline are flagged as excessive.

pub mod campaign;
pub mod driver;
pub mod record;
pub mod replay;
pub mod report;
pub mod session;
pub mod webdriver;

pub use campaign::{
    classify, fuzz_fields, preflight, run_campaign, validate_simultaneous, CampaignError, CampaignOptions,
    FieldVerdict, FieldVerdictKind, FuzzReport, Preflight, Summary, ValidationOutcome, ValidationResult,
};
pub use driver::{drive, extract_dom, CampaignState, DriveOptions, DriveResult, FailureReason};
pub use record::{record_session, RecordError, RecordOptions, RecordingProxy};
pub use replay::{match_request, normalize_url, serve, MissPolicy, ReplayPlan, ReplayServer};
pub use report::{emit_report, load_report, strip_timing, ReportFormat};
pub use session::{import_har, Exchange, Header, RecordedSession, SessionError};
pub use webdriver::{BrowserSession, WebDriver, WebDriverError};

/// Environment variable consulted when no driver endpoint is given.
pub const WEBDRIVER_ENV: &str = "EXPOSURE_WEBDRIVER_URL";
