//! Test harness for the exposure fuzzer: a scripted WebDriver browser, a
//! static origin for fixture hosts, and the fixture pages themselves.
//!
//! The browser keeps an arena DOM, evaluates an XPath subset, and sends all
//! page traffic through the HTTP proxy given in the session capabilities.
//! Page behaviour is implemented in Rust and selected by a marker comment
//! in each fixture's `app.js`.

pub mod apps;
pub mod browser;
pub mod dom;
pub mod fixtures;
pub mod net;
pub mod origin;
pub mod page;
mod threads;
pub mod xpath;

pub use browser::FakeBrowser;
pub use fixtures::{fixtures_dir, Fixture};
pub use origin::OriginServer;
