//! Serves the fixture origin and the scripted WebDriver endpoint until
//! interrupted, for running the fuzzer CLI by hand against the fixtures.

use std::thread;
use std::time::Duration;

use exposure_testkit::{fixtures_dir, FakeBrowser, OriginServer};

fn main() -> std::io::Result<()> {
    let origin = OriginServer::start(&fixtures_dir())?;
    let browser = FakeBrowser::start()?;
    println!("origin {}", origin.addr());
    println!("webdriver {}", browser.endpoint());
    loop {
        thread::sleep(Duration::from_secs(3600));
    }
}
