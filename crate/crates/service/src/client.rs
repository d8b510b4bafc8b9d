//! Blocking HTTP calls used by operator commands.

use std::time::Duration;

use reqwest::blocking::Client;

use crate::api::{ProblemSummary, RequestPackets, StatusJson};

fn client() -> reqwest::Result<Client> {
    Client::builder().timeout(Duration::from_secs(30)).build()
}

fn base(url: &str) -> &str {
    url.trim_end_matches('/')
}

pub fn fetch_status(url: &str) -> reqwest::Result<StatusJson> {
    client()?.get(format!("{}/api/status", base(url))).send()?.error_for_status()?.json()
}

pub fn fetch_problems(url: &str) -> reqwest::Result<Vec<ProblemSummary>> {
    client()?.get(format!("{}/api/problems", base(url))).send()?.error_for_status()?.json()
}

pub fn request_packets(url: &str, problem_id: u64, additional: i64) -> reqwest::Result<ProblemSummary> {
    client()?
        .post(format!("{}/api/problems/{problem_id}/request", base(url)))
        .json(&RequestPackets { additional_packets: additional })
        .send()?
        .error_for_status()?
        .json()
}
