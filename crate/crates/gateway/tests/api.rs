mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use verigrade_core::backend::{Backend, MockBackend, RunError, RunReport, VerificationReport};
use verigrade_core::progress::read_events;

/// Counts calls and optionally stalls before delegating to the mock.
struct Probe {
    inner: MockBackend,
    calls: AtomicUsize,
    delay: Duration,
}

impl Probe {
    fn new(delay: Duration) -> Arc<Self> {
        Arc::new(Probe {
            inner: MockBackend::new(Duration::from_secs(10), Some(fixtures().join("bank"))),
            calls: AtomicUsize::new(0),
            delay,
        })
    }
}

impl Backend for Probe {
    fn verify(&self, source: &str, timeout: Duration) -> VerificationReport {
        self.calls.fetch_add(1, Ordering::SeqCst);
        std::thread::sleep(self.delay);
        self.inner.verify(source, timeout)
    }

    fn run(&self, source: &str, timeout: Duration) -> Result<RunReport, RunError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.run(source, timeout)
    }

    fn default_timeout(&self) -> Duration {
        self.inner.default_timeout()
    }
}

const ALICE: Option<&str> = Some("t-alice");
const PROF: Option<&str> = Some(INSTRUCTOR_TOKEN);

#[test]
fn every_route_requires_a_known_token() {
    let d = Deployment::new(12, "");
    let s = d.start();
    for token in [None, Some("wrong")] {
        assert_eq!(get(&s.base, "/questions", token).0, 401);
        assert_eq!(get(&s.base, "/questions/first-past-the-post", token).0, 401);
        assert_eq!(post(&s.base, "/questions/first-past-the-post/attempts", token, &answer_body("!=")).0, 401);
        assert_eq!(get(&s.base, "/overview", token).0, 401);
    }
    assert!(read_events(&d.log_path()).unwrap().is_empty());
}

#[test]
fn questions_are_released_by_week() {
    let d = Deployment::new(3, "");
    let s = d.start();
    let (status, body) = get(&s.base, "/questions", ALICE);
    assert_eq!(status, 200);
    let list = json(&body);
    let ids: Vec<&str> = list.as_array().unwrap().iter().map(|q| q["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["first-past-the-post", "sum-and-difference", "logical"]);
    assert!(list.as_array().unwrap().iter().all(|q| q["completed"] == false && q["week"].as_u64().unwrap() <= 3));

    let (status, body) = get(&s.base, "/questions/first-past-the-post", ALICE);
    assert_eq!(status, 200);
    let q = json(&body);
    assert_eq!(q["title"], "First Past the Post");
    assert!(q["template_text"].as_str().unwrap().contains("t := a [???] b;"));

    assert_eq!(get(&s.base, "/questions/a4-palindrome", ALICE).0, 403);
    assert_eq!(get(&s.base, "/questions/no-such-thing", ALICE).0, 404);
    assert_eq!(get(&s.base, "/nowhere", ALICE).0, 404);
}

#[test]
fn empty_bank_lists_nothing() {
    let d = Deployment::new(12, "");
    std::fs::remove_dir_all(d.bank_dir()).unwrap();
    std::fs::create_dir(d.bank_dir()).unwrap();
    let s = d.start();
    assert_eq!(get(&s.base, "/questions", ALICE), (200, "[]".to_owned()));
    let o = json(&get(&s.base, "/overview", PROF).1);
    assert_eq!(o["questions"].as_array().unwrap().len(), 0);
}

#[test]
fn unreleased_attempts_never_reach_the_verifier() {
    let d = Deployment::new(3, "");
    let probe = Probe::new(Duration::ZERO);
    let s = d.start_with(probe.clone());
    let (status, _) = post(&s.base, "/questions/a4-palindrome/attempts", ALICE, &answer_body("method Main() {}"));
    assert_eq!(status, 403);
    let (status, _) = post(&s.base, "/questions/missing/attempts", ALICE, &answer_body("x"));
    assert_eq!(status, 404);
    assert_eq!(probe.calls.load(Ordering::SeqCst), 0);
    assert!(read_events(&d.log_path()).unwrap().is_empty());
}

#[test]
fn passing_attempt_is_recorded_before_the_response() {
    let d = Deployment::new(3, "");
    let s = d.start();
    let (status, body) = post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("!="));
    assert_eq!(status, 200, "{body}");
    let r = json(&body);
    assert_eq!(r["completed"], true);
    assert_eq!(r["feedback"], "1 verified, 0 errors");
    assert_eq!(r["verified_count"], 1);
    assert_eq!(r["error_count"], 0);

    let events = read_events(&d.log_path()).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!((events[0].student.as_str(), events[0].completed), ("alice", true));

    let list = json(&get(&s.base, "/questions", ALICE).1);
    assert_eq!(list[0]["completed"], true);
    let list = json(&get(&s.base, "/questions", Some("t-bob")).1);
    assert_eq!(list[0]["completed"], false);
}

#[test]
fn failing_attempt_reports_counts() {
    let d = Deployment::new(3, "");
    let s = d.start();
    let (status, body) = post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("=="));
    assert_eq!(status, 200);
    let r = json(&body);
    assert_eq!(r["completed"], false);
    assert_eq!((r["verified_count"].as_u64(), r["error_count"].as_u64()), (Some(0), Some(1)));
    // A later failure does not undo an earlier success.
    post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("!="));
    post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("=="));
    assert_eq!(json(&get(&s.base, "/questions", ALICE).1)[0]["completed"], true);
    assert_eq!(read_events(&d.log_path()).unwrap().len(), 3);
}

#[test]
fn request_validation() {
    let d = Deployment::new(12, "max_answer_bytes = 100");
    let s = d.start();
    let url = "/questions/first-past-the-post/attempts";
    assert_eq!(post(&s.base, url, ALICE, &answer_body(&"x".repeat(101))).0, 413);
    assert_eq!(post(&s.base, url, ALICE, &answer_body(&"x".repeat(100_000))).0, 413);
    assert_eq!(post(&s.base, url, ALICE, &answer_body(&"x".repeat(100))).0, 200);
    assert_eq!(post(&s.base, url, ALICE, "not json").0, 400);
    assert_eq!(post(&s.base, url, ALICE, r#"{"student_id":"bob","answer":"!="}"#).0, 403);
    assert_eq!(post(&s.base, url, ALICE, r#"{"exercise_id":"logical","answer":"!="}"#).0, 400);
    assert_eq!(post(&s.base, url, ALICE, r#"{"student_id":"alice","exercise_id":"first-past-the-post","answer":"!="}"#).0, 200);
    assert_eq!(post(&s.base, url, PROF, &answer_body("!=")).0, 403);
}

#[test]
fn one_attempt_in_flight_per_student_and_reads_stay_responsive() {
    let d = Deployment::new(12, "");
    let probe = Probe::new(Duration::from_millis(1500));
    let s = d.start_with(probe.clone());
    let base = s.base.clone();
    let first = std::thread::spawn(move || post(&base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("!=")));
    let deadline = Instant::now() + Duration::from_secs(5);
    while probe.calls.load(Ordering::SeqCst) == 0 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(10));
    }

    let (status, _) = post(&s.base, "/questions/logical/attempts", ALICE, &answer_body("true"));
    assert_eq!(status, 429);

    let start = Instant::now();
    assert_eq!(get(&s.base, "/questions", ALICE).0, 200);
    assert_eq!(get(&s.base, "/overview", PROF).0, 200);
    assert!(start.elapsed() < Duration::from_millis(500), "reads blocked for {:?}", start.elapsed());

    // Another student is not throttled by alice's attempt.
    let (status, _) = post(&s.base, "/questions/first-past-the-post/attempts", Some("t-bob"), &answer_body("=="));
    assert_eq!(status, 200);

    assert_eq!(first.join().unwrap().0, 200);
    let (status, _) = post(&s.base, "/questions/logical/attempts", ALICE, &answer_body("true"));
    assert_eq!(status, 200);
}

#[test]
fn overview_is_for_instructors_and_matches_stats() {
    let d = Deployment::new(12, "");
    let s = d.start();
    assert_eq!(get(&s.base, "/overview", ALICE).0, 403);
    post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("!="));
    post(&s.base, "/questions/first-past-the-post/attempts", Some("t-bob"), &answer_body("=="));
    let (status, body) = get(&s.base, "/overview", PROF);
    assert_eq!(status, 200);
    let o = json(&body);
    assert_eq!(o["cohort_size"], 3);
    let row = o["questions"].as_array().unwrap().iter().find(|q| q["id"] == "first-past-the-post").unwrap().clone();
    assert_eq!(row["completed_count"], 1);
    assert!((row["fraction"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    for name in ["alice", "bob", "carol"] {
        assert!(!body.contains(name), "overview names {name}");
    }
    assert!(o["lecture_picks"].as_array().unwrap().is_empty());
}

#[test]
fn overview_of_an_empty_cohort() {
    let d = Deployment::with_students(12, "", &[]);
    let s = d.start();
    let o = json(&get(&s.base, "/overview", PROF).1);
    assert_eq!(o["cohort_size"], 0);
    assert!(o["questions"].as_array().unwrap().iter().all(|q| q["fraction"] == 0.0 && q["completed_count"] == 0));
    assert!(o["lecture_picks"].as_array().unwrap().is_empty());
}

#[test]
fn no_response_contains_hidden_assets() {
    let d = Deployment::new(12, "max_answer_bytes = 4096");
    let secrets = d.secrets();
    let s = d.start();
    let bank = verigrade_core::bank::load_bank(&d.bank_dir()).unwrap();
    let tokens = [None, Some("bogus"), ALICE, PROF];
    let answers = ["", "!=", "==", "}", "{", "[???]", "ensures r == a + b", "t == if c then a else a && b", "\u{0}"];

    let mut responses = Vec::new();
    for token in tokens {
        responses.push(get(&s.base, "/questions", token));
        responses.push(get(&s.base, "/overview", token));
        responses.push(get(&s.base, "/questions/unknown", token));
        for id in bank.ids() {
            responses.push(get(&s.base, &format!("/questions/{id}"), token));
            let url = format!("/questions/{id}/attempts");
            for answer in answers {
                responses.push(post(&s.base, &url, token, &answer_body(answer)));
            }
            responses.push(post(&s.base, &url, token, "{"));
            responses.push(post(&s.base, &url, token, &answer_body(&"y".repeat(5000))));
        }
    }
    assert!(responses.len() > 300);
    for (status, body) in &responses {
        for secret in &secrets {
            assert!(!body.contains(secret.as_str()), "status {status} response leaks `{secret}`: {body}");
        }
    }
}

#[test]
fn slow_verification_is_cut_off_at_the_request_deadline() {
    // Verifier timeout 1s → requests are bounded by 6s.
    let d = Deployment::new(12, "");
    let text = std::fs::read_to_string(d.config_path()).unwrap().replace("timeout_secs = 10", "timeout_secs = 1");
    std::fs::write(d.config_path(), text).unwrap();
    let probe = Probe::new(Duration::from_millis(6500));
    let s = d.start_with(probe);
    let start = Instant::now();
    let (status, body) = post(&s.base, "/questions/first-past-the-post/attempts", ALICE, &answer_body("!="));
    let elapsed = start.elapsed();
    assert_eq!(status, 504, "{body}");
    assert!(elapsed < Duration::from_millis(7000), "{elapsed:?}");
    // Still throttled while the abandoned check runs.
    assert_eq!(post(&s.base, "/questions/logical/attempts", ALICE, &answer_body("true")).0, 429);
}
