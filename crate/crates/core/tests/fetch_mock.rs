use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use depriv_core::ingest::{fetch_acs, FetchOptions};
use depriv_core::{Error, Execution};

const BODY_OK: &str = r#"[["B01003_001E","state","county","tract","block group"],["812","26","163","512000","1"],["95","26","163","512000","2"]]"#;

/// Serves one canned response per connection, in order, then repeats the last.
fn serve(responses: Vec<(u16, &'static str)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).is_ok_and(|n| n > 2) {
                line.clear();
            }
            let k = counter.fetch_add(1, Ordering::SeqCst);
            let (status, body) = responses[k.min(responses.len() - 1)];
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}/data/2019/acs/acs5"), hits)
}

fn options(dir: &std::path::Path) -> FetchOptions {
    FetchOptions {
        backoff: Duration::from_millis(5),
        timeout: Duration::from_secs(10),
        ..FetchOptions::new(dir)
    }
}

#[test]
fn two_server_errors_then_success() {
    let (url, hits) = serve(vec![(500, "boom"), (500, "boom"), (200, BODY_OK)]);
    let dir = tempfile::tempdir().unwrap();
    let paths = fetch_acs(
        "2015_2019",
        &["B01003_001E"],
        &["26"],
        &url,
        &options(dir.path()),
        Execution::Sequential,
    )
    .unwrap();
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    assert_eq!(paths, vec![dir.path().join("acs_2015_2019_26.csv")]);
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(text, "GEOID,B01003_001E\n261635120001,812\n261635120002,95\n");
}

#[test]
fn refetch_overwrites() {
    let (url, _) = serve(vec![(200, BODY_OK)]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("acs_2015_2019_26.csv");
    std::fs::write(&path, "stale").unwrap();
    let opts = options(dir.path());
    fetch_acs("2015_2019", &["B01003_001E"], &["26"], &url, &opts, Execution::Sequential).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("GEOID,"));
}

#[test]
fn not_found_is_fatal_with_status() {
    let (url, hits) = serve(vec![(404, "unknown variable")]);
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_acs(
        "2015_2019",
        &["B01003_001E"],
        &["26"],
        &url,
        &options(dir.path()),
        Execution::Sequential,
    )
    .unwrap_err();
    assert!(
        matches!(err, Error::Http { status: 404, ref body } if body == "unknown variable"),
        "{err:?}"
    );
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn persistent_server_error_gives_up_after_three_attempts() {
    let (url, hits) = serve(vec![(503, "busy")]);
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_acs(
        "2015_2019",
        &["B01003_001E"],
        &["26"],
        &url,
        &options(dir.path()),
        Execution::Sequential,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Http { status: 503, .. }), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let dir = tempfile::tempdir().unwrap();
    let err = fetch_acs(
        "2015_2019",
        &["B01003_001E"],
        &["26"],
        &format!("http://127.0.0.1:{port}/x"),
        &options(dir.path()),
        Execution::Sequential,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Network(_)), "{err:?}");
}
