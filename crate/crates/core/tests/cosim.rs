//! Protocol conformance against the shipped fixture corpus, and the server
//! and client over real transports.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use demandgym::building::{synth_weather, Building, BuildingConfig, Period, ScheduleSet};
use demandgym::cosim::{self, decode, encode, Message, RemoteEnv, SessionEnd};
use demandgym::env::{BaselineCache, BuiltinEnv, EnvError, Environment, EpisodeWindow};
use demandgym::problem::{Action, ActionSpec, Task, TaskSpec};

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/protocol").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn builtin(task: Task, action: ActionSpec) -> BuiltinEnv {
    let period = Period::new(
        NaiveDate::from_ymd_opt(2023, 8, 1).unwrap(),
        NaiveDate::from_ymd_opt(2023, 8, 2).unwrap(),
    )
    .unwrap();
    let weather = synth_weather(1, period.start, period.end).unwrap();
    let building = Building::new(BuildingConfig::default(), weather, ScheduleSet::default()).unwrap();
    BuiltinEnv::new(building, TaskSpec::new(task, action), period, BaselineCache::shared()).unwrap()
}

fn window() -> EpisodeWindow {
    let d = NaiveDate::from_ymd_opt(2023, 8, 1).unwrap();
    EpisodeWindow {
        seed: 1,
        start: d.and_hms_opt(8, 0, 0).unwrap(),
        end: d.and_hms_opt(19, 0, 0).unwrap(),
    }
}

/// Runs the server over in-memory buffers and returns its reply lines.
fn serve_lines(env: &mut dyn Environment, input: &str) -> (Vec<String>, SessionEnd) {
    let mut out = Vec::new();
    let end = cosim::serve(env, input.as_bytes(), &mut out).unwrap();
    (String::from_utf8(out).unwrap().lines().map(str::to_string).collect(), end)
}

fn without_message(line: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
    v.as_object_mut().unwrap().remove("message");
    v
}

#[test]
fn valid_corpus_round_trips_byte_for_byte() {
    for line in fixture("valid.ndjson").lines() {
        let m = decode(line).unwrap_or_else(|e| panic!("{line}: {e}"));
        assert_eq!(encode(&m), line);
    }
}

#[test]
fn invalid_corpus_yields_expected_codes() {
    let lines = fixture("invalid.ndjson");
    let codes = fixture("invalid.codes");
    let lines: Vec<&str> = lines.lines().collect();
    let codes: Vec<&str> = codes.lines().collect();
    assert_eq!(lines.len(), codes.len());
    for (line, code) in lines.iter().zip(&codes) {
        let err = decode(line).expect_err(line);
        assert_eq!(err.code(), *code, "{line}");

        // A server answers the line with that code.
        let mut env = builtin(Task::Constant, ActionSpec::discrete());
        let (replies, _) = serve_lines(&mut env, &format!("{line}\n"));
        match decode(&replies[1]).unwrap() {
            Message::Error { code: got, .. } => assert_eq!(got, *code, "{line}"),
            other => panic!("{line}: {other:?}"),
        }
    }
}

#[test]
fn session_transcript_is_reproduced() {
    let transcript = fixture("session.ndjson");
    let client: String = transcript
        .lines()
        .filter_map(|l| l.strip_prefix("> "))
        .map(|l| format!("{l}\n"))
        .collect();
    let expected: Vec<&str> = transcript.lines().filter_map(|l| l.strip_prefix("< ")).collect();
    let mut env = builtin(Task::Constant, ActionSpec::discrete());
    let (replies, end) = serve_lines(&mut env, &client);
    assert_eq!(end, SessionEnd::Closed);
    assert_eq!(replies.len(), expected.len());
    for (got, want) in replies.iter().zip(&expected) {
        assert_eq!(without_message(got), without_message(want));
    }
}

proptest::proptest! {
    #[test]
    fn arbitrary_bytes_never_crash_the_decoder(bytes in proptest::collection::vec(proptest::num::u8::ANY, 0..128)) {
        let _ = decode(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn json_like_lines_never_crash_the_decoder(line in r#"\{("(v|type|action|features|seed)":(1|2|"act"|"obs"|\[[0-9.,e-]*\]|null|true),?){0,4}\}?"#) {
        let _ = decode(&line);
    }
}

#[test]
fn weekday_episode_emits_reset_obs_plus_sixty_six() {
    let mut env = builtin(Task::Constant, ActionSpec::discrete());
    let w = window();
    let mut input = encode(&Message::Reset {
        seed: w.seed,
        start: w.start,
        end: w.end,
    }) + "\n";
    for _ in 0..66 {
        input += &(encode(&Message::Act { action: vec![1.0] }) + "\n");
    }
    input += &(encode(&Message::Act { action: vec![1.0] }) + "\n");
    input += &(encode(&Message::Close) + "\n");
    let (replies, end) = serve_lines(&mut env, &input);
    assert_eq!(end, SessionEnd::Closed);
    assert!(replies[0].starts_with(r#"{"v":1,"type":"hello""#));
    let obs: Vec<Message> = replies[1..68].iter().map(|l| decode(l).unwrap()).collect();
    assert!(obs.iter().all(|m| matches!(m, Message::Obs { .. })));
    let dones: Vec<bool> = obs
        .iter()
        .map(|m| match m {
            Message::Obs { done, .. } => *done,
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(dones.iter().filter(|d| **d).count(), 1);
    assert!(dones[66]);
    // An act after the episode ended is refused.
    assert!(replies[68].contains(r#""code":"not_reset""#));
}

#[test]
fn bad_action_keeps_the_connection() {
    let mut env = builtin(Task::Constant, ActionSpec::continuous());
    let w = window();
    let input = [
        encode(&Message::Reset {
            seed: 0,
            start: w.start,
            end: w.end,
        }),
        encode(&Message::Act { action: vec![0.9] }),
        encode(&Message::Act { action: vec![0.25] }),
        "{broken".to_string(),
        encode(&Message::Act { action: vec![0.0] }),
    ]
    .join("\n");
    let (replies, end) = serve_lines(&mut env, &input);
    assert!(replies[2].contains(r#""code":"bad_action""#));
    assert!(replies[3].contains(r#""type":"obs""#));
    assert!(replies[4].contains(r#""code":"bad_message""#));
    assert_eq!(replies.len(), 5, "server stops after a malformed line");
    assert_eq!(end, SessionEnd::Malformed);
}

fn serve_in_background(task: Task, action: ActionSpec) -> (String, std::thread::JoinHandle<SessionEnd>) {
    let (tx, rx) = std::sync::mpsc::channel();
    let handle = std::thread::spawn(move || {
        let mut env = builtin(task, action);
        cosim::serve_tcp(&mut env, "127.0.0.1:0", |addr| tx.send(addr.to_string()).unwrap()).unwrap()
    });
    (rx.recv().unwrap(), handle)
}

#[test]
fn remote_env_matches_builtin_bitwise() {
    let (addr, server) = serve_in_background(Task::Dynamic, ActionSpec::continuous());
    let mut remote = RemoteEnv::connect(&addr, Duration::from_secs(30)).unwrap();
    let mut local = builtin(Task::Dynamic, ActionSpec::continuous());
    assert_eq!(remote.spec(), local.spec());
    let w = window();
    assert_eq!(remote.reset(&w).unwrap(), local.reset(&w).unwrap());
    for i in 0..66 {
        let a = Action::Continuous(0.5 * ((i as f64) * 0.7).sin());
        let (r, l) = (remote.step(a).unwrap(), local.step(a).unwrap());
        assert!(r.features.iter().zip(&l.features).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(r.cooling_w.to_bits(), l.cooling_w.to_bits());
        assert_eq!(r, l);
    }
    assert!(matches!(remote.step(Action::Continuous(0.0)), Err(EnvError::NotReset)));
    drop(remote);
    assert_eq!(server.join().unwrap(), SessionEnd::Closed);
}

#[test]
fn remote_bad_action_surfaces_and_episode_continues() {
    let (addr, server) = serve_in_background(Task::Constant, ActionSpec::continuous());
    let mut remote = RemoteEnv::connect(&addr, Duration::from_secs(30)).unwrap();
    remote.reset(&window()).unwrap();
    assert!(matches!(remote.step(Action::Continuous(0.7)), Err(EnvError::BadAction(_))));
    assert!(remote.step(Action::Continuous(0.1)).is_ok());
    drop(remote);
    server.join().unwrap();
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut w = stream.try_clone().unwrap();
        let hello = Message::Hello {
            features: vec!["x".into()],
            action: ActionSpec::discrete(),
        };
        writeln!(w, "{}", encode(&hello)).unwrap();
        // Read requests but never answer them.
        let mut lines = BufReader::new(stream).lines();
        while let Some(Ok(_)) = lines.next() {}
    });
    let mut remote = RemoteEnv::connect(&addr, Duration::from_millis(300)).unwrap();
    let started = Instant::now();
    let err = remote.reset(&window()).unwrap_err();
    assert!(matches!(err, EnvError::Timeout(_)), "{err}");
    assert!(started.elapsed() >= Duration::from_millis(300));
    drop(remote);
    server.join().unwrap();
}

#[test]
fn dropped_connection_is_reported() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = std::thread::spawn(move || {
        let (mut stream, _): (TcpStream, _) = listener.accept().unwrap();
        let hello = Message::Hello {
            features: vec!["x".into()],
            action: ActionSpec::discrete(),
        };
        writeln!(stream, "{}", encode(&hello)).unwrap();
    });
    let mut remote = RemoteEnv::connect(&addr, Duration::from_secs(5)).unwrap();
    server.join().unwrap();
    let err = remote.reset(&window()).unwrap_err();
    assert!(matches!(err, EnvError::Closed | EnvError::Io(_)), "{err}");
}
