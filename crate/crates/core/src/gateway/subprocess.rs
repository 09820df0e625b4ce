use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;

use super::{wire, Collector, GatewayOptions, InferenceRequest};
use crate::error::{Error, Result};

enum Event {
    Line(String),
    Eof,
    Failed(std::io::Error),
}

/// Streams requests to a child process over stdin and collects its stdout
/// responses by id. At most `max_in_flight` requests are unanswered at any
/// time.
pub(super) fn run(
    argv: &[String],
    requests: &[InferenceRequest],
    opts: &GatewayOptions,
) -> Result<Vec<(String, bool)>> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::Config("empty command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| Error::BackendUnavailable(format!("{program}: {e}")))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");

    let lines: Vec<String> = requests
        .iter()
        .map(|r| serde_json::to_string(r).expect("request serializes"))
        .collect();
    let window = opts.max_in_flight.max(1);
    let (slot_tx, slot_rx) = mpsc::sync_channel::<()>(window);
    let (event_tx, event_rx) = mpsc::channel::<Event>();

    let writer = thread::spawn(move || {
        for line in lines {
            // blocks while the window is full
            if slot_tx.send(()).is_err() {
                return;
            }
            if writeln!(stdin, "{line}")
                .and_then(|_| stdin.flush())
                .is_err()
            {
                return;
            }
        }
    });
    let reader = thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            match line {
                Ok(line) => {
                    let _ = slot_rx.try_recv();
                    if event_tx.send(Event::Line(line)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    let _ = event_tx.send(Event::Failed(e));
                    return;
                }
            }
        }
        let _ = event_tx.send(Event::Eof);
    });

    let mut collector = Collector::new(requests);
    let result = loop {
        if collector.received() == requests.len() {
            break Ok(());
        }
        match event_rx.recv_timeout(opts.timeout) {
            Ok(Event::Line(line)) if line.trim().is_empty() => {}
            Ok(Event::Line(line)) => {
                if let Err(e) = wire::check_response_line(&line).and_then(|r| collector.accept(r)) {
                    break Err(e);
                }
            }
            Ok(Event::Eof) => {
                break Err(Error::ProtocolViolation(format!(
                    "backend closed its output with {} of {} responses missing",
                    requests.len() - collector.received(),
                    requests.len()
                )))
            }
            Ok(Event::Failed(e)) => {
                break Err(Error::BackendUnavailable(format!(
                    "reading backend output: {e}"
                )))
            }
            // the rest are recorded as timed out
            Err(RecvTimeoutError::Timeout) => break Ok(()),
            Err(RecvTimeoutError::Disconnected) => {
                break Err(Error::BackendUnavailable("backend reader stopped".into()))
            }
        }
    };
    let finished = collector.received() == requests.len();
    // a killed backend's own children may keep the pipes open, so its I/O
    // threads are left to wind down on their own
    if shutdown(&mut child, finished) {
        let _ = writer.join();
        let _ = reader.join();
    }
    result.map(|()| collector.finish())
}

/// True when the child exited by itself.
fn shutdown(child: &mut Child, graceful: bool) -> bool {
    // stdin is closed once every request is written; give the child a moment
    // to exit on its own before killing it
    if graceful {
        for _ in 0..50 {
            if matches!(child.try_wait(), Ok(Some(_))) {
                return true;
            }
            thread::sleep(std::time::Duration::from_millis(10));
        }
    }
    let _ = child.kill();
    let _ = child.wait();
    false
}
