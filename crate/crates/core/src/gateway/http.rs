use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::{Collector, GatewayOptions, InferenceRequest, InferenceResponse};
use crate::error::{Error, Result};

/// POSTs each request to `url` from up to `max_in_flight` workers.
pub(super) fn run(
    url: &str,
    requests: &[InferenceRequest],
    opts: &GatewayOptions,
) -> Result<Vec<(String, bool)>> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .http_status_as_error(true)
        .build()
        .into();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let collector = Mutex::new(Collector::new(requests));
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let workers = opts.max_in_flight.clamp(1, requests.len().max(1));

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(request) = requests.get(i) else {
                    return;
                };
                let outcome = match post(&agent, url, request) {
                    Ok(Some(response)) if response.id != request.id => {
                        Err(Error::ProtocolViolation(format!(
                            "response id {:?} for request {:?}",
                            response.id, request.id
                        )))
                    }
                    Ok(Some(response)) => collector.lock().unwrap().accept(response),
                    // timed out: left unanswered
                    Ok(None) => Ok(()),
                    Err(e) => Err(e),
                };
                if let Err(e) = outcome {
                    stop.store(true, Ordering::Relaxed);
                    first_error.lock().unwrap().get_or_insert(e);
                    return;
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(collector.into_inner().unwrap().finish())
}

fn post(
    agent: &ureq::Agent,
    url: &str,
    request: &InferenceRequest,
) -> Result<Option<InferenceResponse>> {
    let response = match agent.post(url).send_json(request) {
        Ok(r) => r,
        Err(ureq::Error::Timeout(_)) => return Ok(None),
        Err(ureq::Error::StatusCode(code)) => {
            return Err(Error::ProtocolViolation(format!(
                "HTTP status {code} for request {:?}",
                request.id
            )))
        }
        Err(e) => return Err(Error::BackendUnavailable(format!("{url}: {e}"))),
    };
    match response.into_body().read_json::<InferenceResponse>() {
        Ok(r) => Ok(Some(r)),
        Err(ureq::Error::Timeout(_)) => Ok(None),
        Err(e) => Err(Error::ProtocolViolation(format!(
            "bad response record for {:?}: {e}",
            request.id
        ))),
    }
}
