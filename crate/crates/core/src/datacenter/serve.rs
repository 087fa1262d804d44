//! Live gateway plumbing: a writer thread ticks the pipeline and publishes
//! snapshots; line-protocol sessions (stdin or TCP) read whichever snapshot
//! is current. Readers never block the writer.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread;
use std::time::Duration;

use crate::datacenter::pipeline::{Pipeline, PipelineError};
use crate::datacenter::store::Snapshot;
use crate::gateway::handle_protocol_line;

pub type SharedSnapshot = Arc<RwLock<Arc<Snapshot>>>;

pub fn shared_snapshot(snapshot: Snapshot) -> SharedSnapshot {
    Arc::new(RwLock::new(Arc::new(snapshot)))
}

pub fn publish(shared: &SharedSnapshot, snapshot: Snapshot) {
    *shared.write().expect("snapshot lock") = Arc::new(snapshot);
}

pub fn current(shared: &SharedSnapshot) -> Arc<Snapshot> {
    Arc::clone(&shared.read().expect("snapshot lock"))
}

/// Tick the pipeline once per `tick_interval` of wall time, publishing a
/// snapshot after every tick, until shutdown. Returns the pipeline so the
/// caller can persist its final state.
pub fn run_writer(
    mut pipeline: Pipeline,
    shared: SharedSnapshot,
    shutdown: Arc<AtomicBool>,
    tick_interval: Duration,
) -> Result<Pipeline, PipelineError> {
    while !shutdown.load(Ordering::Relaxed) {
        pipeline.tick()?;
        publish(&shared, pipeline.snapshot());
        if !tick_interval.is_zero() {
            thread::sleep(tick_interval);
        }
    }
    Ok(pipeline)
}

/// Serve one line-protocol session: one request line in, one reply line out.
pub fn run_session<R: BufRead, W: Write>(
    input: R,
    output: &mut W,
    shared: &SharedSnapshot,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let snapshot = current(shared);
        let reply = handle_protocol_line(&line, &snapshot, None);
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

/// Accept TCP sessions until shutdown. The listener polls so the shutdown
/// flag is honored promptly.
pub fn serve_tcp(
    listener: TcpListener,
    shared: SharedSnapshot,
    shutdown: Arc<AtomicBool>,
) -> std::io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut sessions = Vec::new();
    while !shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _peer)) => {
                stream.set_nonblocking(false)?;
                let shared = Arc::clone(&shared);
                sessions.push(thread::spawn(move || -> std::io::Result<()> {
                    let reader = BufReader::new(stream.try_clone()?);
                    let mut writer = stream;
                    run_session(reader, &mut writer, &shared)
                }));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(10));
            }
            Err(e) => return Err(e),
        }
    }
    for session in sessions {
        let _ = session.join();
    }
    Ok(())
}
