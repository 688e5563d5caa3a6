//! Live teleoperation service: the filtered loop runs on one thread with the
//! connected client as the external controller; a second thread owns the
//! WebSocket and moves messages in and out.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use nalgebra::DVector;
use tungstenite::{Message, WebSocket};

use ps2f_core::config::Ps2fConfig;
use ps2f_core::nominal::NominalSolution;
use ps2f_core::filter::{sample_s2_set, telemetry_boundary};
use ps2f_core::par::Execution;
use ps2f_core::schedule::ModeSchedule;
use ps2f_core::sim::{ClosedLoopLog, LiveCommand, Session, SimOptions};

use crate::wire::{lines, parse_inbound, ErrorFrame, Inbound, TelemetryFrame};

/// Poll interval of the I/O thread.
const IO_POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Wall-clock period of one control step.
    pub tick: Duration,
    /// Outbound frames kept for a slow client; the oldest are dropped first.
    pub queue_capacity: usize,
    /// Lattice resolution of the boundary sent with the frames; zero disables it.
    /// Sampling runs on its own thread, so a frame may carry an older boundary.
    pub boundary_resolution: usize,
    /// Stop after this many steps.
    pub max_ticks: Option<usize>,
    /// Abort on a failed runtime check instead of logging and continuing.
    pub assertions: bool,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            tick: Duration::from_millis(200),
            queue_capacity: 64,
            boundary_resolution: 11,
            max_ticks: None,
            assertions: false,
        }
    }
}

/// Bounded outbound queue that drops the oldest line when full.
#[derive(Debug)]
pub struct FrameQueue {
    inner: Mutex<QueueState>,
    ready: Condvar,
}

#[derive(Debug, Default)]
struct QueueState {
    lines: VecDeque<String>,
    capacity: usize,
    dropped: u64,
}

impl FrameQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: Mutex::new(QueueState { capacity: capacity.max(1), ..Default::default() }),
            ready: Condvar::new(),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, QueueState> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, line: String) {
        let mut q = self.lock();
        if q.lines.len() == q.capacity {
            q.lines.pop_front();
            q.dropped += 1;
        }
        q.lines.push_back(line);
        self.ready.notify_all();
    }

    /// Takes everything queued, waiting up to `wait` for the first line.
    pub fn drain(&self, wait: Duration) -> Vec<String> {
        let q = self.lock();
        let (mut q, _) = self.ready.wait_timeout_while(q, wait, |q| q.lines.is_empty()).unwrap_or_else(|e| e.into_inner());
        q.lines.drain(..).collect()
    }

    pub fn clear(&self) {
        self.lock().lines.clear();
    }

    pub fn dropped(&self) -> u64 {
        self.lock().dropped
    }

    pub fn len(&self) -> usize {
        self.lock().lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// State handed to the boundary worker.
struct BoundaryRequest {
    k: usize,
    x: DVector<f64>,
    nominal: NominalSolution,
    a: f64,
    m: usize,
}

/// Samples the input-set boundary off the control thread. Requests are
/// last-value-wins; the loop never waits for a result.
struct BoundaryWorker {
    request: Arc<(Mutex<Option<BoundaryRequest>>, Condvar)>,
    latest: Arc<Mutex<Option<(usize, Vec<[f64; 2]>)>>>,
    busy: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    stop: Arc<AtomicBool>,
}

impl BoundaryWorker {
    fn spawn(cfg: Ps2fConfig, resolution: usize) -> std::io::Result<Self> {
        let request: Arc<(Mutex<Option<BoundaryRequest>>, Condvar)> = Arc::default();
        let latest: Arc<Mutex<Option<(usize, Vec<[f64; 2]>)>>> = Arc::default();
        let busy = Arc::new(AtomicBool::new(false));
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (request, latest, busy, stop) = (request.clone(), latest.clone(), busy.clone(), stop.clone());
            thread::Builder::new().name("ps2f-boundary".into()).spawn(move || loop {
                let job = {
                    let (slot, ready) = &*request;
                    let guard = slot.lock().unwrap_or_else(|e| e.into_inner());
                    let mut guard = ready
                        .wait_while(guard, |r| r.is_none() && !stop.load(Ordering::SeqCst))
                        .unwrap_or_else(|e| e.into_inner());
                    if stop.load(Ordering::SeqCst) {
                        return;
                    }
                    guard.take()
                };
                if let Some(job) = job {
                    let grid = sample_s2_set(&cfg, &job.x, &job.nominal, job.a, job.m, resolution, Execution::Parallel);
                    if let Ok(grid) = grid {
                        *latest.lock().unwrap_or_else(|e| e.into_inner()) = Some((job.k, telemetry_boundary(&grid)));
                    }
                }
                busy.store(false, Ordering::SeqCst);
            })?
        };
        Ok(Self { request, latest, busy, handle: Some(handle), stop })
    }

    /// Queues `job` unless a sample is still being computed.
    fn offer(&self, job: impl FnOnce() -> BoundaryRequest) {
        if self.busy.swap(true, Ordering::SeqCst) {
            return;
        }
        let (slot, ready) = &*self.request;
        *slot.lock().unwrap_or_else(|e| e.into_inner()) = Some(job());
        ready.notify_one();
    }

    fn latest(&self) -> Option<(usize, Vec<[f64; 2]>)> {
        self.latest.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Drop for BoundaryWorker {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.request.1.notify_all();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// Requests from the I/O thread to the control loop.
#[derive(Debug, Clone, PartialEq)]
enum Control {
    SetA(f64),
    Pause,
    Reset(Vec<f64>),
    Connected(SocketAddr),
    Lost,
}

/// A running service.
pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    control: Option<JoinHandle<ClosedLoopLog>>,
    io: Option<JoinHandle<()>>,
    queue: Arc<FrameQueue>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn queue(&self) -> &FrameQueue {
        &self.queue
    }

    pub fn is_finished(&self) -> bool {
        self.control.as_ref().map_or(true, |h| h.is_finished())
    }

    /// Stops both threads and returns the session log.
    pub fn shutdown(mut self) -> ClosedLoopLog {
        self.stop.store(true, Ordering::SeqCst);
        self.finish()
    }

    /// Waits for the loop to reach its tick limit, then stops the I/O thread.
    pub fn join(mut self) -> ClosedLoopLog {
        let log = self.control.take().map(|h| h.join().expect("control loop panicked"));
        self.stop.store(true, Ordering::SeqCst);
        if let Some(io) = self.io.take() {
            let _ = io.join();
        }
        log.unwrap_or_else(|| ClosedLoopLog::new(0, 0))
    }

    fn finish(&mut self) -> ClosedLoopLog {
        let log = self.control.take().map(|h| h.join().expect("control loop panicked"));
        if let Some(io) = self.io.take() {
            let _ = io.join();
        }
        log.unwrap_or_else(|| ClosedLoopLog::new(0, 0))
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if self.control.is_some() || self.io.is_some() {
            self.finish();
        }
    }
}

/// Starts the loop from `x0` and serves one client at a time on `listener`.
pub fn start(
    listener: TcpListener,
    cfg: Ps2fConfig,
    schedule: ModeSchedule,
    x0: DVector<f64>,
    opts: ServiceOptions,
) -> Result<ServiceHandle> {
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let dims = Dims { input: cfg.input_dim(), state: cfg.state_dim() };
    let session = Session::new(cfg, x0, schedule, SimOptions { assertions: opts.assertions, record_timings: true })
        .context("starting the session")?;
    let stop = Arc::new(AtomicBool::new(false));
    let queue = Arc::new(FrameQueue::new(opts.queue_capacity));
    let live = LiveCommand::new();
    let (tx, rx) = mpsc::channel();

    let control = {
        let (stop, queue, live) = (stop.clone(), queue.clone(), live.clone());
        thread::Builder::new().name("ps2f-control".into()).spawn(move || control_loop(session, opts, stop, queue, live, rx))?
    };
    let io = {
        let (stop, queue) = (stop.clone(), queue.clone());
        thread::Builder::new().name("ps2f-io".into()).spawn(move || io_loop(listener, dims, stop, queue, live, tx))?
    };
    Ok(ServiceHandle { addr, stop, control: Some(control), io: Some(io), queue })
}

fn control_loop(
    mut session: Session,
    opts: ServiceOptions,
    stop: Arc<AtomicBool>,
    queue: Arc<FrameQueue>,
    live: LiveCommand,
    rx: Receiver<Control>,
) -> ClosedLoopLog {
    let (input_dim, state_dim) = (session.config().input_dim(), session.config().state_dim());
    let a_range = session.schedule().a_range();
    let boundary = match opts.boundary_resolution {
        r if r >= 2 => BoundaryWorker::spawn(session.config().clone(), r).ok(),
        _ => None,
    };
    let started = Instant::now();
    let mut deadline = started;
    let mut paused = false;
    let mut ticks = 0usize;
    while !stop.load(Ordering::SeqCst) && opts.max_ticks.map_or(true, |max| ticks < max) {
        while let Ok(msg) = rx.try_recv() {
            match msg {
                Control::SetA(a) => {
                    let clamped = a.clamp(a_range.0, a_range.1);
                    session.set_a_override(Some(clamped));
                    session.note(format!("set_a {a} applied as {clamped}"));
                }
                Control::Pause => {
                    paused = !paused;
                    session.note(if paused { "paused" } else { "resumed" });
                }
                Control::Reset(x) => {
                    if x.len() != state_dim {
                        continue;
                    }
                    if let Err(e) = session.reset(DVector::from_vec(x)) {
                        session.note(format!("reset rejected: {e}"));
                        queue.push(ErrorFrame::new(format!("reset rejected: {e}")).to_line());
                    }
                }
                Control::Connected(peer) => session.note(format!("client {peer} connected")),
                Control::Lost => session.note("client lost; command set to zero"),
            }
        }

        if !paused {
            if let Some(worker) = boundary.as_ref().filter(|_| session.nominal().is_optimal()) {
                worker.offer(|| BoundaryRequest {
                    k: session.k(),
                    x: session.state().clone(),
                    nominal: session.nominal().clone(),
                    a: session.current_a(),
                    m: session.current_m(),
                });
            }
            match session.step_with(live.get(input_dim)) {
                Ok(rec) => {
                    let mut frame = TelemetryFrame::from_record(&rec, started.elapsed().as_secs_f64(), Vec::new());
                    if let Some((k, polyline)) = boundary.as_ref().and_then(BoundaryWorker::latest) {
                        frame.s2_boundary = polyline;
                        frame.s2_boundary_k = Some(k);
                    }
                    queue.push(frame.to_line());
                }
                Err(e) => {
                    session.note(format!("step failed: {e}"));
                    queue.push(ErrorFrame::new(format!("step failed: {e}")).to_line());
                    if opts.assertions {
                        break;
                    }
                }
            }
            ticks += 1;
        }

        // late steps are not made up; the next one starts a full tick later
        deadline += opts.tick;
        let now = Instant::now();
        if deadline > now {
            sleep_until(deadline, &stop);
        } else {
            deadline = now;
        }
    }
    session.into_log()
}

fn sleep_until(deadline: Instant, stop: &AtomicBool) {
    while !stop.load(Ordering::SeqCst) {
        let now = Instant::now();
        if now >= deadline {
            return;
        }
        thread::sleep((deadline - now).min(Duration::from_millis(20)));
    }
}

fn io_loop(listener: TcpListener, dims: Dims, stop: Arc<AtomicBool>, queue: Arc<FrameQueue>, live: LiveCommand, tx: Sender<Control>) {
    while !stop.load(Ordering::SeqCst) {
        let (stream, peer) = match listener.accept() {
            Ok(conn) => conn,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                // frames produced with nobody listening are discarded
                queue.clear();
                thread::sleep(IO_POLL);
                continue;
            }
            Err(_) => {
                thread::sleep(IO_POLL);
                continue;
            }
        };
        if let Some(ws) = handshake(stream) {
            queue.clear();
            let _ = tx.send(Control::Connected(peer));
            serve_client(ws, &dims, &stop, &queue, &live, &tx);
        }
        live.clear();
        let _ = tx.send(Control::Lost);
    }
}

fn handshake(stream: TcpStream) -> Option<WebSocket<TcpStream>> {
    stream.set_nonblocking(false).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    let ws = tungstenite::accept(stream).ok()?;
    ws.get_ref().set_read_timeout(Some(IO_POLL)).ok()?;
    ws.get_ref().set_nodelay(true).ok()?;
    Some(ws)
}

fn serve_client(mut ws: WebSocket<TcpStream>, dims: &Dims, stop: &AtomicBool, queue: &FrameQueue, live: &LiveCommand, tx: &Sender<Control>) {
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in lines(&text) {
                    match parse_inbound(line, dims.input, dims.state) {
                        Ok(Inbound::Cmd { u }) => live.set(DVector::from_vec(u)),
                        Ok(Inbound::SetA { a }) => {
                            let _ = tx.send(Control::SetA(a));
                        }
                        Ok(Inbound::Pause) => {
                            let _ = tx.send(Control::Pause);
                        }
                        Ok(Inbound::Reset { x }) => {
                            let _ = tx.send(Control::Reset(x));
                        }
                        Err(message) => {
                            if ws.send(Message::Text(ErrorFrame::new(message).to_line())).is_err() {
                                return;
                            }
                        }
                    }
                }
            }
            Ok(Message::Binary(_)) => {
                if ws.send(Message::Text(ErrorFrame::new("binary messages are not supported").to_line())).is_err() {
                    return;
                }
            }
            Ok(Message::Close(_)) => {
                let _ = ws.flush();
                return;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
        for line in queue.drain(Duration::ZERO) {
            if ws.send(Message::Text(line)).is_err() {
                return;
            }
        }
    }
    for line in queue.drain(Duration::ZERO) {
        if ws.send(Message::Text(line)).is_err() {
            return;
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
}

#[derive(Debug, Clone, Copy)]
struct Dims {
    input: usize,
    state: usize,
}
