//! A dedicated thread that owns the [`Controller`]; everything else talks
//! to it through a cloneable [`ControlHandle`].

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use tokio::sync::oneshot;

use super::{Controller, ControllerError, FlowIntent, Result};
use crate::netsim::FlowId;
use crate::telemetry::TelemetryStore;

type Job = Box<dyn FnOnce(&mut Controller) + Send>;

enum Command {
    Run(Job),
    Shutdown,
}

#[derive(Clone)]
pub struct ControlHandle {
    tx: mpsc::Sender<Command>,
    store: Arc<TelemetryStore>,
}

impl std::fmt::Debug for ControlHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlHandle").finish_non_exhaustive()
    }
}

impl ControlHandle {
    /// Queues `f` on the control thread. Jobs run one at a time in
    /// submission order, so no two mutations interleave.
    pub fn submit<R, F>(&self, f: F) -> Result<oneshot::Receiver<R>>
    where
        R: Send + 'static,
        F: FnOnce(&mut Controller) -> R + Send + 'static,
    {
        let (tx, rx) = oneshot::channel();
        let job: Job = Box::new(move |c| {
            let _ = tx.send(f(c));
        });
        self.tx
            .send(Command::Run(job))
            .map_err(|_| ControllerError::Stopped)?;
        Ok(rx)
    }

    /// Runs `f` and waits for its result. Must not be called from inside
    /// an async runtime; use [`ControlHandle::call`] there.
    pub fn call_blocking<R, F>(&self, f: F) -> Result<R>
    where
        R: Send + 'static,
        F: FnOnce(&mut Controller) -> R + Send + 'static,
    {
        self.submit(f)?.blocking_recv().map_err(|_| ControllerError::Stopped)
    }

    pub async fn call<R, F>(&self, f: F) -> Result<R>
    where
        R: Send + 'static,
        F: FnOnce(&mut Controller) -> R + Send + 'static,
    {
        self.submit(f)?.await.map_err(|_| ControllerError::Stopped)
    }

    /// Read-only access; the closure only sees `&Controller`.
    pub async fn read<R, F>(&self, f: F) -> Result<R>
    where
        R: Send + 'static,
        F: FnOnce(&Controller) -> R + Send + 'static,
    {
        self.call(move |c| f(c)).await
    }

    /// Registers the flow and replies with its id right away; the
    /// allocation pipeline runs next on the control thread and reports
    /// through the bus.
    pub fn request_flow(&self, intent: FlowIntent) -> Result<oneshot::Receiver<Result<FlowId>>> {
        let (tx, rx) = oneshot::channel();
        let job: Job = Box::new(move |c| match c.request_flow(intent) {
            Ok(id) => {
                let _ = tx.send(Ok(id));
                // failures are recorded on the flow and published
                let _ = c.allocate_flow(id);
            }
            Err(e) => {
                let _ = tx.send(Err(e));
            }
        });
        self.tx
            .send(Command::Run(job))
            .map_err(|_| ControllerError::Stopped)?;
        Ok(rx)
    }

    /// Telemetry can be read without going through the control thread.
    pub fn store(&self) -> &Arc<TelemetryStore> {
        &self.store
    }
}

pub struct ControlLoop {
    handle: ControlHandle,
    thread: Option<JoinHandle<Controller>>,
    ticker: Option<(Arc<AtomicBool>, JoinHandle<()>)>,
}

impl ControlLoop {
    pub fn spawn(controller: Controller) -> Self {
        let store = controller.store().clone();
        let (tx, rx) = mpsc::channel::<Command>();
        let thread = std::thread::Builder::new()
            .name("control".into())
            .spawn(move || {
                let mut c = controller;
                while let Ok(cmd) = rx.recv() {
                    match cmd {
                        Command::Run(job) => job(&mut c),
                        Command::Shutdown => break,
                    }
                }
                c
            })
            .expect("spawn control thread");
        ControlLoop {
            handle: ControlHandle { tx, store },
            thread: Some(thread),
            ticker: None,
        }
    }

    pub fn handle(&self) -> ControlHandle {
        self.handle.clone()
    }

    /// Queues a telemetry tick every `period` of wall-clock time.
    pub fn start_ticker(&mut self, period: Duration) {
        if self.ticker.is_some() {
            return;
        }
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let handle = self.handle.clone();
        let thread = std::thread::spawn(move || {
            while !flag.load(Ordering::Relaxed) {
                std::thread::sleep(period);
                let tick = handle.submit(|c| {
                    let _ = c.telemetry_tick();
                });
                if tick.is_err() {
                    break;
                }
            }
        });
        self.ticker = Some((stop, thread));
    }

    /// Stops the ticker and the control thread, returning the controller
    /// once queued jobs have run.
    pub fn shutdown(mut self) -> Controller {
        self.stop()
    }

    fn stop(&mut self) -> Controller {
        if let Some((stop, thread)) = self.ticker.take() {
            stop.store(true, Ordering::Relaxed);
            let _ = thread.join();
        }
        let _ = self.handle.tx.send(Command::Shutdown);
        self.thread
            .take()
            .expect("control thread joined once")
            .join()
            .expect("control thread panicked")
    }
}

impl Drop for ControlLoop {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop();
        }
    }
}
