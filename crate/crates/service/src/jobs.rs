//! Plot and scan jobs executed against simulated devices.
//!
//! Every device owns a worker thread and a FIFO queue, so jobs on one
//! device run strictly one after another while status polls read the
//! shared job table.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use mixel_core::io::{pattern_value, Metadata};
use mixel_core::pattern::PixelGrid;
use mixel_core::plotter::{parse_reading, HallSensorModel, PlotterSession, VirtualSheet};
use mixel_core::protocol::{parse_line, ProtocolLine};
use mixel_core::toolpath::{
    compile_plot, compile_scan, emit_program, estimate_job, PowerModel, DEFAULT_FEED_MM_PER_MIN,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{ServiceError, ServiceResult};

/// Readings above this are North, below its negation South, otherwise demagnetized.
pub const SCAN_THRESHOLD: f64 = 0.5;

pub fn classify_reading(v: f64) -> f64 {
    if v > SCAN_THRESHOLD {
        1.0
    } else if v < -SCAN_THRESHOLD {
        -1.0
    } else {
        0.0
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Plot,
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Job {
    pub id: u64,
    pub device: String,
    pub kind: JobKind,
    pub state: JobState,
    pub progress: Progress,
    /// Plot report or scanned pattern document.
    pub result: Option<Value>,
    pub error: Option<String>,
    pub created_ms: u64,
    pub started_ms: Option<u64>,
    pub finished_ms: Option<u64>,
    pub expires_ms: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct DeviceConfig {
    pub rows: usize,
    pub cols: usize,
    pub origin: (f64, f64),
    pub sensor: HallSensorModel,
    pub seed: u64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            origin: (0.0, 0.0),
            sensor: HallSensorModel::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub feed: f64,
    pub power: PowerModel,
    /// Finished jobs are forgotten this long after they end.
    pub retention: Duration,
    /// Artificial pause after every pixel so progress can be observed.
    pub step_delay: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            feed: DEFAULT_FEED_MM_PER_MIN,
            power: PowerModel::default(),
            retention: Duration::from_secs(3600),
            step_delay: Duration::ZERO,
        }
    }
}

enum Work {
    Plot(PixelGrid),
    Scan { rows: usize, cols: usize },
}

struct Device {
    queue: Sender<(u64, Work)>,
    session: Arc<Mutex<PlotterSession>>,
    /// Every line sent to the device, tagged with its job.
    log: Arc<Mutex<Vec<(u64, String)>>>,
    dims: (usize, usize),
}

struct Shared {
    jobs: Mutex<BTreeMap<u64, Job>>,
    config: ServiceConfig,
}

impl Shared {
    fn jobs(&self) -> MutexGuard<'_, BTreeMap<u64, Job>> {
        self.jobs.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn update(&self, id: u64, f: impl FnOnce(&mut Job)) {
        if let Some(job) = self.jobs().get_mut(&id) {
            f(job);
        }
    }

    fn purge_expired(&self) {
        let now = now_ms();
        self.jobs()
            .retain(|_, j| j.expires_ms.is_none_or(|t| t > now));
    }
}

#[derive(Clone)]
pub struct JobService {
    shared: Arc<Shared>,
    devices: Arc<Mutex<HashMap<String, Device>>>,
    next_id: Arc<AtomicU64>,
}

impl JobService {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            shared: Arc::new(Shared {
                jobs: Mutex::new(BTreeMap::new()),
                config,
            }),
            devices: Arc::new(Mutex::new(HashMap::new())),
            next_id: Arc::new(AtomicU64::new(1)),
        }
    }

    fn devices(&self) -> MutexGuard<'_, HashMap<String, Device>> {
        self.devices.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Registers a device and starts its worker.
    pub fn add_device(&self, id: &str, config: DeviceConfig) -> ServiceResult<()> {
        let sheet = VirtualSheet::new(config.rows, config.cols, config.origin)?;
        let session = Arc::new(Mutex::new(PlotterSession::new(
            sheet,
            config.sensor,
            config.seed,
        )));
        let log = Arc::new(Mutex::new(Vec::new()));
        let (tx, rx) = mpsc::channel();
        let worker = Worker {
            shared: Arc::clone(&self.shared),
            session: Arc::clone(&session),
            log: Arc::clone(&log),
            origin: config.origin,
        };
        thread::Builder::new()
            .name(format!("device-{id}"))
            .spawn(move || worker.run(rx))
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.devices().insert(
            id.to_string(),
            Device {
                queue: tx,
                session,
                log,
                dims: (config.rows, config.cols),
            },
        );
        Ok(())
    }

    pub fn device_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.devices().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn enqueue(&self, device: &str, kind: JobKind, total: usize, work: Work) -> ServiceResult<Job> {
        self.shared.purge_expired();
        let devices = self.devices();
        let dev = devices
            .get(device)
            .ok_or_else(|| ServiceError::NotFound(format!("device {device}")))?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let job = Job {
            id,
            device: device.to_string(),
            kind,
            state: JobState::Queued,
            progress: Progress { done: 0, total },
            result: None,
            error: None,
            created_ms: now_ms(),
            started_ms: None,
            finished_ms: None,
            expires_ms: None,
        };
        self.shared.jobs().insert(id, job.clone());
        dev.queue
            .send((id, work))
            .map_err(|_| ServiceError::Internal(format!("device {device} worker has stopped")))?;
        Ok(job)
    }

    pub fn submit_plot(&self, device: &str, grid: PixelGrid) -> ServiceResult<Job> {
        let dims = self.device_dims(device)?;
        if grid.rows() > dims.0 || grid.cols() > dims.1 {
            return Err(ServiceError::Core(mixel_core::Error::OutOfRange(format!(
                "{}x{} pattern does not fit the {}x{} sheet",
                grid.rows(),
                grid.cols(),
                dims.0,
                dims.1
            ))));
        }
        let total = grid.masked_count();
        self.enqueue(device, JobKind::Plot, total, Work::Plot(grid))
    }

    pub fn submit_scan(&self, device: &str, rows: usize, cols: usize) -> ServiceResult<Job> {
        if rows == 0 || cols == 0 {
            return Err(ServiceError::BadRequest(format!(
                "scan size must be at least 1x1, got {rows}x{cols}"
            )));
        }
        let dims = self.device_dims(device)?;
        if rows > dims.0 || cols > dims.1 {
            return Err(ServiceError::Core(mixel_core::Error::OutOfRange(format!(
                "{rows}x{cols} scan exceeds the {}x{} sheet",
                dims.0, dims.1
            ))));
        }
        self.enqueue(
            device,
            JobKind::Scan,
            rows * cols,
            Work::Scan { rows, cols },
        )
    }

    fn device_dims(&self, device: &str) -> ServiceResult<(usize, usize)> {
        self.devices()
            .get(device)
            .map(|d| d.dims)
            .ok_or_else(|| ServiceError::NotFound(format!("device {device}")))
    }

    pub fn job_status(&self, id: u64) -> ServiceResult<Job> {
        self.shared.purge_expired();
        self.shared
            .jobs()
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("job {id}")))
    }

    pub fn jobs(&self) -> Vec<Job> {
        self.shared.jobs().values().cloned().collect()
    }

    /// Blocks until the job is terminal or `timeout` elapses.
    pub fn wait(&self, id: u64, timeout: Duration) -> ServiceResult<Job> {
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let job = self.job_status(id)?;
            if job.state.is_terminal() {
                return Ok(job);
            }
            if std::time::Instant::now() >= deadline {
                return Err(ServiceError::Timeout(format!(
                    "job {id} still {:?}",
                    job.state
                )));
            }
            thread::sleep(Duration::from_millis(2));
        }
    }

    /// Noise-free sheet state of a device.
    pub fn sheet(&self, device: &str) -> ServiceResult<PixelGrid> {
        let session = self
            .devices()
            .get(device)
            .map(|d| Arc::clone(&d.session))
            .ok_or_else(|| ServiceError::NotFound(format!("device {device}")))?;
        let snapshot = session
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .snapshot_sheet();
        Ok(snapshot)
    }

    /// Lines sent to a device so far, with the job that sent each.
    pub fn command_log(&self, device: &str) -> ServiceResult<Vec<(u64, String)>> {
        let devices = self.devices();
        let dev = devices
            .get(device)
            .ok_or_else(|| ServiceError::NotFound(format!("device {device}")))?;
        let log = dev.log.lock().unwrap_or_else(|p| p.into_inner());
        Ok(log.clone())
    }
}

struct Worker {
    shared: Arc<Shared>,
    session: Arc<Mutex<PlotterSession>>,
    log: Arc<Mutex<Vec<(u64, String)>>>,
    origin: (f64, f64),
}

impl Worker {
    fn run(self, rx: Receiver<(u64, Work)>) {
        for (id, work) in rx {
            self.shared.update(id, |j| {
                j.state = JobState::Running;
                j.started_ms = Some(now_ms());
            });
            let outcome = match work {
                Work::Plot(grid) => self.plot(id, &grid),
                Work::Scan { rows, cols } => self.scan(id, rows, cols),
            };
            let retention = self.shared.config.retention.as_millis() as u64;
            self.shared.update(id, |j| {
                let t = now_ms();
                match outcome {
                    Ok(result) => {
                        j.state = JobState::Done;
                        j.result = Some(result);
                    }
                    Err(e) => {
                        warn!("job {id} failed: {e}");
                        j.state = JobState::Failed;
                        j.error = Some(e);
                    }
                }
                j.finished_ms = Some(t);
                j.expires_ms = Some(t + retention);
            });
            info!("job {id} finished");
        }
    }

    fn send(&self, id: u64, line: &str) -> Result<String, String> {
        self.log
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push((id, line.to_string()));
        let reply = self
            .session
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .handle_command(line);
        if reply.starts_with("err") {
            return Err(format!("device rejected {line:?}: {reply}"));
        }
        Ok(reply)
    }

    fn step(&self, id: u64) {
        self.shared.update(id, |j| j.progress.done += 1);
        let delay = self.shared.config.step_delay;
        if !delay.is_zero() {
            thread::sleep(delay);
        }
    }

    fn plot(&self, id: u64, grid: &PixelGrid) -> Result<Value, String> {
        let cfg = &self.shared.config;
        let path = compile_plot(grid, self.origin, cfg.feed);
        path.validate().map_err(|e| e.to_string())?;
        let estimate = estimate_job(&path, &cfg.power).map_err(|e| e.to_string())?;
        let program = emit_program(&path);
        for line in program.lines() {
            self.send(id, line)?;
            if matches!(parse_line(line), Ok(ProtocolLine::MagOff)) {
                self.step(id);
            }
        }
        Ok(json!({
            "pixels_written": estimate.pixels_written,
            "pixels_skipped": estimate.pixels_skipped,
            "estimate": estimate,
            "lines": program.lines().count(),
        }))
    }

    fn scan(&self, id: u64, rows: usize, cols: usize) -> Result<Value, String> {
        let cfg = &self.shared.config;
        let program = emit_program(&compile_scan(rows, cols, self.origin, cfg.feed));
        let mut readings = vec![vec![0.0; cols]; rows];
        for line in program.lines() {
            let reply = self.send(id, line)?;
            if let Ok(ProtocolLine::Hall { row, col }) = parse_line(line) {
                readings[row][col] =
                    parse_reading(&reply).ok_or_else(|| format!("bad reading {reply:?}"))?;
                self.step(id);
            }
        }
        let classified: Vec<f64> = readings
            .iter()
            .flatten()
            .map(|&v| classify_reading(v))
            .collect();
        let grid = PixelGrid::new(rows, cols, classified).map_err(|e| e.to_string())?;
        let mut meta = Metadata::new();
        meta.insert("name".into(), format!("scan of job {id}"));
        meta.insert(
            "readings".into(),
            serde_json::to_string(&readings).expect("readings serialize"),
        );
        Ok(pattern_value(&grid, &meta))
    }
}
