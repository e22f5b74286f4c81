//! Simulated plotter with a magnet head and a hall sensor.
//!
//! ```
//! use mixel_core::plotter::PlotterSession;
//!
//! let mut s = PlotterSession::with_size(2, 2, 7).unwrap();
//! assert_eq!(s.handle_command("G0 X3.00 Y0.00 Z0.00 F1200"), "ok");
//! assert_eq!(s.handle_command("MAG S 10.00"), "ok");
//! s.sensor.noise_sigma = 0.0;
//! assert_eq!(s.handle_command("HALL? 0,1"), "H -1.000");
//! ```

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{program_pixel, PixelState, SheetModel};
use crate::pattern::PixelGrid;
use crate::protocol::{parse_line, Channel, LineError, Polarity, ProtocolLine};
use crate::toolpath::PIXEL_PITCH_MM;

pub const DEFAULT_HALL_SIGMA: f64 = 0.18;
/// Max distance between the head and a cell center for the cell to count as addressed.
pub const SNAP_TOLERANCE_MM: f64 = 0.5;

const CONTACT_TOLERANCE_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualSheet {
    rows: usize,
    cols: usize,
    pub origin: (f64, f64),
    pub pitch: f64,
    cells: Vec<PixelState>,
}

impl VirtualSheet {
    pub fn new(rows: usize, cols: usize, origin: (f64, f64)) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!(
                "sheet must be non-empty, got {rows}x{cols}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            origin,
            pitch: PIXEL_PITCH_MM,
            cells: vec![PixelState::DEMAGNETIZED; rows * cols],
        })
    }

    /// Sheet preloaded with the magnetization in `grid`.
    pub fn from_grid(grid: &PixelGrid, origin: (f64, f64)) -> Result<Self> {
        let mut sheet = Self::new(grid.rows(), grid.cols(), origin)?;
        for (cell, &v) in sheet.cells.iter_mut().zip(grid.values()) {
            *cell = PixelState::new(v)?;
        }
        Ok(sheet)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> Result<PixelState> {
        self.check(row, col)?;
        Ok(self.cells[row * self.cols + col])
    }

    pub fn set(&mut self, row: usize, col: usize, state: PixelState) -> Result<()> {
        self.check(row, col)?;
        self.cells[row * self.cols + col] = state;
        Ok(())
    }

    fn check(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfRange(format!(
                "cell ({row}, {col}) outside {}x{} sheet",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Nearest cell to `(x, y)` if the head is within the snap tolerance of its center.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin.0) / self.pitch).round();
        let r = ((y - self.origin.1) / self.pitch).round();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        let dx = x - (self.origin.0 + c * self.pitch);
        let dy = y - (self.origin.1 + r * self.pitch);
        (dx.hypot(dy) <= SNAP_TOLERANCE_MM).then_some((r as usize, c as usize))
    }

    pub fn to_grid(&self) -> PixelGrid {
        PixelGrid::new(
            self.rows,
            self.cols,
            self.cells.iter().map(|s| s.m()).collect(),
        )
        .expect("pixel states stay within [-1, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallSensorModel {
    /// Standard deviation of additive read noise, in normalized units.
    pub noise_sigma: f64,
    pub gain: f64,
}

impl Default for HallSensorModel {
    fn default() -> Self {
        Self {
            noise_sigma: DEFAULT_HALL_SIGMA,
            gain: 1.0,
        }
    }
}

impl HallSensorModel {
    pub fn with_sigma(noise_sigma: f64) -> Self {
        Self {
            noise_sigma,
            ..Self::default()
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, m: f64, rng: &mut R) -> f64 {
        let clean = self.gain * m;
        if self.noise_sigma > 0.0 {
            let noise = Normal::new(0.0, self.noise_sigma).expect("sigma is finite and positive");
            clean + noise.sample(rng)
        } else {
            clean
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnetState {
    Off,
    On { polarity: Polarity, current: f64 },
}

/// One plotter with its sheet. Commands are handled strictly in order.
#[derive(Debug, Clone)]
pub struct PlotterSession {
    pub head: (f64, f64, f64),
    pub magnet: MagnetState,
    pub sheet: VirtualSheet,
    pub sensor: HallSensorModel,
    pub material: SheetModel,
    seed: u64,
    rng: ChaCha8Rng,
    feed: Option<f64>,
    /// Requested dwell time; accounted for but never slept.
    pub dwell_s: f64,
    pub commands_handled: usize,
}

impl PlotterSession {
    pub fn new(sheet: VirtualSheet, sensor: HallSensorModel, seed: u64) -> Self {
        Self {
            head: (0.0, 0.0, 0.0),
            magnet: MagnetState::Off,
            sheet,
            sensor,
            material: SheetModel::default(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            feed: None,
            dwell_s: 0.0,
            commands_handled: 0,
        }
    }

    /// Demagnetized `rows x cols` sheet at the origin with the default sensor.
    pub fn with_size(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        Ok(Self::new(
            VirtualSheet::new(rows, cols, (0.0, 0.0))?,
            HallSensorModel::default(),
            seed,
        ))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn head_cell(&self) -> Option<(usize, usize)> {
        if self.head.2.abs() > CONTACT_TOLERANCE_MM {
            return None;
        }
        self.sheet.cell_at(self.head.0, self.head.1)
    }

    fn pulse(&mut self, signed_current: f64) -> std::result::Result<(), &'static str> {
        let Some((r, c)) = self.head_cell() else {
            warn!(
                "pulse of {signed_current} A at ({:.2}, {:.2}, {:.2}) hits no cell",
                self.head.0, self.head.1, self.head.2
            );
            return Ok(());
        };
        let state = self.sheet.get(r, c).expect("head_cell is in range");
        let next =
            program_pixel(&self.material, state, signed_current).map_err(|_| "out_of_range")?;
        debug!("cell ({r}, {c}): {} -> {}", state.m(), next.m());
        self.sheet.set(r, c, next).expect("head_cell is in range");
        Ok(())
    }

    /// Noisy normalized reading of one cell.
    pub fn read_hall(&mut self, row: usize, col: usize) -> Result<f64> {
        let m = self.sheet.get(row, col)?.m();
        Ok(self.sensor.sample(m, &mut self.rng))
    }

    /// Noise-free copy of the sheet.
    pub fn snapshot_sheet(&self) -> PixelGrid {
        self.sheet.to_grid()
    }

    /// Handles one protocol line and returns exactly one response line.
    pub fn handle_command(&mut self, line: &str) -> String {
        self.commands_handled += 1;
        match parse_line(line) {
            Ok(cmd) => self.execute(cmd),
            Err(e) => e.to_string(),
        }
    }

    /// Dual-channel mode: the motion port only understands motion lines and
    /// the device port only device lines.
    pub fn handle_on(&mut self, channel: Channel, line: &str) -> String {
        self.commands_handled += 1;
        match parse_line(line) {
            Ok(cmd) if cmd.channel() == channel => self.execute(cmd),
            Ok(_) => LineError::UnknownCommand.to_string(),
            Err(e) => e.to_string(),
        }
    }

    /// Feeds a whole program, one line at a time.
    pub fn run_program(&mut self, program: &str) -> Vec<String> {
        program.lines().map(|l| self.handle_command(l)).collect()
    }

    fn execute(&mut self, cmd: ProtocolLine) -> String {
        let result = match cmd {
            ProtocolLine::Move { x, y, z, feed } => {
                if let Some(f) = feed {
                    if f <= 0.0 {
                        return LineError::BadArgument.to_string();
                    }
                    self.feed = Some(f);
                }
                self.head = (
                    x.unwrap_or(self.head.0),
                    y.unwrap_or(self.head.1),
                    z.unwrap_or(self.head.2),
                );
                Ok(())
            }
            ProtocolLine::Home => {
                self.head = (0.0, 0.0, 0.0);
                Ok(())
            }
            ProtocolLine::Mag { polarity, current } => {
                self.magnet = MagnetState::On { polarity, current };
                self.pulse(polarity.sign() * current)
            }
            ProtocolLine::MagOff => {
                self.magnet = MagnetState::Off;
                Ok(())
            }
            ProtocolLine::Demag => {
                let full = self.material.i_program_full;
                let back = self.material.i_coercive();
                self.pulse(full).and_then(|_| self.pulse(-back))
            }
            ProtocolLine::Dwell(t) => {
                self.dwell_s += t;
                Ok(())
            }
            ProtocolLine::Hall { row, col } => {
                return match self.read_hall(row, col) {
                    Ok(v) => format!("H {v:.3}"),
                    Err(_) => "err 3 out_of_range".to_string(),
                };
            }
        };
        match result {
            Ok(()) => "ok".to_string(),
            Err(msg) => format!("err 3 {msg}"),
        }
    }
}

/// Value carried by an `H <reading>` response.
pub fn parse_reading(response: &str) -> Option<f64> {
    response.strip_prefix("H ")?.trim().parse().ok()
}
