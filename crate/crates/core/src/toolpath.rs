//! Compiles pixel grids into plotter programs.
//!
//! Cells are visited row by row in serpentine order. The head lifts to the
//! clearance height before every lateral move and touches down on the cell
//! before each write or read.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnet::{current_for_target, SheetModel};
use crate::pattern::PixelGrid;
use crate::protocol::{parse_line, Polarity, ProtocolLine};

pub const PIXEL_PITCH_MM: f64 = 3.0;
pub const Z_CLEARANCE_MM: f64 = 3.0;
pub const Z_CONTACT_MM: f64 = 0.0;
pub const DEFAULT_FEED_MM_PER_MIN: f64 = 1200.0;
/// Electromagnet on-time per pixel.
pub const PIXEL_DWELL_S: f64 = 0.7;
/// Saturate-then-coercive-reverse takes two pulses.
pub const DEMAG_DWELL_S: f64 = 2.0 * PIXEL_DWELL_S;
pub const PULSE_POWER_W: f64 = 130.0;
pub const IDLE_POWER_W: f64 = 0.2;

/// Coil driver setpoint resolution.
pub const CURRENT_STEP_A: f64 = 0.01;

const COORD_TOLERANCE_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MachineCommand {
    MoveTo {
        x: f64,
        y: f64,
        z: f64,
        feed: f64,
    },
    Energize {
        polarity: Polarity,
        current: f64,
        dwell: f64,
    },
    /// Drive the pixel under the head to zero remanence.
    Demagnetize {
        dwell: f64,
    },
    MagnetOff,
    HallRead {
        row: usize,
        col: usize,
    },
    Home,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toolpath {
    pub commands: Vec<MachineCommand>,
    pub pixel_pitch: f64,
    pub z_clearance: f64,
    pub z_contact: f64,
    /// Machine coordinates of cell (0, 0), mm.
    pub origin: (f64, f64),
    /// Cells covered by the source grid (written, read or skipped).
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobEstimate {
    pub duration_s: f64,
    pub energy_j: f64,
    /// Total electromagnet on-time.
    pub energize_s: f64,
    pub pulse_energy_j: f64,
    pub pixels_written: usize,
    pub pixels_skipped: usize,
    pub pixels_read: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub idle_power_w: f64,
    pub pulse_power_w: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            idle_power_w: IDLE_POWER_W,
            pulse_power_w: PULSE_POWER_W,
        }
    }
}

impl Toolpath {
    fn empty(origin: (f64, f64), cells: usize) -> Self {
        Self {
            commands: Vec::new(),
            pixel_pitch: PIXEL_PITCH_MM,
            z_clearance: Z_CLEARANCE_MM,
            z_contact: Z_CONTACT_MM,
            origin,
            cells,
        }
    }

    pub fn cell_position(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + col as f64 * self.pixel_pitch,
            self.origin.1 + row as f64 * self.pixel_pitch,
        )
    }

    /// Cell whose center is at `(x, y)`, if any.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fc = (x - self.origin.0) / self.pixel_pitch;
        let fr = (y - self.origin.1) / self.pixel_pitch;
        let (c, r) = (fc.round(), fr.round());
        if c < 0.0 || r < 0.0 {
            return None;
        }
        let ok = ((c - fc) * self.pixel_pitch).abs() < COORD_TOLERANCE_MM
            && ((r - fr) * self.pixel_pitch).abs() < COORD_TOLERANCE_MM;
        ok.then_some((r as usize, c as usize))
    }

    pub fn energize_count(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, MachineCommand::Energize { .. }))
            .count()
    }

    /// Checks the Z-hop and touch-down discipline.
    pub fn validate(&self) -> Result<()> {
        let mut last_cell: Option<(usize, usize)> = None;
        let mut cleared = false;
        for (idx, cmd) in self.commands.iter().enumerate() {
            let addressed = match *cmd {
                MachineCommand::MoveTo { z, .. } => {
                    if z >= self.z_clearance - COORD_TOLERANCE_MM {
                        cleared = true;
                    }
                    None
                }
                MachineCommand::Energize { current, dwell, .. } => {
                    if !(dwell > 0.0) || !(current > 0.0 && current <= 10.0) {
                        return Err(Error::Domain(format!(
                            "command {idx}: energize needs dwell > 0 and current in (0, 10], got {current} A / {dwell} s"
                        )));
                    }
                    Some(None)
                }
                MachineCommand::Demagnetize { dwell } => {
                    if !(dwell > 0.0) {
                        return Err(Error::Domain(format!(
                            "command {idx}: demagnetize needs dwell > 0"
                        )));
                    }
                    Some(None)
                }
                MachineCommand::HallRead { row, col } => Some(Some((row, col))),
                MachineCommand::MagnetOff | MachineCommand::Home => None,
            };
            let Some(tag) = addressed else { continue };
            let prev = idx.checked_sub(1).map(|i| &self.commands[i]);
            let Some(&MachineCommand::MoveTo { x, y, z, .. }) = prev else {
                return Err(Error::Domain(format!(
                    "command {idx} is not preceded by a move"
                )));
            };
            if (z - self.z_contact).abs() > COORD_TOLERANCE_MM {
                return Err(Error::Domain(format!(
                    "command {idx} issued above the sheet (z = {z})"
                )));
            }
            let cell = self.cell_at(x, y).ok_or_else(|| {
                Error::Domain(format!("command {idx} at ({x}, {y}) is off the pixel grid"))
            })?;
            if let Some(tagged) = tag {
                if tagged != cell {
                    return Err(Error::Domain(format!(
                        "command {idx} reads {tagged:?} while the head is over {cell:?}"
                    )));
                }
            }
            if let Some(prev_cell) = last_cell {
                if prev_cell != cell && !cleared {
                    return Err(Error::Domain(format!(
                        "command {idx}: moved from {prev_cell:?} to {cell:?} without clearing the sheet"
                    )));
                }
            }
            last_cell = Some(cell);
            cleared = false;
        }
        Ok(())
    }

    /// Appends `other`; both paths must share the same machine geometry.
    pub fn concat(&self, other: &Toolpath) -> Result<Toolpath> {
        if self.pixel_pitch != other.pixel_pitch
            || self.z_clearance != other.z_clearance
            || self.z_contact != other.z_contact
        {
            return Err(Error::Domain(
                "toolpaths use different machine geometry".into(),
            ));
        }
        let mut out = self.clone();
        out.commands.extend_from_slice(&other.commands);
        out.cells += other.cells;
        Ok(out)
    }

    /// Rebuilds a toolpath from parsed commands.
    pub fn from_commands(commands: Vec<MachineCommand>, origin: (f64, f64), cells: usize) -> Self {
        Self {
            commands,
            ..Self::empty(origin, cells)
        }
    }
}

struct Builder {
    path: Toolpath,
    feed: f64,
    head: (f64, f64, f64),
}

impl Builder {
    fn new(origin: (f64, f64), feed: f64, cells: usize) -> Self {
        Self {
            path: Toolpath::empty(origin, cells),
            feed,
            head: (0.0, 0.0, 0.0),
        }
    }

    fn move_to(&mut self, x: f64, y: f64, z: f64) {
        self.path.commands.push(MachineCommand::MoveTo {
            x,
            y,
            z,
            feed: self.feed,
        });
        self.head = (x, y, z);
    }

    /// Lift, travel and touch down on a cell.
    fn visit(&mut self, row: usize, col: usize) {
        let (x, y) = self.path.cell_position(row, col);
        let clear = self.path.z_clearance;
        if self.head.2 < clear {
            self.move_to(self.head.0, self.head.1, clear);
        }
        if (self.head.0, self.head.1) != (x, y) {
            self.move_to(x, y, clear);
        }
        self.move_to(x, y, self.path.z_contact);
    }

    fn finish(mut self) -> Toolpath {
        if !self.path.commands.is_empty() {
            let clear = self.path.z_clearance;
            self.move_to(self.head.0, self.head.1, clear);
        }
        self.path.commands.push(MachineCommand::Home);
        self.path
    }
}

fn serpentine(rows: usize, cols: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..rows).flat_map(move |r| {
        (0..cols).map(move |k| {
            if r % 2 == 0 {
                (r, k)
            } else {
                (r, cols - 1 - k)
            }
        })
    })
}

/// Plot program for the masked cells of `grid`.
pub fn compile_plot(grid: &PixelGrid, origin: (f64, f64), feed: f64) -> Toolpath {
    compile_plot_with(grid, origin, feed, &SheetModel::default())
}

pub fn compile_plot_with(
    grid: &PixelGrid,
    origin: (f64, f64),
    feed: f64,
    sheet: &SheetModel,
) -> Toolpath {
    let mut b = Builder::new(origin, feed, grid.len());
    for (r, c) in serpentine(grid.rows(), grid.cols()) {
        if !grid.is_masked(r, c) {
            continue;
        }
        let v = grid.get(r, c);
        b.visit(r, c);
        if v == 0.0 {
            b.path.commands.push(MachineCommand::Demagnetize {
                dwell: DEMAG_DWELL_S,
            });
        } else {
            let exact = current_for_target(sheet, v)
                .expect("grid values are validated to [-1, 1]")
                .abs();
            let current = ((exact / CURRENT_STEP_A).round() * CURRENT_STEP_A).max(CURRENT_STEP_A);
            b.path.commands.push(MachineCommand::Energize {
                polarity: Polarity::from_sign(v),
                current,
                dwell: PIXEL_DWELL_S,
            });
        }
        b.path.commands.push(MachineCommand::MagnetOff);
    }
    b.finish()
}

/// Scan program reading every cell of a `rows x cols` area.
pub fn compile_scan(rows: usize, cols: usize, origin: (f64, f64), feed: f64) -> Toolpath {
    let mut b = Builder::new(origin, feed, rows * cols);
    for (r, c) in serpentine(rows, cols) {
        b.visit(r, c);
        b.path
            .commands
            .push(MachineCommand::HallRead { row: r, col: c });
    }
    b.finish()
}

/// Time and energy for running `path` from the machine home position.
pub fn estimate_job(path: &Toolpath, power: &PowerModel) -> Result<JobEstimate> {
    let mut pos = (0.0f64, 0.0f64, 0.0f64);
    let mut last_feed: Option<f64> = None;
    let mut move_s = 0.0;
    let mut energize_s = 0.0;
    let mut written = 0usize;
    let mut read = 0usize;
    let travel =
        |to: (f64, f64, f64), feed: Option<f64>, pos: &mut (f64, f64, f64)| -> Result<f64> {
            let d =
                ((to.0 - pos.0).powi(2) + (to.1 - pos.1).powi(2) + (to.2 - pos.2).powi(2)).sqrt();
            *pos = to;
            if d == 0.0 {
                return Ok(0.0);
            }
            match feed {
                Some(f) if f > 0.0 => Ok(d / f * 60.0),
                Some(f) => Err(Error::Domain(format!(
                    "feed rate must be positive, got {f}"
                ))),
                None => Err(Error::Domain(
                    "move issued before any feed rate was set".into(),
                )),
            }
        };
    for cmd in &path.commands {
        match *cmd {
            MachineCommand::MoveTo { x, y, z, feed } => {
                if !(feed > 0.0) {
                    return Err(Error::Domain(format!(
                        "feed rate must be positive, got {feed}"
                    )));
                }
                last_feed = Some(feed);
                move_s += travel((x, y, z), last_feed, &mut pos)?;
            }
            MachineCommand::Home => move_s += travel((0.0, 0.0, 0.0), last_feed, &mut pos)?,
            MachineCommand::Energize { dwell, .. } | MachineCommand::Demagnetize { dwell } => {
                energize_s += dwell;
                written += 1;
            }
            MachineCommand::HallRead { .. } => read += 1,
            MachineCommand::MagnetOff => {}
        }
    }
    let duration_s = move_s + energize_s;
    let pulse_energy_j = energize_s * power.pulse_power_w;
    Ok(JobEstimate {
        duration_s,
        energy_j: pulse_energy_j + move_s * power.idle_power_w,
        energize_s,
        pulse_energy_j,
        pixels_written: written,
        pixels_skipped: path.cells.saturating_sub(written + read),
        pixels_read: read,
    })
}

/// Program text, one command per line.
pub fn emit_program(path: &Toolpath) -> String {
    let mut out = String::new();
    for cmd in &path.commands {
        match *cmd {
            MachineCommand::MoveTo { x, y, z, feed } => {
                out.push_str(&format!("G0 X{x:.2} Y{y:.2} Z{z:.2} F{feed}\n"))
            }
            MachineCommand::Energize {
                polarity,
                current,
                dwell,
            } => out.push_str(&format!(
                "MAG {} {current:.2}\nDWELL {dwell:.2}\n",
                polarity.letter()
            )),
            MachineCommand::Demagnetize { dwell } => {
                out.push_str(&format!("DEMAG\nDWELL {dwell:.2}\n"))
            }
            MachineCommand::MagnetOff => out.push_str("MAG OFF\n"),
            MachineCommand::HallRead { row, col } => out.push_str(&format!("HALL? {row},{col}\n")),
            MachineCommand::Home => out.push_str("HOME\n"),
        }
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: 1,
        message: message.into(),
    }
}

/// Parses program text back into commands. A pulse line must be followed by its `DWELL`.
pub fn parse_program(text: &str) -> Result<Vec<MachineCommand>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut feed: Option<f64> = None;
    let mut pos = (0.0, 0.0, 0.0);
    while let Some((n, line)) = lines.next() {
        let parsed = parse_line(line).map_err(|e| parse_err(n, format!("{e}: {line:?}")))?;
        let mut dwell = || -> Result<f64> {
            match lines.next() {
                Some((m, l)) => match parse_line(l) {
                    Ok(ProtocolLine::Dwell(t)) => Ok(t),
                    _ => Err(parse_err(m, "expected DWELL after a pulse")),
                },
                None => Err(parse_err(n + 1, "program ends before DWELL")),
            }
        };
        let cmd = match parsed {
            ProtocolLine::Move { x, y, z, feed: f } => {
                feed = f.or(feed);
                pos = (x.unwrap_or(pos.0), y.unwrap_or(pos.1), z.unwrap_or(pos.2));
                let feed = feed.ok_or_else(|| parse_err(n, "move without a feed rate"))?;
                MachineCommand::MoveTo {
                    x: pos.0,
                    y: pos.1,
                    z: pos.2,
                    feed,
                }
            }
            ProtocolLine::Home => {
                pos = (0.0, 0.0, 0.0);
                MachineCommand::Home
            }
            ProtocolLine::Mag { polarity, current } => MachineCommand::Energize {
                polarity,
                current,
                dwell: dwell()?,
            },
            ProtocolLine::Demag => MachineCommand::Demagnetize { dwell: dwell()? },
            ProtocolLine::MagOff => MachineCommand::MagnetOff,
            ProtocolLine::Hall { row, col } => MachineCommand::HallRead { row, col },
            ProtocolLine::Dwell(_) => return Err(parse_err(n, "DWELL without a preceding pulse")),
        };
        out.push(cmd);
    }
    Ok(out)
}
