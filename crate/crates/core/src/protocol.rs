//! Line protocol spoken between the host and the plotter.
//!
//! Motion lines (`G0`, `HOME`) go to the CNC controller and device lines
//! (`MAG`, `DEMAG`, `DWELL`, `HALL?`) to the magnet add-on. The emulator
//! accepts both on one merged stream or on two separate channels.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    North,
    South,
}

impl Polarity {
    pub fn from_sign(v: f64) -> Self {
        if v < 0.0 {
            Polarity::South
        } else {
            Polarity::North
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Polarity::North => 1.0,
            Polarity::South => -1.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Polarity::North => 'N',
            Polarity::South => 'S',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Motion,
    Device,
}

/// One parsed protocol line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolLine {
    /// Rapid move; absent axes keep their current value.
    Move {
        x: Option<f64>,
        y: Option<f64>,
        z: Option<f64>,
        feed: Option<f64>,
    },
    Home,
    Mag {
        polarity: Polarity,
        current: f64,
    },
    MagOff,
    Demag,
    Dwell(f64),
    Hall {
        row: usize,
        col: usize,
    },
}

impl ProtocolLine {
    pub fn channel(&self) -> Channel {
        match self {
            ProtocolLine::Move { .. } | ProtocolLine::Home => Channel::Motion,
            _ => Channel::Device,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineError {
    UnknownCommand,
    BadArgument,
}

impl LineError {
    pub fn code(self) -> u8 {
        match self {
            LineError::UnknownCommand => 1,
            LineError::BadArgument => 2,
        }
    }

    pub fn message(self) -> &'static str {
        match self {
            LineError::UnknownCommand => "unknown_command",
            LineError::BadArgument => "bad_argument",
        }
    }
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "err {} {}", self.code(), self.message())
    }
}

fn number(s: &str) -> Result<f64, LineError> {
    let v: f64 = s.parse().map_err(|_| LineError::BadArgument)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LineError::BadArgument)
    }
}

pub fn parse_line(line: &str) -> Result<ProtocolLine, LineError> {
    let mut tokens = line.split_whitespace();
    let head = tokens.next().ok_or(LineError::UnknownCommand)?;
    let rest: Vec<&str> = tokens.collect();
    match head {
        "G0" => {
            let (mut x, mut y, mut z, mut feed) = (None, None, None, None);
            for tok in rest {
                let mut chars = tok.chars();
                let axis = chars.next().ok_or(LineError::BadArgument)?;
                let v = number(chars.as_str())?;
                let slot = match axis {
                    'X' => &mut x,
                    'Y' => &mut y,
                    'Z' => &mut z,
                    'F' => &mut feed,
                    _ => return Err(LineError::BadArgument),
                };
                *slot = Some(v);
            }
            Ok(ProtocolLine::Move { x, y, z, feed })
        }
        "HOME" if rest.is_empty() => Ok(ProtocolLine::Home),
        "MAG" => match rest.as_slice() {
            ["OFF"] => Ok(ProtocolLine::MagOff),
            [p, c] => {
                let polarity = match *p {
                    "N" => Polarity::North,
                    "S" => Polarity::South,
                    _ => return Err(LineError::BadArgument),
                };
                let current = number(c)?;
                if current < 0.0 {
                    return Err(LineError::BadArgument);
                }
                Ok(ProtocolLine::Mag { polarity, current })
            }
            _ => Err(LineError::BadArgument),
        },
        "DEMAG" if rest.is_empty() => Ok(ProtocolLine::Demag),
        "DWELL" => match rest.as_slice() {
            [t] => {
                let t = number(t)?;
                if t < 0.0 {
                    return Err(LineError::BadArgument);
                }
                Ok(ProtocolLine::Dwell(t))
            }
            _ => Err(LineError::BadArgument),
        },
        "HALL?" => match rest.as_slice() {
            [cell] => {
                let (r, c) = cell.split_once(',').ok_or(LineError::BadArgument)?;
                let row = r.parse().map_err(|_| LineError::BadArgument)?;
                let col = c.parse().map_err(|_| LineError::BadArgument)?;
                Ok(ProtocolLine::Hall { row, col })
            }
            _ => Err(LineError::BadArgument),
        },
        "HOME" | "DEMAG" => Err(LineError::BadArgument),
        _ => Err(LineError::UnknownCommand),
    }
}

/// Splits a merged program into (motion, device) streams, keeping line order within each.
pub fn split_channels(program: &str) -> (String, String) {
    let mut motion = String::new();
    let mut device = String::new();
    for line in program.lines() {
        let target = match parse_line(line).map(|l| l.channel()) {
            Ok(Channel::Motion) => &mut motion,
            _ => &mut device,
        };
        target.push_str(line);
        target.push('\n');
    }
    (motion, device)
}
