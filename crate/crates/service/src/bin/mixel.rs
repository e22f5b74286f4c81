use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use mixel_core::interaction::{interaction_map_with, ForceModel, Normalization};
use mixel_core::io::{
    export_pair_set, map_to_value, read_pattern_file, save_pattern, write_pattern_file, Metadata,
};
use mixel_core::magnet::{emag_field, trace_hysteresis_loop, ElectromagnetModel, SheetModel};
use mixel_core::pairs::{generate_pair_set, PairMode};
use mixel_core::pattern::{sylvester_hadamard, PixelGrid};
use mixel_core::plotter::{parse_reading, HallSensorModel, PlotterSession, VirtualSheet};
use mixel_core::protocol::{parse_line, ProtocolLine};
use mixel_core::toolpath::{
    compile_plot, compile_scan, emit_program, estimate_job, PowerModel, DEFAULT_FEED_MM_PER_MIN,
};
use mixel_service::{classify_reading, router, DeviceConfig, JobService, ServiceConfig};

type CliResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "mixel",
    version,
    about = "Design, plot and scan magnetic pixel sheets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sylvester Hadamard key pattern
    Hadamard {
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Selectively attracting key/lock pairs
    Pairs {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long, default_value_t = 64)]
        candidates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        repel: bool,
        /// Directory for the exported pattern files
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interaction map and force between two patterns
    Predict {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        whole_grid: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot program for a pattern
    Compile {
        pattern: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FEED_MM_PER_MIN)]
        feed: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot a pattern onto a simulated device stored in a sheet-state file
    Plot {
        pattern: PathBuf,
        #[arg(long)]
        device: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scan a simulated device and write the sign-classified pattern
    Scan {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        cols: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.18)]
        sigma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Electromagnet sweep and sheet hysteresis loops as CSV
    BhCurve {
        #[arg(long, default_value = "bh")]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Plot a Hadamard pattern, scan it back and count misreads
    Roundtrip {
        #[arg(long, default_value_t = 8)]
        order: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.18)]
        sigma: f64,
    },
    /// Run the HTTP API
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long = "device", default_value = "sim")]
        devices: Vec<String>,
        #[arg(long, default_value_t = 32)]
        rows: usize,
        #[arg(long, default_value_t = 32)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.18)]
        sigma: f64,
    },
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_device(
    path: &Path,
    fallback: (usize, usize),
    sensor: HallSensorModel,
    seed: u64,
) -> mixel_core::Result<PlotterSession> {
    let sheet = if path.exists() {
        VirtualSheet::from_grid(&read_pattern_file(path)?.0, (0.0, 0.0))?
    } else {
        VirtualSheet::new(fallback.0, fallback.1, (0.0, 0.0))?
    };
    Ok(PlotterSession::new(sheet, sensor, seed))
}

fn scan_session(
    session: &mut PlotterSession,
    rows: usize,
    cols: usize,
) -> Result<Vec<Vec<f64>>, String> {
    let program = emit_program(&compile_scan(
        rows,
        cols,
        (0.0, 0.0),
        DEFAULT_FEED_MM_PER_MIN,
    ));
    let mut readings = vec![vec![0.0; cols]; rows];
    for line in program.lines() {
        let reply = session.handle_command(line);
        if let Ok(ProtocolLine::Hall { row, col }) = parse_line(line) {
            readings[row][col] = parse_reading(&reply).ok_or(reply)?;
        }
    }
    Ok(readings)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Hadamard { order, out } => {
            let meta = Metadata::from([("name".into(), format!("hadamard {order}"))]);
            emit(
                &save_pattern(&sylvester_hadamard(order)?, &meta),
                out.as_deref(),
            )?;
        }
        Command::Pairs {
            k,
            order,
            candidates,
            seed,
            repel,
            out,
        } => {
            let mode = if repel {
                PairMode::Repel
            } else {
                PairMode::Attract
            };
            let set = generate_pair_set(k, order, candidates, mode, seed)?;
            println!("score {:.4} mean {:.4}", set.score, set.mean_off_target);
            for (i, p) in set.pairs.iter().enumerate() {
                println!("pair {i}: {:?}", p.permutation.as_slice());
            }
            if let Some(dir) = out {
                for p in export_pair_set(&dir, &set)? {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::Predict {
            a,
            b,
            whole_grid,
            out,
        } => {
            let (a, b) = (read_pattern_file(&a)?.0, read_pattern_file(&b)?.0);
            let norm = if whole_grid {
                Normalization::WholeGrid
            } else {
                Normalization::Overlap
            };
            let map = interaction_map_with(&a, &b, norm)?;
            let f = ForceModel::default().between(&a, &b, 0, 0)?;
            eprintln!(
                "aligned ncc {:+.4}, force {:+.3} N",
                map.get(0, 0).unwrap_or(0.0),
                f.newtons
            );
            emit(
                &format!("{}\n", serde_json::to_string_pretty(&map_to_value(&map))?),
                out.as_deref(),
            )?;
        }
        Command::Compile { pattern, feed, out } => {
            let path = compile_plot(&read_pattern_file(&pattern)?.0, (0.0, 0.0), feed);
            let est = estimate_job(&path, &PowerModel::default())?;
            eprintln!(
                "{} written, {} skipped, {:.1} s, {:.0} J",
                est.pixels_written, est.pixels_skipped, est.duration_s, est.energy_j
            );
            emit(&emit_program(&path), out.as_deref())?;
        }
        Command::Plot {
            pattern,
            device,
            seed,
        } => {
            let grid = read_pattern_file(&pattern)?.0;
            let mut session = load_device(&device, grid.dims(), HallSensorModel::default(), seed)?;
            let replies = session.run_program(&emit_program(&compile_plot(
                &grid,
                (0.0, 0.0),
                DEFAULT_FEED_MM_PER_MIN,
            )));
            let errors: Vec<&String> = replies.iter().filter(|r| *r != "ok").collect();
            write_pattern_file(&device, &session.snapshot_sheet(), &Metadata::new())?;
            println!("{} lines sent, {} errors", replies.len(), errors.len());
            if let Some(e) = errors.first() {
                return Err(format!("device reported {e}").into());
            }
        }
        Command::Scan {
            device,
            rows,
            cols,
            seed,
            sigma,
            out,
        } => {
            if !device.exists() {
                return Err(format!("no device state at {}", device.display()).into());
            }
            let mut session =
                load_device(&device, (1, 1), HallSensorModel::with_sigma(sigma), seed)?;
            let (r, c) = session.sheet.dims();
            let (rows, cols) = (rows.unwrap_or(r), cols.unwrap_or(c));
            let readings = scan_session(&mut session, rows, cols)?;
            let values = readings
                .iter()
                .flatten()
                .map(|&v| classify_reading(v))
                .collect();
            let grid = PixelGrid::new(rows, cols, values)?;
            let meta = Metadata::from([("readings".into(), serde_json::to_string(&readings)?)]);
            emit(&save_pattern(&grid, &meta), out.as_deref())?;
        }
        Command::BhCurve { out, steps } => {
            fs::create_dir_all(&out)?;
            let head = ElectromagnetModel::default();
            let mut csv = String::from("current_amps,field_tesla\n");
            for k in 0..=2 * steps {
                let i = -10.0 + 20.0 * k as f64 / (2 * steps) as f64;
                csv.push_str(&format!("{i:.4},{:.6}\n", emag_field(&head, i)?));
            }
            fs::write(out.join("electromagnet.csv"), csv)?;
            let sheet = SheetModel::default();
            for peak in [3.3, 6.6, 10.0] {
                let lp = trace_hysteresis_loop(&sheet, peak, steps)?;
                fs::write(out.join(format!("sheet_loop_{peak}A.csv")), lp.to_csv()?)?;
            }
            println!("wrote curves to {}", out.display());
        }
        Command::Roundtrip { order, seed, sigma } => {
            let target = sylvester_hadamard(order)?;
            let sheet = VirtualSheet::new(order, order, (0.0, 0.0))?;
            let mut session = PlotterSession::new(sheet, HallSensorModel::with_sigma(sigma), seed);
            session.run_program(&emit_program(&compile_plot(
                &target,
                (0.0, 0.0),
                DEFAULT_FEED_MM_PER_MIN,
            )));
            let readings = scan_session(&mut session, order, order)?;
            let wrong = readings
                .iter()
                .flatten()
                .zip(target.values())
                .filter(|(v, t)| v.signum() != **t)
                .count();
            println!(
                "{} of {} pixels recovered",
                target.len() - wrong,
                target.len()
            );
            if wrong > 0 {
                return Err(format!("{wrong} pixels misread").into());
            }
        }
        Command::Serve {
            addr,
            devices,
            rows,
            cols,
            seed,
            sigma,
        } => {
            let service = JobService::new(ServiceConfig::default());
            for (i, id) in devices.iter().enumerate() {
                let config = DeviceConfig {
                    rows,
                    cols,
                    sensor: HallSensorModel::with_sigma(sigma),
                    seed: seed + i as u64,
                    ..DeviceConfig::default()
                };
                service.add_device(id, config)?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                log::info!("listening on {addr}, devices {devices:?}");
                axum::serve(listener, router(service)).await
            })?;
        }
    }
    Ok(())
}

fn main() {
    env_logger::init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
