//! Queues a plot and a scan on one simulated device and polls them.
//!
//!     cargo run -p mixel-service --example job_queue

use std::thread::sleep;
use std::time::Duration;

use mixel_core::io::pattern_from_value;
use mixel_core::pattern::sylvester_hadamard;
use mixel_service::{DeviceConfig, JobService, ServiceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let service = JobService::new(ServiceConfig {
        step_delay: Duration::from_millis(5),
        ..ServiceConfig::default()
    });
    service.add_device(
        "sim",
        DeviceConfig {
            rows: 8,
            cols: 8,
            seed: 4,
            ..DeviceConfig::default()
        },
    )?;

    let target = sylvester_hadamard(8)?;
    let plot = service.submit_plot("sim", target.clone())?;
    let scan = service.submit_scan("sim", 8, 8)?;
    println!("queued plot #{} and scan #{}", plot.id, scan.id);

    loop {
        let (p, s) = (service.job_status(plot.id)?, service.job_status(scan.id)?);
        println!(
            "plot {:?} {}/{}   scan {:?} {}/{}",
            p.state, p.progress.done, p.progress.total, s.state, s.progress.done, s.progress.total
        );
        if s.state.is_terminal() {
            let (grid, _) = pattern_from_value(&s.result.unwrap_or_default())?;
            println!("scan matches plotted pattern: {}", grid == target);
            break;
        }
        sleep(Duration::from_millis(100));
    }
    Ok(())
}
