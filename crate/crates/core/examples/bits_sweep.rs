//! Spectral efficiency against converter resolution, once with the default
//! residual self-interference and once with it pushed near the noise floor.

use fdmimo::montecarlo::{sweep_bits, RunOptions};
use fdmimo::params::{Resolution, SystemParams};

fn main() -> fdmimo::Result<()> {
    let bits: Vec<Resolution> = (1..=5).map(Resolution::Bits).chain([Resolution::Full]).collect();
    for si_gain_db in [10.0, -150.0] {
        let params = SystemParams {
            si_channel_gain_db: si_gain_db,
            ..SystemParams::default()
        };
        println!("SI channel gain {si_gain_db} dB");
        for (b, report) in sweep_bits(&params, &bits, 300, 1, RunOptions::default())? {
            println!("  b = {b:<4} SE {:.4e}  median {:8.2} dB", report.se_effective, report.quantile_db(0.5));
        }
    }
    Ok(())
}
