//! Full duplex against the half-duplex baseline on the same drops.

use fdmimo::montecarlo::{run_cdf_experiment, run_hd_baseline};
use fdmimo::params::SystemParams;

fn main() -> fdmimo::Result<()> {
    for (label, si_gain_db) in [("default SI", 10.0), ("suppressed SI", -150.0)] {
        let params = SystemParams {
            si_channel_gain_db: si_gain_db,
            ..SystemParams::default()
        };
        let fd = run_cdf_experiment(&params, 300, 3)?;
        let hd = run_hd_baseline(&params, 300, 3)?;
        println!("{label:<14} full duplex {:.4e}  half duplex {:.4e} bit/s/Hz", fd.se_effective, hd.se_effective);
    }
    Ok(())
}
