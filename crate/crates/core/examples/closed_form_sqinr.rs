//! Drops one network, builds the cell-0 link budget and prints the
//! closed-form SQINR with its denominator split into interference sources.

use fdmimo::geometry::{drop_users, CellLattice};
use fdmimo::linkbudget::assemble_link_budget;
use fdmimo::params::{inr, linear_to_db, SystemParams};
use fdmimo::sqinr::{sinr_hd_full_res, sqinr_hardening};

fn main() -> fdmimo::Result<()> {
    let params = SystemParams {
        si_channel_gain_db: -150.0,
        ..SystemParams::default()
    };
    params.validate()?;
    let lattice = CellLattice::from_params(&params);
    let drop = drop_users(&lattice, &params, 42, 0)?;
    let lb = assemble_link_budget(&drop, &params)?;
    println!("{} cells, N_a = {}, INR = {:.1} dB", lb.num_cells(), lb.num_antennas, linear_to_db(inr(&params)));
    println!("{:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>9}", "ue", "own dB", "noise+int", "pilot", "dac", "si", "adc", "SQINR dB");
    for k in 0..lb.users_in_cell_of_interest() {
        let b = sqinr_hardening(&lb, k)?;
        let d = b.den;
        println!(
            "{k:>4} {:>10.2} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e} {:>9.2}",
            linear_to_db(lb.own(k)),
            d.noise_and_interf,
            d.pilot_contam,
            d.si_dac_distortion,
            d.si_residual,
            d.adc_distortion_bracket,
            linear_to_db(b.sqinr)
        );
    }
    let hd = sinr_hd_full_res(&lb, 0)?;
    println!("user 0 half-duplex full-resolution SINR: {:.2} dB", linear_to_db(hd));
    Ok(())
}
