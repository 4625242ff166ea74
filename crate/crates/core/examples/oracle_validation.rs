//! Monte Carlo over small-scale fading: per-term empirical powers against the
//! closed form, plus the matched-filter moments.

use fdmimo::oracle::{closed_form_terms, empirical_sqinr, filter_moments, reference_scenario, OracleOptions, TermPowers};
use fdmimo::sqinr::sqinr_hardening;

fn main() -> fdmimo::Result<()> {
    let lb = reference_scenario(64);
    let est = empirical_sqinr(&lb, 0, 4000, &OracleOptions::default())?;
    let closed = closed_form_terms(&lb, 0)?;
    println!("{:<16} {:>12} {:>12}", "term", "empirical", "closed form");
    for ((name, e), c) in TermPowers::NAMES.iter().zip(est.powers.values()).zip(closed.values()) {
        println!("{name:<16} {e:>12.4} {c:>12.4}");
    }
    println!(
        "SQINR {:.4} ± {:.4} vs {:.4}",
        est.sqinr,
        est.std_error,
        sqinr_hardening(&lb, 0)?.sqinr
    );
    let m = filter_moments(&lb, 0, 20_000, 5)?;
    println!("E‖w‖² {:.2} (N_a = 64), E‖w‖⁴ {:.1} (N_a² + N_a = 4160)", m.norm2, m.norm4);
    Ok(())
}
