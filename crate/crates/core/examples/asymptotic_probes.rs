//! Drives one user's link budget toward each limiting regime and prints how
//! the closed form approaches the limit.

use fdmimo::asymptotics::standard_probes;
use fdmimo::oracle::reference_scenario;

fn main() -> fdmimo::Result<()> {
    let lb = reference_scenario(100);
    for r in standard_probes(&lb, 0)? {
        let status = match (r.asserted, r.converged) {
            (false, _) => "report-only",
            (true, true) => "converged",
            (true, false) => "NOT converged",
        };
        println!("{:<22} limit {:>12.5}  gap {:.2e}  {status}", r.limit.name(), r.limit_value, r.relative_gap);
        for (driver, value) in &r.probe_values {
            println!("    {driver:>10.1e} -> {value:.6}");
        }
    }
    Ok(())
}
