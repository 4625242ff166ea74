//! Writes one drop's user positions and the cell-0 link budget to CSV.

use fdmimo::geometry::{drop_users, CellLattice};
use fdmimo::linkbudget::assemble_link_budget;
use fdmimo::params::SystemParams;

fn main() -> fdmimo::Result<()> {
    let params = SystemParams::default();
    let lattice = CellLattice::from_params(&params);
    let drop = drop_users(&lattice, &params, 7, 0)?;
    let dir = std::env::temp_dir();
    drop.write_csv(std::fs::File::create(dir.join("fdmimo_drop.csv"))?)?;
    assemble_link_budget(&drop, &params)?.write_csv(std::fs::File::create(dir.join("fdmimo_link_budget.csv"))?)?;
    let moved = drop
        .uplink
        .iter()
        .enumerate()
        .flat_map(|(c, users)| users.iter().map(move |u| (c, u)))
        .filter(|(c, u)| lattice.geometric_cell(u.position) != *c)
        .count();
    println!("{} cells, {moved} uplink users served outside their hexagon", lattice.num_cells());
    println!("wrote fdmimo_drop.csv and fdmimo_link_budget.csv to {}", dir.display());
    Ok(())
}
