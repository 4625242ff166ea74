//! Hexagonal cell lattice, user drops and association.
//!
//! Sites sit on a triangular lattice with spacing equal to the inter-site
//! distance; cell 0 is at the origin and rings are numbered outwards. Lattice
//! points are addressed with axial coordinates `(q, r)`, mapped to the plane by
//! `x = d·(q + r/2)`, `y = d·(√3/2)·r`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{db_to_linear, SystemParams};

/// Index of the cell whose uplink is evaluated.
pub const CELL_OF_INTEREST: usize = 0;

/// Placement attempts allowed per cell before a drop is abandoned.
pub const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000_000;

const AXIAL_DIRECTIONS: [(i32, i32); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

fn hex_distance((q, r): (i32, i32)) -> i32 {
    (q.abs() + r.abs() + (q + r).abs()) / 2
}

/// Axial coordinates of all cells within `tiers` rings, ring by ring.
fn hex_cells(tiers: usize) -> Vec<(i32, i32)> {
    let mut cells = vec![(0, 0)];
    for radius in 1..=tiers as i32 {
        let (dq, dr) = AXIAL_DIRECTIONS[4];
        let mut cur = (dq * radius, dr * radius);
        for &(sq, sr) in &AXIAL_DIRECTIONS {
            for _ in 0..radius {
                cells.push(cur);
                cur = (cur.0 + sq, cur.1 + sr);
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLattice {
    pub bs_positions: Vec<Point>,
    pub axial: Vec<(i32, i32)>,
    pub reuse_color: Vec<usize>,
    pub wraparound: bool,
    pub inter_site_distance: f64,
    pub tiers: usize,
    /// Translations of the whole cluster onto its six neighbouring copies.
    wrap_shifts: Vec<Point>,
}

/// Two-tier (19-cell) lattice with reuse-3 pilot coloring.
pub fn build_lattice(inter_site_distance: f64, wraparound: bool) -> CellLattice {
    CellLattice::new(inter_site_distance, 2, 3, wraparound)
}

impl CellLattice {
    pub fn new(inter_site_distance: f64, tiers: usize, reuse_factor: usize, wraparound: bool) -> Self {
        let axial = hex_cells(tiers);
        let d = inter_site_distance;
        let to_point = |(q, r): (i32, i32)| {
            Point::new(d * (q as f64 + r as f64 / 2.0), d * 3f64.sqrt() / 2.0 * r as f64)
        };
        let bs_positions = axial.iter().map(|&c| to_point(c)).collect();
        let reuse_color = axial
            .iter()
            .map(|&(q, r)| {
                if reuse_factor == 3 {
                    (q - r).rem_euclid(3) as usize
                } else {
                    0
                }
            })
            .collect();
        let wrap_shifts = if tiers == 0 {
            Vec::new()
        } else {
            let t = tiers as i32;
            // (2R+1, -R) and its rotations by 60° tile the plane with radius-R clusters.
            let mut shift = (2 * t + 1, -t);
            let mut shifts = Vec::with_capacity(6);
            for _ in 0..6 {
                shifts.push(to_point(shift));
                shift = (-shift.1, shift.0 + shift.1);
            }
            shifts
        };
        CellLattice {
            bs_positions,
            axial,
            reuse_color,
            wraparound: wraparound && tiers > 0,
            inter_site_distance,
            tiers,
            wrap_shifts,
        }
    }

    pub fn from_params(params: &SystemParams) -> Self {
        CellLattice::new(
            params.inter_site_distance_m,
            params.tiers,
            params.reuse_factor,
            params.wraparound,
        )
    }

    pub fn num_cells(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn wrap_shifts(&self) -> &[Point] {
        &self.wrap_shifts
    }

    /// Nearest lattice site to `p` in axial coordinates (cube rounding).
    fn nearest_site(&self, p: Point) -> (i32, i32) {
        let d = self.inter_site_distance;
        let r = p.y / (d * 3f64.sqrt() / 2.0);
        let q = p.x / d - r / 2.0;
        let s = -q - r;
        let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
        let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
        if dq > dr && dq > ds {
            rq = -rr - rs;
        } else if dr > ds {
            rr = -rq - rs;
        }
        (rq as i32, rr as i32)
    }

    fn inside_cluster(&self, p: Point) -> bool {
        hex_distance(self.nearest_site(p)) <= self.tiers as i32
    }

    /// Maps `p` to its representative inside the simulated cluster. Identity
    /// without wraparound.
    pub fn wrap_point(&self, p: Point) -> Point {
        if !self.wraparound || self.inside_cluster(p) {
            return p;
        }
        for &s in &self.wrap_shifts {
            let q = p - s;
            if self.inside_cluster(q) {
                return q;
            }
        }
        for &s in &self.wrap_shifts {
            for &t in &self.wrap_shifts {
                let q = p - s - t;
                if self.inside_cluster(q) {
                    return q;
                }
            }
        }
        p
    }

    /// Cell index of the site at axial `(q, r)`, following wraparound.
    fn cell_at(&self, site: (i32, i32)) -> Option<usize> {
        if let Some(i) = self.axial.iter().position(|&c| c == site) {
            return Some(i);
        }
        if !self.wraparound {
            return None;
        }
        let d = self.inter_site_distance;
        let p = Point::new(
            d * (site.0 as f64 + site.1 as f64 / 2.0),
            d * 3f64.sqrt() / 2.0 * site.1 as f64,
        );
        let wrapped = self.nearest_site(self.wrap_point(p));
        self.axial.iter().position(|&c| c == wrapped)
    }

    /// Cells adjacent to `cell` (up to six; fewer at the edge without wraparound).
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        self.neighbor_offsets(cell).into_iter().map(|(c, _)| c).collect()
    }

    /// Adjacent cells with the displacement from `cell`'s site to theirs,
    /// measured before wrapping.
    fn neighbor_offsets(&self, cell: usize) -> Vec<(usize, Point)> {
        let (q, r) = self.axial[cell];
        let d = self.inter_site_distance;
        AXIAL_DIRECTIONS
            .iter()
            .filter_map(|&(dq, dr)| {
                let c = self.cell_at((q + dq, r + dr))?;
                let offset = Point::new(d * (dq as f64 + dr as f64 / 2.0), d * 3f64.sqrt() / 2.0 * dr as f64);
                (c != cell).then_some((c, offset))
            })
            .collect()
    }

    /// Is `p` inside the hexagon of a site at the origin?
    fn in_unit_hexagon(&self, p: Point) -> bool {
        let half = self.inter_site_distance / 2.0;
        let s3 = 3f64.sqrt() / 2.0;
        p.x.abs() <= half
            && (0.5 * p.x + s3 * p.y).abs() <= half
            && (-0.5 * p.x + s3 * p.y).abs() <= half
    }

    fn sample_in_hexagon<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let half = self.inter_site_distance / 2.0;
        let ymax = self.inter_site_distance / 3f64.sqrt();
        loop {
            let p = Point::new(rng.random_range(-half..half), rng.random_range(-ymax..ymax));
            if self.in_unit_hexagon(p) {
                return p;
            }
        }
    }

    /// Cell whose site is geometrically closest to `p`.
    pub fn geometric_cell(&self, p: Point) -> usize {
        (0..self.num_cells())
            .min_by(|&a, &b| {
                distance(self, p, self.bs_positions[a]).total_cmp(&distance(self, p, self.bs_positions[b]))
            })
            .expect("lattice has at least one cell")
    }
}

/// Euclidean distance; with wraparound, the minimum over the seven cluster images of `b`.
pub fn distance(lattice: &CellLattice, a: Point, b: Point) -> f64 {
    distance_sq(lattice, a, b).sqrt()
}

fn distance_sq(lattice: &CellLattice, a: Point, b: Point) -> f64 {
    let sq = |p: Point| p.x * p.x + p.y * p.y;
    let direct = sq(a - b);
    if !lattice.wraparound {
        return direct;
    }
    lattice
        .wrap_shifts
        .iter()
        .map(|&s| sq(a - (b + s)))
        .fold(direct, f64::min)
}

/// Cells other than cell 0 that reuse cell 0's pilots.
pub fn pilot_reuse_set(lattice: &CellLattice) -> Vec<usize> {
    let own = lattice.reuse_color[CELL_OF_INTEREST];
    (0..lattice.num_cells())
        .filter(|&c| c != CELL_OF_INTEREST && lattice.reuse_color[c] == own)
        .collect()
}

/// Index of the largest gain; the first one wins ties.
pub fn associate(gains: &[f64]) -> usize {
    let mut best = 0;
    for (i, &g) in gains.iter().enumerate() {
        if g > gains[best] {
            best = i;
        }
    }
    best
}

/// Large-scale gain `L_ref·χ/r^η` (antenna gain excluded).
pub fn large_scale_gain(distance_m: f64, shadowing: f64, params: &SystemParams) -> Result<f64> {
    if distance_m < params.min_ue_bs_distance_m {
        return Err(Error::DistanceBelowFloor {
            distance: distance_m,
            floor: params.min_ue_bs_distance_m,
        });
    }
    if shadowing <= 0.0 {
        return Err(Error::NegativeInput("shadowing"));
    }
    Ok(params.pathloss_intercept() * shadowing / distance_m.powf(params.pathloss_exponent))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub position: Point,
    pub serving_cell: usize,
    /// Shadowing towards every site, in dB.
    pub shadowing_db: Vec<f64>,
    /// Large-scale gain towards every site (antenna gain excluded).
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDrop {
    pub lattice: CellLattice,
    /// `uplink[cell][k]`: the k-th uplink user served by `cell`.
    pub uplink: Vec<Vec<UserEquipment>>,
    pub downlink: Vec<Vec<UserEquipment>>,
    pub master_seed: u64,
    pub drop_index: u64,
}

/// Per-drop generator for stream `purpose` (0 uplink, 1 downlink).
pub fn drop_rng(master_seed: u64, drop_index: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(drop_index.wrapping_mul(2).wrapping_add(purpose));
    rng
}

/// Drops `users_ul_per_cell` uplink and `users_dl_per_cell` downlink users per
/// cell. Positions are uniform over the cell's hexagon and its neighbours; a
/// candidate is kept only if its best large-scale gain (pathloss and IID
/// shadowing per link) points at the cell being filled and it respects the
/// minimum distance to every site.
pub fn drop_users(
    lattice: &CellLattice,
    params: &SystemParams,
    master_seed: u64,
    drop_index: u64,
) -> Result<NetworkDrop> {
    let mut ul_rng = drop_rng(master_seed, drop_index, 0);
    let mut dl_rng = drop_rng(master_seed, drop_index, 1);
    let shadowing = Normal::new(0.0, params.shadowing_sigma_db)
        .map_err(|_| Error::param("shadowing_sigma_db", "must be ≥ 0"))?;
    let mut uplink = Vec::with_capacity(lattice.num_cells());
    let mut downlink = Vec::with_capacity(lattice.num_cells());
    for cell in 0..lattice.num_cells() {
        uplink.push(place_users(lattice, params, &shadowing, cell, params.users_ul_per_cell, &mut ul_rng)?);
    }
    for cell in 0..lattice.num_cells() {
        downlink.push(place_users(lattice, params, &shadowing, cell, params.users_dl_per_cell, &mut dl_rng)?);
    }
    Ok(NetworkDrop {
        lattice: lattice.clone(),
        uplink,
        downlink,
        master_seed,
        drop_index,
    })
}

fn place_users<R: Rng + ?Sized>(
    lattice: &CellLattice,
    params: &SystemParams,
    shadowing: &Normal<f64>,
    cell: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<UserEquipment>> {
    let mut patch = vec![Point::ORIGIN];
    patch.extend(lattice.neighbor_offsets(cell).into_iter().map(|(_, offset)| offset));
    let mut users = Vec::with_capacity(count);
    let mut attempts = 0u64;
    let n = lattice.num_cells();
    let mut shadow_db = vec![0.0; n];
    let mut gains = vec![0.0; n];
    let pathloss_slope = 5.0 * params.pathloss_exponent;
    let min_sq = params.min_ue_bs_distance_m * params.min_ue_bs_distance_m;
    let mut score = vec![0.0; n];
    'candidate: while users.len() < count {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::PlacementExhausted { cell, attempts: MAX_PLACEMENT_ATTEMPTS });
        }
        let host = patch[rng.random_range(0..patch.len())];
        let offset = lattice.sample_in_hexagon(rng);
        let position = lattice.wrap_point(lattice.bs_positions[cell] + host + offset);
        // Gains compared in dB up to the common intercept; the serving cell
        // first, so a candidate is dropped as soon as another site beats it.
        for bs in std::iter::once(cell).chain((0..n).filter(|&b| b != cell)) {
            let r2 = distance_sq(lattice, position, lattice.bs_positions[bs]);
            if r2 < min_sq {
                continue 'candidate;
            }
            shadow_db[bs] = shadowing.sample(rng);
            score[bs] = shadow_db[bs] - pathloss_slope * r2.log10();
            if bs != cell && (score[bs] > score[cell] || (score[bs] == score[cell] && bs < cell)) {
                continue 'candidate;
            }
        }
        for (bs, g) in gains.iter_mut().enumerate() {
            let r = distance(lattice, position, lattice.bs_positions[bs]);
            *g = large_scale_gain(r, db_to_linear(shadow_db[bs]), params)?;
        }
        users.push(UserEquipment {
            position,
            serving_cell: cell,
            shadowing_db: shadow_db.clone(),
            gains: gains.clone(),
        });
    }
    Ok(users)
}

impl NetworkDrop {
    /// Writes `direction,cell,ue,x_m,y_m,serving_bs,shadowing_db` rows; the
    /// shadowing column is towards the serving site.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["direction", "cell", "ue", "x_m", "y_m", "serving_bs", "shadowing_db"])?;
        for (direction, users) in [("ul", &self.uplink), ("dl", &self.downlink)] {
            for (cell, list) in users.iter().enumerate() {
                for (k, ue) in list.iter().enumerate() {
                    w.write_record([
                        direction.to_string(),
                        cell.to_string(),
                        k.to_string(),
                        format!("{:.6}", ue.position.x),
                        format!("{:.6}", ue.position.y),
                        ue.serving_cell.to_string(),
                        format!("{:.6}", ue.shadowing_db[ue.serving_cell]),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn two_tier_sites() {
        let l = build_lattice(500.0, false);
        assert_eq!(l.num_cells(), 19);
        assert_eq!(l.bs_positions[0], Point::ORIGIN);
        let count = |r: f64| l.bs_positions.iter().filter(|p| close(p.norm(), r)).count();
        assert_eq!(count(500.0), 6);
        assert_eq!(count(1000.0), 6);
        assert_eq!(count(500.0 * 3f64.sqrt()), 6);
        assert!(close(500.0 * 3f64.sqrt(), 866.0254037844386));
    }

    #[test]
    fn coloring_is_proper() {
        for isd in [100.0, 500.0, 1732.0] {
            let l = build_lattice(isd, false);
            for a in 0..19 {
                for b in 0..19 {
                    let d = (l.bs_positions[a] - l.bs_positions[b]).norm();
                    if close(d, isd) {
                        assert_ne!(l.reuse_color[a], l.reuse_color[b], "cells {a},{b}");
                    }
                }
            }
            let first_tier: Vec<usize> = (1..7).collect();
            assert!(first_tier.iter().all(|&c| l.reuse_color[c] != l.reuse_color[0]));
        }
    }

    #[test]
    fn pilot_set_sizes() {
        let l = build_lattice(500.0, true);
        let set = pilot_reuse_set(&l);
        // brute force: count cells sharing cell 0's color among the other 18
        let brute = (1..19).filter(|&c| l.reuse_color[c] == l.reuse_color[0]).count();
        assert_eq!(set.len(), brute);
        assert_eq!(set.len(), 6);
        for &c in &set {
            assert!(close(l.bs_positions[c].norm(), 500.0 * 3f64.sqrt()));
        }
        let reuse1 = CellLattice::new(500.0, 2, 1, true);
        assert_eq!(pilot_reuse_set(&reuse1).len(), 18);
        let single = CellLattice::new(500.0, 0, 3, true);
        assert!(pilot_reuse_set(&single).is_empty());
    }

    #[test]
    fn one_tier_pilot_set_by_enumeration() {
        // Every proper 3-coloring of the 7-cell cluster gives the centre a
        // color of its own, so nothing reuses its pilots.
        let l = CellLattice::new(1.0, 1, 3, false);
        let adjacent = |a: usize, b: usize| close((l.bs_positions[a] - l.bs_positions[b]).norm(), 1.0);
        let mut colorings = 0;
        for code in 0..3usize.pow(7) {
            let colors: Vec<usize> = (0..7).map(|i| code / 3usize.pow(i) % 3).collect();
            let proper = (0..7).all(|a| (0..7).all(|b| !adjacent(a, b) || colors[a] != colors[b]));
            if proper {
                colorings += 1;
                assert_eq!((1..7).filter(|&c| colors[c] == colors[0]).count(), 0);
            }
        }
        assert!(colorings > 0);
        assert!(pilot_reuse_set(&l).is_empty());
    }

    #[test]
    fn wrap_shifts_tile_the_plane() {
        for tiers in 1..=2usize {
            let l = CellLattice::new(1.0, tiers, 3, true);
            let cluster: Vec<(i32, i32)> = l.axial.clone();
            let s1 = l.nearest_site(l.wrap_shifts[0]);
            let s2 = l.nearest_site(l.wrap_shifts[1]);
            for q in -12..=12 {
                for r in -12..=12 {
                    let mut hits = 0;
                    for i in -8..=8 {
                        for j in -8..=8 {
                            let c = (q - i * s1.0 - j * s2.0, r - i * s1.1 - j * s2.1);
                            if cluster.contains(&c) {
                                hits += 1;
                            }
                        }
                    }
                    assert_eq!(hits, 1, "site ({q},{r}) tiers {tiers}");
                }
            }
        }
    }

    #[test]
    fn distance_basics() {
        let l = build_lattice(500.0, false);
        let a = Point::new(3.0, -7.0);
        assert_eq!(distance(&l, a, a), 0.0);
        assert_eq!(distance(&l, Point::ORIGIN, Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn wraparound_never_increases_distance() {
        let plain = build_lattice(500.0, false);
        let wrapped = build_lattice(500.0, true);
        let far = plain
            .bs_positions
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        let d_plain = distance(&plain, Point::ORIGIN, far);
        let d_wrap = distance(&wrapped, Point::ORIGIN, far);
        let brute = std::iter::once(Point::ORIGIN)
            .chain(wrapped.wrap_shifts().iter().copied())
            .map(|s| (Point::ORIGIN - (far + s)).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(d_wrap <= d_plain);
        assert_eq!(d_wrap, brute);
        // With wraparound every site is at most two rings away.
        for &p in &wrapped.bs_positions {
            assert!(distance(&wrapped, Point::ORIGIN, p) <= 1000.0 + 1e-9);
        }
    }

    #[test]
    fn every_cell_has_six_neighbors_with_wraparound() {
        let l = build_lattice(500.0, true);
        for c in 0..19 {
            let n = l.neighbors(c);
            assert_eq!(n.len(), 6, "cell {c}: {n:?}");
            for &m in &n {
                assert!(close(distance(&l, l.bs_positions[c], l.bs_positions[m]), 500.0));
            }
        }
        let open = build_lattice(500.0, false);
        assert_eq!(open.neighbors(0).len(), 6);
        for c in 7..19 {
            let expected = if close(open.bs_positions[c].norm(), 1000.0) { 3 } else { 4 };
            assert_eq!(open.neighbors(c).len(), expected, "cell {c}");
        }
    }

    proptest! {
        #[test]
        fn seven_images_suffice(ax in -1200.0f64..1200.0, ay in -1200.0f64..1200.0,
                                bx in -1200.0f64..1200.0, by in -1200.0f64..1200.0) {
            let l = build_lattice(500.0, true);
            let a = l.wrap_point(Point::new(ax, ay));
            let b = l.wrap_point(Point::new(bx, by));
            prop_assert!(l.inside_cluster(a) && l.inside_cluster(b));
            let mut images = vec![Point::ORIGIN];
            for &s in l.wrap_shifts() {
                images.push(s);
                for &t in l.wrap_shifts() {
                    images.push(s + t);
                }
            }
            let brute = images.iter().map(|&s| (a - (b + s)).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!((distance(&l, a, b) - brute).abs() < 1e-9);
        }

        #[test]
        fn association_is_scale_invariant(gains in proptest::collection::vec(1e-12f64..1.0, 1..19),
                                          scale in 1e-6f64..1e6) {
            let scaled: Vec<f64> = gains.iter().map(|g| g * scale).collect();
            prop_assert_eq!(associate(&gains), associate(&scaled));
        }
    }

    #[test]
    fn gain_examples() {
        let p = SystemParams {
            pathloss_intercept_db: 0.0,
            min_ue_bs_distance_m: 1.0,
            ..SystemParams::default()
        };
        assert_eq!(large_scale_gain(1.0, 1.0, &p).unwrap(), 1.0);
        assert_eq!(large_scale_gain(2.0, 1.0, &p).unwrap(), 0.0625);
        assert_eq!(large_scale_gain(2.0, 2.0, &p).unwrap(), 0.125);
        assert!(matches!(
            large_scale_gain(0.5, 1.0, &p),
            Err(Error::DistanceBelowFloor { .. })
        ));
    }

    #[test]
    fn centre_user_served_by_own_cell_without_shadowing() {
        let p = SystemParams {
            shadowing_sigma_db: 0.0,
            ..SystemParams::default()
        };
        let l = build_lattice(500.0, true);
        for (c, &site) in l.bs_positions.iter().enumerate() {
            let position = site + Point::new(20.0, 0.0);
            let gains: Vec<f64> = l
                .bs_positions
                .iter()
                .map(|&b| large_scale_gain(distance(&l, position, b), 1.0, &p).unwrap())
                .collect();
            assert_eq!(associate(&gains), c);
        }
    }

    #[test]
    fn drops_are_deterministic_and_well_formed() {
        let p = SystemParams::default();
        let l = CellLattice::from_params(&p);
        let a = drop_users(&l, &p, 7, 3).unwrap();
        let b = drop_users(&l, &p, 7, 3).unwrap();
        assert_eq!(a, b);
        let c = drop_users(&l, &p, 7, 4).unwrap();
        assert_ne!(a.uplink[0][0].position, c.uplink[0][0].position);
        for (cell, users) in a.uplink.iter().enumerate() {
            assert_eq!(users.len(), p.users_ul_per_cell);
            assert_eq!(a.downlink[cell].len(), p.users_dl_per_cell);
            for ue in users {
                assert_eq!(ue.serving_cell, cell);
                assert_eq!(associate(&ue.gains), cell);
                for &bs in &l.bs_positions {
                    assert!(distance(&l, ue.position, bs) >= p.min_ue_bs_distance_m);
                }
            }
        }
    }

    #[test]
    fn downlink_count_does_not_move_uplink_users() {
        let p = SystemParams::default();
        let q = SystemParams {
            users_dl_per_cell: 20,
            ..p.clone()
        };
        let l = CellLattice::from_params(&p);
        let a = drop_users(&l, &p, 11, 0).unwrap();
        let b = drop_users(&l, &q, 11, 0).unwrap();
        assert_eq!(a.uplink, b.uplink);
    }

    #[test]
    fn shadowing_moves_some_users_out_of_their_hexagon() {
        let p = SystemParams::default();
        let l = CellLattice::from_params(&p);
        let mut outside = 0usize;
        let mut total = 0usize;
        for i in 0..200 {
            let d = drop_users(&l, &p, 5, i).unwrap();
            for (cell, users) in d.uplink.iter().enumerate() {
                for ue in users {
                    total += 1;
                    if l.geometric_cell(ue.position) != cell {
                        outside += 1;
                    }
                }
            }
        }
        assert!(outside > 0, "{outside}/{total}");
        let no_shadow = SystemParams {
            shadowing_sigma_db: 0.0,
            ..p
        };
        let d = drop_users(&l, &no_shadow, 5, 0).unwrap();
        for (cell, users) in d.uplink.iter().enumerate() {
            for ue in users {
                assert_eq!(l.geometric_cell(ue.position), cell);
            }
        }
    }

    #[test]
    fn csv_export_has_all_users() {
        let p = SystemParams::default();
        let l = CellLattice::from_params(&p);
        let d = drop_users(&l, &p, 1, 0).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 19 * 20);
        assert!(text.starts_with("direction,cell,ue,x_m,y_m,serving_bs,shadowing_db"));
    }
}
