//! Scalar inputs of the hardening SQINR as seen from the cell of interest.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{pilot_reuse_set, NetworkDrop, CELL_OF_INTEREST};
use crate::params::{inr, Quantizer, SystemParams};

/// Everything the closed forms need about one drop, seen from BS 0.
///
/// `snr[l][k]` is the uplink SNR at BS 0 of the k-th user served by cell `l`
/// at full power `P_u` (antenna gain included); `power_ratio[l][k]` is its
/// `P/P_u`. Row 0 is the cell of interest. The user with index k in a cell of
/// `pilot_cells` shares the pilot of user k in cell 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub snr: Vec<Vec<f64>>,
    pub power_ratio: Vec<Vec<f64>>,
    pub pilot_cells: Vec<usize>,
    pub inr: f64,
    pub num_dl_users: usize,
    pub num_antennas: usize,
    pub uplink: Quantizer,
    pub downlink: Quantizer,
    /// μ_SI² (linear).
    pub si_channel_gain: f64,
    /// `P_u/P_SI`, the prefactor of the SI covariance in the ADC distortion.
    pub uplink_to_si_power: f64,
}

impl LinkBudget {
    /// Full-resolution, SI-free budget with unit power ratios.
    pub fn from_snr(snr: Vec<Vec<f64>>, pilot_cells: Vec<usize>, num_antennas: usize) -> Self {
        let power_ratio = snr.iter().map(|row| vec![1.0; row.len()]).collect();
        LinkBudget {
            snr,
            power_ratio,
            pilot_cells,
            inr: 0.0,
            num_dl_users: 0,
            num_antennas,
            uplink: Quantizer::full(),
            downlink: Quantizer::full(),
            si_channel_gain: 1.0,
            uplink_to_si_power: 1.0,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.snr.len()
    }

    pub fn users_in_cell_of_interest(&self) -> usize {
        self.snr[CELL_OF_INTEREST].len()
    }

    /// `P/P_u · SNR` of user `k` of `cell`.
    pub fn effective(&self, cell: usize, k: usize) -> f64 {
        self.power_ratio[cell][k] * self.snr[cell][k]
    }

    pub fn own(&self, k: usize) -> f64 {
        self.effective(CELL_OF_INTEREST, k)
    }

    /// Raw SNRs of the users sharing user k's pilot, one per cell of the pilot set.
    pub fn snr_pilot_set(&self, k: usize) -> Vec<f64> {
        self.pilot_cells.iter().map(|&l| self.snr[l][k]).collect()
    }

    pub fn contamination_sum(&self, k: usize) -> f64 {
        self.pilot_cells.iter().map(|&l| self.effective(l, k)).sum()
    }

    pub fn contamination_sq_sum(&self, k: usize) -> f64 {
        self.pilot_cells
            .iter()
            .map(|&l| self.effective(l, k).powi(2))
            .sum()
    }

    /// Estimate normaliser `1 + own + Σ_pilot-set`.
    pub fn estimate_normalizer(&self, k: usize) -> f64 {
        1.0 + self.own(k) + self.contamination_sum(k)
    }

    /// Σ over every cell and every uplink user, own user included.
    pub fn total(&self) -> f64 {
        (0..self.num_cells())
            .map(|l| (0..self.snr[l].len()).map(|k| self.effective(l, k)).sum::<f64>())
            .sum()
    }

    pub fn check(&self, k: usize) -> Result<()> {
        let users = self.users_in_cell_of_interest();
        if k >= users {
            return Err(Error::UserOutOfRange { user: k, users });
        }
        if self.power_ratio.len() != self.snr.len()
            || self.power_ratio.iter().zip(&self.snr).any(|(p, s)| p.len() != s.len())
        {
            return Err(Error::Usage("power_ratio and snr shapes differ".into()));
        }
        for &l in &self.pilot_cells {
            if l == CELL_OF_INTEREST || l >= self.num_cells() || self.snr[l].len() <= k {
                return Err(Error::Usage(format!("pilot cell {l} has no user {k}")));
            }
        }
        if self.snr.iter().flatten().any(|&s| !(s >= 0.0)) {
            return Err(Error::NegativeInput("snr"));
        }
        if self.power_ratio.iter().flatten().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::NegativeInput("power_ratio"));
        }
        if !(self.inr >= 0.0) {
            return Err(Error::NegativeInput("inr"));
        }
        if !(self.si_channel_gain >= 0.0) || !(self.uplink_to_si_power >= 0.0) {
            return Err(Error::NegativeInput("si_channel_gain"));
        }
        for q in [self.uplink, self.downlink] {
            if !(q.alpha > 0.0 && q.alpha <= 1.0) {
                return Err(Error::param("alpha", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Debug dump: `cell,ue,snr_db,power_ratio,pilot_shared`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "ue", "snr_db", "power_ratio", "pilot_shared"])?;
        for (l, row) in self.snr.iter().enumerate() {
            for (k, &s) in row.iter().enumerate() {
                w.write_record([
                    l.to_string(),
                    k.to_string(),
                    format!("{:.6}", 10.0 * s.log10()),
                    format!("{}", self.power_ratio[l][k]),
                    (self.pilot_cells.contains(&l)).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Uplink SNR `G·P_u·G_ant/σ²` of a link with large-scale gain `G`.
pub fn snr_of_link(gain: f64, params: &SystemParams) -> f64 {
    gain * params.uplink_power_w * params.antenna_gain() / params.noise_power_w()
}

pub fn assemble_link_budget(drop: &NetworkDrop, params: &SystemParams) -> Result<LinkBudget> {
    let snr: Vec<Vec<f64>> = drop
        .uplink
        .iter()
        .map(|users| {
            users
                .iter()
                .map(|ue| snr_of_link(ue.gains[CELL_OF_INTEREST], params))
                .collect()
        })
        .collect();
    let power_ratio = drop
        .uplink
        .iter()
        .map(|users| (0..users.len()).map(|k| params.power_control.ratio(k)).collect())
        .collect();
    Ok(LinkBudget {
        snr,
        power_ratio,
        pilot_cells: pilot_reuse_set(&drop.lattice),
        inr: inr(params),
        num_dl_users: params.users_dl_per_cell,
        num_antennas: params.num_antennas,
        uplink: params.uplink_quantizer()?,
        downlink: params.downlink_quantizer()?,
        si_channel_gain: params.si_channel_gain(),
        uplink_to_si_power: params.uplink_power_w / params.si_power_w,
    })
}

/// Random multi-cell budget for identity checks: 1–7 cells, 1–5 users per cell,
/// random pilot set, power control, INR and resolutions.
pub fn random_link_budget<R: Rng + ?Sized>(rng: &mut R) -> LinkBudget {
    let cells = rng.random_range(1..8);
    let users = rng.random_range(1..6);
    let snr: Vec<Vec<f64>> = (0..cells)
        .map(|l| {
            (0..users)
                .map(|_| {
                    let db = if l == 0 {
                        rng.random_range(-10.0..40.0)
                    } else {
                        rng.random_range(-30.0..15.0)
                    };
                    10f64.powf(db / 10.0)
                })
                .collect()
        })
        .collect();
    let pilot_cells: Vec<usize> = (1..cells).filter(|_| rng.random_bool(0.5)).collect();
    let mut lb = LinkBudget::from_snr(snr, pilot_cells, rng.random_range(8..512));
    lb.power_ratio = lb
        .snr
        .iter()
        .map(|row| row.iter().map(|_| rng.random_range(0.05..=1.0)).collect())
        .collect();
    lb.inr = 10f64.powf(rng.random_range(-6.0..3.0));
    lb.num_dl_users = rng.random_range(1..20);
    lb.uplink = Quantizer::bits(rng.random_range(1..8)).unwrap();
    lb.downlink = Quantizer::bits(rng.random_range(1..8)).unwrap();
    lb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance, drop_users, large_scale_gain, CellLattice, Point};
    use crate::params::{db_to_linear, linear_to_db, noise_power_dbm, watts_to_dbm};

    #[test]
    fn snr_examples() {
        let p = SystemParams::default();
        assert_eq!(snr_of_link(0.0, &p), 0.0);
        let g = p.noise_power_w() / (p.uplink_power_w * p.antenna_gain());
        assert!((snr_of_link(g, &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_250m() {
        // 23.01 dBm + 30 dB − 38.46 dB − 40·log10(250) + 97.99 dB ≈ 16.62 dB
        let p = SystemParams::default();
        let g = large_scale_gain(250.0, 1.0, &p).unwrap();
        let snr_db = linear_to_db(snr_of_link(g, &p));
        let chain = watts_to_dbm(p.uplink_power_w) + p.bs_antenna_gain_db + p.pathloss_intercept_db
            - 40.0 * 250f64.log10()
            - noise_power_dbm(&p);
        assert!((snr_db - chain).abs() < 1e-9);
        assert!((snr_db - 16.6224).abs() < 1e-3, "{snr_db}");
    }

    #[test]
    fn db_chain_matches_linear() {
        let p = SystemParams::default();
        for (r, shadow_db) in [(10.0, -7.3), (123.4, 0.0), (871.0, 12.5), (2000.0, 3.3)] {
            let linear = snr_of_link(large_scale_gain(r, db_to_linear(shadow_db), &p).unwrap(), &p);
            let db = watts_to_dbm(p.uplink_power_w) + p.bs_antenna_gain_db + p.pathloss_intercept_db
                + shadow_db
                - 10.0 * p.pathloss_exponent * f64::log10(r)
                - noise_power_dbm(&p);
            assert!((db_to_linear(db) - linear).abs() / linear < 1e-10);
        }
    }

    #[test]
    fn single_cell_budget() {
        let p = SystemParams {
            tiers: 0,
            ..SystemParams::default()
        };
        let l = CellLattice::from_params(&p);
        let d = drop_users(&l, &p, 1, 0).unwrap();
        let lb = assemble_link_budget(&d, &p).unwrap();
        assert_eq!(lb.num_cells(), 1);
        assert!(lb.snr_pilot_set(0).is_empty());
        lb.check(0).unwrap();
    }

    #[test]
    fn two_tier_budget_shape() {
        let p = SystemParams::default();
        let l = CellLattice::from_params(&p);
        let d = drop_users(&l, &p, 1, 0).unwrap();
        let lb = assemble_link_budget(&d, &p).unwrap();
        assert_eq!(lb.snr.iter().map(Vec::len).sum::<usize>(), 19 * p.users_ul_per_cell);
        assert_eq!(lb.pilot_cells.len(), 6);
        for k in 0..p.users_ul_per_cell {
            let set = lb.snr_pilot_set(k);
            for (i, &l) in lb.pilot_cells.iter().enumerate() {
                assert_eq!(set[i], lb.snr[l][k]);
            }
        }
        assert!(lb.snr.iter().flatten().all(|&s| s >= 0.0));
    }

    #[test]
    fn symmetric_pilot_users_have_equal_snr() {
        // Pilot-sharing users placed at the same offset from their own sites
        // that keeps them equidistant from the origin.
        let p = SystemParams {
            shadowing_sigma_db: 0.0,
            ..SystemParams::default()
        };
        let l = CellLattice::from_params(&p);
        let set = pilot_reuse_set(&l);
        let snrs: Vec<f64> = set
            .iter()
            .map(|&c| {
                let site = l.bs_positions[c];
                let toward_origin = Point::new(-site.x / site.norm() * 50.0, -site.y / site.norm() * 50.0);
                let ue = site + toward_origin;
                let r = distance(&l, ue, Point::ORIGIN);
                snr_of_link(large_scale_gain(r, 1.0, &p).unwrap(), &p)
            })
            .collect();
        for s in &snrs {
            assert!((s - snrs[0]).abs() / snrs[0] < 1e-12);
        }
    }
}
