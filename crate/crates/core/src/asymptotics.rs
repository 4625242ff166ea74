//! Large-system and high-SNR limits of the hardening SQINR, plus probes that
//! drive the closed forms toward each limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkbudget::LinkBudget;
use crate::sqinr::{sinr_hd_full_res, sqinr_hardening, sqinr_perfect_csi};

fn se(sqinr: f64) -> f64 {
    sqinr.ln_1p() / std::f64::consts::LN_2
}

/// Full-resolution spectral efficiency (bits/s/Hz) at fixed power and antennas.
pub fn full_resolution_se(lb: &LinkBudget, k: usize) -> Result<f64> {
    Ok(se(full_resolution_sqinr(lb, k)?))
}

pub fn full_resolution_sqinr(lb: &LinkBudget, k: usize) -> Result<f64> {
    lb.check(k)?;
    let na = lb.num_antennas as f64;
    let own = lb.own(k);
    let norm = lb.estimate_normalizer(k);
    let numerator = own * own * na / norm;
    let den = 1.0
        + lb.total()
        + na * lb.contamination_sq_sum(k) / norm
        + na * lb.num_dl_users as f64 * lb.inr;
    Ok(numerator / den)
}

/// High-SNR ceiling `log2(1 + N_a/(α_u(2−α_u)))`.
pub fn high_snr_quantized_se(num_antennas: usize, alpha_u: f64) -> f64 {
    se(high_snr_quantized_limit(num_antennas, alpha_u))
}

pub fn high_snr_quantized_limit(num_antennas: usize, alpha_u: f64) -> f64 {
    num_antennas as f64 / (alpha_u * (2.0 - alpha_u))
}

/// SQINR limit when every transmit power scales as `E/N_a`.
pub fn power_scaling_limit(e_ratio_snr: f64, alpha_u: f64, alpha_d: f64, num_dl_users: usize, inr: f64) -> f64 {
    alpha_u * e_ratio_snr * e_ratio_snr
        / (1.0 + alpha_d * (alpha_u * num_dl_users as f64 + 1.0 - alpha_u) * inr)
}

pub fn power_scaling_se(e_ratio_snr: f64, alpha_u: f64, alpha_d: f64, num_dl_users: usize, inr: f64) -> f64 {
    se(power_scaling_limit(e_ratio_snr, alpha_u, alpha_d, num_dl_users, inr))
}

/// SQINR limit as `N_a/K → ∞` at fixed powers.
pub fn antenna_ratio_limit(lb: &LinkBudget, k: usize) -> Result<f64> {
    lb.check(k)?;
    let au = lb.uplink.alpha;
    let ad = lb.downlink.alpha;
    let own = lb.own(k);
    let norm = lb.estimate_normalizer(k);
    let den = au * lb.contamination_sq_sum(k) / norm
        + ad * (au * lb.num_dl_users as f64 + 1.0 - au) * lb.inr;
    if den <= 0.0 {
        return Err(Error::UnboundedLimit);
    }
    Ok(au * own * own / norm / den)
}

pub fn antenna_ratio_se(lb: &LinkBudget, k: usize) -> Result<f64> {
    Ok(se(antenna_ratio_limit(lb, k)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LimitId {
    /// Half-duplex full-resolution SINR → `N_a` as the own SNR grows.
    HighSnrFullRes,
    /// Full-resolution SE identity.
    FullResolution,
    /// Perfect-CSI SQINR → `N_a/(α_u(2−α_u))` as the own SNR grows.
    HighSnrQuantized,
    /// Powers scaled as `E/N_a`.
    PowerScaling,
    /// `N_a/K → ∞`.
    AntennaRatio,
}

impl LimitId {
    pub const ALL: [LimitId; 5] = [
        LimitId::HighSnrFullRes,
        LimitId::FullResolution,
        LimitId::HighSnrQuantized,
        LimitId::PowerScaling,
        LimitId::AntennaRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LimitId::HighSnrFullRes => "high-snr-full-res",
            LimitId::FullResolution => "full-resolution-identity",
            LimitId::HighSnrQuantized => "high-snr-quantized",
            LimitId::PowerScaling => "power-scaling",
            LimitId::AntennaRatio => "antenna-ratio",
        }
    }

    /// Relative gap accepted at the last probe point; `None` for report-only limits.
    pub fn tolerance(self) -> Option<f64> {
        match self {
            LimitId::HighSnrFullRes => Some(1e-3),
            LimitId::FullResolution => Some(1e-12),
            LimitId::HighSnrQuantized => Some(5e-3),
            LimitId::PowerScaling => None,
            LimitId::AntennaRatio => Some(1e-3),
        }
    }

    /// Default driver schedule: own SNR `10²…10¹²` for the high-SNR limits (a
    /// user next to the site already reaches ~10⁷), `N_a = 10²…10⁸` otherwise.
    pub fn default_schedule(self) -> Vec<f64> {
        let top = match self {
            LimitId::HighSnrFullRes | LimitId::FullResolution | LimitId::HighSnrQuantized => 12,
            LimitId::PowerScaling | LimitId::AntennaRatio => 8,
        };
        (2..=top).map(|e| 10f64.powi(e)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub limit: LimitId,
    /// Limit in linear SQINR.
    pub limit_value: f64,
    /// `(driver, closed-form value)` along the schedule.
    pub probe_values: Vec<(f64, f64)>,
    pub relative_gap: f64,
    pub asserted: bool,
    pub converged: bool,
    /// For the quantized high-SNR limit, the gap of the estimated-CSI SQINR.
    pub estimated_csi_gap: Option<f64>,
}

impl LimitReport {
    pub fn gaps(&self) -> Vec<f64> {
        self.probe_values
            .iter()
            .map(|&(_, v)| relative_gap(v, self.limit_value))
            .collect()
    }
}

fn relative_gap(value: f64, limit: f64) -> f64 {
    if limit > 0.0 {
        (value - limit).abs() / limit
    } else {
        (value - limit).abs()
    }
}

/// Evaluates the closed form behind `limit` along `schedule`, starting from
/// `base` for user `k`, and compares the last point with the limit formula.
///
/// High-SNR probes replace the own SNR with the driver value; the antenna
/// probes replace `N_a`. The power-scaling probe divides every SNR and the
/// INR of `base` by `N_a`, treating `base` as the `E`-normalised budget.
pub fn convergence_probe(limit: LimitId, base: &LinkBudget, k: usize, schedule: &[f64]) -> Result<LimitReport> {
    base.check(k)?;
    if schedule.is_empty() {
        return Err(Error::Usage("empty probe schedule".into()));
    }
    let mut estimated_csi_gap = None;
    let mut probe_values = Vec::with_capacity(schedule.len());
    let limit_value = match limit {
        LimitId::HighSnrFullRes => {
            for &snr in schedule {
                let mut lb = base.clone();
                lb.snr[0][k] = snr / lb.power_ratio[0][k];
                probe_values.push((snr, sinr_hd_full_res(&lb, k)?));
            }
            base.num_antennas as f64
        }
        LimitId::FullResolution => {
            // Identity at every point: compare SEs, report in SQINR terms.
            let mut lb = base.clone();
            lb.uplink = crate::params::Quantizer::full();
            lb.downlink = crate::params::Quantizer::full();
            let mut worst: f64 = 0.0;
            let mut last = 0.0;
            for &snr in schedule {
                lb.snr[0][k] = snr / lb.power_ratio[0][k];
                let closed = sqinr_hardening(&lb, k)?.sqinr;
                let reduced = full_resolution_sqinr(&lb, k)?;
                worst = worst.max(relative_gap(closed, reduced));
                probe_values.push((snr, closed));
                last = reduced;
            }
            let converged = worst <= limit.tolerance().unwrap();
            return Ok(LimitReport {
                limit,
                limit_value: last,
                probe_values,
                relative_gap: worst,
                asserted: true,
                converged,
                estimated_csi_gap: None,
            });
        }
        LimitId::HighSnrQuantized => {
            let limit_value = high_snr_quantized_limit(base.num_antennas, base.uplink.alpha);
            let mut estimated = 0.0;
            for &snr in schedule {
                let mut lb = base.clone();
                lb.snr[0][k] = snr / lb.power_ratio[0][k];
                probe_values.push((snr, sqinr_perfect_csi(&lb, k)?));
                estimated = sqinr_hardening(&lb, k)?.sqinr;
            }
            estimated_csi_gap = Some(relative_gap(estimated, limit_value));
            limit_value
        }
        LimitId::PowerScaling => {
            for &na in schedule {
                let mut lb = base.clone();
                lb.num_antennas = na.round() as usize;
                let scale = 1.0 / lb.num_antennas as f64;
                for row in lb.snr.iter_mut() {
                    for s in row.iter_mut() {
                        *s *= scale;
                    }
                }
                lb.inr *= scale;
                probe_values.push((na, sqinr_hardening(&lb, k)?.sqinr));
            }
            power_scaling_limit(base.own(k), base.uplink.alpha, base.downlink.alpha, base.num_dl_users, base.inr)
        }
        LimitId::AntennaRatio => {
            for &na in schedule {
                let mut lb = base.clone();
                lb.num_antennas = na.round() as usize;
                probe_values.push((na, sqinr_hardening(&lb, k)?.sqinr));
            }
            antenna_ratio_limit(base, k)?
        }
    };
    let last = probe_values.last().expect("schedule is non-empty").1;
    let gap = relative_gap(last, limit_value);
    let tolerance = limit.tolerance();
    Ok(LimitReport {
        limit,
        limit_value,
        probe_values,
        relative_gap: gap,
        asserted: tolerance.is_some(),
        converged: tolerance.is_some_and(|t| gap <= t),
        estimated_csi_gap,
    })
}

/// Antenna count of the quantized high-SNR probe. The perfect-CSI SQINR
/// saturates at `(N_a+1)/(α_u(2−α_u))`, a relative `1/N_a` above the ceiling.
pub const HIGH_SNR_PROBE_ANTENNAS: usize = 1000;

/// Every limit probed on the default schedule. The quantized high-SNR limit
/// uses a single-user cell with `base`'s quantizers and
/// [`HIGH_SNR_PROBE_ANTENNAS`]; the antenna-ratio limit is skipped when it is
/// unbounded.
pub fn standard_probes(base: &LinkBudget, k: usize) -> Result<Vec<LimitReport>> {
    let mut single = LinkBudget::from_snr(vec![vec![1.0]], vec![], HIGH_SNR_PROBE_ANTENNAS);
    single.uplink = base.uplink;
    single.downlink = base.downlink;
    let mut reports = Vec::new();
    for id in LimitId::ALL {
        let schedule = id.default_schedule();
        let report = match id {
            LimitId::HighSnrQuantized => convergence_probe(id, &single, 0, &schedule),
            _ => convergence_probe(id, base, k, &schedule),
        };
        match report {
            Ok(r) => reports.push(r),
            Err(Error::UnboundedLimit) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Quantizer;
    use crate::sqinr::tests::random_budget;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn contaminated() -> LinkBudget {
        let mut lb = LinkBudget::from_snr(
            vec![vec![20.0, 8.0, 3.0], vec![0.4, 0.1, 0.2], vec![0.3, 0.05, 0.1], vec![0.02, 0.01, 0.03]],
            vec![1, 2],
            100,
        );
        lb.uplink = Quantizer::bits(3).unwrap();
        lb.downlink = Quantizer::bits(3).unwrap();
        lb.inr = 0.01;
        lb.num_dl_users = 4;
        lb
    }

    #[test]
    fn full_resolution_identity_on_random_budgets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mut lb = random_budget(&mut rng);
            lb.uplink = Quantizer::full();
            lb.downlink = Quantizer::full();
            for k in 0..lb.users_in_cell_of_interest() {
                let closed = sqinr_hardening(&lb, k).unwrap().sqinr;
                let reduced = full_resolution_se(&lb, k).unwrap();
                assert!(rel(se(closed), reduced) <= 1e-12);
                assert!(rel(closed, full_resolution_sqinr(&lb, k).unwrap()) <= 1e-12);
            }
        }
    }

    #[test]
    fn full_resolution_examples() {
        let lb = LinkBudget::from_snr(vec![vec![10.0]], vec![], 100);
        let se = full_resolution_se(&lb, 0).unwrap();
        assert!(rel(se, (1.0 + 10000.0 / 121.0f64).log2()) < 1e-14);
        assert!((se - 6.386).abs() < 1e-3);
        let silent = LinkBudget::from_snr(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1], 10);
        assert_eq!(full_resolution_se(&silent, 0).unwrap(), 0.0);
    }

    #[test]
    fn high_snr_ceiling_examples() {
        assert!(rel(high_snr_quantized_se(100, 1.0), 101f64.log2()) < 1e-15);
        assert!((high_snr_quantized_se(100, 1.0) - 6.6582).abs() < 1e-4);
        let a = Quantizer::bits(3).unwrap().alpha;
        assert!((a * (2.0 - a) - 0.99881).abs() < 1e-5);
        assert!((high_snr_quantized_se(100, a) - 6.660).abs() < 1e-3);
        for alpha in [0.1, 0.5, 0.9, 0.999] {
            assert!(high_snr_quantized_se(100, alpha) > high_snr_quantized_se(100, 1.0));
        }
    }

    #[test]
    fn power_scaling_examples() {
        assert_eq!(power_scaling_se(1.0, 1.0, 1.0, 10, 0.0), 1.0);
        assert!(rel(power_scaling_se(10.0, 1.0, 1.0, 10, 1.0), (1.0 + 100.0 / 11.0f64).log2()) < 1e-15);
        assert!((power_scaling_se(10.0, 1.0, 1.0, 10, 1.0) - 3.335).abs() < 1e-3);
        assert_eq!(power_scaling_se(0.0, 0.9, 0.9, 10, 1.0), 0.0);
    }

    #[test]
    fn antenna_ratio_limit_values() {
        let lb = contaminated();
        let mut big = lb.clone();
        big.num_antennas = 100_000_000;
        let closed = sqinr_hardening(&big, 0).unwrap().sqinr;
        assert!(rel(closed, antenna_ratio_limit(&lb, 0).unwrap()) < 1e-3);

        let clean = LinkBudget::from_snr(vec![vec![5.0]], vec![], 64);
        assert!(matches!(antenna_ratio_limit(&clean, 0), Err(Error::UnboundedLimit)));

        // α = 1: denominator is pilot term + K_d·INR
        let mut full = lb.clone();
        full.uplink = Quantizer::full();
        full.downlink = Quantizer::full();
        let norm = full.estimate_normalizer(0);
        let expected = full.own(0).powi(2) / norm / (full.contamination_sq_sum(0) / norm + 4.0 * 0.01);
        assert!(rel(antenna_ratio_limit(&full, 0).unwrap(), expected) < 1e-14);
    }

    #[test]
    fn probes() {
        let lb = contaminated();
        let sched = LimitId::HighSnrFullRes.default_schedule();
        let r = convergence_probe(LimitId::HighSnrFullRes, &lb, 0, &sched).unwrap();
        assert!(r.converged, "{r:?}");
        let r = convergence_probe(LimitId::AntennaRatio, &lb, 0, &sched).unwrap();
        assert!(r.converged, "{r:?}");
        let r = convergence_probe(LimitId::FullResolution, &lb, 0, &sched).unwrap();
        assert!(r.converged && r.relative_gap <= 1e-12);
        let r = convergence_probe(LimitId::PowerScaling, &lb, 0, &sched).unwrap();
        assert!(!r.asserted && !r.converged);

        let mut single = LinkBudget::from_snr(vec![vec![1.0]], vec![], 1000);
        single.uplink = Quantizer::bits(3).unwrap();
        single.downlink = single.uplink;
        let r = convergence_probe(LimitId::HighSnrQuantized, &single, 0, &sched).unwrap();
        assert!(r.converged, "{r:?}");
        // estimated CSI saturates at N_a·α_u/(2−α_u) instead
        let a = single.uplink.alpha;
        let expected_gap = rel(1000.0 * a / (2.0 - a), r.limit_value);
        assert!((r.estimated_csi_gap.unwrap() - expected_gap).abs() < 1e-6);
    }

    #[test]
    fn asserted_gaps_eventually_decrease() {
        let lb = contaminated();
        let sched = LimitId::HighSnrFullRes.default_schedule();
        for id in [LimitId::HighSnrFullRes, LimitId::AntennaRatio] {
            let gaps = convergence_probe(id, &lb, 0, &sched).unwrap().gaps();
            let tail = &gaps[gaps.len() - 4..];
            assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{id:?}: {gaps:?}");
        }
    }

    #[test]
    fn standard_probes_on_a_default_drop() {
        use crate::geometry::{drop_users, CellLattice};
        use crate::linkbudget::assemble_link_budget;
        use crate::params::SystemParams;
        let p = SystemParams::default();
        let d = drop_users(&CellLattice::from_params(&p), &p, 1, 0).unwrap();
        let lb = assemble_link_budget(&d, &p).unwrap();
        let reports = standard_probes(&lb, 0).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert_eq!(r.converged, r.asserted, "{r:?}");
        }
        let clean = LinkBudget::from_snr(vec![vec![5.0]], vec![], 64);
        assert_eq!(standard_probes(&clean, 0).unwrap().len(), 4);
    }
}
