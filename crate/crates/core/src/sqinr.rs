//! Closed-form uplink SQINR under channel hardening with a matched-filter
//! receiver, and its special cases.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linkbudget::LinkBudget;

/// The five summand groups of the hardening denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DenominatorTerms {
    /// `α_u²·N_a·(1 + Σ_l Σ_k P/P_u·SNR)`.
    pub noise_and_interf: f64,
    /// `α_u²·N_a²·Σ_pilot (P/P_u·SNR)² / (1 + own + Σ_pilot)`.
    pub pilot_contam: f64,
    /// `α_u²·α_d(1−α_d)·K_d·N_a²·INR`.
    pub si_dac_distortion: f64,
    /// `α_u²·α_d²·K_d·N_a²·INR`.
    pub si_residual: f64,
    /// `N_a·α_u(1−α_u)·[2·own + Σ_{others} + α_d·N_a·INR + 1]`.
    pub adc_distortion_bracket: f64,
}

impl DenominatorTerms {
    pub fn sum(&self) -> f64 {
        self.noise_and_interf
            + self.pilot_contam
            + self.si_dac_distortion
            + self.si_residual
            + self.adc_distortion_bracket
    }

    pub fn scaled(&self, c: f64) -> Self {
        DenominatorTerms {
            noise_and_interf: c * self.noise_and_interf,
            pilot_contam: c * self.pilot_contam,
            si_dac_distortion: c * self.si_dac_distortion,
            si_residual: c * self.si_residual,
            adc_distortion_bracket: c * self.adc_distortion_bracket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqinrBreakdown {
    pub numerator: f64,
    pub den: DenominatorTerms,
    pub sqinr: f64,
}

impl SqinrBreakdown {
    pub fn new(numerator: f64, den: DenominatorTerms) -> Self {
        SqinrBreakdown {
            numerator,
            den,
            sqinr: numerator / den.sum(),
        }
    }

    /// Same ratio with numerator and every term multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        SqinrBreakdown::new(c * self.numerator, self.den.scaled(c))
    }

    pub fn se(&self) -> f64 {
        self.sqinr.ln_1p() / std::f64::consts::LN_2
    }
}

/// Writes one row per user with every term of the breakdown.
pub fn write_breakdown_csv<W: Write>(rows: &[(usize, SqinrBreakdown)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "ue",
        "numerator",
        "noise_and_interf",
        "pilot_contam",
        "si_dac_distortion",
        "si_residual",
        "adc_distortion_bracket",
        "sqinr",
    ])?;
    for (k, b) in rows {
        let d = &b.den;
        w.write_record(
            std::iter::once(k.to_string()).chain(
                [
                    b.numerator,
                    d.noise_and_interf,
                    d.pilot_contam,
                    d.si_dac_distortion,
                    d.si_residual,
                    d.adc_distortion_bracket,
                    b.sqinr,
                ]
                .iter()
                .map(|v| format!("{v:e}")),
            ),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn hardening_terms(lb: &LinkBudget, k: usize) -> DenominatorTerms {
    let na = lb.num_antennas as f64;
    let au = lb.uplink.alpha;
    let ad = lb.downlink.alpha;
    let kd = lb.num_dl_users as f64;
    let own = lb.own(k);
    let total = lb.total();
    let si = kd * na * na * lb.inr;
    DenominatorTerms {
        noise_and_interf: au * au * na * (1.0 + total),
        pilot_contam: au * au * na * na * lb.contamination_sq_sum(k) / lb.estimate_normalizer(k),
        si_dac_distortion: au * au * ad * (1.0 - ad) * si,
        si_residual: au * au * ad * ad * si,
        // 2·own + Σ_{j≠k} + Σ_{l≠0} Σ_j  ==  own + total
        adc_distortion_bracket: na * au * (1.0 - au) * (own + total + ad * na * lb.inr + 1.0),
    }
}

/// Hardening SQINR of user `k` of the cell of interest, term by term.
pub fn sqinr_hardening(lb: &LinkBudget, k: usize) -> Result<SqinrBreakdown> {
    lb.check(k)?;
    let na = lb.num_antennas as f64;
    let au = lb.uplink.alpha;
    let own = lb.own(k);
    let numerator = au * au * own * own * na * na / lb.estimate_normalizer(k);
    Ok(SqinrBreakdown::new(numerator, hardening_terms(lb, k)))
}

/// Perfect-CSI variant: `(N_a² + N_a)` replaces `α_u²·N_a²`, the estimate
/// normaliser loses its pilot-set sum and the pilot-contamination term is
/// dropped from the denominator.
pub fn sqinr_perfect_csi(lb: &LinkBudget, k: usize) -> Result<f64> {
    lb.check(k)?;
    let na = lb.num_antennas as f64;
    let own = lb.own(k);
    let mut den = hardening_terms(lb, k);
    den.pilot_contam = 0.0;
    Ok(own * own * (na * na + na) / ((1.0 + own) * den.sum()))
}

/// Half-duplex, full-resolution hardening SINR (the budget's INR and
/// quantizers are ignored).
pub fn sinr_hd_full_res(lb: &LinkBudget, k: usize) -> Result<f64> {
    lb.check(k)?;
    let na = lb.num_antennas as f64;
    let own = lb.own(k);
    let norm = lb.estimate_normalizer(k);
    let numerator = na / norm * own * own;
    let den = 1.0 + lb.total() + na / norm * lb.contamination_sq_sum(k);
    Ok(numerator / den)
}

/// The half-duplex SINR with pilot contamination neglected.
pub fn sinr_no_contamination(lb: &LinkBudget, k: usize) -> Result<f64> {
    lb.check(k)?;
    let na = lb.num_antennas as f64;
    let own = lb.own(k);
    Ok(na * own * own / ((1.0 + own) * (1.0 + lb.total())))
}

/// `log2(1 + E[x]/E[y])`, the ratio approximation of `E[log2(1 + x/y)]`.
pub fn ratio_of_means_se(x_mean: f64, y_mean: f64) -> f64 {
    debug_assert!(y_mean > 0.0);
    (1.0 + x_mean / y_mean).log2()
}
