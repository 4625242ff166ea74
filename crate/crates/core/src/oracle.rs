//! Sample-based small-scale-fading simulator for the uplink of cell 0.
//!
//! Everything is expressed in noise-normalised units: a user with effective
//! SNR `p` contributes `√p·h` to the received vector, thermal noise has unit
//! variance per antenna and the SI loop has amplitude `√(P_SI/σ²)`.
//!
//! [`assemble_received_terms`] computes each term power conditioned on the
//! channels, averaging analytically over data symbols, AQNM and thermal
//! noise. [`sample_received_terms`] draws those as well and returns the
//! complex terms themselves, which the orthogonality checks use.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CELL_OF_INTEREST;
use crate::linkbudget::LinkBudget;

/// Prefactor of the SI covariance inside the ADC distortion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiPrefactor {
    /// `P_u·H_SI(...)H_SI*`, as the covariance model is written.
    #[default]
    UplinkPower,
    /// `P_SI·H_SI(...)H_SI*`, the power actually radiated into the loop.
    SiPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub si_prefactor: SiPrefactor,
    /// Independent batches; also the granularity of the standard error.
    pub batches: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            si_prefactor: SiPrefactor::default(),
            batches: 20,
            seed: 0,
        }
    }
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// `n` i.i.d. `CN(0, std²)` entries.
pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, std: f64) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng) * std).collect()
}

/// `a* b`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// One draw of every random channel quantity seen by BS 0.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub num_antennas: usize,
    /// `channels[l][k]`: fading from user k of cell l to BS 0, `CN(0, I)`.
    pub channels: Vec<Vec<Vec<Complex64>>>,
    /// `v′` of the filtered user, per-entry power `1/p_k`.
    pub estimation_noise: Vec<Complex64>,
    /// Row-major `N_a×N_a` SI channel, entry variance μ_SI². Empty without SI.
    pub h_si: Vec<Complex64>,
    /// Downlink precoders, `CN(0, I)` entries (unnormalised).
    pub precoders: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    /// Draws a realization for filtering user `k` of cell 0. The SI matrix and
    /// precoders are skipped when the budget has no SI.
    pub fn draw<R: Rng + ?Sized>(lb: &LinkBudget, k: usize, rng: &mut R) -> Result<Self> {
        lb.check(k)?;
        let own = lb.own(k);
        if own <= 0.0 {
            return Err(Error::ZeroOwnSnr);
        }
        let na = lb.num_antennas;
        let channels = lb
            .snr
            .iter()
            .map(|row| row.iter().map(|_| complex_normal_vec(rng, na, 1.0)).collect())
            .collect();
        let estimation_noise = complex_normal_vec(rng, na, own.recip().sqrt());
        let has_si = lb.inr > 0.0 && lb.num_dl_users > 0;
        let (h_si, precoders) = if has_si {
            let h = complex_normal_vec(rng, na * na, lb.si_channel_gain.sqrt());
            let f = (0..lb.num_dl_users).map(|_| complex_normal_vec(rng, na, 1.0)).collect();
            (h, f)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(ChannelRealization {
            num_antennas: na,
            channels,
            estimation_noise,
            h_si,
            precoders,
        })
    }

    pub fn h_own(&self, k: usize) -> &[Complex64] {
        &self.channels[CELL_OF_INTEREST][k]
    }

    /// Channels of the users sharing user k's pilot, in pilot-set order.
    pub fn h_pilot_set(&self, lb: &LinkBudget, k: usize) -> Vec<&[Complex64]> {
        lb.pilot_cells.iter().map(|&l| self.channels[l][k].as_slice()).collect()
    }

    fn has_si(&self) -> bool {
        !self.h_si.is_empty()
    }

    /// `H_SI* w`.
    fn si_adjoint_times(&self, w: &[Complex64]) -> Vec<Complex64> {
        let na = self.num_antennas;
        let mut u = vec![Complex64::new(0.0, 0.0); na];
        for i in 0..na {
            let row = &self.h_si[i * na..(i + 1) * na];
            for (m, h) in row.iter().enumerate() {
                u[m] += h.conj() * w[i];
            }
        }
        u
    }

    /// `H_SI x`.
    fn si_times(&self, x: &[Complex64]) -> Vec<Complex64> {
        let na = self.num_antennas;
        (0..na)
            .map(|i| {
                self.h_si[i * na..(i + 1) * na]
                    .iter()
                    .zip(x)
                    .map(|(h, v)| h * v)
                    .sum()
            })
            .collect()
    }

    /// `diag(F F*)`.
    fn precoder_power_diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_antennas];
        for f in &self.precoders {
            for (di, fi) in d.iter_mut().zip(f) {
                *di += fi.norm_sqr();
            }
        }
        d
    }
}

/// `√(P_SI/σ²)` from the budget's INR and μ_SI².
fn si_amplitude(lb: &LinkBudget) -> f64 {
    if lb.si_channel_gain > 0.0 {
        (lb.inr / lb.si_channel_gain).sqrt()
    } else {
        0.0
    }
}

/// Matched filter `√(p_k/D)(h_k + Σ_𝒞 √(p_ℓ/p_k) h_ℓ,k + v′)`; its entries are
/// `CN(0, 1)`, so `E‖w‖² = N_a`.
pub fn build_matched_filter(realization: &ChannelRealization, lb: &LinkBudget, k: usize) -> Result<Vec<Complex64>> {
    lb.check(k)?;
    let own = lb.own(k);
    if own <= 0.0 {
        return Err(Error::ZeroOwnSnr);
    }
    let scale = (own / lb.estimate_normalizer(k)).sqrt();
    let mut w: Vec<Complex64> = realization
        .h_own(k)
        .iter()
        .zip(&realization.estimation_noise)
        .map(|(h, v)| h + v)
        .collect();
    for &l in &lb.pilot_cells {
        let c = (lb.effective(l, k) / own).sqrt();
        for (wi, hi) in w.iter_mut().zip(&realization.channels[l][k]) {
            *wi += hi * c;
        }
    }
    for wi in w.iter_mut() {
        *wi *= scale;
    }
    Ok(w)
}

fn adc_si_scale(lb: &LinkBudget, prefactor: SiPrefactor) -> f64 {
    match prefactor {
        SiPrefactor::UplinkPower => lb.inr * lb.uplink_to_si_power,
        SiPrefactor::SiPower => lb.inr,
    }
}

/// Diagonals of the DAC and ADC distortion covariances for one realization.
fn aqnm_diagonals(realization: &ChannelRealization, lb: &LinkBudget, prefactor: SiPrefactor) -> (Vec<f64>, Vec<f64>) {
    let na = realization.num_antennas;
    let (au, ad) = (lb.uplink.alpha, lb.downlink.alpha);
    let ff = realization.precoder_power_diag();
    let rqd: Vec<f64> = ff.iter().map(|x| ad * (1.0 - ad) * x).collect();

    let mut diag = vec![1.0; na];
    for (l, row) in realization.channels.iter().enumerate() {
        for (kk, h) in row.iter().enumerate() {
            let p = lb.effective(l, kk);
            for (d, hi) in diag.iter_mut().zip(h) {
                *d += p * hi.norm_sqr();
            }
        }
    }
    if realization.has_si() {
        // (H M H*)_ii with M = α_d² F F* + R_qd, normalised to unit-variance H
        let scale = adc_si_scale(lb, prefactor) / lb.si_channel_gain;
        let hf: Vec<Vec<Complex64>> = realization.precoders.iter().map(|f| realization.si_times(f)).collect();
        for i in 0..na {
            let coherent: f64 = hf.iter().map(|v| v[i].norm_sqr()).sum();
            let row = &realization.h_si[i * na..(i + 1) * na];
            let distortion: f64 = row.iter().zip(&rqd).map(|(h, r)| h.norm_sqr() * r).sum();
            diag[i] += scale * (ad * ad * coherent + distortion);
        }
    }
    let rqu = diag.into_iter().map(|d| au * (1.0 - au) * d).collect();
    (rqu, rqd)
}

/// Draws `(q_u, q_d)` with the AQNM covariances of this realization.
pub fn sample_aqnm<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    lb: &LinkBudget,
    prefactor: SiPrefactor,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let (rqu, rqd) = aqnm_diagonals(realization, lb, prefactor);
    let qu = rqu.iter().map(|v| complex_normal(rng) * v.sqrt()).collect();
    let qd = rqd.iter().map(|v| complex_normal(rng) * v.sqrt()).collect();
    (qu, qd)
}

/// Term powers of one realization, averaged over symbols and noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationTerms {
    /// `w*h_k`; its mean and spread split into desired and estimation error.
    pub w_h_own: Complex64,
    pub intra_cell: f64,
    pub pilot_contam: f64,
    pub inter_cell: f64,
    pub si_fd: f64,
    pub aqnm_aggregate: f64,
    pub noise: f64,
}

impl RealizationTerms {
    fn interference(&self) -> f64 {
        self.intra_cell + self.pilot_contam + self.inter_cell + self.si_fd + self.aqnm_aggregate + self.noise
    }
}

pub fn assemble_received_terms(
    realization: &ChannelRealization,
    lb: &LinkBudget,
    k: usize,
    prefactor: SiPrefactor,
) -> Result<RealizationTerms> {
    let w = build_matched_filter(realization, lb, k)?;
    let (au, ad) = (lb.uplink.alpha, lb.downlink.alpha);
    let a2 = au * au;
    let (mut intra, mut pilot, mut inter) = (0.0, 0.0, 0.0);
    for (l, row) in realization.channels.iter().enumerate() {
        for (kk, h) in row.iter().enumerate() {
            if l == CELL_OF_INTEREST && kk == k {
                continue;
            }
            let power = a2 * lb.effective(l, kk) * inner(&w, h).norm_sqr();
            if l == CELL_OF_INTEREST {
                intra += power;
            } else if kk == k && lb.pilot_cells.contains(&l) {
                pilot += power;
            } else {
                inter += power;
            }
        }
    }
    let (rqu, rqd) = aqnm_diagonals(realization, lb, prefactor);
    let adc: f64 = w.iter().zip(&rqu).map(|(wi, r)| wi.norm_sqr() * r).sum();
    let (mut si, mut dac) = (0.0, 0.0);
    if realization.has_si() {
        let amp2 = si_amplitude(lb).powi(2);
        let u = realization.si_adjoint_times(&w);
        si = a2 * ad * ad * amp2 * realization.precoders.iter().map(|f| inner(&u, f).norm_sqr()).sum::<f64>();
        dac = a2 * amp2 * u.iter().zip(&rqd).map(|(ui, r)| ui.norm_sqr() * r).sum::<f64>();
    }
    Ok(RealizationTerms {
        w_h_own: inner(&w, realization.h_own(k)),
        intra_cell: intra,
        pilot_contam: pilot,
        inter_cell: inter,
        si_fd: si,
        aqnm_aggregate: dac + adc,
        noise: a2 * norm_sqr(&w),
    })
}

/// Mean powers of the eight received-signal terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermPowers {
    pub desired: f64,
    pub est_error: f64,
    pub intra_cell: f64,
    pub pilot_contam: f64,
    pub inter_cell: f64,
    pub si_fd: f64,
    pub aqnm_aggregate: f64,
    pub noise: f64,
}

impl TermPowers {
    pub const NAMES: [&'static str; 8] = [
        "desired",
        "est_error",
        "intra_cell",
        "pilot_contam",
        "inter_cell",
        "si_fd",
        "aqnm_aggregate",
        "noise",
    ];

    pub fn values(&self) -> [f64; 8] {
        [
            self.desired,
            self.est_error,
            self.intra_cell,
            self.pilot_contam,
            self.inter_cell,
            self.si_fd,
            self.aqnm_aggregate,
            self.noise,
        ]
    }

    pub fn interference(&self) -> f64 {
        self.values()[1..].iter().sum()
    }

    pub fn sqinr(&self) -> f64 {
        self.desired / self.interference()
    }

    pub fn from_realizations(lb: &LinkBudget, k: usize, terms: &[RealizationTerms]) -> Self {
        let n = terms.len() as f64;
        let gain = lb.uplink.alpha.powi(2) * lb.own(k);
        let mean_wh: Complex64 = terms.iter().map(|t| t.w_h_own).sum::<Complex64>() / n;
        let mean_sq = terms.iter().map(|t| t.w_h_own.norm_sqr()).sum::<f64>() / n;
        let avg = |f: fn(&RealizationTerms) -> f64| terms.iter().map(f).sum::<f64>() / n;
        TermPowers {
            desired: gain * mean_wh.norm_sqr(),
            est_error: gain * (mean_sq - mean_wh.norm_sqr()).max(0.0),
            intra_cell: avg(|t| t.intra_cell),
            pilot_contam: avg(|t| t.pilot_contam),
            inter_cell: avg(|t| t.inter_cell),
            si_fd: avg(|t| t.si_fd),
            aqnm_aggregate: avg(|t| t.aqnm_aggregate),
            noise: avg(|t| t.noise),
        }
    }
}

/// Per-term predictions whose ratio is the hardening SQINR. The ADC bracket
/// is attributed entirely to `aqnm_aggregate`.
pub fn closed_form_terms(lb: &LinkBudget, k: usize) -> Result<TermPowers> {
    let b = crate::sqinr::sqinr_hardening(lb, k)?;
    let na = lb.num_antennas as f64;
    let a2 = lb.uplink.alpha.powi(2);
    let ad = lb.downlink.alpha;
    let own = lb.own(k);
    let intra: f64 = (0..lb.users_in_cell_of_interest())
        .filter(|&kk| kk != k)
        .map(|kk| lb.effective(CELL_OF_INTEREST, kk))
        .sum();
    let pilot: f64 = lb.contamination_sum(k);
    let inter = lb.total() - own - intra - pilot;
    let si_kd = lb.num_dl_users as f64 * na * na * lb.inr;
    Ok(TermPowers {
        desired: b.numerator,
        est_error: a2 * own * na,
        intra_cell: a2 * na * intra,
        pilot_contam: a2 * na * pilot + b.den.pilot_contam,
        inter_cell: a2 * na * inter,
        si_fd: a2 * ad * ad * si_kd,
        aqnm_aggregate: a2 * ad * (1.0 - ad) * si_kd + b.den.adc_distortion_bracket,
        noise: a2 * na,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub powers: TermPowers,
    /// Mean desired power over mean interference power.
    pub sqinr: f64,
    /// Batch-means standard error of `sqinr`.
    pub std_error: f64,
    /// Mean over realizations of `α_u²p_k|w*h_k|²` over the conditional
    /// interference; tends to the hardening value as `N_a` grows.
    pub mean_instantaneous: f64,
    pub num_realizations: usize,
}

fn batch_sizes(n: usize, batches: usize) -> Vec<usize> {
    (0..batches).map(|b| n / batches + usize::from(b < n % batches)).collect()
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Empirical SQINR of user `k` from `num_realizations` channel draws.
pub fn empirical_sqinr(lb: &LinkBudget, k: usize, num_realizations: usize, opts: &OracleOptions) -> Result<OracleEstimate> {
    if num_realizations < 1000 {
        return Err(Error::Usage("the oracle needs at least 1000 realizations".into()));
    }
    if opts.batches < 2 || opts.batches > num_realizations {
        return Err(Error::Usage("batches must lie in [2, realizations]".into()));
    }
    lb.check(k)?;
    let gain = lb.uplink.alpha.powi(2) * lb.own(k);
    let per_batch: Vec<Vec<RealizationTerms>> = batch_sizes(num_realizations, opts.batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = batch_rng(opts.seed, b);
            (0..size)
                .map(|_| {
                    let r = ChannelRealization::draw(lb, k, &mut rng)?;
                    assemble_received_terms(&r, lb, k, opts.si_prefactor)
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let batch_sqinr: Vec<f64> = per_batch
        .iter()
        .map(|t| TermPowers::from_realizations(lb, k, t).sqinr())
        .collect();
    let nb = batch_sqinr.len() as f64;
    let mean_b = batch_sqinr.iter().sum::<f64>() / nb;
    let var_b = batch_sqinr.iter().map(|x| (x - mean_b).powi(2)).sum::<f64>() / (nb - 1.0);

    let all: Vec<RealizationTerms> = per_batch.into_iter().flatten().collect();
    let powers = TermPowers::from_realizations(lb, k, &all);
    let mean_instantaneous =
        all.iter().map(|t| gain * t.w_h_own.norm_sqr() / t.interference()).sum::<f64>() / all.len() as f64;
    Ok(OracleEstimate {
        powers,
        sqinr: powers.sqinr(),
        std_error: (var_b / nb).sqrt(),
        mean_instantaneous,
        num_realizations,
    })
}

/// One draw of the eight complex received-signal terms, symbols and noise included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledTerms {
    pub desired: Complex64,
    pub est_error: Complex64,
    pub intra_cell: Complex64,
    pub pilot_contam: Complex64,
    pub inter_cell: Complex64,
    pub si_fd: Complex64,
    pub aqnm_aggregate: Complex64,
    pub noise: Complex64,
}

impl SampledTerms {
    pub fn values(&self) -> [Complex64; 8] {
        [
            self.desired,
            self.est_error,
            self.intra_cell,
            self.pilot_contam,
            self.inter_cell,
            self.si_fd,
            self.aqnm_aggregate,
            self.noise,
        ]
    }
}

/// Draws symbols, AQNM and thermal noise for `realization`. The desired term
/// uses the population mean `E[w*h_k] = √(p_k/D)·N_a`.
pub fn sample_received_terms<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    lb: &LinkBudget,
    k: usize,
    prefactor: SiPrefactor,
    rng: &mut R,
) -> Result<SampledTerms> {
    let w = build_matched_filter(realization, lb, k)?;
    let na = realization.num_antennas;
    let (au, ad) = (lb.uplink.alpha, lb.downlink.alpha);
    let own = lb.own(k);
    let mean_wh = (own / lb.estimate_normalizer(k)).sqrt() * na as f64;
    let zero = Complex64::new(0.0, 0.0);
    let mut t = SampledTerms {
        desired: zero,
        est_error: zero,
        intra_cell: zero,
        pilot_contam: zero,
        inter_cell: zero,
        si_fd: zero,
        aqnm_aggregate: zero,
        noise: zero,
    };
    for (l, row) in realization.channels.iter().enumerate() {
        for (kk, h) in row.iter().enumerate() {
            let s = complex_normal(rng);
            let amp = au * lb.effective(l, kk).sqrt();
            let wh = inner(&w, h);
            if l == CELL_OF_INTEREST && kk == k {
                t.desired = amp * mean_wh * s;
                t.est_error = amp * (wh - mean_wh) * s;
            } else if l == CELL_OF_INTEREST {
                t.intra_cell += amp * wh * s;
            } else if kk == k && lb.pilot_cells.contains(&l) {
                t.pilot_contam += amp * wh * s;
            } else {
                t.inter_cell += amp * wh * s;
            }
        }
    }
    let (qu, qd) = sample_aqnm(realization, lb, prefactor, rng);
    t.aqnm_aggregate = inner(&w, &qu);
    if realization.has_si() {
        let amp = si_amplitude(lb);
        let u = realization.si_adjoint_times(&w);
        for f in &realization.precoders {
            t.si_fd += au * ad * amp * inner(&u, f) * complex_normal(rng);
        }
        t.aqnm_aggregate += au * amp * inner(&u, &qd);
    }
    let v = complex_normal_vec(rng, na, 1.0);
    t.noise = au * inner(&w, &v);
    Ok(t)
}

/// Empirical filter moments from independent draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterMoments {
    /// `E‖w‖²`.
    pub norm2: f64,
    /// `E‖w‖⁴`.
    pub norm4: f64,
    /// `E|w*h|²` for a channel independent of `w`.
    pub independent_gain: f64,
    /// `E|w*h_ℓ,k|²` for the first pilot-sharing user, if any.
    pub pilot_sharing_gain: Option<f64>,
    pub draws: usize,
}

pub fn filter_moments(lb: &LinkBudget, k: usize, draws: usize, seed: u64) -> Result<FilterMoments> {
    let mut no_si = lb.clone();
    no_si.inr = 0.0;
    let batches = 16.min(draws.max(1));
    let sums: Vec<[f64; 4]> = batch_sizes(draws, batches)
        .into_par_iter()
        .enumerate()
        .map(|(b, size)| {
            let mut rng = batch_rng(seed, b);
            let mut acc = [0.0; 4];
            for _ in 0..size {
                let r = ChannelRealization::draw(&no_si, k, &mut rng)?;
                let w = build_matched_filter(&r, &no_si, k)?;
                let n2 = norm_sqr(&w);
                let h = complex_normal_vec(&mut rng, no_si.num_antennas, 1.0);
                acc[0] += n2;
                acc[1] += n2 * n2;
                acc[2] += inner(&w, &h).norm_sqr();
                if let Some(&l) = no_si.pilot_cells.first() {
                    acc[3] += inner(&w, &r.channels[l][k]).norm_sqr();
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let n = draws as f64;
    let total = |i: usize| sums.iter().map(|a| a[i]).sum::<f64>() / n;
    Ok(FilterMoments {
        norm2: total(0),
        norm4: total(1),
        independent_gain: total(2),
        pilot_sharing_gain: (!lb.pilot_cells.is_empty()).then(|| total(3)),
        draws,
    })
}

/// Three cells of four users with `N_a` antennas: cell 1 reuses the pilots of
/// cell 0, cell 2 does not. 3-bit converters, four downlink users, INR −20 dB.
pub fn reference_scenario(num_antennas: usize) -> LinkBudget {
    let mut lb = LinkBudget::from_snr(
        vec![vec![10.0, 4.0, 2.0, 6.0], vec![0.8, 0.3, 0.5, 0.2], vec![0.2, 0.4, 0.1, 0.3]],
        vec![1],
        num_antennas,
    );
    let q = crate::params::Quantizer::bits(3).expect("3 bits is tabulated");
    lb.uplink = q;
    lb.downlink = q;
    lb.inr = 0.01;
    lb.num_dl_users = 4;
    lb.si_channel_gain = 10.0;
    lb.uplink_to_si_power = 0.005;
    lb
}

/// [`reference_scenario`] without converter distortion or self-interference.
pub fn reference_scenario_full_resolution(num_antennas: usize) -> LinkBudget {
    let mut lb = reference_scenario(num_antennas);
    lb.uplink = crate::params::Quantizer::full();
    lb.downlink = crate::params::Quantizer::full();
    lb.inr = 0.0;
    lb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Quantizer;
    use crate::sqinr::sqinr_hardening;
    use crate::sqinr::tests::random_budget;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn three_cell(na: usize) -> LinkBudget {
        reference_scenario(na)
    }

    #[test]
    fn closed_form_terms_reproduce_hardening_sqinr() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let lb = random_budget(&mut rng);
            for k in 0..lb.users_in_cell_of_interest() {
                let t = closed_form_terms(&lb, k).unwrap();
                let b = sqinr_hardening(&lb, k).unwrap();
                assert!(rel(t.sqinr(), b.sqinr) < 1e-12);
            }
        }
    }

    #[test]
    fn filter_moments_match() {
        let lb = three_cell(100);
        let m = filter_moments(&lb, 0, 100_000, 3).unwrap();
        assert!(rel(m.norm2, 100.0) < 0.02);
        assert!(rel(m.norm4, 100.0 * 101.0) < 0.02);
        assert!(rel(m.independent_gain, 100.0) < 0.02);
        // the pilot-sharing user is correlated with w
        let expected = 100.0 + 100.0 * 100.0 * 0.8 / lb.estimate_normalizer(0);
        assert!(rel(m.pilot_sharing_gain.unwrap(), expected) < 0.02);
    }

    #[test]
    fn realization_statistics() {
        let lb = three_cell(64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = ChannelRealization::draw(&lb, 0, &mut rng).unwrap();
        let h: Vec<Complex64> = r.channels.iter().flatten().flatten().copied().collect();
        let var = norm_sqr(&h) / h.len() as f64;
        assert!((var - 1.0).abs() < 3.0 / (h.len() as f64).sqrt());
        let v = norm_sqr(&r.h_si) / r.h_si.len() as f64;
        assert!((v - 10.0).abs() < 3.0 * 10.0 / (r.h_si.len() as f64).sqrt());
        assert_eq!(r.precoders.len(), 4);
        assert_eq!(r.h_pilot_set(&lb, 0).len(), 1);
    }

    #[test]
    fn zero_own_snr_rejected() {
        let lb = LinkBudget::from_snr(vec![vec![0.0]], vec![], 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(ChannelRealization::draw(&lb, 0, &mut rng), Err(Error::ZeroOwnSnr)));
    }

    #[test]
    fn full_resolution_no_si_matches_half_duplex_sinr() {
        let lb = reference_scenario_full_resolution(128);
        let est = empirical_sqinr(&lb, 0, 10_000, &OracleOptions::default()).unwrap();
        let hd = crate::sqinr::sinr_hd_full_res(&lb, 0).unwrap();
        assert!(rel(est.sqinr, hd) < 0.05, "{} vs {hd}", est.sqinr);
    }

    #[test]
    fn full_resolution_has_no_distortion() {
        let mut lb = three_cell(16);
        lb.uplink = Quantizer::full();
        lb.downlink = Quantizer::full();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = ChannelRealization::draw(&lb, 0, &mut rng).unwrap();
        let (qu, qd) = sample_aqnm(&r, &lb, SiPrefactor::UplinkPower, &mut rng);
        assert!(qu.iter().chain(&qd).all(|q| q.norm_sqr() == 0.0));
    }

    #[test]
    fn dac_distortion_covariance() {
        let lb = three_cell(6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = ChannelRealization::draw(&lb, 0, &mut rng).unwrap();
        let n = 100_000;
        let na = 6;
        let mut cov = vec![Complex64::new(0.0, 0.0); na * na];
        for _ in 0..n {
            let (_, qd) = sample_aqnm(&r, &lb, SiPrefactor::UplinkPower, &mut rng);
            for i in 0..na {
                for j in 0..na {
                    cov[i * na + j] += qd[i] * qd[j].conj();
                }
            }
        }
        let ad = lb.downlink.alpha;
        let ff = r.precoder_power_diag();
        for i in 0..na {
            let expected = ad * (1.0 - ad) * ff[i];
            assert!(rel(cov[i * na + i].re / n as f64, expected) < 0.03);
            for j in 0..na {
                if j != i {
                    let off = cov[i * na + j].norm() / n as f64;
                    let se = expected.max(ad * (1.0 - ad) * ff[j]) / (n as f64).sqrt();
                    assert!(off < 5.0 * se, "({i},{j}) {off}");
                }
            }
        }
    }

    #[test]
    fn zeroed_sources() {
        let mut lb = LinkBudget::from_snr(vec![vec![1e12, 3.0]], vec![], 32);
        lb.inr = 0.0;
        let est = empirical_sqinr(&lb, 0, 2000, &OracleOptions::default()).unwrap();
        let p = est.powers;
        assert_eq!((p.pilot_contam, p.si_fd, p.aqnm_aggregate), (0.0, 0.0, 0.0));
        // with v′ → 0 only the beamforming-gain spread of w*h_k remains: Var/|E|² = 1/N_a
        assert!(rel(p.est_error / p.desired, 1.0 / 32.0) < 0.1);
    }

    #[test]
    fn si_power_is_linear_in_downlink_users() {
        let mut lb = three_cell(32);
        lb.num_dl_users = 5;
        let opts = OracleOptions { seed: 9, ..OracleOptions::default() };
        let five = empirical_sqinr(&lb, 0, 4000, &opts).unwrap().powers.si_fd;
        lb.num_dl_users = 10;
        let ten = empirical_sqinr(&lb, 0, 4000, &opts).unwrap().powers.si_fd;
        assert!((ten / five - 2.0).abs() < 0.1, "{}", ten / five);
    }

    #[test]
    fn oracle_matches_closed_form() {
        let lb = three_cell(128);
        let est = empirical_sqinr(&lb, 0, 10_000, &OracleOptions::default()).unwrap();
        let closed = sqinr_hardening(&lb, 0).unwrap().sqinr;
        assert!(rel(est.sqinr, closed) < 0.1, "{} vs {closed}", est.sqinr);
        let predicted = closed_form_terms(&lb, 0).unwrap();
        assert!(rel(est.powers.desired, predicted.desired) < 0.1);
        assert!(rel(est.powers.si_fd, predicted.si_fd) < 0.1);
    }

    #[test]
    fn instantaneous_gap_shrinks_with_antennas() {
        let opts = OracleOptions { seed: 5, ..OracleOptions::default() };
        let gap = |na| {
            let lb = three_cell(na);
            let est = empirical_sqinr(&lb, 0, 2000, &opts).unwrap();
            rel(est.mean_instantaneous, sqinr_hardening(&lb, 0).unwrap().sqinr)
        };
        let (g128, g512) = (gap(128), gap(512));
        assert!(g512 < g128, "{g512} !< {g128}");
    }

    #[test]
    fn terms_are_uncorrelated_with_desired() {
        let lb = three_cell(16);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 20_000;
        let mut prods: Vec<Vec<Complex64>> = vec![Vec::with_capacity(n); 7];
        for _ in 0..n {
            let r = ChannelRealization::draw(&lb, 0, &mut rng).unwrap();
            let t = sample_received_terms(&r, &lb, 0, SiPrefactor::UplinkPower, &mut rng).unwrap();
            let v = t.values();
            for i in 0..7 {
                prods[i].push(v[0] * v[i + 1].conj());
            }
        }
        for (i, p) in prods.iter().enumerate() {
            let mean: Complex64 = p.iter().sum::<Complex64>() / n as f64;
            let var = p.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            assert!(mean.norm() <= 3.0 * se, "{}: {} > 3·{se}", TermPowers::NAMES[i + 1], mean.norm());
        }
    }

    #[test]
    fn sampled_powers_agree_with_conditional_powers() {
        let lb = three_cell(16);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let r = ChannelRealization::draw(&lb, 0, &mut rng).unwrap();
        let cond = assemble_received_terms(&r, &lb, 0, SiPrefactor::UplinkPower).unwrap();
        let n = 40_000;
        let mut acc = [0.0; 8];
        for _ in 0..n {
            let t = sample_received_terms(&r, &lb, 0, SiPrefactor::UplinkPower, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(t.values()) {
                *a += v.norm_sqr() / n as f64;
            }
        }
        for (got, want) in [
            (acc[2], cond.intra_cell),
            (acc[3], cond.pilot_contam),
            (acc[4], cond.inter_cell),
            (acc[5], cond.si_fd),
            (acc[6], cond.aqnm_aggregate),
            (acc[7], cond.noise),
        ] {
            assert!(rel(got, want) < 0.05, "{got} vs {want}");
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let lb = three_cell(32);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| empirical_sqinr(&lb, 0, 2000, &OracleOptions::default()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
