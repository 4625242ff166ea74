//! Multi-cell Monte Carlo over user drops: per-drop cell-average SQINR,
//! empirical CDFs, gross and effective spectral efficiency, and sweeps.
//!
//! Drops are evaluated in parallel on the current rayon pool and collected in
//! drop-index order, so a report depends only on the parameters, the number
//! of drops and the master seed.

use std::f64::consts::LN_2;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{drop_users, CellLattice};
use crate::linkbudget::{assemble_link_budget, LinkBudget};
use crate::params::{linear_to_db, Quantizer, Resolution, SystemParams};
use crate::sqinr::sqinr_hardening;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplexMode {
    #[default]
    Full,
    /// No self-interference, spectral efficiency scaled by `hd_prelog`.
    Half,
}

impl fmt::Display for DuplexMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DuplexMode::Full => "full",
            DuplexMode::Half => "half",
        })
    }
}

impl FromStr for DuplexMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DuplexMode::Full),
            "half" => Ok(DuplexMode::Half),
            _ => Err(Error::Usage(format!("unknown duplex mode `{s}` (full | half)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// One sample per drop: mean linear SQINR over the users of cell 0.
    #[default]
    CellMean,
    /// One sample per user of cell 0.
    PerUser,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::CellMean => "cell-mean",
            Aggregation::PerUser => "per-user",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell-mean" => Ok(Aggregation::CellMean),
            "per-user" => Ok(Aggregation::PerUser),
            _ => Err(Error::Usage(format!("unknown aggregation `{s}` (cell-mean | per-user)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunOptions {
    pub duplex: DuplexMode,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqinrReport {
    /// Mean linear SQINR over the uplink users of cell 0, one entry per drop.
    pub per_drop_cell_avg: Vec<f64>,
    /// Per-user linear SQINR, drop-major.
    pub per_user: Vec<f64>,
    /// Sorted `(sqinr_db, probability)` steps over the aggregated samples.
    pub cdf: Vec<(f64, f64)>,
    pub se_gross: f64,
    pub se_effective: f64,
    pub config_echo: SystemParams,
    pub num_drops: usize,
    pub seed: u64,
    pub options: RunOptions,
}

impl SqinrReport {
    /// Smallest CDF abscissa (dB) whose probability reaches `p`.
    pub fn quantile_db(&self, p: f64) -> f64 {
        let idx = self.cdf.partition_point(|&(_, prob)| prob < p);
        self.cdf[idx.min(self.cdf.len() - 1)].0
    }

    pub fn write_cdf_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sqinr_db", "cdf"])?;
        for &(x, p) in &self.cdf {
            w.write_record([x.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(1 − β·N_p/N_c)·gross`.
pub fn effective_se(gross_se: f64, beta: f64, num_pilots: usize, coherence_tile: usize) -> Result<f64> {
    let overhead = beta * num_pilots as f64 / coherence_tile as f64;
    if !(0.0..1.0).contains(&overhead) {
        return Err(Error::OverheadTooLarge(overhead));
    }
    Ok((1.0 - overhead) * gross_se)
}

/// Right-continuous empirical CDF of linear samples, abscissa in dB.
pub fn empirical_cdf_db(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (linear_to_db(x), (i + 1) as f64 / n))
        .collect()
}

/// Link budgets of drops `0..num_drops`, in drop order.
pub fn drop_budgets(params: &SystemParams, num_drops: usize, seed: u64) -> Result<Vec<LinkBudget>> {
    params.validate()?;
    if num_drops == 0 {
        return Err(Error::param("drops", "at least one drop is required"));
    }
    let lattice = CellLattice::from_params(params);
    (0..num_drops as u64)
        .into_par_iter()
        .map(|i| assemble_link_budget(&drop_users(&lattice, params, seed, i)?, params))
        .collect()
}

fn evaluate_budgets(
    budgets: &[LinkBudget],
    params: &SystemParams,
    num_drops: usize,
    seed: u64,
    options: RunOptions,
) -> Result<SqinrReport> {
    let per_drop: Vec<Vec<f64>> = budgets
        .par_iter()
        .map(|lb| {
            let mut lb = lb.clone();
            if options.duplex == DuplexMode::Half {
                lb.inr = 0.0;
            }
            (0..lb.users_in_cell_of_interest())
                .map(|k| Ok(sqinr_hardening(&lb, k)?.sqinr))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let per_drop_cell_avg: Vec<f64> = per_drop
        .iter()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let per_user: Vec<f64> = per_drop.iter().flatten().copied().collect();
    let prelog = match options.duplex {
        DuplexMode::Full => 1.0,
        DuplexMode::Half => params.hd_prelog,
    };
    let (samples, se_samples): (&[f64], Vec<f64>) = match options.aggregation {
        Aggregation::CellMean => (
            &per_drop_cell_avg,
            per_drop_cell_avg.iter().map(|x| x.ln_1p() / LN_2).collect(),
        ),
        Aggregation::PerUser => (&per_user, per_user.iter().map(|x| x.ln_1p() / LN_2).collect()),
    };
    let se_gross = prelog * se_samples.iter().sum::<f64>() / se_samples.len() as f64;
    let se_effective = effective_se(
        se_gross,
        params.overhead_fraction,
        params.pilots_per_cell,
        params.coherence_tile,
    )?;
    Ok(SqinrReport {
        cdf: empirical_cdf_db(samples),
        per_drop_cell_avg,
        per_user,
        se_gross,
        se_effective,
        config_echo: params.clone(),
        num_drops,
        seed,
        options,
    })
}

pub fn run_experiment(params: &SystemParams, num_drops: usize, seed: u64, options: RunOptions) -> Result<SqinrReport> {
    let budgets = drop_budgets(params, num_drops, seed)?;
    evaluate_budgets(&budgets, params, num_drops, seed, options)
}

/// Full-duplex cell-average experiment.
pub fn run_cdf_experiment(params: &SystemParams, num_drops: usize, seed: u64) -> Result<SqinrReport> {
    run_experiment(params, num_drops, seed, RunOptions::default())
}

/// Half-duplex baseline: same drops, no self-interference, `hd_prelog` on SE.
pub fn run_hd_baseline(params: &SystemParams, num_drops: usize, seed: u64) -> Result<SqinrReport> {
    run_experiment(
        params,
        num_drops,
        seed,
        RunOptions {
            duplex: DuplexMode::Half,
            ..RunOptions::default()
        },
    )
}

/// One report per resolution (ADC and DAC set alike), all on the same drops.
pub fn sweep_bits(
    params: &SystemParams,
    bits_list: &[Resolution],
    num_drops: usize,
    seed: u64,
    options: RunOptions,
) -> Result<Vec<(Resolution, SqinrReport)>> {
    if bits_list.is_empty() {
        return Err(Error::Usage("empty bits list".into()));
    }
    let budgets = drop_budgets(params, num_drops, seed)?;
    bits_list
        .iter()
        .map(|&b| {
            let q = Quantizer::new(b)?;
            let quantized: Vec<LinkBudget> = budgets
                .iter()
                .map(|lb| LinkBudget {
                    uplink: q,
                    downlink: q,
                    ..lb.clone()
                })
                .collect();
            let p = SystemParams {
                adc_bits: b,
                dac_bits: b,
                ..params.clone()
            };
            Ok((b, evaluate_budgets(&quantized, &p, num_drops, seed, options)?))
        })
        .collect()
}

/// `bits,se_gross,se_effective,p5_db,p50_db,p95_db`.
pub fn write_sweep_csv<W: Write>(rows: &[(Resolution, SqinrReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bits", "se_gross", "se_effective", "p5_db", "p50_db", "p95_db"])?;
    for (b, r) in rows {
        w.write_record([
            b.to_string(),
            r.se_gross.to_string(),
            r.se_effective.to_string(),
            r.quantile_db(0.05).to_string(),
            r.quantile_db(0.5).to_string(),
            r.quantile_db(0.95).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
