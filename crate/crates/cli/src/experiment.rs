//! Runs a validated experiment: analytic metrics, Monte Carlo estimates or
//! conditional SINR CDFs.

use anyhow::{anyhow, Context, Result};
use owc_aloha::fbl::sinr_threshold;
use owc_aloha::montecarlo::{conditioned_sinr, empirical_cdf, estimate_metrics, ks_distance, simulate};
use owc_aloha::{
    AnalysisOptions, ConditionalMetrics, ConditionalStats, DerivedConstants, FblParams, SimConfig, SinrDistribution, SystemConfig,
};
use rayon::prelude::*;

use crate::config::{ExperimentKind, ExperimentSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowMode {
    Analytic,
    MonteCarlo,
}

impl RowMode {
    pub fn tag(self) -> &'static str {
        match self {
            RowMode::Analytic => "analytic",
            RowMode::MonteCarlo => "mc",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "analytic" => Some(RowMode::Analytic),
            "mc" => Some(RowMode::MonteCarlo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardErrors {
    pub epsilon: f64,
    pub throughput: f64,
    pub p_out: f64,
}

/// Metrics of one sweep point under one evaluation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub mode: RowMode,
    pub epsilon: f64,
    pub throughput: f64,
    pub p_out: f64,
    pub reliability: f64,
    /// `None` for analytic rows.
    pub standard_errors: Option<StandardErrors>,
}

/// One grid point of a conditional SINR CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfRow {
    pub u_a: usize,
    pub gamma: f64,
    pub analytic: Option<f64>,
    pub empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfReport {
    pub rows: Vec<CdfRow>,
    /// Sup distance between the analytic CDF and the samples, per `U_a`, when both exist.
    pub ks: Vec<(usize, f64)>,
}

fn at(spec: &ExperimentSpec, value: Option<f64>) -> String {
    match (spec.sweep, value) {
        (Some(p), Some(v)) => format!("at sweep point {p} = {v}"),
        _ => "at the operating point".into(),
    }
}

fn options(spec: &ExperimentSpec) -> AnalysisOptions {
    AnalysisOptions { u_a_cap: spec.run.u_a_cap, ..AnalysisOptions::default() }
}

/// Points sharing a cell configuration, by index.
fn group_by_system(points: &[Point]) -> Vec<(SystemConfig, Vec<usize>)> {
    let mut groups: Vec<(SystemConfig, Vec<usize>)> = vec![];
    for (i, p) in points.iter().enumerate() {
        match groups.iter_mut().find(|(s, _)| *s == p.system) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((p.system, vec![i])),
        }
    }
    groups
}

/// Metrics for every sweep point, in sweep order; in `both` mode the analytic
/// row of each point precedes its Monte Carlo row.
///
/// SINR tables are built once per distinct cell and shared by all points of it.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    if spec.run.experiment != ExperimentKind::Metrics {
        return Err(anyhow!("run_experiment handles the metrics experiment; use run_sinr_cdf"));
    }
    let groups = group_by_system(&spec.points);
    let per_group: Vec<Vec<(usize, Vec<ResultRow>)>> =
        groups.par_iter().map(|(system, idx)| run_group(spec, system, idx)).collect::<Result<_>>()?;
    let mut indexed: Vec<(usize, Vec<ResultRow>)> = per_group.into_iter().flatten().collect();
    indexed.sort_by_key(|(i, _)| *i);
    Ok(indexed.into_iter().flat_map(|(_, rows)| rows).collect())
}

fn run_group(spec: &ExperimentSpec, system: &SystemConfig, idx: &[usize]) -> Result<Vec<(usize, Vec<ResultRow>)>> {
    let first = spec.points[idx[0]].value;
    let constants = system.derive().with_context(|| at(spec, first))?;
    let analytic = if spec.run.mode.analytic() {
        let needed = idx
            .iter()
            .map(|&i| {
                let p = &spec.points[i].protocol;
                if p.capture { p.max_relevant_k() } else { 1 }
            })
            .max()
            .unwrap_or(1);
        log::info!("building SINR tables for U_a = 1..={} ({})", needed.min(spec.run.u_a_cap), at(spec, first));
        let stats = ConditionalStats::build(&constants, needed, &options(spec)).with_context(|| at(spec, first))?;
        Some(stats)
    } else {
        None
    };
    let mut metrics: Vec<(FblParams, ConditionalMetrics)> = vec![];
    let mut out = Vec::with_capacity(idx.len());
    for &i in idx {
        let point = &spec.points[i];
        let ctx = || at(spec, point.value);
        let mut rows = vec![];
        if let Some(stats) = &analytic {
            let m = match metrics.iter().find(|(f, _)| *f == point.fbl) {
                Some((_, m)) => m,
                None => {
                    let m = ConditionalMetrics::compute(stats, &point.fbl).with_context(ctx)?;
                    metrics.push((point.fbl, m));
                    &metrics[metrics.len() - 1].1
                }
            };
            let r = m.report(&point.protocol, point.fbl.rate).with_context(ctx)?;
            rows.push(row(spec, point, RowMode::Analytic, r.epsilon, r.throughput, r.p_out, r.reliability, None));
        }
        if spec.run.mode.monte_carlo() {
            rows.push(monte_carlo_row(spec, point, &constants).with_context(ctx)?);
        }
        out.push((i, rows));
    }
    Ok(out)
}

fn monte_carlo_row(spec: &ExperimentSpec, point: &Point, constants: &DerivedConstants) -> Result<ResultRow> {
    let seed = spec.run.seed.ok_or_else(|| anyhow!("Monte Carlo mode requires a seed"))?;
    point.fbl.validate()?;
    let gamma_th = sinr_threshold(&point.fbl)?;
    let samples = simulate(&SimConfig::new(spec.run.slots, seed), constants, &point.protocol)?;
    let e = estimate_metrics(&samples, &point.fbl, gamma_th, point.protocol.capture);
    let se = StandardErrors { epsilon: e.se_epsilon, throughput: e.se_throughput, p_out: e.se_p_out };
    Ok(row(spec, point, RowMode::MonteCarlo, e.epsilon, e.throughput, e.p_out, e.reliability, Some(se)))
}

#[allow(clippy::too_many_arguments)]
fn row(
    spec: &ExperimentSpec,
    point: &Point,
    mode: RowMode,
    epsilon: f64,
    throughput: f64,
    p_out: f64,
    reliability: f64,
    standard_errors: Option<StandardErrors>,
) -> ResultRow {
    ResultRow {
        sweep_param: spec.sweep_label().to_owned(),
        sweep_value: point.value,
        mode,
        epsilon,
        throughput,
        p_out,
        reliability,
        standard_errors,
    }
}

/// Conditional SINR CDFs on a shared log-spaced grid, analytic and/or
/// empirical depending on the mode.
pub fn run_sinr_cdf(spec: &ExperimentSpec) -> Result<CdfReport> {
    let point = spec.points.first().ok_or_else(|| anyhow!("no operating point"))?;
    let c = point.system.derive().context("deriving cell constants")?;
    let run = &spec.run;
    let (u_min, u_max) = (*run.u_a_values.iter().min().unwrap_or(&1), *run.u_a_values.iter().max().unwrap_or(&1));
    let lo = c.gamma_min / (1.0 + (u_max - 1) as f64 * c.gamma_max);
    let hi = c.gamma_max / (1.0 + (u_min - 1) as f64 * c.gamma_min);
    let grid: Vec<f64> =
        (0..run.cdf_points).map(|i| lo * (hi / lo).powf(i as f64 / (run.cdf_points - 1) as f64)).collect();
    let opts = options(spec).inversion;

    let per_u: Vec<(Vec<CdfRow>, Option<f64>)> = run
        .u_a_values
        .par_iter()
        .map(|&u| -> Result<_> {
            let ctx = || format!("conditional SINR CDF for U_a = {u}");
            let dist = if run.mode.analytic() { Some(SinrDistribution::build(u, &c, &opts).with_context(ctx)?) } else { None };
            let samples = match run.seed {
                Some(seed) if run.mode.monte_carlo() => Some(conditioned_sinr(run.slots, seed, u, &c).with_context(ctx)?),
                _ => None,
            };
            let empirical = samples.as_ref().map(|s| empirical_cdf(s, &grid));
            let ks = match (&dist, &samples) {
                (Some(d), Some(s)) => Some(ks_distance(s, |x| d.cdf(x))),
                _ => None,
            };
            let rows = grid
                .iter()
                .enumerate()
                .map(|(i, &g)| CdfRow {
                    u_a: u,
                    gamma: g,
                    analytic: dist.as_ref().map(|d| d.cdf(g)),
                    empirical: empirical.as_ref().map(|e| e[i]),
                })
                .collect();
            Ok((rows, ks))
        })
        .collect::<Result<_>>()?;

    let mut report = CdfReport { rows: vec![], ks: vec![] };
    for (&u, (rows, ks)) in run.u_a_values.iter().zip(per_u) {
        report.rows.extend(rows);
        if let Some(ks) = ks {
            report.ks.push((u, ks));
        }
    }
    Ok(report)
}
