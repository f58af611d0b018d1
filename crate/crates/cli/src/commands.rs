use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wick_cluster::clustering::{
    joint_cumulant_check, l1_divergence_probe, kernel_row_check, observable_check, Exponent, IndexSet, Observable,
};
use wick_cluster::dnls::{run_demo, DemoConfig};
use wick_cluster::fields::{Channel, FieldConfig, FieldModel, SpectralGaussianField};
use wick_cluster::partitions::{verify_comb_est, DEFAULT_MAX_ELEMENTS};
use wick_cluster::{BoundReport, CumulantTable};

use crate::config;
use crate::manifest::Run;
use crate::Common;

#[derive(Serialize)]
struct StatsRow {
    n: usize,
    lhs: f64,
    rhs: f64,
    ratio: f64,
    flag: bool,
}

pub fn partition_stats(common: &Common) -> Result<bool> {
    let max = common.max_order.unwrap_or(12);
    if !(2..=DEFAULT_MAX_ELEMENTS).contains(&max) {
        bail!("--max-order must lie in 2..={DEFAULT_MAX_ELEMENTS}, got {max}");
    }
    let settings = serde_json::json!({ "max_order": max });
    let mut run = Run::start("partition-stats", None, common.seed.unwrap_or(0), &common.out, settings)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for n in 1..=max / 2 {
        let mut r = verify_comb_est(n).with_context(|| format!("combinatorial estimate at n = {n}"))?;
        if common.corrupt_rhs {
            r.scale_rhs(1e-6);
        }
        run.flag(r.flag);
        rows.push(StatsRow { n, lhs: r.lhs, rhs: r.rhs, ratio: r.ratio, flag: r.flag });
        reports.push(r);
    }
    run.write_csv("partition_stats.csv", &rows)?;
    run.write_json("partition_stats.json", &serde_json::json!({ "reports": reports }))?;
    run.finish()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: Option<u64>,
    pub max_order: Option<usize>,
    /// Half width of the lattice box used for spectral models.
    pub radius: u64,
    pub exponents: Vec<f64>,
    pub fields: Vec<FieldConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: None,
            max_order: None,
            radius: 200,
            exponents: vec![1.0, 2.0],
            fields: Vec::new(),
        }
    }
}

fn default_fields(seed: u64) -> Vec<FieldConfig> {
    let mut fields = vec![FieldConfig::Sinc { grid: None }, FieldConfig::Iid { variance: 1.0 }];
    for i in 0..3 {
        fields.push(FieldConfig::Discrete {
            seed: seed.wrapping_add(i),
            sites: 2,
            atoms: 3,
            complex: false,
            two_field: true,
        });
    }
    fields
}

fn label(f: &FieldConfig, i: usize) -> String {
    match f {
        FieldConfig::Sinc { .. } => format!("{i:02}-sinc"),
        FieldConfig::Iid { .. } => format!("{i:02}-iid"),
        FieldConfig::Spectral { .. } => format!("{i:02}-spectral"),
        FieldConfig::Discrete { seed, .. } => format!("{i:02}-discrete-{seed}"),
    }
}

/// `(psi set, phi set)`; single-component discrete fields use one set for both.
fn index_sets(model: &FieldModel, radius: u64) -> (IndexSet, IndexSet) {
    match model {
        FieldModel::Spectral(_) => (IndexSet::lattice(&[0], radius, false), IndexSet::lattice(&[1], radius, false)),
        FieldModel::Discrete(f) => {
            let psi = IndexSet::discrete(f, Some(0));
            let phi = IndexSet::discrete(f, Some(1));
            if phi.refs.is_empty() {
                let all = IndexSet::discrete(f, None);
                (all.clone(), all)
            } else {
                (psi, phi)
            }
        }
    }
}

pub fn verify_bounds(common: &Common) -> Result<bool> {
    let mut cfg: VerifyConfig = config::load(common.config.as_deref())?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let max_order = common.max_order.or(cfg.max_order).unwrap_or(4);
    if !(2..=DEFAULT_MAX_ELEMENTS).contains(&max_order) {
        bail!("--max-order must lie in 2..={DEFAULT_MAX_ELEMENTS}, got {max_order}");
    }
    if cfg.fields.is_empty() {
        cfg.fields = default_fields(seed);
    }
    let exponents: Vec<Exponent> = cfg
        .exponents
        .iter()
        .map(|&p| Exponent::new(p))
        .collect::<wick_cluster::Result<_>>()?;
    let orders: Vec<usize> = (1..=max_order / 2).collect();
    let settings = serde_json::json!({ "max_order": max_order, "config": cfg });
    let mut run = Run::start("verify-bounds", common.config.as_deref(), seed, &common.out, settings)?;

    #[derive(Serialize)]
    struct SummaryRow {
        field: String,
        id: String,
        m: Option<usize>,
        n: Option<usize>,
        p: Option<String>,
        lhs: f64,
        rhs: f64,
        ratio: f64,
        flag: bool,
    }
    let mut summary = Vec::new();
    for (i, fc) in cfg.fields.iter().enumerate() {
        let name = label(fc, i);
        let model = fc.build().with_context(|| format!("building field {name}"))?;
        let table = CumulantTable::with_closed_forms(&model);
        let (psi, phi) = index_sets(&model, cfg.radius);
        let x = Observable::site(psi.anchors[0]);
        let mut reports: Vec<BoundReport> = Vec::new();
        for &p in &exponents {
            for &n in &orders {
                let xp = vec![phi.anchors[0]; n];
                reports.push(
                    kernel_row_check(&table, &phi, n, p, &xp).with_context(|| format!("{name}: kernel row bound n={n} p={p}"))?,
                );
                reports.push(
                    observable_check(&table, &phi, &x, n, p, &[])
                        .with_context(|| format!("{name}: observable bound n={n} p={p}"))?,
                );
                for &m in &orders {
                    reports.push(
                        joint_cumulant_check(&table, &psi, &phi, m, n, p, &[], &[])
                            .with_context(|| format!("{name}: joint bound m={m} n={n} p={p}"))?,
                    );
                }
            }
        }
        for mut r in reports {
            if common.corrupt_rhs {
                r.scale_rhs(1e-6);
            }
            let chain_ok = r.chain_flags().is_none_or(|(a, b)| a && b);
            run.flag(r.flag && chain_ok);
            let file = format!(
                "{name}/{}_m{}_n{}_p{}.json",
                r.id,
                r.m.unwrap_or(0),
                r.n.unwrap_or(0),
                r.p.as_deref().unwrap_or("-")
            );
            run.write_json(&file, &r)?;
            summary.push(SummaryRow {
                field: name.clone(),
                id: r.id.clone(),
                m: r.m,
                n: r.n,
                p: r.p.clone(),
                lhs: r.lhs,
                rhs: r.rhs,
                ratio: r.ratio,
                flag: r.flag && chain_ok,
            });
        }
    }
    run.write_csv("summary.csv", &summary)?;
    let failed: Vec<String> = summary
        .iter()
        .filter(|r| !r.flag)
        .map(|r| format!("{}:{} m={:?} n={:?} p={:?}", r.field, r.id, r.m, r.n, r.p))
        .collect();
    for f in &failed {
        eprintln!("bound violated: {f}");
    }
    run.finish()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianExampleConfig {
    pub radii: Vec<u64>,
    /// Expected slope of the `l1` partial sums against `ln R`.
    pub slope_target: f64,
    pub slope_tolerance: f64,
    pub l2_limit: f64,
    pub l2_tolerance: f64,
    pub grid: Option<usize>,
}

impl Default for GaussianExampleConfig {
    fn default() -> Self {
        GaussianExampleConfig {
            radii: vec![100, 1_000, 10_000],
            slope_target: 2.0 / PI,
            slope_tolerance: 0.05,
            l2_limit: 0.5,
            l2_tolerance: 1e-3,
            grid: None,
        }
    }
}

pub fn example_gaussian(common: &Common) -> Result<bool> {
    let cfg: GaussianExampleConfig = config::load(common.config.as_deref())?;
    let settings = serde_json::to_value(&cfg)?;
    let mut run = Run::start("example-gaussian", common.config.as_deref(), common.seed.unwrap_or(0), &common.out, settings)?;
    let mut field = SpectralGaussianField::sinc_coupling_example();
    if let Some(g) = cfg.grid {
        field = field.with_grid(g);
    }
    let l1 = l1_divergence_probe(&field, 0, &cfg.radii, 1.0)?;
    let l2 = l1_divergence_probe(&field, 0, &cfg.radii, 2.0)?;

    #[derive(Serialize)]
    struct Row {
        radius: u64,
        ln_radius: f64,
        l1_partial_sum: f64,
        l2_partial_sum: f64,
    }
    let rows: Vec<Row> = l1
        .rows
        .iter()
        .zip(&l2.rows)
        .map(|(a, b)| Row {
            radius: a.radius,
            ln_radius: (a.radius as f64).ln(),
            l1_partial_sum: a.partial_sum,
            l2_partial_sum: b.partial_sum,
        })
        .collect();
    run.write_csv("partial_sums.csv", &rows)?;

    let margin = field.psd_margin();
    let psd_ok = field.check_psd().is_ok();
    let psd_witness = [0.0, 0.2, 0.25, 0.3, 0.5]
        .iter()
        .map(|&k| {
            serde_json::json!({
                "k": k,
                "psi": field.spectrum(Channel::PsiPsi).at(k),
                "phi": field.spectrum(Channel::PhiPhi).at(k),
                "cross": field.spectrum(Channel::PsiPhi).at(k),
            })
        })
        .collect::<Vec<_>>();
    run.write_json(
        "psd.json",
        &serde_json::json!({ "schema_version": 1, "flag": psd_ok, "margin": margin, "samples": psd_witness }),
    )?;

    let slope = l1.slope.context("slope fit needs at least two radii >= 1")?;
    let slope_err = (slope - cfg.slope_target).abs() / cfg.slope_target;
    let slope_ok = slope_err <= cfg.slope_tolerance;
    let last = l2.rows.last().context("no radii")?.partial_sum;
    let l2_ok = (last - cfg.l2_limit).abs() <= cfg.l2_tolerance;
    run.write_json(
        "summary.json",
        &serde_json::json!({
            "schema_version": 1,
            "l1_slope": slope,
            "l1_intercept": l1.intercept,
            "slope_target": cfg.slope_target,
            "slope_relative_error": slope_err,
            "slope_flag": slope_ok,
            "l2_sum_at_largest_radius": last,
            "l2_limit": cfg.l2_limit,
            "l2_flag": l2_ok,
            "psd_flag": psd_ok,
        }),
    )?;
    for ok in [slope_ok, l2_ok, psd_ok] {
        run.flag(ok);
    }
    if !slope_ok {
        eprintln!(
            "l1 slope {slope:.6} differs from target {:.6} by {:.1}%",
            cfg.slope_target,
            100.0 * slope_err
        );
    }
    run.finish()
}

pub fn dnls_demo(common: &Common) -> Result<bool> {
    let mut cfg: DemoConfig = config::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.base.seed = s;
    }
    cfg.base.validate().context("invalid DNLS configuration")?;
    let settings = serde_json::to_value(&cfg)?;
    let mut run = Run::start("dnls-demo", common.config.as_deref(), cfg.base.seed, &common.out, settings)?;
    let report = run_demo(&cfg).context("DNLS demo failed")?;
    run.write_csv("residuals.csv", &report.rows)?;
    let zero_ok = report.zero_coupling_ok();
    let collapse_ok = report.collapse_ok();
    run.write_json(
        "fits.json",
        &serde_json::json!({
            "schema_version": 1,
            "fits": report.fits,
            "zero_coupling_ratio": report.zero_coupling_ratio,
            "zero_coupling_flag": zero_ok,
            "spread": report.spread,
            "collapse_flag": collapse_ok,
        }),
    )?;
    run.flag(zero_ok);
    run.flag(collapse_ok);
    run.finish()
}

