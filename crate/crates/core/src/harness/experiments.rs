//! The five experiment suites. Each turns an [`ExperimentConfig`] into the
//! data section of a report; [`run`] adds timing and metadata.
//!
//! Every replica draws from its own stream keyed by experiment tag, cell key
//! and replica index, and results are reduced in index order, so the data
//! section depends only on the config and seed.

use std::collections::BTreeMap;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use super::config::{Experiment, ExperimentConfig, TreeKind};
use super::report::{Cell, ExperimentReport, Hypothesis, Meta, ReportData, Stat, SEED_SCHEME};
use super::rng::{stream, Pool, Purpose};
use super::stats::{
    chi_square_homogeneity, frechet_cdf, ks_statistic, loglog_slope, median, quantile_sorted,
    sorted, total_variation, Proportion,
};
use crate::analysis::{
    calibrate_dds_constant, karamata_crosscheck, prop1_rhs, size_tail_exact, size_tail_oracle,
    Convention, GvEvaluator,
};
use crate::error::{Error, Result};
use crate::heavytail::TailMode;
use crate::treegen::{
    sample_free, sample_free_size, sample_height_conditioned, sample_size_conditioned, Sampled,
    Tree,
};
use crate::walk::{
    ancestor_pairs, big_jump_events, run_free_walk, run_walk_with, sample_steps, WalkSummary,
};

/// Replicas reduced per parallel batch in the streaming experiments.
const CHUNK: u64 = 1 << 16;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = Pool::new(cfg.threads)?;
    let data = match cfg.experiment {
        Experiment::Thm1 => run_thm1(cfg, &pool)?,
        Experiment::Thm2 => run_thm2(cfg, &pool)?,
        Experiment::Prop1 => run_prop1(cfg, &pool)?,
        Experiment::GwVerify => run_gw_verify(cfg, &pool)?,
        Experiment::Calibrate => run_calibrate(cfg, &pool)?,
    };
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(ExperimentReport {
        data,
        meta: Meta {
            runtime_secs: start.elapsed().as_secs_f64(),
            threads: cfg.threads,
            timestamp,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

pub fn hypothesis(cfg: &ExperimentConfig) -> Hypothesis {
    let d = cfg.offspring.dimension();
    let d_crit = cfg.step.d_crit();
    Hypothesis {
        d,
        d_crit,
        holds: d > d_crit,
    }
}

fn base_data(cfg: &ExperimentConfig) -> ReportData {
    ReportData {
        experiment: cfg.experiment.to_string(),
        config: cfg.echo(),
        base_seed: cfg.base_seed,
        seed_scheme: SEED_SCHEME.to_string(),
        hypothesis: Some(hypothesis(cfg)),
        truncation_bias: None,
        cells: Vec::new(),
        checks: Vec::new(),
        warnings: Vec::new(),
    }
}

/// `f(start), ..., f(end - 1)` folded into `acc` in index order, `CHUNK`
/// replicas at a time.
fn fold_chunked<T, A, F, G>(pool: &Pool, n: u64, f: F, mut acc: A, mut fold: G) -> A
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
    G: FnMut(&mut A, T),
{
    let mut start = 0;
    while start < n {
        let len = CHUNK.min(n - start);
        for t in pool.map(len, |i| f(start + i)) {
            fold(&mut acc, t);
        }
        start += len;
    }
    acc
}

fn is_budget(e: &Error) -> bool {
    matches!(e, Error::BudgetExhausted { .. })
}

const RATIO_KEYS: [&str; 4] = ["ratio_s", "ratio_sl", "ratio_sabs", "ratio_slabs"];
const MAX_KEYS: [&str; 6] = [
    "s_max",
    "sL_max",
    "sabs_max",
    "sLabs_max",
    "x_max",
    "xabs_max",
];

fn maxima(w: &WalkSummary) -> [f64; 6] {
    [
        w.s_max,
        w.s_leaf_max,
        w.sabs_max,
        w.s_leaf_abs_max,
        w.x_max,
        w.xabs_max,
    ]
}

/// Walk maxima on size-conditioned trees (or stars), compared with the
/// largest jump and with the Fréchet limit.
pub fn run_thm1(cfg: &ExperimentConfig, pool: &Pool) -> Result<ReportData> {
    let mut data = base_data(cfg);
    let hyp = data.hypothesis.expect("set by base_data");
    if !hyp.holds {
        data.warnings.push(format!(
            "D = {} does not exceed D_crit = {}: this run is a negative control",
            hyp.d, hyp.d_crit
        ));
    }
    let sampler = cfg.step.sampler()?;
    let alpha = cfg.step.alpha();
    let mut all_consistent = true;
    let mut dev_fracs = Vec::new();
    let mut big_fracs = Vec::new();
    let mut medians = Vec::new();
    for &n in &cfg.sizes {
        // non-root vertex count
        let v = match cfg.tree {
            TreeKind::SizeConditioned => n - 1,
            TreeKind::Star => n,
        };
        if v < 2 {
            return Err(Error::Config(format!(
                "thm1 needs trees with at least 2 non-root vertices, got n = {n}"
            )));
        }
        let a_pos = cfg.step.quantile_an(v, TailMode::Pos)?;
        let a_abs = cfg.step.quantile_an(v, TailMode::Abs)?;
        let results = pool.try_map(cfg.replicas, |r| {
            let tree = match cfg.tree {
                TreeKind::Star => Tree::star(n as usize)?,
                TreeKind::SizeConditioned => {
                    let mut rng = stream(cfg.base_seed, "thm1", n, Purpose::Tree, r);
                    match sample_size_conditioned(&cfg.offspring, n as usize, &mut rng) {
                        Ok(t) => t,
                        Err(e) if is_budget(&e) => return Ok(None),
                        Err(e) => return Err(e),
                    }
                }
            };
            let mut rng = stream(cfg.base_seed, "thm1", n, Purpose::Steps, r);
            run_walk_with(&tree, &sampler, &mut rng).map(Some)
        })?;
        let walks: Vec<WalkSummary> = results.iter().flatten().copied().collect();
        let mut cell = Cell::new(format!("n={n}"), cfg.replicas)
            .param("n", n as f64)
            .param("v", v as f64);
        cell.failures = cfg.replicas - walks.len() as u64;
        cell.push(Stat::value("a_pos", a_pos, 0));
        cell.push(Stat::value("a_abs", a_abs, 0));
        all_consistent &= walks.iter().all(WalkSummary::is_consistent);
        let m = walks.len() as u64;
        for (k, key) in RATIO_KEYS.iter().enumerate() {
            let ratios: Vec<f64> = walks.iter().map(|w| w.ratios()[k]).collect();
            let dev = ratios
                .iter()
                .filter(|r| !((**r - 1.0).abs() <= 0.25))
                .count() as u64;
            let big = ratios.iter().filter(|r| **r > 1.5).count() as u64;
            if m > 0 {
                let s = sorted(&ratios);
                for (label, p) in [
                    ("q05", 0.05),
                    ("q25", 0.25),
                    ("median", 0.5),
                    ("q75", 0.75),
                    ("q95", 0.95),
                ] {
                    cell.push(Stat::value(
                        format!("{key}.{label}"),
                        quantile_sorted(&s, p),
                        m,
                    ));
                }
                if k == 0 {
                    medians.push(quantile_sorted(&s, 0.5));
                }
            }
            let dev = Proportion::new(dev, m);
            let big = Proportion::new(big, m);
            if k == 0 {
                dev_fracs.push(dev.estimate);
                big_fracs.push(big.estimate);
            }
            cell.push(Stat::proportion(format!("{key}.frac_dev_gt_0.25"), &dev));
            cell.push(Stat::proportion(format!("{key}.frac_gt_1.5"), &big));
        }
        if m > 0 {
            for (j, key) in MAX_KEYS.iter().enumerate() {
                let a = if matches!(j, 0 | 1 | 4) { a_pos } else { a_abs };
                let xs: Vec<f64> = walks.iter().map(|w| maxima(w)[j] / a).collect();
                cell.push(Stat::value(
                    format!("ks.{key}"),
                    ks_statistic(&xs, frechet_cdf(alpha))?,
                    m,
                ));
            }
        }
        data.cells.push(cell);
    }
    data.check(
        "walk_consistency",
        all_consistent,
        "orderings between the six maxima hold on every walk",
    );
    if cfg.sizes.len() >= 2 && medians.len() == cfg.sizes.len() {
        if hyp.holds {
            let ok = dev_fracs.windows(2).all(|w| w[1] <= w[0]);
            data.check(
                "deviation_fraction_nonincreasing",
                ok,
                format!("P(|S_max/X_max - 1| > 0.25) over sizes: {dev_fracs:?}"),
            );
        } else {
            let ok = medians.last() > medians.first() && big_fracs.last() > big_fracs.first();
            data.check(
                "negative_control_ratio_grows",
                ok,
                format!("median S_max/X_max {medians:?}; P(ratio > 1.5) {big_fracs:?}"),
            );
        }
    }
    Ok(data)
}

/// Outcome of one free tree in thm2.
#[derive(Clone, Copy)]
enum FreeOutcome {
    Capped,
    Singleton,
    /// `(S_max, S^L_max, delta, X_max)`
    Walk([f64; 4]),
}

/// Tails of the walk maxima on free trees against the exact tail of the
/// largest jump.
pub fn run_thm2(cfg: &ExperimentConfig, pool: &Pool) -> Result<ReportData> {
    let mut data = base_data(cfg);
    let sampler = cfg.step.sampler()?;
    let ev = GvEvaluator::new(cfg.offspring.clone());
    let bias = size_tail_oracle(&cfg.offspring, cfg.cap);
    data.truncation_bias = Some(bias);
    let xs = cfg.thresholds();
    if xs.is_empty() {
        return Err(Error::Config("no thresholds at or below x_max".into()));
    }
    let oracle: Vec<f64> = xs
        .iter()
        .map(|&x| ev.xmax_tail_exact(&cfg.step, x, TailMode::Pos, Convention::Nonroot))
        .collect::<Result<_>>()?;
    let admitted: Vec<bool> = oracle.iter().map(|&o| o >= 10.0 * bias).collect();
    for (x, (&o, &ok)) in xs.iter().zip(oracle.iter().zip(&admitted)) {
        if !ok {
            data.warnings.push(format!(
                "x = {x} refused: oracle tail {o:.3e} is below 10 x truncation bias {bias:.3e}; raise cap"
            ));
        }
    }
    let nx = xs.len();
    let cap = usize::try_from(cfg.cap).unwrap_or(usize::MAX);
    let draw = |r: u64| {
        let mut trng = stream(cfg.base_seed, "thm2", 0, Purpose::Tree, r);
        let mut srng = stream(cfg.base_seed, "thm2", 0, Purpose::Steps, r);
        match run_free_walk(&cfg.offspring, &sampler, &mut trng, &mut srng, cap) {
            Sampled::CapExceeded => FreeOutcome::Capped,
            Sampled::Complete(fw) => match fw.summary {
                None => FreeOutcome::Singleton,
                Some(w) => FreeOutcome::Walk([w.s_max, w.s_leaf_max, w.delta, w.x_max]),
            },
        }
    };
    // counts[i][j]: replicas with statistic j above xs[i]
    let init = (vec![[0u64; 4]; nx], 0u64, 0u64);
    let (counts, capped, singletons) =
        fold_chunked(pool, cfg.replicas, draw, init, |acc, out| match out {
            FreeOutcome::Capped => acc.1 += 1,
            FreeOutcome::Singleton => acc.2 += 1,
            FreeOutcome::Walk(m) => {
                for (row, &x) in acc.0.iter_mut().zip(&xs) {
                    for (c, &v) in row.iter_mut().zip(&m) {
                        *c += (v > x) as u64;
                    }
                }
            }
        });
    let n = cfg.replicas;
    let names = ["s_max", "sL_max", "delta", "x_max"];
    let mut oracle_ok = true;
    let mut slope_x = Vec::new();
    let mut slope_p = Vec::new();
    let mut delta_ratios = Vec::new();
    for i in 0..nx {
        let x = xs[i];
        let mut cell = Cell::new(format!("x={x}"), n)
            .param("x", x)
            .param("admitted", if admitted[i] { 1.0 } else { 0.0 });
        cell.capped = capped;
        cell.push(Stat::value("oracle_x_max_tail", oracle[i], 0));
        let props: Vec<Proportion> = (0..4).map(|j| Proportion::new(counts[i][j], n)).collect();
        for j in 0..4 {
            cell.push(Stat::proportion(format!("p_{}", names[j]), &props[j]));
        }
        for j in 0..4 {
            cell.push(Stat::ratio(
                format!("ratio_{}", names[j]),
                &props[j],
                oracle[i],
            ));
        }
        if admitted[i] {
            let sd = (oracle[i] * (1.0 - oracle[i]) / n as f64).sqrt();
            oracle_ok &= (props[3].estimate - oracle[i]).abs() <= 4.0 * sd + bias;
            if props[0].count > 0 {
                slope_x.push(x);
                slope_p.push(props[0].estimate);
            }
            delta_ratios.push(props[2].estimate / oracle[i]);
        }
        data.cells.push(cell);
    }
    let mut summary = Cell::new("summary", n);
    summary.capped = capped;
    summary.push(Stat::proportion(
        "capped_fraction",
        &Proportion::new(capped, n),
    ));
    summary.push(Stat::proportion(
        "singleton_fraction",
        &Proportion::new(singletons, n),
    ));
    summary.push(Stat::value("truncation_bias", bias, 0));
    summary.push(Stat::value(
        "admitted_points",
        admitted.iter().filter(|a| **a).count() as f64,
        0,
    ));
    if slope_x.len() >= 2 {
        summary.push(Stat::value(
            "loglog_slope_s_max",
            loglog_slope(&slope_x, &slope_p),
            n,
        ));
        let o: Vec<f64> = xs
            .iter()
            .zip(&oracle)
            .zip(&admitted)
            .filter(|(_, a)| **a)
            .map(|((_, o), _)| *o)
            .collect();
        let ox: Vec<f64> = xs
            .iter()
            .zip(&admitted)
            .filter(|(_, a)| **a)
            .map(|(x, _)| *x)
            .collect();
        summary.push(Stat::value("loglog_slope_oracle", loglog_slope(&ox, &o), 0));
    }
    if let Some(last) = delta_ratios.last() {
        summary.push(Stat::value("delta_ratio_at_top_x", *last, n));
    }
    data.cells.push(summary);
    data.check(
        "x_max_tail_matches_oracle",
        oracle_ok,
        "empirical P(X_max > x) within 4 sd + truncation bias of the exact tail at every admitted x",
    );
    data.check(
        "admission_rule",
        xs.iter()
            .zip(&oracle)
            .zip(&admitted)
            .all(|((_, o), a)| !*a || *o >= 10.0 * bias),
        "every admitted x has oracle tail >= 10 x truncation bias",
    );
    if !admitted.iter().any(|a| *a) {
        data.warnings.push("no threshold admitted".into());
    }
    Ok(data)
}

// event flags per (walk, z, y)
const G1C: u8 = 1;
const G2C: u8 = 2;
const DELTA: u8 = 4;
const VIOL: u8 = 8;
const VIOL_BIG: u8 = 16;

/// Event frequencies of the single-big-jump argument on fixed trees.
pub fn run_prop1(cfg: &ExperimentConfig, pool: &Pool) -> Result<ReportData> {
    let mut data = base_data(cfg);
    let sampler = cfg.step.sampler()?;
    let scale = cfg.step.scale(cfg.epsilon)?;
    let trees = pool.try_map(cfg.trees, |i| {
        let n = cfg.sizes[(i % cfg.sizes.len() as u64) as usize];
        let mut rng = stream(cfg.base_seed, "prop1", i, Purpose::Tree, 0);
        sample_size_conditioned(&cfg.offspring, n as usize, &mut rng)
    })?;
    let max_h = trees
        .iter()
        .map(|t| t.height() as u64)
        .max()
        .unwrap_or(1)
        .max(1);

    let c_hat = match cfg.dds_c {
        Some(c) => c,
        None => {
            let mut grid: Vec<u64> = std::iter::successors(Some(1u64), |n| Some(n * 2))
                .take_while(|&n| n < max_h)
                .collect();
            grid.push(max_h);
            let mut best = 0.0f64;
            for (k, &zm) in cfg.z_mult.iter().enumerate().filter(|(_, zm)| **zm >= 1.0) {
                let mut rng = stream(cfg.base_seed, "prop1.calibrate", k as u64, Purpose::Aux, 0);
                let cal = calibrate_dds_constant(
                    &cfg.step,
                    &scale,
                    &grid,
                    &cfg.y_mult,
                    |n| zm * scale.b(n),
                    cfg.replicas,
                    &mut rng,
                )?;
                let mut cell =
                    Cell::new(format!("calibration z_mult={zm}"), cfg.replicas).param("z_mult", zm);
                cell.push(Stat::value("c_hat", cal.c_hat, cfg.replicas));
                cell.push(Stat::value("c_point", cal.c_point, cfg.replicas));
                data.cells.push(cell);
                best = best.max(cal.c_hat);
            }
            best
        }
    };

    let pairs: Vec<(f64, f64)> = cfg
        .z_mult
        .iter()
        .flat_map(|&zm| cfg.y_mult.iter().map(move |&ym| (zm, ym)))
        .collect();
    let mut skipped = 0u64;
    let (mut g1_ok, mut g2_ok, mut incl_ok) = (true, true, true);
    let (mut violations, mut violations_big) = (0u64, 0u64);
    for (i, tree) in trees.iter().enumerate() {
        let h = tree.height() as u64;
        let v = tree.nonroot() as u64;
        if v == 0 {
            skipped += pairs.len() as u64;
            continue;
        }
        let b_h = scale.b(h);
        let thresholds: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(zm, ym)| (zm * b_h, ym * zm * b_h))
            .collect();
        let flags = pool.try_map(cfg.replicas, |r| {
            let mut rng = stream(cfg.base_seed, "prop1", i as u64, Purpose::Steps, r);
            let steps = sample_steps(tree, &sampler, &mut rng);
            thresholds
                .iter()
                .map(|&(z, y)| {
                    let e = big_jump_events(tree, &steps, z, y)?;
                    let flag = |set: bool, bit: u8| if set { bit } else { 0 };
                    Ok(flag(!e.g1, G1C)
                        | flag(!e.g2, G2C)
                        | flag(e.delta > y, DELTA)
                        | flag(e.violation, VIOL)
                        | flag(e.violation_with_big_jump, VIOL_BIG))
                })
                .collect::<Result<Vec<u8>>>()
        })?;
        let n_pairs = ancestor_pairs(tree);
        for (k, (&(zm, ym), &(z, y))) in pairs.iter().zip(&thresholds).enumerate() {
            if z < b_h {
                skipped += 1;
                continue;
            }
            let count = |bit: u8| flags.iter().filter(|f| f[k] & bit != 0).count() as u64;
            let n = cfg.replicas;
            let (g1c, g2c, dl) = (
                Proportion::new(count(G1C), n),
                Proportion::new(count(G2C), n),
                Proportion::new(count(DELTA), n),
            );
            let (viol, viol_big) = (count(VIOL), count(VIOL_BIG));
            violations += viol;
            violations_big += viol_big;
            let t = cfg.step.tail_abs(z);
            let bound_g1 = n_pairs as f64 * t * t;
            let bound_g1_hv = h as f64 * v as f64 / 2.0 * t * t;
            let bound_g2 = c_hat * v as f64 * (-y / z).exp();
            g1_ok &= g1c.estimate <= bound_g1 + 3.0 * g1c.sd();
            g2_ok &= g2c.estimate <= bound_g2 + 3.0 * g2c.sd();
            incl_ok &= dl.estimate <= g1c.estimate + g2c.estimate + 3.0 * dl.sd();
            let mut cell = Cell::new(format!("tree={i} z_mult={zm} y_mult={ym}"), n)
                .param("tree", i as f64)
                .param("n", tree.size_total() as f64)
                .param("h", h as f64)
                .param("v", v as f64)
                .param("z_mult", zm)
                .param("y_mult", ym)
                .param("z", z)
                .param("y", y)
                .param("ancestor_pairs", n_pairs as f64);
            cell.push(Stat::proportion("p_g1c", &g1c));
            cell.push(Stat::proportion("p_g2c", &g2c));
            cell.push(Stat::proportion("p_delta_gt_y", &dl));
            cell.push(Stat::value("bound_g1", bound_g1, 0));
            cell.push(Stat::value("bound_g1_hv", bound_g1_hv, 0));
            cell.push(Stat::value("bound_g2", bound_g2, 0));
            cell.push(Stat::value(
                "rhs",
                prop1_rhs(h, v, z, y, c_hat, &cfg.step),
                0,
            ));
            cell.push(Stat::proportion("violations", &Proportion::new(viol, n)));
            cell.push(Stat::proportion(
                "violations_with_big_jump",
                &Proportion::new(viol_big, n),
            ));
            data.cells.push(cell);
        }
    }
    let mut summary = Cell::new("summary", cfg.trees * cfg.replicas);
    summary.push(Stat::value("c_hat", c_hat, 0));
    summary.push(Stat::value("skipped_cells", skipped as f64, 0));
    summary.push(Stat::value("violations", violations as f64, 0));
    summary.push(Stat::value(
        "violations_with_big_jump",
        violations_big as f64,
        0,
    ));
    data.cells.push(summary);
    if skipped > 0 {
        data.warnings.push(format!(
            "{skipped} cells skipped: z below b_H or tree without steps"
        ));
    }
    data.check(
        "g1_union_bound",
        g1_ok,
        "P(G1^c) <= (ancestor pairs) P(|X| > z)^2 + 3 sd in every cell",
    );
    data.check(
        "g2_truncated_bound",
        g2_ok,
        format!("P(G2^c) <= C V exp(-y/z) + 3 sd in every cell, C = {c_hat}"),
    );
    data.check(
        "inclusion",
        incl_ok,
        "P(delta > y) <= P(G1^c) + P(G2^c) + 3 sd in every cell",
    );
    data.check(
        "g1_g2_imply_delta_le_y",
        violations == 0,
        format!("{violations} walks with G1, G2 and delta > y"),
    );
    data.check(
        "g1_g2_big_jump_imply_delta_le_y",
        violations_big == 0,
        format!("{violations_big} walks with G1, G2, X_max > z and delta > y"),
    );
    Ok(data)
}

/// Height scaling of size-conditioned trees and free-tree checks of the size
/// tail, the height law and the spine construction.
pub fn run_gw_verify(cfg: &ExperimentConfig, pool: &Pool) -> Result<ReportData> {
    let mut data = base_data(cfg);
    let law = &cfg.offspring;
    let d = law.dimension();
    let at = law.alpha_t();
    let epss = [0.05, 0.1];
    let mut exceed: Vec<Vec<f64>> = vec![Vec::new(); epss.len()];
    for &n in &cfg.sizes {
        let hs = pool.try_map(cfg.replicas, |r| {
            let mut rng = stream(cfg.base_seed, "gw_verify.height", n, Purpose::Tree, r);
            match sample_size_conditioned(law, n as usize, &mut rng) {
                Ok(t) => Ok(Some(t.height() as f64)),
                Err(e) if is_budget(&e) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let hs: Vec<f64> = hs.into_iter().flatten().collect();
        let m = hs.len() as u64;
        let mut cell = Cell::new(format!("n={n}"), cfg.replicas).param("n", n as f64);
        cell.failures = cfg.replicas - m;
        let a_n = (n as f64).powf(1.0 / at);
        if m > 0 {
            let scaled: Vec<f64> = hs.iter().map(|h| h * a_n / n as f64).collect();
            cell.push(Stat::value("median_h_scaled", median(&scaled), m));
            cell.push(Stat::value("mean_h", hs.iter().sum::<f64>() / m as f64, m));
        }
        for (k, &eps) in epss.iter().enumerate() {
            let level = (n as f64).powf(1.0 / d + eps);
            let p = Proportion::new(hs.iter().filter(|&&h| h > level).count() as u64, m);
            exceed[k].push(p.estimate);
            cell.push(Stat::proportion(format!("p_h_gt_n^(1/D+{eps})"), &p));
        }
        data.cells.push(cell);
    }
    if cfg.sizes.len() >= 2 {
        for (k, &eps) in epss.iter().enumerate() {
            let ok = exceed[k].windows(2).all(|w| w[1] <= w[0]);
            data.check(
                format!("height_exceedance_nonincreasing_eps_{eps}"),
                ok,
                format!("P(H_n > n^(1/D+{eps})) over sizes: {:?}", exceed[k]),
            );
        }
    }

    // free trees: size tail
    let cap = usize::try_from(cfg.cap).unwrap_or(usize::MAX);
    let bias = size_tail_oracle(law, cfg.cap);
    data.truncation_bias = Some(bias);
    let grid: Vec<u64> = std::iter::successors(Some(10u64), |n| n.checked_mul(10))
        .take_while(|&n| n * 10 <= cfg.cap)
        .collect();
    let size_of = |r: u64| {
        let mut rng = stream(cfg.base_seed, "gw_verify.size", 0, Purpose::Tree, r);
        match sample_free_size(law, &mut rng, cap) {
            Sampled::Complete(v) => Some(v),
            Sampled::CapExceeded => None,
        }
    };
    // a capped tree exceeds every grid point, so these counts are exact
    let (tail_counts, capped) = fold_chunked(
        pool,
        cfg.free_trees,
        size_of,
        (vec![0u64; grid.len()], 0u64),
        |acc, v| {
            for (c, &n) in acc.0.iter_mut().zip(&grid) {
                if v.is_none_or(|v| v > n) {
                    *c += 1;
                }
            }
            if v.is_none() {
                acc.1 += 1;
            }
        },
    );
    let nf = cfg.free_trees;
    let mut exact_ok = true;
    for (&n, &c) in grid.iter().zip(&tail_counts) {
        let p = Proportion::new(c, nf);
        let mut cell = Cell::new(format!("size_tail n={n}"), nf).param("n", n as f64);
        cell.capped = capped;
        cell.push(Stat::proportion("p_v_gt_n", &p));
        let asym = crate::analysis::size_tail_asymptotic(law, n as f64);
        cell.push(Stat::value("asymptotic", asym, 0));
        cell.push(Stat::ratio("ratio_to_asymptotic", &p, asym));
        if let Some(e) = size_tail_exact(law, n) {
            cell.push(Stat::value("exact", e, 0));
            exact_ok &= (p.estimate - e).abs() <= 4.0 * (e * (1.0 - e) / nf as f64).sqrt();
        }
        data.cells.push(cell);
    }
    if !grid.is_empty() && law.is_critical() {
        let idx: BTreeMap<u64, f64> = grid
            .iter()
            .zip(&tail_counts)
            .map(|(&n, &c)| (n, c as f64 / nf as f64))
            .collect();
        let k = karamata_crosscheck(law, &grid, |n| idx[&n])?;
        let mut cell = Cell::new("karamata", nf);
        cell.push(Stat::value("beta", k.beta, 0));
        cell.push(Stat::value("max_abs_rel_dev", k.max_abs_rel_dev, nf));
        data.cells.push(cell);
    }
    data.check(
        "size_tail_exact",
        exact_ok,
        "empirical P(V > n) within 4 sd of the closed form where known",
    );

    // free trees: height law
    const HMAX: usize = 10;
    let height_of = |r: u64| {
        let mut rng = stream(cfg.base_seed, "gw_verify.hcdf", 0, Purpose::Tree, r);
        sample_free(law, &mut rng, cap)
            .complete()
            .map(|t| t.height() as usize)
    };
    // capped trees land in the last bin, above every i <= HMAX
    let (hcounts, hcapped) = fold_chunked(
        pool,
        cfg.replicas,
        height_of,
        (vec![0u64; HMAX + 2], 0u64),
        |acc, h| {
            acc.0[h.map_or(HMAX + 1, |h| h.min(HMAX + 1))] += 1;
            acc.1 += h.is_none() as u64;
        },
    );
    let mut cell = Cell::new("height_cdf", cfg.replicas);
    cell.capped = hcapped;
    let mut hcdf_ok = true;
    let mut cum = 0u64;
    for (i, &c) in hcounts.iter().enumerate().take(HMAX + 1) {
        cum += c;
        let p = Proportion::new(cum, cfg.replicas);
        // height_cdf(i) is P(H < i)
        let q = law.height_cdf(i + 1);
        hcdf_ok &=
            (p.estimate - q).abs() <= 4.0 * (q * (1.0 - q) / cfg.replicas as f64).sqrt() + bias;
        cell.push(Stat::proportion(format!("p_h_le_{i}"), &p));
        cell.push(Stat::value(format!("cdf_h_le_{i}"), q, 0));
    }
    data.cells.push(cell);
    data.check(
        "height_cdf",
        hcdf_ok,
        "empirical P(H <= i) within 4 sd of the recursion for i <= 10",
    );

    // spine construction against rejection
    let k = cfg.geiger_k;
    let key = |t: &Tree| {
        (
            t.root_degree().min(20),
            (t.height() as usize).min(10),
            t.size_total().min(50),
        )
    };
    let spine = pool.try_map(cfg.replicas, |r| {
        let mut rng = stream(cfg.base_seed, "gw_verify.spine", k as u64, Purpose::Tree, r);
        Ok(sample_height_conditioned(law, k, &mut rng, cap)?
            .complete()
            .map(|t| key(&t)))
    })?;
    let rejection = pool.map(cfg.replicas, |r| {
        let mut rng = stream(
            cfg.base_seed,
            "gw_verify.reject",
            k as u64,
            Purpose::Tree,
            r,
        );
        loop {
            if let Sampled::Complete(t) = sample_free(law, &mut rng, cap) {
                if t.height() as usize >= k {
                    return key(&t);
                }
            }
        }
    });
    let spine: Vec<_> = spine.into_iter().flatten().collect();
    let mut cell = Cell::new(format!("spine k={k}"), cfg.replicas).param("k", k as f64);
    cell.capped = cfg.replicas - spine.len() as u64;
    let marginal = |f: &dyn Fn(&(usize, usize, usize)) -> usize, len: usize| {
        let mut a = vec![0u64; len];
        let mut b = vec![0u64; len];
        spine.iter().for_each(|t| a[f(t)] += 1);
        rejection.iter().for_each(|t| b[f(t)] += 1);
        (a, b)
    };
    let mut max_tv = 0.0f64;
    let mut min_p = 1.0f64;
    for (name, (a, b)) in [
        ("root_degree", marginal(&|t| t.0, 21)),
        ("height", marginal(&|t| t.1, 11)),
        ("size", marginal(&|t| t.2, 51)),
    ] {
        let tv = total_variation(&a, &b);
        let (_, p) = chi_square_homogeneity(&a, &b);
        max_tv = max_tv.max(tv);
        min_p = min_p.min(p);
        cell.push(Stat::value(format!("tv_{name}"), tv, spine.len() as u64));
        cell.push(Stat::value(format!("chi2_p_{name}"), p, spine.len() as u64));
    }
    let mut joint: BTreeMap<(usize, usize, usize), [u64; 2]> = BTreeMap::new();
    spine
        .iter()
        .for_each(|t| joint.entry(*t).or_default()[0] += 1);
    rejection
        .iter()
        .for_each(|t| joint.entry(*t).or_default()[1] += 1);
    let (ja, jb): (Vec<u64>, Vec<u64>) = joint.values().map(|c| (c[0], c[1])).unzip();
    cell.push(Stat::value("tv_max_marginal", max_tv, spine.len() as u64));
    cell.push(Stat::value(
        "tv_joint",
        total_variation(&ja, &jb),
        spine.len() as u64,
    ));
    data.cells.push(cell);
    data.check(
        "spine_matches_rejection",
        min_p > 1e-3,
        format!("smallest chi-square homogeneity p-value over the three marginals {min_p:.3e}"),
    );
    Ok(data)
}

/// Repeated estimates of the truncated-walk constant and their spread.
pub fn run_calibrate(cfg: &ExperimentConfig, pool: &Pool) -> Result<ReportData> {
    let mut data = base_data(cfg);
    data.hypothesis = None;
    let scale = cfg.step.scale(cfg.epsilon)?;
    let xm = cfg
        .x_grid
        .clone()
        .unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0]);
    let runs = pool.try_map(cfg.repeats, |r| {
        let mut rng = stream(cfg.base_seed, "calibrate", 0, Purpose::Aux, r);
        calibrate_dds_constant(
            &cfg.step,
            &scale,
            &cfg.sizes,
            &xm,
            |n| scale.b(n),
            cfg.replicas,
            &mut rng,
        )
    })?;
    let c: Vec<f64> = runs.iter().map(|r| r.c_hat).collect();
    for (r, run) in runs.iter().enumerate() {
        let mut cell = Cell::new(format!("repeat={r}"), cfg.replicas).param("repeat", r as f64);
        cell.push(Stat::value("c_hat", run.c_hat, cfg.replicas));
        cell.push(Stat::value("c_point", run.c_point, cfg.replicas));
        data.cells.push(cell);
    }
    // pooled exceedance per (n, x) over all repeats
    let first = &runs[0].cells;
    for (j, base) in first.iter().enumerate() {
        let count: u64 = runs.iter().map(|r| r.cells[j].exceed.count).sum();
        let p = Proportion::new(count, cfg.replicas * cfg.repeats);
        let mut cell = Cell::new(format!("n={} x/y={}", base.n, base.x / base.y), p.trials)
            .param("n", base.n as f64)
            .param("y", base.y)
            .param("x", base.x);
        cell.push(Stat::proportion("p_exceed", &p));
        cell.push(Stat::value(
            "c_point",
            (base.x / base.y).exp() * p.estimate,
            p.trials,
        ));
        data.cells.push(cell);
    }
    let k = c.len() as f64;
    let mean = c.iter().sum::<f64>() / k;
    let sd = if c.len() > 1 {
        (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut summary = Cell::new("summary", cfg.repeats);
    summary.push(Stat::value("c_hat_mean", mean, cfg.repeats));
    summary.push(Stat::value("c_hat_sd", sd, cfg.repeats));
    summary.push(Stat::value("c_hat_cv", sd / mean, cfg.repeats));
    summary.push(Stat::value(
        "c_hat_max",
        c.iter().copied().fold(0.0, f64::max),
        cfg.repeats,
    ));
    data.cells.push(summary);
    if mean == 0.0 {
        data.warnings.push(
            "no exceedance observed; the constant is not identified at these multipliers".into(),
        );
    }
    Ok(data)
}
