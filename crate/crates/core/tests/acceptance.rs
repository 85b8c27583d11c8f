//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
//!
//! Run with `cargo test -p defaultbench-core --test acceptance`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use defaultbench_core::bench::{self, generate_synthetic, ExperimentConfig, Preset, RunSummary, SyntheticSpec};
use defaultbench_core::dataset::Dataset;
use defaultbench_core::evaluation::{confusion, metrics, roc_auc, timing_table, Variant};
use defaultbench_core::loan_data::{
    assign_regime, join_and_label, parse_vintage, stratified_sample, LoanRecord, OriginationRecord, PerformanceRecord,
    Regime, ZeroBalanceCode, FIRST_VINTAGE, LAST_VINTAGE, PERFORMANCE_FIELDS,
};
use defaultbench_core::models::boosting::{fit_adaboost, fit_gradient_boosting, BoostingParams};
use defaultbench_core::models::linear::{fit_svm, SvmParams, Standardizer};
use defaultbench_core::models::mlp::Network;
use defaultbench_core::models::rough::{initial_centers, rough_kmeans_fit, RoughParams};
use defaultbench_core::models::ModelKind;
use defaultbench_core::resampling::{smote_detailed, GapDraw, ResampleConfig, ResampleError};
use defaultbench_core::rng::rng_from_seed;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

// ---------------------------------------------------------------- 1

fn zscore_rows(data: &Dataset) -> Vec<Vec<f64>> {
    let n = data.n_rows() as f64;
    let stats: Vec<(f64, f64)> = (0..data.n_features())
        .map(|c| {
            let col = data.column(c);
            let m = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    data.rows().map(|r| r.iter().zip(&stats).map(|(v, (m, s))| (v - m) / s).collect()).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn smote_geometry() -> Outcome {
    let started = Instant::now();
    let mut rng = rng_from_seed(11);
    let (mut checked, mut trial) = (0usize, 0u64);
    let mut worst: f64 = 0.0;
    while checked < 1000 {
        trial += 1;
        let d = rng.gen_range(1..=10);
        let minority = rng.gen_range(6..=200);
        let majority = minority + rng.gen_range(1..=60);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..minority + majority {
            let shift = if i < minority { 1.5 } else { 0.0 };
            rows.push((0..d).map(|_| shift + rng.gen_range(-3.0..3.0) * 10f64.powi(rng.gen_range(-2..3))).collect());
            labels.push(u8::from(i < minority));
        }
        let names = (0..d).map(|c| format!("x{c}")).collect();
        let data = Dataset::from_rows(names, &rows, labels).map_err(|e| e.to_string())?;
        let cfg = ResampleConfig { k: 5, target_ratio: 1.0, seed: trial };
        let out = smote_detailed(&data, &cfg, GapDraw::Uniform).map_err(|e| e.to_string())?;
        check(out.synthetic_count() == majority - minority, || format!("trial {trial}: wrong synthetic count"))?;

        let z = zscore_rows(&data);
        let minority_rows: Vec<usize> = (0..minority).collect();
        for (j, p) in out.provenance.iter().enumerate() {
            let s = out.data.row(out.original_rows + j);
            let (x, nb) = (data.row(p.source_row), data.row(p.neighbor_row));
            check(data.labels()[p.source_row] == 1 && data.labels()[p.neighbor_row] == 1, || {
                format!("trial {trial}: source or neighbour is not a minority row")
            })?;
            check(out.data.labels()[out.original_rows + j] == 1, || format!("trial {trial}: synthetic row not minority"))?;

            // The neighbour must be among the k nearest other minority rows (ties allowed).
            let mut dists: Vec<f64> =
                minority_rows.iter().filter(|&&r| r != p.source_row).map(|&r| dist2(&z[p.source_row], &z[r])).collect();
            dists.sort_by(f64::total_cmp);
            let kth = dists[cfg.k.min(dists.len()) - 1];
            let dn = dist2(&z[p.source_row], &z[p.neighbor_row]);
            check(dn <= kth * (1.0 + 1e-12), || format!("trial {trial}: neighbour is not among the {} nearest", cfg.k))?;

            // Collinearity and betweenness, recovering the gap by projection.
            let delta: Vec<f64> = nb.iter().zip(x).map(|(a, b)| a - b).collect();
            let len2: f64 = delta.iter().map(|v| v * v).sum();
            let offset: Vec<f64> = s.iter().zip(x).map(|(a, b)| a - b).collect();
            let scale = len2.sqrt().max(x.iter().chain(nb).map(|v| v.abs()).fold(0.0, f64::max)).max(f64::MIN_POSITIVE);
            let u = if len2 > 0.0 { offset.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>() / len2 } else { 0.0 };
            let residual = offset.iter().zip(&delta).map(|(o, dl)| (o - u * dl).powi(2)).sum::<f64>().sqrt();
            let rel = residual / scale;
            let outside = (-u).max(u - 1.0).max(0.0);
            worst = worst.max(rel).max(outside);
            check(rel <= 1e-9 && outside <= 1e-9, || {
                format!("trial {trial}: synthetic row off the segment (residual {rel:e}, u {u})")
            })?;
            checked += 1;
        }
    }
    within(started.elapsed(), Duration::from_secs(5))?;
    Ok(format!("{checked} synthetic rows over {trial} minority sets, worst relative error {worst:.1e}"))
}

// ---------------------------------------------------------------- 2

fn brute_force_auc(y: &[u8], s: &[f64]) -> f64 {
    let (mut pairs, mut wins) = (0u64, 0u64);
    for i in (0..y.len()).filter(|&i| y[i] == 1) {
        for j in (0..y.len()).filter(|&j| y[j] == 0) {
            pairs += 1;
            wins += if s[i] > s[j] {
                2
            } else if s[i] == s[j] {
                1
            } else {
                0
            };
        }
    }
    wins as f64 / (2 * pairs) as f64
}

fn metric_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = rng_from_seed(22);
    let mut instances = 0;
    while instances < 500 {
        let n = rng.gen_range(2..=200);
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        if !y.contains(&0) || !y.contains(&1) {
            continue;
        }
        // Half the instances use a coarse score grid so that ties are common.
        let coarse = instances % 2 == 0;
        let s: Vec<f64> =
            (0..n).map(|_| if coarse { f64::from(rng.gen_range(0..6)) / 5.0 } else { rng.gen::<f64>() }).collect();
        let auc = roc_auc(&y, &s).map_err(|e| e.to_string())?;
        let expected = brute_force_auc(&y, &s);
        check((auc - expected).abs() <= 1e-12, || format!("instance {instances}: auc {auc} vs brute force {expected}"))?;

        let pred: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let cm = confusion(&y, &pred).map_err(|e| e.to_string())?;
        let count = |t: u8, p: u8| y.iter().zip(&pred).filter(|&(&a, &b)| a == t && b == p).count() as u64;
        let (tp, fp, fn_, tn) = (count(1, 1), count(0, 1), count(1, 0), count(0, 0));
        check((cm.tp, cm.fp, cm.fn_, cm.tn) == (tp, fp, fn_, tn), || format!("instance {instances}: confusion {cm:?}"))?;
        let m = metrics(&cm);
        let frac = |a: u64, b: u64| if b == 0 { None } else { Some(a as f64 / b as f64) };
        check(m.precision == frac(tp, tp + fp), || format!("instance {instances}: precision"))?;
        check(m.recall == frac(tp, tp + fn_), || format!("instance {instances}: recall"))?;
        check(m.fpr == frac(fp, fp + tn), || format!("instance {instances}: false positive rate"))?;
        check(m.accuracy == frac(tp + tn, n as u64), || format!("instance {instances}: accuracy"))?;
        instances += 1;
    }
    within(started.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{instances} instances, AUC within 1e-12 of pair counting"))
}

// ---------------------------------------------------------------- 3

fn labels_and_regimes() -> Outcome {
    // Every code in the file format, through the line parser and the join.
    let codes = ["", "01", "03", "06", "09"];
    let mut spec = SyntheticSpec::regime_preset(2006, 60, 3).map_err(|e| e.to_string())?;
    spec.default_rate = 0.002;
    let (orig, perf) = bench::synthesize(&spec).map_err(|e| e.to_string())?;
    // Overwrite the code column of every line with a cycling raw value.
    let code_column = PERFORMANCE_FIELDS.iter().position(|f| f.name == "zeroBalanceCode").ok_or("no code column")?;
    let mut raw_codes = Vec::new();
    let mut perf_text = String::new();
    for (i, p) in perf.iter().enumerate() {
        let mut fields: Vec<String> = p.to_line().split('|').map(String::from).collect();
        fields[code_column] = codes[i % codes.len()].to_string();
        raw_codes.push(codes[i % codes.len()]);
        perf_text.push_str(&fields.join("|"));
        perf_text.push('\n');
    }
    let orig_text: String = orig.iter().map(|o| o.to_line() + "\n").collect();
    let parsed = parse_vintage(orig_text.as_bytes(), perf_text.as_bytes()).map_err(|e| e.to_string())?;
    let (records, _) = join_and_label(parsed.origination, parsed.performance, 2006).map_err(|e| e.to_string())?;
    check(records.len() == perf.len(), || "rows lost in the join".into())?;
    for (r, code) in records.iter().zip(&raw_codes) {
        let expected = matches!(*code, "03" | "06" | "09");
        check(r.defaulted == expected, || format!("code `{code}` labelled {}", r.defaulted))?;
    }
    for raw in ["02", "1", "99", "X"] {
        check(ZeroBalanceCode::parse(raw).is_none(), || format!("unknown code `{raw}` accepted"))?;
    }

    let mut counts = BTreeMap::new();
    for year in FIRST_VINTAGE..=LAST_VINTAGE {
        let expected = match year {
            1999..=2004 => Regime::Medium,
            2005..=2010 => Regime::High,
            _ => Regime::Low,
        };
        let got = assign_regime(year).map_err(|e| e.to_string())?;
        check(got == expected, || format!("{year} mapped to {got}"))?;
        *counts.entry(got).or_insert(0) += 1;
    }
    check(assign_regime(1998).is_err() && assign_regime(2018).is_err(), || "out-of-range year accepted".into())?;
    Ok(format!("{} labelled rows, regimes {counts:?}", records.len()))
}

// ---------------------------------------------------------------- 4

/// `rows[c]` rows for customer `c`; customers flagged in `bad` default on their last row.
fn population(rows: &[usize], bad: &[bool]) -> Vec<LoanRecord> {
    let mut out = Vec::with_capacity(rows.iter().sum());
    for (c, (&n, &defaults)) in rows.iter().zip(bad).enumerate() {
        let orig = Arc::new(OriginationRecord { loan_sequence_number: format!("L{c}"), values: Vec::new() });
        for r in 0..n {
            let defaulted = defaults && r + 1 == n;
            out.push(LoanRecord {
                customer: c as u32,
                origination: Arc::clone(&orig),
                performance: PerformanceRecord {
                    loan_sequence_number: format!("L{c}"),
                    zero_balance_code: if defaulted {
                        ZeroBalanceCode::ReoDisposition
                    } else {
                        ZeroBalanceCode::NotApplicable
                    },
                    values: Vec::new(),
                },
                defaulted,
                vintage_year: 2003,
                regime: Regime::Medium,
            });
        }
    }
    out
}

fn sample_counts(sample: &[LoanRecord]) -> (usize, usize, usize, usize) {
    let mut customers: BTreeMap<u32, bool> = BTreeMap::new();
    for r in sample {
        *customers.entry(r.customer).or_default() |= r.defaulted;
    }
    let bad = customers.values().filter(|&&d| d).count();
    let bad_rows = sample.iter().filter(|r| r.defaulted).count();
    (customers.len(), bad, sample.len(), bad_rows)
}

fn stratification() -> Outcome {
    let mut rng = rng_from_seed(44);
    for seed in 0..100u64 {
        let customers = rng.gen_range(200..=3000);
        let share = rng.gen_range(0.002..0.2);
        let rows: Vec<usize> = (0..customers).map(|_| rng.gen_range(1..=6)).collect();
        let bad: Vec<bool> = (0..customers).map(|_| rng.gen_bool(share)).collect();
        let pop_bad = bad.iter().filter(|&&b| b).count();
        let n = rng.gen_range(20..customers);
        let records = population(&rows, &bad);
        let sample = stratified_sample(&records, n, seed).map_err(|e| e.to_string())?;
        let (got, got_bad, _, _) = sample_counts(&sample);
        let expected_bad = n as f64 * pop_bad as f64 / customers as f64;
        check(got == n, || format!("seed {seed}: {got} customers drawn, asked for {n}"))?;
        check((got_bad as f64 - expected_bad).abs() <= 1.0, || {
            format!("seed {seed}: {got_bad} defaulters drawn, population share implies {expected_bad:.2}")
        })?;
        check(((got - got_bad) as f64 - (n as f64 - expected_bad)).abs() <= 1.0, || {
            format!("seed {seed}: non-defaulter stratum off by more than one customer")
        })?;
    }

    // 50,000 customers down to 2,000, row-level and customer-level default rates.
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let customers = 50_000;
        let rows: Vec<usize> = (0..customers).map(|_| rng.gen_range(1..=4)).collect();
        let bad: Vec<bool> = (0..customers).map(|_| rng.gen_bool(0.02)).collect();
        let records = population(&rows, &bad);
        let (_, pop_bad, pop_rows, pop_bad_rows) = sample_counts(&records);
        let sample = stratified_sample(&records, 2000, seed).map_err(|e| e.to_string())?;
        let (got, got_bad, got_rows, got_bad_rows) = sample_counts(&sample);
        let customer_drift = 100.0 * (got_bad as f64 / got as f64 - pop_bad as f64 / customers as f64).abs();
        let row_drift = 100.0 * (got_bad_rows as f64 / got_rows as f64 - pop_bad_rows as f64 / pop_rows as f64).abs();
        worst = worst.max(customer_drift).max(row_drift);
    }
    check(worst <= 0.4, || format!("default-rate drift {worst:.3} percentage points"))?;
    Ok(format!("100 seeds within one customer per stratum; 50,000 -> 2,000 drift at most {worst:.3} pp"))
}

// ---------------------------------------------------------------- 5

fn noisy(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] + rng.gen_range(-0.4..0.4) > 0.2)).collect();
    Dataset::from_rows((0..d).map(|c| format!("x{c}")).collect(), &rows, labels).unwrap()
}

fn adaboost_reweighting() -> Result<usize, String> {
    let mut rounds = 0;
    for seed in 0..5 {
        let data = noisy(300, 4, seed);
        let (model, _) = fit_adaboost(&data, 25, 256, seed);
        let y: Vec<f64> = data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let h: Vec<Vec<f64>> = model
            .stumps()
            .iter()
            .map(|t| data.rows().map(|x| if t.predict(x) >= 0.5 { 1.0 } else { -1.0 }).collect())
            .collect();
        // Weights after round r are proportional to exp(-y * sum_{t<=r} alpha_t h_t).
        let mut margin = vec![0.0; data.n_rows()];
        for (r, alpha) in model.alphas().iter().enumerate() {
            for i in 0..margin.len() {
                margin[i] += alpha * y[i] * h[r][i];
            }
            let w: Vec<f64> = margin.iter().map(|m| (-m).exp()).collect();
            let wrong: f64 = (0..w.len()).filter(|&i| h[r][i] != y[i]).map(|i| w[i]).sum();
            let err = wrong / w.iter().sum::<f64>();
            check((err - 0.5).abs() <= 1e-9, || format!("seed {seed} round {r}: reweighted error {err}"))?;
            rounds += 1;
        }
    }
    Ok(rounds)
}

fn gb_monotone() -> Result<usize, String> {
    let data = noisy(250, 3, 9);
    let y: Vec<f64> = data.labels().iter().map(|&l| f64::from(l)).collect();
    let mut losses = Vec::new();
    for rounds in 0..=30 {
        let params = BoostingParams { n_rounds: rounds, learning_rate: 0.8, max_depth: 3, min_samples_leaf: 1, max_bins: 256 };
        let (model, _) = fit_gradient_boosting(&data, &params, 1);
        let mse = data.rows().zip(&y).map(|(x, t)| (t - model.raw(x)).powi(2)).sum::<f64>() / y.len() as f64;
        losses.push(mse);
    }
    for (r, w) in losses.windows(2).enumerate() {
        check(w[1] <= w[0] + 1e-12, || format!("loss rose at round {}: {} -> {}", r + 1, w[0], w[1]))?;
    }
    Ok(losses.len() - 1)
}

fn mlp_gradients() -> Result<(usize, f64), String> {
    let mut rng = rng_from_seed(55);
    let (mut checked, mut worst) = (0, 0.0f64);
    for net_seed in 0..10 {
        let d = rng.gen_range(2..=5);
        let mut sizes = vec![d];
        for _ in 0..rng.gen_range(1..=2) {
            sizes.push(rng.gen_range(2..=6));
        }
        sizes.push(1);
        let params: Vec<f64> = (0..Network::param_count(&sizes)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let net = Network::new(sizes, params);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<f64> = (0..8).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let l2 = 1e-3;
        let (_, grad) = net.loss_and_gradient(&xs, &ys, l2);
        let h = 1e-6;
        for j in 0..grad.len() {
            let (mut plus, mut minus) = (net.clone(), net.clone());
            plus.params_mut()[j] += h;
            minus.params_mut()[j] -= h;
            let numeric = (plus.loss(&xs, &ys, l2) - minus.loss(&xs, &ys, l2)) / (2.0 * h);
            let rel = (grad[j] - numeric).abs() / (grad[j].abs() + numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            check(rel <= 1e-5, || format!("network {net_seed} parameter {j}: {} vs {numeric}", grad[j]))?;
            checked += 1;
        }
    }
    Ok((checked, worst))
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> Vec<Vec<f64>> {
    let nearest = |centers: &[Vec<f64>], z: &[f64]| {
        let mut best = (0, f64::INFINITY);
        for (c, ctr) in centers.iter().enumerate() {
            let d = dist2(ctr, z).sqrt();
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    };
    for _ in 0..max_iter {
        let assign: Vec<usize> = points.iter().map(|z| nearest(&centers, z)).collect();
        let mut shift: f64 = 0.0;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let mean: Vec<f64> = (0..center.len())
                .map(|j| members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64)
                .collect();
            shift = shift.max(dist2(center, &mean).sqrt());
            *center = mean;
        }
        if shift < tol {
            break;
        }
    }
    centers
}

fn rough_equals_kmeans() -> Result<usize, String> {
    let mut compared = 0;
    for seed in 0..10u64 {
        let data = noisy(200, 3, 100 + seed);
        let k = 2 + (seed as usize % 4);
        let params = RoughParams { k, epsilon: Some(0.0), ..RoughParams::default() };
        let model = rough_kmeans_fit(&data, &params, seed).map_err(|e| e.to_string())?;
        let standardizer = Standardizer::fit(&data);
        let points: Vec<Vec<f64>> = data.rows().map(|x| standardizer.apply(x)).collect();
        let start = initial_centers(&points, k, seed).map_err(|e| e.to_string())?;
        let centers = lloyd(&points, start, params.max_iter, params.tol);
        for (x, z) in data.rows().zip(&points) {
            let oracle = (0..k).min_by(|&a, &b| dist2(&centers[a], z).total_cmp(&dist2(&centers[b], z))).unwrap();
            check(model.nearest(x) == oracle, || format!("seed {seed}: assignment differs from k-means"))?;
            compared += 1;
        }
    }
    Ok(compared)
}

fn svm_margin() -> Result<f64, String> {
    let mut worst = f64::INFINITY;
    for seed in 0..5u64 {
        let mut rng = rng_from_seed(300 + seed);
        let d = 3;
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (mut rows, mut labels) = (Vec::new(), Vec::new());
        while rows.len() < 120 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let m = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / norm;
            if m.abs() > 0.5 {
                labels.push(u8::from(m > 0.0));
                rows.push(x);
            }
        }
        let data = Dataset::from_rows((0..d).map(|c| format!("x{c}")).collect(), &rows, labels)
            .map_err(|e| e.to_string())?;
        let (svm, _) = fit_svm(&data, &SvmParams { c: 1e4, max_epochs: 200_000, tol: 1e-7 }, seed);
        for (x, &l) in data.rows().zip(data.labels()) {
            let y = if l == 1 { 1.0 } else { -1.0 };
            worst = worst.min(y * svm.decision(x));
        }
        check(worst >= 1.0 - 1e-6, || format!("seed {seed}: smallest functional margin {worst}"))?;
    }
    Ok(worst)
}

fn model_micro_suite() -> Outcome {
    let started = Instant::now();
    let rounds = adaboost_reweighting().map_err(|e| format!("AdaBoost: {e}"))?;
    let gb = gb_monotone().map_err(|e| format!("gradient boosting: {e}"))?;
    let (grads, worst_grad) = mlp_gradients().map_err(|e| format!("MLP: {e}"))?;
    let assignments = rough_equals_kmeans().map_err(|e| format!("rough k-means: {e}"))?;
    let margin = svm_margin().map_err(|e| format!("SVM: {e}"))?;
    within(started.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{rounds} AdaBoost rounds at 0.5, {gb} GB rounds non-increasing, {grads} gradients (worst {worst_grad:.1e}), \
         {assignments} rough assignments, SVM margin {margin:.6}"
    ))
}

// ---------------------------------------------------------------- 6

const REGIME_YEARS: [u16; 3] = [2003, 2007, 2013];

fn generate(dir: &Path, years: &[u16], customers: usize, seed: u64) -> Result<(), String> {
    for &year in years {
        let spec = SyntheticSpec::regime_preset(year, customers, seed).map_err(|e| e.to_string())?;
        generate_synthetic(&spec, dir).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn desk_config(data: &Path, out: &Path, years: &[u16], customers: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        data_dir: data.to_path_buf(),
        output_dir: out.to_path_buf(),
        vintages: years.to_vec(),
        customer_sample: customers,
        seed,
        preset: Preset::Desk,
        ..ExperimentConfig::default()
    }
}

fn mean_recall(summary: &RunSummary, variant: Variant) -> Option<f64> {
    let v: Vec<f64> = summary
        .reports
        .iter()
        .filter(|r| r.variant == variant && r.model.can_score())
        .filter_map(|r| r.recall)
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn resampling_raises_recall() -> Outcome {
    let started = Instant::now();
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 1..=10u64 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let data = tmp.path().join("data");
        generate(&data, &REGIME_YEARS, 2000, seed)?;
        let summary = bench::run(&desk_config(&data, &tmp.path().join("out"), &REGIME_YEARS, 2000, seed))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        let original = mean_recall(&summary, Variant::Original).ok_or("no defined recall")?;
        let resampled = mean_recall(&summary, Variant::Resampled).ok_or("no defined recall")?;
        if resampled > original {
            wins += 1;
        }
        lines.push(format!("{original:.3}->{resampled:.3}"));
    }
    check(wins >= 9, || format!("resampled recall higher in only {wins}/10 seeds ({})", lines.join(", ")))?;
    within(started.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "resampled recall higher in {wins}/10 seeds in {:.0}s ({})",
        started.elapsed().as_secs_f64(),
        lines.join(", ")
    ))
}

// ---------------------------------------------------------------- 7, 8, 9

struct TwinRuns {
    first: RunSummary,
    second: RunSummary,
    _dir: tempfile::TempDir,
}

fn twin_runs() -> Result<TwinRuns, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let years = [2003, 2007];
    generate(&data, &years, 800, 5)?;
    let run = |name: &str| {
        bench::run(&desk_config(&data, &dir.path().join(name), &years, 800, 5)).map_err(|e| format!("{name}: {e}"))
    };
    let first = run("first")?;
    let second = run("second")?;
    Ok(TwinRuns { first, second, _dir: dir })
}

fn holdout_integrity(runs: &TwinRuns) -> Outcome {
    let summary = &runs.first;
    check(!summary.reports.is_empty(), || "no reports".into())?;
    let mut cells = 0;
    for split in &summary.splits {
        for kind in ModelKind::ALL {
            let sums: Vec<&str> = summary
                .reports
                .iter()
                .filter(|r| r.vintage_year == split.year && r.model == kind)
                .map(|r| r.holdout_checksum.as_str())
                .collect();
            check(sums.len() == 2, || format!("{kind} {}: expected two variants, found {}", split.year, sums.len()))?;
            check(sums.iter().all(|s| *s == split.holdout_checksum), || {
                format!("{kind} {}: holdout checksums differ", split.year)
            })?;
            cells += 1;
        }
        check(split.resampled_rows > split.train_rows, || format!("{}: nothing was resampled", split.year))?;
    }

    let data = noisy(100, 3, 7).into_holdout();
    let refused = matches!(smote_detailed(&data, &ResampleConfig::default(), GapDraw::Uniform), Err(ResampleError::Holdout));
    check(refused, || "resampler accepted a holdout-flagged dataset".into())?;
    Ok(format!("{cells} cells share one holdout per vintage; holdout-flagged data refused"))
}

fn deterministic_outputs(runs: &TwinRuns) -> Outcome {
    let (a, b) = (&runs.first, &runs.second);
    let mut compared = Vec::new();
    let volatile: Vec<&str> = a.artifacts.iter().filter(|x| x.volatile).map(|x| x.path.as_str()).collect();
    for artifact in a.artifacts.iter().filter(|x| !x.volatile) {
        if !(artifact.path.ends_with(".csv") || artifact.path.ends_with(".md")) {
            continue;
        }
        let left = std::fs::read(a.output_dir.join(&artifact.path)).map_err(|e| e.to_string())?;
        let right = std::fs::read(b.output_dir.join(&artifact.path)).map_err(|e| format!("{}: {e}", artifact.path))?;
        check(left == right, || format!("{} differs between runs", artifact.path))?;
        compared.push(artifact.path.clone());
    }
    check(compared.iter().any(|p| p == "metrics.csv") && compared.iter().any(|p| p == "rankings.md"), || {
        "metrics.csv or rankings.md missing".into()
    })?;
    Ok(format!("{} files byte-identical; fit timings excluded ({})", compared.len(), volatile.join(", ")))
}

fn timing_report(runs: &TwinRuns) -> Outcome {
    let summary = &runs.first;
    let table = timing_table(&summary.reports);
    check(table.len() == ModelKind::ALL.len(), || format!("{} timing rows", table.len()))?;
    for kind in ModelKind::ALL {
        let row = table.iter().find(|r| r.model == kind).ok_or_else(|| format!("{kind} missing from timing"))?;
        check(row.mean_seconds.is_finite() && row.mean_seconds >= 0.0, || format!("{kind}: bad mean time"))?;
        check(row.fits == 2 * summary.splits.len(), || format!("{kind}: {} fits averaged", row.fits))?;
    }
    let md = std::fs::read_to_string(summary.output_dir.join("timing.md")).map_err(|e| e.to_string())?;
    check(md.contains("| Algorithm | Average Time (seconds) |"), || "timing.md header missing".into())?;
    for kind in ModelKind::ALL {
        let line = md.lines().find(|l| l.starts_with(&format!("| {kind} |"))).ok_or_else(|| format!("{kind} not in timing.md"))?;
        let value = line.trim_end_matches('|').rsplit('|').next().unwrap_or("").trim();
        check(value.parse::<f64>().is_ok(), || format!("{kind}: `{value}` is not a number"))?;
    }
    Ok(format!("average fit time recorded for all {} kinds", ModelKind::ALL.len()))
}

// ----------------------------------------------------------------

fn report(id: u32, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {id} {name}: PASS ({detail}) [{secs:.1}s]");
            true
        }
        Err(why) => {
            println!("criterion {id} {name}: FAIL ({why}) [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let mut passed = 0;
    let mut total = 0;
    let mut tally = |ok: bool| {
        total += 1;
        passed += usize::from(ok);
    };
    tally(report(1, "smote geometry", smote_geometry));
    tally(report(2, "metric oracle", metric_oracle));
    tally(report(3, "labels and regimes", labels_and_regimes));
    tally(report(4, "stratified sampling", stratification));
    tally(report(5, "model micro-suite", model_micro_suite));
    tally(report(6, "resampling raises recall", resampling_raises_recall));
    match twin_runs() {
        Ok(runs) => {
            tally(report(7, "holdout integrity", || holdout_integrity(&runs)));
            tally(report(8, "deterministic outputs", || deterministic_outputs(&runs)));
            tally(report(9, "timing report", || timing_report(&runs)));
        }
        Err(e) => {
            for (id, name) in [(7, "holdout integrity"), (8, "deterministic outputs"), (9, "timing report")] {
                println!("criterion {id} {name}: FAIL (runs failed: {e})");
                tally(false);
            }
        }
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
