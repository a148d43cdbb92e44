//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ldm_cli::bench;
use ldm_core::analysis::{quantile, score, SummaryRow};
use ldm_core::autodiff::LogDensity;
use ldm_core::compiler::{compile, ExecutablePlan, PlanMode};
use ldm_core::corpus::{self, CorpusModel};
use ldm_core::data::{Column, DataTable};
use ldm_core::distributions::DistKind;
use ldm_core::frontend::{parse_program, render, validate, ProgramAst};
use ldm_core::graph::BlockClass;
use ldm_core::sampler::{sample, DrawSet, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn logp(plan: &ExecutablePlan, u: &[f64]) -> (f64, Vec<f64>) {
    let mut d = plan.density();
    let mut g = vec![0.0; u.len()];
    let v = d.logp_and_grad(u, &mut g).expect("finite density");
    (v, g)
}

fn fixture(cm: &CorpusModel, cap: Option<i64>, miss: f64, rng: &mut ChaCha8Rng) -> (ProgramAst, Vec<DataTable>) {
    let mut ast = cm.ast();
    if let Some(c) = cap {
        corpus::cap_ranges(&mut ast, c);
    }
    let tables = corpus::synthetic_tables(cm, &ast, cm.truth, miss, rng).expect("fixture");
    (ast, tables)
}

fn pooled(d: &DrawSet, name: &str) -> Vec<f64> {
    d.column(d.column_index(name).expect("column")).concat()
}

fn interval(d: &DrawSet, name: &str, level: f64) -> (f64, f64) {
    let mut xs = pooled(d, name);
    xs.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (quantile(&xs, a), quantile(&xs, 1.0 - a))
}

fn corpus_coverage() -> Outcome {
    let expected: &[(&str, &[(&str, BlockClass)])] = &[
        ("LinearRegression", &[("y", BlockClass::IidBlock)]),
        ("BinomialLogits", &[("a", BlockClass::IidBlock), ("S", BlockClass::IidBlock)]),
        ("MultiLevelA", &[("a", BlockClass::IidBlock), ("S", BlockClass::IidBlock)]),
        (
            "MultiLevelB",
            &[
                ("a", BlockClass::IidBlock),
                ("g", BlockClass::IidBlock),
                ("b", BlockClass::IidBlock),
                ("pulled_left", BlockClass::IidBlock),
            ],
        ),
        ("ZeroInflated", &[("y", BlockClass::IidBlock)]),
        ("AR2", &[("y", BlockClass::Recurrence)]),
        ("AR1", &[("y", BlockClass::Recurrence)]),
        (
            "DBN",
            &[
                ("EM", BlockClass::DbnBlock),
                ("IM", BlockClass::DbnBlock),
                ("P", BlockClass::DbnBlock),
                ("A", BlockClass::DbnBlock),
                ("C", BlockClass::DbnBlock),
            ],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for cm in corpus::example_corpus() {
        let ast = parse_program(cm.source).map_err(|e| format!("{}: {e}", cm.name))?;
        ensure(validate(&ast).is_empty(), format!("{}: diagnostics", cm.name))?;
        ensure(parse_program(&render(&ast)).ok().as_ref() == Some(&ast), format!("{}: render", cm.name))?;
        let (ast, tables) = fixture(cm, None, 0.1, &mut rng);
        let obs: Vec<String> = cm.obs.iter().map(|s| s.to_string()).collect();
        let dot = ldm_cli::dot_text(&ast, &obs, &tables).map_err(|e| format!("{}: {e}", cm.name))?;
        ensure(dot.starts_with("digraph"), format!("{}: graph", cm.name))?;
        let fused = compile(&ast, cm.obs, &tables, PlanMode::Fused).map_err(|e| format!("{}: {e}", cm.name))?;
        let unrolled = fused.relower(PlanMode::Unrolled).map_err(|e| format!("{}: {e}", cm.name))?;
        ensure(
            unrolled.block_counts().1 + unrolled.block_counts().2 == 0,
            format!("{}: unrolled has fused blocks", cm.name),
        )?;
        let (_, classes) =
            expected.iter().find(|(n, _)| *n == cm.name).ok_or(format!("{}: no expectation", cm.name))?;
        for (var, class) in classes.iter() {
            let got = fused.structure.group_of(var).map(|g| g.class);
            ensure(got == Some(*class), format!("{}: {var} is {got:?}, expected {class}", cm.name))?;
        }
    }
    // Block shapes of the lowering examples.
    let e2 = compile(&corpus::EXAMPLE2.ast(), &[], &[], PlanMode::Fused).map_err(|e| e.to_string())?;
    ensure(e2.plan.block_counts() == (0, 1, 0), "Example2 fused blocks")?;
    ensure(e2.relower(PlanMode::Unrolled).unwrap().block_counts() == (5, 0, 0), "Example2 unrolled blocks")?;
    let dbn = compile(&corpus::DBN.ast(), &[], &[], PlanMode::Fused).map_err(|e| e.to_string())?;
    ensure(dbn.plan.block_counts().2 == 1, "DBN scan")?;
    Ok("8 models: parse, validate, graph, compile in both modes; classes as expected".into())
}

fn plan_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut worst_v, mut worst_g) = (0.0f64, 0.0f64);
    for cm in corpus::all() {
        let (ast, tables) = fixture(cm, Some(12), 0.25, &mut rng);
        let f = compile(&ast, cm.obs, &tables, PlanMode::Fused).map_err(|e| format!("{}: {e}", cm.name))?;
        let u = f.relower(PlanMode::Unrolled).map_err(|e| e.to_string())?;
        ensure(f.plan.slot_names() == u.slot_names(), format!("{}: layouts differ", cm.name))?;
        for _ in 0..50 {
            let x: Vec<f64> = (0..u.latent_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (vf, gf) = logp(&f.plan, &x);
            let (vu, gu) = logp(&u, &x);
            worst_v = worst_v.max((vf - vu).abs());
            for (a, b) in gf.iter().zip(&gu) {
                worst_g = worst_g.max((a - b).abs());
            }
        }
    }
    ensure(worst_v < 1e-9 && worst_g < 1e-7, format!("max |dlogp| {worst_v:.2e}, max |dgrad| {worst_g:.2e}"))?;
    Ok(format!("{} models x 50 points: max |dlogp| {worst_v:.2e}, max |dgrad| {worst_g:.2e}", corpus::all().len()))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for cm in corpus::all() {
        let (ast, tables) = fixture(cm, Some(12), 0.2, &mut rng);
        let m = compile(&ast, cm.obs, &tables, PlanMode::Fused).map_err(|e| format!("{}: {e}", cm.name))?;
        for _ in 0..20 {
            let u: Vec<f64> = (0..m.plan.latent_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = logp(&m.plan, &u);
            let mut w = u.clone();
            for k in 0..u.len() {
                w[k] = u[k] + h;
                let hi = logp(&m.plan, &w).0;
                w[k] = u[k] - h;
                let lo = logp(&m.plan, &w).0;
                w[k] = u[k];
                let fd = (hi - lo) / (2.0 * h);
                worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
            }
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e}"))?;
    Ok(format!("max relative error {worst:.2e}"))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ldm")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("ldm {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_table(dir: &Path, name: &str, t: &DataTable) -> String {
    let p = dir.join(name);
    t.write_csv(fs::File::create(&p).unwrap()).unwrap();
    p.display().to_string()
}

fn conjugate_oracle() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let ys: Vec<f64> = (0..50).map(|_| 1.3 + rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    let model = dir.path().join("conj.ldm");
    fs::write(&model, "ProgramName: Conjugate\ntheta ~ N(0, 10)\ny ~ N(theta, 1)\n").unwrap();
    let t = DataTable::new("y", Vec::new(), vec![Vec::new(); 50], vec![Column::float("y", ys.clone())]).unwrap();
    let data = write_table(dir.path(), "y.csv", &t);
    let out = dir.path().join("run");
    run_cli(&["sample", model.to_str().unwrap(), "-d", &data, "-o", out.to_str().unwrap()])?;
    let d = DrawSet::read_csv(fs::File::open(out.join("draws.csv")).unwrap()).map_err(|e| e.to_string())?;

    let precision = 1.0 / 100.0 + 50.0;
    let mean = ys.iter().sum::<f64>() / precision;
    let sd = precision.sqrt().recip();
    let r = SummaryRow::from_chains("theta", &d.column(0));
    let sd_mcse = r.std / (2.0 * r.n_eff).sqrt();
    let msg = format!(
        "mean {:.4} vs {mean:.4} (mcse {:.4}), sd {:.4} vs {sd:.4} (mcse {:.4})",
        r.mean,
        r.mcse(),
        r.std,
        sd_mcse
    );
    ensure((r.mean - mean).abs() < 3.0 * r.mcse() && (r.std - sd).abs() < 3.0 * sd_mcse, msg.clone())?;
    Ok(msg)
}

fn ar1_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let cm = &corpus::AR1;
    let ast = cm.ast();
    let full = corpus::synthetic_tables(cm, &ast, cm.truth, 0.0, &mut rng).map_err(|e| e.to_string())?;
    let cfg = SamplerConfig { seed: 105, ..SamplerConfig::default() };
    let covers = |d: &DrawSet| -> Result<(), String> {
        for &(name, truth) in cm.truth {
            let (lo, hi) = interval(d, name, 0.95);
            ensure((lo..=hi).contains(&truth), format!("{name}: 95% interval [{lo:.3}, {hi:.3}] misses {truth}"))?;
        }
        Ok(())
    };
    let m = compile(&ast, &["y"], &full, PlanMode::Fused).map_err(|e| e.to_string())?;
    covers(&sample(&m.plan, &cfg).map_err(|e| e.to_string())?)?;

    let mut masked = full.clone();
    corpus::mask_mcar(&mut masked[0], "y", 0.2, &mut rng);
    let m = compile(&ast, &["y"], &masked, PlanMode::Fused).map_err(|e| e.to_string())?;
    let d = sample(&m.plan, &cfg).map_err(|e| e.to_string())?;
    covers(&d)?;
    let imps = ldm_core::analysis::extract_imputations(&d).map_err(|e| e.to_string())?;
    ensure(imps.len() == 60, format!("{} imputed cells", imps.len()))?;
    let observed: Vec<f64> = masked[0].column("y").unwrap().values.iter().copied().filter(|v| !v.is_nan()).collect();
    let marginal = observed.iter().sum::<f64>() / observed.len() as f64;
    let (mut se_post, mut se_base) = (0.0, 0.0);
    for imp in &imps {
        let truth = full[0].get("y", &imp.tuple).unwrap();
        se_post += (imp.mean() - truth).powi(2);
        se_base += (marginal - truth).powi(2);
    }
    let rmse = (se_post / imps.len() as f64).sqrt();
    let base = (se_base / imps.len() as f64).sqrt();
    let stationary = 0.5 / (1.0f64 - 0.81).sqrt();
    let msg =
        format!("coverage ok; imputation RMSE {rmse:.3}, marginal-mean RMSE {base:.3}, stationary sd {stationary:.3}");
    ensure(rmse < stationary && rmse < base, msg.clone())?;
    Ok(msg)
}

fn speedup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let cm = &corpus::AR1;
    let ast = cm.ast();
    let full = corpus::synthetic_tables(cm, &ast, cm.truth, 0.0, &mut rng).map_err(|e| e.to_string())?;
    let cfg = SamplerConfig { seed: 106, ..SamplerConfig::default() };
    let [f, u] = bench::time_pair(&ast, &full, &["y".to_string()], "t", 300, 0.2, &cfg).map_err(|e| e.to_string())?;
    let ratio = f.sample_seconds / u.sample_seconds;
    let msg = format!("fused {:.2} s, unrolled {:.2} s, ratio {ratio:.2}", f.sample_seconds, u.sample_seconds);
    ensure(ratio <= 0.5, msg.clone())?;
    Ok(msg)
}

fn case_study() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let truth = corpus::planning_truth(&mut rng);
    let dbn = corpus::DBN.ast();
    let mut tables = corpus::synthetic_tables(&corpus::DBN, &dbn, &truth, 0.0, &mut rng).map_err(|e| e.to_string())?;
    for &(col, rate) in corpus::PLANNING_MISSINGNESS {
        corpus::mask_mcar(&mut tables[0], col, rate, &mut rng);
    }
    let cfg = SamplerConfig { seed: 107, ..SamplerConfig::default() };
    let mut nll = BTreeMap::new();
    let mut worst_rhat = (0.0f64, String::new());
    for cm in [&corpus::PLANNING_AR1, &corpus::DBN, &corpus::DBN_SIMPLIFIED] {
        let t = Instant::now();
        let m = compile(&cm.ast(), cm.obs, &tables, PlanMode::Fused).map_err(|e| format!("{}: {e}", cm.name))?;
        let d = sample(&m.plan, &cfg).map_err(|e| format!("{}: {e}", cm.name))?;
        let s = score(&m.plan, &d, t.elapsed().as_secs_f64()).map_err(|e| e.to_string())?;
        for r in ldm_core::analysis::summarize(&d) {
            if r.r_hat.is_nan() || r.r_hat > worst_rhat.0 {
                worst_rhat = (r.r_hat, format!("{}:{}", cm.name, r.name));
            }
        }
        nll.insert(cm.name, s.nll);
    }
    let msg = format!(
        "nll AR1 {:.1}, DBN {:.1}, DBN-simplified {:.1}; max r_hat {:.3} ({})",
        nll["PlanningAR1"], nll["DBN"], nll["DBNSimplified"], worst_rhat.0, worst_rhat.1
    );
    ensure(nll["DBN"] < nll["PlanningAR1"] && worst_rhat.0 <= 1.05, msg.clone())?;
    Ok(msg)
}

fn distribution_tests() -> Outcome {
    let m = compile(&parse_program("ProgramName: N\nx ~ N(0, 1)\n").unwrap(), &[], &[], PlanMode::Fused)
        .map_err(|e| e.to_string())?;
    let d = sample(&m.plan, &SamplerConfig { n_samples: 4000, seed: 108, ..SamplerConfig::default() })
        .map_err(|e| e.to_string())?;
    let mut xs: Vec<f64> = pooled(&d, "x").into_iter().step_by(2).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let cdf = Normal::new(0.0, 1.0).unwrap();
    let ks = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let crit = 1.628 / n.sqrt();
    ensure(ks < crit, format!("KS {ks:.4} >= {crit:.4}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for (g, lam) in [(0.3, 2.5), (0.05, 0.4), (0.8, 9.0)] {
        let p = [g, lam];
        let total: f64 = (0..200).map(|k| DistKind::ZeroInflatedPoisson.log_prob(&p, k as f64).unwrap().exp()).sum();
        ensure((total - 1.0).abs() < 1e-9, format!("ZIP({g},{lam}) mass {total}"))?;
        let draws = 100_000;
        let v: Vec<f64> = (0..draws).map(|_| DistKind::ZeroInflatedPoisson.draw(&p, &mut rng).unwrap()).collect();
        let m = v.iter().sum::<f64>() / draws as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
        let (tm, tv) = ((1.0 - g) * lam, (1.0 - g) * lam * (1.0 + g * lam));
        ensure((m - tm).abs() < 4.0 * (var / draws as f64).sqrt(), format!("ZIP({g},{lam}) mean {m} vs {tm}"))?;
        ensure(
            (var - tv).abs() < 4.0 * ((m4 - var * var) / draws as f64).sqrt(),
            format!("ZIP({g},{lam}) variance {var} vs {tv}"),
        )?;
    }
    Ok(format!("KS {ks:.4} < {crit:.4} on {n} draws; ZIP mass and moments at 3 settings"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let cm = &corpus::AR1;
    let tables = corpus::synthetic_tables(cm, &cm.ast(), cm.truth, 0.2, &mut rng).map_err(|e| e.to_string())?;
    let model = dir.path().join("ar1.ldm");
    fs::write(&model, cm.source).unwrap();
    let data = write_table(dir.path(), "y.csv", &tables[0]);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_cli(&["sample", model.to_str().unwrap(), "-d", &data, "--seed", "7", "-o", out.to_str().unwrap()])?;
        files.push(fs::read(out.join("draws.csv")).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], "draws files differ")?;
    Ok(format!("two runs, {} identical bytes", files[0].len()))
}

type Criterion = (&'static str, fn() -> Outcome, f64);

fn main() {
    let criteria: [Criterion; 9] = [
        ("corpus coverage", corpus_coverage, 5.0),
        ("plan equivalence", plan_equivalence, f64::INFINITY),
        ("gradient correctness", gradient_check, f64::INFINITY),
        ("conjugate oracle", conjugate_oracle, 10.0),
        ("AR(1) recovery", ar1_recovery, 180.0),
        ("optimization speedup", speedup, f64::INFINITY),
        ("case-study pipeline", case_study, 600.0),
        ("sampler distribution tests", distribution_tests, f64::INFINITY),
        ("determinism", determinism, f64::INFINITY),
    ];
    let mut failed = 0;
    for (k, (name, f, limit)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let mut result = f();
        let secs = t.elapsed().as_secs_f64();
        if result.is_ok() && secs > *limit {
            result = Err(format!("took {secs:.1} s, limit {limit} s"));
        }
        match result {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1} s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1} s): {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
