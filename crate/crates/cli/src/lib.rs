//! Command implementations behind the `ldm` executable.

pub mod args;
pub mod bench;
pub mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use ldm_core::analysis::{self, format_summary, summarize};
use ldm_core::compiler::{self, compile, CompiledModel, PlanMode};
use ldm_core::corpus;
use ldm_core::data::DataTable;
use ldm_core::frontend::{parse_program, validate, ProgramAst, StmtKind};
use ldm_core::graph::{self, GraphError, StructureReport};
use ldm_core::sampler::{self, DrawSet, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use args::{parse_pairs, Cli, Command, SampleArgs, SimulateArgs};
use manifest::{Phases, RunManifest};

/// Runs one command and returns the process exit status.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Check { model } => Ok(cmd_check(&model)),
        Command::Graph { model, data, out } => {
            let (_, ast) = load_model(&model)?;
            let tables = load_tables(&ast, &data.data)?;
            let obs = obs_list(&ast, &tables, data.obs.as_deref());
            let dot = dot_text(&ast, &obs, &tables)?;
            match out {
                Some(p) => fs::write(&p, dot).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{dot}"),
            }
            Ok(0)
        }
        Command::Simulate(a) => cmd_simulate(&a).map(|_| 0),
        Command::Sample(a) => cmd_sample(&a),
        Command::Summary { draws, json } => {
            let json = json.unwrap_or_else(|| draws.with_file_name("summary.json"));
            print!("{}", cmd_summary(&draws, &json)?);
            Ok(0)
        }
        Command::Ic { run } => {
            let s = cmd_ic(&run)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            Ok(0)
        }
        Command::Bench(a) => {
            let rows = bench::run(&a)?;
            bench::write_csv(&rows, &a.out)?;
            eprintln!("wrote {} rows to {}", rows.len(), a.out.display());
            Ok(0)
        }
    }
}

pub fn load_model(path: &Path) -> anyhow::Result<(String, ProgramAst)> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ast = parse_program(&src).map_err(|e| anyhow::anyhow!("{}:{e}", path.display()))?;
    let diags = validate(&ast);
    if let Some(d) = diags.first() {
        bail!("{}:{d} ({} diagnostic(s); run `ldm check`)", path.display(), diags.len());
    }
    Ok((src, ast))
}

/// Reads data files. A column is an index column when its name is an index
/// of the model.
pub fn load_tables(ast: &ProgramAst, paths: &[PathBuf]) -> anyhow::Result<Vec<DataTable>> {
    let indices = graph::used_indices(ast);
    let names: Vec<&str> = indices.iter().map(String::as_str).collect();
    paths
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            let label = p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
            DataTable::from_csv_reader(label, f, &names).with_context(|| format!("reading {}", p.display()))
        })
        .collect()
}

pub fn obs_list(ast: &ProgramAst, tables: &[DataTable], given: Option<&[String]>) -> Vec<String> {
    match given {
        Some(v) => v.to_vec(),
        None => compiler::default_obs(ast, tables),
    }
}

/// Diagnostics of one model text, formatted `path:line:col: message`.
pub fn check_source(path: &str, src: &str) -> (Vec<String>, Option<StructureReport>) {
    let ast = match parse_program(src) {
        Ok(a) => a,
        Err(e) => return (vec![format!("{path}:{e}")], None),
    };
    let diags: Vec<String> = validate(&ast).iter().map(|d| format!("{path}:{d}")).collect();
    if !diags.is_empty() {
        return (diags, None);
    }
    match structure(&ast, &[]) {
        Ok(s) => (Vec::new(), Some(s)),
        // Ranges may come from data at compile time.
        Err(GraphError::MissingIndexRange(_)) => (Vec::new(), None),
        Err(e) => (vec![format!("{path}: {e}")], None),
    }
}

fn structure(ast: &ProgramAst, tables: &[DataTable]) -> Result<StructureReport, GraphError> {
    let idx = graph::resolve_indices(ast, tables)?;
    let g = graph::build_graph(ast, &idx)?;
    let topo = graph::topo_order(&g)?;
    graph::detect_structure(&g, &topo)
}

fn cmd_check(path: &Path) -> i32 {
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return 1;
        }
    };
    let (diags, report) = check_source(&path.display().to_string(), &src);
    for d in &diags {
        eprintln!("{d}");
    }
    if !diags.is_empty() {
        return 1;
    }
    println!("ok {}", path.display());
    if let Some(r) = report {
        if !r.parameters.is_empty() {
            println!("  parameters: {}", r.parameters.join(", "));
        }
        for g in &r.groups {
            let mut axes = g.replication.clone();
            axes.push(g.time_index.clone());
            println!("  {} over [{}]: {}", g.class, axes.join(","), g.members.join(", "));
        }
    }
    0
}

pub fn dot_text(ast: &ProgramAst, obs: &[String], tables: &[DataTable]) -> anyhow::Result<String> {
    let obs: Vec<&str> = obs.iter().map(String::as_str).collect();
    let (ast, tables) = compiler::lift(ast, &obs, tables)?;
    let idx = graph::resolve_indices(&ast, &tables)?;
    let g = graph::build_graph(&ast, &idx)?;
    let topo = graph::topo_order(&g)?;
    let s = graph::detect_structure(&g, &topo)?;
    Ok(graph::to_dot(&g, &s))
}

/// Simulated tables, after optional parameter fixing and masking.
pub fn simulate_tables(a: &SimulateArgs) -> anyhow::Result<Vec<DataTable>> {
    let (_, ast) = load_model(&a.model)?;
    let tables = load_tables(&ast, &a.data.data)?;
    let obs = obs_list(&ast, &tables, a.data.obs.as_deref());
    let fix = parse_pairs(&a.fix)?;
    let fix_ref: Vec<(&str, f64)> = fix.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let ast = corpus::fix_parameters(&ast, &fix_ref);
    let obs_ref: Vec<&str> = obs.iter().map(String::as_str).collect();
    let model = compile(&ast, &obs_ref, &tables, PlanMode::Unrolled)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut sims = compiler::prior_simulate(&model, &mut rng, a.draws)?;

    // Deterministic columns cannot be conditioned on; keep stochastic ones.
    let stochastic =
        |name: &str| ast.statements.iter().any(|s| s.lhs.name == name && matches!(s.kind, StmtKind::Sample(_)));
    let mut out = Vec::new();
    for t in sims.drain(..) {
        let cols: Vec<_> = t.columns().iter().filter(|c| stochastic(&c.name)).cloned().collect();
        if cols.is_empty() {
            continue;
        }
        let (names, rows) = if a.draws == 1 {
            (t.index_names()[1..].to_vec(), t.index_rows().iter().map(|r| r[1..].to_vec()).collect())
        } else {
            (t.index_names().to_vec(), t.index_rows().to_vec())
        };
        out.push(DataTable::new(t.label(), names, rows, cols)?);
    }
    for (col, rate) in parse_pairs(&a.missing)? {
        if !(0.0..=1.0).contains(&rate) {
            bail!("missing rate for {col} must be in [0, 1]");
        }
        let mut found = false;
        for t in out.iter_mut().filter(|t| t.has_column(&col)) {
            corpus::mask_mcar(t, &col, rate, &mut rng);
            found = true;
        }
        if !found {
            bail!("`{col}` is not a simulated column");
        }
    }
    Ok(out)
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<Vec<PathBuf>> {
    let t0 = Instant::now();
    let tables = simulate_tables(a)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut written = Vec::new();
    for t in &tables {
        let p = a.out.join(format!("{}.csv", t.label()));
        t.write_csv(BufWriter::new(File::create(&p)?))?;
        eprintln!("wrote {}", p.display());
        written.push(p);
    }
    let mut m = RunManifest::new("simulate", &a.model, &a.data.data, a.data.obs.clone().unwrap_or_default());
    m.seed = a.seed;
    m.settings.insert("draws".into(), a.draws.to_string());
    m.settings.insert("fix".into(), a.fix.join(","));
    m.settings.insert("missing".into(), a.missing.join(","));
    m.phases.insert("total".into(), t0.elapsed().as_secs_f64());
    m.outputs = written.clone();
    m.write(&a.out.join("manifest.json"))?;
    Ok(written)
}

/// Result of a fit: the compiled model, its draws and phase timings.
pub struct Fit {
    pub model: CompiledModel,
    pub draws: DrawSet,
    pub phases: Phases,
}

/// Compiles and samples.
pub fn fit(
    ast: &ProgramAst,
    obs: &[String],
    tables: &[DataTable],
    mode: PlanMode,
    config: &SamplerConfig,
) -> anyhow::Result<Fit> {
    let mut phases = Phases::new();
    let t = Instant::now();
    let obs: Vec<&str> = obs.iter().map(String::as_str).collect();
    let model = compile(ast, &obs, tables, mode)?;
    phases.insert("compile".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let draws = sampler::sample(&model.plan, config)?;
    phases.insert("sample".into(), t.elapsed().as_secs_f64());
    Ok(Fit { model, draws, phases })
}

fn cmd_sample(a: &SampleArgs) -> anyhow::Result<i32> {
    let (model_path, data, obs, config, mode) = match &a.replay {
        Some(p) => {
            let m = RunManifest::read(p)?;
            let config = m.config.context("manifest has no sampler configuration")?;
            (m.model, m.data, Some(m.obs), config, m.mode.unwrap_or(PlanMode::Fused))
        }
        None => (
            a.model.clone().expect("clap requires a model"),
            a.data.data.clone(),
            a.data.obs.clone(),
            a.sampler.config(),
            a.mode(),
        ),
    };
    if data.is_empty() {
        eprintln!("error: `sample` needs data files (--data); to draw from the prior use `ldm simulate`");
        return Ok(2);
    }
    let t = Instant::now();
    let (_, ast) = load_model(&model_path)?;
    let tables = load_tables(&ast, &data)?;
    let obs = obs_list(&ast, &tables, obs.as_deref());
    let load = t.elapsed().as_secs_f64();
    let mut fit = fit(&ast, &obs, &tables, mode, &config)?;
    fit.phases.insert("load".into(), load);

    let t = Instant::now();
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let draws_path = a.out.join("draws.csv");
    let stats_path = a.out.join("stats.csv");
    let mut w = BufWriter::new(File::create(&draws_path)?);
    fit.draws.write_csv(&mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&stats_path)?);
    fit.draws.write_stats_csv(&mut w)?;
    w.flush()?;
    fit.phases.insert("write".into(), t.elapsed().as_secs_f64());

    let mut m = RunManifest::new("sample", &model_path, &data, obs);
    m.seed = config.seed;
    m.config = Some(config);
    m.mode = Some(mode);
    m.phases = fit.phases.clone();
    m.outputs = vec![draws_path, stats_path];
    m.write(&a.out.join("manifest.json"))?;

    let rows = summarize(&fit.draws);
    let params: Vec<_> = rows.into_iter().zip(&fit.draws.imputed).filter(|(_, &imp)| !imp).map(|(r, _)| r).collect();
    print!("{}", format_summary(&params));
    eprintln!(
        "{} mode, {} chains x {} draws, {} imputed cells, {} divergent, mean accept {:.3}, {:.2} s sampling",
        mode,
        fit.draws.n_chains(),
        fit.draws.n_samples(),
        fit.model.plan.n_imputed(),
        fit.draws.n_divergent(),
        fit.draws.mean_accept(),
        fit.phases["sample"]
    );
    Ok(0)
}

/// Prints-ready summary table; also writes the rows as JSON.
pub fn cmd_summary(draws: &Path, json: &Path) -> anyhow::Result<String> {
    let d = DrawSet::read_csv(File::open(draws).with_context(|| format!("opening {}", draws.display()))?)?;
    let rows = summarize(&d);
    let doc = serde_json::json!({ "n_chains": d.n_chains(), "n_samples": d.n_samples(), "sites": rows });
    fs::write(json, serde_json::to_string_pretty(&doc)?)?;
    Ok(format_summary(&rows))
}

/// Scores the run in directory `run` against the data it was fitted to.
pub fn cmd_ic(run: &Path) -> anyhow::Result<analysis::ModelScore> {
    let m = RunManifest::read(&run.join("manifest.json"))?;
    let (_, ast) = load_model(&m.model)?;
    let tables = load_tables(&ast, &m.data)?;
    let obs: Vec<&str> = m.obs.iter().map(String::as_str).collect();
    let model = compile(&ast, &obs, &tables, m.mode.unwrap_or(PlanMode::Fused))?;
    let draws = DrawSet::read_csv(File::open(run.join("draws.csv"))?)?;
    let runtime = m.phases.get("sample").copied().unwrap_or(0.0);
    Ok(analysis::score(&model.plan, &draws, runtime)?)
}
