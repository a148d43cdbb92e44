use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use ldm_core::compiler::{compile, PlanMode};
use ldm_core::corpus;
use ldm_core::data::{ColumnKind, DataTable};
use ldm_core::frontend::ProgramAst;
use ldm_core::graph;
use ldm_core::sampler::{self, SamplerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::args::BenchArgs;
use crate::{load_model, load_tables, obs_list};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub t: i64,
    pub miss_rate: f64,
    pub mode: PlanMode,
    pub compile_seconds: f64,
    pub sample_seconds: f64,
    pub latent_dim: usize,
    pub n_imputed: usize,
    pub n_divergent: usize,
}

/// Keeps the rows whose `index` lies in `[lo, hi]`.
pub fn truncate(table: &DataTable, index: &str, lo: i64, hi: i64) -> anyhow::Result<DataTable> {
    let Some(k) = table.index_names().iter().position(|n| n == index) else { return Ok(table.clone()) };
    let keep: Vec<usize> = (0..table.n_rows()).filter(|&r| (lo..=hi).contains(&table.index_rows()[r][k])).collect();
    let rows = keep.iter().map(|&r| table.index_rows()[r].clone()).collect();
    let cols = table
        .columns()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.values = keep.iter().map(|&r| c.values[r]).collect();
            c
        })
        .collect();
    Ok(DataTable::new(table.label(), table.index_names().to_vec(), rows, cols)?)
}

/// Fits `ast` to the first `t` time points with `rate` of every continuous
/// observed column deleted, once per mode, under one config.
pub fn time_pair(
    ast: &ProgramAst,
    tables: &[DataTable],
    obs: &[String],
    index: &str,
    t: i64,
    rate: f64,
    config: &SamplerConfig,
) -> anyhow::Result<[BenchRow; 2]> {
    let (lo, hi) = graph::resolve_indices(ast, tables)?.get(index).with_context(|| format!("no index `{index}`"))?;
    if t < 1 || lo + t - 1 > hi {
        bail!("series length {t} exceeds the data range {lo}..={hi}");
    }
    let mut ast = ast.clone();
    corpus::set_range(&mut ast, index, lo, lo + t - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((t as u64) << 32) ^ (rate * 1e6) as u64);
    let mut cut = Vec::with_capacity(tables.len());
    for tab in tables {
        let mut tab = truncate(tab, index, lo, lo + t - 1)?;
        for name in obs {
            if tab.column(name).is_some_and(|c| c.kind == ColumnKind::Float) {
                corpus::mask_mcar(&mut tab, name, rate, &mut rng);
            }
        }
        cut.push(tab);
    }
    let obs_ref: Vec<&str> = obs.iter().map(String::as_str).collect();
    let timed = |mode: PlanMode| -> anyhow::Result<BenchRow> {
        let c = Instant::now();
        let model = compile(&ast, &obs_ref, &cut, mode)?;
        let compile_seconds = c.elapsed().as_secs_f64();
        let s = Instant::now();
        let draws = sampler::sample(&model.plan, config)?;
        Ok(BenchRow {
            t,
            miss_rate: rate,
            mode,
            compile_seconds,
            sample_seconds: s.elapsed().as_secs_f64(),
            latent_dim: model.plan.latent_dim(),
            n_imputed: model.plan.n_imputed(),
            n_divergent: draws.n_divergent(),
        })
    };
    Ok([timed(PlanMode::Fused)?, timed(PlanMode::Unrolled)?])
}

pub fn run(a: &BenchArgs) -> anyhow::Result<Vec<BenchRow>> {
    let (_, ast) = load_model(&a.model)?;
    let tables = load_tables(&ast, &a.data)?;
    let obs = obs_list(&ast, &tables, a.obs.as_deref());
    let index = match &a.index {
        Some(i) => i.clone(),
        None => {
            let obs_ref: Vec<&str> = obs.iter().map(String::as_str).collect();
            let m = compile(&ast, &obs_ref, &tables, PlanMode::Fused)?;
            m.structure.groups.first().map(|g| g.time_index.clone()).context("model has no time index")?
        }
    };
    let config = a.sampler.config();
    let mut rows = Vec::new();
    for &t in &a.sizes {
        for &pct in &a.rates {
            let pair = time_pair(&ast, &tables, &obs, &index, t, pct / 100.0, &config)?;
            eprintln!(
                "T={t} rate={pct}%: fused {:.2} s, unrolled {:.2} s",
                pair[0].sample_seconds, pair[1].sample_seconds
            );
            rows.extend(pair);
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], path: &Path) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "T,miss_rate,mode,compile_seconds,sample_seconds,latent_dim,n_imputed,n_divergent")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{},{},{}",
            r.t, r.miss_rate, r.mode, r.compile_seconds, r.sample_seconds, r.latent_dim, r.n_imputed, r.n_divergent
        )?;
    }
    w.flush()?;
    Ok(())
}
