//! Adaptive NUTS over the unconstrained latent vector of a plan.

mod adapt;
mod nuts;

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::LogDensity;
use crate::compiler::ExecutablePlan;

pub use adapt::{find_reasonable_step, DualAveraging, Welford, Windows};
pub use nuts::{leapfrog, nuts_draw, sample_momentum, DrawStats, Point, MAX_DELTA_H};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub n_warmup: usize,
    pub n_samples: usize,
    pub n_chains: usize,
    pub target_accept: f64,
    pub max_tree_depth: u32,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_warmup: 500, n_samples: 1000, n_chains: 4, target_accept: 0.8, max_tree_depth: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("model has no continuous latent variables")]
    EmptyLatent,
    #[error("discrete latent variables cannot be sampled: {0:?}")]
    DiscreteLatent(Vec<String>),
    #[error("chain {chain}: no finite starting point after {tries} tries")]
    InitFailed { chain: usize, tries: usize },
    #[error("every post-warmup transition diverged")]
    AllDivergent,
    #[error("invalid sampler configuration: {0}")]
    BadConfig(String),
}

/// Unconstrained draws and statistics of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RawChain {
    pub draws: Vec<Vec<f64>>,
    pub stats: Vec<DrawStats>,
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
}

const INIT_TRIES: usize = 100;

fn init_point<D: LogDensity + ?Sized, R: Rng + ?Sized>(target: &mut D, rng: &mut R) -> Option<Point> {
    let d = target.dim();
    for _ in 0..INIT_TRIES {
        let q: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pt = Point::new(target, q);
        if pt.logp.is_finite() && pt.grad.iter().all(|g| g.is_finite()) {
            return Some(pt);
        }
    }
    None
}

/// Runs one chain with warm-up adaptation. The generator is seeded from
/// `config.seed` with stream `chain`.
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &mut D,
    config: &SamplerConfig,
    chain: usize,
) -> Result<RawChain, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let d = target.dim();
    let mut z = init_point(target, &mut rng).ok_or(SampleError::InitFailed { chain, tries: INIT_TRIES })?;
    let mut inv_mass = vec![1.0; d];
    let mut eps = find_reasonable_step(target, &z, 1.0, &inv_mass, &mut rng);
    let mut da = DualAveraging::new(config.target_accept, eps);
    let mut windows = Windows::new(config.n_warmup);
    let mut est = Welford::new(d);

    let mut draws = Vec::with_capacity(config.n_samples);
    let mut stats = Vec::with_capacity(config.n_samples);
    for it in 0..config.n_warmup + config.n_samples {
        let (next, st) = nuts_draw(target, &z, eps, &inv_mass, config.max_tree_depth, &mut rng);
        z = next;
        if it < config.n_warmup {
            eps = da.update(st.accept_prob);
            if let Some(var) = windows.observe(&mut est, &z.q) {
                inv_mass = var;
                z = Point::new(target, z.q.clone());
                eps = find_reasonable_step(target, &z, eps, &inv_mass, &mut rng);
                da.restart(eps);
            }
            if it + 1 == config.n_warmup {
                eps = da.final_step();
            }
        } else {
            draws.push(z.q.clone());
            stats.push(st);
        }
    }
    Ok(RawChain { draws, stats, step_size: eps, inv_mass })
}

/// Runs `config.n_chains` chains in parallel, each on its own target built by
/// `make`. Results do not depend on thread scheduling.
pub fn run_chains<D, F>(make: F, config: &SamplerConfig) -> Result<Vec<RawChain>, SampleError>
where
    D: LogDensity,
    F: Fn() -> D + Sync,
{
    if config.n_chains == 0 {
        return Err(SampleError::BadConfig("n_chains must be positive".into()));
    }
    if !(config.target_accept > 0.0 && config.target_accept < 1.0) {
        return Err(SampleError::BadConfig("target_accept must lie in (0, 1)".into()));
    }
    let results: Vec<Result<RawChain, SampleError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|c| {
                let make = &make;
                s.spawn(move || {
                    let mut target = make();
                    run_chain(&mut target, config, c)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let chains = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let total: usize = chains.iter().map(|c| c.stats.len()).sum();
    if total > 0 && chains.iter().all(|c| c.stats.iter().all(|s| s.divergent)) {
        return Err(SampleError::AllDivergent);
    }
    Ok(chains)
}

/// Posterior draws on the constrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    pub names: Vec<String>,
    /// Whether each column is an imputed missing observation.
    pub imputed: Vec<bool>,
    /// `chains[c][s][k]`: chain c, draw s, column k.
    pub chains: Vec<Vec<Vec<f64>>>,
    pub stats: Vec<Vec<DrawStats>>,
    pub step_sizes: Vec<f64>,
}

impl DrawSet {
    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_samples(&self) -> usize {
        self.chains.first().map_or(0, |c| c.len())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain draws of column `k`.
    pub fn column(&self, k: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.iter().map(|d| d[k]).collect()).collect()
    }

    /// Mean over all chains and draws of every column.
    pub fn means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.names.len()];
        let mut n = 0usize;
        for c in &self.chains {
            for d in c {
                for (o, v) in out.iter_mut().zip(d) {
                    *o += v;
                }
                n += 1;
            }
        }
        out.iter().map(|s| s / n.max(1) as f64).collect()
    }

    pub fn n_divergent(&self) -> usize {
        self.stats.iter().flatten().filter(|s| s.divergent).count()
    }

    pub fn mean_accept(&self) -> f64 {
        let all: Vec<f64> = self.stats.iter().flatten().map(|s| s.accept_prob).collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }

    /// Writes `chain,draw,<names...>` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "chain,draw")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (s, d) in chain.iter().enumerate() {
                write!(w, "{c},{s}")?;
                for v in d {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    /// Reads the output of [`DrawSet::write_csv`]. Sampler statistics are not
    /// part of that file and come back empty; no column is marked imputed.
    pub fn read_csv<R: Read>(r: R) -> std::io::Result<DrawSet> {
        let bad = |m: String| std::io::Error::new(std::io::ErrorKind::InvalidData, m);
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers().map_err(std::io::Error::other)?.iter().map(String::from).collect();
        if header.len() < 2 || header[0] != "chain" || header[1] != "draw" {
            return Err(bad("draws file must start with chain,draw columns".into()));
        }
        let names = header[2..].to_vec();
        let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(std::io::Error::other)?;
            let num = |i: usize| -> std::io::Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| bad(format!("row {}: bad value in column {}", line + 2, header[i])))
            };
            let c = num(0)? as usize;
            if c > chains.len() {
                return Err(bad(format!("row {}: chain {c} out of order", line + 2)));
            }
            if c == chains.len() {
                chains.push(Vec::new());
            }
            chains[c].push((2..header.len()).map(num).collect::<Result<_, _>>()?);
        }
        if chains.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(bad("chains have different lengths".into()));
        }
        Ok(DrawSet { imputed: vec![false; names.len()], names, chains, stats: Vec::new(), step_sizes: Vec::new() })
    }

    /// Writes per-draw sampler statistics.
    pub fn write_stats_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "chain,draw,accept_prob,tree_depth,n_leapfrog,divergent,step_size,energy")?;
        for (c, chain) in self.stats.iter().enumerate() {
            for (s, st) in chain.iter().enumerate() {
                writeln!(
                    w,
                    "{c},{s},{},{},{},{},{},{}",
                    st.accept_prob, st.tree_depth, st.n_leapfrog, st.divergent as u8, st.step_size, st.energy
                )?;
            }
        }
        Ok(())
    }
}

/// Samples the latent vector of `plan`.
pub fn sample(plan: &ExecutablePlan, config: &SamplerConfig) -> Result<DrawSet, SampleError> {
    if !plan.discrete_latents.is_empty() {
        return Err(SampleError::DiscreteLatent(plan.discrete_latents.clone()));
    }
    if plan.latent_dim() == 0 {
        return Err(SampleError::EmptyLatent);
    }
    let raw = run_chains(|| plan.density(), config)?;
    Ok(DrawSet {
        names: plan.slot_names(),
        imputed: plan.slots.iter().map(|s| s.imputed).collect(),
        chains: raw.iter().map(|c| c.draws.iter().map(|u| plan.constrain(u)).collect()).collect(),
        stats: raw.iter().map(|c| c.stats.clone()).collect(),
        step_sizes: raw.iter().map(|c| c.step_size).collect(),
    })
}
