//! Python module `ldm`: compile models, evaluate densities, sample and
//! summarize.

use std::collections::BTreeMap;
use std::fs::File;

use ldm_core::analysis::{self, summarize};
use ldm_core::autodiff::LogDensity;
use ldm_core::compiler::{self, compile, CompiledModel, PlanMode};
use ldm_core::data::DataTable;
use ldm_core::frontend::{parse_program, validate, ProgramAst};
use ldm_core::graph;
use ldm_core::sampler::{self, DrawSet, SamplerConfig};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_valid(source: &str) -> PyResult<ProgramAst> {
    let ast = parse_program(source).map_err(err)?;
    if let Some(d) = validate(&ast).first() {
        return Err(err(d));
    }
    Ok(ast)
}

fn read_tables(ast: &ProgramAst, paths: &[String]) -> PyResult<Vec<DataTable>> {
    let indices = graph::used_indices(ast);
    let names: Vec<&str> = indices.iter().map(String::as_str).collect();
    paths
        .iter()
        .map(|p| {
            let f = File::open(p).map_err(|e| PyIOError::new_err(format!("{p}: {e}")))?;
            DataTable::from_csv_reader(p.as_str(), f, &names).map_err(err)
        })
        .collect()
}

/// Diagnostics of a model text as `line:col: message` strings.
#[pyfunction]
fn check(source: &str) -> Vec<String> {
    match parse_program(source) {
        Ok(ast) => validate(&ast).iter().map(|d| d.to_string()).collect(),
        Err(e) => vec![e.to_string()],
    }
}

/// A model compiled against data.
#[pyclass(module = "ldm")]
struct Model {
    inner: CompiledModel,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (source, data = Vec::new(), obs = None, optimize = true))]
    fn new(source: &str, data: Vec<String>, obs: Option<Vec<String>>, optimize: bool) -> PyResult<Model> {
        let ast = parse_valid(source)?;
        let tables = read_tables(&ast, &data)?;
        let obs = obs.unwrap_or_else(|| compiler::default_obs(&ast, &tables));
        let obs: Vec<&str> = obs.iter().map(String::as_str).collect();
        let mode = if optimize { PlanMode::Fused } else { PlanMode::Unrolled };
        Ok(Model { inner: compile(&ast, &obs, &tables, mode).map_err(err)? })
    }

    #[getter]
    fn latent_names(&self) -> Vec<String> {
        self.inner.plan.slot_names()
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.inner.plan.latent_dim()
    }

    /// `(scalar sites, iid blocks, scan blocks)`.
    #[getter]
    fn block_counts(&self) -> (usize, usize, usize) {
        self.inner.plan.block_counts()
    }

    /// Structure class of each fused group, keyed by member variable.
    fn structure(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for g in &self.inner.structure.groups {
            for m in &g.members {
                out.insert(m.clone(), g.class.to_string());
            }
        }
        out
    }

    /// Log density and gradient at an unconstrained point.
    fn log_density(&self, u: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
        if u.len() != self.latent_dim() {
            return Err(err(format!("expected {} values, got {}", self.latent_dim(), u.len())));
        }
        let mut g = vec![0.0; u.len()];
        let v = self.inner.plan.density().logp_and_grad(&u, &mut g).map_err(err)?;
        Ok((v, g))
    }

    #[pyo3(signature = (warmup = 500, samples = 1000, chains = 4, seed = 0, target_accept = 0.8, max_depth = 10))]
    #[allow(clippy::too_many_arguments)]
    fn sample(
        &self,
        py: Python<'_>,
        warmup: usize,
        samples: usize,
        chains: usize,
        seed: u64,
        target_accept: f64,
        max_depth: u32,
    ) -> PyResult<Draws> {
        let config = SamplerConfig {
            n_warmup: warmup,
            n_samples: samples,
            n_chains: chains,
            target_accept,
            max_tree_depth: max_depth,
            seed,
        };
        let plan = &self.inner.plan;
        let inner = py.detach(|| sampler::sample(plan, &config)).map_err(err)?;
        Ok(Draws { inner })
    }

    /// NLL, AIC and BIC at the posterior mean of `draws`.
    fn score(&self, draws: &Draws) -> PyResult<BTreeMap<String, f64>> {
        let s = analysis::score(&self.inner.plan, &draws.inner, 0.0).map_err(err)?;
        Ok(BTreeMap::from([
            ("nll".into(), s.nll),
            ("aic".into(), s.aic),
            ("bic".into(), s.bic),
            ("k".into(), s.k as f64),
            ("n".into(), s.n as f64),
        ]))
    }

    /// Joint draws of every variable, one CSV text per index structure.
    #[pyo3(signature = (draws = 1, seed = 0))]
    fn simulate(&self, draws: usize, seed: u64) -> PyResult<BTreeMap<String, String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = compiler::prior_simulate(&self.inner, &mut rng, draws).map_err(err)?;
        let mut out = BTreeMap::new();
        for t in tables {
            let mut buf = Vec::new();
            t.write_csv(&mut buf).map_err(err)?;
            out.insert(t.label().to_string(), String::from_utf8(buf).map_err(err)?);
        }
        Ok(out)
    }
}

/// Posterior draws on the constrained scale.
#[pyclass(module = "ldm")]
struct Draws {
    inner: DrawSet,
}

#[pymethods]
impl Draws {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names.clone()
    }

    #[getter]
    fn n_chains(&self) -> usize {
        self.inner.n_chains()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_divergent(&self) -> usize {
        self.inner.n_divergent()
    }

    /// Per-chain draws of one site.
    fn column(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        let k = self.inner.column_index(name).ok_or_else(|| err(format!("no site `{name}`")))?;
        Ok(self.inner.column(k))
    }

    /// `(site, stats)` pairs in layout order; stats hold mean, std, median,
    /// q05, q95, n_eff and r_hat.
    fn summary(&self) -> Vec<(String, BTreeMap<String, f64>)> {
        summarize(&self.inner)
            .into_iter()
            .map(|r| {
                let stats = [
                    ("mean", r.mean),
                    ("std", r.std),
                    ("median", r.median),
                    ("q05", r.q05),
                    ("q95", r.q95),
                    ("n_eff", r.n_eff),
                    ("r_hat", r.r_hat),
                ];
                (r.name, stats.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
            })
            .collect()
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let f = File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        self.inner.write_csv(std::io::BufWriter::new(f)).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

#[pymodule]
fn ldm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_class::<Model>()?;
    m.add_class::<Draws>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
