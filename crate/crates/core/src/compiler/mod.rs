//! Data binding and lowering of a model graph into an executable plan.

mod batch;
mod bind;
mod eval;
mod lift;
mod lower;
mod simulate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::data::DataTable;
use crate::frontend::{validate, Diagnostic, ProgramAst};
use crate::graph::{self, ConcreteGraph, GraphError, ModelGraph, StructureReport};

pub use bind::{bind, site_name, InputArray, InputArrays, SiteBinding, SiteStatus};
pub use eval::{DensityParts, PlanDensity};
pub use lift::{lift, ROW_INDEX};
pub use lower::{
    lower, Block, DetSite, ExecutablePlan, FusedSites, KOp, Kernel, LatentSlot, RExpr, ScalarSite, ScanBlock, Src,
};
pub use simulate::prior_simulate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PlanMode {
    #[serde(rename = "UNROLLED")]
    Unrolled,
    #[serde(rename = "FUSED")]
    Fused,
}

impl std::fmt::Display for PlanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PlanMode::Unrolled => "UNROLLED",
            PlanMode::Fused => "FUSED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("program has {} diagnostic(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("observed variable `{0}` is not a column of any data table")]
    MissingColumn(String),
    #[error("input `{0}` is not a column of any data table")]
    MissingInput(String),
    #[error("`{0}` is a column of more than one data table")]
    AmbiguousColumn(String),
    #[error("`{var}` is indexed by {expected:?} but its table is indexed by {found:?}")]
    IndexStructureMismatch { var: String, expected: Vec<String>, found: Vec<String> },
    #[error("missing value for discrete variable {var}{tuple:?}")]
    MissingDiscreteUnsupported { var: String, tuple: Vec<i64> },
    #[error("input {input}{tuple:?} is missing")]
    MissingInputValue { input: String, tuple: Vec<i64> },
    #[error("`{0}` is defined by an assignment and cannot be observed")]
    ObservedDeterministic(String),
    #[error("`{0}` is not a variable of the model")]
    UnknownObserved(String),
    #[error("unindexed variables {vars:?} are lifted to different index sets")]
    LiftConflict { vars: Vec<String> },
}

/// Everything produced on the way from model text to a plan.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    /// Program after lifting unindexed data columns to row indices.
    pub ast: ProgramAst,
    pub tables: Vec<DataTable>,
    pub obs: Vec<String>,
    pub graph: ModelGraph,
    pub topo: Vec<usize>,
    pub structure: StructureReport,
    pub concrete: ConcreteGraph,
    /// Ancestral order of `concrete.instances` positions.
    pub order: Vec<usize>,
    pub inputs: InputArrays,
    pub bindings: Vec<SiteBinding>,
    pub plan: ExecutablePlan,
}

impl CompiledModel {
    /// Counts of binding statuses.
    pub fn status_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for b in &self.bindings {
            *out.entry(b.status.label()).or_insert(0) += 1;
        }
        out
    }

    /// Lowers the same bound model in another mode.
    pub fn relower(&self, mode: PlanMode) -> Result<ExecutablePlan, CompileError> {
        lower(self, mode)
    }
}

/// Runs the whole pipeline: validation, lifting, index resolution, graph
/// construction, binding and lowering.
pub fn compile(
    ast: &ProgramAst,
    obs: &[&str],
    tables: &[DataTable],
    mode: PlanMode,
) -> Result<CompiledModel, CompileError> {
    let diags = validate(ast);
    if !diags.is_empty() {
        return Err(CompileError::Invalid(diags));
    }
    let (ast, tables) = lift(ast, obs, tables)?;
    let idx = graph::resolve_indices(&ast, &tables)?;
    let graph = graph::build_graph(&ast, &idx)?;
    let topo = graph::topo_order(&graph)?;
    let structure = graph::detect_structure(&graph, &topo)?;
    let inputs = InputArrays::from_tables(&ast, &tables)?;
    let concrete = graph::expand(&graph, &|name, at| inputs.lookup(name, at))?;
    let order = concrete.order(&graph, &topo)?;
    let bindings = bind(&graph, &concrete, &order, obs, &tables)?;
    let mut model = CompiledModel {
        ast,
        tables,
        obs: obs.iter().map(|s| s.to_string()).collect(),
        graph,
        topo,
        structure,
        concrete,
        order,
        inputs,
        bindings,
        plan: ExecutablePlan::empty(mode),
    };
    model.plan = lower(&model, mode)?;
    Ok(model)
}

/// Variables that appear as a column of some table, the default observation
/// list.
pub fn default_obs(ast: &ProgramAst, tables: &[DataTable]) -> Vec<String> {
    let mut out = Vec::new();
    for s in &ast.statements {
        let name = &s.lhs.name;
        if !out.contains(name) && tables.iter().any(|t| t.has_column(name)) {
            out.push(name.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::LogDensity;
    use crate::corpus;
    use crate::data::{Column, DataTable};
    use crate::frontend::parse_program;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logp(plan: &ExecutablePlan, u: &[f64]) -> (f64, Vec<f64>) {
        let mut d = plan.density();
        let mut g = vec![0.0; u.len()];
        let v = d.logp_and_grad(u, &mut g).unwrap();
        (v, g)
    }

    fn ar1_table(ys: &[f64]) -> DataTable {
        let rows = (0..ys.len() as i64).map(|t| vec![t]).collect();
        DataTable::new("d", vec!["t".into()], rows, vec![Column::float("y", ys.to_vec())]).unwrap()
    }

    #[test]
    fn standard_normal_at_mode() {
        let ast = parse_program("ProgramName: N\nx ~ N(0,1)\n").unwrap();
        let m = compile(&ast, &[], &[], PlanMode::Fused).unwrap();
        let (v, g) = logp(&m.plan, &[0.0]);
        assert!((v + 0.9189385332046727).abs() < 1e-12);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn scale_mixture_density_at_origin() {
        let expected = -1.0 - 4f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        for mode in [PlanMode::Unrolled, PlanMode::Fused] {
            let m = compile(&corpus::EXAMPLE1.ast(), &[], &[], mode).unwrap();
            assert_eq!(m.plan.slot_names(), ["s", "x"]);
            let (v, _) = logp(&m.plan, &[0.0, 0.0]);
            assert!((v - expected).abs() < 1e-12, "{v}");
        }
        assert!((expected + 3.3052).abs() < 1e-4);
    }

    #[test]
    fn replicated_statement_becomes_one_block() {
        let ast = corpus::EXAMPLE2.ast();
        let u = compile(&ast, &[], &[], PlanMode::Unrolled).unwrap();
        assert_eq!(u.plan.block_counts(), (5, 0, 0));
        let f = compile(&ast, &[], &[], PlanMode::Fused).unwrap();
        assert_eq!(f.plan.block_counts(), (0, 1, 0));
        let Block::Iid(b) = &f.plan.blocks[0] else { panic!("expected a fused block") };
        assert_eq!(b.rows, 5);
    }

    #[test]
    fn recurrence_becomes_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ast = corpus::AR1.ast();
        let tables = corpus::synthetic_tables(&corpus::AR1, &ast, corpus::AR1.truth, 0.2, &mut rng).unwrap();
        let m = compile(&ast, &["y"], &tables, PlanMode::Fused).unwrap();
        assert_eq!(m.plan.block_counts(), (4, 0, 1));
        let scan = m.plan.blocks.iter().find_map(|b| if let Block::Scan(s) = b { Some(s) } else { None }).unwrap();
        assert_eq!(scan.steps, 299);
        assert_eq!(scan.carry, vec![("y".to_string(), 1)]);
        assert_eq!(scan.imputed_slots.len(), m.plan.n_imputed());

        let counts = m.status_counts();
        assert_eq!(counts["OBSERVED"], 240);
        assert_eq!(counts["MISSING_IMPUTED"], 60);
        assert_eq!(counts["LATENT_PARAM"], 3);
        assert_eq!(m.plan.latent_dim(), 63);
        assert_eq!(&m.plan.slot_names()[..3], ["a", "b", "sigma"]);
    }

    #[test]
    fn dbn_scan_orders_members_within_slice() {
        let m = compile(&corpus::DBN.ast(), &[], &[], PlanMode::Fused).unwrap();
        let scans: Vec<&ScanBlock> =
            m.plan.blocks.iter().filter_map(|b| if let Block::Scan(s) = b { Some(s) } else { None }).collect();
        assert_eq!(scans.len(), 1);
        let s = scans[0];
        let labels: Vec<&str> = s.members.iter().map(|f| f.label.as_str()).collect();
        assert_eq!(labels, ["EM", "IM", "P", "A", "C"]);
        assert_eq!((s.steps, s.replicas), (37, 10));
        assert_eq!(s.replication, ["n"]);
    }

    #[test]
    fn fused_and_unrolled_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for cm in corpus::all() {
            let mut ast = cm.ast();
            corpus::cap_ranges(&mut ast, 8);
            let tables = corpus::synthetic_tables(cm, &ast, cm.truth, 0.25, &mut rng).unwrap();
            let f = compile(&ast, cm.obs, &tables, PlanMode::Fused).unwrap();
            let u = f.relower(PlanMode::Unrolled).unwrap();
            assert_eq!(f.plan.slot_names(), u.slot_names());
            for _ in 0..5 {
                let x: Vec<f64> = (0..u.latent_dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
                let (vf, gf) = logp(&f.plan, &x);
                let (vu, gu) = logp(&u, &x);
                assert!((vf - vu).abs() < 1e-9 * vu.abs().max(1.0), "{}: {vf} vs {vu}", cm.name);
                for (a, b) in gf.iter().zip(&gu) {
                    assert!((a - b).abs() < 1e-7 * b.abs().max(1.0), "{}: {a} vs {b}", cm.name);
                }
            }
        }
    }

    #[test]
    fn observing_a_cell_removes_its_slot() {
        let mut ys: Vec<f64> = (0..10).map(|t| (t as f64 * 0.7).sin()).collect();
        let held = ys[4];
        let ast = parse_program(&corpus::AR1.source.replace("t 0 299", "t 0 9")).unwrap();
        let full = compile(&ast, &["y"], &[ar1_table(&ys)], PlanMode::Fused).unwrap();
        ys[4] = f64::NAN;
        let gap = compile(&ast, &["y"], &[ar1_table(&ys)], PlanMode::Fused).unwrap();
        assert_eq!(gap.plan.latent_dim(), full.plan.latent_dim() + 1);
        assert_eq!(gap.plan.slot_names().last().unwrap(), "y[4]");
        let p = [0.3, -0.2, 0.1];
        let mut with_gap = p.to_vec();
        with_gap.push(held);
        let (a, _) = logp(&full.plan, &p);
        let (b, _) = logp(&gap.plan, &with_gap);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn binding_errors() {
        let ast = corpus::AR1.ast();
        let rows = (0..300).map(|t| vec![t]).collect();
        let t = DataTable::new("d", vec!["t".into()], rows, vec![Column::float("z", vec![1.0; 300])]).unwrap();
        assert!(
            matches!(compile(&ast, &["y"], &[t], PlanMode::Fused), Err(CompileError::MissingColumn(v)) if v == "y")
        );

        let ast = parse_program("ProgramName: P\nIndices: t 0 1\nl ~ Exp(1)\nk[t] ~ Poisson(l)\n").unwrap();
        let t = DataTable::new(
            "d",
            vec!["t".into()],
            vec![vec![0], vec![1]],
            vec![Column::integer("k", vec![2.0, f64::NAN])],
        )
        .unwrap();
        assert_eq!(
            compile(&ast, &["k"], &[t], PlanMode::Fused).unwrap_err(),
            CompileError::MissingDiscreteUnsupported { var: "k".into(), tuple: vec![1] }
        );
    }

    #[test]
    fn layout_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ast = corpus::DBN.ast();
        let tables = corpus::synthetic_tables(&corpus::DBN, &ast, corpus::DBN.truth, 0.1, &mut rng).unwrap();
        let a = compile(&ast, corpus::DBN.obs, &tables, PlanMode::Fused).unwrap();
        let b = compile(&ast, corpus::DBN.obs, &tables, PlanMode::Fused).unwrap();
        assert_eq!(a.plan, b.plan);
        let names = a.plan.slot_names();
        let imputed = &names[a.plan.n_params()..];
        let mut sorted =
            a.plan.slots[a.plan.n_params()..].iter().map(|s| (s.var.clone(), s.tuple.clone())).collect::<Vec<_>>();
        let orig = sorted.clone();
        sorted.sort();
        assert_eq!(orig, sorted);
        assert_eq!(imputed.len(), a.plan.n_imputed());
    }
}
