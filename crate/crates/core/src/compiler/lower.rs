//! Lowering of a bound model into an executable plan.
//!
//! Every variable instance has a slot in an environment of values. Observed
//! instances hold constants and latent instances hold transformed entries of
//! the unconstrained vector, so each site's density can be evaluated as soon
//! as its parameters are known. UNROLLED plans evaluate one scalar site per
//! instance. FUSED plans evaluate replicated statements through a shared
//! kernel over gathered operands.

use std::collections::{BTreeSet, HashMap};

use super::bind::site_name;
use super::{CompileError, CompiledModel, PlanMode, SiteStatus};
use crate::distributions::{self, DistKind, Transform};
use crate::frontend::{BinOp, Expr, Func, StmtKind};
use crate::graph::{self, BlockClass, GraphNode, NodeKind};

/// Expression with every reference resolved to an instance or a constant.
#[derive(Debug, Clone, PartialEq)]
pub enum RExpr {
    Const(f64),
    Inst(u32),
    Neg(Box<RExpr>),
    Bin(BinOp, Box<RExpr>, Box<RExpr>),
    Call(Func, Vec<RExpr>),
}

impl RExpr {
    pub fn eval(&self, vals: &[f64]) -> f64 {
        match self {
            RExpr::Const(c) => *c,
            RExpr::Inst(i) => vals[*i as usize],
            RExpr::Neg(a) => -a.eval(vals),
            RExpr::Bin(op, a, b) => bin_f64(*op, a.eval(vals), b.eval(vals)),
            RExpr::Call(f, args) => {
                let a = args[0].eval(vals);
                let b = args.get(1).map_or(0.0, |b| b.eval(vals));
                crate::autodiff::func_eval(*f, a, b).0
            }
        }
    }
}

pub(crate) fn bin_f64(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSlot {
    pub name: String,
    pub var: String,
    pub tuple: Vec<i64>,
    pub instance: u32,
    pub transform: Transform,
    pub imputed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSite {
    pub name: String,
    pub instance: u32,
    pub dist: DistKind,
    pub params: Vec<RExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetSite {
    pub name: String,
    pub instance: u32,
    pub expr: RExpr,
}

/// Where a kernel operand comes from in one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Src {
    Inst(u32),
    Const(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KOp {
    Load(u32),
    Const(f64),
    Neg(u32),
    Bin(BinOp, u32, u32),
    Call1(Func, u32),
    Call2(Func, u32, u32),
}

/// Straight-line code computing a distribution's parameters from operands.
/// Operand 0 of every row is the site's own value.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub ops: Vec<KOp>,
    pub params: Vec<u32>,
    pub n_operands: usize,
    pub dist: DistKind,
}

/// Rows of one statement sharing a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSites {
    pub label: String,
    pub kernel: Kernel,
    pub rows: usize,
    /// `rows * kernel.n_operands` operand sources, row-major.
    pub srcs: Vec<Src>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanBlock {
    pub time_index: String,
    pub replication: Vec<String>,
    pub steps: usize,
    pub replicas: usize,
    /// Lag window carried per member variable.
    pub carry: Vec<(String, i64)>,
    /// Per-step sites in within-slice order.
    pub members: Vec<FusedSites>,
    /// Latent slots substituted at missing positions inside the scan.
    pub imputed_slots: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Scalar(ScalarSite),
    Det(DetSite),
    Iid(FusedSites),
    Scan(ScanBlock),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutablePlan {
    pub mode: PlanMode,
    /// Parameters in ancestral order, then imputation slots by (variable, tuple).
    pub slots: Vec<LatentSlot>,
    /// Constant instance values.
    pub observed: Vec<(u32, f64)>,
    pub observed_mask: Vec<bool>,
    pub blocks: Vec<Block>,
    pub n_instances: usize,
    /// Latent instances with discrete support; such plans can only be simulated.
    pub discrete_latents: Vec<String>,
}

impl ExecutablePlan {
    pub(crate) fn empty(mode: PlanMode) -> ExecutablePlan {
        ExecutablePlan {
            mode,
            slots: Vec::new(),
            observed: Vec::new(),
            observed_mask: Vec::new(),
            blocks: Vec::new(),
            n_instances: 0,
            discrete_latents: Vec::new(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.name.clone()).collect()
    }

    pub fn n_imputed(&self) -> usize {
        self.slots.iter().filter(|s| s.imputed).count()
    }

    pub fn n_params(&self) -> usize {
        self.slots.len() - self.n_imputed()
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    /// Number of ScalarSite, IID and scan blocks.
    pub fn block_counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for b in &self.blocks {
            match b {
                Block::Scalar(_) => c.0 += 1,
                Block::Iid(_) => c.1 += 1,
                Block::Scan(_) => c.2 += 1,
                Block::Det(_) => {}
            }
        }
        c
    }

    pub fn constrain(&self, u: &[f64]) -> Vec<f64> {
        self.slots.iter().zip(u).map(|(s, &u)| s.transform.forward(u)).collect()
    }

    pub fn unconstrain(&self, x: &[f64]) -> Vec<f64> {
        self.slots.iter().zip(x).map(|(s, &x)| s.transform.inverse(x)).collect()
    }
}

struct Builder<'a> {
    model: &'a CompiledModel,
    inline: bool,
    /// Set when a deterministic reference could not be inlined.
    needs_det: bool,
}

const MAX_INLINE_DEPTH: usize = 8;

impl Builder<'_> {
    fn expr(&mut self, node: &GraphNode, tuple: &[i64], e: &Expr, depth: usize) -> Result<RExpr, CompileError> {
        Ok(match e {
            Expr::Const(c) => RExpr::Const(*c),
            Expr::Neg(a) => RExpr::Neg(Box::new(self.expr(node, tuple, a, depth)?)),
            Expr::Binary { op, lhs, rhs } => RExpr::Bin(
                *op,
                Box::new(self.expr(node, tuple, lhs, depth)?),
                Box::new(self.expr(node, tuple, rhs, depth)?),
            ),
            Expr::Call { func, args, .. } => RExpr::Call(
                Func::from_name(func).expect("validated function"),
                args.iter().map(|a| self.expr(node, tuple, a, depth)).collect::<Result<_, _>>()?,
            ),
            Expr::Ref(r) => {
                let model = self.model;
                let b = graph::bindings(node, tuple);
                let at = graph::resolve_terms(&b, &r.index, &|n, i| model.inputs.lookup(n, i))?;
                if model.graph.is_input(&r.name) {
                    return match model.inputs.value(&r.name, &at) {
                        Some(v) if !v.is_nan() => Ok(RExpr::Const(v)),
                        _ => Err(CompileError::MissingInputValue { input: r.name.clone(), tuple: at }),
                    };
                }
                let info = &model.graph.vars[&r.name];
                let undefined = || graph::GraphError::UndefinedReference { var: r.name.clone(), tuple: at.clone() };
                let gov = info.governor_of(&at).ok_or_else(undefined)?;
                let id = info.global_id(&at).expect("governed instance has an id") as u32;
                let target = &model.graph.nodes[gov];
                match (&target.stmt.kind, self.inline && depth < MAX_INLINE_DEPTH) {
                    (StmtKind::Assign(body), true) => self.expr(target, &at, body, depth + 1)?,
                    (StmtKind::Assign(_), false) => {
                        self.needs_det = true;
                        RExpr::Inst(id)
                    }
                    _ => RExpr::Inst(id),
                }
            }
        })
    }

    fn site_params(&mut self, node: &GraphNode, tuple: &[i64]) -> Result<(DistKind, Vec<RExpr>), CompileError> {
        let StmtKind::Sample(d) = &node.stmt.kind else { unreachable!("stochastic node") };
        let kind = distributions::lookup(&d.name).expect("validated distribution").kind;
        let params = d.params.iter().map(|p| self.expr(node, tuple, p, 0)).collect::<Result<_, _>>()?;
        Ok((kind, params))
    }

    fn scalar_site(&mut self, node: &GraphNode, tuple: &[i64]) -> Result<ScalarSite, CompileError> {
        let (dist, params) = self.site_params(node, tuple)?;
        let info = &self.model.graph.vars[&node.var];
        Ok(ScalarSite {
            name: site_name(&node.var, tuple),
            instance: info.global_id(tuple).expect("governed") as u32,
            dist,
            params,
        })
    }

    fn det_site(&mut self, node: &GraphNode, tuple: &[i64]) -> Result<DetSite, CompileError> {
        let StmtKind::Assign(e) = &node.stmt.kind else { unreachable!("deterministic node") };
        let expr = self.expr(node, tuple, e, 0)?;
        let info = &self.model.graph.vars[&node.var];
        Ok(DetSite {
            name: site_name(&node.var, tuple),
            instance: info.global_id(tuple).expect("governed") as u32,
            expr,
        })
    }

    /// Kernels for every instance of a node, one per distinct expression shape.
    fn fused(&mut self, node: &GraphNode, tuples: &[Vec<i64>]) -> Result<Vec<FusedSites>, CompileError> {
        let info = &self.model.graph.vars[&node.var];
        let mut order: Vec<Vec<Tok>> = Vec::new();
        let mut groups: HashMap<Vec<Tok>, (DistKind, Vec<Vec<Src>>)> = HashMap::new();
        for tuple in tuples {
            let (dist, params) = self.site_params(node, tuple)?;
            let mut toks = Vec::new();
            let mut leaves = vec![Src::Inst(info.global_id(tuple).expect("governed") as u32)];
            for p in &params {
                flatten(p, &mut toks, &mut leaves);
                toks.push(Tok::End);
            }
            let entry = groups.entry(toks.clone()).or_insert_with(|| {
                order.push(toks);
                (dist, Vec::new())
            });
            entry.1.push(leaves);
        }
        Ok(order
            .into_iter()
            .map(|toks| {
                let (dist, rows) = groups.remove(&toks).unwrap();
                build_kernel(node.var.clone(), dist, &toks, rows)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Tok {
    Leaf,
    Neg,
    Bin(BinOp),
    Call(Func, u8),
    End,
}

fn flatten(e: &RExpr, toks: &mut Vec<Tok>, leaves: &mut Vec<Src>) {
    match e {
        RExpr::Const(c) => {
            toks.push(Tok::Leaf);
            leaves.push(Src::Const(*c));
        }
        RExpr::Inst(i) => {
            toks.push(Tok::Leaf);
            leaves.push(Src::Inst(*i));
        }
        RExpr::Neg(a) => {
            flatten(a, toks, leaves);
            toks.push(Tok::Neg);
        }
        RExpr::Bin(op, a, b) => {
            flatten(a, toks, leaves);
            flatten(b, toks, leaves);
            toks.push(Tok::Bin(*op));
        }
        RExpr::Call(f, args) => {
            for a in args {
                flatten(a, toks, leaves);
            }
            toks.push(Tok::Call(*f, args.len() as u8));
        }
    }
}

fn build_kernel(label: String, dist: DistKind, toks: &[Tok], rows: Vec<Vec<Src>>) -> FusedSites {
    let n_leaves = rows[0].len();
    // Leaves equal to the same constant in every row become kernel constants.
    let hoisted: Vec<Option<f64>> = (0..n_leaves)
        .map(|k| match rows[0][k] {
            Src::Const(c) if k > 0 && rows.iter().all(|r| r[k] == Src::Const(c)) => Some(c),
            _ => None,
        })
        .collect();
    let mut operand_of = vec![0u32; n_leaves];
    let mut n_operands = 0u32;
    for k in 0..n_leaves {
        if hoisted[k].is_none() {
            operand_of[k] = n_operands;
            n_operands += 1;
        }
    }
    let mut ops = Vec::new();
    let mut params = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    let mut leaf = 1usize;
    let push = |ops: &mut Vec<KOp>, op: KOp, stack: &mut Vec<u32>| {
        ops.push(op);
        stack.push(ops.len() as u32 - 1);
    };
    for tok in toks {
        match *tok {
            Tok::Leaf => {
                let op = match hoisted[leaf] {
                    Some(c) => KOp::Const(c),
                    None => KOp::Load(operand_of[leaf]),
                };
                leaf += 1;
                push(&mut ops, op, &mut stack);
            }
            Tok::Neg => {
                let a = stack.pop().unwrap();
                push(&mut ops, KOp::Neg(a), &mut stack);
            }
            Tok::Bin(op) => {
                let b = stack.pop().unwrap();
                let a = stack.pop().unwrap();
                push(&mut ops, KOp::Bin(op, a, b), &mut stack);
            }
            Tok::Call(f, 1) => {
                let a = stack.pop().unwrap();
                push(&mut ops, KOp::Call1(f, a), &mut stack);
            }
            Tok::Call(f, _) => {
                let b = stack.pop().unwrap();
                let a = stack.pop().unwrap();
                push(&mut ops, KOp::Call2(f, a, b), &mut stack);
            }
            Tok::End => params.push(stack.pop().unwrap()),
        }
    }
    let srcs: Vec<Src> = rows
        .iter()
        .flat_map(|r| r.iter().enumerate().filter(|(k, _)| hoisted[*k].is_none()).map(|(_, s)| *s))
        .collect();
    FusedSites { label, kernel: Kernel { ops, params, n_operands: n_operands as usize, dist }, rows: rows.len(), srcs }
}

/// Lowers a bound model. Layout, observed values and statuses come from the
/// model's bindings; `mode` selects the block structure.
pub fn lower(model: &CompiledModel, mode: PlanMode) -> Result<ExecutablePlan, CompileError> {
    let graph = &model.graph;
    let mut plan = ExecutablePlan::empty(mode);
    plan.n_instances = graph.n_instances;
    plan.observed_mask = vec![false; graph.n_instances];

    let transform_of = |node: usize| -> Option<Transform> {
        let StmtKind::Sample(d) = &graph.nodes[node].stmt.kind else { return None };
        let spec = distributions::lookup(&d.name)?;
        distributions::transform_for(spec.support).ok()
    };
    let mut imputed = Vec::new();
    for b in &model.bindings {
        let slot = |imputed: bool, t: Transform| LatentSlot {
            name: b.name(),
            var: b.var.clone(),
            tuple: b.tuple.clone(),
            instance: b.instance as u32,
            transform: t,
            imputed,
        };
        match b.status {
            SiteStatus::Observed(v) => {
                plan.observed.push((b.instance as u32, v));
                plan.observed_mask[b.instance] = true;
            }
            SiteStatus::LatentParam => match transform_of(b.node) {
                Some(t) => plan.slots.push(slot(false, t)),
                None => plan.discrete_latents.push(b.name()),
            },
            SiteStatus::MissingImputed => {
                imputed.push(slot(true, transform_of(b.node).expect("imputed sites are continuous")))
            }
            SiteStatus::Deterministic => {}
        }
    }
    imputed.sort_by(|a, b| (&a.var, &a.tuple).cmp(&(&b.var, &b.tuple)));
    plan.slots.extend(imputed);

    let mut builder = Builder { model, inline: mode == PlanMode::Fused, needs_det: false };
    match mode {
        PlanMode::Unrolled => {
            for b in &model.bindings {
                let node = &graph.nodes[b.node];
                plan.blocks.push(match node.kind {
                    NodeKind::Deterministic => Block::Det(builder.det_site(node, &b.tuple)?),
                    NodeKind::Stochastic => Block::Scalar(builder.scalar_site(node, &b.tuple)?),
                });
            }
        }
        PlanMode::Fused => {
            let structure = &model.structure;
            let mut scan_at: HashMap<usize, usize> = HashMap::new();
            for &n in &model.topo {
                let node = &graph.nodes[n];
                if node.kind == NodeKind::Deterministic {
                    continue;
                }
                let tuples = node.instances();
                let group = structure.groups.iter().position(|g| g.transitions.contains(&n) || g.boundary.contains(&n));
                let class = group.map(|g| structure.groups[g].class);
                let has_var = node.bound_names().iter().any(Option::is_some);
                let scalar = !node.is_indexed() || !has_var || class.is_none() || class == Some(BlockClass::General);
                if scalar {
                    for t in &tuples {
                        plan.blocks.push(Block::Scalar(builder.scalar_site(node, t)?));
                    }
                    continue;
                }
                let g = group.unwrap();
                let report = &structure.groups[g];
                let in_scan = matches!(report.class, BlockClass::Recurrence | BlockClass::DbnBlock)
                    && report.transitions.contains(&n);
                let sites = builder.fused(node, &tuples)?;
                if !in_scan {
                    plan.blocks.extend(sites.into_iter().map(Block::Iid));
                    continue;
                }
                let at = *scan_at.entry(g).or_insert_with(|| {
                    plan.blocks.push(Block::Scan(new_scan(model, g)));
                    plan.blocks.len() - 1
                });
                let Block::Scan(scan) = &mut plan.blocks[at] else { unreachable!() };
                scan.members.extend(sites);
            }
            if builder.needs_det {
                builder.inline = false;
                let mut dets = Vec::new();
                for b in model.bindings.iter().filter(|b| b.status == SiteStatus::Deterministic) {
                    dets.push(Block::Det(builder.det_site(&graph.nodes[b.node], &b.tuple)?));
                }
                dets.append(&mut plan.blocks);
                plan.blocks = dets;
            }
            // Imputed slots whose value a scan step reads.
            let slot_of: HashMap<u32, usize> =
                plan.slots.iter().enumerate().filter(|(_, s)| s.imputed).map(|(k, s)| (s.instance, k)).collect();
            for block in &mut plan.blocks {
                if let Block::Scan(scan) = block {
                    let mut used = BTreeSet::new();
                    for m in &scan.members {
                        for s in &m.srcs {
                            if let Src::Inst(i) = s {
                                if let Some(&k) = slot_of.get(i) {
                                    used.insert(k);
                                }
                            }
                        }
                    }
                    scan.imputed_slots = used.into_iter().collect();
                }
            }
        }
    }
    Ok(plan)
}

fn new_scan(model: &CompiledModel, g: usize) -> ScanBlock {
    let report = &model.structure.groups[g];
    let graph = &model.graph;
    let range = |n: &str| graph.indices.get(n).map_or(1, |(lo, hi)| (hi - lo + 1) as usize);
    let first_step = report
        .transitions
        .iter()
        .filter_map(|&n| graph.nodes[n].domain.last().and_then(|d| d.first().copied()))
        .min()
        .unwrap_or(0);
    let hi = graph.indices.get(&report.time_index).map_or(0, |r| r.1);
    let mut carry: Vec<(String, i64)> = Vec::new();
    for &n in &report.transitions {
        for dep in &graph.nodes[n].deps {
            if dep.lag > 0 && report.members.contains(&dep.target) {
                match carry.iter_mut().find(|(v, _)| *v == dep.target) {
                    Some(c) => c.1 = c.1.max(dep.lag),
                    None => carry.push((dep.target.clone(), dep.lag)),
                }
            }
        }
    }
    ScanBlock {
        time_index: report.time_index.clone(),
        replication: report.replication.clone(),
        steps: (hi - first_step + 1).max(0) as usize,
        replicas: report.replication.iter().map(|r| range(r)).product(),
        carry,
        members: Vec::new(),
        imputed_slots: Vec::new(),
    }
}
