//! Evaluation of a plan's log density on an autodiff tape.

use super::batch::{Batch, Buffers};
use super::lower::{Block, ExecutablePlan, FusedSites, RExpr, ScalarSite};
use crate::autodiff::{DensityError, LogDensity, Tape, Var};
use crate::distributions::Transform;
use crate::frontend::BinOp;

/// Log density split by where the terms come from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DensityParts {
    /// Sites whose value is an observed constant.
    pub observed: f64,
    /// Sites whose value is a latent slot.
    pub latent: f64,
    pub log_jacobian: f64,
}

impl DensityParts {
    pub fn total(&self) -> f64 {
        self.observed + self.latent + self.log_jacobian
    }
}

#[derive(Default)]
struct Workspace {
    pvals: Vec<f64>,
    dparams: Vec<f64>,
    batch: Buffers,
    edges: Vec<(u32, f64)>,
}

/// Reusable evaluator of one plan's density.
pub struct PlanDensity<'a> {
    plan: &'a ExecutablePlan,
    tape: Tape,
    template: Vec<Var>,
    env: Vec<Var>,
    ws: Workspace,
    batches: Vec<Batch>,
    parts: DensityParts,
}

impl ExecutablePlan {
    fn fused_groups(&self) -> impl Iterator<Item = &FusedSites> {
        self.blocks.iter().flat_map(|b| match b {
            Block::Iid(f) => std::slice::from_ref(f),
            Block::Scan(s) => s.members.as_slice(),
            _ => &[],
        })
    }

    pub fn density(&self) -> PlanDensity<'_> {
        let mut template = vec![Var::constant(f64::NAN); self.n_instances];
        for &(i, v) in &self.observed {
            template[i as usize] = Var::constant(v);
        }
        PlanDensity {
            plan: self,
            tape: Tape::new(),
            env: template.clone(),
            template,
            ws: Workspace::default(),
            batches: self.fused_groups().map(|f| Batch::new(f, &self.observed_mask)).collect(),
            parts: DensityParts::default(),
        }
    }

    /// Density terms with latent slots fixed at constrained values, without
    /// Jacobian terms.
    pub fn parts_at_constrained(&self, x: &[f64]) -> DensityParts {
        let mut d = self.density();
        d.env.clone_from(&d.template);
        for (slot, &v) in self.slots.iter().zip(x) {
            d.env[slot.instance as usize] = Var::constant(v);
        }
        d.tape.clear();
        let mut parts = DensityParts::default();
        let _ = run_blocks(self, &mut d.tape, &mut d.env, &mut d.ws, &d.batches, &mut parts);
        parts
    }

    /// Constrained values of every instance at a latent point, after running
    /// deterministic sites. Missing instances are NaN.
    pub fn instance_values(&self, u: &[f64]) -> Vec<f64> {
        let mut d = self.density();
        for (slot, &u) in self.slots.iter().zip(u) {
            d.env[slot.instance as usize] = Var::constant(slot.transform.forward(u));
        }
        let mut parts = DensityParts::default();
        let _ = run_blocks(self, &mut d.tape, &mut d.env, &mut d.ws, &d.batches, &mut parts);
        d.env.iter().map(|v| v.val).collect()
    }
}

impl PlanDensity<'_> {
    /// Terms of the last evaluation.
    pub fn parts(&self) -> DensityParts {
        self.parts
    }

    pub fn tape_len(&self) -> usize {
        self.tape.len()
    }
}

impl LogDensity for PlanDensity<'_> {
    fn dim(&self) -> usize {
        self.plan.latent_dim()
    }

    fn logp_and_grad(&mut self, u: &[f64], grad: &mut [f64]) -> Result<f64, DensityError> {
        let plan = self.plan;
        let dim = plan.latent_dim();
        if u.len() != dim || grad.len() != dim {
            return Err(DensityError::DimensionMismatch { expected: dim, found: u.len() });
        }
        if u.iter().any(|v| v.is_nan()) {
            return Err(DensityError::NonFiniteDensity);
        }
        self.tape.clear();
        self.env.clone_from(&self.template);
        let inputs: Vec<Var> = u.iter().map(|&v| self.tape.input(v)).collect();
        let mut log_j = 0.0;
        let mut jac_edges = Vec::new();
        for (slot, &uk) in plan.slots.iter().zip(&inputs) {
            let t = slot.transform;
            self.env[slot.instance as usize] = if t == Transform::Identity {
                uk
            } else {
                log_j += t.log_abs_det_jacobian(uk.val);
                jac_edges.push((uk, t.d_log_abs_det_jacobian(uk.val)));
                self.tape.push(t.forward(uk.val), [(uk, t.derivative(uk.val))])
            };
        }
        let mut parts = DensityParts { log_jacobian: log_j, ..Default::default() };
        let jac = self.tape.push(log_j, jac_edges);
        let mut terms = run_blocks(plan, &mut self.tape, &mut self.env, &mut self.ws, &self.batches, &mut parts);
        terms.push(jac);
        let total = self.tape.sum(&terms);
        self.parts = parts;
        if total.val.is_nan() {
            return Err(DensityError::NonFiniteDensity);
        }
        let adj = self.tape.reverse(total);
        for (g, v) in grad.iter_mut().zip(&inputs) {
            *g = adj[v.index().expect("inputs are on the tape")];
        }
        Ok(total.val)
    }
}

fn run_blocks(
    plan: &ExecutablePlan,
    tape: &mut Tape,
    env: &mut [Var],
    ws: &mut Workspace,
    batches: &[Batch],
    parts: &mut DensityParts,
) -> Vec<Var> {
    let mut terms = Vec::with_capacity(plan.blocks.len());
    let mut next = 0;
    for block in &plan.blocks {
        match block {
            Block::Det(d) => env[d.instance as usize] = eval_expr(tape, env, &d.expr),
            Block::Scalar(s) => terms.push(scalar_site(plan, tape, env, ws, s, parts)),
            Block::Iid(f) => {
                terms.push(fused_block(tape, env, ws, std::slice::from_ref(f), &batches[next..next + 1], parts));
                next += 1;
            }
            Block::Scan(s) => {
                let k = s.members.len();
                terms.push(fused_block(tape, env, ws, &s.members, &batches[next..next + k], parts));
                next += k;
            }
        }
    }
    terms
}

fn eval_expr(tape: &mut Tape, env: &[Var], e: &RExpr) -> Var {
    match e {
        RExpr::Const(c) => Var::constant(*c),
        RExpr::Inst(i) => env[*i as usize],
        RExpr::Neg(a) => {
            let a = eval_expr(tape, env, a);
            tape.neg(a)
        }
        RExpr::Bin(op, a, b) => {
            let a = eval_expr(tape, env, a);
            let b = eval_expr(tape, env, b);
            match op {
                BinOp::Add => tape.add(a, b),
                BinOp::Sub => tape.sub(a, b),
                BinOp::Mul => tape.mul(a, b),
                BinOp::Div => tape.div(a, b),
            }
        }
        RExpr::Call(f, args) => {
            let args: Vec<Var> = args.iter().map(|a| eval_expr(tape, env, a)).collect();
            tape.func(*f, &args)
        }
    }
}

/// Log density of a site; invalid parameters give `-inf`, NaN ones give NaN.
pub(super) fn site_lp(dist: crate::distributions::DistKind, p: &[f64], x: f64, dparams: &mut [f64]) -> (f64, f64) {
    if p.iter().any(|v| v.is_nan()) {
        return (f64::NAN, 0.0);
    }
    dist.log_prob_grad(p, x, dparams).unwrap_or((f64::NEG_INFINITY, 0.0))
}

fn scalar_site(
    plan: &ExecutablePlan,
    tape: &mut Tape,
    env: &[Var],
    ws: &mut Workspace,
    s: &ScalarSite,
    parts: &mut DensityParts,
) -> Var {
    let params: Vec<Var> = s.params.iter().map(|p| eval_expr(tape, env, p)).collect();
    let x = env[s.instance as usize];
    ws.pvals.clear();
    ws.pvals.extend(params.iter().map(|p| p.val));
    ws.dparams.resize(params.len(), 0.0);
    let (lp, dx) = site_lp(s.dist, &ws.pvals, x.val, &mut ws.dparams);
    if plan.observed_mask[s.instance as usize] {
        parts.observed += lp;
    } else {
        parts.latent += lp;
    }
    if !lp.is_finite() {
        return Var::constant(lp);
    }
    let dp = &ws.dparams;
    tape.push(lp, params.iter().zip(dp).map(|(&p, &d)| (p, d)).chain([(x, dx)]))
}

fn fused_block(
    tape: &mut Tape,
    env: &[Var],
    ws: &mut Workspace,
    members: &[FusedSites],
    batches: &[Batch],
    parts: &mut DensityParts,
) -> Var {
    ws.edges.clear();
    let mut total = 0.0;
    for (f, b) in members.iter().zip(batches) {
        total += b.eval(f, env, &mut ws.batch, parts, &mut ws.edges);
    }
    if !total.is_finite() {
        return Var::constant(total);
    }
    tape.push_indexed(total, ws.edges.drain(..))
}
