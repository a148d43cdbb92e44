//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A tape is rebuilt for every evaluation. Each node stores the partial
//! derivatives of its value with respect to its parents, so the reverse sweep
//! is a single pass over a contiguous edge array.

use thiserror::Error;

use crate::compiler::ExecutablePlan;
use crate::frontend::Func;

const CONST: u32 = u32::MAX;

/// A value recorded on a tape, or a constant when it has no tape index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Var {
    pub val: f64,
    idx: u32,
}

impl Var {
    pub fn constant(val: f64) -> Var {
        Var { val, idx: CONST }
    }

    pub fn is_constant(&self) -> bool {
        self.idx == CONST
    }

    /// Tape position, `None` for constants.
    pub fn index(&self) -> Option<usize> {
        (self.idx != CONST).then_some(self.idx as usize)
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    /// Edge range end per node; node `i` owns `edges[ends[i-1]..ends[i]]`.
    ends: Vec<u32>,
    edges: Vec<(u32, f64)>,
    adj: Vec<f64>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn clear(&mut self) {
        self.ends.clear();
        self.edges.clear();
    }

    pub fn len(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    /// An independent variable.
    pub fn input(&mut self, val: f64) -> Var {
        self.push(val, std::iter::empty())
    }

    /// Records a node from (parent, partial) pairs; constant parents are dropped.
    pub fn push(&mut self, val: f64, parents: impl IntoIterator<Item = (Var, f64)>) -> Var {
        for (p, d) in parents {
            if p.idx != CONST {
                self.edges.push((p.idx, d));
            }
        }
        self.push_raw(val)
    }

    /// Records a node from (tape index, partial) pairs.
    pub fn push_indexed(&mut self, val: f64, parents: impl IntoIterator<Item = (u32, f64)>) -> Var {
        self.edges.extend(parents);
        self.push_raw(val)
    }

    fn push_raw(&mut self, val: f64) -> Var {
        let idx = self.ends.len() as u32;
        self.ends.push(self.edges.len() as u32);
        Var { val, idx }
    }

    fn unary(&mut self, a: Var, val: f64, da: f64) -> Var {
        if a.is_constant() {
            return Var::constant(val);
        }
        self.push(val, [(a, da)])
    }

    fn binary(&mut self, a: Var, b: Var, val: f64, da: f64, db: f64) -> Var {
        if a.is_constant() && b.is_constant() {
            return Var::constant(val);
        }
        self.push(val, [(a, da), (b, db)])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, a.val + b.val, 1.0, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, a.val - b.val, 1.0, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, a.val * b.val, b.val, a.val)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let q = a.val / b.val;
        self.binary(a, b, q, 1.0 / b.val, -q / b.val)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, -a.val, -1.0)
    }

    pub fn func(&mut self, f: Func, args: &[Var]) -> Var {
        match args {
            [a] => {
                let (v, d) = func_eval(f, a.val, 0.0);
                self.unary(*a, v, d[0])
            }
            [a, b] => {
                let (v, d) = func_eval(f, a.val, b.val);
                self.binary(*a, *b, v, d[0], d[1])
            }
            _ => unreachable!("function arity is validated"),
        }
    }

    /// Sum of variables as one node.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let val = terms.iter().map(|v| v.val).sum();
        self.push(val, terms.iter().map(|&v| (v, 1.0)))
    }

    /// Adjoint of every tape node with respect to `out`.
    pub fn reverse(&mut self, out: Var) -> &[f64] {
        let n = self.ends.len();
        self.adj.clear();
        self.adj.resize(n, 0.0);
        if let Some(o) = out.index() {
            self.adj[o] = 1.0;
            for i in (0..=o).rev() {
                let a = self.adj[i];
                if a == 0.0 {
                    continue;
                }
                let start = if i == 0 { 0 } else { self.ends[i - 1] as usize };
                for &(p, d) in &self.edges[start..self.ends[i] as usize] {
                    self.adj[p as usize] += a * d;
                }
            }
        }
        &self.adj
    }
}

/// Value and partials of a library function. `b` is ignored for unary ones.
pub fn func_eval(f: Func, a: f64, b: f64) -> (f64, [f64; 2]) {
    match f {
        Func::Exp => {
            let e = a.exp();
            (e, [e, 0.0])
        }
        Func::Log => (a.ln(), [1.0 / a, 0.0]),
        Func::Expit => {
            let s = crate::distributions::expit(a);
            (s, [s * (1.0 - s), 0.0])
        }
        Func::Logit => ((a / (1.0 - a)).ln(), [1.0 / (a * (1.0 - a)), 0.0]),
        Func::Sqrt => {
            let r = a.sqrt();
            (r, [0.5 / r, 0.0])
        }
        Func::Abs => (
            a.abs(),
            [
                if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                },
                0.0,
            ],
        ),
        Func::Pow => {
            let v = a.powf(b);
            let da = if b == 0.0 { 0.0 } else { b * a.powf(b - 1.0) };
            let db = if a > 0.0 { v * a.ln() } else { 0.0 };
            (v, [da, db])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("log density is NaN")]
    NonFiniteDensity,
    #[error("expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A differentiable log density over an unconstrained vector.
pub trait LogDensity {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the value. `-inf` is a
    /// valid value; NaN anywhere is an error.
    fn logp_and_grad(&mut self, u: &[f64], grad: &mut [f64]) -> Result<f64, DensityError>;
}

/// Value and gradient of a plan's log density over the unconstrained latents.
pub fn grad_logdensity(plan: &ExecutablePlan, u: &[f64]) -> Result<(f64, Vec<f64>), DensityError> {
    let mut grad = vec![0.0; plan.latent_dim()];
    let v = plan.density().logp_and_grad(u, &mut grad)?;
    Ok((v, grad))
}
