//! Column-wise evaluation of fused kernels.
//!
//! Every kernel op is evaluated over all rows before the next op. Operands
//! that read the same source in every row, and ops computed only from such
//! operands, are stored once and their adjoints are reduced over rows.

use super::eval::{site_lp, DensityParts};
use super::lower::{FusedSites, KOp, Src};
use crate::autodiff::{func_eval, Var};
use crate::distributions::DistKind;
use crate::frontend::BinOp;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone)]
enum Operand {
    Fixed(Src),
    Rows(Vec<Src>),
}

/// Row-invariance analysis and buffer layout of one fused site group.
#[derive(Debug, Clone)]
pub(crate) struct Batch {
    rows: usize,
    operands: Vec<Operand>,
    inv: Vec<bool>,
    off: Vec<usize>,
    len: usize,
    observed: Vec<bool>,
}

#[derive(Debug, Default)]
pub(crate) struct Buffers {
    vals: Vec<f64>,
    adj: Vec<f64>,
    xs: Vec<f64>,
    lp: Vec<f64>,
    dx: Vec<f64>,
    dp: Vec<f64>,
    pv: Vec<f64>,
    dpv: Vec<f64>,
}

fn value(env: &[Var], s: Src) -> f64 {
    match s {
        Src::Inst(i) => env[i as usize].val,
        Src::Const(c) => c,
    }
}

fn tape_index(env: &[Var], s: Src) -> Option<u32> {
    match s {
        Src::Inst(i) => env[i as usize].index().map(|t| t as u32),
        Src::Const(_) => None,
    }
}

impl Batch {
    pub(crate) fn new(f: &FusedSites, observed_mask: &[bool]) -> Batch {
        let k = &f.kernel;
        let n = f.rows;
        let w = k.n_operands;
        let operands: Vec<Operand> = (0..w)
            .map(|o| {
                let first = f.srcs[o];
                if (1..n).all(|r| f.srcs[r * w + o] == first) {
                    Operand::Fixed(first)
                } else {
                    Operand::Rows((0..n).map(|r| f.srcs[r * w + o]).collect())
                }
            })
            .collect();
        let mut inv = Vec::with_capacity(k.ops.len());
        for op in &k.ops {
            let i = match *op {
                KOp::Load(o) => matches!(operands[o as usize], Operand::Fixed(_)),
                KOp::Const(_) => true,
                KOp::Neg(a) | KOp::Call1(_, a) => inv[a as usize],
                KOp::Bin(_, a, b) | KOp::Call2(_, a, b) => inv[a as usize] && inv[b as usize],
            };
            inv.push(i);
        }
        let mut off = Vec::with_capacity(inv.len());
        let mut len = 0;
        for &i in &inv {
            off.push(len);
            len += if i { 1 } else { n };
        }
        let observed = (0..n)
            .map(|r| match f.srcs[r * w] {
                Src::Inst(i) => observed_mask[i as usize],
                Src::Const(_) => true,
            })
            .collect();
        Batch { rows: n, operands, inv, off, len, observed }
    }

    fn col(&self, j: u32) -> (usize, usize) {
        let j = j as usize;
        (self.off[j], usize::from(!self.inv[j]))
    }

    /// Adds the block's log density to `parts` and its partials with respect
    /// to tape nodes to `edges`. Returns the summed log density; no partials
    /// are produced when it is not finite.
    pub(crate) fn eval(
        &self,
        f: &FusedSites,
        env: &[Var],
        buf: &mut Buffers,
        parts: &mut DensityParts,
        edges: &mut Vec<(u32, f64)>,
    ) -> f64 {
        let k = &f.kernel;
        let n = self.rows;
        let np = k.params.len();
        buf.vals.resize(self.len, 0.0);
        let vals = &mut buf.vals;

        for (j, op) in k.ops.iter().enumerate() {
            let oj = self.off[j];
            let cnt = if self.inv[j] { 1 } else { n };
            match *op {
                KOp::Load(o) => match &self.operands[o as usize] {
                    Operand::Fixed(s) => vals[oj] = value(env, *s),
                    Operand::Rows(srcs) => {
                        for (v, s) in vals[oj..oj + n].iter_mut().zip(srcs) {
                            *v = value(env, *s);
                        }
                    }
                },
                KOp::Const(c) => vals[oj] = c,
                KOp::Neg(a) => {
                    let oa = self.off[a as usize];
                    for r in 0..cnt {
                        vals[oj + r] = -vals[oa + r];
                    }
                }
                KOp::Bin(op, a, b) => {
                    let (oa, sa) = self.col(a);
                    let (ob, sb) = self.col(b);
                    match op {
                        BinOp::Add => map2(vals, oj, cnt, oa, sa, ob, sb, |x, y| x + y),
                        BinOp::Sub => map2(vals, oj, cnt, oa, sa, ob, sb, |x, y| x - y),
                        BinOp::Mul => map2(vals, oj, cnt, oa, sa, ob, sb, |x, y| x * y),
                        BinOp::Div => map2(vals, oj, cnt, oa, sa, ob, sb, |x, y| x / y),
                    }
                }
                KOp::Call1(fun, a) => {
                    let oa = self.off[a as usize];
                    for r in 0..cnt {
                        vals[oj + r] = func_eval(fun, vals[oa + r], 0.0).0;
                    }
                }
                KOp::Call2(fun, a, b) => {
                    let (oa, sa) = self.col(a);
                    let (ob, sb) = self.col(b);
                    map2(vals, oj, cnt, oa, sa, ob, sb, |x, y| func_eval(fun, x, y).0);
                }
            }
        }

        buf.xs.clear();
        match &self.operands[0] {
            Operand::Fixed(s) => buf.xs.resize(n, value(env, *s)),
            Operand::Rows(srcs) => buf.xs.extend(srcs.iter().map(|s| value(env, *s))),
        }
        buf.lp.resize(n, 0.0);
        buf.dx.resize(n, 0.0);
        buf.dp.resize(np * n, 0.0);
        buf.pv.resize(np, 0.0);
        buf.dpv.resize(np, 0.0);

        let generic = |r: usize, buf: &mut Buffers| {
            for (p, &pj) in k.params.iter().enumerate() {
                let (o, s) = self.col(pj);
                buf.pv[p] = buf.vals[o + r * s];
            }
            let (lp, dx) = site_lp(k.dist, &buf.pv, buf.xs[r], &mut buf.dpv);
            buf.lp[r] = lp;
            buf.dx[r] = dx;
            for p in 0..np {
                buf.dp[p * n + r] = buf.dpv[p];
            }
        };

        if k.dist == DistKind::Normal {
            let (om, sm) = self.col(k.params[0]);
            let (os, ss) = self.col(k.params[1]);
            let sigma0 = buf.vals[os];
            let shared = ss == 0 && sigma0 > 0.0 && sigma0.is_finite();
            let (ls0, is0) = (sigma0.ln(), 1.0 / sigma0);
            for r in 0..n {
                let mu = buf.vals[om + r * sm];
                let x = buf.xs[r];
                let (ls, is) = if shared {
                    (ls0, is0)
                } else {
                    let s = buf.vals[os + r * ss];
                    if !(s > 0.0 && s.is_finite()) {
                        generic(r, buf);
                        continue;
                    }
                    (s.ln(), 1.0 / s)
                };
                if !mu.is_finite() || x.is_nan() {
                    generic(r, buf);
                    continue;
                }
                let z = (x - mu) * is;
                buf.lp[r] = -LN_SQRT_2PI - ls - 0.5 * z * z;
                buf.dp[r] = z * is;
                buf.dp[n + r] = (z * z - 1.0) * is;
                buf.dx[r] = -z * is;
            }
        } else {
            for r in 0..n {
                generic(r, buf);
            }
        }

        let mut total = 0.0;
        for (lp, &obs) in buf.lp.iter().zip(&self.observed) {
            if obs {
                parts.observed += lp;
            } else {
                parts.latent += lp;
            }
            total += lp;
        }
        if !total.is_finite() {
            return total;
        }

        let vals = &buf.vals;
        let adj = &mut buf.adj;
        adj.clear();
        adj.resize(self.len, 0.0);
        for (p, &pj) in k.params.iter().enumerate() {
            let (o, s) = self.col(pj);
            let d = &buf.dp[p * n..(p + 1) * n];
            if s == 0 {
                adj[o] += d.iter().sum::<f64>();
            } else {
                for (a, g) in adj[o..o + n].iter_mut().zip(d) {
                    *a += g;
                }
            }
        }
        for j in (0..k.ops.len()).rev() {
            let oj = self.off[j];
            let cnt = if self.inv[j] { 1 } else { n };
            match k.ops[j] {
                KOp::Load(o) => match &self.operands[o as usize] {
                    Operand::Fixed(s) => {
                        if let Some(t) = tape_index(env, *s) {
                            edges.push((t, adj[oj]));
                        }
                    }
                    Operand::Rows(srcs) => {
                        for (r, s) in srcs.iter().enumerate() {
                            if let Some(t) = tape_index(env, *s) {
                                edges.push((t, adj[oj + r]));
                            }
                        }
                    }
                },
                KOp::Const(_) => {}
                KOp::Neg(a) => {
                    let oa = self.off[a as usize];
                    for r in 0..cnt {
                        adj[oa + r] -= adj[oj + r];
                    }
                }
                KOp::Bin(op, a, b) => {
                    let (oa, sa) = self.col(a);
                    let (ob, sb) = self.col(b);
                    for r in 0..cnt {
                        let g = adj[oj + r];
                        if g == 0.0 {
                            continue;
                        }
                        let (x, y) = (vals[oa + r * sa], vals[ob + r * sb]);
                        let (dx, dy) = match op {
                            BinOp::Add => (1.0, 1.0),
                            BinOp::Sub => (1.0, -1.0),
                            BinOp::Mul => (y, x),
                            BinOp::Div => (1.0 / y, -x / (y * y)),
                        };
                        adj[oa + r * sa] += g * dx;
                        adj[ob + r * sb] += g * dy;
                    }
                }
                KOp::Call1(fun, a) => {
                    let oa = self.off[a as usize];
                    for r in 0..cnt {
                        let g = adj[oj + r];
                        if g != 0.0 {
                            adj[oa + r] += g * func_eval(fun, vals[oa + r], 0.0).1[0];
                        }
                    }
                }
                KOp::Call2(fun, a, b) => {
                    let (oa, sa) = self.col(a);
                    let (ob, sb) = self.col(b);
                    for r in 0..cnt {
                        let g = adj[oj + r];
                        if g == 0.0 {
                            continue;
                        }
                        let d = func_eval(fun, vals[oa + r * sa], vals[ob + r * sb]).1;
                        adj[oa + r * sa] += g * d[0];
                        adj[ob + r * sb] += g * d[1];
                    }
                }
            }
        }
        match &self.operands[0] {
            Operand::Fixed(s) => {
                if let Some(t) = tape_index(env, *s) {
                    edges.push((t, buf.dx.iter().sum()));
                }
            }
            Operand::Rows(srcs) => {
                for (s, &d) in srcs.iter().zip(&buf.dx) {
                    if let Some(t) = tape_index(env, *s) {
                        edges.push((t, d));
                    }
                }
            }
        }
        total
    }
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn map2(v: &mut [f64], oj: usize, cnt: usize, oa: usize, sa: usize, ob: usize, sb: usize, f: impl Fn(f64, f64) -> f64) {
    for r in 0..cnt {
        v[oj + r] = f(v[oa + r * sa], v[ob + r * sb]);
    }
}
