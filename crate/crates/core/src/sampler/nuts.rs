//! Multinomial No-U-Turn transitions with a diagonal metric.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::LogDensity;

/// Energy error beyond which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

/// Position, momentum and cached density of a phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl Point {
    /// Evaluates the target at `q`; failures count as zero density.
    pub fn new<D: LogDensity + ?Sized>(target: &mut D, q: Vec<f64>) -> Point {
        let d = q.len();
        let mut pt = Point { q, p: vec![0.0; d], grad: vec![0.0; d], logp: 0.0 };
        pt.refresh(target);
        pt
    }

    fn refresh<D: LogDensity + ?Sized>(&mut self, target: &mut D) {
        self.logp = target.logp_and_grad(&self.q, &mut self.grad).unwrap_or(f64::NEG_INFINITY);
    }

    pub fn kinetic(&self, inv_mass: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
    }

    /// Hamiltonian; NaN is mapped to +inf.
    pub fn hamiltonian(&self, inv_mass: &[f64]) -> f64 {
        let h = -self.logp + self.kinetic(inv_mass);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn sharp(&self, inv_mass: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_mass).map(|(p, m)| p * m).collect()
    }
}

pub fn sample_momentum<R: Rng + ?Sized>(p: &mut [f64], inv_mass: &[f64], rng: &mut R) {
    for (p, m) in p.iter_mut().zip(inv_mass) {
        let z: f64 = rng.sample(StandardNormal);
        *p = z / m.sqrt();
    }
}

/// One leapfrog step of size `eps` in place.
pub fn leapfrog_in_place<D: LogDensity + ?Sized>(target: &mut D, z: &mut Point, eps: f64, inv_mass: &[f64]) {
    for (p, g) in z.p.iter_mut().zip(&z.grad) {
        *p += 0.5 * eps * g;
    }
    for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(inv_mass) {
        *q += eps * m * p;
    }
    z.refresh(target);
    for (p, g) in z.p.iter_mut().zip(&z.grad) {
        *p += 0.5 * eps * g;
    }
}

/// Half-step, full-step, half-step update of (position, momentum).
pub fn leapfrog<D: LogDensity + ?Sized>(target: &mut D, z: &Point, eps: f64, inv_mass: &[f64]) -> Point {
    let mut out = z.clone();
    leapfrog_in_place(target, &mut out, eps, inv_mass);
    out
}

/// Per-draw sampler statistics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DrawStats {
    pub accept_prob: f64,
    pub tree_depth: u32,
    pub n_leapfrog: u32,
    pub divergent: bool,
    pub step_size: f64,
    pub energy: f64,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Tree<'a, D: ?Sized, R: ?Sized> {
    target: &'a mut D,
    rng: &'a mut R,
    inv_mass: &'a [f64],
    eps: f64,
    h0: f64,
    n_leapfrog: u32,
    sum_metro_prob: f64,
    divergent: bool,
}

struct Edge {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
}

impl<D: LogDensity + ?Sized, R: Rng + ?Sized> Tree<'_, D, R> {
    /// Extends the trajectory from `z` by 2^depth steps in direction `sign`.
    /// Returns false when the subtree diverged or turned around.
    #[allow(clippy::too_many_arguments)]
    fn build(
        &mut self,
        depth: u32,
        z: &mut Point,
        z_propose: &mut Point,
        edge: &mut Edge,
        rho: &mut [f64],
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            leapfrog_in_place(self.target, z, sign * self.eps, self.inv_mass);
            self.n_leapfrog += 1;
            let h = z.hamiltonian(self.inv_mass);
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, self.h0 - h);
            self.sum_metro_prob += if self.h0 - h > 0.0 { 1.0 } else { (self.h0 - h).exp() };
            z_propose.clone_from(z);
            edge.p_sharp_beg = z.sharp(self.inv_mass);
            edge.p_sharp_end.clone_from(&edge.p_sharp_beg);
            add_assign(rho, &z.p);
            edge.p_beg.clone_from(&z.p);
            edge.p_end.clone_from(&z.p);
            return !self.divergent;
        }
        let d = rho.len();
        let mut init = Edge { p_sharp_beg: Vec::new(), p_sharp_end: Vec::new(), p_beg: Vec::new(), p_end: Vec::new() };
        let mut rho_init = vec![0.0; d];
        let mut lsw_init = f64::NEG_INFINITY;
        if !self.build(depth - 1, z, z_propose, &mut init, &mut rho_init, sign, &mut lsw_init) {
            return false;
        }
        let mut z_propose_final = z.clone();
        let mut fin = Edge { p_sharp_beg: Vec::new(), p_sharp_end: Vec::new(), p_beg: Vec::new(), p_end: Vec::new() };
        let mut rho_final = vec![0.0; d];
        let mut lsw_final = f64::NEG_INFINITY;
        if !self.build(depth - 1, z, &mut z_propose_final, &mut fin, &mut rho_final, sign, &mut lsw_final) {
            return false;
        }
        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }
        let mut rho_subtree = rho_init.clone();
        add_assign(&mut rho_subtree, &rho_final);
        add_assign(rho, &rho_subtree);

        let mut persist = criterion(&init.p_sharp_beg, &fin.p_sharp_end, &rho_subtree);
        let mut rho_ext = rho_init;
        add_assign(&mut rho_ext, &fin.p_beg);
        persist &= criterion(&init.p_sharp_beg, &fin.p_sharp_beg, &rho_ext);
        let mut rho_ext = rho_final;
        add_assign(&mut rho_ext, &init.p_end);
        persist &= criterion(&init.p_sharp_end, &fin.p_sharp_end, &rho_ext);

        *edge =
            Edge { p_sharp_beg: init.p_sharp_beg, p_sharp_end: fin.p_sharp_end, p_beg: init.p_beg, p_end: fin.p_end };
        persist
    }
}

/// One NUTS transition from `start` (whose momentum is ignored).
pub fn nuts_draw<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &mut D,
    start: &Point,
    eps: f64,
    inv_mass: &[f64],
    max_depth: u32,
    rng: &mut R,
) -> (Point, DrawStats) {
    let mut z = start.clone();
    sample_momentum(&mut z.p, inv_mass, rng);
    let h0 = z.hamiltonian(inv_mass);

    if max_depth == 0 {
        let mut prop = z.clone();
        leapfrog_in_place(target, &mut prop, eps, inv_mass);
        let h = prop.hamiltonian(inv_mass);
        let accept = if h0 - h > 0.0 { 1.0 } else { (h0 - h).exp() };
        let divergent = h - h0 > MAX_DELTA_H;
        let next = if rng.random::<f64>() < accept { prop } else { z };
        let energy = next.hamiltonian(inv_mass);
        let stats = DrawStats { accept_prob: accept, tree_depth: 0, n_leapfrog: 1, divergent, step_size: eps, energy };
        return (next, stats);
    }

    let sharp0 = z.sharp(inv_mass);
    let mut z_fwd = z.clone();
    let mut z_bck = z.clone();
    let mut z_sample = z.clone();
    let mut z_propose = z.clone();
    let mut p_fwd_fwd = z.p.clone();
    let mut p_sharp_fwd_fwd = sharp0.clone();
    let mut p_fwd_bck = z.p.clone();
    let mut p_sharp_fwd_bck = sharp0.clone();
    let mut p_bck_fwd = z.p.clone();
    let mut p_sharp_bck_fwd = sharp0.clone();
    let mut p_bck_bck = z.p.clone();
    let mut p_sharp_bck_bck = sharp0;
    let mut rho = z.p.clone();
    let mut log_sum_weight = 0.0;
    let d = rho.len();

    let mut tree = Tree { target, rng, inv_mass, eps, h0, n_leapfrog: 0, sum_metro_prob: 0.0, divergent: false };
    let mut depth = 0;
    while depth < max_depth {
        let mut rho_fwd = vec![0.0; d];
        let mut rho_bck = vec![0.0; d];
        let mut lsw_subtree = f64::NEG_INFINITY;
        let valid;
        if tree.rng.random::<f64>() > 0.5 {
            let mut cur = z_fwd.clone();
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_bck);
            p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
            let mut edge =
                Edge { p_sharp_beg: Vec::new(), p_sharp_end: Vec::new(), p_beg: Vec::new(), p_end: Vec::new() };
            valid = tree.build(depth, &mut cur, &mut z_propose, &mut edge, &mut rho_fwd, 1.0, &mut lsw_subtree);
            if !edge.p_beg.is_empty() {
                p_sharp_fwd_bck = edge.p_sharp_beg;
                p_sharp_fwd_fwd = edge.p_sharp_end;
                p_fwd_bck = edge.p_beg;
                p_fwd_fwd = edge.p_end;
            }
            z_fwd = cur;
        } else {
            let mut cur = z_bck.clone();
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_fwd);
            p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
            let mut edge =
                Edge { p_sharp_beg: Vec::new(), p_sharp_end: Vec::new(), p_beg: Vec::new(), p_end: Vec::new() };
            valid = tree.build(depth, &mut cur, &mut z_propose, &mut edge, &mut rho_bck, -1.0, &mut lsw_subtree);
            if !edge.p_beg.is_empty() {
                p_sharp_bck_fwd = edge.p_sharp_beg;
                p_sharp_bck_bck = edge.p_sharp_end;
                p_bck_fwd = edge.p_beg;
                p_bck_bck = edge.p_end;
            }
            z_bck = cur;
        }
        if !valid {
            break;
        }
        depth += 1;
        if lsw_subtree > log_sum_weight {
            z_sample.clone_from(&z_propose);
        } else {
            let accept = (lsw_subtree - log_sum_weight).exp();
            if tree.rng.random::<f64>() < accept {
                z_sample.clone_from(&z_propose);
            }
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = rho_bck.clone();
        add_assign(&mut rho, &rho_fwd);
        let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        let mut rho_ext = rho_bck.clone();
        add_assign(&mut rho_ext, &p_fwd_bck);
        persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
        let mut rho_ext = rho_fwd.clone();
        add_assign(&mut rho_ext, &p_bck_fwd);
        persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
        if !persist {
            break;
        }
    }
    let _ = (&p_fwd_fwd, &p_bck_bck);
    let accept_prob = if tree.n_leapfrog > 0 { tree.sum_metro_prob / tree.n_leapfrog as f64 } else { 0.0 };
    let energy = z_sample.hamiltonian(inv_mass);
    let stats = DrawStats {
        accept_prob,
        tree_depth: depth,
        n_leapfrog: tree.n_leapfrog,
        divergent: tree.divergent,
        step_size: eps,
        energy,
    };
    (z_sample, stats)
}
