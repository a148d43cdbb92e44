//! Step-size and metric adaptation during warm-up.

use rand::Rng;

use super::nuts::{leapfrog, sample_momentum, Point};
use crate::autodiff::LogDensity;

/// Nesterov dual averaging of log step size.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    pub delta: f64,
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(delta: f64, eps0: f64) -> Self {
        DualAveraging {
            delta,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
            mu: (10.0 * eps0).ln(),
            counter: 0.0,
            s_bar: 0.0,
            x_bar: 0.0,
        }
    }

    pub fn restart(&mut self, eps0: f64) {
        self.mu = (10.0 * eps0).ln();
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept: f64) -> f64 {
        let accept = if accept.is_nan() { 0.0 } else { accept.min(1.0) };
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / self.gamma;
        let x_eta = self.counter.powf(-self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// Step size to use after warm-up.
    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Welford running variance.
#[derive(Debug, Clone)]
pub struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub fn new(dim: usize) -> Self {
        Welford { n: 0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Sample variance shrunk toward 1e-3.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.m2
            .iter()
            .map(|s| {
                let var = if self.n > 1 { s / (n - 1.0) } else { 1.0 };
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    pub fn reset(&mut self) {
        *self = Welford::new(self.mean.len());
    }
}

/// Schedule of metric-adaptation windows: an initial fast buffer, doubling
/// slow windows, and a terminal fast buffer.
#[derive(Debug, Clone)]
pub struct Windows {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    enabled: bool,
}

impl Windows {
    pub fn new(n_warmup: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        let enabled = n_warmup >= 20;
        if init + term + base > n_warmup {
            init = (0.15 * n_warmup as f64) as usize;
            term = (0.1 * n_warmup as f64) as usize;
            base = n_warmup.saturating_sub(init + term);
        }
        Windows {
            n_warmup,
            init_buffer: init,
            term_buffer: term,
            window_size: base,
            next_window: (init + base).saturating_sub(1),
            counter: 0,
            enabled,
        }
    }

    fn in_slow_window(&self) -> bool {
        self.enabled
            && self.counter >= self.init_buffer
            && self.counter < self.n_warmup - self.term_buffer
            && self.counter != self.n_warmup
    }

    fn at_window_end(&self) -> bool {
        self.enabled && self.counter == self.next_window && self.counter != self.n_warmup
    }

    fn advance_window(&mut self) {
        let last = self.n_warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.n_warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Records a warm-up position. Returns a new inverse metric at the end
    /// of a slow window.
    pub fn observe(&mut self, est: &mut Welford, q: &[f64]) -> Option<Vec<f64>> {
        if self.in_slow_window() {
            est.add(q);
        }
        let out = if self.at_window_end() {
            self.advance_window();
            let var = est.regularized_variance();
            est.reset();
            Some(var)
        } else {
            None
        };
        self.counter += 1;
        out
    }
}

/// Doubles or halves `eps` until a single leapfrog step crosses an
/// acceptance probability of 0.8.
pub fn find_reasonable_step<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &mut D,
    z: &Point,
    eps0: f64,
    inv_mass: &[f64],
    rng: &mut R,
) -> f64 {
    let ln08 = 0.8f64.ln();
    let mut eps = eps0;
    let mut probe = z.clone();
    let mut trial = |eps: f64, rng: &mut R| {
        sample_momentum(&mut probe.p, inv_mass, rng);
        let h0 = probe.hamiltonian(inv_mass);
        let next = leapfrog(target, &probe, eps, inv_mass);
        let dh = h0 - next.hamiltonian(inv_mass);
        if dh.is_nan() {
            f64::NEG_INFINITY
        } else {
            dh
        }
    };
    let dh = trial(eps, rng);
    let dir = if dh > ln08 { 1 } else { -1 };
    loop {
        let dh = trial(eps, rng);
        if dir == 1 && (dh.is_nan() || dh <= ln08) {
            break;
        }
        if dir == -1 && (dh.is_nan() || dh >= ln08) {
            break;
        }
        eps = if dir == 1 { 2.0 * eps } else { 0.5 * eps };
        if !(1e-10..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-10, 1e7)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_match_reference_layout() {
        let mut w = Windows::new(1000);
        let mut est = Welford::new(1);
        let mut ends = Vec::new();
        for i in 0..1000 {
            if w.observe(&mut est, &[i as f64]).is_some() {
                ends.push(i);
            }
        }
        assert_eq!(ends, vec![99, 149, 249, 449, 949]);
    }

    #[test]
    fn short_warmup_scales_buffers() {
        let mut w = Windows::new(100);
        let mut est = Welford::new(1);
        let ends: Vec<usize> = (0..100).filter(|&i| w.observe(&mut est, &[i as f64]).is_some()).collect();
        assert_eq!(*ends.last().unwrap(), 89);
    }

    #[test]
    fn regularization_of_known_sample() {
        let mut est = Welford::new(1);
        for x in [1.0, 2.0, 3.0, 4.0, 5.0] {
            est.add(&[x]);
        }
        let v = est.regularized_variance()[0];
        assert!((v - (0.5 * 2.5 + 1e-3 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut da = DualAveraging::new(0.8, 1.0);
        let mut eps = 1.0;
        for _ in 0..50 {
            eps = da.update(0.2);
        }
        assert!(eps < 1.0);
        assert!(da.final_step() < 1.0);
    }
}
