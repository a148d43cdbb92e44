//! Supported distribution families.
//!
//! Each family provides a log density (or log mass) together with its
//! analytic partial derivatives, a forward sampler for prior simulation, and
//! support metadata used to pick an unconstraining transform.
//!
//! Parameterizations: `N(mu, sigma)` takes a standard deviation, `Exp(rate)`
//! a rate, `HalfNormal(scale)` a scale, `Gamma(shape, rate)` a rate.

use rand::Rng;
use rand_distr::Distribution;
use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};
use thiserror::Error;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const LN_SQRT_2_OVER_PI: f64 = -0.225_791_352_644_727_43;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid parameter for {dist}: {param} = {value}")]
    InvalidParameter { dist: &'static str, param: &'static str, value: f64 },
    #[error("{dist} expects {expected} parameters, got {found}")]
    ParameterCount { dist: &'static str, expected: usize, found: usize },
    #[error("no unconstraining transform for {0:?} support")]
    NoTransform(Support),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Support {
    Real,
    Positive,
    UnitInterval,
    NonnegInteger,
    BoundedInteger,
}

impl Support {
    pub fn is_discrete(self) -> bool {
        matches!(self, Support::NonnegInteger | Support::BoundedInteger)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DistKind {
    Normal,
    Exponential,
    HalfNormal,
    Gamma,
    Beta,
    StudentT,
    Bernoulli,
    BernoulliLogits,
    Binomial,
    BinomialLogits,
    Poisson,
    ZeroInflatedPoisson,
}

/// Static description of a distribution family.
#[derive(Debug)]
pub struct DistSpec {
    pub kind: DistKind,
    /// Canonical name used when rendering.
    pub name: &'static str,
    pub aliases: &'static [&'static str],
    pub params: &'static [&'static str],
    pub support: Support,
}

impl DistSpec {
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_discrete(&self) -> bool {
        self.support.is_discrete()
    }
}

static SPECS: [DistSpec; 12] = [
    DistSpec {
        kind: DistKind::Normal,
        name: "N",
        aliases: &["Normal"],
        params: &["mu", "sigma"],
        support: Support::Real,
    },
    DistSpec {
        kind: DistKind::Exponential,
        name: "Exp",
        aliases: &["Exponential"],
        params: &["rate"],
        support: Support::Positive,
    },
    DistSpec {
        kind: DistKind::HalfNormal,
        name: "HalfNormal",
        aliases: &[],
        params: &["scale"],
        support: Support::Positive,
    },
    DistSpec {
        kind: DistKind::Gamma,
        name: "Gamma",
        aliases: &[],
        params: &["shape", "rate"],
        support: Support::Positive,
    },
    DistSpec {
        kind: DistKind::Beta,
        name: "Beta",
        aliases: &[],
        params: &["alpha", "beta"],
        support: Support::UnitInterval,
    },
    DistSpec {
        kind: DistKind::StudentT,
        name: "StudentT",
        aliases: &[],
        params: &["nu", "mu", "sigma"],
        support: Support::Real,
    },
    DistSpec {
        kind: DistKind::Bernoulli,
        name: "Bernoulli",
        aliases: &[],
        params: &["p"],
        support: Support::BoundedInteger,
    },
    DistSpec {
        kind: DistKind::BernoulliLogits,
        name: "BernoulliLogits",
        aliases: &[],
        params: &["logits"],
        support: Support::BoundedInteger,
    },
    DistSpec {
        kind: DistKind::Binomial,
        name: "Binomial",
        aliases: &[],
        params: &["n", "p"],
        support: Support::BoundedInteger,
    },
    DistSpec {
        kind: DistKind::BinomialLogits,
        name: "BinomialLogits",
        aliases: &[],
        params: &["n", "logits"],
        support: Support::BoundedInteger,
    },
    DistSpec {
        kind: DistKind::Poisson,
        name: "Poisson",
        aliases: &[],
        params: &["rate"],
        support: Support::NonnegInteger,
    },
    DistSpec {
        kind: DistKind::ZeroInflatedPoisson,
        name: "ZeroInflatedPoisson",
        aliases: &[],
        params: &["gate", "rate"],
        support: Support::NonnegInteger,
    },
];

/// Finds a family by its source-level name.
pub fn lookup(name: &str) -> Option<&'static DistSpec> {
    SPECS.iter().find(|s| s.name == name || s.aliases.contains(&name))
}

pub fn all_specs() -> &'static [DistSpec] {
    &SPECS
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn ln_choose(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

fn is_count(x: f64) -> bool {
    x >= 0.0 && x.fract() == 0.0 && x.is_finite()
}

impl DistKind {
    pub fn spec(self) -> &'static DistSpec {
        SPECS.iter().find(|s| s.kind == self).expect("every kind has a spec")
    }

    pub fn support(self) -> Support {
        self.spec().support
    }

    fn check_count(self, params: &[f64]) -> Result<(), DistError> {
        let spec = self.spec();
        if params.len() != spec.param_count() {
            return Err(DistError::ParameterCount {
                dist: spec.name,
                expected: spec.param_count(),
                found: params.len(),
            });
        }
        Ok(())
    }

    fn check_params(self, params: &[f64]) -> Result<(), DistError> {
        self.check_count(params)?;
        let spec = self.spec();
        let bad = |i: usize| DistError::InvalidParameter { dist: spec.name, param: spec.params[i], value: params[i] };
        let positive = |i: usize| if params[i] > 0.0 && params[i].is_finite() { Ok(()) } else { Err(bad(i)) };
        let finite = |i: usize| if params[i].is_finite() { Ok(()) } else { Err(bad(i)) };
        let prob = |i: usize| if (0.0..=1.0).contains(&params[i]) { Ok(()) } else { Err(bad(i)) };
        let count = |i: usize| if is_count(params[i]) { Ok(()) } else { Err(bad(i)) };
        match self {
            DistKind::Normal => {
                finite(0)?;
                positive(1)
            }
            DistKind::Exponential | DistKind::HalfNormal | DistKind::Poisson => positive(0),
            DistKind::Gamma | DistKind::Beta => {
                positive(0)?;
                positive(1)
            }
            DistKind::StudentT => {
                positive(0)?;
                finite(1)?;
                positive(2)
            }
            DistKind::Bernoulli => prob(0),
            DistKind::BernoulliLogits => finite(0),
            DistKind::Binomial => {
                count(0)?;
                prob(1)
            }
            DistKind::BinomialLogits => {
                count(0)?;
                finite(1)
            }
            DistKind::ZeroInflatedPoisson => {
                prob(0)?;
                positive(1)
            }
        }
    }

    /// Log density (continuous) or log mass (discrete) at `x`.
    ///
    /// Values outside the support give `-inf`; invalid parameters are an
    /// error.
    pub fn log_prob(self, params: &[f64], x: f64) -> Result<f64, DistError> {
        let mut scratch = [0.0; 3];
        self.log_prob_grad(params, x, &mut scratch[..params.len().min(3)]).map(|(lp, _)| lp)
    }

    /// Log density plus its partial derivatives.
    ///
    /// Writes `d lp / d param_i` into `dparams` and returns `(lp, d lp / dx)`.
    /// For discrete families `d lp / dx` is zero and count parameters of the
    /// binomial families are treated as constants.
    pub fn log_prob_grad(self, params: &[f64], x: f64, dparams: &mut [f64]) -> Result<(f64, f64), DistError> {
        self.check_params(params)?;
        for d in dparams.iter_mut() {
            *d = 0.0;
        }
        let neg_inf = Ok((f64::NEG_INFINITY, 0.0));
        if x.is_nan() {
            return Ok((f64::NAN, f64::NAN));
        }
        match self {
            DistKind::Normal => {
                let (mu, sigma) = (params[0], params[1]);
                let z = (x - mu) / sigma;
                dparams[0] = z / sigma;
                dparams[1] = (z * z - 1.0) / sigma;
                Ok((-LN_SQRT_2PI - sigma.ln() - 0.5 * z * z, -z / sigma))
            }
            DistKind::Exponential => {
                let rate = params[0];
                if x < 0.0 {
                    return neg_inf;
                }
                dparams[0] = 1.0 / rate - x;
                Ok((rate.ln() - rate * x, -rate))
            }
            DistKind::HalfNormal => {
                let s = params[0];
                if x < 0.0 {
                    return neg_inf;
                }
                let z = x / s;
                dparams[0] = (z * z - 1.0) / s;
                Ok((LN_SQRT_2_OVER_PI - s.ln() - 0.5 * z * z, -z / s))
            }
            DistKind::Gamma => {
                let (k, r) = (params[0], params[1]);
                if x <= 0.0 {
                    return neg_inf;
                }
                let lx = x.ln();
                dparams[0] = r.ln() - digamma(k) + lx;
                dparams[1] = k / r - x;
                Ok((k * r.ln() - ln_gamma(k) + (k - 1.0) * lx - r * x, (k - 1.0) / x - r))
            }
            DistKind::Beta => {
                let (a, b) = (params[0], params[1]);
                if x <= 0.0 || x >= 1.0 {
                    return neg_inf;
                }
                let (lx, l1x) = (x.ln(), (-x).ln_1p());
                let dab = digamma(a + b);
                dparams[0] = dab - digamma(a) + lx;
                dparams[1] = dab - digamma(b) + l1x;
                let lp = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * lx + (b - 1.0) * l1x;
                Ok((lp, (a - 1.0) / x - (b - 1.0) / (1.0 - x)))
            }
            DistKind::StudentT => {
                let (nu, mu, sigma) = (params[0], params[1], params[2]);
                let z = (x - mu) / sigma;
                let q = z * z / nu;
                let lp = ln_gamma(0.5 * (nu + 1.0))
                    - ln_gamma(0.5 * nu)
                    - 0.5 * (nu * std::f64::consts::PI).ln()
                    - sigma.ln()
                    - 0.5 * (nu + 1.0) * q.ln_1p();
                let dz = -(nu + 1.0) * z / (nu + z * z);
                dparams[0] = 0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu - 0.5 * q.ln_1p()
                    + 0.5 * (nu + 1.0) * q / (nu * (1.0 + q));
                dparams[1] = -dz / sigma;
                dparams[2] = -1.0 / sigma - dz * z / sigma;
                Ok((lp, dz / sigma))
            }
            DistKind::Bernoulli => {
                let p = params[0];
                if x == 1.0 {
                    dparams[0] = 1.0 / p;
                    Ok((p.ln(), 0.0))
                } else if x == 0.0 {
                    dparams[0] = -1.0 / (1.0 - p);
                    Ok(((-p).ln_1p(), 0.0))
                } else {
                    neg_inf
                }
            }
            DistKind::BernoulliLogits => {
                let l = params[0];
                if x != 0.0 && x != 1.0 {
                    return neg_inf;
                }
                dparams[0] = x - expit(l);
                Ok((x * l - softplus(l), 0.0))
            }
            DistKind::Binomial => {
                let (n, p) = (params[0], params[1]);
                if !is_count(x) || x > n {
                    return neg_inf;
                }
                let mut lp = ln_choose(n, x);
                if x > 0.0 {
                    lp += x * p.ln();
                    dparams[1] += x / p;
                }
                if n - x > 0.0 {
                    lp += (n - x) * (-p).ln_1p();
                    dparams[1] -= (n - x) / (1.0 - p);
                }
                Ok((lp, 0.0))
            }
            DistKind::BinomialLogits => {
                let (n, l) = (params[0], params[1]);
                if !is_count(x) || x > n {
                    return neg_inf;
                }
                dparams[1] = x - n * expit(l);
                Ok((ln_choose(n, x) + x * l - n * softplus(l), 0.0))
            }
            DistKind::Poisson => {
                let rate = params[0];
                if !is_count(x) {
                    return neg_inf;
                }
                dparams[0] = x / rate - 1.0;
                Ok((x * rate.ln() - rate - ln_gamma(x + 1.0), 0.0))
            }
            DistKind::ZeroInflatedPoisson => {
                let (g, rate) = (params[0], params[1]);
                if !is_count(x) {
                    return neg_inf;
                }
                if x == 0.0 {
                    let e = (-rate).exp();
                    let d = g + (1.0 - g) * e;
                    dparams[0] = (1.0 - e) / d;
                    dparams[1] = -(1.0 - g) * e / d;
                    Ok((d.ln(), 0.0))
                } else {
                    dparams[0] = -1.0 / (1.0 - g);
                    dparams[1] = x / rate - 1.0;
                    Ok(((-g).ln_1p() + x * rate.ln() - rate - ln_gamma(x + 1.0), 0.0))
                }
            }
        }
    }

    /// Draws one value.
    pub fn draw<R: Rng + ?Sized>(self, params: &[f64], rng: &mut R) -> Result<f64, DistError> {
        self.check_params(params)?;
        let v = match self {
            DistKind::Normal => params[0] + params[1] * standard_normal(rng),
            DistKind::Exponential => rand_distr::Exp::new(params[0]).map_err(|_| self.invalid(params, 0))?.sample(rng),
            DistKind::HalfNormal => (params[0] * standard_normal(rng)).abs(),
            DistKind::Gamma => {
                rand_distr::Gamma::new(params[0], 1.0 / params[1]).map_err(|_| self.invalid(params, 0))?.sample(rng)
            }
            DistKind::Beta => {
                rand_distr::Beta::new(params[0], params[1]).map_err(|_| self.invalid(params, 0))?.sample(rng)
            }
            DistKind::StudentT => {
                let t: f64 = rand_distr::StudentT::new(params[0]).map_err(|_| self.invalid(params, 0))?.sample(rng);
                params[1] + params[2] * t
            }
            DistKind::Bernoulli => bernoulli(params[0], rng),
            DistKind::BernoulliLogits => bernoulli(expit(params[0]), rng),
            DistKind::Binomial => binomial(params[0], params[1], rng),
            DistKind::BinomialLogits => binomial(params[0], expit(params[1]), rng),
            DistKind::Poisson => poisson(params[0], rng),
            DistKind::ZeroInflatedPoisson => {
                if rng.random::<f64>() < params[0] {
                    0.0
                } else {
                    poisson(params[1], rng)
                }
            }
        };
        Ok(v)
    }

    fn invalid(self, params: &[f64], i: usize) -> DistError {
        let spec = self.spec();
        DistError::InvalidParameter { dist: spec.name, param: spec.params[i], value: params[i] }
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn binomial<R: Rng + ?Sized>(n: f64, p: f64, rng: &mut R) -> f64 {
    match rand_distr::Binomial::new(n as u64, p) {
        Ok(d) => d.sample(rng) as f64,
        Err(_) => 0.0,
    }
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    match rand_distr::Poisson::new(rate) {
        Ok(d) => d.sample(rng),
        Err(_) => 0.0,
    }
}

/// Bijection between the real line and a continuous support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Transform {
    /// Real support.
    Identity,
    /// Positive support: `x = exp(u)`.
    Exp,
    /// Unit interval: `x = 1 / (1 + exp(-u))`.
    Logistic,
}

pub fn transform_for(support: Support) -> Result<Transform, DistError> {
    match support {
        Support::Real => Ok(Transform::Identity),
        Support::Positive => Ok(Transform::Exp),
        Support::UnitInterval => Ok(Transform::Logistic),
        s => Err(DistError::NoTransform(s)),
    }
}

impl Transform {
    pub fn forward(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Exp => u.exp(),
            Transform::Logistic => expit(u),
        }
    }

    pub fn inverse(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Exp => x.ln(),
            Transform::Logistic => (x / (1.0 - x)).ln(),
        }
    }

    /// `ln |d forward / du|`
    pub fn log_abs_det_jacobian(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Exp => u,
            Transform::Logistic => -softplus(-u) - softplus(u),
        }
    }

    /// Derivative of [`Transform::log_abs_det_jacobian`] with respect to `u`.
    pub fn d_log_abs_det_jacobian(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Exp => 1.0,
            Transform::Logistic => 1.0 - 2.0 * expit(u),
        }
    }

    /// `d forward / du`
    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Exp => u.exp(),
            Transform::Logistic => {
                let s = expit(u);
                s * (1.0 - s)
            }
        }
    }
}
