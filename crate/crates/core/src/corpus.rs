//! Reference model texts and synthetic data sets for them.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::compiler::{self, PlanMode};
use crate::data::{Column, DataTable};
use crate::distributions;
use crate::frontend::{parse_program, Expr, IndexTerm, ProgramAst, StmtKind};
use crate::Error;

/// One data table of a fixture: index columns and value columns.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub index: &'static [&'static str],
    pub columns: &'static [&'static str],
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusModel {
    pub name: &'static str,
    pub source: &'static str,
    /// Variables conditioned on in fixtures.
    pub obs: &'static [&'static str],
    pub layout: &'static [Layout],
    /// Fixed values of scalar parameters used to simulate fixture data.
    pub truth: &'static [(&'static str, f64)],
    /// Row count of layouts without index columns.
    pub rows: usize,
}

impl CorpusModel {
    pub fn ast(&self) -> ProgramAst {
        parse_program(self.source).expect("corpus models parse")
    }
}

pub const EXAMPLE1: CorpusModel = CorpusModel {
    name: "Example1",
    source: "ProgramName: Example1
b = 1
s ~ Exp(b)
x ~ N(0, 4*s)
",
    obs: &[],
    layout: &[],
    truth: &[],
    rows: 0,
};

pub const EXAMPLE2: CorpusModel = CorpusModel {
    name: "Example2",
    source: "ProgramName: Example2
Indices: t 0 4
x[t] ~ N(0,1)
",
    obs: &["x"],
    layout: &[Layout { index: &["t"], columns: &["x"] }],
    truth: &[],
    rows: 0,
};

pub const EXAMPLE3: CorpusModel = CorpusModel {
    name: "Example3",
    source: "ProgramName: Example3
Indices: n 0 4, t 0 9
s[n] ~ Exp(1)
x[n,t] ~ N(0, s[n])
",
    obs: &["x"],
    layout: &[Layout { index: &["n", "t"], columns: &["x"] }],
    truth: &[],
    rows: 0,
};

pub const EXAMPLE4: CorpusModel = CorpusModel {
    name: "Example4",
    source: "ProgramName: Example4
Indices: t 0 4
a ~ N(0,10)
s ~ Exp(1)
x[0] ~ N(0, s)
x[t] ~ N(a*x[t-1], s)
",
    obs: &["x"],
    layout: &[Layout { index: &["t"], columns: &["x"] }],
    truth: &[("a", 0.6), ("s", 1.0)],
    rows: 0,
};

/// The two-variable autoregression, with the lagged `x` read as `z` and the
/// coefficient `wxy` as `wzy` so that every name is defined.
pub const EXAMPLE5: CorpusModel = CorpusModel {
    name: "Example5",
    source: "ProgramName: Example5
Indices: t 0 19
wzz ~ N(0,10)
wyz ~ N(0,10)
wzy ~ N(0,10)
wyy ~ N(0,10)
bz ~ N(0,10)
by ~ N(0,10)
sz ~ Exp(1)
sy ~ Exp(1)
z[0] ~ N(0,10)
y[0] ~ N(0,10)
z[t] ~ N(wzz*z[t-1]+wyz*y[t-1]+bz,sz)
y[t] ~ N(wzy*z[t-1]+wyy*y[t-1]+by,sy)
",
    obs: &["z", "y"],
    layout: &[Layout { index: &["t"], columns: &["z", "y"] }],
    truth: &[
        ("wzz", 0.5),
        ("wyz", 0.2),
        ("wzy", -0.3),
        ("wyy", 0.4),
        ("bz", 0.1),
        ("by", -0.1),
        ("sz", 0.5),
        ("sy", 0.7),
    ],
    rows: 0,
};

pub const LINEAR_REGRESSION: CorpusModel = CorpusModel {
    name: "LinearRegression",
    source: "ProgramName: LinearRegression
Inputs: x
a ~ N(0, .2)
bM ~ N(0, .5)
sigma ~ Exp(1)
y ~ N(a + bM * x, sigma)
",
    obs: &["y"],
    layout: &[Layout { index: &[], columns: &["x", "y"] }],
    truth: &[("a", 0.1), ("bM", -0.4), ("sigma", 0.8)],
    rows: 50,
};

pub const BINOMIAL_LOGITS: CorpusModel = CorpusModel {
    name: "BinomialLogits",
    source: "ProgramName: BinomialLogits
Indices: j 0 47, i 0 47
Inputs: tank, D
a[j] ~ N(0,1.5)
S[i] ~ BinomialLogits(D[i], a[tank[i]])
",
    obs: &["S"],
    layout: &[Layout { index: &["i"], columns: &["tank", "D", "S"] }],
    truth: &[],
    rows: 0,
};

pub const MULTILEVEL_A: CorpusModel = CorpusModel {
    name: "MultiLevelA",
    source: "ProgramName: MultiLevelA
Indices: j 0 47, i 0 47
Inputs: tank, D
mu ~ N(0,1.5)
sigma ~ Exp(1)
a[j] ~ N(mu, sigma)
S[i] ~ BinomialLogits(D[i], a[tank[i]])
",
    obs: &["S"],
    layout: &[Layout { index: &["i"], columns: &["tank", "D", "S"] }],
    truth: &[("mu", 1.0), ("sigma", 1.2)],
    rows: 0,
};

pub const MULTILEVEL_B: CorpusModel = CorpusModel {
    name: "MultiLevelB",
    source: "ProgramName: MultiLevelB
Indices: j 0 6, k 0 5, l 0 3, i 0 503
Inputs: actor, block_id, treatment
a_bar ~ N(0,1.5)
sigma_a ~ Exp(1)
sigma_g ~ Exp(1)
sigma_b ~ Exp(1)
a[j] ~ N(a_bar, sigma_a)
g[k] ~ N(0, sigma_g)
b[l] ~ N(0, sigma_b)
logit_p[i] = a[actor[i]] + g[block_id[i]] + b[treatment[i]]
pulled_left[i] ~ BinomialLogits(1, logit_p[i])
",
    obs: &["pulled_left"],
    layout: &[Layout { index: &["i"], columns: &["actor", "block_id", "treatment", "pulled_left"] }],
    truth: &[("a_bar", 0.5), ("sigma_a", 1.5), ("sigma_g", 0.3), ("sigma_b", 0.5)],
    rows: 0,
};

pub const ZERO_INFLATED: CorpusModel = CorpusModel {
    name: "ZeroInflated",
    source: "ProgramName: ZeroInflated
Indices: n 0 199
ap ~ N(-1.5, 1)
al ~ N(1, 0.5)
y ~ ZeroInflatedPoisson(expit(ap), exp(al))
",
    obs: &["y"],
    layout: &[Layout { index: &["n"], columns: &["y"] }],
    truth: &[("ap", -1.5), ("al", 1.0)],
    rows: 0,
};

pub const AR2: CorpusModel = CorpusModel {
    name: "AR2",
    source: "ProgramName: AR2
Indices: t 0 141
a0 ~ N(0, 1)
a1 ~ N(0, 1)
a2 ~ N(0, 1)
s ~ HalfNormal(1)
y[0] ~ N(0, 1)
y[1] ~ N(0, 1)
y[t] ~ N(a0 + a1 * y[t-1] + a2 * y[t-2], s)
",
    obs: &["y"],
    layout: &[Layout { index: &["t"], columns: &["y"] }],
    truth: &[("a0", 0.1), ("a1", 0.5), ("a2", 0.2), ("s", 0.5)],
    rows: 0,
};

pub const AR1: CorpusModel = CorpusModel {
    name: "AR1",
    source: "ProgramName: AR1
Indices: t 0 299
a ~ N(0, 10)
b ~ N(0, 10)
sigma ~ HalfNormal(10)
y[0] ~ N(0, 10)
y[t] ~ N(a*y[t-1] + b, sigma)
",
    obs: &["y"],
    layout: &[Layout { index: &["t"], columns: &["y"] }],
    truth: &[("a", 0.9), ("b", 0.1), ("sigma", 0.5)],
    rows: 0,
};

const PLANNING_LAYOUT: &[Layout] = &[Layout { index: &["n", "t"], columns: &["EM", "IM", "P", "A", "C"] }];
const PLANNING_OBS: &[&str] = &["EM", "IM", "P", "A", "C"];

/// Posterior mean and standard deviation of each planning-model parameter,
/// used to draw generating parameters for synthetic case-study data.
pub const PLANNING_PARAMETERS: &[(&str, f64, f64)] = &[
    ("b_a", 0.00, 0.03),
    ("b_c", 0.00, 0.05),
    ("b_e", 0.01, 0.06),
    ("b_i", 0.01, 0.05),
    ("b_p", 0.00, 0.05),
    ("s_a", 0.66, 0.03),
    ("s_c", 0.92, 0.04),
    ("s_e", 0.99, 0.04),
    ("s_i", 0.94, 0.04),
    ("s_p", 0.93, 0.04),
    ("w_aa", 0.08, 0.04),
    ("w_ac", 0.06, 0.05),
    ("w_cc", 0.32, 0.06),
    ("w_ci", 0.15, 0.06),
    ("w_ee", 0.10, 0.06),
    ("w_ep", 0.11, 0.05),
    ("w_ii", 0.25, 0.06),
    ("w_ip", -0.03, 0.05),
    ("w_pa", 0.71, 0.04),
    ("w_pp", 0.26, 0.05),
];

/// Missingness rates of the planning variables.
pub const PLANNING_MISSINGNESS: &[(&str, f64)] = &[("C", 0.20), ("EM", 0.16), ("IM", 0.16), ("A", 0.02), ("P", 0.0)];

const PLANNING_TRUTH: &[(&str, f64)] = &[
    ("b_a", 0.00),
    ("b_c", 0.00),
    ("b_e", 0.01),
    ("b_i", 0.01),
    ("b_p", 0.00),
    ("s_a", 0.66),
    ("s_c", 0.92),
    ("s_e", 0.99),
    ("s_i", 0.94),
    ("s_p", 0.93),
    ("w_aa", 0.08),
    ("w_ac", 0.06),
    ("w_cc", 0.32),
    ("w_ci", 0.15),
    ("w_ee", 0.10),
    ("w_ep", 0.11),
    ("w_ii", 0.25),
    ("w_ip", -0.03),
    ("w_pa", 0.71),
    ("w_pp", 0.26),
];

pub const DBN: CorpusModel = CorpusModel {
    name: "DBN",
    source: "ProgramName: DBN
Indices: n 0 9, t 0 37
w_ee ~ N(0,10)
b_e ~ N(0,10)
w_ci ~ N(0,10)
w_ii ~ N(0,10)
b_i ~ N(0,10)
w_pp ~ N(0,10)
w_ep ~ N(0,10)
w_ip ~ N(0,10)
b_p ~ N(0,10)
w_pa ~ N(0,10)
w_aa ~ N(0,10)
b_a ~ N(0,10)
w_ac ~ N(0,10)
w_cc ~ N(0,10)
b_c ~ N(0,10)
s_e ~ Exp(1)
s_i ~ Exp(1)
s_a ~ Exp(1)
s_c ~ Exp(1)
s_p ~ Exp(1)
EM[n,0] ~ N(0,10)
IM[n,0] ~ N(0,10)
A[n,0] ~ N(0,10)
C[n,0] ~ N(0,10)
P[n,0] ~ N(0,10)
EM[n,t] ~ N(w_ee * EM[n,t-1] + b_e, s_e)
IM[n,t] ~ N(w_ci * C[n,t-1] + w_ii * IM[n,t-1] + b_i, s_i)
P[n,t] ~ N(w_pp * P[n,t-1] + w_ep * EM[n,t-1] + w_ip * IM[n,t-1]
          + b_p, s_p)
A[n,t] ~ N(w_pa * P[n,t] + w_aa * A[n,t-1] + b_a, s_a)
C[n,t] ~ N(w_ac * A[n,t-1] + w_cc * C[n,t-1] + b_c, s_c)
",
    obs: PLANNING_OBS,
    layout: PLANNING_LAYOUT,
    truth: PLANNING_TRUTH,
    rows: 0,
};

/// The planning DBN without the `w_ac` and `w_ip` links.
pub const DBN_SIMPLIFIED: CorpusModel = CorpusModel {
    name: "DBNSimplified",
    source: "ProgramName: DBNSimplified
Indices: n 0 9, t 0 37
w_ee ~ N(0,10)
b_e ~ N(0,10)
w_ci ~ N(0,10)
w_ii ~ N(0,10)
b_i ~ N(0,10)
w_pp ~ N(0,10)
w_ep ~ N(0,10)
b_p ~ N(0,10)
w_pa ~ N(0,10)
w_aa ~ N(0,10)
b_a ~ N(0,10)
w_cc ~ N(0,10)
b_c ~ N(0,10)
s_e ~ Exp(1)
s_i ~ Exp(1)
s_a ~ Exp(1)
s_c ~ Exp(1)
s_p ~ Exp(1)
EM[n,0] ~ N(0,10)
IM[n,0] ~ N(0,10)
A[n,0] ~ N(0,10)
C[n,0] ~ N(0,10)
P[n,0] ~ N(0,10)
EM[n,t] ~ N(w_ee * EM[n,t-1] + b_e, s_e)
IM[n,t] ~ N(w_ci * C[n,t-1] + w_ii * IM[n,t-1] + b_i, s_i)
P[n,t] ~ N(w_pp * P[n,t-1] + w_ep * EM[n,t-1] + b_p, s_p)
A[n,t] ~ N(w_pa * P[n,t] + w_aa * A[n,t-1] + b_a, s_a)
C[n,t] ~ N(w_cc * C[n,t-1] + b_c, s_c)
",
    obs: PLANNING_OBS,
    layout: PLANNING_LAYOUT,
    truth: PLANNING_TRUTH,
    rows: 0,
};

/// Independent first-order autoregressions of the planning variables.
pub const PLANNING_AR1: CorpusModel = CorpusModel {
    name: "PlanningAR1",
    source: "ProgramName: PlanningAR1
Indices: n 0 9, t 0 37
w_ee ~ N(0,10)
b_e ~ N(0,10)
w_ii ~ N(0,10)
b_i ~ N(0,10)
w_pp ~ N(0,10)
b_p ~ N(0,10)
w_aa ~ N(0,10)
b_a ~ N(0,10)
w_cc ~ N(0,10)
b_c ~ N(0,10)
s_e ~ Exp(1)
s_i ~ Exp(1)
s_a ~ Exp(1)
s_c ~ Exp(1)
s_p ~ Exp(1)
EM[n,0] ~ N(0,10)
IM[n,0] ~ N(0,10)
A[n,0] ~ N(0,10)
C[n,0] ~ N(0,10)
P[n,0] ~ N(0,10)
EM[n,t] ~ N(w_ee * EM[n,t-1] + b_e, s_e)
IM[n,t] ~ N(w_ii * IM[n,t-1] + b_i, s_i)
P[n,t] ~ N(w_pp * P[n,t-1] + b_p, s_p)
A[n,t] ~ N(w_aa * A[n,t-1] + b_a, s_a)
C[n,t] ~ N(w_cc * C[n,t-1] + b_c, s_c)
",
    obs: PLANNING_OBS,
    layout: PLANNING_LAYOUT,
    truth: PLANNING_TRUTH,
    rows: 0,
};

/// Benchmark models, the AR(1) model and the planning DBN.
pub fn example_corpus() -> [&'static CorpusModel; 8] {
    [&LINEAR_REGRESSION, &BINOMIAL_LOGITS, &MULTILEVEL_A, &MULTILEVEL_B, &ZERO_INFLATED, &AR2, &AR1, &DBN]
}

/// Introductory examples.
pub fn examples() -> [&'static CorpusModel; 5] {
    [&EXAMPLE1, &EXAMPLE2, &EXAMPLE3, &EXAMPLE4, &EXAMPLE5]
}

pub fn all() -> Vec<&'static CorpusModel> {
    let mut v: Vec<_> = examples().into_iter().chain(example_corpus()).collect();
    v.extend([&DBN_SIMPLIFIED, &PLANNING_AR1]);
    v
}

pub fn by_name(name: &str) -> Option<&'static CorpusModel> {
    all().into_iter().find(|m| m.name.eq_ignore_ascii_case(name))
}

/// Shrinks every declared index range to at most `max_extent` values.
pub fn cap_ranges(ast: &mut ProgramAst, max_extent: i64) {
    for d in &mut ast.indices {
        d.hi = d.hi.min(d.lo + max_extent - 1);
    }
}

/// Replaces the declared range of `index`.
pub fn set_range(ast: &mut ProgramAst, index: &str, lo: i64, hi: i64) {
    for d in &mut ast.indices {
        if d.name == index {
            d.lo = lo;
            d.hi = hi;
        }
    }
}

/// Turns unindexed stochastic statements named in `values` into constant
/// assignments.
pub fn fix_parameters(ast: &ProgramAst, values: &[(&str, f64)]) -> ProgramAst {
    let mut out = ast.clone();
    for s in &mut out.statements {
        if !s.lhs.index.is_empty() || !s.is_stochastic() {
            continue;
        }
        if let Some((_, v)) = values.iter().find(|(n, _)| *n == s.lhs.name) {
            s.kind = StmtKind::Assign(Expr::Const(*v));
        }
    }
    out
}

/// Draws generating parameters of the planning models.
pub fn planning_truth<R: Rng + ?Sized>(rng: &mut R) -> Vec<(&'static str, f64)> {
    PLANNING_PARAMETERS
        .iter()
        .map(|&(n, m, s)| {
            let v = Normal::new(m, s).expect("positive sd").sample(rng);
            (n, if n.starts_with("s_") { v.abs() } else { v })
        })
        .collect()
}

/// Sets `round(rate * rows)` cells of `column`, chosen uniformly, to NaN.
pub fn mask_mcar<R: Rng + ?Sized>(table: &mut DataTable, column: &str, rate: f64, rng: &mut R) {
    let Some(col) = table.column_mut(column) else { return };
    let n = col.values.len();
    let k = ((rate * n as f64).round() as usize).min(n);
    for i in sample_indices(rng, n, k) {
        col.values[i] = f64::NAN;
    }
}

fn declared_range(ast: &ProgramAst, name: &str) -> Option<(i64, i64)> {
    ast.indices.iter().find(|d| d.name == name).map(|d| (d.lo, d.hi))
}

/// Range of positions an input selects when used as `x[input[i]]`.
fn lookup_range(ast: &ProgramAst, input: &str) -> Option<(i64, i64)> {
    for s in &ast.statements {
        for r in std::iter::once(&s.lhs).chain(s.rhs_refs()) {
            for (k, term) in r.index.iter().enumerate() {
                let IndexTerm::Lookup { input: i, .. } = term else { continue };
                if i != input {
                    continue;
                }
                let owner = ast.statements.iter().find(|o| o.lhs.name == r.name)?;
                if let Some(IndexTerm::Var(d)) = owner.lhs.index.get(k) {
                    return declared_range(ast, d);
                }
            }
        }
    }
    None
}

fn is_trial_count(ast: &ProgramAst, input: &str) -> bool {
    ast.statements.iter().any(|s| match &s.kind {
        StmtKind::Sample(d) => {
            d.name.starts_with("Binomial") && matches!(d.params.first(), Some(Expr::Ref(r)) if r.name == input)
        }
        StmtKind::Assign(_) => false,
    })
}

fn cartesian(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut rows = vec![Vec::new()];
    for &(lo, hi) in ranges {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (lo..=hi).map(move |v| {
                    let mut r = r.clone();
                    r.push(v);
                    r
                })
            })
            .collect();
    }
    rows
}

/// Synthetic tables for `model` at the ranges declared in `ast`.
///
/// Inputs are drawn at random, scalar parameters are fixed to `truth` and
/// the observed columns are simulated from the model. Then `miss_rate` of
/// each continuous observed column is deleted at random.
pub fn synthetic_tables<R: Rng + ?Sized>(
    model: &CorpusModel,
    ast: &ProgramAst,
    truth: &[(&str, f64)],
    miss_rate: f64,
    rng: &mut R,
) -> Result<Vec<DataTable>, Error> {
    let mut tables = Vec::new();
    for (k, lay) in model.layout.iter().enumerate() {
        let rows = if lay.index.is_empty() {
            vec![Vec::new(); model.rows]
        } else {
            let ranges: Vec<(i64, i64)> = lay
                .index
                .iter()
                .map(|n| declared_range(ast, n).ok_or_else(|| Error::Simulation(format!("index {n} is not declared"))))
                .collect::<Result<_, _>>()?;
            cartesian(&ranges)
        };
        let n = rows.len();
        let mut columns = Vec::new();
        for &c in lay.columns {
            if ast.inputs.iter().any(|i| i == c) {
                let range = lookup_range(ast, c);
                let count = is_trial_count(ast, c);
                columns.push(if let Some((lo, hi)) = range {
                    Column::integer(c, (0..n).map(|_| rng.random_range(lo..=hi) as f64).collect())
                } else if count {
                    Column::integer(c, (0..n).map(|_| rng.random_range(5..=35) as f64).collect())
                } else {
                    let z = Normal::new(0.0, 1.0).expect("unit normal");
                    Column::float(c, (0..n).map(|_| z.sample(rng)).collect())
                });
            } else {
                columns.push(Column::float(c, vec![f64::NAN; n]));
            }
        }
        let names = lay.index.iter().map(|s| s.to_string()).collect();
        tables.push(DataTable::new(format!("{}_{k}", model.name), names, rows, columns)?);
    }

    // Simulate with parameters held fixed and every data column latent.
    let obs: Vec<&str> = model.obs.to_vec();
    let fixed = fix_parameters(ast, truth);
    let (lifted, lifted_tables) = compiler::lift(&fixed, &obs, &tables)?;
    let sim_model = compiler::compile(&lifted, &[], &lifted_tables, PlanMode::Unrolled)?;
    let sims = compiler::prior_simulate(&sim_model, rng, 1)?;

    for (t, lt) in tables.iter_mut().zip(&lifted_tables) {
        let index_rows = lt.index_rows().to_vec();
        for &v in &obs {
            let Some(sim) = sims.iter().find(|s| s.has_column(v)) else { continue };
            let Some(col) = t.column_mut(v) else { continue };
            for (r, tuple) in index_rows.iter().enumerate() {
                let mut key = vec![0];
                key.extend(tuple);
                col.values[r] = sim.get(v, &key).unwrap_or(f64::NAN);
            }
            let discrete = lifted
                .statements
                .iter()
                .filter(|s| s.lhs.name == v)
                .any(|s| matches!(&s.kind, StmtKind::Sample(d) if distributions::lookup(&d.name).is_some_and(|d| d.is_discrete())));
            if discrete {
                *col = Column::integer(v, std::mem::take(&mut col.values));
            } else if miss_rate > 0.0 {
                mask_mcar(t, v, miss_rate, rng);
            }
        }
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_model_parses_and_validates() {
        for m in all() {
            let ast = m.ast();
            assert_eq!(ast.name, m.name);
            assert!(validate(&ast).is_empty(), "{}: {:?}", m.name, validate(&ast));
        }
    }

    #[test]
    fn fixtures_compile_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in all() {
            let mut ast = m.ast();
            cap_ranges(&mut ast, 12);
            let tables = synthetic_tables(m, &ast, m.truth, 0.2, &mut rng).unwrap();
            for mode in [PlanMode::Unrolled, PlanMode::Fused] {
                let c = compiler::compile(&ast, m.obs, &tables, mode);
                assert!(c.is_ok(), "{} {mode}: {:?}", m.name, c.err());
            }
        }
    }

    #[test]
    fn mcar_deletes_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ast = AR1.ast();
        let mut t = synthetic_tables(&AR1, &ast, AR1.truth, 0.0, &mut rng).unwrap().remove(0);
        assert_eq!(t.column("y").unwrap().missing_count(), 0);
        mask_mcar(&mut t, "y", 0.2, &mut rng);
        assert_eq!(t.column("y").unwrap().missing_count(), 60);
    }

    #[test]
    fn fixed_parameters_drive_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ast = AR1.ast();
        let t = synthetic_tables(&AR1, &ast, AR1.truth, 0.0, &mut rng).unwrap().remove(0);
        let y = &t.column("y").unwrap().values;
        let m = y[50..].iter().sum::<f64>() / 250.0;
        // Stationary mean b / (1 - a) = 1.
        assert!((m - 1.0).abs() < 0.8, "{m}");
    }
}
