//! A probabilistic modeling language for longitudinal data.
//!
//! Model text is parsed and validated ([`frontend`]), turned into a symbolic
//! dependency graph ([`graph`]), bound to data and lowered into an executable
//! log-density plan ([`compiler`]), differentiated in reverse mode
//! ([`autodiff`]) and sampled with NUTS ([`sampler`]). Posterior draws are
//! summarized and scored by [`analysis`].
//!
//! ```
//! use ldm_core::{compiler, frontend};
//!
//! let src = "ProgramName: Demo\nmu ~ N(0, 10)\nsigma ~ Exp(1)\n";
//! let ast = frontend::parse_program(src).unwrap();
//! assert!(frontend::validate(&ast).is_empty());
//! let model = compiler::compile(&ast, &[], &[], compiler::PlanMode::Fused).unwrap();
//! assert_eq!(model.plan.latent_dim(), 2);
//! ```

pub mod analysis;
pub mod autodiff;
pub mod compiler;
pub mod corpus;
pub mod data;
pub mod distributions;
pub mod frontend;
pub mod graph;
pub mod sampler;

mod error;

pub use error::Error;
