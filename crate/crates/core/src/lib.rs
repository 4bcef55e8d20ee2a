//! Numerics for commuting operator tuples associated with the tetrablock and
//! the Γ_{E(3;3;1,1,1)}, Γ_{E(3;2;1,2)} domains: structured μ, fundamental
//! operators, characteristic functions and truncated functional models.

pub mod charfun;
pub mod contraction;
pub mod counterexamples;
pub mod error;
pub mod fundamental;
pub mod kind;
pub mod matrixcore;
pub mod models;
pub mod mu;
pub mod tuples;

pub use charfun::{search_coincidence, theta_coeffs, theta_eval, verify_coincidence, CoincidencePair, OperatorSeries};
pub use contraction::{analyze_contraction, asymptotic, canonical_decomposition, AsymptoticData, ContractionData};
pub use counterexamples::{build_talpha, run_counterexample, CounterexampleReport, TalphaInstance};
pub use error::{GmlError, Result};
pub use fundamental::{check_identity, check_pencil_commutativity, solve_fundamental, FundamentalSet, IdentityReport};
pub use kind::Kind;
pub use matrixcore::{CMatrix, MatrixJson, Subspace, Tolerances, C64};
pub use models::{build_cnu_model, build_pure_model, check_lemma_3_1, embed_w, ModelReport};
pub use mu::{mu, mu_for_kind, sample_domain, DomainPoint, ScalingSubspace};
pub use tuples::{verify_tuple, GammaTuple, TupleJson, TupleVerdict};
