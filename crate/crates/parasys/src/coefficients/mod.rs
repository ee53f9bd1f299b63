//! Coefficient models, exact power-law families and hypothesis checks.

mod checks;
mod model;
mod polynomial;
mod profile;
mod report;
mod sampling;
mod exponents;
mod timefn;

pub use checks::{
    check_compactness_conditions, check_irreducibility, check_lyapunov, check_structural_hypotheses, fit_decay_profile,
    Irreducibility, LyapunovMode, PowerLaw, C_GRID, VANISHING,
};
pub(crate) use checks::{analyse_row_sum, max_sym_eigenvalue, min_eigenvalue};
pub use model::{
    eval_on_diagonal, eval_operator, eval_scalar_part, growing_coupling_admissible, growing_coupling_inadmissible,
    AffineModel, CoefficientModel, CouplingGrowth, FnModel, ScalarPart,
};
pub(crate) use model::Coeffs;
pub use polynomial::{build_polynomial_model, Exponent, PolynomialModel, PolynomialSpec};
pub use profile::{replicate, Profile, ScalarField, VectorField};
pub use report::{Constants, HypothesisReport, Status, Verdict, Witness};
pub use sampling::{SampleBox, Samples, OUTER_SHELL};
pub use exponents::check_power_law_conditions;
pub use timefn::{Decision, Enclosure, Shape, Term, TimeFn};
