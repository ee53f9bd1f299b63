//! Hypothesis checking on the two four-component couplings: one admissible
//! (nonnegative off-diagonal part, row sums ≤ 0), one whose last row sums to +1.
//!
//! ```text
//! cargo run --example check_hypotheses
//! ```

use parasys::coefficients::{
    check_irreducibility, check_power_law_conditions, check_structural_hypotheses, AffineModel, CouplingGrowth, Exponent,
    PolynomialSpec, SampleBox, Samples,
};

fn main() -> parasys::error::Result<()> {
    let samples = Samples::new(&SampleBox::cube(1, 4.0), &[0.0], 400, 0)?;
    let matrices = [
        ("admissible", [[-4.0, 1.0, 2.0, 1.0], [1.0, -3.0, 1.0, 0.0], [0.0, 1.0, -1.0, 0.0], [0.0, 2.0, 0.0, -2.0]]),
        ("positive last row", [[-4.0, 0.0, 2.0, 1.0], [0.0, -3.0, 1.0, 0.0], [0.0, 1.0, -1.0, 0.0], [1.0, 2.0, 0.0, -2.0]]),
    ];
    for (name, c) in matrices {
        let model = AffineModel {
            d: 1,
            m: 4,
            q: 1.0,
            gamma: 1.0,
            coupling: c.iter().map(|r| r.to_vec()).collect(),
            growth: CouplingGrowth::AbsPlusOne,
        };
        let rep = check_structural_hypotheses(&model, &samples)?;
        println!("== {name}");
        for key in ["coupling_offdiag_nonnegative", "row_sums_nonpositive"] {
            let v = rep.get(key).unwrap();
            println!("  {key:<30} {:?} {}", v.status, serde_json::to_string(&v.witnesses.first()).unwrap());
        }
        println!("  irreducible: {}", check_irreducibility(&model, &samples).irreducible);
    }

    // exact rational exponent comparisons for a power-law family
    let spec = PolynomialSpec::uncoupled_ou(1, 2)
        .with_ell(Exponent::int(2))
        .with_sigma(vec![vec![Exponent::new(1, 2), Exponent::new(1, 4)], vec![Exponent::new(1, 4), Exponent::new(1, 2)]])
        .with_dmat(vec![vec![-2.0, 1.0], vec![1.0, -2.0]]);
    println!("== power law");
    for (k, v) in &check_power_law_conditions(&spec).verdicts {
        println!("  {k:<30} {:?}", v.status);
    }
    Ok(())
}
