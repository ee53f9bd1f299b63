//! Scalar time functions: finite sums of `c`, `c·sin(ωt)`, `c·cos(ωt)` and
//! `c·e^{-ρt}`.
//!
//! The restricted form is what makes interval bounds trustworthy: every term has
//! a closed-form derivative bound, so a grid minimum minus `Lip·h/2` is a true
//! lower bound.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Const,
    Sin,
    Cos,
    /// `coef · exp(-rate · t)`
    Decay,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub shape: Shape,
    pub coef: f64,
    /// Angular frequency for `sin`/`cos`, decay rate for `decay`.
    #[serde(default)]
    pub rate: f64,
}

impl Term {
    fn eval(&self, t: f64) -> f64 {
        match self.shape {
            Shape::Const => self.coef,
            Shape::Sin => self.coef * (self.rate * t).sin(),
            Shape::Cos => self.coef * (self.rate * t).cos(),
            Shape::Decay => self.coef * (-self.rate * t).exp(),
        }
    }

    /// Bound on |d/dt term| over [a, b].
    fn lipschitz(&self, a: f64, b: f64) -> f64 {
        match self.shape {
            Shape::Const => 0.0,
            Shape::Sin | Shape::Cos => (self.coef * self.rate).abs(),
            Shape::Decay => {
                let worst = if self.rate >= 0.0 { a } else { b };
                (self.coef * self.rate).abs() * (-self.rate * worst).exp()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Repr", into = "Repr")]
pub struct TimeFn {
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Scalar(f64),
    Terms(Vec<Term>),
}

impl From<Repr> for TimeFn {
    fn from(r: Repr) -> Self {
        match r {
            Repr::Scalar(c) => TimeFn::constant(c),
            Repr::Terms(terms) => TimeFn::new(terms),
        }
    }
}

impl From<TimeFn> for Repr {
    fn from(f: TimeFn) -> Self {
        match f.as_constant() {
            Some(c) => Repr::Scalar(c),
            None => Repr::Terms(f.terms),
        }
    }
}

impl From<f64> for TimeFn {
    fn from(c: f64) -> Self {
        TimeFn::constant(c)
    }
}

/// Certified enclosure of a time function over an interval, together with the
/// sampled extremes that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
    pub sampled_min: f64,
    pub argmin: f64,
    pub sampled_max: f64,
    pub argmax: f64,
}

/// Outcome of a sign question about a time function on an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    Certified,
    /// A time at which the claimed inequality fails.
    Refuted(f64),
    Undecided,
}

const MAX_REFINE: usize = 1 << 16;

impl TimeFn {
    /// Merges terms of equal shape and rate and drops zero coefficients.
    pub fn new(terms: Vec<Term>) -> Self {
        let mut merged: Vec<Term> = Vec::new();
        for t in terms {
            let rate = if t.shape == Shape::Const { 0.0 } else { t.rate };
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.shape == t.shape && m.rate == rate)
            {
                m.coef += t.coef;
            } else {
                merged.push(Term { shape: t.shape, coef: t.coef, rate });
            }
        }
        merged.retain(|t| t.coef != 0.0);
        TimeFn { terms: merged }
    }

    pub fn constant(c: f64) -> Self {
        TimeFn::new(vec![Term { shape: Shape::Const, coef: c, rate: 0.0 }])
    }

    pub fn zero() -> Self {
        TimeFn { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// Identically zero (decided exactly from the merged term list).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.shape == Shape::Const => Some(t.coef),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn add(&self, other: &TimeFn) -> TimeFn {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        TimeFn::new(terms)
    }

    pub fn scale(&self, s: f64) -> TimeFn {
        TimeFn::new(
            self.terms
                .iter()
                .map(|t| Term { coef: t.coef * s, ..*t })
                .collect(),
        )
    }

    pub fn lipschitz(&self, a: f64, b: f64) -> f64 {
        self.terms.iter().map(|t| t.lipschitz(a, b)).sum()
    }

    /// Enclosure on [a, b] using `points` equispaced samples.
    pub fn enclose_with(&self, a: f64, b: f64, points: usize) -> Enclosure {
        if let Some(c) = self.as_constant() {
            return Enclosure { lo: c, hi: c, sampled_min: c, argmin: a, sampled_max: c, argmax: a };
        }
        let points = points.max(2);
        let h = if b > a { (b - a) / (points - 1) as f64 } else { 0.0 };
        let (mut mn, mut amn, mut mx, mut amx) = (f64::INFINITY, a, f64::NEG_INFINITY, a);
        for i in 0..points {
            let t = if i + 1 == points { b } else { a + i as f64 * h };
            let v = self.eval(t);
            if v < mn {
                mn = v;
                amn = t;
            }
            if v > mx {
                mx = v;
                amx = t;
            }
        }
        let slack = self.lipschitz(a, b) * h / 2.0;
        Enclosure { lo: mn - slack, hi: mx + slack, sampled_min: mn, argmin: amn, sampled_max: mx, argmax: amx }
    }

    pub fn enclose(&self, a: f64, b: f64) -> Enclosure {
        self.enclose_with(a, b, 257)
    }

    /// Decides `inf_{[a,b]} f > thresh` (strict) or `>= thresh` (non-strict).
    pub fn decide_inf_above(&self, a: f64, b: f64, thresh: f64, strict: bool) -> Decision {
        let mut pts = 257;
        loop {
            let e = self.enclose_with(a, b, pts);
            let fails = if strict { e.sampled_min <= thresh } else { e.sampled_min < thresh };
            if fails {
                return Decision::Refuted(e.argmin);
            }
            let holds = if strict { e.lo > thresh } else { e.lo >= thresh };
            if holds {
                return Decision::Certified;
            }
            if pts >= MAX_REFINE {
                return Decision::Undecided;
            }
            pts = pts * 4 - 3;
        }
    }

    /// Decides `sup_{[a,b]} f < thresh` (strict) or `<= thresh` (non-strict).
    pub fn decide_sup_below(&self, a: f64, b: f64, thresh: f64, strict: bool) -> Decision {
        self.scale(-1.0).decide_inf_above(a, b, -thresh, strict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_merge_and_decide_exactly() {
        let f = TimeFn::new(vec![
            Term { shape: Shape::Const, coef: 1.0, rate: 3.0 },
            Term { shape: Shape::Const, coef: -1.0, rate: 0.0 },
        ]);
        assert!(f.is_zero());
        let g = TimeFn::constant(2.0);
        assert_eq!(g.decide_inf_above(0.0, 1.0, 0.0, true), Decision::Certified);
        assert_eq!(g.decide_inf_above(0.0, 1.0, 2.0, true), Decision::Refuted(0.0));
    }

    #[test]
    fn enclosure_contains_dense_samples() {
        let f = TimeFn::new(vec![
            Term { shape: Shape::Const, coef: 0.3, rate: 0.0 },
            Term { shape: Shape::Sin, coef: 1.0, rate: 7.0 },
            Term { shape: Shape::Decay, coef: 0.5, rate: 2.0 },
        ]);
        let e = f.enclose_with(0.0, 2.0, 33);
        for i in 0..=20_000 {
            let v = f.eval(2.0 * i as f64 / 20_000.0);
            assert!(v >= e.lo - 1e-12 && v <= e.hi + 1e-12);
        }
    }

    #[test]
    fn sign_of_shifted_sine() {
        // 1.1 + sin t > 0 everywhere; 0.9 + sin t dips below 0 near t = 3π/2.
        let pos = TimeFn::new(vec![
            Term { shape: Shape::Const, coef: 1.1, rate: 0.0 },
            Term { shape: Shape::Sin, coef: 1.0, rate: 1.0 },
        ]);
        assert_eq!(pos.decide_inf_above(0.0, 7.0, 0.0, true), Decision::Certified);
        let neg = pos.add(&TimeFn::constant(-0.2));
        match neg.decide_inf_above(0.0, 7.0, 0.0, true) {
            Decision::Refuted(t) => assert!(neg.eval(t) <= 0.0),
            d => panic!("expected refutation, got {d:?}"),
        }
    }

    #[test]
    fn serde_accepts_scalars_and_term_lists() {
        let f: TimeFn = serde_json::from_str("2.5").unwrap();
        assert_eq!(f.as_constant(), Some(2.5));
        let g: TimeFn =
            serde_json::from_str(r#"[{"shape":"const","coef":1},{"shape":"cos","coef":0.5,"rate":2}]"#).unwrap();
        assert!((g.eval(0.0) - 1.5).abs() < 1e-15);
    }
}
