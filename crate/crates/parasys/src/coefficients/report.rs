use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Decided exactly (growth orders, rational exponents, certified time bounds).
    Certified,
    /// A sample point violates the inequality.
    Refuted,
    SampledPass,
    SampledFail,
}

impl Status {
    pub fn passed(self) -> bool {
        matches!(self, Status::Certified | Status::SampledPass)
    }
}

/// A point where an inequality is tightest or violated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: Option<f64>,
    pub x: Option<Vec<f64>>,
    /// Component / matrix indices involved, if any.
    pub indices: Vec<usize>,
    pub value: f64,
}

impl Witness {
    pub fn at(t: f64, x: &[f64], indices: &[usize], value: f64) -> Self {
        Witness { t: Some(t), x: Some(x.to_vec()), indices: indices.to_vec(), value }
    }
    pub fn indices(indices: &[usize], value: f64) -> Self {
        Witness { t: None, x: None, indices: indices.to_vec(), value }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    /// The statistic the verdict was decided on (min eigenvalue, max row sum, …).
    pub value: Option<f64>,
    pub witnesses: Vec<Witness>,
    pub detail: String,
}

impl Verdict {
    pub fn new(status: Status, value: Option<f64>, detail: impl Into<String>) -> Self {
        Verdict { status, value, witnesses: Vec::new(), detail: detail.into() }
    }
    pub fn with_witness(mut self, w: Witness) -> Self {
        self.witnesses.push(w);
        self
    }
}

/// Constants extracted while checking hypotheses. Absent constants serialise
/// as `null` so the key set is stable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub mu0: Option<Vec<f64>>,
    #[serde(rename = "lambdaJ")]
    pub lambda_j: Option<f64>,
    pub a: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "deltaJ")]
    pub delta_j: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub gamma_ab: Option<f64>,
    #[serde(rename = "sigma_kJ")]
    pub sigma_kj: Option<Vec<f64>>,
    pub c0: Option<f64>,
}

impl Constants {
    fn merge(&mut self, o: &Constants) {
        macro_rules! take {
            ($($f:ident),*) => { $( if o.$f.is_some() { self.$f = o.$f.clone(); } )* };
        }
        take!(mu0, lambda_j, a, c, delta_j, nu, gamma_ab, sigma_kj, c0);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub verdicts: BTreeMap<String, Verdict>,
    pub constants: Constants,
}

impl HypothesisReport {
    pub fn insert(&mut self, name: &str, v: Verdict) {
        self.verdicts.insert(name.to_string(), v);
    }

    pub fn get(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.get(name)
    }

    pub fn passed(&self, name: &str) -> bool {
        self.get(name).is_some_and(|v| v.status.passed())
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.values().all(|v| v.status.passed())
    }

    /// Names of verdicts in `required` that did not pass (missing ones included).
    pub fn failures<'a>(&self, required: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        required.into_iter().filter(|n| !self.passed(n)).map(str::to_string).collect()
    }

    pub fn merge(&mut self, other: &HypothesisReport) {
        for (k, v) in &other.verdicts {
            self.verdicts.insert(k.clone(), v.clone());
        }
        self.constants.merge(&other.constants);
    }
}
