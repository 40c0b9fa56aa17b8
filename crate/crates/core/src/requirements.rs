//! Quadrant requirements `P(A) ≥ p`, requirement sets, generalized
//! step-function requirements `∫ g dμ ≥ p`, and the verdict engine.
//!
//! Probabilities are computed per mixture component on the most exact path
//! available: indicator counting for point masses and empirical components,
//! closed-form Φ arithmetic for Gaussians on one direction or on
//! axis-aligned boxes with diagonal covariance, and Monte Carlo otherwise.
//! Monte Carlo results carry a standard error, and verdicts built on them
//! can come out `Inconclusive`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, dot, FiniteMixtureMeasure, MeasureComponent, WEIGHT_TOL};
use crate::normal;
use crate::quadrants::Quadrant;
use crate::seed;

/// Slack allowed on exact and analytic verdicts.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RequirementWire", into = "RequirementWire")]
pub struct QuadrantRequirement {
    quadrant: Quadrant,
    floor: f64,
}

#[derive(Serialize, Deserialize)]
struct RequirementWire {
    quadrant: Quadrant,
    floor: f64,
}

impl TryFrom<RequirementWire> for QuadrantRequirement {
    type Error = Error;
    fn try_from(w: RequirementWire) -> Result<Self> {
        Self::new(w.quadrant, w.floor)
    }
}

impl From<QuadrantRequirement> for RequirementWire {
    fn from(r: QuadrantRequirement) -> Self {
        Self {
            quadrant: r.quadrant,
            floor: r.floor,
        }
    }
}

impl QuadrantRequirement {
    pub fn new(quadrant: Quadrant, floor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::ProbabilityOutOfRange(floor));
        }
        Ok(Self { quadrant, floor })
    }

    pub fn quadrant(&self) -> &Quadrant {
        &self.quadrant
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Finite family of requirements with total floor at most one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SetWire", into = "SetWire")]
pub struct RequirementSet {
    requirements: Vec<QuadrantRequirement>,
}

#[derive(Serialize, Deserialize)]
struct SetWire {
    requirements: Vec<QuadrantRequirement>,
}

impl TryFrom<SetWire> for RequirementSet {
    type Error = Error;
    fn try_from(w: SetWire) -> Result<Self> {
        Self::new(w.requirements)
    }
}

impl From<RequirementSet> for SetWire {
    fn from(s: RequirementSet) -> Self {
        Self {
            requirements: s.requirements,
        }
    }
}

impl RequirementSet {
    pub fn new(requirements: Vec<QuadrantRequirement>) -> Result<Self> {
        if let Some(first) = requirements.first() {
            let n = first.quadrant.dim();
            for r in &requirements {
                check_dim(n, r.quadrant.dim())?;
            }
        }
        let total: f64 = requirements.iter().map(|r| r.floor).sum();
        if total > 1.0 + WEIGHT_TOL {
            return Err(Error::TotalProbabilityExceeded(total));
        }
        Ok(Self { requirements })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn requirements(&self) -> &[QuadrantRequirement] {
        &self.requirements
    }

    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    /// `p_Q = Σ floors`.
    pub fn total_floor(&self) -> f64 {
        self.requirements.iter().map(|r| r.floor).sum()
    }

    pub fn dim(&self) -> Option<usize> {
        self.requirements.first().map(|r| r.quadrant.dim())
    }
}

/// `∫ Σ_k c_k χ_{A_k} dμ ≥ threshold`. Overlapping quadrants are summed
/// term by term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneralizedWire", into = "GeneralizedWire")]
pub struct GeneralizedRequirement {
    terms: Vec<(f64, Quadrant)>,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    coef: f64,
    quadrant: Quadrant,
}

#[derive(Serialize, Deserialize)]
struct GeneralizedWire {
    terms: Vec<TermWire>,
    threshold: f64,
}

impl TryFrom<GeneralizedWire> for GeneralizedRequirement {
    type Error = Error;
    fn try_from(w: GeneralizedWire) -> Result<Self> {
        Self::new(w.terms.into_iter().map(|t| (t.coef, t.quadrant)).collect(), w.threshold)
    }
}

impl From<GeneralizedRequirement> for GeneralizedWire {
    fn from(g: GeneralizedRequirement) -> Self {
        Self {
            terms: g
                .terms
                .into_iter()
                .map(|(coef, quadrant)| TermWire { coef, quadrant })
                .collect(),
            threshold: g.threshold,
        }
    }
}

impl GeneralizedRequirement {
    pub fn new(terms: Vec<(f64, Quadrant)>, threshold: f64) -> Result<Self> {
        let n = terms.first().ok_or(Error::NoTerms)?.1.dim();
        for (c, q) in &terms {
            if !c.is_finite() {
                return Err(Error::InvalidWeight(*c));
            }
            check_dim(n, q.dim())?;
        }
        Ok(Self { terms, threshold })
    }

    /// `g = χ_A` with threshold `p`.
    pub fn indicator(req: &QuadrantRequirement) -> Self {
        Self {
            terms: vec![(1.0, req.quadrant.clone())],
            threshold: req.floor,
        }
    }

    pub fn terms(&self) -> &[(f64, Quadrant)] {
        &self.terms
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Exact,
    AnalyticGaussian,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Method {
    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, Method::MonteCarlo { .. })
    }

    fn combine(self, other: Method) -> Method {
        match (self, other) {
            (m @ Method::MonteCarlo { .. }, _) | (_, m @ Method::MonteCarlo { .. }) => m,
            (Method::AnalyticGaussian, _) | (_, Method::AnalyticGaussian) => Method::AnalyticGaussian,
            _ => Method::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub stderr: f64,
    #[serde(flatten)]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckPolicy {
    /// Confidence multiplier applied to Monte Carlo standard errors.
    pub z: f64,
    /// Monte Carlo sample count per component that needs sampling.
    pub budget: usize,
    pub seed: u64,
}

impl Default for CheckPolicy {
    fn default() -> Self {
        Self {
            z: 3.0,
            budget: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    AllSatisfied,
    SomeViolated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequirementCheck {
    #[serde(flatten)]
    pub estimate: ProbabilityEstimate,
    pub floor: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetReport {
    pub requirements: Vec<RequirementCheck>,
    pub overall: Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedReport {
    #[serde(flatten)]
    pub estimate: ProbabilityEstimate,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// `P(A_Q)` for a probability measure.
pub fn quadrant_probability(
    p: &FiniteMixtureMeasure,
    q: &Quadrant,
    budget: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    p.require_probability()?;
    let mut est = measure_of(p, q, budget, seed)?;
    est.value = est.value.clamp(0.0, 1.0);
    Ok(est)
}

/// `μ(A)` for a possibly signed mixture, component by component.
pub fn measure_of(
    mu: &FiniteMixtureMeasure,
    q: &Quadrant,
    budget: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    check_dim(q.dim(), mu.dim())?;
    let mut value = 0.0;
    let mut var = 0.0;
    let mut method = Method::Exact;
    for (k, (w, c)) in mu.components().iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let est = component_probability(c, q, budget, seed::derive_indexed(seed, k as u64));
        value += w * est.value;
        var += (w * est.stderr).powi(2);
        method = method.combine(if est.method.is_monte_carlo() {
            Method::MonteCarlo { samples: budget, seed }
        } else {
            est.method
        });
    }
    Ok(ProbabilityEstimate {
        value,
        stderr: var.sqrt(),
        method,
    })
}

/// Probability of `q` under a single component.
pub fn component_probability(
    c: &MeasureComponent,
    q: &Quadrant,
    budget: usize,
    seed: u64,
) -> ProbabilityEstimate {
    let exact = |value: f64, method: Method| ProbabilityEstimate {
        value,
        stderr: 0.0,
        method,
    };
    match c {
        MeasureComponent::PointMass(x) => {
            exact(if q.contains_unchecked(x) { 1.0 } else { 0.0 }, Method::Exact)
        }
        MeasureComponent::Empirical(e) => {
            let inside = e.points().iter().filter(|x| q.contains_unchecked(x)).count();
            exact(inside as f64 / e.points().len() as f64, Method::Exact)
        }
        MeasureComponent::Gaussian(g) => {
            if let Some((u, lo, hi)) = q.collinear_interval() {
                let sd = g.variance_along(&u).sqrt();
                let m = dot(&u, g.mean());
                return exact(normal::interval_prob(lo, hi, m, sd), Method::AnalyticGaussian);
            }
            if g.is_diagonal() {
                if let Some(bounds) = q.axis_bounds() {
                    let cov = g.cov();
                    let value = bounds
                        .iter()
                        .enumerate()
                        .map(|(j, &(lo, hi))| {
                            normal::interval_prob(lo, hi, g.mean()[j], cov[(j, j)].sqrt())
                        })
                        .product();
                    return exact(value, Method::AnalyticGaussian);
                }
            }
            if g.min_eigenvalue() > 0.0 && !q.is_nondegenerate() {
                return exact(0.0, Method::AnalyticGaussian);
            }
            let n = budget.max(1);
            let hits = c.count_samples(n, seed, |x| q.contains_unchecked(x));
            let p = hits as f64 / n as f64;
            ProbabilityEstimate {
                value: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
                method: Method::MonteCarlo { samples: n, seed },
            }
        }
    }
}

/// Plain Monte Carlo estimate of `P(A_Q)` from `budget` draws of the whole
/// mixture, ignoring any exact path.
pub fn monte_carlo_probability(
    p: &FiniteMixtureMeasure,
    q: &Quadrant,
    budget: usize,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    check_dim(q.dim(), p.dim())?;
    let n = budget.max(1);
    let hits = p
        .sample(n, seed)?
        .iter()
        .filter(|x| q.contains_unchecked(x))
        .count();
    let v = hits as f64 / n as f64;
    Ok(ProbabilityEstimate {
        value: v,
        stderr: (v * (1.0 - v) / n as f64).sqrt(),
        method: Method::MonteCarlo { samples: n, seed },
    })
}

fn verdict(est: &ProbabilityEstimate, floor: f64, z: f64) -> Verdict {
    if est.method.is_monte_carlo() {
        if est.value - z * est.stderr >= floor {
            Verdict::Satisfied
        } else if est.value + z * est.stderr < floor {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    } else if est.value >= floor - EXACT_TOL {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

pub fn check_requirement(
    p: &FiniteMixtureMeasure,
    r: &QuadrantRequirement,
    policy: &CheckPolicy,
) -> Result<RequirementCheck> {
    let estimate = quadrant_probability(p, &r.quadrant, policy.budget, policy.seed)?;
    Ok(RequirementCheck {
        verdict: verdict(&estimate, r.floor, policy.z),
        floor: r.floor,
        estimate,
    })
}

pub fn check_set(
    p: &FiniteMixtureMeasure,
    rs: &RequirementSet,
    policy: &CheckPolicy,
) -> Result<SetReport> {
    let requirements = rs
        .requirements
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let sub = CheckPolicy {
                seed: seed::derive_indexed(policy.seed, i as u64),
                ..*policy
            };
            check_requirement(p, r, &sub)
        })
        .collect::<Result<Vec<_>>>()?;
    let overall = overall(requirements.iter().map(|c| c.verdict));
    Ok(SetReport {
        requirements,
        overall,
    })
}

pub fn overall(verdicts: impl Iterator<Item = Verdict>) -> Overall {
    let mut out = Overall::AllSatisfied;
    for v in verdicts {
        match v {
            Verdict::Violated => return Overall::SomeViolated,
            Verdict::Inconclusive => out = Overall::Inconclusive,
            Verdict::Satisfied => {}
        }
    }
    out
}

/// `Σ_k c_k μ(A_k)` against the threshold; `μ` may be signed.
pub fn evaluate_generalized(
    mu: &FiniteMixtureMeasure,
    g: &GeneralizedRequirement,
    policy: &CheckPolicy,
) -> Result<GeneralizedReport> {
    let mut value = 0.0;
    let mut var = 0.0;
    let mut method = Method::Exact;
    for (k, (c, q)) in g.terms.iter().enumerate() {
        let est = measure_of(mu, q, policy.budget, seed::derive_indexed(policy.seed, k as u64))?;
        value += c * est.value;
        var += (c * est.stderr).powi(2);
        method = method.combine(est.method);
    }
    let estimate = ProbabilityEstimate {
        value,
        stderr: var.sqrt(),
        method,
    };
    Ok(GeneralizedReport {
        verdict: verdict(&estimate, g.threshold, policy.z),
        threshold: g.threshold,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Vector;
    use crate::quadrants::HalfSpace;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn hs(normal: &[f64], offset: f64) -> HalfSpace {
        HalfSpace::new(v(normal), offset).unwrap()
    }

    fn quad(h: Vec<HalfSpace>) -> Quadrant {
        Quadrant::new(h).unwrap()
    }

    fn policy() -> CheckPolicy {
        CheckPolicy {
            budget: 100_000,
            ..CheckPolicy::default()
        }
    }

    /// Simpson quadrature of the standard normal density on `[a, b]`.
    fn simpson_normal(a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..steps {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn symmetric_half_line() {
        let n = FiniteMixtureMeasure::standard_normal(1);
        let e = quadrant_probability(&n, &quad(vec![hs(&[1.0], 0.0)]), 10, 0).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.method, Method::AnalyticGaussian);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn atom_in_orthant() {
        let d = FiniteMixtureMeasure::point_mass(v(&[1.0, 1.0]));
        let q = quad(vec![hs(&[1.0, 0.0], 0.0), hs(&[0.0, 1.0], 0.0)]);
        let e = quadrant_probability(&d, &q, 10, 0).unwrap();
        assert_eq!((e.value, e.method), (1.0, Method::Exact));
    }

    #[test]
    fn low_rate_probability_matches_quadrature_and_mc() {
        // N(1.5%, 0.75%²), event i10 ≤ 0.5%: Φ(−4/3)
        let p = FiniteMixtureMeasure::normal_1d(0.015, 0.0075).unwrap();
        let q = quad(vec![hs(&[-1.0], -0.005)]);
        let e = quadrant_probability(&p, &q, 10, 0).unwrap();
        let oracle = simpson_normal(-14.0, -4.0 / 3.0, 200_000);
        assert!((e.value - oracle).abs() < 1e-10, "{} vs {oracle}", e.value);
        assert!((e.value - 0.09121).abs() < 1e-5);

        let mc = monte_carlo_probability(&p, &q, 10_000_000, 5).unwrap();
        assert!((mc.value - e.value).abs() <= 4.0 * mc.stderr);

        let r = QuadrantRequirement::new(q, 0.01).unwrap();
        let c = check_requirement(&p, &r, &policy()).unwrap();
        assert_eq!(c.verdict, Verdict::Satisfied);
    }

    #[test]
    fn verdict_examples() {
        let d = v(&[0.3, -0.7]);
        let atom = FiniteMixtureMeasure::point_mass(d.clone());
        let r = QuadrantRequirement::new(Quadrant::singleton(&d), 1.0).unwrap();
        assert_eq!(check_requirement(&atom, &r, &policy()).unwrap().verdict, Verdict::Satisfied);

        let n = FiniteMixtureMeasure::standard_normal(1);
        let far = QuadrantRequirement::new(quad(vec![hs(&[1.0], 10.0)]), 0.5).unwrap();
        let c = check_requirement(&n, &far, &policy()).unwrap();
        assert_eq!(c.verdict, Verdict::Violated);
        assert!(c.estimate.value > 0.0 && c.estimate.value < 1e-23);
    }

    #[test]
    fn monte_carlo_verdicts_can_be_inconclusive() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let g = FiniteMixtureMeasure::gaussian(v(&[0.0, 0.0]), cov).unwrap();
        let q = quad(vec![hs(&[1.0, 0.0], 0.0), hs(&[0.0, 1.0], 0.0)]);
        // orthant probability of a correlated normal: 1/4 + asin(ρ)/(2π) = 1/3
        let e = quadrant_probability(&g, &q, 200_000, 3).unwrap();
        assert!(e.method.is_monte_carlo());
        assert!((e.value - 1.0 / 3.0).abs() < 4.0 * e.stderr);
        let exactly = QuadrantRequirement::new(q.clone(), e.value).unwrap();
        let c = check_requirement(&g, &exactly, &CheckPolicy { budget: 200_000, seed: 3, z: 3.0 }).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        let low = QuadrantRequirement::new(q, 0.3).unwrap();
        let c = check_requirement(&g, &low, &policy()).unwrap();
        assert_eq!(c.verdict, Verdict::Satisfied);
    }

    #[test]
    fn set_reports() {
        let n = FiniteMixtureMeasure::standard_normal(1);
        let r = check_set(&n, &RequirementSet::empty(), &policy()).unwrap();
        assert_eq!(r.overall, Overall::AllSatisfied);
        assert!(r.requirements.is_empty());

        let ok = QuadrantRequirement::new(quad(vec![hs(&[1.0], 0.0)]), 0.4).unwrap();
        let bad = QuadrantRequirement::new(quad(vec![hs(&[1.0], 3.0)]), 0.4).unwrap();
        let rs = RequirementSet::new(vec![ok.clone(), bad]).unwrap();
        let r = check_set(&n, &rs, &policy()).unwrap();
        assert_eq!(r.overall, Overall::SomeViolated);
        assert_eq!(r.requirements[0].verdict, Verdict::Satisfied);

        let over = RequirementSet::new(vec![ok.clone(), ok.clone(), ok]);
        assert!(matches!(over, Err(Error::TotalProbabilityExceeded(_))));
        assert!(QuadrantRequirement::new(quad(vec![hs(&[1.0], 0.0)]), 1.5).is_err());
    }

    #[test]
    fn diagonal_box_is_product_of_intervals() {
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let g = FiniteMixtureMeasure::gaussian(v(&[0.0, 1.0]), cov).unwrap();
        let q = Quadrant::axis_box(&[-1.0, 1.0], &[1.0, f64::INFINITY]).unwrap();
        let e = quadrant_probability(&g, &q, 10, 0).unwrap();
        let expected = normal::interval(-1.0, 1.0) * 0.5;
        assert!((e.value - expected).abs() < 1e-15);
        assert_eq!(e.method, Method::AnalyticGaussian);
    }

    #[test]
    fn degenerate_quadrant_has_zero_gaussian_mass() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let g = FiniteMixtureMeasure::gaussian(v(&[0.0, 0.0]), cov).unwrap();
        let e = quadrant_probability(&g, &Quadrant::singleton(&v(&[0.0, 0.0])), 10, 0).unwrap();
        assert_eq!((e.value, e.method), (0.0, Method::AnalyticGaussian));
    }

    #[test]
    fn zero_variance_direction_uses_point_logic() {
        // all mass on the line x1 = x2; the functional x1 - x2 has zero variance
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let g = FiniteMixtureMeasure::gaussian(v(&[0.0, 0.0]), cov).unwrap();
        let on = quad(vec![hs(&[1.0, -1.0], 0.0)]);
        assert_eq!(quadrant_probability(&g, &on, 10, 0).unwrap().value, 1.0);
        let off = quad(vec![hs(&[1.0, -1.0], 0.1)]);
        assert_eq!(quadrant_probability(&g, &off, 10, 0).unwrap().value, 0.0);
    }

    #[test]
    fn generalized_examples() {
        let p = FiniteMixtureMeasure::normal_1d(0.015, 0.0075).unwrap();
        let r = QuadrantRequirement::new(quad(vec![hs(&[-1.0], -0.005)]), 0.01).unwrap();
        let g = evaluate_generalized(&p, &GeneralizedRequirement::indicator(&r), &policy()).unwrap();
        let c = check_requirement(&p, &r, &policy()).unwrap();
        assert_eq!(g.verdict, c.verdict);
        assert_eq!(g.estimate.value, c.estimate.value);

        let whole = GeneralizedRequirement::new(vec![(1.0, quad(vec![hs(&[1.0], -1e9)]))], 1.0).unwrap();
        assert_eq!(evaluate_generalized(&p, &whole, &policy()).unwrap().estimate.value, 1.0);

        let d = FiniteMixtureMeasure::point_mass(v(&[0.5]));
        let twice = GeneralizedRequirement::new(vec![(2.0, quad(vec![hs(&[1.0], 0.0)]))], 1.5).unwrap();
        let rep = evaluate_generalized(&d, &twice, &policy()).unwrap();
        assert_eq!((rep.estimate.value, rep.verdict), (2.0, Verdict::Satisfied));

        assert_eq!(GeneralizedRequirement::new(vec![], 0.0), Err(Error::NoTerms));
    }

    #[test]
    fn json_formats() {
        let text = r#"{"requirements": [{"quadrant": {"dim": 1, "halfspaces": [{"normal": [-1.0], "offset": -0.005}]}, "floor": 0.01}]}"#;
        let rs: RequirementSet = serde_json::from_str(text).unwrap();
        assert_eq!(rs.len(), 1);
        let g = r#"{"terms": [{"coef": 2.0, "quadrant": {"dim": 1, "halfspaces": [{"normal": [1.0], "offset": 0.0}]}}], "threshold": 0.5}"#;
        let g: GeneralizedRequirement = serde_json::from_str(g).unwrap();
        assert_eq!(g.terms().len(), 1);
        let p = FiniteMixtureMeasure::standard_normal(1);
        let report = check_set(&p, &rs, &policy()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        let first = &json["requirements"][0];
        for key in ["value", "stderr", "verdict", "method"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["overall"], "all_satisfied");
    }

    fn arb_exact_measure() -> impl Strategy<Value = FiniteMixtureMeasure> {
        let pt = prop::collection::vec(-3.0..3.0f64, 2);
        let comp = prop_oneof![
            pt.clone().prop_map(|x| MeasureComponent::PointMass(Vector::new(x).unwrap())),
            prop::collection::vec(pt, 1..5).prop_map(|ps| {
                MeasureComponent::empirical(ps.into_iter().map(|p| Vector::new(p).unwrap()).collect())
                    .unwrap()
            }),
        ];
        prop::collection::vec((0.05..1.0f64, comp), 1..4).prop_map(|parts| {
            let total: f64 = parts.iter().map(|(w, _)| w).sum();
            let comps = parts.into_iter().map(|(w, c)| (w / total, c)).collect();
            FiniteMixtureMeasure::new(comps).unwrap()
        })
    }

    fn test_quadrants() -> Vec<Quadrant> {
        vec![
            quad(vec![hs(&[1.0, 0.0], 0.0)]),
            quad(vec![hs(&[1.0, 1.0], -1.0), hs(&[0.0, -1.0], -2.0)]),
            Quadrant::axis_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_halfspaces(m in arb_exact_measure(), extra in prop::collection::vec(-1.0..1.0f64, 2), c in -2.0..2.0f64) {
            prop_assume!(extra.iter().any(|x| x.abs() > 1e-3));
            for q in test_quadrants() {
                let mut hs2 = q.halfspaces().to_vec();
                hs2.push(HalfSpace::new(Vector::new(extra.clone()).unwrap(), c).unwrap());
                let Ok(q2) = Quadrant::new(hs2) else { continue };
                let a = quadrant_probability(&m, &q, 10, 0).unwrap().value;
                let b = quadrant_probability(&m, &q2, 10, 0).unwrap().value;
                prop_assert!(b <= a + 1e-12);
            }
        }

        #[test]
        fn acceptance_set_is_convex(m1 in arb_exact_measure(), m2 in arb_exact_measure()) {
            let pol = policy();
            let floors: Vec<f64> = test_quadrants().iter().map(|q| {
                let a = quadrant_probability(&m1, q, 10, 0).unwrap().value;
                let b = quadrant_probability(&m2, q, 10, 0).unwrap().value;
                a.min(b) / 3.0
            }).collect();
            let rs = RequirementSet::new(
                test_quadrants().into_iter().zip(floors).map(|(q, f)| QuadrantRequirement::new(q, f).unwrap()).collect()
            ).unwrap();
            prop_assert_eq!(check_set(&m1, &rs, &pol).unwrap().overall, Overall::AllSatisfied);
            prop_assert_eq!(check_set(&m2, &rs, &pol).unwrap().overall, Overall::AllSatisfied);
            for t in [0.25, 0.5, 0.75] {
                let mixed = FiniteMixtureMeasure::mix(&[(t, &m1), (1.0 - t, &m2)]).unwrap();
                prop_assert_eq!(check_set(&mixed, &rs, &pol).unwrap().overall, Overall::AllSatisfied);
            }
        }

        #[test]
        fn generalized_is_linear(m1 in arb_exact_measure(), m2 in arb_exact_measure(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let terms: Vec<(f64, Quadrant)> = test_quadrants().into_iter().zip([1.5, -0.5, 2.0]).map(|(q, c)| (c, q)).collect();
            let g = GeneralizedRequirement::new(terms, 0.0).unwrap();
            let pol = policy();
            let signed = FiniteMixtureMeasure::mix(&[(a, &m1), (b, &m2)]).unwrap();
            let lhs = evaluate_generalized(&signed, &g, &pol).unwrap().estimate.value;
            let v1 = evaluate_generalized(&m1, &g, &pol).unwrap().estimate.value;
            let v2 = evaluate_generalized(&m2, &g, &pol).unwrap().estimate.value;
            prop_assert!((lhs - (a * v1 + b * v2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let mut within = 0;
        let trials = 100;
        for k in 0..trials {
            let mean = v(&[(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()]);
            let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.5]));
            let g = FiniteMixtureMeasure::gaussian(mean, cov).unwrap();
            let atom = FiniteMixtureMeasure::point_mass(v(&[0.2, 0.1]));
            let m = FiniteMixtureMeasure::mix(&[(0.8, &g), (0.2, &atom)]).unwrap();
            let q = Quadrant::axis_box(&[-0.5, f64::NEG_INFINITY], &[1.0, 0.5]).unwrap();
            let exact = quadrant_probability(&m, &q, 10, 0).unwrap();
            assert!(!exact.method.is_monte_carlo());
            let mc = monte_carlo_probability(&m, &q, 100_000, k).unwrap();
            if (exact.value - mc.value).abs() <= 4.0 * mc.stderr {
                within += 1;
            }
        }
        assert!(within >= 99, "{within}/{trials}");
    }
}
