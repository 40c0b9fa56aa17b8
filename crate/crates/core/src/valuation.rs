//! Valuation functions, the capital distribution `V_* P`, capital-level
//! scenario aggregation and risk measures.
//!
//! `V` is available capital, so larger is better. Value at risk and
//! expected shortfall are reported as positive capital requirements, i.e.
//! negated lower quantiles and lower tail means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, dot, FiniteMixtureMeasure, MeasureComponent, Vector};
use crate::normal;
use crate::scenarios::{aggregate_shifting, ScenarioSet};
use crate::seed;

/// Absolute tolerance of the quantile bisection.
pub const QUANTILE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValuationWire", into = "ValuationWire")]
pub enum ValuationFunction {
    /// `V(x) = a·x + b`.
    Linear { a: Vector, b: f64 },
    /// `V(x) = max_k` (or `min_k`) `a_k·x + b_k`.
    MaxAffine { sign: Extremum, pieces: Vec<(Vector, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ValuationWire {
    Linear { a: Vector, b: f64 },
    MaxAffine { sign: Extremum, pieces: Vec<PieceWire> },
}

#[derive(Serialize, Deserialize)]
struct PieceWire {
    a: Vector,
    b: f64,
}

impl TryFrom<ValuationWire> for ValuationFunction {
    type Error = Error;
    fn try_from(w: ValuationWire) -> Result<Self> {
        match w {
            ValuationWire::Linear { a, b } => Self::linear(a, b),
            ValuationWire::MaxAffine { sign, pieces } => {
                Self::max_affine(sign, pieces.into_iter().map(|p| (p.a, p.b)).collect())
            }
        }
    }
}

impl From<ValuationFunction> for ValuationWire {
    fn from(v: ValuationFunction) -> Self {
        match v {
            ValuationFunction::Linear { a, b } => ValuationWire::Linear { a, b },
            ValuationFunction::MaxAffine { sign, pieces } => ValuationWire::MaxAffine {
                sign,
                pieces: pieces.into_iter().map(|(a, b)| PieceWire { a, b }).collect(),
            },
        }
    }
}

impl ValuationFunction {
    /// A zero `a` gives a constant valuation.
    pub fn linear(a: Vector, b: f64) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::InvalidVector);
        }
        Ok(Self::Linear { a, b })
    }

    pub fn max_affine(sign: Extremum, pieces: Vec<(Vector, f64)>) -> Result<Self> {
        let n = pieces.first().ok_or(Error::NoPieces)?.0.dim();
        for (a, b) in &pieces {
            check_dim(n, a.dim())?;
            if !b.is_finite() {
                return Err(Error::InvalidVector);
            }
        }
        Ok(Self::MaxAffine { sign, pieces })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { a, .. } => a.dim(),
            Self::MaxAffine { pieces, .. } => pieces[0].0.dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Self::Linear { .. })
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { a, b } => dot(a, x) + b,
            Self::MaxAffine { sign, pieces } => {
                let vals = pieces.iter().map(|(a, b)| dot(a, x) + b);
                match sign {
                    Extremum::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                    Extremum::Min => vals.fold(f64::INFINITY, f64::min),
                }
            }
        }
    }

    /// `V(d_S)`.
    pub fn impact(&self, deflection: &Vector) -> Result<f64> {
        self.evaluate(deflection)
    }

    /// `(V(d_S), p_S)` for every scenario.
    pub fn impacts(&self, m: &ScenarioSet) -> Result<Vec<(f64, f64)>> {
        m.scenarios()
            .iter()
            .map(|s| Ok((self.impact(s.deflection())?, s.probability())))
            .collect()
    }

    /// `V_d(x) = V(x + d) − V(d)`.
    pub fn twist(&self, d: &Vector) -> Result<Self> {
        let vd = self.evaluate(d)?;
        Ok(match self {
            Self::Linear { a, .. } => Self::Linear { a: a.clone(), b: 0.0 },
            Self::MaxAffine { sign, pieces } => Self::MaxAffine {
                sign: *sign,
                pieces: pieces
                    .iter()
                    .map(|(a, b)| (a.clone(), b + dot(a, d) - vd))
                    .collect(),
            },
        })
    }
}

/// One-dimensional probability measure of available capital.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CapitalDistribution(FiniteMixtureMeasure);

impl CapitalDistribution {
    pub fn new(measure: FiniteMixtureMeasure) -> Result<Self> {
        check_dim(1, measure.dim())?;
        measure.require_probability()?;
        Ok(Self(measure))
    }

    pub fn measure(&self) -> &FiniteMixtureMeasure {
        &self.0
    }

    pub fn into_measure(self) -> FiniteMixtureMeasure {
        self.0
    }

    pub fn translate(&self, c: f64) -> Self {
        Self(self.0.translate(&Vector::from_unchecked(vec![c])).expect("one-dimensional"))
    }

    pub fn mean(&self) -> f64 {
        self.0.mean()[0]
    }

    /// `F(x) = P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.mass_below(x, true)
    }

    fn mass_below(&self, x: f64, closed: bool) -> f64 {
        let atom = |c: f64| if closed { c <= x } else { c < x };
        let total: f64 = self
            .0
            .components()
            .iter()
            .map(|(w, c)| {
                w * match c {
                    MeasureComponent::PointMass(loc) => f64::from(u8::from(atom(loc[0]))),
                    MeasureComponent::Empirical(e) => {
                        let pts = e.points();
                        pts.iter().filter(|p| atom(p[0])).count() as f64 / pts.len() as f64
                    }
                    MeasureComponent::Gaussian(g) => {
                        normal::cdf((x - g.mean()[0]) / g.cov()[(0, 0)].sqrt())
                    }
                }
            })
            .sum();
        total.clamp(0.0, 1.0)
    }

    /// `E[X · 1{X < x}]`.
    fn partial_mean_below(&self, x: f64) -> f64 {
        self.0
            .components()
            .iter()
            .map(|(w, c)| {
                w * match c {
                    MeasureComponent::PointMass(loc) => {
                        if loc[0] < x {
                            loc[0]
                        } else {
                            0.0
                        }
                    }
                    MeasureComponent::Empirical(e) => {
                        let pts = e.points();
                        pts.iter().map(|p| p[0]).filter(|&v| v < x).sum::<f64>() / pts.len() as f64
                    }
                    MeasureComponent::Gaussian(g) => {
                        let (mu, sd) = (g.mean()[0], g.cov()[(0, 0)].sqrt());
                        let z = (x - mu) / sd;
                        mu * normal::cdf(z) - sd * normal::pdf(z)
                    }
                }
            })
            .sum()
    }

    fn atoms(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, c) in self.0.components() {
            if *w == 0.0 {
                continue;
            }
            match c {
                MeasureComponent::PointMass(loc) => out.push(loc[0]),
                MeasureComponent::Empirical(e) => out.extend(e.points().iter().map(|p| p[0])),
                MeasureComponent::Gaussian(_) => {}
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn support_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (w, c) in self.0.components() {
            if *w == 0.0 {
                continue;
            }
            let (a, b) = match c {
                MeasureComponent::Gaussian(g) => {
                    let (mu, sd) = (g.mean()[0], g.cov()[(0, 0)].sqrt());
                    (mu - 40.0 * sd, mu + 40.0 * sd)
                }
                MeasureComponent::PointMass(loc) => (loc[0], loc[0]),
                MeasureComponent::Empirical(e) => e
                    .points()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0]))),
            };
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo - 1.0, hi)
    }

    /// `q_α = inf{x : F(x) ≥ α}`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        let (mut lo, mut hi) = self.support_bounds();
        for _ in 0..400 {
            if hi - lo <= QUANTILE_TOL {
                break;
            }
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // an atom in the final bracket is the exact infimum
        let atoms = self.atoms();
        let start = atoms.partition_point(|&a| a <= lo);
        if let Some(&a) = atoms[start..].iter().find(|&&a| a <= hi) {
            if self.cdf(a) >= alpha {
                return Ok(a);
            }
        }
        Ok(hi)
    }

    pub fn value_at_risk(&self, alpha: f64) -> Result<f64> {
        Ok(-self.quantile(alpha)?)
    }

    /// `−(1/α)(E[X; X < q] + q (α − P(X < q)))`.
    pub fn expected_shortfall(&self, alpha: f64) -> Result<f64> {
        let q = self.quantile(alpha)?;
        let tail = self.partial_mean_below(q) + q * (alpha - self.mass_below(q, false));
        Ok(-tail / alpha)
    }
}

/// `V_* P`: exact for linear `V` on Gaussian components and for atoms;
/// empirical with `budget` evaluated samples for non-linear `V` on
/// Gaussians; pointwise on empirical components.
pub fn pushforward_capital(
    v: &ValuationFunction,
    p: &FiniteMixtureMeasure,
    budget: usize,
    seed: u64,
) -> Result<CapitalDistribution> {
    p.require_probability()?;
    check_dim(v.dim(), p.dim())?;
    let scalar = |x: f64| Vector::from_unchecked(vec![x]);
    let components = p
        .components()
        .iter()
        .enumerate()
        .map(|(k, (w, c))| {
            let image = match (c, v) {
                (MeasureComponent::PointMass(x), _) => MeasureComponent::point_mass(scalar(v.eval_unchecked(x))),
                (MeasureComponent::Empirical(e), _) => {
                    MeasureComponent::empirical(e.points().iter().map(|x| scalar(v.eval_unchecked(x))).collect())?
                }
                (MeasureComponent::Gaussian(g), ValuationFunction::Linear { a, b }) => {
                    let mean = dot(a, g.mean()) + b;
                    let var = g.variance_along(a).max(0.0);
                    MeasureComponent::gaussian(scalar(mean), nalgebra::DMatrix::from_element(1, 1, var))?
                }
                (MeasureComponent::Gaussian(_), ValuationFunction::MaxAffine { .. }) => {
                    let pts = c.sample(budget.max(1), seed::derive_indexed(seed, k as u64));
                    MeasureComponent::empirical(pts.iter().map(|x| scalar(v.eval_unchecked(x))).collect())?
                }
            };
            Ok((*w, image))
        })
        .collect::<Result<Vec<_>>>()?;
    CapitalDistribution::new(FiniteMixtureMeasure::new(components)?)
}

/// `(1 − p_M) V_* P + Σ p_S τ_{V(d_S)*} V_* P`.
pub fn sst_aggregate_capital(pv: &CapitalDistribution, impacts: &[(f64, f64)]) -> Result<CapitalDistribution> {
    let pairs: Vec<(&[f64], f64)> = impacts.iter().map(|(x, p)| (std::slice::from_ref(x), *p)).collect();
    let m = ScenarioSet::from_pairs(&pairs)?;
    CapitalDistribution::new(aggregate_shifting(pv.measure(), &m)?)
}
