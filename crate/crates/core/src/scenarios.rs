//! Enhanced scenarios, scenario sets and the aggregation operators.
//!
//! All operators produce the mixture `(1 − p_M) P + Σ p_S Q_S`, differing
//! only in the measure `Q_S` attached to each scenario: a point mass at the
//! deflection, the translate of `P`, or a general pushforward `φ_S* P`.
//! Zero-probability scenarios keep their (zero-weight) components.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{check_dim, FiniteMixtureMeasure, Vector, WEIGHT_TOL};

/// Deflection `d_S` with occurrence probability `p_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioWire", into = "ScenarioWire")]
pub struct EnhancedScenario {
    deflection: Vector,
    probability: f64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioWire {
    d: Vector,
    p: f64,
}

impl TryFrom<ScenarioWire> for EnhancedScenario {
    type Error = Error;
    fn try_from(w: ScenarioWire) -> Result<Self> {
        Self::new(w.d, w.p)
    }
}

impl From<EnhancedScenario> for ScenarioWire {
    fn from(s: EnhancedScenario) -> Self {
        Self {
            d: s.deflection,
            p: s.probability,
        }
    }
}

impl EnhancedScenario {
    pub fn new(deflection: Vector, probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::ProbabilityOutOfRange(probability));
        }
        Ok(Self {
            deflection,
            probability,
        })
    }

    pub fn deflection(&self) -> &Vector {
        &self.deflection
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SetWire", into = "SetWire")]
pub struct ScenarioSet {
    scenarios: Vec<EnhancedScenario>,
}

#[derive(Serialize, Deserialize)]
struct SetWire {
    scenarios: Vec<EnhancedScenario>,
}

impl TryFrom<SetWire> for ScenarioSet {
    type Error = Error;
    fn try_from(w: SetWire) -> Result<Self> {
        Self::new(w.scenarios)
    }
}

impl From<ScenarioSet> for SetWire {
    fn from(s: ScenarioSet) -> Self {
        Self {
            scenarios: s.scenarios,
        }
    }
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<EnhancedScenario>) -> Result<Self> {
        if let Some(first) = scenarios.first() {
            let n = first.deflection.dim();
            for s in &scenarios {
                check_dim(n, s.deflection.dim())?;
            }
        }
        let total: f64 = scenarios.iter().map(|s| s.probability).sum();
        if total > 1.0 + WEIGHT_TOL {
            return Err(Error::TotalProbabilityExceeded(total));
        }
        Ok(Self { scenarios })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Convenience constructor from `(deflection, probability)` pairs.
    pub fn from_pairs(pairs: &[(&[f64], f64)]) -> Result<Self> {
        let scenarios = pairs
            .iter()
            .map(|(d, p)| EnhancedScenario::new(Vector::new(d.to_vec())?, *p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(scenarios)
    }

    pub fn scenarios(&self) -> &[EnhancedScenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// `p_M = Σ p_S`.
    pub fn total(&self) -> f64 {
        self.scenarios.iter().map(|s| s.probability).sum()
    }

    pub fn dim(&self) -> Option<usize> {
        self.scenarios.first().map(|s| s.deflection.dim())
    }

    /// The set without the scenario at `index`.
    pub fn without(&self, index: usize) -> Self {
        let mut scenarios = self.scenarios.clone();
        scenarios.remove(index);
        Self { scenarios }
    }

    fn check_against(&self, p: &FiniteMixtureMeasure) -> Result<()> {
        for s in &self.scenarios {
            check_dim(p.dim(), s.deflection.dim())?;
        }
        Ok(())
    }
}

/// A pointwise map on risk-factor space, usable only on point masses and
/// empirical components. Experimental.
#[derive(Clone)]
pub struct PointwiseMap(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>);

impl PointwiseMap {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for PointwiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PointwiseMap(..)")
    }
}

/// Map attached to a scenario in φ-aggregation.
#[derive(Debug, Clone)]
pub enum PhiMap {
    Constant(Vector),
    Translation(Vector),
    Affine { a: DMatrix<f64>, b: Vector },
    Pointwise(PointwiseMap),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum PhiWire {
    Constant { d: Vector },
    Translation { d: Vector },
    Affine { a: Vec<Vec<f64>>, b: Vector },
}

impl Serialize for PhiMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let wire = match self {
            PhiMap::Constant(d) => PhiWire::Constant { d: d.clone() },
            PhiMap::Translation(d) => PhiWire::Translation { d: d.clone() },
            PhiMap::Affine { a, b } => PhiWire::Affine {
                a: (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect(),
                b: b.clone(),
            },
            PhiMap::Pointwise(_) => {
                return Err(serde::ser::Error::custom("pointwise maps are not serializable"))
            }
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhiMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match PhiWire::deserialize(d)? {
            PhiWire::Constant { d } => PhiMap::Constant(d),
            PhiWire::Translation { d } => PhiMap::Translation(d),
            PhiWire::Affine { a, b } => {
                let n = b.dim();
                if a.len() != n || a.iter().any(|r| r.len() != n) {
                    return Err(serde::de::Error::custom(format!("affine matrix must be {n}x{n}")));
                }
                PhiMap::Affine {
                    a: DMatrix::from_fn(n, n, |i, j| a[i][j]),
                    b,
                }
            }
        })
    }
}

impl PhiMap {
    /// `φ_* P`.
    pub fn push(&self, p: &FiniteMixtureMeasure) -> Result<FiniteMixtureMeasure> {
        match self {
            PhiMap::Constant(d) => {
                check_dim(p.dim(), d.dim())?;
                Ok(FiniteMixtureMeasure::point_mass(d.clone()))
            }
            PhiMap::Translation(d) => p.translate(d),
            PhiMap::Affine { a, b } => p.affine_pushforward(a, b),
            PhiMap::Pointwise(f) => p.map_points(|x| (f.0)(x)),
        }
    }

    /// Linear part of an affine map.
    pub fn linear_part(&self) -> Result<DMatrix<f64>> {
        match self {
            PhiMap::Constant(d) => Ok(DMatrix::zeros(d.dim(), d.dim())),
            PhiMap::Translation(d) => Ok(DMatrix::identity(d.dim(), d.dim())),
            PhiMap::Affine { a, .. } => Ok(a.clone()),
            PhiMap::Pointwise(_) => Err(Error::NotAffine),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMethod {
    #[serde(rename = "pointmass")]
    PointMass,
    Shifting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapClass {
    Contracting,
    Expanding,
    Isometry,
    Neither,
}

fn base_weight(m: &ScenarioSet) -> f64 {
    (1.0 - m.total()).max(0.0)
}

fn aggregate_with<F>(p: &FiniteMixtureMeasure, m: &ScenarioSet, attach: F) -> Result<FiniteMixtureMeasure>
where
    F: Fn(usize, &EnhancedScenario) -> Result<FiniteMixtureMeasure>,
{
    p.require_probability()?;
    m.check_against(p)?;
    let attached = m
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| attach(i, s))
        .collect::<Result<Vec<_>>>()?;
    let mut parts: Vec<(f64, &FiniteMixtureMeasure)> = vec![(base_weight(m), p)];
    parts.extend(m.scenarios.iter().zip(&attached).map(|(s, q)| (s.probability, q)));
    FiniteMixtureMeasure::mix(&parts)
}

/// `(1 − p_M) P + Σ p_S δ_{d_S}`.
pub fn aggregate_point_mass(p: &FiniteMixtureMeasure, m: &ScenarioSet) -> Result<FiniteMixtureMeasure> {
    aggregate_with(p, m, |_, s| Ok(FiniteMixtureMeasure::point_mass(s.deflection.clone())))
}

/// `(1 − p_M) P + Σ p_S τ_{d_S*} P`.
pub fn aggregate_shifting(p: &FiniteMixtureMeasure, m: &ScenarioSet) -> Result<FiniteMixtureMeasure> {
    aggregate_with(p, m, |_, s| p.translate(&s.deflection))
}

/// `(1 − p_M) P + Σ p_S φ_{S*} P` with one map per scenario.
pub fn aggregate_phi(
    p: &FiniteMixtureMeasure,
    m: &ScenarioSet,
    maps: &[PhiMap],
) -> Result<FiniteMixtureMeasure> {
    if maps.len() != m.len() {
        return Err(Error::MapCountMismatch {
            expected: m.len(),
            found: maps.len(),
        });
    }
    aggregate_with(p, m, |i, _| maps[i].push(p))
}

pub fn aggregate(
    p: &FiniteMixtureMeasure,
    m: &ScenarioSet,
    method: AggregationMethod,
) -> Result<FiniteMixtureMeasure> {
    match method {
        AggregationMethod::PointMass => aggregate_point_mass(p, m),
        AggregationMethod::Shifting => aggregate_shifting(p, m),
    }
}

/// Left fold: each set is aggregated into the result of the previous ones.
pub fn aggregate_successive(
    p: &FiniteMixtureMeasure,
    sets: &[ScenarioSet],
    method: AggregationMethod,
) -> Result<FiniteMixtureMeasure> {
    sets.iter()
        .try_fold(p.clone(), |acc, m| aggregate(&acc, m, method))
}

/// Classifies an affine map by the singular values of its linear part:
/// expanding iff all are ≥ 1, contracting iff all are ≤ 1.
pub fn classify_affine_map(map: &PhiMap) -> Result<MapClass> {
    let a = map.linear_part()?;
    let sv = a.singular_values();
    let (min, max) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let expanding = min >= 1.0 - 1e-12;
    let contracting = max <= 1.0 + 1e-12;
    Ok(match (expanding, contracting) {
        (true, true) => MapClass::Isometry,
        (true, false) => MapClass::Expanding,
        (false, true) => MapClass::Contracting,
        (false, false) => MapClass::Neither,
    })
}
