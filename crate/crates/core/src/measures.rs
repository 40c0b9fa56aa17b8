//! Probability measures on risk-factor space as finite mixtures of Gaussian,
//! point-mass and empirical components.
//!
//! The class is closed under translation, affine pushforward and mixing,
//! which is everything the aggregation operators need. Components are never
//! merged; use [`FiniteMixtureMeasure::approx_eq`] to compare measures after
//! canonical sorting.

use std::cmp::Ordering;
use std::ops::Deref;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Tolerance on the total weight of a probability measure.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Eigenvalues in `[-PSD_CLIP, 0)` are clipped to zero; anything more
/// negative rejects the covariance.
pub const PSD_CLIP: f64 = 1e-10;

/// Point in risk-factor space. Non-empty with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidVector);
        }
        Ok(Self(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional vector");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn scale(&self, c: f64) -> Vector {
        Self(self.0.iter().map(|a| a * c).collect())
    }

    pub(crate) fn from_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Multivariate normal with a validated positive semi-definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vector,
    cov: DMatrix<f64>,
}

impl Gaussian {
    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.cov.nrows();
        (0..n).all(|i| (0..n).all(|j| i == j || self.cov[(i, j)] == 0.0))
    }

    /// Variance of `a·X`.
    pub fn variance_along(&self, a: &[f64]) -> f64 {
        let v = DVector::from_column_slice(a);
        (v.transpose() * &self.cov * &v)[(0, 0)].max(0.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.cov.clone())
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0))
            .collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `L` with `L Lᵀ = Σ`, from the eigendecomposition (works for singular Σ).
    fn factor(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.cov.clone());
        let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
        eig.eigenvectors * sqrt
    }
}

/// Equally weighted sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct Empirical {
    points: Vec<Vector>,
}

impl Empirical {
    pub fn points(&self) -> &[Vector] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureComponent {
    Gaussian(Gaussian),
    PointMass(Vector),
    Empirical(Empirical),
}

fn validate_covariance(mut cov: DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::InvalidCovariance(format!(
            "expected {n}x{n}, found {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry".into()));
    }
    let scale = cov.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (cov[(i, j)], cov[(j, i)]);
            if (a - b).abs() > 1e-9 * scale {
                return Err(Error::InvalidCovariance(format!("not symmetric at ({i},{j})")));
            }
            if a != b {
                let m = 0.5 * (a + b);
                cov[(i, j)] = m;
                cov[(j, i)] = m;
            }
        }
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min = eig.eigenvalues.min();
    if min < -PSD_CLIP {
        return Err(Error::InvalidCovariance(format!("negative eigenvalue {min}")));
    }
    if min < 0.0 {
        let clipped = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0)));
        let q = &eig.eigenvectors;
        cov = q * clipped * q.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
    }
    Ok(cov)
}

impl MeasureComponent {
    /// Gaussian component; an all-zero covariance collapses to a point mass.
    pub fn gaussian(mean: Vector, cov: DMatrix<f64>) -> Result<Self> {
        let cov = validate_covariance(cov, mean.dim())?;
        if cov.iter().all(|&c| c == 0.0) {
            return Ok(Self::PointMass(mean));
        }
        Ok(Self::Gaussian(Gaussian { mean, cov }))
    }

    pub fn point_mass(loc: Vector) -> Self {
        Self::PointMass(loc)
    }

    pub fn empirical(points: Vec<Vector>) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyEmpirical)?;
        let n = first.dim();
        for p in &points {
            check_dim(n, p.dim())?;
        }
        Ok(Self::Empirical(Empirical { points }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.mean.dim(),
            Self::PointMass(p) => p.dim(),
            Self::Empirical(e) => e.points[0].dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gaussian(_) => "gaussian",
            Self::PointMass(_) => "pointmass",
            Self::Empirical(_) => "empirical",
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.mean.0.clone(),
            Self::PointMass(p) => p.0.clone(),
            Self::Empirical(e) => {
                let n = e.points.len() as f64;
                let mut m = vec![0.0; self.dim()];
                for p in &e.points {
                    for (mi, pi) in m.iter_mut().zip(p.iter()) {
                        *mi += pi;
                    }
                }
                m.iter_mut().for_each(|x| *x /= n);
                m
            }
        }
    }

    pub fn translate(&self, d: &Vector) -> Result<Self> {
        check_dim(self.dim(), d.dim())?;
        Ok(match self {
            Self::Gaussian(g) => Self::Gaussian(Gaussian {
                mean: g.mean.add(d)?,
                cov: g.cov.clone(),
            }),
            Self::PointMass(p) => Self::PointMass(p.add(d)?),
            Self::Empirical(e) => Self::Empirical(Empirical {
                points: e.points.iter().map(|p| p.add(d)).collect::<Result<_>>()?,
            }),
        })
    }

    pub fn affine_pushforward(&self, a: &DMatrix<f64>, b: &Vector) -> Result<Self> {
        let n = self.dim();
        check_dim(n, b.dim())?;
        check_dim(n, a.ncols())?;
        check_dim(n, a.nrows())?;
        let map = |p: &Vector| -> Vector {
            let y = a * p.to_dvector();
            Vector(y.iter().zip(b.iter()).map(|(y, b)| y + b).collect())
        };
        match self {
            Self::Gaussian(g) => {
                let cov = a * &g.cov * a.transpose();
                Self::gaussian(map(&g.mean), cov)
            }
            Self::PointMass(p) => Ok(Self::PointMass(map(p))),
            Self::Empirical(e) => Ok(Self::Empirical(Empirical {
                points: e.points.iter().map(map).collect(),
            })),
        }
    }

    /// Applies `f` pointwise. Only point masses and empirical components
    /// have a closed-form image under an arbitrary map.
    pub fn map_points<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let apply = |p: &Vector| -> Result<Vector> {
            let y = Vector::new(f(p))?;
            check_dim(p.dim(), y.dim())?;
            Ok(y)
        };
        match self {
            Self::Gaussian(_) => Err(Error::NotClosedForm("gaussian")),
            Self::PointMass(p) => Ok(Self::PointMass(apply(p)?)),
            Self::Empirical(e) => Ok(Self::Empirical(Empirical {
                points: e.points.iter().map(apply).collect::<Result<_>>()?,
            })),
        }
    }

    /// Draws `count` points with the chunked seeding contract.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vector> {
        let sampler = Sampler::new(self);
        seed::chunked(count, seed, |rng, len| {
            (0..len).map(|_| Vector(sampler.draw(rng))).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Number of `count` draws satisfying `pred`, without materializing them.
    pub fn count_samples<P>(&self, count: usize, seed: u64, pred: P) -> usize
    where
        P: Fn(&[f64]) -> bool + Sync,
    {
        let sampler = Sampler::new(self);
        seed::chunked(count, seed, |rng, len| {
            let mut buf = vec![0.0; sampler.dim()];
            (0..len)
                .filter(|_| {
                    sampler.draw_into(rng, &mut buf);
                    pred(&buf)
                })
                .count()
        })
        .into_iter()
        .sum()
    }

    fn rank(&self) -> u8 {
        match self {
            Self::Gaussian(_) => 0,
            Self::PointMass(_) => 1,
            Self::Empirical(_) => 2,
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => g.mean.0.iter().chain(g.cov.iter()).copied().collect(),
            Self::PointMass(p) => p.0.clone(),
            Self::Empirical(e) => e.points.iter().flat_map(|p| p.0.iter().copied()).collect(),
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| {
            let (a, b) = (self.params(), other.params());
            a.len().cmp(&b.len()).then_with(|| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        })
    }

    /// Same kind and every parameter within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.rank() != other.rank() {
            return false;
        }
        let (a, b) = (self.params(), other.params());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }
}

enum Sampler<'a> {
    Gaussian { mean: &'a [f64], factor: DMatrix<f64> },
    Point(&'a [f64]),
    Empirical(&'a [Vector]),
}

impl<'a> Sampler<'a> {
    fn new(c: &'a MeasureComponent) -> Self {
        match c {
            MeasureComponent::Gaussian(g) => Sampler::Gaussian {
                mean: &g.mean.0,
                factor: g.factor(),
            },
            MeasureComponent::PointMass(p) => Sampler::Point(&p.0),
            MeasureComponent::Empirical(e) => Sampler::Empirical(&e.points),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Sampler::Gaussian { mean, .. } => mean.len(),
            Sampler::Point(p) => p.len(),
            Sampler::Empirical(pts) => pts[0].dim(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut buf = vec![0.0; self.dim()];
        self.draw_into(rng, &mut buf);
        buf
    }

    fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Sampler::Gaussian { mean, factor } => {
                let n = mean.len();
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = mean[i] + (0..n).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
                }
            }
            Sampler::Point(p) => out.copy_from_slice(p),
            Sampler::Empirical(pts) => {
                let k = rng.random_range(0..pts.len());
                out.copy_from_slice(&pts[k]);
            }
        }
    }
}

/// Weighted finite mixture. Weights may be signed; [`is_probability`]
/// reports whether they are non-negative and sum to one.
///
/// [`is_probability`]: FiniteMixtureMeasure::is_probability
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::MeasureWire", into = "wire::MeasureWire")]
pub struct FiniteMixtureMeasure {
    dim: usize,
    components: Vec<(f64, MeasureComponent)>,
    probability: bool,
}

fn is_probability_weights(weights: impl Iterator<Item = f64>) -> bool {
    let mut sum = 0.0;
    for w in weights {
        if w < 0.0 {
            return false;
        }
        sum += w;
    }
    (sum - 1.0).abs() <= WEIGHT_TOL
}

impl FiniteMixtureMeasure {
    /// Builds a mixture; the probability flag is set iff every weight is
    /// non-negative and they sum to 1 within [`WEIGHT_TOL`].
    pub fn new(components: Vec<(f64, MeasureComponent)>) -> Result<Self> {
        let dim = components.first().ok_or(Error::EmptyMeasure)?.1.dim();
        for (w, c) in &components {
            if !w.is_finite() {
                return Err(Error::InvalidWeight(*w));
            }
            check_dim(dim, c.dim())?;
        }
        let probability = is_probability_weights(components.iter().map(|(w, _)| *w));
        Ok(Self {
            dim,
            components,
            probability,
        })
    }

    pub fn single(component: MeasureComponent) -> Self {
        Self {
            dim: component.dim(),
            components: vec![(1.0, component)],
            probability: true,
        }
    }

    pub fn point_mass(loc: Vector) -> Self {
        Self::single(MeasureComponent::PointMass(loc))
    }

    pub fn gaussian(mean: Vector, cov: DMatrix<f64>) -> Result<Self> {
        Ok(Self::single(MeasureComponent::gaussian(mean, cov)?))
    }

    pub fn standard_normal(dim: usize) -> Self {
        Self::gaussian(Vector::zeros(dim), DMatrix::identity(dim, dim))
            .expect("identity covariance is valid")
    }

    /// One-dimensional N(mean, sd²).
    pub fn normal_1d(mean: f64, sd: f64) -> Result<Self> {
        Self::gaussian(Vector::new(vec![mean])?, DMatrix::from_element(1, 1, sd * sd))
    }

    pub fn empirical(points: Vec<Vector>) -> Result<Self> {
        Ok(Self::single(MeasureComponent::empirical(points)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[(f64, MeasureComponent)] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|(w, _)| *w).collect()
    }

    pub fn is_probability(&self) -> bool {
        self.probability
    }

    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.probability {
            Ok(())
        } else {
            Err(Error::NonProbabilityMeasure)
        }
    }

    /// Analytic mean `Σ w_k · mean_k`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (w, c) in &self.components {
            for (mi, ci) in m.iter_mut().zip(c.mean()) {
                *mi += w * ci;
            }
        }
        m
    }

    fn map_components<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&MeasureComponent) -> Result<MeasureComponent>,
    {
        let components = self
            .components
            .iter()
            .map(|(w, c)| Ok((*w, f(c)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            components,
            probability: self.probability,
        })
    }

    /// Pushforward under `x ↦ x + d`.
    pub fn translate(&self, d: &Vector) -> Result<Self> {
        check_dim(self.dim, d.dim())?;
        self.map_components(|c| c.translate(d))
    }

    /// Pushforward under `x ↦ A x + b`.
    pub fn affine_pushforward(&self, a: &DMatrix<f64>, b: &Vector) -> Result<Self> {
        check_dim(self.dim, b.dim())?;
        self.map_components(|c| c.affine_pushforward(a, b))
    }

    pub fn map_points<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        self.map_components(|c| c.map_points(&f))
    }

    /// Flattens weighted mixtures of mixtures. The result is a probability
    /// measure iff the outer weights are non-negative, sum to one, and every
    /// part is itself a probability measure.
    pub fn mix(parts: &[(f64, &FiniteMixtureMeasure)]) -> Result<Self> {
        let dim = parts.first().ok_or(Error::EmptyMeasure)?.1.dim;
        let mut components = Vec::new();
        for (outer, m) in parts {
            if !outer.is_finite() {
                return Err(Error::InvalidWeight(*outer));
            }
            check_dim(dim, m.dim)?;
            components.extend(m.components.iter().map(|(w, c)| (outer * w, c.clone())));
        }
        let probability = parts.iter().all(|(_, m)| m.probability)
            && is_probability_weights(parts.iter().map(|(w, _)| *w));
        Ok(Self {
            dim,
            components,
            probability,
        })
    }

    /// Draws `count` points: component by weight, then a component draw.
    /// Bit-identical for identical `(measure, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<Vector>> {
        self.require_probability()?;
        let samplers: Vec<Sampler> = self.components.iter().map(|(_, c)| Sampler::new(c)).collect();
        let cumulative = self.cumulative_weights();
        let draws = seed::chunked(count, seed, |rng, len| {
            (0..len)
                .map(|_| {
                    let k = pick(&cumulative, rng);
                    Vector(samplers[k].draw(rng))
                })
                .collect::<Vec<_>>()
        });
        Ok(draws.into_iter().flatten().collect())
    }

    fn cumulative_weights(&self) -> Vec<f64> {
        let total = self.total_mass();
        let mut acc = 0.0;
        self.components
            .iter()
            .map(|(w, _)| {
                acc += w / total;
                acc
            })
            .collect()
    }

    pub fn canonical_components(&self) -> Vec<(f64, MeasureComponent)> {
        let mut comps = self.components.clone();
        comps.sort_by(|(wa, a), (wb, b)| a.canonical_cmp(b).then_with(|| wa.total_cmp(wb)));
        comps
    }

    /// Component-wise comparison after canonical sorting; weights and every
    /// parameter must agree within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.dim != other.dim || self.components.len() != other.components.len() {
            return false;
        }
        self.canonical_components()
            .iter()
            .zip(other.canonical_components().iter())
            .all(|((wa, a), (wb, b))| (wa - wb).abs() <= tol && a.approx_eq(b, tol))
    }
}

fn pick(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

pub(crate) mod wire {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct MeasureWire {
        pub dim: usize,
        pub components: Vec<ComponentWire>,
    }

    #[derive(Serialize, Deserialize)]
    pub struct ComponentWire {
        pub w: f64,
        #[serde(flatten)]
        pub body: BodyWire,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", rename_all = "lowercase")]
    pub enum BodyWire {
        Gaussian { mean: Vector, cov: Vec<Vec<f64>> },
        #[serde(rename = "pointmass")]
        PointMass { loc: Vector },
        Empirical { points: Vec<Vector> },
    }

    impl TryFrom<MeasureWire> for FiniteMixtureMeasure {
        type Error = Error;
        fn try_from(w: MeasureWire) -> Result<Self> {
            let components = w
                .components
                .into_iter()
                .map(|c| {
                    let comp = match c.body {
                        BodyWire::Gaussian { mean, cov } => {
                            let n = cov.len();
                            if cov.iter().any(|r| r.len() != n) {
                                return Err(Error::InvalidCovariance("ragged matrix".into()));
                            }
                            let m = DMatrix::from_fn(n, n, |i, j| cov[i][j]);
                            MeasureComponent::gaussian(mean, m)?
                        }
                        BodyWire::PointMass { loc } => MeasureComponent::PointMass(loc),
                        BodyWire::Empirical { points } => MeasureComponent::empirical(points)?,
                    };
                    Ok((c.w, comp))
                })
                .collect::<Result<Vec<_>>>()?;
            let m = FiniteMixtureMeasure::new(components)?;
            check_dim(w.dim, m.dim)?;
            Ok(m)
        }
    }

    impl From<FiniteMixtureMeasure> for MeasureWire {
        fn from(m: FiniteMixtureMeasure) -> Self {
            let components = m
                .components
                .into_iter()
                .map(|(w, c)| ComponentWire {
                    w,
                    body: match c {
                        MeasureComponent::Gaussian(g) => {
                            let n = g.cov.nrows();
                            BodyWire::Gaussian {
                                mean: g.mean,
                                cov: (0..n).map(|i| (0..n).map(|j| g.cov[(i, j)]).collect()).collect(),
                            }
                        }
                        MeasureComponent::PointMass(loc) => BodyWire::PointMass { loc },
                        MeasureComponent::Empirical(e) => BodyWire::Empirical { points: e.points },
                    },
                })
                .collect();
            MeasureWire {
                dim: m.dim,
                components,
            }
        }
    }
}
