//! Conversions between requirement sets and scenario sets, recovery of the
//! base measure from a point-mass aggregate, sufficiency pruning and grid
//! requirements.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{check_dim, FiniteMixtureMeasure, MeasureComponent, Vector, WEIGHT_TOL};
use crate::normal;
use crate::quadrants::Quadrant;
use crate::requirements::{
    check_set, quadrant_probability, CheckPolicy, Overall, QuadrantRequirement, RequirementSet,
};
use crate::scenarios::{aggregate_point_mass, EnhancedScenario, ScenarioSet};
use crate::seed;

/// Largest number of grid cells [`hypercube_requirements`] will emit.
pub const MAX_GRID_CELLS: f64 = 1e6;

const MAX_DOUBLINGS: usize = 1000;

/// One scenario per requirement, at a feasible (interior when possible)
/// point of its quadrant with the floor as probability. Point-mass
/// aggregation of any probability measure with the result satisfies `rs`.
pub fn scenarios_from_requirements_pointmass(rs: &RequirementSet) -> ScenarioSet {
    let scenarios = rs
        .requirements()
        .iter()
        .map(|r| {
            EnhancedScenario::new(r.quadrant().interior_point().point().clone(), r.floor())
                .expect("floors are probabilities")
        })
        .collect();
    ScenarioSet::new(scenarios).expect("floors sum to at most one")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftingSynthesisParams {
    pub epsilon: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftingParams {
    Auto,
    Explicit(ShiftingSynthesisParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftingSynthesis {
    pub scenarios: ScenarioSet,
    pub epsilon: f64,
    pub radius: f64,
    /// Upper bound on `P(‖x − center‖ > radius)`.
    pub tail_bound: f64,
    pub center: Vector,
}

/// Upper bound on the mass of `P` outside the closed ball `B_R(center)`.
/// Exact for point masses and empirical components; for a Gaussian
/// `N(μ, Σ)` it uses `‖x − c‖ ≤ ‖x − μ‖ + ‖μ − c‖` and
/// `‖x − μ‖² ≤ λ_max χ²_n`.
pub fn tail_bound(p: &FiniteMixtureMeasure, center: &Vector, radius: f64) -> Result<f64> {
    check_dim(p.dim(), center.dim())?;
    let outside = |x: &[f64]| {
        let d2: f64 = x.iter().zip(center.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        d2.sqrt() > radius
    };
    let mut total = 0.0;
    for (w, c) in p.components() {
        let t = match c {
            MeasureComponent::PointMass(x) => f64::from(u8::from(outside(x))),
            MeasureComponent::Empirical(e) => {
                let pts = e.points();
                pts.iter().filter(|x| outside(x)).count() as f64 / pts.len() as f64
            }
            MeasureComponent::Gaussian(g) => {
                let shift = g.mean().sub(center)?.norm();
                let r = radius - shift;
                let lmax = g.max_eigenvalue();
                if r <= 0.0 {
                    1.0
                } else if lmax <= 0.0 {
                    0.0
                } else {
                    normal::chi_square_sf(r * r / lmax, p.dim())
                }
            }
        };
        total += w * t;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Scenario set whose shifting aggregate with `p` satisfies `rs`: each
/// scenario translates `p` so that a ball holding all but `ε/2` of its
/// mass sits inside the quadrant, with probability `floor / (1 − ε)`.
pub fn scenarios_from_requirements_shifting(
    p: &FiniteMixtureMeasure,
    rs: &RequirementSet,
    params: ShiftingParams,
) -> Result<ShiftingSynthesis> {
    p.require_probability()?;
    if let Some(n) = rs.dim() {
        check_dim(p.dim(), n)?;
    }
    let p_q = rs.total_floor();
    if p_q >= 1.0 - WEIGHT_TOL {
        return Err(Error::TotalProbabilityOne(p_q));
    }
    for (index, r) in rs.requirements().iter().enumerate() {
        if r.quadrant().is_two_sided_constrained() {
            return Err(Error::TwoSidedConstrainedQuadrant { index });
        }
    }
    let center = Vector::new(p.mean())?;
    let (epsilon, radius) = match params {
        ShiftingParams::Auto => {
            let epsilon = (1.0 - p_q) / 2.0;
            (epsilon, auto_radius(p, &center, epsilon / 2.0)?)
        }
        ShiftingParams::Explicit(ps) => {
            let ok = ps.epsilon > 0.0
                && ps.epsilon < 1.0
                && ps.radius > 0.0
                && ps.radius.is_finite()
                && p_q / (1.0 - ps.epsilon) < 1.0;
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "need 0 < epsilon < 1, radius > 0 and p_Q/(1 - epsilon) < 1; got epsilon = {}, radius = {}",
                    ps.epsilon, ps.radius
                )));
            }
            (ps.epsilon, ps.radius)
        }
    };
    let mut scenarios = Vec::with_capacity(rs.len());
    for (index, r) in rs.requirements().iter().enumerate() {
        let ball = r
            .quadrant()
            .inscribe_ball(radius)
            .ok_or(Error::BallPlacementFailed { index, radius })?;
        let prob = (r.floor() / (1.0 - epsilon)).min(1.0);
        scenarios.push(EnhancedScenario::new(ball.sub(&center)?, prob)?);
    }
    Ok(ShiftingSynthesis {
        scenarios: ScenarioSet::new(scenarios)?,
        epsilon,
        radius,
        tail_bound: tail_bound(p, &center, radius)?,
        center,
    })
}

fn auto_radius(p: &FiniteMixtureMeasure, center: &Vector, target: f64) -> Result<f64> {
    let mut radius = 1.0;
    for _ in 0..MAX_DOUBLINGS {
        if tail_bound(p, center, radius)? < target {
            return Ok(radius);
        }
        radius *= 2.0;
    }
    Err(Error::InvalidParams("tail radius search did not converge".into()))
}

/// Singleton requirement `({d_S}, p_S)` per scenario.
pub fn requirements_from_scenarios(m: &ScenarioSet) -> RequirementSet {
    let requirements = m
        .scenarios()
        .iter()
        .map(|s| {
            QuadrantRequirement::new(Quadrant::singleton(s.deflection()), s.probability())
                .expect("scenario probabilities are probabilities")
        })
        .collect();
    RequirementSet::new(requirements).expect("scenario probabilities sum to at most one")
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= WEIGHT_TOL * (1.0 + x.abs().max(y.abs())))
}

/// Inverts point-mass aggregation: removes `p_S` of atom mass at each
/// deflection and renormalizes by `1 / (1 − p_M)`.
pub fn recover_base_measure(q: &FiniteMixtureMeasure, m: &ScenarioSet) -> Result<FiniteMixtureMeasure> {
    if let Some(n) = m.dim() {
        check_dim(q.dim(), n)?;
    }
    let p_m = m.total();
    if p_m >= 1.0 - WEIGHT_TOL {
        return Err(Error::NotInvertible(p_m));
    }
    let mut comps: Vec<(f64, MeasureComponent)> = q.components().to_vec();
    let mut touched = vec![false; comps.len()];
    // aggregation appends scenario atoms in order, so undo from the back
    for (index, s) in m.scenarios().iter().enumerate().rev() {
        let d = s.deflection();
        let mut need = s.probability();
        for k in (0..comps.len()).rev() {
            let (w, c) = &mut comps[k];
            let MeasureComponent::PointMass(loc) = c else { continue };
            if touched[k] && *w <= WEIGHT_TOL || !same_point(loc, d) {
                continue;
            }
            if need == 0.0 {
                if *w <= WEIGHT_TOL {
                    touched[k] = true;
                }
                break;
            }
            let take = w.min(need);
            *w -= take;
            need -= take;
            touched[k] = true;
            if need <= WEIGHT_TOL {
                break;
            }
        }
        if need > WEIGHT_TOL {
            return Err(Error::MissingPointMass { index, needed: need });
        }
    }
    let scale = 1.0 / (1.0 - p_m);
    let kept: Vec<(f64, MeasureComponent)> = comps
        .into_iter()
        .zip(touched)
        .filter(|((w, _), t)| !(*t && *w <= WEIGHT_TOL))
        .map(|((w, c), _)| (w * scale, c))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    FiniteMixtureMeasure::new(kept)
}

/// Greedy backward elimination: drops scenarios in order while the
/// point-mass aggregate still satisfies `rs`, repeating passes until
/// nothing more can be dropped.
pub fn sufficient_subset(
    m: &ScenarioSet,
    rs: &RequirementSet,
    p: &FiniteMixtureMeasure,
    policy: &CheckPolicy,
) -> Result<ScenarioSet> {
    let satisfied = |set: &ScenarioSet| -> Result<bool> {
        let agg = aggregate_point_mass(p, set)?;
        Ok(check_set(&agg, rs, policy)?.overall == Overall::AllSatisfied)
    };
    if !satisfied(m)? {
        return Err(Error::NotSufficientInitially);
    }
    let mut current = m.clone();
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < current.len() {
            let candidate = current.without(i);
            if satisfied(&candidate)? {
                current = candidate;
                changed = true;
            } else {
                i += 1;
            }
        }
        if !changed {
            return Ok(current);
        }
    }
}

/// Closed grid cells over `[lo, hi]` with floors equal to the estimated
/// cell mass minus three standard errors (nothing is subtracted on exact
/// paths). Floors may sum above one since closed cells share faces.
pub fn hypercube_requirements(
    p: &FiniteMixtureMeasure,
    lo: &Vector,
    hi: &Vector,
    cells_per_axis: usize,
    budget: usize,
    seed: u64,
) -> Result<Vec<QuadrantRequirement>> {
    let n = p.dim();
    check_dim(n, lo.dim())?;
    check_dim(n, hi.dim())?;
    if cells_per_axis == 0 || lo.iter().zip(hi.iter()).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidGrid);
    }
    let count = (cells_per_axis as f64).powi(n as i32);
    if count > MAX_GRID_CELLS {
        return Err(Error::GridTooLarge(count));
    }
    let edge = |axis: usize, k: usize| {
        if k == cells_per_axis {
            hi[axis]
        } else {
            lo[axis] + (hi[axis] - lo[axis]) * k as f64 / cells_per_axis as f64
        }
    };
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; n];
    for cell in 0..count as usize {
        let cell_lo: Vec<f64> = (0..n).map(|j| edge(j, idx[j])).collect();
        let cell_hi: Vec<f64> = (0..n).map(|j| edge(j, idx[j] + 1)).collect();
        let q = Quadrant::axis_box(&cell_lo, &cell_hi)?;
        let est = quadrant_probability(p, &q, budget, seed::derive_indexed(seed, cell as u64))?;
        let margin = if est.method.is_monte_carlo() { 3.0 * est.stderr } else { 0.0 };
        out.push(QuadrantRequirement::new(q, (est.value - margin).clamp(0.0, 1.0))?);
        for j in 0..n {
            idx[j] += 1;
            if idx[j] < cells_per_axis {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrants::HalfSpace;
    use crate::requirements::{check_requirement, Verdict};
    use crate::scenarios::aggregate_shifting;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn hs(normal: &[f64], offset: f64) -> HalfSpace {
        HalfSpace::new(v(normal), offset).unwrap()
    }

    fn req(q: Quadrant, floor: f64) -> QuadrantRequirement {
        QuadrantRequirement::new(q, floor).unwrap()
    }

    fn exact() -> CheckPolicy {
        CheckPolicy { budget: 10, ..CheckPolicy::default() }
    }

    /// Random finite mixture of atoms and empirical clouds: every quadrant
    /// probability is computed exactly.
    fn random_discrete(rng: &mut ChaCha8Rng, n: usize) -> FiniteMixtureMeasure {
        let k = rng.random_range(1..=4);
        let mut comps = Vec::new();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for w in raw {
            let mut point = || v(&(0..n).map(|_| rng.random_range(-4.0..4.0)).collect::<Vec<_>>());
            let c = if k % 2 == 0 {
                MeasureComponent::point_mass(point())
            } else {
                MeasureComponent::empirical((0..5).map(|_| point()).collect()).unwrap()
            };
            comps.push((w / total, c));
        }
        FiniteMixtureMeasure::new(comps).unwrap()
    }

    fn random_requirements(rng: &mut ChaCha8Rng, n: usize, max_total: f64) -> RequirementSet {
        let k = rng.random_range(1..=6);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let scale = rng.random_range(0.0..max_total) / raw.iter().sum::<f64>();
        let reqs = raw
            .iter()
            .map(|r| {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
                let m = rng.random_range(1..=3);
                let hss = (0..m)
                    .map(|_| {
                        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                        let c = crate::measures::dot(&a, &x) - rng.random_range(0.0..1.0);
                        hs(&a, c)
                    })
                    .collect();
                req(Quadrant::new(hss).unwrap(), r * scale)
            })
            .collect();
        RequirementSet::new(reqs).unwrap()
    }

    #[test]
    fn pointmass_synthesis_examples() {
        let rs = RequirementSet::new(vec![req(Quadrant::new(vec![hs(&[1.0], 2.0)]).unwrap(), 0.05)]).unwrap();
        let m = scenarios_from_requirements_pointmass(&rs);
        assert_eq!(m.len(), 1);
        assert!(m.scenarios()[0].deflection()[0] >= 2.0);
        assert_eq!(m.scenarios()[0].probability(), 0.05);
        let agg = aggregate_point_mass(&FiniteMixtureMeasure::standard_normal(1), &m).unwrap();
        assert_eq!(check_set(&agg, &rs, &exact()).unwrap().overall, Overall::AllSatisfied);

        let (a, b) = (v(&[1.0, 2.0]), v(&[-1.0, 0.5]));
        let rs = RequirementSet::new(vec![req(Quadrant::singleton(&a), 0.2), req(Quadrant::singleton(&b), 0.3)]).unwrap();
        let m = scenarios_from_requirements_pointmass(&rs);
        for (s, (d, p)) in m.scenarios().iter().zip([(&a, 0.2), (&b, 0.3)]) {
            assert!(s.deflection().sub(d).unwrap().norm() < 1e-9);
            assert_eq!(s.probability(), p);
        }
    }

    #[test]
    fn pointmass_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let rs = random_requirements(&mut rng, n, 0.9);
            let p = random_discrete(&mut rng, n);
            let m = scenarios_from_requirements_pointmass(&rs);
            let agg = aggregate_point_mass(&p, &m).unwrap();
            let report = check_set(&agg, &rs, &exact()).unwrap();
            assert!(report.requirements.iter().all(|r| !r.estimate.method.is_monte_carlo()));
            assert_eq!(report.overall, Overall::AllSatisfied);
        }
    }

    #[test]
    fn shifting_synthesis_example() {
        let p = FiniteMixtureMeasure::standard_normal(1);
        let rs = RequirementSet::new(vec![req(Quadrant::new(vec![hs(&[1.0], 5.0)]).unwrap(), 0.4)]).unwrap();
        let out = scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Auto).unwrap();
        assert!((out.epsilon - 0.3).abs() < 1e-15);
        // P(|x| > R) < 0.15 needs R ≥ 1.44
        assert!(out.radius >= 1.44);
        assert!(2.0 * normal::cdf(-out.radius) < 0.15);
        let s = &out.scenarios.scenarios()[0];
        assert!(s.deflection()[0] >= 5.0 + out.radius - 1e-9);
        assert!((s.probability() - 0.4 / 0.7).abs() < 1e-15);

        let agg = aggregate_shifting(&p, &out.scenarios).unwrap();
        let q = &rs.requirements()[0];
        let check = check_requirement(&agg, q, &exact()).unwrap();
        // oracle: 0.6·P(x ≥ 5) + p′·P(x ≥ 5 − d)
        let d = s.deflection()[0];
        let oracle = (1.0 - s.probability()) * normal::cdf(-5.0) + s.probability() * normal::cdf(d - 5.0);
        assert!((check.estimate.value - oracle).abs() < 1e-14);
        assert!(oracle >= s.probability() * (1.0 - 2.0 * normal::cdf(-out.radius)));
        assert!(oracle > 0.4);
        assert_eq!(check.verdict, Verdict::Satisfied);
    }

    #[test]
    fn shifting_synthesis_errors() {
        let p = FiniteMixtureMeasure::standard_normal(1);
        let band = Quadrant::axis_box(&[0.0], &[1.0]).unwrap();
        let rs = RequirementSet::new(vec![req(band, 0.1)]).unwrap();
        assert_eq!(
            scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Auto),
            Err(Error::TwoSidedConstrainedQuadrant { index: 0 })
        );
        let half = Quadrant::new(vec![hs(&[1.0], 0.0)]).unwrap();
        let rs = RequirementSet::new(vec![req(half.clone(), 0.6), req(half.clone(), 0.4)]).unwrap();
        assert!(matches!(
            scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Auto),
            Err(Error::TotalProbabilityOne(_))
        ));
        let rs = RequirementSet::new(vec![req(half, 0.5)]).unwrap();
        let bad = ShiftingSynthesisParams { epsilon: 0.6, radius: 1.0 };
        assert!(matches!(
            scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Explicit(bad)),
            Err(Error::InvalidParams(_))
        ));
        let huge = ShiftingSynthesisParams { epsilon: 0.1, radius: 1e12 };
        assert!(matches!(
            scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Explicit(huge)),
            Err(Error::BallPlacementFailed { index: 0, .. })
        ));
    }

    #[test]
    fn shifting_synthesis_sound_on_gaussians() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..40 {
            let n = rng.random_range(1..=4);
            let mean: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let var: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..4.0)).collect();
            let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(var));
            let p = FiniteMixtureMeasure::gaussian(v(&mean), cov).unwrap();
            let k = rng.random_range(1..=4);
            let total = rng.random_range(0.05..0.95);
            let reqs: Vec<_> = (0..k)
                .map(|_| {
                    // one-sided bounds per axis: never two-sided constrained
                    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..n)
                        .map(|_| {
                            let c = rng.random_range(-5.0..5.0);
                            match rng.random_range(0..3) {
                                0 => (c, f64::INFINITY),
                                1 => (f64::NEG_INFINITY, c),
                                _ => (f64::NEG_INFINITY, f64::INFINITY),
                            }
                        })
                        .unzip();
                    let (lo, hi) = if lo.iter().chain(&hi).all(|x| x.is_infinite()) {
                        let mut lo = lo;
                        lo[0] = 1.0;
                        (lo, hi)
                    } else {
                        (lo, hi)
                    };
                    req(Quadrant::axis_box(&lo, &hi).unwrap(), total / k as f64)
                })
                .collect();
            let rs = RequirementSet::new(reqs).unwrap();
            let out = scenarios_from_requirements_shifting(&p, &rs, ShiftingParams::Auto).unwrap();
            assert!(out.tail_bound < out.epsilon / 2.0);
            let agg = aggregate_shifting(&p, &out.scenarios).unwrap();
            let report = check_set(&agg, &rs, &exact()).unwrap();
            assert!(report.requirements.iter().all(|r| !r.estimate.method.is_monte_carlo()));
            assert_eq!(report.overall, Overall::AllSatisfied);
        }
    }

    #[test]
    fn shifting_radius_depends_on_p() {
        let rs = RequirementSet::new(vec![req(Quadrant::new(vec![hs(&[1.0], 5.0)]).unwrap(), 0.4)]).unwrap();
        let p1 = FiniteMixtureMeasure::normal_1d(0.0, 1.0).unwrap();
        let p2 = FiniteMixtureMeasure::normal_1d(0.0, 10.0).unwrap();
        let r1 = scenarios_from_requirements_shifting(&p1, &rs, ShiftingParams::Auto).unwrap();
        let r2 = scenarios_from_requirements_shifting(&p2, &rs, ShiftingParams::Auto).unwrap();
        assert!(r2.radius > r1.radius);
        assert_ne!(r1.scenarios, r2.scenarios);
    }

    #[test]
    fn tail_bound_is_an_upper_bound() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = FiniteMixtureMeasure::gaussian(v(&[1.0, -1.0]), cov).unwrap();
        let c = v(&[0.5, 0.0]);
        for r in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let bound = tail_bound(&p, &c, r).unwrap();
            let pts = p.sample(200_000, 5).unwrap();
            let frac = pts.iter().filter(|x| x.sub(&c).unwrap().norm() > r).count() as f64 / pts.len() as f64;
            assert!(bound + 4.0 * (frac * (1.0 - frac) / 2e5).sqrt() + 1e-6 >= frac, "{r}: {bound} < {frac}");
        }
        // 1-D centred: exactly the two-sided normal tail
        let n = FiniteMixtureMeasure::standard_normal(1);
        let t = tail_bound(&n, &v(&[0.0]), 1.5).unwrap();
        assert!((t - 2.0 * normal::cdf(-1.5)).abs() < 1e-12);
    }

    #[test]
    fn requirements_from_scenarios_examples() {
        let m = ScenarioSet::from_pairs(&[(&[1.0, 2.0], 0.03)]).unwrap();
        let rs = requirements_from_scenarios(&m);
        assert_eq!(rs.len(), 1);
        let q = rs.requirements()[0].quadrant();
        assert_eq!(q.halfspaces().len(), 4);
        assert!(q.contains(&[1.0, 2.0]).unwrap());
        assert!(!q.contains(&[1.0, 2.001]).unwrap());
        assert_eq!(rs.requirements()[0].floor(), 0.03);
        for p in [FiniteMixtureMeasure::standard_normal(2), FiniteMixtureMeasure::point_mass(v(&[1.0, 2.0]))] {
            let agg = aggregate_point_mass(&p, &m).unwrap();
            assert_eq!(check_set(&agg, &rs, &exact()).unwrap().overall, Overall::AllSatisfied);
        }
        assert!(requirements_from_scenarios(&ScenarioSet::empty()).is_empty());
    }

    #[test]
    fn recovery_examples() {
        let n = FiniteMixtureMeasure::standard_normal(1);
        let m = ScenarioSet::from_pairs(&[(&[2.0], 0.01)]).unwrap();
        let agg = aggregate_point_mass(&n, &m).unwrap();
        assert!(recover_base_measure(&agg, &m).unwrap().approx_eq(&n, 1e-15));
        let all = ScenarioSet::from_pairs(&[(&[2.0], 1.0)]).unwrap();
        assert_eq!(recover_base_measure(&agg, &all), Err(Error::NotInvertible(1.0)));
        assert!(matches!(recover_base_measure(&n, &m), Err(Error::MissingPointMass { index: 0, .. })));
    }

    #[test]
    fn recovery_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=3);
            let mut p = random_discrete(&mut rng, n);
            if rng.random_bool(0.5) {
                let g = FiniteMixtureMeasure::standard_normal(n);
                p = FiniteMixtureMeasure::mix(&[(0.5, &p), (0.5, &g)]).unwrap();
            }
            let k = rng.random_range(0..=4);
            let total = rng.random_range(0.0..0.99);
            let atoms: Vec<Vec<f64>> = p
                .components()
                .iter()
                .filter_map(|(_, c)| match c {
                    MeasureComponent::PointMass(x) => Some(x.to_vec()),
                    _ => None,
                })
                .collect();
            let pairs: Vec<(Vec<f64>, f64)> = (0..k)
                .map(|_| {
                    // sometimes reuse an atom of P or a previous deflection
                    let d = if !atoms.is_empty() && rng.random_bool(0.3) {
                        atoms[rng.random_range(0..atoms.len())].clone()
                    } else {
                        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
                    };
                    let w = if rng.random_bool(0.1) { 0.0 } else { total / k as f64 };
                    (d, w)
                })
                .collect();
            let refs: Vec<(&[f64], f64)> = pairs.iter().map(|(d, w)| (d.as_slice(), *w)).collect();
            let m = ScenarioSet::from_pairs(&refs).unwrap();
            let agg = aggregate_point_mass(&p, &m).unwrap();
            let back = recover_base_measure(&agg, &m).unwrap();
            assert!(back.approx_eq(&p, 1e-12), "{back:?} vs {p:?}");
        }
    }

    #[test]
    fn sufficiency_examples() {
        let p = FiniteMixtureMeasure::standard_normal(2);
        let m = ScenarioSet::from_pairs(&[(&[1.0, 1.0], 0.1), (&[-1.0, 2.0], 0.2), (&[0.0, 0.0], 0.05)]).unwrap();
        let out = sufficient_subset(&m, &RequirementSet::empty(), &p, &exact()).unwrap();
        assert!(out.is_empty());

        let rs = requirements_from_scenarios(&m);
        assert_eq!(sufficient_subset(&m, &rs, &p, &exact()).unwrap(), m);

        // floors below P's own mass
        let orthant = Quadrant::new(vec![hs(&[1.0, 0.0], 0.0)]).unwrap();
        let rs = RequirementSet::new(vec![req(orthant.clone(), 0.3)]).unwrap();
        let sub = sufficient_subset(&m, &rs, &p, &exact()).unwrap();
        assert!(sub.is_empty());
        let agg = aggregate_point_mass(&p, &sub).unwrap();
        assert_eq!(check_set(&agg, &rs, &exact()).unwrap().overall, Overall::AllSatisfied);

        // P far from the orthant: both scenarios inside it are needed
        let far = FiniteMixtureMeasure::gaussian(v(&[-3.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        let rs = RequirementSet::new(vec![req(orthant, 0.12)]).unwrap();
        let sub = sufficient_subset(&m, &rs, &far, &exact()).unwrap();
        assert_eq!(sub, m.without(1));

        let rs = RequirementSet::new(vec![req(Quadrant::singleton(&v(&[5.0, 5.0])), 0.1)]).unwrap();
        assert_eq!(sufficient_subset(&m, &rs, &p, &exact()), Err(Error::NotSufficientInitially));
    }

    #[test]
    fn sufficient_subsets_are_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.random_range(1..=3);
            let rs = random_requirements(&mut rng, n, 0.6);
            let p = random_discrete(&mut rng, n);
            let mut m = scenarios_from_requirements_pointmass(&rs);
            // pad with irrelevant scenarios far away
            let mut extra: Vec<_> = m.scenarios().to_vec();
            let room = 1.0 - m.total();
            extra.push(EnhancedScenario::new(v(&vec![100.0; n]), room / 3.0).unwrap());
            m = ScenarioSet::new(extra).unwrap();
            let sub = sufficient_subset(&m, &rs, &p, &exact()).unwrap();
            let ok = |s: &ScenarioSet| {
                check_set(&aggregate_point_mass(&p, s).unwrap(), &rs, &exact()).unwrap().overall == Overall::AllSatisfied
            };
            assert!(ok(&sub));
            for i in 0..sub.len() {
                assert!(!ok(&sub.without(i)));
            }
        }
    }

    #[test]
    fn hypercube_examples() {
        let d0 = FiniteMixtureMeasure::point_mass(v(&[0.0]));
        let reqs = hypercube_requirements(&d0, &v(&[-1.0]), &v(&[1.0]), 2, 100, 0).unwrap();
        assert_eq!(reqs.len(), 2);
        assert!(reqs.iter().all(|r| r.floor() == 1.0));

        let n = FiniteMixtureMeasure::standard_normal(1);
        let reqs = hypercube_requirements(&n, &v(&[-1.0]), &v(&[1.0]), 2, 100, 0).unwrap();
        let oracle = normal::cdf(1.0) - normal::cdf(0.0);
        for r in &reqs {
            assert!((r.floor() - oracle).abs() < 1e-14);
            assert!((r.floor() - 0.3413).abs() < 1e-4);
        }

        let far = hypercube_requirements(&d0, &v(&[3.0]), &v(&[4.0]), 5, 100, 0).unwrap();
        assert!(far.iter().all(|r| r.floor() == 0.0));

        let p2 = FiniteMixtureMeasure::standard_normal(2);
        assert!(matches!(
            hypercube_requirements(&p2, &v(&[0.0, 0.0]), &v(&[1.0, 1.0]), 1001, 10, 0),
            Err(Error::GridTooLarge(_))
        ));
        assert_eq!(hypercube_requirements(&n, &v(&[1.0]), &v(&[1.0]), 3, 10, 0), Err(Error::InvalidGrid));
    }

    #[test]
    fn hypercube_floors_hold_for_p() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let p = FiniteMixtureMeasure::gaussian(v(&[0.0, 0.0]), cov).unwrap();
        let reqs = hypercube_requirements(&p, &v(&[-2.0, -2.0]), &v(&[2.0, 2.0]), 3, 20_000, 9).unwrap();
        assert_eq!(reqs.len(), 9);
        let policy = CheckPolicy { budget: 20_000, seed: 1234, z: 3.0 };
        for r in &reqs {
            let c = check_requirement(&p, r, &policy).unwrap();
            assert_ne!(c.verdict, Verdict::Violated);
        }
        let mass: f64 = reqs.iter().map(|r| r.floor()).sum();
        assert!(mass < 1.0 && mass > 0.8);
    }
}
