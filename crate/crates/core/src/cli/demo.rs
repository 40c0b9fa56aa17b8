//! Named demonstrations. Each prints its construction and the values it
//! computed, then PASS or FAIL for the property it illustrates.

use std::fmt::Write as _;

use clap::ValueEnum;
use nalgebra::DMatrix;
use rand::Rng;
use serde_json::{json, Value};

use super::{Failure, RunConfig};
use crate::error::Error;
use crate::measures::{FiniteMixtureMeasure, MeasureComponent, Vector};
use crate::normal;
use crate::quadrants::{HalfSpace, Quadrant};
use crate::requirements::{check_requirement, check_set, quadrant_probability, Overall, QuadrantRequirement, RequirementSet, Verdict};
use crate::scenarios::{aggregate_point_mass, aggregate_shifting, aggregate_successive, AggregationMethod, ScenarioSet};
use crate::seed::{derive_seed, rng_from};
use crate::synthesis::{recover_base_measure, scenarios_from_requirements_pointmass};
use crate::valuation::{pushforward_capital, sst_aggregate_capital, CapitalDistribution, Extremum, ValuationFunction};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    Successive,
    Counterexample,
    SstEquivalence,
    Recovery,
    HedgedCompany,
}

impl DemoName {
    pub fn label(self) -> &'static str {
        match self {
            DemoName::Successive => "successive",
            DemoName::Counterexample => "counterexample",
            DemoName::SstEquivalence => "sst-equivalence",
            DemoName::Recovery => "recovery",
            DemoName::HedgedCompany => "hedged-company",
        }
    }
}

struct Report {
    text: String,
    values: Value,
    passed: bool,
}

/// Runs a demo, returning its text, JSON report and whether it passed.
pub fn run(name: DemoName, config: &RunConfig) -> Result<(String, Value, bool), Failure> {
    let report = match name {
        DemoName::Successive => successive()?,
        DemoName::Counterexample => counterexample(config)?,
        DemoName::SstEquivalence => sst_equivalence(config)?,
        DemoName::Recovery => recovery()?,
        DemoName::HedgedCompany => hedged_company(config)?,
    };
    let mut text = format!("demo {}\n", name.label());
    text.push_str(&report.text);
    let _ = writeln!(text, "{}", if report.passed { "PASS" } else { "FAIL" });
    let json = json!({
        "demo": name.label(),
        "passed": report.passed,
        "values": report.values,
    });
    Ok((text, json, report.passed))
}

fn v(x: &[f64]) -> Vector {
    Vector::new(x.to_vec()).expect("finite demo input")
}

/// Total weight of point masses located exactly at each of `locs`.
pub fn atom_weights(m: &FiniteMixtureMeasure, locs: &[&[f64]]) -> Vec<f64> {
    locs.iter()
        .map(|loc| {
            m.components()
                .iter()
                .filter_map(|(w, c)| match c {
                    MeasureComponent::PointMass(x) if x.as_slice() == *loc => Some(*w),
                    _ => None,
                })
                .sum()
        })
        .collect()
}

fn successive() -> Result<Report, Error> {
    let (d1, p1, d2, p2) = (1.0, 0.1, -2.0, 0.3);
    let d0 = FiniteMixtureMeasure::point_mass(v(&[0.0]));
    let m1 = ScenarioSet::from_pairs(&[(&[d1], p1)])?;
    let m2 = ScenarioSet::from_pairs(&[(&[d2], p2)])?;
    let both = ScenarioSet::from_pairs(&[(&[d1], p1), (&[d2], p2)])?;
    let locs: [&[f64]; 3] = [&[0.0], &[d1], &[d2]];
    let joint = atom_weights(&aggregate_point_mass(&d0, &both)?, &locs);
    let fwd = atom_weights(&aggregate_successive(&d0, &[m1.clone(), m2.clone()], AggregationMethod::PointMass)?, &locs);
    let rev = atom_weights(&aggregate_successive(&d0, &[m2, m1], AggregationMethod::PointMass)?, &locs);
    let expected = [
        vec![1.0 - p1 - p2, p1, p2],
        vec![(1.0 - p1) * (1.0 - p2), p1 * (1.0 - p2), p2],
        vec![(1.0 - p1) * (1.0 - p2), p1, (1.0 - p1) * p2],
    ];
    let got = [joint, fwd, rev];
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12);
    let matches = got.iter().zip(&expected).all(|(g, e)| close(g, e));
    let distinct = !close(&got[0], &got[1]) && !close(&got[0], &got[2]) && !close(&got[1], &got[2]);
    let mut text = format!("P = δ0, M1 = {{({d1}, {p1})}}, M2 = {{({d2}, {p2})}}; weights on (0, d1, d2)\n");
    for (label, w) in ["one step", "M1 then M2", "M2 then M1"].iter().zip(&got) {
        let _ = writeln!(text, "  {label:<11} {:.6} {:.6} {:.6}", w[0], w[1], w[2]);
    }
    let _ = writeln!(text, "  closed forms match: {matches}; pairwise different: {distinct}");
    Ok(Report {
        text,
        values: json!({ "one_step": got[0], "m1_then_m2": got[1], "m2_then_m1": got[2], "closed_forms_match": matches, "pairwise_different": distinct }),
        passed: matches && distinct,
    })
}

fn counterexample(config: &RunConfig) -> Result<Report, Error> {
    let p_max = 0.5;
    let (lo, hi) = (1.0, 2.0);
    let p = FiniteMixtureMeasure::standard_normal(1);
    let sup_mass = (hi - lo) * normal::pdf(0.0);
    let box_q = Quadrant::axis_box(&[lo], &[hi])?;
    let req = QuadrantRequirement::new(box_q.clone(), p_max)?;
    let mut rng = rng_from(derive_seed(config.seed, "demo-counterexample"));
    let mut worst: f64 = 0.0;
    let mut all_below = true;
    for _ in 0..50 {
        let m = random_scenarios(&mut rng)?;
        let est = quadrant_probability(&aggregate_shifting(&p, &m)?, &box_q, config.budget, 0)?;
        worst = worst.max(est.value);
        all_below &= !est.method.is_monte_carlo() && est.value < p_max;
    }
    let rs = RequirementSet::new(vec![req.clone()])?;
    let m = scenarios_from_requirements_pointmass(&rs);
    let pt = check_requirement(&aggregate_point_mass(&p, &m)?, &req, &config.policy("demo-counterexample"))?;
    let fixed = pt.verdict == Verdict::Satisfied;
    let mut text = format!("P = N(0,1), box [{lo}, {hi}], p_max = {p_max}; sup of P over intervals of this length ≤ {sup_mass:.6}\n");
    let _ = writeln!(text, "  shifting, 50 random scenario sets: max P_M(box) = {worst:.6} (< p_max: {all_below})");
    let _ = writeln!(
        text,
        "  point-mass construction: d = {:.6}, P_M(box) = {:.6} ({:?})",
        m.scenarios()[0].deflection()[0],
        pt.estimate.value,
        pt.verdict
    );
    Ok(Report {
        text,
        values: json!({ "sup_interval_mass": sup_mass, "max_shifted_mass": worst, "shifting_always_below": all_below, "pointmass_mass": pt.estimate.value, "pointmass_satisfied": fixed }),
        passed: sup_mass < p_max && all_below && fixed,
    })
}

fn random_scenarios(rng: &mut impl Rng) -> Result<ScenarioSet, Error> {
    let k = rng.random_range(1..=5);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    let scale = rng.random_range(0.05..1.0) / raw.iter().sum::<f64>();
    let pairs: Vec<([f64; 1], f64)> = raw.iter().map(|r| ([rng.random_range(-4.0..4.0)], r * scale)).collect();
    let refs: Vec<(&[f64], f64)> = pairs.iter().map(|(d, p)| (d.as_slice(), *p)).collect();
    ScenarioSet::from_pairs(&refs)
}

/// Standard error of an empirical quantile: `√(α(1−α)/n) / f(q)` with the
/// density estimated by a central difference of the CDF.
fn quantile_stderr(d: &CapitalDistribution, q: f64, alpha: f64, n: usize) -> f64 {
    let h = 0.05;
    let density = (d.cdf(q + h) - d.cdf(q - h)) / (2.0 * h);
    (alpha * (1.0 - alpha) / n as f64).sqrt() / density
}

fn sst_equivalence(config: &RunConfig) -> Result<Report, Error> {
    let g1 = FiniteMixtureMeasure::gaussian(v(&[0.0, 0.0]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]))?;
    let g2 = FiniteMixtureMeasure::gaussian(v(&[1.0, -1.0]), DMatrix::identity(2, 2))?;
    let p = FiniteMixtureMeasure::mix(&[(0.6, &g1), (0.4, &g2)])?;
    let m = ScenarioSet::from_pairs(&[(&[1.0, 0.5], 0.05), (&[-2.0, 1.0], 0.02)])?;
    let lin = ValuationFunction::linear(v(&[2.0, -1.0]), 0.0)?;
    let shifted = pushforward_capital(&lin, &aggregate_shifting(&p, &m)?, config.budget, 0)?;
    let sst = sst_aggregate_capital(&pushforward_capital(&lin, &p, config.budget, 0)?, &lin.impacts(&m)?)?;
    let params = |d: &CapitalDistribution| -> Vec<[f64; 3]> {
        d.measure()
            .components()
            .iter()
            .map(|(w, c)| match c {
                MeasureComponent::Gaussian(g) => [*w, g.mean()[0], g.cov()[(0, 0)]],
                other => [*w, other.mean()[0], 0.0],
            })
            .collect()
    };
    let (a, b) = (params(&shifted), params(&sst));
    let max_diff = if a.len() == b.len() {
        a.iter().zip(&b).flat_map(|(x, y)| x.iter().zip(y).map(|(s, t)| (s - t).abs())).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let additive_ok = max_diff <= 1e-12;

    // V = −|x| is not additive: the two constructions disagree
    let neg_abs = ValuationFunction::max_affine(Extremum::Min, vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)])?;
    let n1 = FiniteMixtureMeasure::standard_normal(1);
    let m1 = ScenarioSet::from_pairs(&[(&[5.0], 0.5)])?;
    let alpha = 0.25;
    let lhs = pushforward_capital(&neg_abs, &aggregate_shifting(&n1, &m1)?, config.budget, derive_seed(config.seed, "demo-sst-lhs"))?;
    let pv = pushforward_capital(&neg_abs, &n1, config.budget, derive_seed(config.seed, "demo-sst-rhs"))?;
    let rhs = sst_aggregate_capital(&pv, &neg_abs.impacts(&m1)?)?;
    let (ql, qr) = (lhs.quantile(alpha)?, rhs.quantile(alpha)?);
    let se = quantile_stderr(&lhs, ql, alpha, config.budget).hypot(quantile_stderr(&rhs, qr, alpha, config.budget));
    let gap_ok = (ql - qr).abs() > 10.0 * se;

    let mut text = String::from("linear V = 2x1 − x2 on a two-component Gaussian mixture, two scenarios\n");
    let _ = writeln!(text, "  max |parameter difference| shifting vs SST aggregation: {max_diff:.3e}");
    let _ = writeln!(text, "V = −|x|, P = N(0,1), M = {{(5, 0.5)}}, α = {alpha}");
    let _ = writeln!(text, "  quantile after shifting {ql:.4}, after SST aggregation {qr:.4}, stderr {se:.2e}");
    Ok(Report {
        text,
        values: json!({ "linear_max_parameter_difference": max_diff, "nonadditive_quantile_shifting": ql, "nonadditive_quantile_sst": qr, "quantile_stderr": se }),
        passed: additive_ok && gap_ok,
    })
}

fn recovery() -> Result<Report, Error> {
    let n = FiniteMixtureMeasure::normal_1d(0.0, 1.0)?;
    let d1 = FiniteMixtureMeasure::point_mass(v(&[1.0]));
    let p = FiniteMixtureMeasure::mix(&[(0.7, &n), (0.3, &d1)])?;
    let m = ScenarioSet::from_pairs(&[(&[2.0], 0.01), (&[1.0], 0.05)])?;
    let agg = aggregate_point_mass(&p, &m)?;
    let back = recover_base_measure(&agg, &m)?;
    let equal = back.approx_eq(&p, 1e-12);
    let all = ScenarioSet::from_pairs(&[(&[2.0], 1.0)])?;
    let refused = matches!(recover_base_measure(&agg, &all), Err(Error::NotInvertible(_)));
    let mut text = String::from("P = 0.7 N(0,1) + 0.3 δ1, M = {(2, 0.01), (1, 0.05)}\n");
    let _ = writeln!(text, "  aggregate weights {:?}", agg.weights());
    let _ = writeln!(text, "  recovered weights {:?}; equals P: {equal}", back.weights());
    let _ = writeln!(text, "  p_M = 1 refused as not invertible: {refused}");
    Ok(Report {
        text,
        values: json!({ "aggregate": agg, "recovered": back, "equal": equal, "p_m_one_refused": refused }),
        passed: equal && refused,
    })
}

fn hedged_company(config: &RunConfig) -> Result<Report, Error> {
    // risk factors: ten-year rate i10 and an equity return
    let p = FiniteMixtureMeasure::gaussian(
        v(&[0.015, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0075f64.powi(2), 0.0, 0.0, 0.04]),
    )?;
    let low_rate = Quadrant::new(vec![HalfSpace::new(v(&[-1.0, 0.0]), -0.005)?])?;
    let rs = RequirementSet::new(vec![QuadrantRequirement::new(low_rate, 0.01)?])?;
    let report = check_set(&p, &rs, &config.policy("demo-hedged"))?;
    let prob = report.requirements[0].estimate.value;
    let oracle = normal::cdf(-4.0 / 3.0);

    let m = ScenarioSet::from_pairs(&[(&[-0.01, 0.0], 0.01)])?;
    let hedged = ValuationFunction::linear(v(&[0.0, 50.0]), 0.0)?;
    let unhedged = ValuationFunction::linear(v(&[2000.0, 50.0]), 0.0)?;
    let origin = [0.0, 0.0];
    let dv1 = hedged.impact(m.scenarios()[0].deflection())? - hedged.evaluate(&origin)?;
    let dv2 = unhedged.impact(m.scenarios()[0].deflection())? - unhedged.evaluate(&origin)?;
    let alpha = 0.005;
    let agg = aggregate_shifting(&p, &m)?;
    let var = |val: &ValuationFunction, q: &FiniteMixtureMeasure| -> Result<f64, Error> {
        pushforward_capital(val, q, config.budget, 0)?.value_at_risk(alpha)
    };
    let (h0, h1) = (var(&hedged, &p)?, var(&hedged, &agg)?);
    let (u0, u1) = (var(&unhedged, &p)?, var(&unhedged, &agg)?);
    let passed = report.overall == Overall::AllSatisfied
        && (prob - oracle).abs() <= 1e-10
        && dv1 == 0.0
        && dv2 < 0.0
        && (h1 - h0).abs() <= 1e-9
        && u1 > u0;
    let mut text = String::from("P = N((1.5%, 0), diag(0.75%², 0.2²)); requirement P(i10 ≤ 0.5%) ≥ 1%\n");
    let _ = writeln!(text, "  P(i10 ≤ 0.5%) = {prob:.12} (Φ(−4/3) = {oracle:.12}), {:?}", report.overall);
    let _ = writeln!(text, "  scenario i10 −1% with p = 1%: ΔV hedged = {dv1}, ΔV unhedged = {dv2}");
    let _ = writeln!(text, "  VaR_{alpha} hedged {h0:.6} → {h1:.6}, unhedged {u0:.6} → {u1:.6}");
    Ok(Report {
        text,
        values: json!({ "probability": prob, "analytic": oracle, "impact_hedged": dv1, "impact_unhedged": dv2, "var_hedged": [h0, h1], "var_unhedged": [u0, u1] }),
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_demo_passes() {
        let config = RunConfig {
            budget: 200_000,
            ..RunConfig::default()
        };
        for name in DemoName::value_variants() {
            let (text, json, passed) = run(*name, &config).unwrap();
            assert!(passed, "{text}");
            assert_eq!(json["passed"], Value::Bool(true));
            assert!(text.ends_with("PASS\n"));
        }
    }

    #[test]
    fn atom_weights_sum_duplicates() {
        let a = FiniteMixtureMeasure::point_mass(v(&[1.0]));
        let b = FiniteMixtureMeasure::point_mass(v(&[2.0]));
        let m = FiniteMixtureMeasure::mix(&[(0.25, &a), (0.5, &b), (0.25, &a)]).unwrap();
        assert_eq!(atom_weights(&m, &[&[1.0], &[2.0], &[3.0]]), vec![0.5, 0.5, 0.0]);
    }
}
