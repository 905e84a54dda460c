use super::checks::*;
use super::{CheckDef, Verdict};
use crate::error::{Error, Result};
use crate::scenario::ScenarioKind::{self, *};

const ST: &[ScenarioKind] = &[Sphere, Torus];

static CATALOG: [CheckDef; 23] = [
    CheckDef {
        id: "w-vanishes-at-base-time",
        claim: "W(T) tends to 0 as T increases to the base time",
        scenarios: ST,
        verdict: Verdict::Trend,
        tolerance: 1e-10,
        run: w_vanishes_at_base_time,
    },
    CheckDef {
        id: "nash-time-average",
        claim: "N(T) is the time average of W over [T, t]",
        scenarios: ST,
        verdict: Verdict::Identity,
        tolerance: 1e-3,
        run: nash_time_average_identity,
    },
    CheckDef {
        id: "w-below-nash-below-zero",
        claim: "W(T) <= N(T) <= 0",
        scenarios: &[Euclidean, Torus, Product, Quotient, Sphere],
        verdict: Verdict::Inequality,
        tolerance: 1e-6,
        run: w_below_nash_below_zero,
    },
    CheckDef {
        id: "w-production-identity",
        claim: "dW/dT = 2 tau int |Ric + Hess f - g/(2 tau)|^2 dnu >= 0",
        scenarios: ST,
        verdict: Verdict::Identity,
        tolerance: 2e-2,
        run: w_production_identity,
    },
    CheckDef {
        id: "nash-derivative-identity",
        claim: "dN/dT = (N - W)/tau",
        scenarios: ST,
        verdict: Verdict::Identity,
        tolerance: 1e-3,
        run: nash_derivative_identity,
    },
    CheckDef {
        id: "nash-deficit-integral",
        claim: "N(T) = -int_T^t 2 sigma (1 - sigma/tau) int |Ric + Hess f - g/(2 sigma)|^2 dnu ds",
        scenarios: ST,
        verdict: Verdict::Identity,
        tolerance: 5e-3,
        run: nash_deficit_identity,
    },
    CheckDef {
        id: "gaussian-shrinker-equality",
        claim: "W and N vanish identically on the Gaussian shrinker",
        scenarios: &[Euclidean],
        verdict: Verdict::Identity,
        tolerance: 1e-8,
        run: gaussian_shrinker_equality,
    },
    CheckDef {
        id: "poincare-inequality",
        claim: "Var_nu(u) <= 2 (t - s) int |grad u|^2 dnu, with equality for linear u on R^n",
        scenarios: &[Euclidean, Torus, Sphere],
        verdict: Verdict::Inequality,
        tolerance: 1e-8,
        run: poincare_inequality,
    },
    CheckDef {
        id: "log-sobolev-inequality",
        claim: "int u log u dnu - (int u dnu) log(int u dnu) <= (t - s) int |grad u|^2/u dnu for u >= 0",
        scenarios: &[Euclidean, Torus, Sphere],
        verdict: Verdict::Inequality,
        tolerance: 1e-8,
        run: log_sobolev_inequality,
    },
    CheckDef {
        id: "hamilton-gradient-estimate",
        claim: "t |grad u|^2/u <= u log(J/u) for positive heat solutions bounded by J",
        scenarios: ST,
        verdict: Verdict::Inequality,
        tolerance: 1e-6,
        run: hamilton_gradient_estimate,
    },
    CheckDef {
        id: "conjugate-gradient-boundedness",
        claim: "tau |grad u|^2/u^2 <= C (1 + log(J/u))^2 for conjugate heat solutions bounded by J",
        scenarios: ST,
        verdict: Verdict::Diagnostic,
        tolerance: 2.0,
        run: conjugate_gradient_boundedness,
    },
    CheckDef {
        id: "potential-gradient-growth",
        claim: "|grad f| grows at most linearly in the distance to the base point",
        scenarios: &[Euclidean, Torus, Sphere],
        verdict: Verdict::Diagnostic,
        tolerance: 2.0,
        run: potential_gradient_growth,
    },
    CheckDef {
        id: "distance-distortion",
        claim: "d/dt dist >= -2(n - 1)((2/3) K r0 + 1/r0) when Ric <= (n - 1) K near both endpoints",
        scenarios: &[Sphere],
        verdict: Verdict::Inequality,
        tolerance: 0.0,
        run: distance_distortion,
    },
    CheckDef {
        id: "torus-nash-divergence",
        claim: "N(tau) + (k/2) log(4 pi tau) + k/2 -> log V, below Vol/e - (k/2) log(4 pi tau) - k/2",
        scenarios: &[Torus],
        verdict: Verdict::Identity,
        tolerance: 1e-2,
        run: torus_nash_divergence,
    },
    CheckDef {
        id: "product-nash-additivity",
        claim: "Nash entropy is additive over Riemannian products",
        scenarios: &[Product],
        verdict: Verdict::Identity,
        tolerance: 1e-6,
        run: product_nash_additivity,
    },
    CheckDef {
        id: "covering-nash-inequality",
        claim: "the Nash entropy of a finite cover dominates that of the base",
        scenarios: &[Quotient],
        verdict: Verdict::Inequality,
        tolerance: 1e-9,
        run: covering_nash_inequality,
    },
    CheckDef {
        id: "nash-decay-lower-bound",
        claim: "N(T) >= -n/2 - log M_{T,T+1} - (n/2) log(4 pi (t - T)) for t - T >= 1",
        scenarios: &[Euclidean, Torus, Sphere],
        verdict: Verdict::Inequality,
        tolerance: 1e-9,
        run: nash_decay_lower_bound,
    },
    CheckDef {
        id: "nash-gradient-bound",
        claim: "|grad_x N|^2 <= ((N + n/2)^2 + n)(log M_{T,T+1} + (n/2) log(4 pi tau) + n/2)/(tau - 1)",
        scenarios: &[Cigar],
        verdict: Verdict::Inequality,
        tolerance: 1e-9,
        run: nash_gradient_bound,
    },
    CheckDef {
        id: "nash-base-point-independence",
        claim: "N_x(T) - N_y(T) -> 0 as T -> -infinity",
        scenarios: &[Cigar],
        verdict: Verdict::Trend,
        tolerance: 1e-9,
        run: nash_base_point_independence,
    },
    CheckDef {
        id: "nash-mean-value-inequality",
        claim: "N_{(x,t)}(T) <= (1 + q) int N_{(y,s)}(T) dnu + q (log M + (n/2) log(4 pi (s - T)) + n/2) + (n/2) log((s - T)/(t - T)), q = (t - s)/(t - T - 1)",
        scenarios: ST,
        verdict: Verdict::Inequality,
        tolerance: 1e-5,
        run: nash_mean_value_inequality,
    },
    CheckDef {
        id: "entropy-chain",
        claim: "W(T) <= N(T) <= (1 - eps) W(t + eps (T - t))",
        scenarios: ST,
        verdict: Verdict::Inequality,
        tolerance: 1e-6,
        run: entropy_chain,
    },
    CheckDef {
        id: "entropy-gap-evidence",
        claim: "the asymptotic W vanishes on the Gaussian shrinker and stays away from 0 on the round sphere",
        scenarios: &[Euclidean, Sphere],
        verdict: Verdict::Inequality,
        tolerance: 1e-8,
        run: entropy_gap_evidence,
    },
    CheckDef {
        id: "noncollapsing-evidence",
        claim: "bounded asymptotic N comes with volume ratios bounded below; diverging N with collapsing ratios",
        scenarios: &[Euclidean, Sphere, Cigar],
        verdict: Verdict::Trend,
        tolerance: 1e-6,
        run: noncollapsing_evidence,
    },
];

/// Every check, in report order.
pub fn catalog() -> &'static [CheckDef] {
    &CATALOG
}

pub fn find(id: &str) -> Result<&'static CheckDef> {
    CATALOG
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::UnknownCheck(id.to_string()))
}

/// Checks selected by a suite name (`default`, `identities`, `inequalities`,
/// `trends`, `diagnostics`) or a single check id.
pub fn suite(name: &str) -> Result<Vec<&'static CheckDef>> {
    let by = |v: Verdict| CATALOG.iter().filter(|c| c.verdict == v).collect();
    Ok(match name {
        "default" | "all" => CATALOG.iter().collect(),
        "identities" => by(Verdict::Identity),
        "inequalities" => by(Verdict::Inequality),
        "trends" => by(Verdict::Trend),
        "diagnostics" => by(Verdict::Diagnostic),
        id => vec![find(id)?],
    })
}
