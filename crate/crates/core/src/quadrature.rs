//! Globally adaptive composite Gauss–Legendre quadrature and the numeric
//! double-integral route to the branching factor.
//!
//! The numeric route exists to cross-check the closed form: it integrates
//! `P(m) * phi_m(tau)` over `m in [m_min, inf)` and `tau in [0, inf)` after
//! mapping both axes onto the unit interval (`u = tau / (tau + 1)`,
//! `v = m_min / m`). A fixed power grading `x = s^q` at the singular end of
//! each axis turns the algebraic endpoint singularities of the mapped
//! integrand into smooth (or mildly non-smooth) behaviour.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{HawkesParams, InfluenceDistribution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Target for the summed error estimate of each one-dimensional integral.
    pub abs_tol: f64,
    /// Panel budget per one-dimensional integral.
    pub max_panels: usize,
    /// Exponent `q` of the endpoint grading `x = s^q`.
    pub grading: f64,
    /// Gauss–Legendre points per panel.
    pub points: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            max_panels: 4000,
            grading: 16.0,
            points: 10,
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(points: usize) -> Self {
        assert!(points >= 1, "need at least one node");
        let n = points;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess for the i-th root, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Single-panel rule on `[a, b]`.
    pub fn apply(&self, f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum();
        s * half
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

struct Panel {
    a: f64,
    b: f64,
    /// Refined value (sum of the two half-panel rules).
    value: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn make_panel(
    rule: &GaussLegendre,
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    coarse: f64,
) -> Panel {
    let m = 0.5 * (a + b);
    let left = rule.apply(f, a, m);
    let right = rule.apply(f, m, b);
    let value = left + right;
    Panel {
        a,
        b,
        value,
        left,
        right,
        err: (value - coarse).abs(),
    }
}

/// Integrates `f` over `[a, b]`, always bisecting the panel with the largest
/// error estimate until the summed estimate drops below `cfg.abs_tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let rule = GaussLegendre::new(cfg.points);
    let coarse = rule.apply(&mut f, a, b);
    let first = make_panel(&rule, &mut f, a, b, coarse);
    let mut total_err = first.err;
    let mut heap = BinaryHeap::from(vec![first]);
    // Error of panels too narrow to split further; accepted as is.
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut panels = 1usize;

    while total_err + frozen_err > cfg.abs_tol {
        let Some(worst) = heap.pop() else { break };
        if !worst.value.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{}, {}]",
                worst.a, worst.b
            )));
        }
        total_err -= worst.err;
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            frozen_value += worst.value;
            frozen_err += worst.err;
            if frozen_err > cfg.abs_tol {
                return Err(Error::Quadrature(format!(
                    "panel [{}, {}] cannot be refined further",
                    worst.a, worst.b
                )));
            }
            continue;
        }
        panels += 1;
        if panels > cfg.max_panels {
            return Err(Error::Quadrature(format!(
                "panel budget {} exhausted with error estimate {:e}",
                cfg.max_panels,
                total_err + worst.err
            )));
        }
        let l = make_panel(&rule, &mut f, worst.a, m, worst.left);
        let r = make_panel(&rule, &mut f, m, worst.b, worst.right);
        total_err += l.err + r.err;
        heap.push(l);
        heap.push(r);
        if panels % 64 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    let value = heap.iter().map(|p| p.value).sum::<f64>() + frozen_value;
    if !value.is_finite() {
        return Err(Error::Quadrature("non-finite result".into()));
    }
    Ok(value)
}

/// Branching factor by numeric double integration of `P(m) phi_m(tau)`.
pub fn branching_factor_numeric(
    params: &HawkesParams,
    dist: &InfluenceDistribution,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let limit = dist.alpha - 1.0;
    if !(params.beta < limit) || !(params.theta > 0.0) {
        return Err(Error::UndefinedBranching {
            beta: params.beta,
            limit,
            theta: params.theta,
        });
    }
    params.validate()?;

    let q = cfg.grading;
    let ln_q = q.ln();
    let ln_mmin = dist.m_min.ln();
    let ln_alpha1 = (dist.alpha - 1.0).ln();
    let ln_kappa = params.kappa.ln();

    // Magnitude axis: m = m_min / v, v = s^q.
    let magnitude_part = |s: f64| -> (f64, f64) {
        let ln_s = s.ln();
        let ln_v = q * ln_s;
        let ln_m = ln_mmin - ln_v;
        let ln_density = ln_alpha1 + (dist.alpha - 1.0) * ln_mmin - dist.alpha * ln_m;
        let ln_jac = ln_mmin - 2.0 * ln_v + ln_q + (q - 1.0) * ln_s;
        (ln_m, ln_density + ln_jac)
    };
    // Time axis: tau = u / (1 - u), u = 1 - w^q.
    let time_part = |w: f64| -> f64 {
        let ln_w = w.ln();
        let wq = (q * ln_w).exp();
        let ln_one_minus_u = q * ln_w;
        let ln_tau_c = (1.0 - wq + params.c * wq).ln() - ln_one_minus_u;
        let ln_jac = -2.0 * ln_one_minus_u + ln_q + (q - 1.0) * ln_w;
        -(1.0 + params.theta) * ln_tau_c + ln_jac
    };

    let mut inner_error = None;
    let outer = integrate(
        |s| {
            let (ln_m, ln_mag) = magnitude_part(s);
            let ln_prefactor = ln_mag + ln_kappa + params.beta * ln_m;
            match integrate(|w| (ln_prefactor + time_part(w)).exp(), 0.0, 1.0, cfg) {
                Ok(v) => v,
                Err(e) => {
                    inner_error.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        1.0,
        cfg,
    );
    if let Some(e) = inner_error {
        return Err(e);
    }
    outer
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::branching_factor;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(5);
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // Degree 9 is the highest a 5-point rule integrates exactly.
        let v = rule.apply(&mut |x: f64| x.powi(8) + x.powi(9), 0.0, 1.0);
        assert!((v - (1.0 / 9.0 + 1.0 / 10.0)).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let cfg = QuadratureConfig::default();
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let cfg = QuadratureConfig {
            max_panels: 3,
            abs_tol: 1e-14,
            ..Default::default()
        };
        let r = integrate(|x: f64| x.powf(-0.9), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn hand_value() {
        let dist = InfluenceDistribution::with_alpha(3.0).unwrap();
        let p = HawkesParams::new(0.5, 0.5, 1.0, 1.0);
        let v = branching_factor_numeric(&p, &dist, &QuadratureConfig::default()).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-6 * 2.0 / 3.0, "{v}");
    }

    #[test]
    fn fast_decay_limit() {
        let dist = InfluenceDistribution::default();
        let p = HawkesParams::new(1.0, 0.1, 1.0, 10.0);
        let v = branching_factor_numeric(&p, &dist, &QuadratureConfig::default()).unwrap();
        let closed = 1.0 * (dist.alpha - 1.0) / ((dist.alpha - 0.1 - 1.0) * 10.0);
        assert!((v - closed).abs() < 1e-6 * closed);
        assert!(v < 0.2);
    }

    #[test]
    fn non_unit_lower_bound() {
        let dist = InfluenceDistribution::new(2.5, 10.0).unwrap();
        let p = HawkesParams::new(0.2, 0.7, 5.0, 0.4);
        let v = branching_factor_numeric(&p, &dist, &QuadratureConfig::default()).unwrap();
        let closed = branching_factor(&p, &dist).unwrap();
        assert!((v - closed).abs() < 1e-6 * closed, "{v} vs {closed}");
    }
}
