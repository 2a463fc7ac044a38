//! Point-process log-likelihood of a cascade under the marked Hawkes model
//! and its analytic gradient.
//!
//! With events `(m_i, t_i)`, `i = 0..n` (the seed is `i = 0`) observed over
//! `[0, T]`:
//!
//! ```text
//! LL = (n-1) ln kappa
//!    + sum_{i>=1} ln S_i,   S_i = sum_{j<i} m_j^beta (t_i - t_j + c)^-(1+theta)
//!    - kappa sum_i m_i^beta [c^-theta - (T + c - t_i)^-theta] / theta
//! ```
//!
//! Tied timestamps are ordered by index, so `j < i` replaces `t_j < t_i`.

use crate::error::{Error, Result};
use crate::model::{Cascade, HawkesParams};

/// Sums from which the likelihood and every partial derivative follow for any
/// `kappa`; the profile fit reuses them without a second O(n^2) pass.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Statistics {
    pub n: usize,
    /// `sum_{i>=1} ln S_i`.
    pub log_trigger: f64,
    /// Partials of `log_trigger` in beta, c, theta.
    pub d_trigger: [f64; 3],
    /// Compensator per unit kappa, `sum_i m_i^beta G_i`.
    pub compensator: f64,
    /// Partials of `compensator` in beta, c, theta.
    pub d_compensator: [f64; 3],
    /// Index of the first event whose inner sum underflowed, if any.
    pub underflow: Option<usize>,
}

impl Statistics {
    pub fn log_likelihood(&self, kappa: f64) -> f64 {
        if self.underflow.is_some() {
            return f64::NEG_INFINITY;
        }
        (self.n as f64 - 1.0) * kappa.ln() + self.log_trigger - kappa * self.compensator
    }

    pub fn gradient(&self, kappa: f64) -> [f64; 4] {
        [
            (self.n as f64 - 1.0) / kappa - self.compensator,
            self.d_trigger[0] - kappa * self.d_compensator[0],
            self.d_trigger[1] - kappa * self.d_compensator[1],
            self.d_trigger[2] - kappa * self.d_compensator[2],
        ]
    }
}

/// Number of events usable for a likelihood over `[0, horizon]`.
fn observed_events(cascade: &Cascade, horizon: f64) -> Result<usize> {
    let n = cascade.count_until(horizon);
    if n < 2 {
        return Err(Error::InsufficientEvents { needed: 2, got: n });
    }
    Ok(n)
}

/// Accumulates the statistics for `(beta, c, theta)`; kappa is factored out.
pub(crate) fn statistics(
    beta: f64,
    c: f64,
    theta: f64,
    times: &[f64],
    log_magnitudes: &[f64],
    horizon: f64,
    with_gradient: bool,
) -> Statistics {
    let n = times.len();
    let decay = 1.0 + theta;
    let weights: Vec<f64> = log_magnitudes.iter().map(|&lm| (beta * lm).exp()).collect();

    let mut st = Statistics {
        n,
        ..Default::default()
    };

    for i in 1..n {
        let ti = times[i];
        let mut s = 0.0;
        let mut s_beta = 0.0;
        let mut s_c = 0.0;
        let mut s_theta = 0.0;
        if with_gradient {
            for j in 0..i {
                let d = ti - times[j] + c;
                let ld = d.ln();
                let w = weights[j] * (-decay * ld).exp();
                s += w;
                s_beta += w * log_magnitudes[j];
                s_c += w / d;
                s_theta += w * ld;
            }
        } else {
            for j in 0..i {
                let d = ti - times[j] + c;
                s += weights[j] * (-decay * d.ln()).exp();
            }
        }
        if !(s > 0.0) {
            st.underflow.get_or_insert(i);
            continue;
        }
        st.log_trigger += s.ln();
        if with_gradient {
            st.d_trigger[0] += s_beta / s;
            st.d_trigger[1] -= decay * s_c / s;
            st.d_trigger[2] -= s_theta / s;
        }
    }

    let ln_c = c.ln();
    let c_pow = (-theta * ln_c).exp();
    for i in 0..n {
        let x = horizon + c - times[i];
        let ln_x = x.ln();
        // (c^-theta - x^-theta) / theta without cancellation for small theta.
        let g = c_pow * -(theta * (ln_c - ln_x)).exp_m1() / theta;
        st.compensator += weights[i] * g;
        if with_gradient {
            let x_pow = (-theta * ln_x).exp();
            let dg_dc = -c_pow / c + x_pow / x;
            let dg_dtheta = (-ln_c * c_pow + ln_x * x_pow) / theta - g / theta;
            st.d_compensator[0] += weights[i] * log_magnitudes[i] * g;
            st.d_compensator[1] += weights[i] * dg_dc;
            st.d_compensator[2] += weights[i] * dg_dtheta;
        }
    }
    st
}

/// Event times and log-magnitudes of the events inside `[0, horizon]`.
pub(crate) fn prepare(cascade: &Cascade, horizon: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = observed_events(cascade, horizon)?;
    let events = &cascade.events()[..n];
    Ok((
        events.iter().map(|e| e.time).collect(),
        events.iter().map(|e| e.magnitude.ln()).collect(),
    ))
}

fn checked_statistics(
    params: &HawkesParams,
    cascade: &Cascade,
    horizon: f64,
    with_gradient: bool,
) -> Result<Statistics> {
    params.validate()?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::ParameterDomain(format!("horizon {horizon} must be finite and >= 0")));
    }
    let (times, log_m) = prepare(cascade, horizon)?;
    Ok(statistics(
        params.beta,
        params.c,
        params.theta,
        &times,
        &log_m,
        horizon,
        with_gradient,
    ))
}

/// Log-likelihood (nats) of the events in `[0, horizon]`.
///
/// Returns negative infinity when an inner intensity sum underflows to zero.
pub fn log_likelihood(params: &HawkesParams, cascade: &Cascade, horizon: f64) -> Result<f64> {
    let st = checked_statistics(params, cascade, horizon, false)?;
    Ok(st.log_likelihood(params.kappa))
}

/// Analytic gradient `(dLL/dkappa, dLL/dbeta, dLL/dc, dLL/dtheta)`.
pub fn log_likelihood_gradient(
    params: &HawkesParams,
    cascade: &Cascade,
    horizon: f64,
) -> Result<[f64; 4]> {
    let st = checked_statistics(params, cascade, horizon, true)?;
    if let Some(index) = st.underflow {
        return Err(Error::Underflow { index });
    }
    Ok(st.gradient(params.kappa))
}
