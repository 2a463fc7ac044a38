//! Small dense BFGS minimiser with a backtracking Armijo line search.

#[derive(Debug, Clone)]
pub(crate) struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub converged: bool,
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm<const N: usize>(a: &[f64; N]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut h = [[0.0; N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    h
}

/// Minimises `objective`, which returns `None` outside its domain.
///
/// Returns `None` only when the objective is undefined at `x0`.
pub(crate) fn bfgs<const N: usize>(
    mut objective: impl FnMut(&[f64; N]) -> Option<(f64, [f64; N])>,
    x0: [f64; N],
    max_iterations: usize,
    gradient_tolerance: f64,
) -> Option<Minimum<N>> {
    const ARMIJO: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 50;

    let (mut f, mut g) = objective(&x0).filter(|(f, g)| f.is_finite() && g.iter().all(|v| v.is_finite()))?;
    let mut x = x0;
    let mut h = identity::<N>();
    let mut fresh = true;

    for _ in 0..max_iterations {
        if inf_norm(&g) <= gradient_tolerance {
            return Some(Minimum {
                x,
                converged: true,
            });
        }

        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            h = identity();
            fresh = true;
            d = g.map(|v| -v);
            slope = dot(&d, &g);
        }

        // Unscaled first steps can leave the region where the objective is
        // finite, so cap the initial move.
        let mut step = if fresh { (1.0 / inf_norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = x;
            for i in 0..N {
                trial[i] += step * d[i];
            }
            if let Some((ft, gt)) = objective(&trial) {
                if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= f + ARMIJO * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if fresh {
                // Steepest descent cannot make progress: a numerical minimum.
                return Some(Minimum {
                    x,
                    converged: false,
                });
            }
            h = identity();
            fresh = true;
            continue;
        };

        let mut s = [0.0; N];
        let mut y = [0.0; N];
        for i in 0..N {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        let small_step = inf_norm(&s) <= 1e-13 * (1.0 + inf_norm(&x));
        x = x_new;
        g = g_new;
        let stalled = (f - f_new).abs() <= 1e-15 * f.abs().max(1.0);
        f = f_new;

        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity();
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = scale;
                }
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }

        if small_step && stalled {
            return Some(Minimum {
                x,
                converged: inf_norm(&g) <= gradient_tolerance,
            });
        }
    }

    let converged = inf_norm(&g) <= gradient_tolerance;
    Some(Minimum {
        x,
        converged,
    })
}

/// Inverse-Hessian update `H <- (I - r s y^T) H (I - r y s^T) + r s s^T`.
fn bfgs_update<const N: usize>(h: &mut [[f64; N]; N], s: &[f64; N], y: &[f64; N], sy: f64) {
    let rho = 1.0 / sy;
    let mut hy = [0.0; N];
    for i in 0..N {
        hy[i] = dot(&h[i], y);
    }
    let yhy = dot(y, &hy);
    for i in 0..N {
        for j in 0..N {
            h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
