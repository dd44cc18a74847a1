//! Independent oracles used by the acceptance suite. Nothing here calls the
//! solvers under test.

/// `2 / (W + 1 + q W sum_{l<m} (2q)^l)`, summed term by term.
pub fn attempt_probability(q: f64, cw: u32, m: u32) -> f64 {
    let w = cw as f64;
    let series: f64 = (0..m).map(|l| (2.0 * q).powi(l as i32)).sum();
    2.0 / (w + 1.0 + q * w * series)
}

/// Damped fixed-point iteration `tau <- (1 - lambda) tau + lambda T(tau)` on
/// the coupled attempt probabilities. Returns the limit and the number of
/// iterations, or `None` without convergence.
pub fn damped_fixed_point(
    cws: &[u32],
    m: &[u32],
    pers: &[f64],
    start: Vec<f64>,
    lambda: f64,
    max_iter: usize,
) -> Option<(Vec<f64>, usize)> {
    let n = cws.len();
    let mut tau = start;
    for it in 0..max_iter {
        let mut step: f64 = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let others: f64 = (0..n).filter(|&j| j != i).map(|j| 1.0 - tau[j]).product();
                let q = 1.0 - others * (1.0 - pers[i]);
                let t = (1.0 - lambda) * tau[i] + lambda * attempt_probability(q, cws[i], m[i]);
                step = step.max((t - tau[i]).abs());
                t
            })
            .collect();
        tau = next;
        if step < 1e-15 {
            return Some((tau, it + 1));
        }
    }
    None
}

/// Index and value of the largest `f` over `points` evenly spaced nodes.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
