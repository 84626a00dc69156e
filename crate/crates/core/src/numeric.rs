//! Small numerical kernels shared by the engines: scalar search, stable
//! log-sum-exp, reproducible reductions and seed derivation.

use crate::error::{MirmError, Result};

/// `x ln(x / p)` with the convention `0 ln 0 = 0`.
#[inline]
pub fn xlogx_ratio(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * (x / p).ln()
    }
}

/// Stable `ln Σ exp(v_i)`. Returns `-inf` for an empty iterator.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Result of a bounded scalar maximization.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMax {
    pub arg: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `tol`. The best point seen at
/// any stage is returned, so the result never regresses below the bracket
/// endpoints' interior probes.
pub fn golden_max<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_evals: usize) -> Result<ScalarMax>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    while (b - a).abs() > tol {
        if evals >= max_evals {
            return Err(MirmError::Numerical(format!(
                "golden-section search exceeded {max_evals} evaluations"
            )));
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
        evals += 1;
    }
    Ok(ScalarMax {
        arg: best.0,
        value: best.1,
        evaluations: evals,
    })
}

/// Grid scan followed by golden-section refinement around the best node.
///
/// The grid includes both endpoints. Non-finite grid values (for instance an
/// infinite penalty) are skipped; if every node is non-finite the search
/// fails with `InvalidInput`.
pub fn grid_golden_max<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid: usize,
    rel_tol: f64,
    max_evals: usize,
) -> Result<ScalarMax>
where
    F: FnMut(f64) -> f64,
{
    if !(hi >= lo) {
        return Err(MirmError::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    if hi == lo {
        let v = f(lo);
        return Ok(ScalarMax { arg: lo, value: v, evaluations: 1 });
    }
    let n = grid.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v.is_nan() || v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((i, v));
        }
    }
    let (i, v) = best.ok_or_else(|| {
        MirmError::InvalidInput("objective is -inf or undefined on the whole grid".into())
    })?;
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = (lo + step * (i + 1) as f64).min(hi);
    let refined = golden_max(&mut f, a, b, rel_tol * (hi - lo), max_evals.saturating_sub(n))?;
    let x_best = if i == n - 1 { hi } else { lo + step * i as f64 };
    let evaluations = n + refined.evaluations;
    if refined.value > v {
        Ok(ScalarMax { evaluations, ..refined })
    } else {
        Ok(ScalarMax { arg: x_best, value: v, evaluations })
    }
}

/// Root of a monotone function by bisection on a bracket that is grown
/// geometrically from `[-1, 1]` until the sign changes.
///
/// `f` must be decreasing or increasing; only the sign is used.
pub fn bisect_monotone<F>(mut f: F, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    let mut grow = 0;
    while flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        grow += 1;
        if grow > 200 {
            return Err(MirmError::Model(
                "first-order condition has no sign change (unbounded optimization)".into(),
            ));
        }
        lo *= 2.0;
        hi *= 2.0;
        flo = f(lo);
        fhi = f(hi);
        if !flo.is_finite() && !fhi.is_finite() {
            return Err(MirmError::Numerical("non-finite first-order condition".into()));
        }
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= tol * mid.abs().max(1.0) || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `min_β ln Σ exp(L_c - β m_c)`, the log of the smallest expected
/// exponential loss over one period when `m_c` are the price moves and `L_c`
/// the log-weights of the successors. Moves below `tol` in absolute value
/// count as zero; if all are zero there is nothing to optimize.
pub fn min_log_sum_exp_linear(logs: &[f64], moves: &[f64], tol: f64) -> Result<f64> {
    if moves.iter().all(|m| m.abs() <= tol) {
        return Ok(log_sum_exp(logs.iter().copied()));
    }
    // sign of the derivative: minus the softmax-weighted mean move
    let slope = |beta: f64| {
        let top = logs
            .iter()
            .zip(moves)
            .map(|(l, m)| l - beta * m)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (l, m) in logs.iter().zip(moves) {
            let w = (l - beta * m - top).exp();
            num += w * m;
            den += w;
        }
        -num / den
    };
    let beta = bisect_monotone(slope, 1e-15)?;
    Ok(log_sum_exp(logs.iter().zip(moves).map(|(l, m)| l - beta * m)))
}

/// Chunk length for order-stable parallel reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// Sum with a fixed association order: fixed-size chunks summed pairwise,
/// then the chunk totals summed pairwise. Identical output for any thread
/// count because the tree shape depends only on the length.
pub fn stable_sum(values: &[f64]) -> f64 {
    fn pairwise(v: &[f64]) -> f64 {
        if v.len() <= 32 {
            return v.iter().sum();
        }
        let mid = v.len() / 2;
        pairwise(&v[..mid]) + pairwise(&v[mid..])
    }
    pairwise(values)
}

/// Parallel map-reduce over `0..n` that returns the same bits for any
/// number of worker threads.
pub fn par_stable_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    let chunks = n.div_ceil(REDUCE_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * REDUCE_CHUNK;
            let end = (start + REDUCE_CHUNK).min(n);
            let v: Vec<f64> = (start..end).map(&f).collect();
            stable_sum(&v)
        })
        .collect();
    stable_sum(&partial)
}

/// SplitMix64 finalizer; used to derive independent per-item seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator for item `index` of a seeded experiment.
pub fn item_rng(seed: u64, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = stable_sum(values) / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = stable_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_period_exponential_hedge_is_minus_entropy() {
        let (p, u, d) = (0.3f64, 0.4, 0.1);
        let q = d / (u + d);
        let kl = q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln();
        let v = min_log_sum_exp_linear(&[p.ln(), (1.0 - p).ln()], &[u, -d], 0.0).unwrap();
        assert!((v + kl).abs() < 1e-14, "{v} vs {}", -kl);
        let flat = min_log_sum_exp_linear(&[0.5f64.ln(), 0.5f64.ln()], &[0.0, 0.0], 0.0).unwrap();
        assert!(flat.abs() < 1e-16);
        assert!(min_log_sum_exp_linear(&[0.0, 0.0], &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let r = golden_max(|x| -(x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-12, 10_000).unwrap();
        assert!((r.arg - 0.3).abs() < 1e-8);
    }

    #[test]
    fn grid_golden_handles_boundary_maximum() {
        let r = grid_golden_max(|x| x, 0.0, 1.0, 64, 1e-10, 10_000).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn grid_golden_rejects_everywhere_infinite() {
        let err = grid_golden_max(|_| f64::NEG_INFINITY, 0.0, 1.0, 16, 1e-10, 1000).unwrap_err();
        assert!(matches!(err, MirmError::InvalidInput(_)));
    }

    #[test]
    fn golden_respects_eval_cap() {
        let err = golden_max(|x| -x * x, -1.0, 1.0, 0.0, 50).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn bisect_finds_root_far_from_origin() {
        let r = bisect_monotone(|x| 37.5 - x, 1e-14).unwrap();
        assert!((r - 37.5).abs() < 1e-10);
    }

    #[test]
    fn bisect_reports_missing_sign_change() {
        assert!(matches!(bisect_monotone(|_| 1.0, 1e-12), Err(MirmError::Model(_))));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }

    #[test]
    fn par_sum_is_thread_count_invariant() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let a = par_stable_sum(50_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_stable_sum(50_000, f));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
