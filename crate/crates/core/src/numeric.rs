//! Small numerical kernels shared by the tree reductions.
//!
//! All reductions here have a fixed combination order (left to right at
//! every level of a balanced binary split), so their results do not depend
//! on how many threads evaluate them.

/// `log(e^a + e^b)`.
#[inline]
pub fn logaddexp(a: f64, b: f64) -> f64 {
    let diff = a - b;
    if diff == 0.0 {
        a + std::f64::consts::LN_2
    } else if diff > 0.0 {
        a + (-diff).exp().ln_1p()
    } else if diff < 0.0 {
        b + diff.exp().ln_1p()
    } else if a == f64::NEG_INFINITY {
        // both -inf
        a
    } else {
        // NaN
        diff
    }
}

const PAR_CHUNK: usize = 1 << 14;

/// Pairwise sum with a balanced split at the midpoint.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
        n => {
            let (a, b) = values.split_at(n / 2);
            if n > PAR_CHUNK {
                let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
                x + y
            } else {
                pairwise_sum(a) + pairwise_sum(b)
            }
        }
    }
}

fn pairwise_shifted_exp_sum(values: &[f64], scale: f64, shift: f64) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => (scale * values[0] - shift).exp(),
        n => {
            let (a, b) = values.split_at(n / 2);
            if n > PAR_CHUNK {
                let (x, y) = rayon::join(
                    || pairwise_shifted_exp_sum(a, scale, shift),
                    || pairwise_shifted_exp_sum(b, scale, shift),
                );
                x + y
            } else {
                pairwise_shifted_exp_sum(a, scale, shift) + pairwise_shifted_exp_sum(b, scale, shift)
            }
        }
    }
}

/// `log Σ_i exp(scale * values[i])`, shifted by the exact maximum so no term
/// overflows or underflows to a total of zero.
pub fn log_sum_exp_scaled(values: &[f64], scale: f64) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    let shift = values.iter().map(|v| scale * v).fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return shift;
    }
    shift + pairwise_shifted_exp_sum(values, scale, shift).ln()
}

/// Ordinary least-squares line `y = intercept + slope * x`; returns
/// `(slope, intercept, rms residual)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}
