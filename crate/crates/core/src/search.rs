//! One-dimensional minimisation.

/// Golden-section ratio `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimise a unimodal `f` on `[lo, hi]` by golden-section search until the
/// bracket is narrower than `tol`. Returns `(x, f(x))` for the best point
/// evaluated, including the two endpoints.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let fa = f(a);
    let fb = f(b);
    let mut best = if fb < fa { (b, fb) } else { (a, fa) };

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while (b - a) > tol && iter < max_iter {
        // ties keep the left bracket so flat stretches resolve to smaller x
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx < best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    best
}

/// Logarithmically spaced grid of `count` points on `[lo, hi]`, `lo > 0`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    let (llo, lhi) = (libm::log(lo), libm::log(hi));
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                libm::exp(llo + (lhi - llo) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

/// Linearly spaced grid of `count` points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    if count == 1 {
        return alloc::vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}
