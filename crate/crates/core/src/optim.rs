//! Bracketed one-dimensional minimization.

use crate::scalar::Scalar;

/// Result of a bracketed line search.
#[derive(Debug, Clone, Copy)]
pub struct LineMin<T> {
    pub x: T,
    pub value: T,
    pub iterations: usize,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `xtol * max(1, |x|)` or after
/// `max_iter` iterations. Both endpoints are compared against the interior
/// optimum at the end, so a minimum sitting on a bound is returned exactly.
pub fn golden_section<T, F>(mut f: F, lo: T, hi: T, xtol: T, max_iter: usize) -> LineMin<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    // 1/phi
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while iterations < max_iter {
        let scale = T::one().max(c.abs().max(d.abs()));
        if (b - a).abs() <= xtol * scale {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let (mut x, mut value) = if fc < fd { (c, fc) } else { (d, fd) };
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe <= value {
            x = edge;
            value = fe;
        }
    }
    LineMin {
        x,
        value,
        iterations,
    }
}
