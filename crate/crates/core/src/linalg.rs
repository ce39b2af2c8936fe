//! Deterministic data-parallel vector kernels.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added
//! in order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::scalar::Real;

const CHUNK: usize = 8192;

pub fn par_sum<F: Real>(len: usize, f: impl Fn(usize) -> F + Sync) -> F {
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<F> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut acc = F::zero();
            for i in lo..hi {
                acc += f(i);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(F::zero(), |a, b| a + b)
}

pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    par_sum(a.len(), |i| a[i] * b[i])
}

pub fn norm_sq<F: Real>(a: &[F]) -> F {
    par_sum(a.len(), |i| a[i] * a[i])
}

/// `out = a + s * b`
pub fn lincomb<F: Real>(a: &[F], s: F, b: &[F]) -> Vec<F> {
    a.par_iter()
        .zip(b.par_iter())
        .map(|(&x, &y)| x + s * y)
        .collect()
}

/// `out = sa * a + sb * b`
pub fn lincomb2<F: Real>(sa: F, a: &[F], sb: F, b: &[F]) -> Vec<F> {
    a.par_iter()
        .zip(b.par_iter())
        .map(|(&x, &y)| sa * x + sb * y)
        .collect()
}

pub fn scale_in_place<F: Real>(a: &mut [F], s: F) {
    a.par_iter_mut().for_each(|v| *v *= s);
}

pub fn sub<F: Real>(a: &[F], b: &[F]) -> Vec<F> {
    lincomb(a, -F::one(), b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_exact_on_integers() {
        let n = 3 * CHUNK + 17;
        let s: f64 = par_sum(n, |i| i as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
    }

    #[test]
    fn combinations() {
        let a = vec![1.0, 2.0];
        let b = vec![3.0, -1.0];
        assert_eq!(lincomb(&a, 2.0, &b), vec![7.0, 0.0]);
        assert_eq!(lincomb2(0.5, &a, 1.0, &b), vec![3.5, 0.0]);
        assert_eq!(dot(&a, &b), 1.0);
    }
}
