//! Small vector helpers shared by the geometry modules.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

pub type Point = DVector<f64>;

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

pub fn unit(dim: usize, i: usize) -> Point {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

pub fn lex_cmp(a: &Point, b: &Point) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Coordinates rounded to a 1e-12 grid; used as a cache key.
pub fn quantize(x: &Point) -> Vec<i64> {
    x.iter().map(|v| (v * 1e12).round() as i64).collect()
}

pub fn lerp(a: &Point, b: &Point, s: f64) -> Point {
    a * (1.0 - s) + b * s
}

/// Radical inverse of `i` in the given base.
pub fn radical_inverse(base: u32, mut i: u64) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton points in the unit cube, starting at a seed-dependent index.
pub struct Halton {
    dim: usize,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most 24 dimensions");
        Halton {
            dim,
            index: 1 + seed.wrapping_mul(7919) % 1_000_003,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        (0..self.dim).map(|d| radical_inverse(PRIMES[d], i)).collect()
    }
}

/// Modified Gram-Schmidt with pivoting: extends the orthonormal set `against`
/// by up to `count` vectors drawn from `candidates`, always taking the
/// candidate with the largest remaining component next.
pub fn orthonormal_extension(
    against: &[Point],
    candidates: &[Point],
    count: usize,
    tol: f64,
) -> Vec<Point> {
    let mut basis: Vec<Point> = against.to_vec();
    let mut rest: Vec<Point> = candidates.to_vec();
    let mut out = Vec::with_capacity(count);
    for r in rest.iter_mut() {
        for b in &basis {
            let c = b.dot(r);
            *r -= b * c;
        }
    }
    while out.len() < count {
        let mut best = None;
        let mut best_norm = tol;
        for (i, r) in rest.iter().enumerate() {
            let n = r.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        let mut v = rest.swap_remove(i);
        // second pass for stability
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n <= tol {
            continue;
        }
        v /= n;
        for r in rest.iter_mut() {
            let c = v.dot(r);
            *r -= &v * c;
        }
        basis.push(v.clone());
        out.push(v);
    }
    out
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Quantile of a sample by nearest rank on a sorted copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let idx = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    v[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(2, 1), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(2, 3), 0.75);
        assert!((radical_inverse(3, 5) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn extension_is_orthonormal() {
        let n = point(&[1.0, 1.0, 0.0, 0.0]).normalize();
        let cands: Vec<Point> = (0..4).map(|i| unit(4, i)).collect();
        let ext = orthonormal_extension(&[n.clone()], &cands, 3, 1e-12);
        assert_eq!(ext.len(), 3);
        for (i, a) in ext.iter().enumerate() {
            assert!(a.dot(&n).abs() < 1e-14);
            for b in &ext[i + 1..] {
                assert!(a.dot(b).abs() < 1e-14);
            }
            assert!((a.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lexicographic_order() {
        let a = point(&[0.0, 1.0]);
        let b = point(&[0.0, 2.0]);
        assert_eq!(lex_cmp(&a, &b), Ordering::Less);
        assert_eq!(lex_cmp(&b, &b), Ordering::Equal);
    }
}
