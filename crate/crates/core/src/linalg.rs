//! Small dense helpers on row-major `n × n` matrices stored in flat slices.

use num_complex::Complex64;

pub(crate) fn cmat_identity(n: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        m[i * n + i] = Complex64::new(1.0, 0.0);
    }
    m
}

pub(crate) fn cmat_mul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for l in 0..n {
            let x = a[i * n + l];
            for j in 0..n {
                c[i * n + j] += x * b[l * n + j];
            }
        }
    }
    c
}

pub(crate) fn cmat_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `m^p` by repeated squaring.
pub(crate) fn cmat_pow(m: &[Complex64], n: usize, mut p: u64) -> Vec<Complex64> {
    let mut result = cmat_identity(n);
    let mut base = m.to_vec();
    while p > 0 {
        if p & 1 == 1 {
            result = cmat_mul(&result, &base, n);
        }
        p >>= 1;
        if p > 0 {
            base = cmat_mul(&base, &base, n);
        }
    }
    result
}

/// `(Σ_{i<p} m^i, m^p)` by binary doubling.
pub(crate) fn cmat_geometric(m: &[Complex64], n: usize, p: u64) -> (Vec<Complex64>, Vec<Complex64>) {
    // invariant: s = Σ_{i<q} m^i, pw = m^q for the prefix q of p's bits read so far
    let mut s = vec![Complex64::new(0.0, 0.0); n * n];
    let mut pw = cmat_identity(n);
    if p == 0 {
        return (s, pw);
    }
    let bits = 64 - p.leading_zeros();
    for b in (0..bits).rev() {
        // q -> 2q
        let s2 = cmat_add(&s, &cmat_mul(&pw, &s, n));
        pw = cmat_mul(&pw, &pw, n);
        s = s2;
        if (p >> b) & 1 == 1 {
            // q -> q + 1
            s = cmat_add(&s, &pw);
            pw = cmat_mul(&pw, m, n);
        }
    }
    (s, pw)
}

/// Max-norm of the difference of two complex matrices.
pub(crate) fn cmat_max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn geometric_sum_matches_naive() {
        let m = vec![c(0.3, 0.1), c(0.2, -0.4), c(0.5, 0.0), c(-0.1, 0.2)];
        for p in 0..20u64 {
            let (s, pw) = cmat_geometric(&m, 2, p);
            let mut naive_s = vec![c(0.0, 0.0); 4];
            let mut naive_p = cmat_identity(2);
            for _ in 0..p {
                naive_s = cmat_add(&naive_s, &naive_p);
                naive_p = cmat_mul(&naive_p, &m, 2);
            }
            assert!(cmat_max_diff(&s, &naive_s) < 1e-14, "p={p}");
            assert!(cmat_max_diff(&pw, &naive_p) < 1e-14, "p={p}");
            assert!(cmat_max_diff(&cmat_pow(&m, 2, p), &naive_p) < 1e-14);
        }
    }
}
