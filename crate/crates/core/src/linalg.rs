//! Small dense determinants and permutation utilities.

use num_complex::Complex64;

/// Determinant of a row-major `n×n` real matrix by partial-pivot elimination.
pub fn det(mut a: Vec<f64>, n: usize) -> f64 {
    det_in_place(&mut a, n)
}

/// [`det`] on a caller-owned buffer, which is overwritten.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return 1.0;
    }
    let mut d = 1.0;
    for c in 0..n {
        let mut p = c;
        let mut best = a[c * n + c].abs();
        for r in c + 1..n {
            let v = a[r * n + c].abs();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(c * n + k, p * n + k);
            }
            d = -d;
        }
        let piv = a[c * n + c];
        d *= piv;
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            if f != 0.0 {
                for k in c + 1..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
    }
    d
}

/// Determinant of a row-major `n×n` complex matrix by partial-pivot elimination.
pub fn det_complex(mut a: Vec<Complex64>, n: usize) -> Complex64 {
    debug_assert_eq!(a.len(), n * n);
    let mut d = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let mut p = c;
        let mut best = a[c * n + c].norm();
        for r in c + 1..n {
            let v = a[r * n + c].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            for k in 0..n {
                a.swap(c * n + k, p * n + k);
            }
            d = -d;
        }
        let piv = a[c * n + c];
        d *= piv;
        for r in c + 1..n {
            let f = a[r * n + c] / piv;
            for k in c + 1..n {
                let t = a[c * n + k];
                a[r * n + k] -= f * t;
            }
        }
    }
    d
}

/// Determinant by Laplace expansion along the first row (reference path for small sizes).
pub fn det_cofactor(a: &[f64], n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n == 1 {
        return a[0];
    }
    let mut total = 0.0;
    for j in 0..n {
        let mut minor = Vec::with_capacity((n - 1) * (n - 1));
        for r in 1..n {
            for c in 0..n {
                if c != j {
                    minor.push(a[r * n + c]);
                }
            }
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * a[j] * det_cofactor(&minor, n - 1);
    }
    total
}

/// All permutations of `0..n` in lexicographic order, each with its sign.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push((p.clone(), permutation_sign(&p)));
        let mut i = n;
        while i > 1 && p[i - 2] >= p[i - 1] {
            i -= 1;
        }
        if i <= 1 {
            break;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 2] {
            j -= 1;
        }
        p.swap(i - 2, j);
        p[i - 1..].reverse();
    }
    out
}

/// Sign of a permutation of `0..n`.
pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1.0;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All strictly increasing tuples of length `len` with entries in `lo..=hi`.
pub fn increasing_tuples(lo: i64, hi: i64, len: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(len);
    fn rec(start: i64, hi: i64, len: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        let mut v = start;
        while v <= hi {
            cur.push(v);
            rec(v + 1, hi, len, cur, out);
            cur.pop();
            v += 1;
        }
    }
    rec(lo, hi, len, &mut cur, &mut out);
    out
}

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
