//! Factorials and binomial coefficients.
//!
//! Below `21!` every factorial is exactly representable as `u64` and is
//! converted to `f64` directly; above that the log-gamma route is used.

use std::sync::OnceLock;

const EXACT_LIMIT: usize = 20;
const TABLE_LEN: usize = 512;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0f64;
        table.push(0.0);
        for k in 1..TABLE_LEN {
            if k <= EXACT_LIMIT {
                acc = (factorial_exact(k) as f64).ln();
            } else {
                acc += (k as f64).ln();
            }
            table.push(acc);
        }
        table
    })
}

/// `n!` as an exact integer, valid for `n <= 20`.
pub fn factorial_exact(n: usize) -> u64 {
    assert!(n <= EXACT_LIMIT, "{n}! overflows u64");
    (1..=n as u64).product()
}

pub fn factorial(n: usize) -> f64 {
    if n <= EXACT_LIMIT {
        factorial_exact(n) as f64
    } else {
        ln_factorial(n).exp()
    }
}

pub fn ln_factorial(n: usize) -> f64 {
    match ln_factorial_table().get(n) {
        Some(v) => *v,
        None => ln_gamma_stirling(n as f64 + 1.0),
    }
}

// Stirling series for large arguments; only reached past the table.
fn ln_gamma_stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0)))
}

const PASCAL_ROWS: usize = 160;

fn pascal() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(PASCAL_ROWS);
        rows.push(vec![1.0]);
        for n in 1..PASCAL_ROWS {
            let prev = &rows[n - 1];
            let mut row = vec![1.0; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    })
}

/// Binomial coefficient from a cached Pascal triangle where available.
#[inline]
pub fn binomial_cached(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    match pascal().get(n) {
        Some(row) => row[k],
        None => binomial(n, k),
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Binomial coefficient; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_LIMIT {
        let k = k.min(n - k);
        let mut acc: u64 = 1;
        for i in 0..k as u64 {
            acc = acc * (n as u64 - i) / (i + 1);
        }
        acc as f64
    } else {
        ln_binomial(n, k).exp().round()
    }
}

/// Binomial probability `C(n, k) p^k (1-p)^(n-k)`, with `0^0 = 1`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if n <= 60 {
        binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    } else {
        (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()
    }
}
