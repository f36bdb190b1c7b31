//! Factorials, binomials and small combinatoric helpers.
//!
//! Everything below `n = 21` is computed in exact integer arithmetic and
//! converted once; larger arguments switch to log space so that cutoffs up to
//! a few tens of photons stay representable in `f64`.

/// Largest `n` for which `n!` fits in a `u128` without loss that matters here.
const EXACT_FACTORIAL_MAX: u64 = 20;

/// Upper bound on ln-factorial table size; photon numbers in this crate stay
/// far below it.
const LN_TABLE_LEN: usize = 256;

fn ln_factorial_table() -> &'static [f64; LN_TABLE_LEN] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; LN_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0_f64; LN_TABLE_LEN];
        for n in 2..LN_TABLE_LEN {
            t[n] = t[n - 1] + (n as f64).ln();
        }
        t
    })
}

fn factorial_u128(n: u64) -> u128 {
    (2..=n as u128).product()
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        (factorial_u128(n) as f64).ln()
    } else {
        assert!((n as usize) < LN_TABLE_LEN, "photon number {n} out of range");
        ln_factorial_table()[n as usize]
    }
}

/// `n!` as a float, exact below 21.
pub fn factorial(n: u64) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        factorial_u128(n) as f64
    } else {
        ln_factorial(n).exp()
    }
}

/// Binomial coefficient `C(n, k)` as a float, exact where the factorials are.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_FACTORIAL_MAX {
        (factorial_u128(n) / (factorial_u128(k) * factorial_u128(n - k))) as f64
    } else {
        (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp()
    }
}

/// `sqrt(C(n, k))`, in log space for large `n`.
pub fn sqrt_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_FACTORIAL_MAX {
        binomial(n, k).sqrt()
    } else {
        (0.5 * (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k))).exp()
    }
}

/// `sqrt((base + j)! / base!)`: the ladder-operator normalization picked up by
/// applying `j` creation operators to `|base>`.
pub fn sqrt_rising_factorial(base: u64, j: u64) -> f64 {
    if base + j <= EXACT_FACTORIAL_MAX {
        let p: u128 = ((base + 1) as u128..=(base + j) as u128).product();
        (p as f64).sqrt()
    } else {
        (0.5 * (ln_factorial(base + j) - ln_factorial(base))).exp()
    }
}
