//! Small numeric helpers: compensated summation and binomial coefficients.

use statrs::function::gamma::ln_gamma;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `C(n, k)` as an exact integer when it fits in 128 bits.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i after the multiplication
        let num = acc.checked_mul(n as u128 - k as u128 + i)?;
        acc = num / i;
    }
    Some(acc)
}

pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if let Some(b) = binomial_exact(n, k) {
        return (b as f64).ln();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `C(n, k)` as a float; exact below 2^53, log-gamma beyond 128 bits.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    match binomial_exact(n, k) {
        Some(b) => b as f64,
        None => ln_binomial(n, k).exp(),
    }
}

/// `C(a, b) / C(c, d)`, from exact integers when both fit in 128 bits.
pub fn binomial_ratio(a: u64, b: u64, c: u64, d: u64) -> f64 {
    match (binomial_exact(a, b), binomial_exact(c, d)) {
        (Some(x), Some(y)) => x as f64 / y as f64,
        _ => (ln_binomial(a, b) - ln_binomial(c, d)).exp(),
    }
}

/// Euler's Beta function via log-gamma. Both arguments must be positive.
pub fn beta(a: f64, b: f64) -> f64 {
    if a.fract() == 0.0 && b.fract() == 0.0 && a >= 1.0 && b >= 1.0 && a + b < 1e9 {
        // B(a, b) = 1 / (b·C(a+b−1, b)) for positive integers
        if let Some(c) = binomial_exact((a + b - 1.0) as u64, b as u64) {
            return 1.0 / (b * c as f64);
        }
    }
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[inline]
pub fn sign(exponent: usize) -> f64 {
    if exponent.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
