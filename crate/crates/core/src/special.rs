//! Log-space special functions.

/// Natural log of the gamma function for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// `ln(m!)` for `m` in `0..=max`, tabulated once.
#[derive(Debug, Clone)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn new(max: usize) -> Self {
        let table = (0..=max).map(|m| ln_gamma(m as f64 + 1.0)).collect();
        Self { table }
    }

    #[inline]
    pub fn get(&self, m: u64) -> f64 {
        self.table[m as usize]
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }

    /// `ln B(s + 1, f + 1) = ln(s! f! / (s + f + 1)!)`.
    #[inline]
    pub fn ln_beta_counts(&self, successes: u64, failures: u64) -> f64 {
        self.get(successes) + self.get(failures) - self.get(successes + failures + 1)
    }
}

/// `ln Σ exp(x_i)`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sums after sorting, so any permutation of `terms` gives bit-identical results.
pub(crate) fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn ln_gamma_reference_values() {
        // mpmath, 30 digits.
        let cases = [
            (0.5, 0.572_364_942_924_700_087_071_713_675_677),
            (1.5, -0.120_782_237_635_245_222_345_518_445_782),
            (2.5, 0.284_682_870_472_919_159_632_494_669_683),
            (10.5, 13.940_625_219_403_763_633_161_237_888),
            (100.5, 361.435_540_467_777_621_555_251_912_703),
            (65537.0, 661_287.962_120_074_462_757_899_171_861),
        ];
        for (x, want) in cases {
            let got = ln_gamma(x);
            assert!(rel(got, want) < 1e-12, "ln_gamma({x}) = {got}, want {want}");
        }
        assert!(ln_gamma(1.0).abs() < 1e-15);
        assert!(ln_gamma(2.0).abs() < 1e-15);
    }

    #[test]
    fn log_factorial_matches_direct_product() {
        let lf = LogFactorial::new(20);
        let mut acc = 0.0f64;
        for m in 1..=20u64 {
            acc += (m as f64).ln();
            assert!((lf.get(m) - acc).abs() < 1e-12);
        }
        // 1!·1!/3! = 1/6
        assert!((lf.ln_beta_counts(1, 1) - (1.0f64 / 6.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
