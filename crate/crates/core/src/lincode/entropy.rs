use super::CodeError;

/// `H(x) = -x log2 x - (1-x) log2 (1-x)` on the open unit interval.
pub fn binary_entropy(x: f64) -> Result<f64, CodeError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(CodeError::InvalidArgument(format!(
            "binary entropy needs 0 < x < 1, got {x}"
        )));
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Inverse of [`binary_entropy`] on `(0, 1/2]`, by bisection.
pub fn inv_binary_entropy(y: f64) -> Result<f64, CodeError> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(CodeError::InvalidArgument(format!(
            "inverse binary entropy needs 0 < y <= 1, got {y}"
        )));
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 0.5);
    // H is increasing on (0, 1/2]
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `gamma = H^{-1}(1/2)`, the relative weight threshold for concealment counting.
pub fn gamma() -> f64 {
    inv_binary_entropy(0.5).expect("0.5 is in range")
}

/// Exact binomial coefficient as f64 (exact for the n <= 64 range used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Lower bound `2^(k - n/2) / sqrt(n)` on codewords at a typical distance.
pub fn codeword_count_bound(n: usize, k: usize) -> f64 {
    2f64.powf(k as f64 - n as f64 / 2.0) / (n as f64).sqrt()
}

/// `2^(n/2) / sqrt(n)`.
pub fn binomial_bound(n: usize) -> f64 {
    2f64.powf(n as f64 / 2.0) / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.1100279).unwrap() - 0.5).abs() < 1e-6);
        assert!(binary_entropy(0.0).is_err());
        assert!(binary_entropy(1.0).is_err());
        for x in [0.01, 0.2, 0.37, 0.49] {
            let d = binary_entropy(x).unwrap() - binary_entropy(1.0 - x).unwrap();
            assert!(d.abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_entropy() {
        assert_eq!(inv_binary_entropy(1.0).unwrap(), 0.5);
        assert!((gamma() - 0.1100279).abs() < 1e-6);
        for y in [0.01, 0.2, 0.5, 0.77, 0.999] {
            let x = inv_binary_entropy(y).unwrap();
            assert!(x > 0.0 && x <= 0.5);
            assert!((binary_entropy(x).unwrap() - y).abs() < 1e-8);
        }
        assert!(inv_binary_entropy(0.0).is_err());
        assert!(inv_binary_entropy(1.5).is_err());
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(7, 3), 35.0);
        assert_eq!(binomial(64, 8), 4_426_165_368.0);
        assert_eq!(binomial(3, 5), 0.0);
    }
}
