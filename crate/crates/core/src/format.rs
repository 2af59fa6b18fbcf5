//! Reproducible number formatting for CSV and summary output.

/// Six significant digits in plain decimal notation, falling back to
/// scientific notation for very small or very large magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// [`sig6`] for optional values; `None` becomes an empty field.
pub fn sig6_opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.013), "0.0130000");
        assert_eq!(sig6(36.4), "36.4000");
        assert_eq!(sig6(-1.5), "-1.50000");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.234e-9), "1.23400e-9");
        assert_eq!(sig6_opt(None), "");
    }
}
