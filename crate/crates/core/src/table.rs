//! Plain-text number formatting shared by the CSV writers.

/// Shortest decimal form that parses back to the same `f64`.
///
/// Rust's `Display` never switches to scientific notation, so very large or
/// very small magnitudes use the exponent form instead.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor();
    if (-5.0..16.0).contains(&exp) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [
            0.0,
            -0.0,
            1.0,
            0.1,
            1e-4,
            1.234_567_890_123_456_7e-300,
            6.02e23,
            -2.5e-7,
            std::f64::consts::PI,
            f64::MAX,
            f64::MIN_POSITIVE,
            5e-324,
        ] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(1e-4), "0.0001");
        assert_eq!(fmt_float(1e-300), "1e-300");
        assert!(fmt_float(f64::NAN).parse::<f64>().unwrap().is_nan());
    }
}
