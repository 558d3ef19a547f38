//! Deterministic number formatting for emitted CSV/JSON artifacts.

/// Format `x` with `sig` significant digits.
///
/// Plain decimal notation is used when the exponent is moderate, scientific
/// notation otherwise. The output is a valid JSON number and parsing it back
/// recovers `x` to `sig` significant digits, so emit/parse/emit is a fixed
/// point.
pub fn sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Emitted artifacts never contain non-finite numbers; keep a readable
        // token for debug formatting paths.
        return format!("{x}");
    }
    let s = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = s.split_once('e').expect("{:e} always contains an e");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if !(-5..sig as i32 + 5).contains(&exp) {
        return trim_mantissa_zeros(mantissa, exp);
    }
    // Rebuild plain decimal from the mantissa digits.
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
        if out.ends_with('.') {
            out.pop();
        }
    } else {
        let point = (exp + 1) as usize;
        if point >= digits.len() {
            out.push_str(&digits);
            for _ in 0..point - digits.len() {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..point]);
            let frac = digits[point..].trim_end_matches('0');
            if !frac.is_empty() {
                out.push('.');
                out.push_str(frac);
            }
        }
    }
    out
}

/// JSON-escape a string, quotes included.
pub fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn trim_mantissa_zeros(mantissa: &str, exp: i32) -> String {
    let trimmed = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{trimmed}e{exp}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_decimals() {
        assert_eq!(sig(0.3761408083, 10), "0.3761408083");
        assert_eq!(sig(0.732, 10), "0.732");
        assert_eq!(sig(-0.0088, 10), "-0.0088");
        assert_eq!(sig(1.0, 10), "1");
        assert_eq!(sig(3828.0, 10), "3828");
        assert_eq!(sig(0.0, 10), "0");
    }

    #[test]
    fn scientific_for_extreme_exponents() {
        assert_eq!(sig(1.5e-12, 10), "1.5e-12");
        assert_eq!(sig(2.25e20, 4), "2.25e20");
    }

    #[test]
    fn round_trip_is_fixed_point() {
        let values = [
            0.3761408083,
            -0.021800321,
            1.1930271,
            0.0071587,
            123456.789,
            9.999999999e-7,
            -4.0,
        ];
        for &v in &values {
            let once = sig(v, 10);
            let back: f64 = once.parse().unwrap();
            assert_eq!(sig(back, 10), once, "value {v}");
        }
    }

    #[test]
    fn rounds_to_significant_digits() {
        assert_eq!(sig(0.123456789, 4), "0.1235");
        assert_eq!(sig(987654.0, 2), "990000");
    }
}
