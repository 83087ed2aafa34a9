use super::CodecError;

/// Largest representable magnitude in hundredths of an angstrom, exclusive.
pub const COORD_LIMIT_CENTS: i64 = 5000;

/// Rounds to hundredths, half away from zero. Errors outside (-50, 50).
pub fn quantize(value: f64) -> Result<i64, CodecError> {
    let cents = (value * 100.0).round();
    if !cents.is_finite() || cents.abs() >= COORD_LIMIT_CENTS as f64 {
        return Err(CodecError::CoordinateOutOfRange(value));
    }
    Ok(cents as i64)
}

pub fn quantized_value(value: f64) -> Result<f64, CodecError> {
    quantize(value).map(|c| (c as f64 / 100.0).copysign(value))
}

/// Splits a coordinate into an integer token carrying the sign and a
/// two-digit fraction token: `-1.23` becomes `("-1", ".23")`.
pub fn tokenize_coordinate(value: f64) -> Result<(String, String), CodecError> {
    let cents = quantize(value)?;
    let negative = value.is_sign_negative();
    let mag = cents.unsigned_abs();
    let int = format!("{}{}", if negative { "-" } else { "" }, mag / 100);
    let frac = format!(".{:02}", mag % 100);
    Ok((int, frac))
}

pub fn detokenize_coordinate(int: &str, frac: &str) -> Result<f64, CodecError> {
    let bad = || CodecError::MalformedCoordinate(format!("{int}{frac}"));
    let (negative, digits) = match int.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, int),
    };
    let digits_ok = !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit());
    let frac_digits = frac.strip_prefix('.').ok_or_else(bad)?;
    if !digits_ok || frac_digits.len() != 2 || !frac_digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let whole: i64 = digits.parse().map_err(|_| bad())?;
    let cents = whole * 100 + frac_digits.parse::<i64>().map_err(|_| bad())?;
    let v = cents as f64 / 100.0;
    Ok(if negative { -v } else { v })
}

pub fn format_coordinate(value: f64) -> Result<String, CodecError> {
    let (i, f) = tokenize_coordinate(value)?;
    Ok(i + &f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let t = |v| tokenize_coordinate(v).unwrap();
        assert_eq!(t(-1.23), ("-1".into(), ".23".into()));
        assert_eq!(t(-0.34), ("-0".into(), ".34".into()));
        assert_eq!(t(0.0), ("0".into(), ".00".into()));
        assert_eq!(t(-0.001), ("-0".into(), ".00".into()));
        assert_eq!(t(0.125), ("0".into(), ".13".into()));
        assert_eq!(t(-0.125), ("-0".into(), ".13".into()));
        assert_eq!(t(49.99), ("49".into(), ".99".into()));
        assert!(matches!(tokenize_coordinate(75.0), Err(CodecError::CoordinateOutOfRange(_))));
        assert!(tokenize_coordinate(49.996).is_err());
        assert!(tokenize_coordinate(f64::NAN).is_err());
    }

    #[test]
    fn grid_bijection() {
        for cents in -4999i64..=4999 {
            let v = cents as f64 / 100.0;
            let (i, f) = tokenize_coordinate(v).unwrap();
            let back = detokenize_coordinate(&i, &f).unwrap();
            assert_eq!(back, v, "{cents}");
            assert_eq!(quantize(back).unwrap(), cents);
        }
    }

    #[test]
    fn malformed() {
        assert!(detokenize_coordinate("1", "23").is_err());
        assert!(detokenize_coordinate("x", ".23").is_err());
        assert!(detokenize_coordinate("1", ".2").is_err());
    }
}
