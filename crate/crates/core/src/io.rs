//! Shared formatting and file helpers.

use std::path::Path;

use crate::error::{Error, Result};

/// Significant digits used for every floating-point value written to disk.
pub const OUTPUT_DIGITS: usize = 12;

/// Formats `x` with [`OUTPUT_DIGITS`] significant digits, `%g`-style: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", OUTPUT_DIGITS - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..OUTPUT_DIGITS as i32).contains(&exp) {
        let decimals = (OUTPUT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(-2.5), "-2.5");
        assert_eq!(fmt_f64(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_f64(1.5e-9), "1.5e-9");
        assert_eq!(fmt_f64(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt_f64(0.0001234), "0.0001234");
    }

    #[test]
    fn parse_back_is_close() {
        for &x in &[1.0e-300, 7.123456789012345, -0.000987654321987, 4.2e17] {
            let y: f64 = fmt_f64(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 1e-11, "{x} -> {y}");
        }
    }
}
