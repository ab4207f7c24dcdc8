//! Number formatting shared by every text output.

/// Formats `x` with nine significant digits in the style of C's `%.9g`:
/// fixed notation for decimal exponents in `[-4, 9)`, scientific otherwise,
/// trailing zeros removed. Rounding is to nearest with ties to even, which
/// is what the standard library does for exact decimal ties.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-4..9).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let tail = tail.trim_end_matches('0');
        let exp_sign = if exp < 0 { '-' } else { '+' };
        return if tail.is_empty() {
            format!("{sign}{head}e{exp_sign}{:02}", exp.abs())
        } else {
            format!("{sign}{head}.{tail}e{exp_sign}{:02}", exp.abs())
        };
    }

    let (int_part, frac_part) = if exp >= 0 {
        let split = (exp as usize) + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        ("0".to_string(), format!("{zeros}{digits}"))
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}
