//! Number formatting shared by the CSV writers.

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed. Non-finite values print as `NA`.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return "NA".to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `sig` for optional values; `None` prints as `NA`.
pub fn sig_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "NA".to_string(), |v| sig(v, digits))
}
