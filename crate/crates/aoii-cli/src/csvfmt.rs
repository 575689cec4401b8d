//! Deterministic CSV number formatting: six significant digits, plain
//! decimal where readable, scientific otherwise, trailing zeros trimmed.
//! Formatting is a pure function of the value, so identical runs yield
//! byte-identical files.

/// Formats with 6 significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{:.5e}", x);
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    trim_zeros(s)
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

/// Joins one CSV row; fields are already formatted.
pub fn row(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}
