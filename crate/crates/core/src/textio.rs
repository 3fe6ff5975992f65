//! Shared text-format helpers for the structured-text artifacts.

/// Formats a float with 12 significant digits, the fixed precision for
/// printed reports (files that must round-trip use shortest form instead).
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000000e0".to_string();
    }
    format!("{v:.11e}")
}

/// Shortest round-trip representation; `str::parse::<f64>` recovers the
/// exact bits.
pub fn roundtrip(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}
