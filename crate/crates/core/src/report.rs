//! Number formatting shared by every CSV and text artifact.

/// Formats `x` with 6 significant digits in plain decimal notation,
/// e.g. `16.6374`, `0.500000`, `2.00000`.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit (9.999996 -> 10.00000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if rounded != 0.0 && (rounded.abs().log10().floor() as i32) > magnitude && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

/// Formats an optional metric; absent values become an empty cell.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}
