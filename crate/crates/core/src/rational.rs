//! Exact decimal rounding and formatting for rational quantities.
//!
//! Survey tables and the coverage index are reported at fixed decimal
//! precision with half-up rounding. Doing this on rationals keeps every
//! displayed digit exact instead of trusting float formatting.

use num_rational::Rational64;

/// Rounds half-up (0.005 -> 0.01) to `decimals` places, exactly.
pub fn round_half_up(v: Rational64, decimals: u32) -> Rational64 {
    let scale = Rational64::from_integer(10i64.pow(decimals));
    let shifted = v * scale + Rational64::new(1, 2);
    Rational64::from_integer(shifted.floor().to_integer()) / scale
}

/// Formats `v` with exactly `decimals` places after half-up rounding.
pub fn format_fixed(v: Rational64, decimals: u32) -> String {
    let scale = 10i64.pow(decimals);
    let rounded = round_half_up(v, decimals) * Rational64::from_integer(scale);
    debug_assert!(rounded.is_integer());
    let units = rounded.to_integer();
    let sign = if units < 0 { "-" } else { "" };
    let abs = units.abs();
    if decimals == 0 {
        return format!("{sign}{abs}");
    }
    format!(
        "{sign}{}.{:0width$}",
        abs / scale,
        abs % scale,
        width = decimals as usize
    )
}

/// True when `v` rounds (half-up) to the same `decimals`-place value as `target`.
pub fn rounds_to(v: Rational64, target: Rational64, decimals: u32) -> bool {
    round_half_up(v, decimals) == target
}

pub fn ratio_to_f64(v: Rational64) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}
