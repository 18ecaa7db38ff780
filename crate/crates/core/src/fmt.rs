//! Decimal formatting for exported floats.

/// Formats `v` with 17 significant digits in scientific notation, which
/// round-trips every finite `f64` exactly.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}
