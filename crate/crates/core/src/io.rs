//! Shared output helpers.

/// Full-precision float formatting (17 significant digits) used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
