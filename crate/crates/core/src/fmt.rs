/// Formats a float with 17 significant digits so every CSV value round-trips
/// to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // keep "-0" out of exported files
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}
