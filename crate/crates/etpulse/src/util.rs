//! Small numeric helpers shared across modules.

/// Threshold below which (e^z - 1)/z is evaluated by its Taylor series.
pub(crate) const EXPM1_SERIES_SWITCH: f64 = 1e-8;

/// Computes (e^z - 1)/z with a series fallback near z = 0.
///
/// The function tends to 1 as z -> 0; the two branches agree to better than
/// 1e-12 at the switch point, so zero-crossing parameters (a -> 0) are handled
/// without a special case at every call site.
pub(crate) fn expm1_over(z: f64) -> f64 {
    if z.abs() < EXPM1_SERIES_SWITCH {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

/// splitmix64 mixing step, used to derive independent child seeds.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a purpose tag so that the plant
/// noise, Monte Carlo restarts and parameter draws never share a stream.
pub(crate) fn derive_seed(base: u64, tag: u64) -> u64 {
    splitmix64(base ^ splitmix64(tag))
}
