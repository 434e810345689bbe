//! Yearly control functions of the simulation.

/// Product price in year `t >= 1`: `start * (1 - rate)^(t - 1)`, applied as
/// one discount per elapsed year.
pub fn price_at(starting_price: f64, rate: f64, t: usize) -> f64 {
    (1..t).fold(starting_price, |p, _| p * (1.0 - rate))
}

/// Information variable in year `t`: `upper - sqrt(upper) * (t / curvature) - 1`,
/// clamped below at zero.
pub fn info_value(upper_limit: f64, curvature: f64, t: usize) -> f64 {
    (upper_limit - upper_limit.sqrt() * (t as f64 / curvature) - 1.0).max(0.0)
}

/// Cumulative percentage of agents reached by media in year `t`:
/// `2 sqrt(t) + 2t + 1`, capped at 100.
pub fn media_fraction(t: usize) -> f64 {
    let t = t as f64;
    (2.0 * t.sqrt() + 2.0 * t + 1.0).min(100.0)
}

/// Number of agents out of `n` reached at a percentage.
pub fn media_target(pct: f64, n: usize) -> usize {
    ((pct.clamp(0.0, 100.0) / 100.0 * n as f64).round() as usize).min(n)
}
