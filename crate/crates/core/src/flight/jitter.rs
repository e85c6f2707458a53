//! Wind as pose noise.

use rand_distr::{Distribution, Normal};

use super::plan::FlightPlan;
use super::FlightError;
use crate::rng::rng_from_seed;

/// Perturbs every pose with independent zero-mean Gaussian noise: `sigma_pos`
/// on each coordinate (m), `sigma_ang` on yaw, pitch and roll (rad).
pub fn apply_wind_jitter(plan: &FlightPlan, seed: u64, sigma_pos: f64, sigma_ang: f64) -> Result<FlightPlan, FlightError> {
    let (pos, ang) = match (Normal::new(0.0, sigma_pos), Normal::new(0.0, sigma_ang)) {
        (Ok(p), Ok(a)) if sigma_pos >= 0.0 && sigma_ang >= 0.0 => (p, a),
        _ => {
            return Err(FlightError::InvalidParameter(format!(
                "jitter sigmas must be finite and non-negative, got {sigma_pos} and {sigma_ang}"
            )))
        }
    };
    let mut out = plan.clone();
    if sigma_pos == 0.0 && sigma_ang == 0.0 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(seed);
    for p in &mut out.poses {
        for c in &mut p.position {
            *c += pos.sample(&mut rng);
        }
        p.yaw += ang.sample(&mut rng);
        p.pitch += ang.sample(&mut rng);
        p.roll += ang.sample(&mut rng);
    }
    Ok(out)
}
