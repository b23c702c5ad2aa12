//! Simulated hearing-aid client answering gain proposals with binary
//! appraisals drawn from a peaked preference surface.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dists::{Bernoulli, Sample};
use crate::error::{Error, Result};
use crate::real::Real;

/// Weight used when the preference surface should be peaked around `u*`.
pub const PEAKED_LAMBDA: f64 = 250.0;
/// Weight as literally printed; gives an almost flat surface on the unit box.
pub const LITERAL_LAMBDA: f64 = 0.004;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserPrefs<T> {
    pub u_star: [T; 2],
    pub lambda_diag: [T; 2],
}

impl<T: Real> Default for UserPrefs<T> {
    fn default() -> Self {
        Self { u_star: [T::c(0.8), T::c(0.2)], lambda_diag: [T::c(PEAKED_LAMBDA); 2] }
    }
}

impl<T: Real> UserPrefs<T> {
    pub fn new(u_star: [T; 2], lambda_diag: [T; 2]) -> Result<Self> {
        if !lambda_diag.iter().all(|l| *l > T::zero() && l.is_finite()) || !u_star.iter().all(|u| u.is_finite()) {
            return Err(Error::InvalidParameter(format!("user prefs u* = {u_star:?}, Λ = {lambda_diag:?}")));
        }
        Ok(Self { u_star, lambda_diag })
    }

    pub fn literal() -> Self {
        Self { lambda_diag: [T::c(LITERAL_LAMBDA); 2], ..Self::default() }
    }
}

/// `2 / (1 + exp((u − u*)ᵀ Λ (u − u*)))`.
pub fn appraisal_prob<T: Real>(u: &[T; 2], prefs: &UserPrefs<T>) -> T {
    let q: T = (0..2).map(|i| prefs.lambda_diag[i] * (u[i] - prefs.u_star[i]).powi(2)).sum();
    T::c(2.0) / (T::one() + q.exp())
}

pub fn sample_appraisal<T: Real, R: Rng + ?Sized>(u: &[T; 2], prefs: &UserPrefs<T>, rng: &mut R) -> bool {
    let p = appraisal_prob(u, prefs).min(T::one()).max(T::zero());
    Bernoulli::new(p).expect("probability in [0, 1]").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn peak_is_certain() {
        let prefs = UserPrefs::<f64>::default();
        assert_eq!(appraisal_prob(&[0.8, 0.2], &prefs), 1.0);
        let mut rng = seeded(1);
        assert!((0..1000).all(|_| sample_appraisal(&[0.8, 0.2], &prefs, &mut rng)));
    }

    #[test]
    fn worked_example() {
        let p = appraisal_prob(&[0.8, 0.3], &UserPrefs::<f64>::default());
        assert!((p - 2.0 / (1.0 + 2.5_f64.exp())).abs() < 1e-15);
        assert!((p - 0.1516).abs() < 5e-4);
    }

    #[test]
    fn far_away_is_negative() {
        assert!(appraisal_prob(&[100.0, -100.0], &UserPrefs::<f64>::default()) < 1e-300);
    }

    #[test]
    fn literal_weight_is_flat_on_the_box() {
        let prefs = UserPrefs::<f64>::literal();
        assert!(appraisal_prob(&[0.0, 1.0], &prefs) > 0.997);
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(UserPrefs::new([0.5, 0.5], [0.0, 1.0]).is_err());
    }
}
