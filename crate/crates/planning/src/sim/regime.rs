use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Friction coefficient of the fingertip material.
pub const FINGER_FRICTION: f64 = 0.35;

/// Effective contact friction `√(μ_f μ_o)`.
pub fn effective_friction(mu_f: f64, mu_o: f64) -> f64 {
    (mu_f.max(0.0) * mu_o.max(0.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionRegime {
    /// `μ_o ~ U[0.4, 1.0]`.
    Nominal,
    /// `μ_o ~ U[0.15, 1.2]`.
    Wide,
    /// `μ_o ~ ½ N(0.18, 0.03²) + ½ N(1.0, 0.05²)`, truncated to positive values.
    Bimodal,
}

impl FrictionRegime {
    pub const ALL: [FrictionRegime; 3] = [FrictionRegime::Nominal, FrictionRegime::Wide, FrictionRegime::Bimodal];

    pub fn as_str(&self) -> &'static str {
        match self {
            FrictionRegime::Nominal => "nominal",
            FrictionRegime::Wide => "wide",
            FrictionRegime::Bimodal => "bimodal",
        }
    }

    /// Draws an object friction coefficient.
    pub fn sample_mu_o<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FrictionRegime::Nominal => rng.gen_range(0.4..1.0),
            FrictionRegime::Wide => rng.gen_range(0.15..1.2),
            FrictionRegime::Bimodal => loop {
                let (m, s) = if rng.gen_bool(0.5) { (0.18, 0.03) } else { (1.0, 0.05) };
                let mu = Normal::new(m, s).expect("valid normal").sample(rng);
                if mu > 0.0 {
                    break mu;
                }
            },
        }
    }

    /// Range of object friction the regime can produce, used to scale process noise.
    pub fn mu_o_span(&self) -> (f64, f64) {
        match self {
            FrictionRegime::Nominal => (0.4, 1.0),
            FrictionRegime::Wide => (0.15, 1.2),
            FrictionRegime::Bimodal => (0.06, 1.2),
        }
    }
}

impl fmt::Display for FrictionRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrictionRegime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(FrictionRegime::Nominal),
            "wide" => Ok(FrictionRegime::Wide),
            "bimodal" => Ok(FrictionRegime::Bimodal),
            other => Err(format!("unknown regime '{other}' (expected one of: nominal, wide, bimodal)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_mean() {
        assert!((effective_friction(1.0, 0.25) - 0.5).abs() < 1e-15);
        assert_eq!(effective_friction(1.0, 1.0), 1.0);
        assert_eq!(effective_friction(1.0, 0.0), 0.0);
    }

    #[test]
    fn bimodal_is_positive_and_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws: Vec<f64> = (0..20_000).map(|_| FrictionRegime::Bimodal.sample_mu_o(&mut rng)).collect();
        assert!(draws.iter().all(|&m| m > 0.0));
        let low = draws.iter().filter(|&&m| m < 0.6).count() as f64 / draws.len() as f64;
        assert!((low - 0.5).abs() < 0.02);
    }

    #[test]
    fn parse_round_trip() {
        for r in FrictionRegime::ALL {
            assert_eq!(r.as_str().parse::<FrictionRegime>().unwrap(), r);
        }
        assert!("icy".parse::<FrictionRegime>().is_err());
    }
}
