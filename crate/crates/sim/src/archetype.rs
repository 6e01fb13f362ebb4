//! Entity archetypes and the static per-entity profile drawn from them.

use pro_core::rng::{purpose, substream};
use pro_core::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Number of real client categories; the one-hot feature has one more slot.
pub const CLIENT_KINDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    fn validate(&self, what: &str) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0 && self.b.is_finite() && self.b > 0.0) {
            return Err(Error::invalid(format!("{what}: beta parameters must be > 0")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    pub name: String,
    /// Relative population share.
    pub share: f64,
    /// Mean daily attempted scraping requests.
    pub scraping_rate: f64,
    /// Gamma shape of the per-entity rate; 0 gives every entity the mean.
    #[serde(default)]
    pub rate_shape: f64,
    /// Daily counts are Poisson around the entity rate; otherwise the rate
    /// (rounded) is used as is.
    #[serde(default = "yes")]
    pub poisson: bool,
    /// Inclusive range of the per-request information weight.
    pub request_weight: [u32; 2],
    /// Daily probability of being active when unaffected.
    pub activity: f64,
    /// Daily probability of filing a feedback report when unaffected.
    pub feedback: f64,
    /// Latent automation propensity; daily classifier scores scatter around it.
    pub automation: BetaParams,
    pub abuse: BetaParams,
    /// Inclusive range of account age on day 0.
    pub age_days: [u32; 2],
    pub client_weights: [f64; CLIENT_KINDS],
    /// Mean concurrent sessions.
    pub sessions: f64,
    /// Probability the account went through compromise recovery before day 0.
    #[serde(default)]
    pub prior_recovery: f64,
}

fn yes() -> bool {
    true
}

impl Archetype {
    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        let prob = |v: f64, what: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("archetype {name}: {what} must be in [0, 1]")))
            }
        };
        prob(self.activity, "activity")?;
        prob(self.feedback, "feedback")?;
        prob(self.prior_recovery, "prior_recovery")?;
        let nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("archetype {name}: {what} must be finite and >= 0")))
            }
        };
        nonneg(self.share, "share")?;
        nonneg(self.scraping_rate, "scraping_rate")?;
        nonneg(self.rate_shape, "rate_shape")?;
        nonneg(self.sessions, "sessions")?;
        for w in self.client_weights {
            nonneg(w, "client weight")?;
        }
        if self.client_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(format!("archetype {name}: client weights sum to 0")));
        }
        if self.request_weight[0] > self.request_weight[1] || self.age_days[0] > self.age_days[1] {
            return Err(Error::invalid(format!("archetype {name}: empty range")));
        }
        self.automation.validate(name)?;
        self.abuse.validate(name)
    }
}

/// Static draw for one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub archetype: usize,
    pub arm: usize,
    pub rate: f64,
    pub weight: u32,
    pub automation: f64,
    pub abuse: f64,
    pub age0: u32,
    pub client: usize,
    pub sessions: f64,
    /// Day of the last recovery relative to day 0 (negative: before the run).
    pub recovery_day: Option<i64>,
}

pub fn pick_weighted(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w / total;
        if u < acc {
            return i;
        }
    }
    // rounding can leave u just above the last edge
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Draws the profile of `entity`. The arm is assigned separately so that the
/// archetype mix does not depend on the split.
pub fn draw_profile(archetypes: &[Archetype], seed: u64, entity: u64, arm: usize) -> Profile {
    let mut rng = substream(seed, &[purpose::POPULATION, entity]);
    let shares: Vec<f64> = archetypes.iter().map(|a| a.share).collect();
    let k = pick_weighted(&shares, rng.random());
    let a = &archetypes[k];
    let rate = if a.rate_shape > 0.0 && a.scraping_rate > 0.0 {
        Gamma::new(a.rate_shape, a.scraping_rate / a.rate_shape)
            .expect("validated gamma")
            .sample(&mut rng)
    } else {
        a.scraping_rate
    };
    let weight = rng.random_range(a.request_weight[0]..=a.request_weight[1]);
    let automation = Beta::new(a.automation.a, a.automation.b).expect("validated beta").sample(&mut rng);
    let abuse = Beta::new(a.abuse.a, a.abuse.b).expect("validated beta").sample(&mut rng);
    let age0 = rng.random_range(a.age_days[0]..=a.age_days[1]);
    let client = pick_weighted(&a.client_weights, rng.random());
    let recovered = rng.random::<f64>() < a.prior_recovery;
    let ago = rng.random_range(1..=720i64);
    Profile {
        archetype: k,
        arm,
        rate,
        weight,
        automation,
        abuse,
        age0,
        client,
        sessions: a.sessions,
        recovery_day: recovered.then_some(-ago),
    }
}
