//! State recurrences: the polarization and engagement score updates, and
//! the drift of the dynamic traits.
//!
//! Both scores follow a convex combination of the previous value and the
//! day's impact: `P(t+1) = α·P(t) + (1−α)·F` and
//! `E(t+1) = β·E(t) + (1−β)·T·F`. With constant `F` and memory below 1 the
//! scores converge geometrically to `F` (respectively `T·F`); boundedness
//! in `[-1, 1]` holds by convexity, with no clamping involved.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentPrompt, DynamicTraits};
use crate::content::Post;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("{field} out of range: {value} (expected {min}..={max})")]
    RangeError {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("trait drift needs at least one consumed post")]
    EmptyConsumption,
}

fn check(field: &'static str, value: f64, min: f64, max: f64) -> Result<(), DynamicsError> {
    if value.is_finite() && (min..=max).contains(&value) {
        Ok(())
    } else {
        Err(DynamicsError::RangeError {
            field,
            value,
            min,
            max,
        })
    }
}

/// Memory parameters for the two score recurrences plus the trait drift
/// rate. `alpha` and `beta` are the fractions of yesterday's score kept
/// today.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub alpha: f64,
    pub beta: f64,
    pub drift_rate: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            alpha: 0.9,
            beta: 0.9,
            drift_rate: 0.05,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        check("alpha", self.alpha, 0.0, 1.0)?;
        check("beta", self.beta, 0.0, 1.0)?;
        check("drift_rate", self.drift_rate, 0.0, 1.0)?;
        Ok(())
    }
}

/// Next polarization score: `α·P + (1−α)·F`. Exact convex combination;
/// the result stays in `[-1, 1]` without clamping.
pub fn update_polarization(p_s: f64, alpha: f64, f: f64) -> Result<f64, DynamicsError> {
    check("polarization", p_s, -1.0, 1.0)?;
    check("alpha", alpha, 0.0, 1.0)?;
    check("impact", f, -1.0, 1.0)?;
    Ok(alpha * p_s + (1.0 - alpha) * f)
}

/// Next engagement score: `β·E + (1−β)·T·F`. The activity factor scales
/// how strongly today's impact registers; `|T·F| ≤ 1` keeps the result in
/// `[-1, 1]`.
pub fn update_engagement(e_s: f64, beta: f64, t: f64, f: f64) -> Result<f64, DynamicsError> {
    check("engagement", e_s, -1.0, 1.0)?;
    check("beta", beta, 0.0, 1.0)?;
    check("activity_factor", t, 0.0, 1.0)?;
    check("impact", f, -1.0, 1.0)?;
    Ok(beta * e_s + (1.0 - beta) * t * f)
}

/// What the agent did this step, as far as drift is concerned.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepActivity {
    pub positive_reactions: usize,
    pub negative_reactions: usize,
    pub friend_requests_sent: usize,
}

/// Drift the dynamic traits after one consumption step.
///
/// Political attitude is pulled toward the mean stance of what was
/// consumed, gated by open-mindedness. Emotive reaction rises with the
/// negative share of the agent's own reactions (relative to posts
/// consumed) and falls with the positive share, scaled by neuroticism.
/// Social connectivity grows with friend requests sent. Every trait is
/// clamped back into `[1, 7]`.
pub fn drift_dynamic_traits(
    agent: &AgentPrompt,
    consumed: &[&Post],
    activity: &StepActivity,
    params: &DynamicsParams,
) -> Result<DynamicTraits, DynamicsError> {
    if consumed.is_empty() {
        return Err(DynamicsError::EmptyConsumption);
    }
    params.validate()?;
    let traits = agent.dynamic_traits;
    let rate = params.drift_rate;
    let count = consumed.len() as f64;
    let mean_stance = consumed.iter().map(|p| p.stance).sum::<f64>() / count;

    let openness_gate = agent.static_traits.open_mindedness as f64 / 7.0;
    let pa = traits.political_attitude + rate * openness_gate * (mean_stance - traits.political_attitude);

    let neg_fraction = activity.negative_reactions as f64 / count;
    let pos_fraction = activity.positive_reactions as f64 / count;
    let emotive_gate = agent.static_traits.neuroticism as f64 / 7.0;
    let er = traits.emotive_reaction + rate * (neg_fraction - pos_fraction) * emotive_gate;

    let sc = traits.social_connectivity + rate * activity.friend_requests_sent as f64;

    Ok(DynamicTraits {
        political_attitude: pa,
        social_connectivity: sc,
        emotive_reaction: er,
    }
    .clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{new_agent, AgentDescriptor, AgentId, StaticTraits};
    use crate::content::{ContentPool, NewsId, PostOrigin};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polarization_update_examples() {
        // Full memory: F is ignored.
        assert_eq!(update_polarization(0.3, 1.0, -0.9).unwrap(), 0.3);
        // No memory: full replacement.
        assert_eq!(update_polarization(0.3, 0.0, -0.7).unwrap(), -0.7);
        // Even split.
        let next = update_polarization(0.2, 0.5, 0.6).unwrap();
        assert!((next - 0.4).abs() < 1e-15);
    }

    #[test]
    fn engagement_update_examples() {
        let next = update_engagement(0.0, 0.5, 1.0, 1.0).unwrap();
        assert!((next - 0.5).abs() < 1e-15);
        // Inactive agent: pure decay.
        let next = update_engagement(0.4, 0.9, 0.0, 0.8).unwrap();
        assert!((next - 0.36).abs() < 1e-15);
        // Full memory.
        assert_eq!(update_engagement(-0.2, 1.0, 0.7, 0.9).unwrap(), -0.2);
    }

    #[test]
    fn updates_reject_out_of_range_inputs() {
        assert!(matches!(
            update_polarization(1.5, 0.5, 0.0),
            Err(DynamicsError::RangeError { field: "polarization", .. })
        ));
        assert!(matches!(
            update_polarization(0.0, 1.1, 0.0),
            Err(DynamicsError::RangeError { field: "alpha", .. })
        ));
        assert!(matches!(
            update_engagement(0.0, 0.5, 1.2, 0.0),
            Err(DynamicsError::RangeError { field: "activity_factor", .. })
        ));
        assert!(matches!(
            update_engagement(0.0, 0.5, 0.5, f64::NAN),
            Err(DynamicsError::RangeError { field: "impact", .. })
        ));
    }

    /// With constant F, |P(t) − F| = α^t·|P(0) − F| against the closed
    /// form, far below the 1e-12 band even after 100 steps.
    #[test]
    fn polarization_converges_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let alpha: f64 = rng.gen_range(0.0..=1.0);
            let f: f64 = rng.gen_range(-1.0..=1.0);
            let p0: f64 = rng.gen_range(-1.0..=1.0);
            let mut p = p0;
            for t in 1..=100u32 {
                p = update_polarization(p, alpha, f).unwrap();
                let expected = alpha.powi(t as i32) * (p0 - f).abs();
                assert!(
                    ((p - f).abs() - expected).abs() < 1e-12,
                    "alpha={alpha} t={t}"
                );
            }
        }
    }

    #[test]
    fn monotone_response_in_impact() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let p: f64 = rng.gen_range(-1.0..=1.0);
            let alpha: f64 = rng.gen_range(0.0..=1.0);
            let beta: f64 = rng.gen_range(0.0..=1.0);
            let t: f64 = rng.gen_range(0.0..=1.0);
            let f1: f64 = rng.gen_range(-1.0..=1.0);
            let f2: f64 = rng.gen_range(f1..=1.0);
            assert!(
                update_polarization(p, alpha, f1).unwrap()
                    <= update_polarization(p, alpha, f2).unwrap()
            );
            assert!(
                update_engagement(p, beta, t, f1).unwrap()
                    <= update_engagement(p, beta, t, f2).unwrap()
            );
        }
    }

    fn drift_agent(pa: f64, om: u8, n: u8) -> AgentPrompt {
        new_agent(AgentDescriptor {
            id: AgentId(0),
            key: "D".into(),
            nickname: "d".into(),
            bio: String::new(),
            interests: vec!["art".into()],
            static_traits: StaticTraits {
                openness: 4,
                conscientiousness: 4,
                extraversion: 4,
                agreeableness: 4,
                neuroticism: n,
                cognitive_style: 4,
                open_mindedness: om,
            },
            dynamic_traits: DynamicTraits {
                political_attitude: pa,
                social_connectivity: 4.0,
                emotive_reaction: 4.0,
            },
            polarization: None,
            engagement: None,
            friends: Vec::new(),
            activity_factor: 0.5,
        })
        .unwrap()
    }

    fn stance_pool(stances: &[f64]) -> ContentPool {
        let mut pool = ContentPool::empty();
        for (i, &stance) in stances.iter().enumerate() {
            pool.add_imposed_post(
                format!("s{i}"),
                PostOrigin::News(NewsId(0)),
                None,
                stance,
                &["art".to_string()],
                "",
            )
            .unwrap();
        }
        pool
    }

    #[test]
    fn zero_drift_rate_freezes_traits() {
        let agent = drift_agent(4.0, 7, 4);
        let pool = stance_pool(&[6.0, 2.0]);
        let consumed: Vec<&Post> = pool.posts().iter().collect();
        let params = DynamicsParams {
            drift_rate: 0.0,
            ..DynamicsParams::default()
        };
        let next =
            drift_dynamic_traits(&agent, &consumed, &StepActivity::default(), &params).unwrap();
        assert_eq!(next, agent.dynamic_traits);
    }

    #[test]
    fn attitude_moves_toward_consumed_mean() {
        // pa=4, om=7, rate=0.5, mean stance 6 -> 4 + 0.5·1·2 = 5.
        let agent = drift_agent(4.0, 7, 4);
        let pool = stance_pool(&[6.0]);
        let consumed: Vec<&Post> = pool.posts().iter().collect();
        let params = DynamicsParams {
            drift_rate: 0.5,
            ..DynamicsParams::default()
        };
        let next =
            drift_dynamic_traits(&agent, &consumed, &StepActivity::default(), &params).unwrap();
        assert!((next.political_attitude - 5.0).abs() < 1e-12);
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        let agent = drift_agent(7.0, 7, 4);
        let pool = stance_pool(&[7.0, 7.0]);
        let consumed: Vec<&Post> = pool.posts().iter().collect();
        let params = DynamicsParams {
            drift_rate: 0.8,
            ..DynamicsParams::default()
        };
        let next =
            drift_dynamic_traits(&agent, &consumed, &StepActivity::default(), &params).unwrap();
        assert_eq!(next.political_attitude, 7.0);
    }

    #[test]
    fn drift_requires_consumption() {
        let agent = drift_agent(4.0, 4, 4);
        assert!(matches!(
            drift_dynamic_traits(&agent, &[], &StepActivity::default(), &DynamicsParams::default()),
            Err(DynamicsError::EmptyConsumption)
        ));
    }

    #[test]
    fn drift_stays_clamped_under_extremes() {
        let mut agent = drift_agent(6.9, 7, 7);
        agent.dynamic_traits.social_connectivity = 6.95;
        agent.dynamic_traits.emotive_reaction = 1.05;
        let pool = stance_pool(&[7.0, 7.0, 7.0]);
        let consumed: Vec<&Post> = pool.posts().iter().collect();
        let params = DynamicsParams {
            drift_rate: 1.0,
            ..DynamicsParams::default()
        };
        let activity = StepActivity {
            positive_reactions: 3,
            negative_reactions: 0,
            friend_requests_sent: 40,
        };
        let next = drift_dynamic_traits(&agent, &consumed, &activity, &params).unwrap();
        assert!(next.political_attitude <= 7.0);
        assert_eq!(next.social_connectivity, 7.0);
        assert!(next.emotive_reaction >= 1.0);
    }

    proptest! {
        /// Ten thousand random steps never leave the score band, and the
        /// drifted traits never leave [1, 7].
        #[test]
        fn recurrences_stay_bounded(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: f64 = rng.gen_range(-1.0..=1.0);
            let mut e: f64 = rng.gen_range(-1.0..=1.0);
            for _ in 0..1000 {
                let alpha = rng.gen_range(0.0..=1.0);
                let beta = rng.gen_range(0.0..=1.0);
                let t = rng.gen_range(0.0..=1.0);
                let f = rng.gen_range(-1.0..=1.0);
                p = update_polarization(p, alpha, f).unwrap();
                e = update_engagement(e, beta, t, f).unwrap();
                prop_assert!((-1.0..=1.0).contains(&p));
                prop_assert!((-1.0..=1.0).contains(&e));
            }
        }
    }
}
