//! Partnership dissolution through delegation.
//!
//! Two partners hold shares `r1 + r2 = 1` of an asset whose value to a
//! type-`theta` holder of a share `q` is `theta * v(q)`, with `v` convex,
//! nondecreasing and `v(1) = 1`. Efficient dissolution hands the whole
//! asset to the higher type (ties to the delegate). The delegate can run
//! it with a bid/ask schedule: after picking a threshold `lambda` the
//! agent either takes over at the ask `a = I_F(lambda)` or sells at the
//! bid `b = lambda - I_F(lambda)`, where `I_F(x) = int_0^x F`.
//!
//! Dissolution leaves the delegate fully insured at `I_F(theta1)` and the
//! agent residual claimant on `max{theta1, theta2} - I_F(theta1)`. Those
//! payoffs must cover the value of the shares the players walk in with;
//! [`impossibility_scan`] shows no proportional ownership split clears
//! both bounds, while a kinked `v` that zeroes out small shares can.

use std::sync::Arc;

use crate::dist::TypeDistribution;
use crate::game::{Contract, ContractualRights, Designation};
use crate::mech::{FiniteTypeSpace, UtilityModel};
use crate::quad;
use crate::report::FeasibilityReport;
use crate::Error;

const SLACK: f64 = 1e-9;

/// Share value function `v(q)` on `[0, 1]`.
#[derive(Clone)]
pub struct OwnershipValue {
    v: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    name: String,
}

impl std::fmt::Debug for OwnershipValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OwnershipValue").field("name", &self.name).finish()
    }
}

impl OwnershipValue {
    /// `v(q) = q`.
    pub fn proportional() -> Self {
        OwnershipValue { v: Arc::new(|q| q), name: "proportional".into() }
    }

    /// Custom closed form; validity is checked by [`PartnershipEnv::new`].
    pub fn custom(name: &str, v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        OwnershipValue { v: Arc::new(v), name: name.into() }
    }

    pub fn value(&self, q: f64) -> f64 {
        (self.v)(q)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// A dissolution environment: the common type law, the ownership split,
/// and the share value function.
#[derive(Debug, Clone)]
pub struct PartnershipEnv {
    f: TypeDistribution,
    r1: f64,
    r2: f64,
    v: OwnershipValue,
    grid: Vec<f64>,
}

/// Bid/ask tables over a threshold grid: `bid = lambda - I_F(lambda)`,
/// `ask = I_F(lambda)`.
#[derive(Debug, Clone)]
pub struct BidAskSchedule {
    pub lambda: Vec<f64>,
    pub bid: Vec<f64>,
    pub ask: Vec<f64>,
}

/// Output of [`whom_to_delegate`]: both assignments' feasibility reports
/// and the recommended delegate, if any assignment clears the bounds.
#[derive(Debug, Clone)]
pub struct DelegationAdvice {
    pub delegate1: FeasibilityReport,
    pub delegate2: FeasibilityReport,
    /// `Some(1)` or `Some(2)`; `None` when neither assignment is feasible.
    pub recommended: Option<u8>,
    /// Set when the preconditions (`mean(F) >= 1/2`, `r1 >= r2`) fail; the
    /// reports are still computed but nothing is guaranteed about them.
    pub advisory: Option<String>,
}

impl PartnershipEnv {
    /// Validates the split and the share value function: `r1 + r2 = 1`,
    /// `v(1) = 1`, `v` nondecreasing and convex (divided differences, so a
    /// kink is fine), and `v(q) <= q` so a share is never worth more than
    /// the proportional claim.
    pub fn new(
        f: TypeDistribution,
        r1: f64,
        r2: f64,
        v: OwnershipValue,
        grid_n: usize,
    ) -> Result<Self, Error> {
        if r1 < 0.0 || r2 < 0.0 || (r1 + r2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("ownership shares must be >= 0 and sum to 1".into()));
        }
        if grid_n < 3 {
            return Err(Error::InvalidInput("partnership grid needs at least 3 nodes".into()));
        }
        if (v.value(1.0) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("share value must satisfy v(1) = 1".into()));
        }
        let check = quad::linspace(0.0, 1.0, 101);
        let vals: Vec<f64> = check.iter().map(|&q| v.value(q)).collect();
        for (k, w) in vals.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "share value decreases near q={:.3}",
                    check[k]
                )));
            }
        }
        for (k, w) in vals.windows(3).enumerate() {
            if w[2] - 2.0 * w[1] + w[0] < -1e-10 {
                return Err(Error::InvalidInput(format!(
                    "share value is not convex near q={:.3}",
                    check[k + 1]
                )));
            }
        }
        if check.iter().zip(&vals).any(|(&q, &val)| val > q + 1e-12) {
            return Err(Error::InvalidInput("share value must satisfy v(q) <= q".into()));
        }
        let grid = quad::linspace(0.0, 1.0, grid_n);
        Ok(PartnershipEnv { f, r1, r2, v, grid })
    }

    pub fn dist(&self) -> &TypeDistribution {
        &self.f
    }

    pub fn shares(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Value of share `q` to a type-`theta` holder.
    pub fn share_utility(&self, q: f64, theta: f64) -> f64 {
        theta * self.v.value(q)
    }

    /// Dissolution payoffs: the delegate is fully insured at
    /// `I_F(theta1)`, the agent keeps `max{theta1, theta2} - I_F(theta1)`.
    pub fn dissolution_payoffs(&self, theta1: f64, theta2: f64) -> (f64, f64) {
        let i_f = self.f.partial_cdf_integral(theta1);
        (i_f, theta1.max(theta2) - i_f)
    }

    /// Whether dissolution payoffs cover both players' share values when
    /// player `delegate` runs the menu. The delegate side needs
    /// `u(r_d, theta) <= I_F(theta)` pointwise; the agent side needs
    /// `u(r_a, theta) <= theta - I_F(theta)` (its worst case over the
    /// other player's type).
    pub fn feasibility(&self, delegate: u8) -> FeasibilityReport {
        assert!(delegate == 1 || delegate == 2, "delegate must be 1 or 2");
        let (r_d, r_a) = if delegate == 1 { (self.r1, self.r2) } else { (self.r2, self.r1) };
        let mut report = FeasibilityReport::new(
            &format!("dissolution covers ownership stakes (delegate = player {delegate})"),
            SLACK,
        );
        for &t in &self.grid {
            let i_f = self.f.partial_cdf_integral(t);
            report.record(self.share_utility(r_d, t) - i_f, || {
                format!("delegate stake at theta={t:.6} exceeds I_F(theta)")
            });
            report.record(self.share_utility(r_a, t) - (t - i_f), || {
                format!("agent stake at theta={t:.6} exceeds theta - I_F(theta)")
            });
        }
        report
    }
}

/// Bid/ask tables for a threshold grid of `n` nodes on `[0, 1]`.
pub fn bid_ask(env: &PartnershipEnv, n: usize) -> BidAskSchedule {
    let lambda = quad::linspace(0.0, 1.0, n);
    let ask: Vec<f64> = lambda.iter().map(|&l| env.dist().partial_cdf_integral(l)).collect();
    let bid: Vec<f64> = lambda.iter().zip(&ask).map(|(&l, &a)| l - a).collect();
    BidAskSchedule { lambda, bid, ask }
}

/// Scan proportional ownership splits: for each `r1` on the grid and both
/// delegate assignments, check [`PartnershipEnv::feasibility`]. The report
/// passes when every assignment fails with strictly positive violation,
/// and `worst_violation` carries the smallest such margin over the scan.
pub fn impossibility_scan(f: &TypeDistribution, r1_grid: &[f64]) -> FeasibilityReport {
    let mut min_violation = f64::INFINITY;
    let mut all_fail = true;
    let mut witness = None;
    let mut children = Vec::new();
    for &r1 in r1_grid {
        let env = PartnershipEnv::new(f.clone(), r1, 1.0 - r1, OwnershipValue::proportional(), 101)
            .expect("proportional env is always valid");
        for delegate in [1u8, 2u8] {
            let rep = env.feasibility(delegate);
            if rep.passed {
                all_fail = false;
                witness.get_or_insert(format!("r1={r1:.3}, delegate={delegate} is feasible"));
            } else {
                min_violation = min_violation.min(rep.worst_violation);
            }
            children.push(rep);
        }
    }
    FeasibilityReport {
        label: "no proportional split dissolves efficiently".into(),
        passed: all_fail && min_violation > 0.0,
        worst_violation: if min_violation.is_finite() { min_violation } else { 0.0 },
        tolerance: 0.0,
        witness,
        children,
    }
}

/// Run [`PartnershipEnv::feasibility`] for both assignments and recommend
/// a delegate, preferring player 2 when both work. Outside the premises
/// `mean(F) >= 1/2` and `r1 >= r2` the reports are still returned but
/// flagged advisory.
pub fn whom_to_delegate(env: &PartnershipEnv) -> DelegationAdvice {
    let mu = env.dist().mean();
    let advisory = if mu < 0.5 - 1e-12 {
        Some(format!("mean(F) = {mu:.6} < 1/2; comparison not guaranteed"))
    } else if env.r1 < env.r2 - 1e-12 {
        Some("r1 < r2; comparison not guaranteed".into())
    } else {
        None
    };
    let delegate1 = env.feasibility(1);
    let delegate2 = env.feasibility(2);
    let recommended = if delegate2.passed {
        Some(2)
    } else if delegate1.passed {
        Some(1)
    } else {
        None
    };
    DelegationAdvice { delegate1, delegate2, recommended, advisory }
}

/// Build the bid/ask delegation game on the environment grid: one menu per
/// threshold `lambda = theta1` node, each holding a sell contract (asset to
/// the delegate, agent receives the bid) and a takeover contract (asset to
/// the agent at the ask). The designation breaks the agent's tie at
/// `theta2 = lambda` toward selling and points each delegate type at its
/// own threshold.
pub fn bid_ask_game(
    env: &PartnershipEnv,
) -> Result<(ContractualRights, Designation, UtilityModel, FiniteTypeSpace), Error> {
    let grid = env.grid().to_vec();
    let n = grid.len();
    let weights: Vec<f64> = {
        let mut w: Vec<f64> = grid.iter().map(|&t| env.dist().pdf(t)).collect();
        let span = grid[1] - grid[0];
        w.iter_mut().for_each(|x| *x *= span);
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
        w
    };
    let space = FiniteTypeSpace::product(grid.clone(), weights.clone(), grid.clone(), weights)?;
    let v0 = env.v.value(0.0);
    let utilities = UtilityModel::from_fns(
        vec!["o".into(), "delegate_owns".into(), "agent_owns".into()],
        "o",
        &grid,
        &grid,
        move |x, t| match x {
            "delegate_owns" => t,
            "agent_owns" => t * v0,
            _ => 0.0,
        },
        move |x, t| match x {
            "agent_owns" => t,
            "delegate_owns" => t * v0,
            _ => 0.0,
        },
    )?;
    let sell = utilities.outcome_index("delegate_owns").expect("outcome exists");
    let take = utilities.outcome_index("agent_owns").expect("outcome exists");
    let schedule = bid_ask(env, n);
    let menus: Vec<Vec<Contract>> = (0..n)
        .map(|i| {
            vec![
                Contract { outcome: sell, t1: schedule.bid[i], t2: -schedule.bid[i] },
                Contract { outcome: take, t1: -schedule.ask[i], t2: schedule.ask[i] },
            ]
        })
        .collect();
    let contract: Vec<Vec<Option<usize>>> = (0..n)
        .map(|m| {
            (0..n)
                .map(|j| Some(if grid[j] > grid[m] + 1e-12 { 1 } else { 0 }))
                .collect()
        })
        .collect();
    let designation = Designation { contract, menu: (0..n).collect() };
    Ok((ContractualRights { menus }, designation, utilities, space))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::solve_pbe;
    use rand::Rng;
    use rand::SeedableRng;

    fn uniform_env(r1: f64) -> PartnershipEnv {
        PartnershipEnv::new(
            TypeDistribution::uniform(201),
            r1,
            1.0 - r1,
            OwnershipValue::proportional(),
            41,
        )
        .unwrap()
    }

    fn kinked_env() -> PartnershipEnv {
        PartnershipEnv::new(
            TypeDistribution::uniform(201),
            0.6,
            0.4,
            OwnershipValue::custom("threshold", |q| (2.0 * q - 1.0).max(0.0)),
            41,
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        let f = TypeDistribution::uniform(201);
        assert!(PartnershipEnv::new(f.clone(), 0.7, 0.4, OwnershipValue::proportional(), 41)
            .is_err());
        // concave v
        assert!(PartnershipEnv::new(f.clone(), 0.5, 0.5, OwnershipValue::custom("sqrt", |q| q.sqrt()), 41)
            .is_err());
        // v(1) != 1
        assert!(PartnershipEnv::new(f, 0.5, 0.5, OwnershipValue::custom("half", |q| 0.5 * q), 41)
            .is_err());
    }

    #[test]
    fn bid_ask_uniform_closed_forms() {
        let env = uniform_env(0.5);
        let sched = bid_ask(&env, 5);
        for (k, &l) in sched.lambda.iter().enumerate() {
            assert!((sched.bid[k] - (l - 0.5 * l * l)).abs() < 1e-9, "bid({l})");
            assert!((sched.ask[k] - 0.5 * l * l).abs() < 1e-9, "ask({l})");
            assert!((sched.bid[k] + sched.ask[k] - l).abs() < 1e-12);
        }
        assert!(sched.ask.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(sched.bid[0].abs() < 1e-12 && sched.ask[0].abs() < 1e-12);
        assert!((sched.bid[4] - 0.5).abs() < 1e-9 && (sched.ask[4] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dissolution_payoff_identities() {
        let env = uniform_env(0.5);
        let (ud, ua) = env.dissolution_payoffs(0.5, 0.8);
        assert!((ud - 0.125).abs() < 1e-9);
        assert!((ua - 0.675).abs() < 1e-9);
        let (ud0, ua0) = env.dissolution_payoffs(0.0, 0.0);
        assert!(ud0.abs() < 1e-12 && ua0.abs() < 1e-12);
        for &a in env.grid() {
            for &b in env.grid() {
                let (d, g) = env.dissolution_payoffs(a, b);
                assert!((d + g - a.max(b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feasibility_examples() {
        // proportional, even split: delegate stake t/2 beats I_F(t) = t^2/2
        let rep = uniform_env(0.5).feasibility(1);
        assert!(!rep.passed);
        assert!(rep.worst_violation > 0.1);

        // kinked v zeroes both stakes below half ownership
        let env = kinked_env();
        let ok = env.feasibility(2);
        assert!(ok.passed, "{}", ok.render());
        let bad = env.feasibility(1);
        assert!(!bad.passed);
        // delegate=1: agent stake 0.2 t must not exceed t - t^2/2; it holds,
        // but the delegate stake v(0.6) t = 0.2 t beats t^2/2 below t=0.4
        assert!(bad.worst_violation > 0.01);
    }

    #[test]
    fn proportional_splits_never_dissolve() {
        let r1: Vec<f64> = quad::linspace(0.0, 1.0, 21);
        for f in [TypeDistribution::uniform(201), TypeDistribution::power(2.0, 201).unwrap()] {
            let rep = impossibility_scan(&f, &r1);
            assert!(rep.passed, "{}", rep.render());
            assert!(rep.worst_violation > 0.0);
        }
    }

    #[test]
    fn recommendation_prefers_player_two() {
        let advice = whom_to_delegate(&kinked_env());
        assert_eq!(advice.recommended, Some(2));
        assert!(advice.advisory.is_none());

        let advice = whom_to_delegate(&uniform_env(0.5));
        assert_eq!(advice.recommended, None);

        // premise violation flags the report
        let advice = whom_to_delegate(&uniform_env(0.3));
        assert!(advice.advisory.is_some());
    }

    #[test]
    fn insured_payoff_covers_itself_when_mean_is_high() {
        // x - I_F(x) >= I_F(x) whenever mean(F) >= 1/2
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut tried = 0;
        while tried < 20 {
            let f = if rng.gen_bool(0.5) {
                TypeDistribution::power(rng.gen_range(1.0..6.0), 201).unwrap()
            } else {
                TypeDistribution::truncated_exponential(rng.gen_range(-8.0..-0.5), 201).unwrap()
            };
            if f.mean() < 0.5 {
                continue;
            }
            tried += 1;
            for &x in quad::linspace(0.0, 1.0, 41).iter() {
                let i_f = f.partial_cdf_integral(x);
                assert!(x - i_f >= i_f - 1e-9, "x={x}");
            }
        }
    }

    #[test]
    fn feasible_for_one_implies_feasible_for_two() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut done = 0;
        while done < 100 {
            let f = TypeDistribution::power(rng.gen_range(1.0..6.0), 201).unwrap();
            if f.mean() < 0.5 {
                continue;
            }
            let r1 = rng.gen_range(0.5..1.0);
            let c = rng.gen_range(0.5..0.9);
            let m = rng.gen_range(1.0..3.0);
            let v = OwnershipValue::custom("ramp", move |q| {
                ((q - c).max(0.0) / (1.0 - c)).powf(m)
            });
            let env = match PartnershipEnv::new(f, r1, 1.0 - r1, v, 41) {
                Ok(e) => e,
                Err(_) => continue,
            };
            done += 1;
            let one = env.feasibility(1);
            let two = env.feasibility(2);
            assert!(!one.passed || two.passed, "r1={r1} c={c} m={m}");
        }
    }

    #[test]
    fn bid_ask_game_reproduces_dissolution() {
        let env = PartnershipEnv::new(
            TypeDistribution::uniform(201),
            0.5,
            0.5,
            OwnershipValue::proportional(),
            21,
        )
        .unwrap();
        let (rights, designation, utilities, space) = bid_ask_game(&env).unwrap();
        let eq = solve_pbe(&rights, &utilities, &space, Some(&designation));
        let own = utilities.outcome_index("delegate_owns").unwrap();
        for (i, &a) in space.theta1().iter().enumerate() {
            assert_eq!(eq.delegate_choice[i], Some(i), "delegate type {a} picks its threshold");
            for (j, &b) in space.theta2().iter().enumerate() {
                let c = eq.induced[i][j];
                let efficient = if a >= b { own } else { utilities.outcome_index("agent_owns").unwrap() };
                assert_eq!(c.outcome, efficient, "profile ({a}, {b})");
                let (ud, ua) = env.dissolution_payoffs(a, b);
                assert!((utilities.u1(c.outcome, i) - c.t1 - ud).abs() < 1e-9, "U_d({a},{b})");
                assert!((utilities.u2(c.outcome, j) - c.t2 - ua).abs() < 1e-9, "U_a({a},{b})");
            }
        }
    }
}
