//! Procurement delegation: screening contracts and interval delegation.
//!
//! A principal funds a project run by a delegate who values quality `b`
//! (law `F`); a supplier with private unit cost type `s` (law `G`) produces
//! quality `q` at cost `s · c(q)`. Payoffs: supplier `t − s·c(q)`, delegate
//! `b·q − t`, principal `b·q − (1+α)·t` where `α ≥ 0` measures how much
//! more the principal dislikes spending than the delegate does.
//!
//! The principal's optimum is to hand over the `b`-optimal screening
//! contracts for an interval `[0, b_hat]`: low delegate types separate,
//! high types pool at the frontier contract. This module computes the
//! screening contracts, the pooling integrand `J`, its crossing point
//! `b_bar`, the optimal cutoff `b_hat`, and builds the corresponding menus
//! for the delegation game.

use std::fmt;
use std::sync::Arc;

use crate::dist::TypeDistribution;
use crate::game::{Contract, ContractualRights};
use crate::mech::{FiniteTypeSpace, UtilityModel};
use crate::quad;
use crate::Error;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Production cost per unit of the supplier's type: total cost `s · c(q)`.
/// Carries the derivative and its inverse for pointwise maximization.
#[derive(Clone)]
pub struct CostFunction {
    c: RealFn,
    c_prime: RealFn,
    c_prime_inv: RealFn,
    name: String,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CostFunction({})", self.name)
    }
}

impl CostFunction {
    /// `c(q) = q^2 / 2`.
    pub fn quadratic() -> Self {
        CostFunction {
            c: Arc::new(|q| 0.5 * q * q),
            c_prime: Arc::new(|q| q),
            c_prime_inv: Arc::new(|y| y),
            name: "q^2/2".into(),
        }
    }

    /// `c(q) = q^p / p`, `p > 1`.
    pub fn power(p: f64) -> Result<Self, Error> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidInput(format!(
                "power cost needs exponent p > 1, got {p}"
            )));
        }
        Ok(CostFunction {
            c: Arc::new(move |q| q.powf(p) / p),
            c_prime: Arc::new(move |q| q.powf(p - 1.0)),
            c_prime_inv: Arc::new(move |y| y.powf(1.0 / (p - 1.0))),
            name: format!("q^{p}/{p}"),
        })
    }

    pub fn custom(
        name: &str,
        c: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c_prime_inv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        CostFunction {
            c: Arc::new(c),
            c_prime: Arc::new(c_prime),
            c_prime_inv: Arc::new(c_prime_inv),
            name: name.into(),
        }
    }

    pub fn c(&self, q: f64) -> f64 {
        (self.c)(q)
    }

    pub fn c_prime(&self, q: f64) -> f64 {
        (self.c_prime)(q)
    }

    pub fn c_prime_inv(&self, y: f64) -> f64 {
        (self.c_prime_inv)(y)
    }
}

/// Primitives of a procurement problem.
#[derive(Debug, Clone)]
pub struct ProcurementEnv {
    /// Law of the delegate's benefit type `b`.
    pub benefit: TypeDistribution,
    /// Law of the supplier's cost type `s`.
    pub cost_type: TypeDistribution,
    /// Spending misalignment `alpha >= 0`.
    pub alpha: f64,
    pub cost: CostFunction,
    /// Quality cap (the pointwise maximizer is clamped to `[0, q_max]`).
    pub q_max: f64,
}

/// A supplier screening contract for a fixed benefit level `b`: quality and
/// payment tables over an `s`-grid, truthful by construction (payments come
/// from the rent envelope with zero rent at the top cost type).
#[derive(Debug, Clone)]
pub struct ScreeningContract {
    pub b: f64,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
    pub t: Vec<f64>,
}

/// The principal-optimal delegation set: the frontier cutoff and the
/// screening contracts for benefit levels up to it.
#[derive(Debug, Clone)]
pub struct DelegationInterval {
    pub b_hat: f64,
    /// Benefit grid nodes `<= b_hat` paired with their contracts; the last
    /// entry is the frontier contract at `b_hat`.
    pub contracts: Vec<ScreeningContract>,
    pub principal_value: f64,
    /// Whether the first-order condition for an interior cutoff held at the
    /// reported optimum (it need not when the quality cap binds).
    pub foc_satisfied: bool,
    /// Set when expected quality is numerically zero and the cutoff is
    /// degenerate.
    pub degenerate: bool,
}

const DEFAULT_S_GRID: usize = 65;
const B_GRID: usize = 101;
const CUTOFF_XTOL: f64 = 1e-4;

impl ProcurementEnv {
    /// Validates `alpha >= 0`, `q_max > 0`, the cost shape (zero at zero,
    /// flat marginal at zero, strictly increasing and strictly convex on
    /// `[0, q_max]`), a monotone hazard rate for the benefit law, and a
    /// monotone virtual cost for the cost-type law.
    pub fn new(
        benefit: TypeDistribution,
        cost_type: TypeDistribution,
        alpha: f64,
        cost: CostFunction,
        q_max: f64,
    ) -> Result<Self, Error> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(q_max > 0.0) || !q_max.is_finite() {
            return Err(Error::InvalidInput(format!("q_max must be positive, got {q_max}")));
        }
        if cost.c(0.0).abs() > 1e-12 || cost.c_prime(0.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("cost must satisfy c(0)=0 and c'(0)=0".into()));
        }
        let qs = quad::linspace(0.0, q_max, 101);
        for w in qs.windows(2) {
            if cost.c(w[1]) <= cost.c(w[0]) || cost.c_prime(w[1]) <= cost.c_prime(w[0]) {
                return Err(Error::InvalidInput(
                    "cost must be strictly increasing and strictly convex on [0, q_max]".into(),
                ));
            }
        }
        for &q in qs.iter().skip(1) {
            let back = cost.c_prime_inv(cost.c_prime(q));
            if (back - q).abs() > 1e-6 * q_max {
                return Err(Error::InvalidInput(
                    "c_prime_inv is not the inverse of c_prime on [0, q_max]".into(),
                ));
            }
        }
        let mhr = benefit.check_mhr();
        if !mhr.passed {
            return Err(Error::InvalidInput(format!(
                "benefit law must have a monotone hazard rate: {}",
                mhr.witness.unwrap_or_default()
            )));
        }
        let env = ProcurementEnv { benefit, cost_type, alpha, cost, q_max };
        let grid = quad::linspace(1e-6, 1.0, 201);
        let mut prev = f64::NEG_INFINITY;
        for &s in &grid {
            let phi = env.agent_virtual_cost(s);
            if phi < prev - 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "cost-type law must have a nondecreasing virtual cost; falls near s={s:.4}"
                )));
            }
            prev = phi;
        }
        Ok(env)
    }

    /// Virtual cost `phi(s) = s + G(s)/g(s)`.
    pub fn agent_virtual_cost(&self, s: f64) -> f64 {
        if s <= 1e-12 {
            return 0.0;
        }
        s + self.cost_type.cdf(s) / self.cost_type.pdf(s)
    }

    /// Pointwise optimal quality: maximizer of `b·q − phi(s)·c(q)` on
    /// `[0, q_max]`.
    pub fn q_star(&self, b: f64, s: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let phi = self.agent_virtual_cost(s);
        if phi <= 1e-12 {
            return self.q_max;
        }
        self.cost.c_prime_inv(b / phi).clamp(0.0, self.q_max)
    }

    /// The cost type at which the quality cap stops binding: the solution
    /// of `phi(s) = b / c'(q_max)`, or 0 if the cap never binds.
    fn cap_kink(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let target = b / self.cost.c_prime(self.q_max);
        if self.agent_virtual_cost(1e-12) >= target {
            return 0.0;
        }
        if self.agent_virtual_cost(1.0) <= target {
            return 1.0;
        }
        quad::bisect(0.0, 1.0, 1e-13, |s| self.agent_virtual_cost(s) - target)
    }

    /// `int_s^1 c(q*(b, r)) dr`, split at the cap kink where the integrand
    /// switches from constant to smooth.
    fn rent_integral(&self, b: f64, s: f64) -> f64 {
        let kink = self.cap_kink(b);
        let gl = quad::rule(128);
        let mut acc = 0.0;
        if s < kink {
            acc += (kink - s) * self.cost.c(self.q_max);
        }
        let lo = s.max(kink);
        if lo < 1.0 {
            acc += gl.integrate(lo, 1.0, |r| self.cost.c(self.q_star(b, r)));
        }
        acc
    }

    /// The `b`-optimal screening contract on a default 65-node `s`-grid.
    pub fn b_optimal_contract(&self, b: f64) -> ScreeningContract {
        self.b_optimal_contract_on(b, &quad::linspace(0.0, 1.0, DEFAULT_S_GRID))
    }

    /// Same, on a caller-supplied `s`-grid. The payment implements the rent
    /// envelope `t(s) = s·c(q*(s)) + int_s^1 c(q*(r)) dr`, so truth-telling
    /// is dominant and the top cost type earns zero rent.
    pub fn b_optimal_contract_on(&self, b: f64, s_grid: &[f64]) -> ScreeningContract {
        let q: Vec<f64> = s_grid.iter().map(|&s| self.q_star(b, s)).collect();
        let t: Vec<f64> = s_grid
            .iter()
            .zip(&q)
            .map(|(&s, &qs)| s * self.cost.c(qs) + self.rent_integral(b, s))
            .collect();
        ScreeningContract { b, s: s_grid.to_vec(), q, t }
    }

    /// `Q*(b) = E_s[q*(b, s)]`, split at the cap kink for accuracy.
    pub fn expected_quantity(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let kink = self.cap_kink(b);
        let gl = quad::rule(256);
        let mut acc = 0.0;
        if kink > 0.0 {
            acc += self.q_max * self.cost_type.cdf(kink);
        }
        if kink < 1.0 {
            acc += gl.integrate(kink, 1.0, |s| self.q_star(b, s) * self.cost_type.pdf(s));
        }
        acc
    }

    /// Expected payment under the `b`-optimal contract,
    /// `E[t] = E[phi(s)·c(q*(b,s))]` by the envelope identity.
    pub fn expected_payment(&self, b: f64) -> f64 {
        if b <= 0.0 {
            return 0.0;
        }
        let kink = self.cap_kink(b);
        let gl = quad::rule(256);
        let f = |s: f64| self.agent_virtual_cost(s) * self.cost.c(self.q_star(b, s)) * self.cost_type.pdf(s);
        let mut acc = 0.0;
        if kink > 0.0 {
            acc += gl.integrate(0.0, kink, f);
        }
        acc + gl.integrate(kink.max(0.0), 1.0, f)
    }

    /// Delegate value `U*(b) = b·Q*(b) − E[t]`; zero at `b = 0`, convex and
    /// nondecreasing in `b`.
    pub fn delegate_value(&self, b: f64) -> f64 {
        b * self.expected_quantity(b) - self.expected_payment(b)
    }

    /// Pooling integrand `J(b) = −α·b·f(b) + (1+α)(1−F(b))`.
    pub fn pooling_integrand(&self, b: f64) -> f64 {
        -self.alpha * b * self.benefit.pdf(b) + (1.0 + self.alpha) * (1.0 - self.benefit.cdf(b))
    }

    /// The point `b_bar` where `J` crosses zero from above; 1 if `J` stays
    /// nonnegative on the whole interval.
    pub fn crossing_point(&self) -> f64 {
        if self.pooling_integrand(1.0) >= -1e-12 {
            return 1.0;
        }
        quad::bisect(0.0, 1.0, 1e-12, |b| -self.pooling_integrand(b))
    }

    fn tail_j(&self, b_hat: f64) -> f64 {
        quad::rule(128).integrate(b_hat, 1.0, |b| self.pooling_integrand(b))
    }

    /// Principal value of cutoff `b_hat`:
    /// `V(b_hat) = int_0^b_hat J·Q* + Q*(b_hat) · int_b_hat^1 J`.
    pub fn cutoff_value(&self, b_hat: f64) -> f64 {
        let gl = quad::rule(96);
        let head = if b_hat > 0.0 {
            gl.integrate(0.0, b_hat, |b| self.pooling_integrand(b) * self.expected_quantity(b))
        } else {
            0.0
        };
        head + self.expected_quantity(b_hat) * self.tail_j(b_hat)
    }

    /// Optimal cutoff by a 101-node grid scan refined with golden-section
    /// search, plus a first-order-condition cross-check.
    pub fn optimal_cutoff(&self) -> DelegationInterval {
        let degenerate = self.expected_quantity(1.0) <= 1e-12;
        if degenerate {
            return DelegationInterval {
                b_hat: 0.0,
                contracts: vec![self.b_optimal_contract(0.0)],
                principal_value: 0.0,
                foc_satisfied: false,
                degenerate: true,
            };
        }
        let grid = quad::linspace(0.0, 1.0, B_GRID);
        let values: Vec<f64> = grid.iter().map(|&b| self.cutoff_value(b)).collect();
        let k = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(B_GRID - 1)];
        let b_hat = if lo < hi {
            quad::golden_max(lo, hi, CUTOFF_XTOL, |b| self.cutoff_value(b))
        } else {
            grid[k]
        };
        let principal_value = self.cutoff_value(b_hat);
        // FOC for an interior optimum where Q* is strictly increasing:
        // the remaining tail mass of J must vanish.
        let interior = b_hat > CUTOFF_XTOL && b_hat < 1.0 - CUTOFF_XTOL;
        let strictly_increasing =
            self.expected_quantity(b_hat + 1e-4) > self.expected_quantity(b_hat) + 1e-12;
        let foc_satisfied = !interior || !strictly_increasing || self.tail_j(b_hat).abs() < 1e-3;
        let contracts = grid
            .iter()
            .copied()
            .filter(|&b| b < b_hat)
            .chain(std::iter::once(b_hat))
            .map(|b| self.b_optimal_contract(b))
            .collect();
        DelegationInterval { b_hat, contracts, principal_value, foc_satisfied, degenerate: false }
    }
}

/// Menus implementing the delegation interval: one menu per contract in the
/// set, each listing that contract's `(q, t)` pairs across the `s`-grid.
/// Fed to `solve_pbe`, benefit types below `b_hat` separate onto their own
/// menu and types above pool on the frontier menu.
pub fn frontier_rights(interval: &DelegationInterval) -> ContractualRights {
    let menus = interval
        .contracts
        .iter()
        .enumerate()
        .map(|(m, ct)| {
            ct.s
                .iter()
                .enumerate()
                .map(|(j, _)| Contract {
                    // outcome index laid out menu-major; see frontier_game
                    outcome: 1 + m * ct.s.len() + j,
                    t1: ct.t[j],
                    t2: -ct.t[j],
                })
                .collect()
        })
        .collect();
    ContractualRights { menus }
}

/// A finite delegation game for the interval: benefit types on `b_grid`
/// (with weights from the benefit law), cost types on each contract's
/// `s`-grid, one outcome per (menu, s-node) quality level. Returns the
/// rights together with the utilities and type space to solve the game on.
pub fn frontier_game(
    env: &ProcurementEnv,
    interval: &DelegationInterval,
    b_grid: &[f64],
) -> Result<(ContractualRights, UtilityModel, FiniteTypeSpace), Error> {
    let s_grid = interval.contracts[0].s.clone();
    let n_s = s_grid.len();
    let mut labels = vec!["o".to_string()];
    let mut qualities = vec![0.0];
    for (m, ct) in interval.contracts.iter().enumerate() {
        for (j, &q) in ct.q.iter().enumerate() {
            labels.push(format!("q_{m}_{j}"));
            qualities.push(q);
        }
    }
    let cost = env.cost.clone();
    // decode "q_<menu>_<j>" back to its flat outcome index
    let decode = move |x: &str| -> usize {
        if x == "o" {
            return 0;
        }
        let mut it = x[2..].split('_');
        let m: usize = it.next().unwrap().parse().unwrap();
        let j: usize = it.next().unwrap().parse().unwrap();
        1 + m * n_s + j
    };
    let utilities = UtilityModel::from_fns(
        labels,
        "o",
        b_grid,
        &s_grid,
        {
            let qualities = qualities.clone();
            move |x, b| b * qualities[decode(x)]
        },
        {
            let qualities = qualities.clone();
            move |x, s| -s * cost.c(qualities[decode(x)])
        },
    )?;
    let w1: Vec<f64> = b_grid.iter().map(|&b| env.benefit.pdf(b)).collect();
    let w2: Vec<f64> = s_grid.iter().map(|&s| env.cost_type.pdf(s)).collect();
    let space = FiniteTypeSpace::product(b_grid.to_vec(), w1, s_grid.clone(), w2)?;
    Ok((frontier_rights(interval), utilities, space))
}
