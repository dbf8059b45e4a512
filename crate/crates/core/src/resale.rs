//! Delegated resale: price agreements between a seller and an intermediary.
//!
//! A seller supplies one unit to an intermediary (value `theta1 ~ G`) who
//! resells to a consumer (value `theta2 ~ F`). The seller cannot contract
//! with the consumer directly; instead it offers a price agreement: buy at
//! the discounted price `p - d(p)` conditional on reselling at `p`. With a
//! buyback clause the intermediary may also return the unit for a refund
//! `r`. The optimal agreements replicate the seller's optimal auction
//! benchmarks: revenue `pi_bb = E[max{0, psi_G, psi_F}]` with buybacks and
//! `pi_n = E[max{psi_G, psi_F}]` without.

use crate::dist::{check_hazard_dominance, TypeDistribution};
use crate::quad;
use crate::Error;

/// Whether the agreement includes a buyback (return-for-refund) clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResaleMode {
    WithBuyback,
    NoBuyback,
}

/// Primitives: intermediary value law `G`, consumer value law `F`. Both
/// must have monotone hazard rates and `F` must be conditionally dominated
/// by `G` (`F(v | v >= p) <= G(v | v >= p)`).
#[derive(Debug, Clone)]
pub struct ResaleEnv {
    /// Law of the intermediary's value `theta1`.
    pub g: TypeDistribution,
    /// Law of the consumer's value `theta2`.
    pub f: TypeDistribution,
}

/// An optimal price agreement: the price floor (`p_lower` with buybacks,
/// `p_hat` without), the refund if any, and the discount schedule tabulated
/// on a price grid.
#[derive(Debug, Clone)]
pub struct ResaleScheme {
    pub mode: ResaleMode,
    pub p_floor: f64,
    pub refund: Option<f64>,
    pub p_grid: Vec<f64>,
    pub discount: Vec<f64>,
}

/// One intermediary type's play under a scheme.
#[derive(Debug, Clone, Copy)]
pub struct SimRow {
    pub theta1: f64,
    pub price: f64,
    pub sale_prob: f64,
    pub profit: f64,
}

/// Equilibrium simulation output: per-type rows on the quadrature nodes of
/// `G` plus the seller's expected revenue.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub rows: Vec<SimRow>,
    pub revenue: f64,
}

const D_QUAD: usize = 512;
const SCHEME_GRID: usize = 201;

impl ResaleEnv {
    pub fn new(g: TypeDistribution, f: TypeDistribution) -> Result<Self, Error> {
        for (d, who) in [(&g, "intermediary"), (&f, "consumer")] {
            let rep = d.check_mhr();
            if !rep.passed {
                return Err(Error::InvalidInput(format!(
                    "{who} law must have a monotone hazard rate: {}",
                    rep.witness.unwrap_or_default()
                )));
            }
        }
        let dom = check_hazard_dominance(&f, &g);
        if !dom.passed {
            return Err(Error::InvalidInput(format!(
                "consumer law must be conditionally dominated by the intermediary law: {}",
                dom.witness.unwrap_or_default()
            )));
        }
        Ok(ResaleEnv { g, f })
    }

    /// The intermediary's monopoly resale price `psi_F^{-1}(theta1)`.
    pub fn monopoly_price(&self, theta1: f64) -> f64 {
        self.f
            .inverse_virtual_value(theta1)
            .expect("theta1 in [0,1] is always in the range of psi_F")
    }

    /// Monopoly profit: sell at `p_m` or keep the unit,
    /// `p_m (1 - F(p_m)) + theta1 F(p_m)`.
    pub fn monopoly_profit(&self, theta1: f64) -> f64 {
        let p = self.monopoly_price(theta1);
        p * (1.0 - self.f.cdf(p)) + theta1 * self.f.cdf(p)
    }

    /// Best posted price to the intermediary absent any agreement: the
    /// intermediary of type `theta1` is worth `pi_m(theta1)` and buys iff
    /// that exceeds the price, so the seller prices against
    /// `H = G(pi_m^{-1})`. Returns `(price, revenue)`.
    pub fn laissez_faire(&self) -> Result<(f64, f64), Error> {
        let lo = self.monopoly_profit(0.0);
        let hi = self.monopoly_profit(1.0);
        let grid = quad::linspace(0.0, 1.0, SCHEME_GRID);
        for w in grid.windows(2) {
            if self.monopoly_profit(w[1]) <= self.monopoly_profit(w[0]) {
                return Err(Error::InvalidInput(
                    "monopoly profit is not strictly increasing; cannot invert".into(),
                ));
            }
        }
        // survival of the intermediary's willingness to pay
        let surv = |p: f64| {
            if p <= lo {
                1.0
            } else if p >= hi {
                0.0
            } else {
                let t = quad::bisect(0.0, 1.0, 1e-12, |t| self.monopoly_profit(t) - p);
                1.0 - self.g.cdf(t)
            }
        };
        let rev = |p: f64| p * surv(p);
        let scan = quad::linspace(lo, hi, 2001);
        let k = scan
            .iter()
            .enumerate()
            .max_by(|a, b| rev(*a.1).partial_cmp(&rev(*b.1)).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let a = scan[k.saturating_sub(1)];
        let b = scan[(k + 1).min(scan.len() - 1)];
        let p = quad::golden_max(a, b, 1e-9, rev);
        Ok((p, rev(p)))
    }

    /// `psi_G^{-1}(psi_F(x))`; hazard dominance keeps the composition in
    /// range on every domain this module evaluates it on.
    fn comp_g_inv_f(&self, x: f64) -> f64 {
        self.g
            .inverse_virtual_value(self.f.virtual_value(x))
            .expect("dominance keeps psi_F(x) within the range of psi_G here")
    }

    /// `psi_F^{-1}(psi_G(theta1))`: the resale price the seller wants type
    /// `theta1` to post, before flooring.
    fn comp_f_inv_g(&self, theta1: f64) -> f64 {
        self.f
            .inverse_virtual_value(self.g.virtual_value(theta1))
            .expect("dominance keeps psi_G(theta1) within the range of psi_F")
    }

    fn discount_at(&self, mode: ResaleMode, p_floor: f64, refund: f64, p: f64) -> f64 {
        let tail = quad::rule(D_QUAD)
            .integrate(p_floor, p, |x| self.comp_g_inv_f(x) * self.f.pdf(x));
        match mode {
            ResaleMode::WithBuyback => {
                p * self.f.cdf(p) - refund * self.f.cdf(p_floor) - tail
            }
            ResaleMode::NoBuyback => p * self.f.cdf(p) - tail,
        }
    }

    /// Optimal agreement with a buyback clause: refund `r = psi_G^{-1}(0)`,
    /// price floor `psi_F^{-1}(0)`, discount
    /// `d(p) = p F(p) - r F(p_floor) - int_{p_floor}^p psi_G^{-1}(psi_F(x)) f(x) dx`.
    pub fn scheme_with_buyback(&self) -> ResaleScheme {
        let p_floor = self
            .f
            .inverse_virtual_value(0.0)
            .expect("psi_F spans 0 on a full-support law");
        let refund = self
            .g
            .inverse_virtual_value(0.0)
            .expect("psi_G spans 0 on a full-support law");
        self.tabulate(ResaleMode::WithBuyback, p_floor, Some(refund))
    }

    /// Optimal agreement without buybacks: floor `p_hat = psi_F^{-1}(psi_G(0))`,
    /// discount `d(p) = p F(p) - int_{p_hat}^p psi_G^{-1}(psi_F(x)) f(x) dx`.
    pub fn scheme_no_buyback(&self) -> ResaleScheme {
        let p_hat = self.comp_f_inv_g(0.0);
        self.tabulate(ResaleMode::NoBuyback, p_hat, None)
    }

    fn tabulate(&self, mode: ResaleMode, p_floor: f64, refund: Option<f64>) -> ResaleScheme {
        let p_grid = quad::linspace(p_floor, 1.0, SCHEME_GRID);
        let discount = p_grid
            .iter()
            .map(|&p| self.discount_at(mode, p_floor, refund.unwrap_or(0.0), p))
            .collect();
        ResaleScheme { mode, p_floor, refund, p_grid, discount }
    }

    /// The resale price type `theta1` posts in equilibrium:
    /// `max(psi_F^{-1}(psi_G(theta1)), p_floor)`.
    pub fn equilibrium_price_map(&self, scheme: &ResaleScheme, theta1: f64) -> f64 {
        self.comp_f_inv_g(theta1).max(scheme.p_floor)
    }

    /// One intermediary type's row: posted price, probability the consumer
    /// buys (ties buy), and the intermediary's expected profit.
    pub fn simulate_type(&self, scheme: &ResaleScheme, theta1: f64) -> SimRow {
        let p = self.equilibrium_price_map(scheme, theta1);
        let d = self.discount_at(scheme.mode, scheme.p_floor, scheme.refund.unwrap_or(0.0), p);
        let sale_prob = 1.0 - self.f.cdf(p);
        // value of keeping an unsold unit: the refund when returning beats
        // consuming, else own consumption value
        let keep = match (scheme.mode, scheme.refund) {
            (ResaleMode::WithBuyback, Some(r)) => r.max(theta1),
            _ => theta1,
        };
        let profit = p * sale_prob + keep * self.f.cdf(p) - (p - d);
        SimRow { theta1, price: p, sale_prob, profit }
    }

    /// Seller revenue contributed by type `theta1`: the discounted price
    /// paid up front, net of the expected refund for returning types.
    fn seller_take(&self, scheme: &ResaleScheme, theta1: f64, row: &SimRow) -> f64 {
        let upfront = row.price - self.discount_at(
            scheme.mode,
            scheme.p_floor,
            scheme.refund.unwrap_or(0.0),
            row.price,
        );
        let refund_leg = match (scheme.mode, scheme.refund) {
            (ResaleMode::WithBuyback, Some(r)) if theta1 < r => r * self.f.cdf(row.price),
            _ => 0.0,
        };
        upfront - refund_leg
    }

    /// Simulate equilibrium play over the quadrature nodes of `G`.
    pub fn simulate(&self, scheme: &ResaleScheme) -> Simulation {
        let mut rows = Vec::new();
        let mut revenue = 0.0;
        for (theta1, w) in self.g.measure() {
            let row = self.simulate_type(scheme, theta1);
            revenue += w * self.seller_take(scheme, theta1, &row);
            rows.push(row);
        }
        Simulation { rows, revenue }
    }

    /// Optimal-auction revenue with buybacks: `E[max{0, psi_G, psi_F}]`
    /// over the product law.
    pub fn revenue_with_buyback(&self) -> f64 {
        self.product_expect(|a, b| a.max(b).max(0.0))
    }

    /// Optimal-auction revenue without buybacks: `E[max{psi_G, psi_F}]`.
    pub fn revenue_no_buyback(&self) -> f64 {
        self.product_expect(|a, b| a.max(b))
    }

    fn product_expect(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        let psi_f: Vec<(f64, f64)> = self
            .f
            .measure()
            .map(|(x, w)| (self.f.virtual_value(x), w))
            .collect();
        let mut acc = 0.0;
        for (t1, w1) in self.g.measure() {
            let a = self.g.virtual_value(t1);
            for &(b, w2) in &psi_f {
                acc += w1 * w2 * h(a, b);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_env() -> ResaleEnv {
        ResaleEnv::new(TypeDistribution::uniform(201), TypeDistribution::uniform(201)).unwrap()
    }

    #[test]
    fn env_validation() {
        // uniform consumer law is NOT dominated by a power(2) intermediary
        let p2 = TypeDistribution::power(2.0, 201).unwrap();
        assert!(ResaleEnv::new(p2.clone(), TypeDistribution::uniform(201)).is_err());
        // the reverse orientation is fine
        assert!(ResaleEnv::new(TypeDistribution::uniform(201), p2).is_ok());
    }

    #[test]
    fn monopoly_values_uniform() {
        let env = uniform_env();
        assert!((env.monopoly_price(0.0) - 0.5).abs() < 1e-9);
        assert!((env.monopoly_profit(0.0) - 0.25).abs() < 1e-9);
        assert!((env.monopoly_price(1.0) - 1.0).abs() < 1e-9);
        assert!((env.monopoly_profit(1.0) - 1.0).abs() < 1e-9);
        assert!((env.monopoly_price(0.5) - 0.75).abs() < 1e-9);
        assert!((env.monopoly_profit(0.5) - 0.5625).abs() < 1e-9);
        let grid = quad::linspace(0.0, 1.0, 101);
        let mut prev = -1.0;
        for &t in &grid {
            let m = env.monopoly_profit(t);
            assert!(m >= prev - 1e-12);
            prev = m;
        }
    }

    #[test]
    fn laissez_faire_uniform() {
        let env = uniform_env();
        let (p, rev) = env.laissez_faire().unwrap();
        assert!((p - 4.0 / 9.0).abs() < 1e-6, "p_LF = {p}");
        assert!((rev - 8.0 / 27.0).abs() < 1e-8, "rev = {rev}");
        assert!(rev <= env.revenue_with_buyback());
    }

    #[test]
    fn buyback_scheme_uniform() {
        let env = uniform_env();
        let s = env.scheme_with_buyback();
        assert!((s.p_floor - 0.5).abs() < 1e-9);
        assert!((s.refund.unwrap() - 0.5).abs() < 1e-9);
        for (&p, &d) in s.p_grid.iter().zip(&s.discount) {
            let want = 0.5 * p * p - 0.125;
            assert!((d - want).abs() < 1e-8, "d({p}) = {d}, want {want}");
        }
        assert!(s.discount[0].abs() < 1e-8);
        assert!((s.discount.last().unwrap() - 0.375).abs() < 1e-8);
    }

    #[test]
    fn no_buyback_scheme_uniform() {
        let env = uniform_env();
        let s = env.scheme_no_buyback();
        assert!(s.p_floor.abs() < 1e-9, "p_hat = {}", s.p_floor);
        for (&p, &d) in s.p_grid.iter().zip(&s.discount) {
            assert!((d - 0.5 * p * p).abs() < 1e-8);
        }
        // empty integral at the floor: d(p_hat) = p_hat F(p_hat)
        assert!((s.discount[0] - s.p_floor * env.f.cdf(s.p_floor)).abs() < 1e-12);
    }

    #[test]
    fn discount_bounds_and_monotonicity() {
        for env in [
            uniform_env(),
            ResaleEnv::new(
                TypeDistribution::uniform(201),
                TypeDistribution::power(2.0, 201).unwrap(),
            )
            .unwrap(),
        ] {
            for s in [env.scheme_with_buyback(), env.scheme_no_buyback()] {
                for (k, (&p, &d)) in s.p_grid.iter().zip(&s.discount).enumerate() {
                    assert!(d >= -1e-8, "d({p}) = {d} negative");
                    assert!(d <= p + 1e-8, "d({p}) = {d} above p");
                    if k > 0 {
                        assert!(d >= s.discount[k - 1] - 1e-8, "d not monotone at {p}");
                    }
                }
            }
        }
    }

    #[test]
    fn price_map_uniform() {
        let env = uniform_env();
        let bb = env.scheme_with_buyback();
        assert!((env.equilibrium_price_map(&bb, 0.8) - 0.8).abs() < 1e-8);
        assert!((env.equilibrium_price_map(&bb, 0.2) - 0.5).abs() < 1e-9);
        for &t in &quad::linspace(0.0, 1.0, 51) {
            assert!(env.equilibrium_price_map(&bb, t) <= env.monopoly_price(t) + 1e-8);
        }
    }

    #[test]
    fn auction_revenues_uniform() {
        let env = uniform_env();
        let bb = env.revenue_with_buyback();
        let n = env.revenue_no_buyback();
        assert!((bb - 5.0 / 12.0).abs() < 5e-4, "pi_bb = {bb}");
        assert!((n - 1.0 / 3.0).abs() < 5e-4, "pi_n = {n}");
        assert!(0.5 * bb <= n + 1e-9 && n <= bb + 1e-9);
    }

    #[test]
    fn simulation_attains_auction_revenue() {
        for env in [
            uniform_env(),
            ResaleEnv::new(
                TypeDistribution::uniform(201),
                TypeDistribution::power(1.5, 201).unwrap(),
            )
            .unwrap(),
        ] {
            let bb = env.simulate(&env.scheme_with_buyback());
            assert!(
                (bb.revenue - env.revenue_with_buyback()).abs() < 1e-3,
                "buyback: {} vs {}",
                bb.revenue,
                env.revenue_with_buyback()
            );
            let nb = env.simulate(&env.scheme_no_buyback());
            assert!(
                (nb.revenue - env.revenue_no_buyback()).abs() < 1e-3,
                "no buyback: {} vs {}",
                nb.revenue,
                env.revenue_no_buyback()
            );
        }
    }

    #[test]
    fn participation_closed_under_schemes() {
        let env = uniform_env();
        for s in [env.scheme_with_buyback(), env.scheme_no_buyback()] {
            let sim = env.simulate(&s);
            for row in &sim.rows {
                assert!(
                    row.profit >= -1e-9,
                    "type {} loses from participating",
                    row.theta1
                );
            }
        }
        // the refund-indifferent type is held exactly to its outside option
        let s = env.scheme_with_buyback();
        let r = s.refund.unwrap();
        let row = env.simulate_type(&s, r);
        assert!(row.profit.abs() < 1e-8);
        // laissez-faire leaves low types out
        let (p_lf, _) = env.laissez_faire().unwrap();
        assert!(env.monopoly_profit(0.0) < p_lf);
    }
}
