//! Finite-type direct mechanisms and their constraint checkers.
//!
//! A [`DirectMechanism`] pairs a joint type law on a finite grid with an
//! outcome table and transfer tables. Transfers are outflows: a player's
//! payoff at a profile is `u_i(outcome, theta_i) - t_i`. The checkers cover
//! Bayesian incentive compatibility and interim rationality for both
//! players, plus the ex-post conditions (dominant-strategy incentive
//! compatibility, ex-post rationality) for the agent, and budget balance.
//! [`DirectMechanism::delegated_implementable`] conjoins the six conditions
//! that characterize implementability through delegation.

use crate::report::{FeasibilityReport, DEFAULT_TOL};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    /// Player 1, who receives the contractual rights.
    Delegate,
    /// Player 2, who picks a contract from the chosen menu.
    Agent,
}

/// Budget-balance flavor: exact (`t1 + t2 = 0`) or weak (`t1 + t2 >= 0`,
/// money may be burned but not injected).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    Exact,
    Weak,
}

/// Joint type law over a finite grid `Theta1 x Theta2`.
#[derive(Debug, Clone)]
pub struct FiniteTypeSpace {
    theta1: Vec<f64>,
    theta2: Vec<f64>,
    /// Row-major joint pmf, `pmf[i][j] = P(theta1[i], theta2[j])`.
    pmf: Vec<Vec<f64>>,
    marginal1: Vec<f64>,
    marginal2: Vec<f64>,
}

impl FiniteTypeSpace {
    /// Correlated laws are allowed; both marginals must be strictly
    /// positive and the pmf must sum to 1 within 1e-12.
    pub fn new(theta1: Vec<f64>, theta2: Vec<f64>, pmf: Vec<Vec<f64>>) -> Result<Self, Error> {
        for grid in [&theta1, &theta2] {
            if grid.is_empty() {
                return Err(Error::InvalidInput("empty type grid".into()));
            }
            if grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput("type grid must be strictly increasing".into()));
            }
            if grid.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                return Err(Error::InvalidInput("types must lie in [0, 1]".into()));
            }
        }
        if pmf.len() != theta1.len() || pmf.iter().any(|row| row.len() != theta2.len()) {
            return Err(Error::InvalidInput("pmf shape must match the type grids".into()));
        }
        if pmf.iter().flatten().any(|&p| p < 0.0) {
            return Err(Error::InvalidInput("pmf entries must be nonnegative".into()));
        }
        let total: f64 = pmf.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("pmf sums to {total}, not 1")));
        }
        let marginal1: Vec<f64> = pmf.iter().map(|row| row.iter().sum()).collect();
        let marginal2: Vec<f64> = (0..theta2.len())
            .map(|j| pmf.iter().map(|row| row[j]).sum())
            .collect();
        if marginal1.iter().chain(&marginal2).any(|&p| p <= 0.0) {
            return Err(Error::InvalidInput("both marginals must be strictly positive".into()));
        }
        Ok(FiniteTypeSpace { theta1, theta2, pmf, marginal1, marginal2 })
    }

    /// Independent law from per-player weights (normalized here).
    pub fn product(
        theta1: Vec<f64>,
        weights1: Vec<f64>,
        theta2: Vec<f64>,
        weights2: Vec<f64>,
    ) -> Result<Self, Error> {
        if weights1.len() != theta1.len() || weights2.len() != theta2.len() {
            return Err(Error::InvalidInput("weight length must match grid length".into()));
        }
        let (s1, s2): (f64, f64) = (weights1.iter().sum(), weights2.iter().sum());
        if s1 <= 0.0 || s2 <= 0.0 {
            return Err(Error::InvalidInput("weights must have positive mass".into()));
        }
        let pmf = weights1
            .iter()
            .map(|&a| weights2.iter().map(|&b| a * b / (s1 * s2)).collect())
            .collect();
        Self::new(theta1, theta2, pmf)
    }

    /// Uniform product law over two equally spaced grids on `[0, 1]`.
    pub fn uniform_grid(n1: usize, n2: usize) -> Self {
        let g = |n: usize| crate::quad::linspace(0.0, 1.0, n);
        Self::product(g(n1), vec![1.0; n1], g(n2), vec![1.0; n2])
            .expect("uniform grid is always valid")
    }

    pub fn theta1(&self) -> &[f64] {
        &self.theta1
    }

    pub fn theta2(&self) -> &[f64] {
        &self.theta2
    }

    pub fn pmf(&self, i: usize, j: usize) -> f64 {
        self.pmf[i][j]
    }

    pub fn marginal(&self, player: Player, idx: usize) -> f64 {
        match player {
            Player::Delegate => self.marginal1[idx],
            Player::Agent => self.marginal2[idx],
        }
    }

    /// P(other = j | own = i) for the given player's own index.
    pub fn conditional(&self, player: Player, own: usize, other: usize) -> f64 {
        match player {
            Player::Delegate => self.pmf[own][other] / self.marginal1[own],
            Player::Agent => self.pmf[other][own] / self.marginal2[own],
        }
    }
}

/// Outcome labels with per-player utility tables; the distinguished default
/// outcome is each player's outside option.
#[derive(Debug, Clone)]
pub struct UtilityModel {
    outcomes: Vec<String>,
    default_outcome: usize,
    /// `u1[x][i]` = delegate utility of outcome `x` at `theta1[i]`.
    u1: Vec<Vec<f64>>,
    /// `u2[x][j]` = agent utility of outcome `x` at `theta2[j]`.
    u2: Vec<Vec<f64>>,
}

impl UtilityModel {
    pub fn from_fns(
        outcomes: Vec<String>,
        default_outcome: &str,
        theta1: &[f64],
        theta2: &[f64],
        u1: impl Fn(&str, f64) -> f64,
        u2: impl Fn(&str, f64) -> f64,
    ) -> Result<Self, Error> {
        let default_idx = outcomes
            .iter()
            .position(|x| x == default_outcome)
            .ok_or_else(|| {
                Error::InvalidInput(format!("default outcome '{default_outcome}' not in outcome list"))
            })?;
        let tab1 = outcomes
            .iter()
            .map(|x| theta1.iter().map(|&t| u1(x, t)).collect())
            .collect();
        let tab2 = outcomes
            .iter()
            .map(|x| theta2.iter().map(|&t| u2(x, t)).collect())
            .collect();
        Ok(UtilityModel { outcomes, default_outcome: default_idx, u1: tab1, u2: tab2 })
    }

    /// Parse from CSV rows `outcome,player,theta,u` with a header; theta
    /// values must cover both grids exactly. `default_outcome` names the
    /// outside option (commonly "o").
    pub fn from_csv(
        text: &str,
        default_outcome: &str,
        theta1: &[f64],
        theta2: &[f64],
    ) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines.next().ok_or_else(|| Error::Parse("empty utilities CSV".into()))?;
        let mut outcomes: Vec<String> = Vec::new();
        let mut rows: Vec<(String, u8, f64, f64)> = Vec::new();
        for (k, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 4 {
                return Err(Error::Parse(format!("utilities row {}: need 4 columns", k + 2)));
            }
            let player: u8 = cells[1]
                .parse()
                .map_err(|e| Error::Parse(format!("utilities row {}: bad player ({e})", k + 2)))?;
            if player != 1 && player != 2 {
                return Err(Error::Parse(format!("utilities row {}: player must be 1 or 2", k + 2)));
            }
            let theta: f64 = cells[2]
                .parse()
                .map_err(|e| Error::Parse(format!("utilities row {}: bad theta ({e})", k + 2)))?;
            let u: f64 = cells[3]
                .parse()
                .map_err(|e| Error::Parse(format!("utilities row {}: bad u ({e})", k + 2)))?;
            if !outcomes.iter().any(|x| x == cells[0]) {
                outcomes.push(cells[0].to_string());
            }
            rows.push((cells[0].to_string(), player, theta, u));
        }
        let lookup = |label: &str, player: u8, t: f64| -> Result<f64, Error> {
            rows.iter()
                .find(|(x, p, th, _)| x == label && *p == player && (th - t).abs() < 1e-12)
                .map(|&(_, _, _, u)| u)
                .ok_or_else(|| {
                    Error::Parse(format!(
                        "utilities CSV missing outcome '{label}' player {player} theta {t}"
                    ))
                })
        };
        let mut u1 = Vec::new();
        let mut u2 = Vec::new();
        for x in &outcomes {
            u1.push(theta1.iter().map(|&t| lookup(x, 1, t)).collect::<Result<Vec<_>, _>>()?);
            u2.push(theta2.iter().map(|&t| lookup(x, 2, t)).collect::<Result<Vec<_>, _>>()?);
        }
        let default_idx = outcomes
            .iter()
            .position(|x| x == default_outcome)
            .ok_or_else(|| {
                Error::Parse(format!("default outcome '{default_outcome}' not present in utilities CSV"))
            })?;
        Ok(UtilityModel { outcomes, default_outcome: default_idx, u1, u2 })
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn default_outcome(&self) -> usize {
        self.default_outcome
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|x| x == label)
    }

    /// `u1(outcome x, theta1 index i)`.
    pub fn u1(&self, x: usize, i: usize) -> f64 {
        self.u1[x][i]
    }

    /// `u2(outcome x, theta2 index j)`.
    pub fn u2(&self, x: usize, j: usize) -> f64 {
        self.u2[x][j]
    }
}

/// A direct mechanism: outcome and transfer tables over the full grid.
#[derive(Debug, Clone)]
pub struct DirectMechanism {
    pub space: FiniteTypeSpace,
    pub utilities: UtilityModel,
    /// `outcome[i][j]` = outcome index at `(theta1[i], theta2[j])`.
    pub outcome: Vec<Vec<usize>>,
    pub t1: Vec<Vec<f64>>,
    pub t2: Vec<Vec<f64>>,
}

impl DirectMechanism {
    pub fn new(
        space: FiniteTypeSpace,
        utilities: UtilityModel,
        outcome: Vec<Vec<usize>>,
        t1: Vec<Vec<f64>>,
        t2: Vec<Vec<f64>>,
    ) -> Result<Self, Error> {
        let (n1, n2) = (space.theta1.len(), space.theta2.len());
        let shaped = |tab: &Vec<Vec<f64>>| tab.len() == n1 && tab.iter().all(|r| r.len() == n2);
        if outcome.len() != n1 || outcome.iter().any(|r| r.len() != n2) || !shaped(&t1) || !shaped(&t2) {
            return Err(Error::InvalidInput("mechanism tables must be total over the grid".into()));
        }
        if outcome.iter().flatten().any(|&x| x >= utilities.outcomes.len()) {
            return Err(Error::InvalidInput("outcome table references an unknown outcome".into()));
        }
        Ok(DirectMechanism { space, utilities, outcome, t1, t2 })
    }

    /// Delegate ex-post payoff at grid profile `(i, j)` (transfer is an outflow).
    pub fn payoff1(&self, i: usize, j: usize) -> f64 {
        self.utilities.u1(self.outcome[i][j], i) - self.t1[i][j]
    }

    /// Agent ex-post payoff at grid profile `(i, j)`.
    pub fn payoff2(&self, i: usize, j: usize) -> f64 {
        self.utilities.u2(self.outcome[i][j], j) - self.t2[i][j]
    }

    /// Interim payoff of `player` with true own index `own` when reporting
    /// `report`, the opponent reporting truthfully.
    fn interim(&self, player: Player, own: usize, report: usize) -> f64 {
        let n_other = match player {
            Player::Delegate => self.space.theta2.len(),
            Player::Agent => self.space.theta1.len(),
        };
        (0..n_other)
            .map(|k| {
                let c = self.space.conditional(player, own, k);
                if c == 0.0 {
                    return 0.0;
                }
                let v = match player {
                    Player::Delegate => {
                        self.utilities.u1(self.outcome[report][k], own) - self.t1[report][k]
                    }
                    Player::Agent => {
                        self.utilities.u2(self.outcome[k][report], own) - self.t2[k][report]
                    }
                };
                c * v
            })
            .sum()
    }

    fn own_types(&self, player: Player) -> &[f64] {
        match player {
            Player::Delegate => &self.space.theta1,
            Player::Agent => &self.space.theta2,
        }
    }

    /// Bayesian incentive compatibility: truthful interim payoff beats
    /// every interim misreport, for each own type with positive marginal.
    pub fn check_bic(&self, player: Player) -> FeasibilityReport {
        self.check_bic_tol(player, DEFAULT_TOL)
    }

    pub fn check_bic_tol(&self, player: Player, tol: f64) -> FeasibilityReport {
        let label = match player {
            Player::Delegate => "BIC (delegate)",
            Player::Agent => "BIC (agent)",
        };
        let mut rep = FeasibilityReport::new(label, tol);
        let types = self.own_types(player);
        for own in 0..types.len() {
            let truth = self.interim(player, own, own);
            for report in 0..types.len() {
                if report == own {
                    continue;
                }
                let dev = self.interim(player, own, report);
                rep.record(dev - truth, || {
                    format!(
                        "type {:.6} gains {:.3e} reporting {:.6}",
                        types[own],
                        dev - truth,
                        types[report]
                    )
                });
            }
        }
        rep
    }

    /// Interim individual rationality: truthful interim payoff covers the
    /// outside option value at every own type.
    pub fn check_iir(&self, player: Player) -> FeasibilityReport {
        self.check_iir_tol(player, DEFAULT_TOL)
    }

    pub fn check_iir_tol(&self, player: Player, tol: f64) -> FeasibilityReport {
        let label = match player {
            Player::Delegate => "IIR (delegate)",
            Player::Agent => "IIR (agent)",
        };
        let mut rep = FeasibilityReport::new(label, tol);
        let types = self.own_types(player);
        let o = self.utilities.default_outcome;
        for own in 0..types.len() {
            let truth = self.interim(player, own, own);
            let outside = match player {
                Player::Delegate => self.utilities.u1(o, own),
                Player::Agent => self.utilities.u2(o, own),
            };
            rep.record(outside - truth, || {
                format!("type {:.6} is {:.3e} below the outside option", types[own], outside - truth)
            });
        }
        rep
    }

    /// Dominant-strategy incentive compatibility for the agent: at every
    /// positive-mass profile, no ex-post misreport gains.
    pub fn check_dsic(&self) -> FeasibilityReport {
        self.check_dsic_tol(DEFAULT_TOL)
    }

    pub fn check_dsic_tol(&self, tol: f64) -> FeasibilityReport {
        let mut rep = FeasibilityReport::new("DSIC (agent)", tol);
        for i in 0..self.space.theta1.len() {
            for j in 0..self.space.theta2.len() {
                if self.space.pmf[i][j] == 0.0 {
                    continue;
                }
                let truth = self.payoff2(i, j);
                for r in 0..self.space.theta2.len() {
                    if r == j {
                        continue;
                    }
                    let dev = self.utilities.u2(self.outcome[i][r], j) - self.t2[i][r];
                    rep.record(dev - truth, || {
                        format!(
                            "at (theta1={:.6}, theta2={:.6}) agent gains {:.3e} reporting {:.6}",
                            self.space.theta1[i],
                            self.space.theta2[j],
                            dev - truth,
                            self.space.theta2[r]
                        )
                    });
                }
            }
        }
        rep
    }

    /// Ex-post individual rationality for the agent at every positive-mass
    /// profile.
    pub fn check_epir(&self) -> FeasibilityReport {
        self.check_epir_tol(DEFAULT_TOL)
    }

    pub fn check_epir_tol(&self, tol: f64) -> FeasibilityReport {
        let mut rep = FeasibilityReport::new("EPIR (agent)", tol);
        let o = self.utilities.default_outcome;
        for i in 0..self.space.theta1.len() {
            for j in 0..self.space.theta2.len() {
                if self.space.pmf[i][j] == 0.0 {
                    continue;
                }
                let gap = self.utilities.u2(o, j) - self.payoff2(i, j);
                rep.record(gap, || {
                    format!(
                        "at (theta1={:.6}, theta2={:.6}) agent is {:.3e} below the outside option",
                        self.space.theta1[i], self.space.theta2[j], gap
                    )
                });
            }
        }
        rep
    }

    pub fn check_budget_balance(&self, mode: BudgetMode) -> FeasibilityReport {
        self.check_budget_balance_tol(mode, DEFAULT_TOL)
    }

    pub fn check_budget_balance_tol(&self, mode: BudgetMode, tol: f64) -> FeasibilityReport {
        let label = match mode {
            BudgetMode::Exact => "budget balance (exact)",
            BudgetMode::Weak => "budget balance (weak)",
        };
        let mut rep = FeasibilityReport::new(label, tol);
        for i in 0..self.space.theta1.len() {
            for j in 0..self.space.theta2.len() {
                let s = self.t1[i][j] + self.t2[i][j];
                let violation = match mode {
                    BudgetMode::Exact => s.abs(),
                    BudgetMode::Weak => -s,
                };
                rep.record(violation, || {
                    format!(
                        "t1+t2 = {s:.3e} at (theta1={:.6}, theta2={:.6})",
                        self.space.theta1[i], self.space.theta2[j]
                    )
                });
            }
        }
        rep
    }

    /// The six-way gate for implementability through delegation: interim
    /// incentive compatibility and rationality for both players, plus the
    /// agent's ex-post conditions.
    pub fn delegated_implementable(&self) -> FeasibilityReport {
        self.delegated_implementable_tol(DEFAULT_TOL)
    }

    pub fn delegated_implementable_tol(&self, tol: f64) -> FeasibilityReport {
        FeasibilityReport::combine(
            "delegated implementable",
            vec![
                self.check_bic_tol(Player::Delegate, tol),
                self.check_iir_tol(Player::Delegate, tol),
                self.check_bic_tol(Player::Agent, tol),
                self.check_iir_tol(Player::Agent, tol),
                self.check_dsic_tol(tol),
                self.check_epir_tol(tol),
            ],
        )
    }

    /// Serialize as CSV rows `theta1,theta2,pmf,outcome,t1,t2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta1,theta2,pmf,outcome,t1,t2\n");
        for i in 0..self.space.theta1.len() {
            for j in 0..self.space.theta2.len() {
                out.push_str(&format!(
                    "{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e}\n",
                    self.space.theta1[i],
                    self.space.theta2[j],
                    self.space.pmf[i][j],
                    self.utilities.outcomes[self.outcome[i][j]],
                    self.t1[i][j],
                    self.t2[i][j]
                ));
            }
        }
        out
    }

    /// Parse a mechanism from CSV text (see [`to_csv`](Self::to_csv));
    /// every grid cell must appear exactly once. Utilities are supplied
    /// separately since the CSV carries only labels.
    pub fn from_csv(text: &str, utilities: UtilityModel) -> Result<Self, Error> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines.next().ok_or_else(|| Error::Parse("empty mechanism CSV".into()))?;
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 6 {
                return Err(Error::Parse(format!("mechanism row {}: need 6 columns", k + 2)));
            }
            let num = |s: &str, what: &str| -> Result<f64, Error> {
                s.parse().map_err(|e| {
                    Error::Parse(format!("mechanism row {}: bad {what} ({e})", k + 2))
                })
            };
            let x = utilities.outcome_index(cells[3]).ok_or_else(|| {
                Error::Parse(format!("mechanism row {}: unknown outcome '{}'", k + 2, cells[3]))
            })?;
            rows.push((
                num(cells[0], "theta1")?,
                num(cells[1], "theta2")?,
                num(cells[2], "pmf")?,
                x,
                num(cells[4], "t1")?,
                num(cells[5], "t2")?,
            ));
        }
        let mut theta1: Vec<f64> = Vec::new();
        let mut theta2: Vec<f64> = Vec::new();
        let near = |grid: &[f64], t: f64| grid.iter().position(|&g| (g - t).abs() < 1e-12);
        for &(a, b, ..) in &rows {
            if near(&theta1, a).is_none() {
                theta1.push(a);
            }
            if near(&theta2, b).is_none() {
                theta2.push(b);
            }
        }
        theta1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        theta2.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (n1, n2) = (theta1.len(), theta2.len());
        if rows.len() != n1 * n2 {
            return Err(Error::Parse(format!(
                "mechanism CSV has {} rows but the grid needs {}",
                rows.len(),
                n1 * n2
            )));
        }
        let mut pmf = vec![vec![f64::NAN; n2]; n1];
        let mut outcome = vec![vec![usize::MAX; n2]; n1];
        let mut t1 = vec![vec![0.0; n2]; n1];
        let mut t2 = vec![vec![0.0; n2]; n1];
        for (a, b, p, x, ta, tb) in rows {
            let i = near(&theta1, a).unwrap();
            let j = near(&theta2, b).unwrap();
            if !pmf[i][j].is_nan() {
                return Err(Error::Parse(format!("duplicate mechanism row at ({a}, {b})")));
            }
            pmf[i][j] = p;
            outcome[i][j] = x;
            t1[i][j] = ta;
            t2[i][j] = tb;
        }
        let space = FiniteTypeSpace::new(theta1, theta2, pmf)?;
        Self::new(space, utilities, outcome, t1, t2)
    }
}
