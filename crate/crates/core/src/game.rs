//! The two-stage delegation game.
//!
//! The principal hands the delegate a set of menus ([`ContractualRights`]).
//! The delegate picks one menu (or opts out), then the agent picks a
//! contract from it (or opts out). Under private values the agent's best
//! response is belief-free, so backward induction in [`solve_pbe`] computes
//! a perfect Bayesian equilibrium exactly.
//!
//! [`canonical_rights_from_scf`] builds the rights that implement a given
//! direct mechanism: one menu per delegate type, holding that type's row of
//! the outcome table. On finite grids ties are real, so the construction
//! also returns a [`Designation`] the solver uses to break ties toward the
//! target mechanism's selection.

use crate::mech::{DirectMechanism, FiniteTypeSpace, Player, UtilityModel};
use crate::report::FeasibilityReport;

/// A contract: an outcome index into the [`UtilityModel`] plus transfers
/// (outflows).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    pub outcome: usize,
    pub t1: f64,
    pub t2: f64,
}

/// The delegate's rights: a finite set of menus of contracts. Opting out
/// (the default outcome, zero transfers) is always available to both
/// players on top of these.
#[derive(Debug, Clone)]
pub struct ContractualRights {
    pub menus: Vec<Vec<Contract>>,
}

/// Tie-break targets used when verifying that rights implement a specific
/// mechanism: which contract each agent type should take from each menu,
/// and which menu each delegate type should pick.
#[derive(Debug, Clone)]
pub struct Designation {
    /// `contract[menu][j]` = designated contract index for agent type `j`.
    pub contract: Vec<Vec<Option<usize>>>,
    /// `menu[i]` = designated menu index for delegate type `i`.
    pub menu: Vec<usize>,
}

/// A pure-strategy equilibrium of the delegation game.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// Menu index per delegate type; `None` is opt-out.
    pub delegate_choice: Vec<Option<usize>>,
    /// `agent_choice[menu][j]`: contract index, `None` is opt-out.
    pub agent_choice: Vec<Vec<Option<usize>>>,
    /// Induced play at each grid profile.
    pub induced: Vec<Vec<Contract>>,
}

const TIE_TOL: f64 = 1e-9;

impl ContractualRights {
    /// Serialize as CSV rows `menu_id,outcome_label,t1,t2`.
    pub fn to_csv(&self, utilities: &UtilityModel) -> String {
        let mut out = String::from("menu_id,outcome_label,t1,t2\n");
        for (id, menu) in self.menus.iter().enumerate() {
            for c in menu {
                out.push_str(&format!(
                    "{},{},{:.12e},{:.12e}\n",
                    id, utilities.outcomes()[c.outcome], c.t1, c.t2
                ));
            }
        }
        out
    }

    pub fn from_csv(text: &str, utilities: &UtilityModel) -> Result<Self, crate::Error> {
        use crate::Error;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines.next().ok_or_else(|| Error::Parse("empty rights CSV".into()))?;
        let mut menus: Vec<Vec<Contract>> = Vec::new();
        for (k, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 4 {
                return Err(Error::Parse(format!("rights row {}: need 4 columns", k + 2)));
            }
            let id: usize = cells[0]
                .parse()
                .map_err(|e| Error::Parse(format!("rights row {}: bad menu_id ({e})", k + 2)))?;
            let outcome = utilities.outcome_index(cells[1]).ok_or_else(|| {
                Error::Parse(format!("rights row {}: unknown outcome '{}'", k + 2, cells[1]))
            })?;
            let t1: f64 = cells[2]
                .parse()
                .map_err(|e| Error::Parse(format!("rights row {}: bad t1 ({e})", k + 2)))?;
            let t2: f64 = cells[3]
                .parse()
                .map_err(|e| Error::Parse(format!("rights row {}: bad t2 ({e})", k + 2)))?;
            while menus.len() <= id {
                menus.push(Vec::new());
            }
            menus[id].push(Contract { outcome, t1, t2 });
        }
        if menus.iter().any(|m| m.is_empty()) {
            return Err(Error::Parse("rights CSV leaves a menu empty".into()));
        }
        Ok(ContractualRights { menus })
    }
}

/// The agent's best response to a menu at agent type index `j`.
///
/// Returns the payoff-maximizing contract index, or `None` for opt-out.
/// Ties within `1e-9`: the designated contract wins if it is tied for the
/// max; otherwise the lowest-index contract; contracts beat opt-out.
pub fn agent_best_response(
    menu: &[Contract],
    utilities: &UtilityModel,
    j: usize,
    designated: Option<usize>,
) -> Option<usize> {
    let o = utilities.default_outcome();
    let outside = utilities.u2(o, j);
    let mut best: Option<usize> = None;
    let mut best_value = f64::NEG_INFINITY;
    for (idx, c) in menu.iter().enumerate() {
        let v = utilities.u2(c.outcome, j) - c.t2;
        if v > best_value + TIE_TOL {
            best = Some(idx);
            best_value = v;
        }
    }
    if best_value < outside - TIE_TOL {
        return None;
    }
    // collect the tie set and apply the designation preference
    let tied: Vec<usize> = menu
        .iter()
        .enumerate()
        .filter(|(_, c)| utilities.u2(c.outcome, j) - c.t2 >= best_value.max(outside) - TIE_TOL)
        .map(|(idx, _)| idx)
        .collect();
    if let Some(d) = designated {
        if tied.contains(&d) {
            return Some(d);
        }
    }
    tied.first().copied().or(best)
}

/// Solve the delegation game by backward induction.
///
/// The agent responds menu-by-menu (belief-free); the delegate then picks
/// the menu maximizing interim expected payoff against that response map,
/// with opt-out available. A `designation` steers tie-breaks when checking
/// a target mechanism; without one ties go to the lowest index, and staying
/// in (a menu, a contract) beats opting out on ties.
pub fn solve_pbe(
    rights: &ContractualRights,
    utilities: &UtilityModel,
    space: &FiniteTypeSpace,
    designation: Option<&Designation>,
) -> Equilibrium {
    let n1 = space.theta1().len();
    let n2 = space.theta2().len();
    let o = utilities.default_outcome();

    let agent_choice: Vec<Vec<Option<usize>>> = rights
        .menus
        .iter()
        .enumerate()
        .map(|(m, menu)| {
            (0..n2)
                .map(|j| {
                    let des = designation.and_then(|d| d.contract[m][j]);
                    agent_best_response(menu, utilities, j, des)
                })
                .collect()
        })
        .collect();

    let mut delegate_choice = Vec::with_capacity(n1);
    for i in 0..n1 {
        let menu_value = |m: usize| -> f64 {
            (0..n2)
                .map(|j| {
                    let c = space.conditional(Player::Delegate, i, j);
                    if c == 0.0 {
                        return 0.0;
                    }
                    let v = match agent_choice[m][j] {
                        Some(k) => {
                            let ct = &rights.menus[m][k];
                            utilities.u1(ct.outcome, i) - ct.t1
                        }
                        None => utilities.u1(o, i),
                    };
                    c * v
                })
                .sum()
        };
        let outside = utilities.u1(o, i);
        let mut best_value = f64::NEG_INFINITY;
        for m in 0..rights.menus.len() {
            best_value = best_value.max(menu_value(m));
        }
        if best_value < outside - TIE_TOL {
            delegate_choice.push(None);
            continue;
        }
        let floor = best_value.max(outside) - TIE_TOL;
        let tied: Vec<usize> = (0..rights.menus.len())
            .filter(|&m| menu_value(m) >= floor)
            .collect();
        let pick = designation
            .map(|d| d.menu[i])
            .filter(|m| tied.contains(m))
            .or_else(|| tied.first().copied());
        delegate_choice.push(pick);
    }

    let opt_out = Contract { outcome: o, t1: 0.0, t2: 0.0 };
    let induced: Vec<Vec<Contract>> = (0..n1)
        .map(|i| {
            (0..n2)
                .map(|j| match delegate_choice[i] {
                    Some(m) => match agent_choice[m][j] {
                        Some(k) => rights.menus[m][k],
                        None => opt_out,
                    },
                    None => opt_out,
                })
                .collect()
        })
        .collect();

    Equilibrium { delegate_choice, agent_choice, induced }
}

/// Rights implementing a direct mechanism: one menu per delegate type
/// holding the distinct contracts of that type's outcome row, restricted to
/// agent types with positive conditional mass. The returned designation
/// records which contract each agent type is meant to take and which menu
/// each delegate type is meant to pick.
pub fn canonical_rights_from_scf(m: &DirectMechanism) -> (ContractualRights, Designation) {
    let n1 = m.space.theta1().len();
    let n2 = m.space.theta2().len();
    let mut menus = Vec::with_capacity(n1);
    let mut contract_des = Vec::with_capacity(n1);
    for i in 0..n1 {
        let mut menu: Vec<Contract> = Vec::new();
        let mut des = vec![None; n2];
        for j in 0..n2 {
            if m.space.pmf(i, j) == 0.0 {
                continue;
            }
            let c = Contract { outcome: m.outcome[i][j], t1: m.t1[i][j], t2: m.t2[i][j] };
            let idx = match menu.iter().position(|&e| e == c) {
                Some(k) => k,
                None => {
                    menu.push(c);
                    menu.len() - 1
                }
            };
            des[j] = Some(idx);
        }
        menus.push(menu);
        contract_des.push(des);
    }
    let designation = Designation { contract: contract_des, menu: (0..n1).collect() };
    (ContractualRights { menus }, designation)
}

/// Compare equilibrium play with a target mechanism at every positive-mass
/// profile: outcome labels must coincide and transfers must match within
/// `tol`. A label mismatch is reported as a unit violation.
pub fn outcomes_match(eq: &Equilibrium, target: &DirectMechanism, tol: f64) -> FeasibilityReport {
    let mut rep = FeasibilityReport::new("equilibrium matches target", tol);
    for i in 0..target.space.theta1().len() {
        for j in 0..target.space.theta2().len() {
            if target.space.pmf(i, j) == 0.0 {
                continue;
            }
            let got = eq.induced[i][j];
            let want_outcome = target.outcome[i][j];
            if got.outcome != want_outcome {
                rep.record(1.0, || {
                    format!(
                        "outcome '{}' instead of '{}' at (theta1={:.6}, theta2={:.6})",
                        target.utilities.outcomes()[got.outcome],
                        target.utilities.outcomes()[want_outcome],
                        target.space.theta1()[i],
                        target.space.theta2()[j]
                    )
                });
                continue;
            }
            let dt = (got.t1 - target.t1[i][j]).abs().max((got.t2 - target.t2[i][j]).abs());
            rep.record(dt, || {
                format!(
                    "transfers off by {dt:.3e} at (theta1={:.6}, theta2={:.6})",
                    target.space.theta1()[i],
                    target.space.theta2()[j]
                )
            });
        }
    }
    rep
}

/// Re-encode equilibrium play as a direct mechanism over the same space,
/// e.g. to run the ex-post checkers on induced outcomes.
pub fn equilibrium_as_mechanism(
    eq: &Equilibrium,
    utilities: &UtilityModel,
    space: &FiniteTypeSpace,
) -> DirectMechanism {
    let n1 = space.theta1().len();
    let n2 = space.theta2().len();
    let outcome = (0..n1)
        .map(|i| (0..n2).map(|j| eq.induced[i][j].outcome).collect())
        .collect();
    let t1 = (0..n1)
        .map(|i| (0..n2).map(|j| eq.induced[i][j].t1).collect())
        .collect();
    let t2 = (0..n1)
        .map(|i| (0..n2).map(|j| eq.induced[i][j].t2).collect())
        .collect();
    DirectMechanism::new(space.clone(), utilities.clone(), outcome, t1, t2)
        .expect("equilibrium tables are total by construction")
}
