//! Scenario runners: each takes a parsed config, writes CSV artifacts and a
//! summary into the output directory, and reports gate failures distinctly
//! from input errors.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use delcon::dist::TypeDistribution;
use delcon::efficiency::QuasilinearEnv;
use delcon::mech::{DirectMechanism, UtilityModel};
use delcon::partnership::{bid_ask, whom_to_delegate, OwnershipValue, PartnershipEnv};
use delcon::procurement::{CostFunction, ProcurementEnv};
use delcon::quad;
use delcon::resale::ResaleEnv;

use crate::config::{parse_dist, sig, Config};

/// Input problems exit with 1, feasibility-gate failures with 2.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Gate(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Gate(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Gate(m) => m,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Input(e.to_string())
}

fn write_file(out: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(input)?;
    fs::write(out.join(name), text).map_err(input)
}

pub fn run(cfg: &Config, out: &Path) -> Result<(), Failure> {
    match cfg.require("kind").map_err(Failure::Input)? {
        "procurement" => run_procurement(cfg, out),
        "resale" => run_resale(cfg, out),
        "efficiency" => run_efficiency(cfg, out),
        "partnership" => run_partnership(cfg, out),
        other => Err(Failure::Input(format!(
            "key 'kind': unknown scenario '{other}' (expected procurement, resale, efficiency, partnership)"
        ))),
    }
}

fn dist_key(cfg: &Config, key: &str, default: &str, res: usize) -> Result<TypeDistribution, Failure> {
    parse_dist(cfg.get(key).unwrap_or(default), res)
        .map_err(|e| Failure::Input(format!("key '{key}': {e}")))
}

fn run_procurement(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let res = cfg.get_usize("numerics.grid_resolution", 201).map_err(Failure::Input)?;
    let benefit = dist_key(cfg, "procurement.benefit", "uniform", res)?;
    let cost_type = dist_key(cfg, "procurement.cost_type", "uniform", res)?;
    let alpha = cfg.get_f64("procurement.alpha", 1.0).map_err(Failure::Input)?;
    let q_max = cfg.get_f64("procurement.q_max", 1.0).map_err(Failure::Input)?;
    let cost = match cfg.get("procurement.cost").unwrap_or("quadratic") {
        "quadratic" => CostFunction::quadratic(),
        spec => match spec.split_once(':') {
            Some(("power", p)) => {
                let p: f64 = p
                    .parse()
                    .map_err(|e| Failure::Input(format!("key 'procurement.cost': bad exponent ({e})")))?;
                CostFunction::power(p).map_err(input)?
            }
            _ => {
                return Err(Failure::Input(format!(
                    "key 'procurement.cost': unknown cost '{spec}' (expected quadratic or power:P)"
                )))
            }
        },
    };
    let env = ProcurementEnv::new(benefit, cost_type, alpha, cost, q_max).map_err(input)?;
    let b_bar = env.crossing_point();
    let interval = env.optimal_cutoff();

    let n_b = cfg.get_usize("numerics.b_grid", 101).map_err(Failure::Input)?;
    let mut csv = String::from("b,expected_quantity,delegate_value,pooling_integrand,chosen_b\n");
    for &b in quad::linspace(0.0, 1.0, n_b).iter() {
        let eff = b.min(interval.b_hat);
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            sig(b),
            sig(env.expected_quantity(eff)),
            sig(env.delegate_value(eff)),
            sig(env.pooling_integrand(b)),
            sig(eff)
        );
    }
    write_file(out, "procurement.csv", &csv)?;

    let mut menus = String::from("b,s,q,t\n");
    for ct in &interval.contracts {
        for k in 0..ct.s.len() {
            let _ = writeln!(menus, "{},{},{},{}", sig(ct.b), sig(ct.s[k]), sig(ct.q[k]), sig(ct.t[k]));
        }
    }
    write_file(out, "menus.csv", &menus)?;

    let summary = format!(
        "kind = procurement\nb_bar = {}\nb_hat = {}\nprincipal_value = {}\nfoc_satisfied = {}\ndegenerate = {}\n",
        sig(b_bar),
        sig(interval.b_hat),
        sig(interval.principal_value),
        interval.foc_satisfied,
        interval.degenerate
    );
    write_file(out, "summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn run_resale(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let res = cfg.get_usize("numerics.grid_resolution", 201).map_err(Failure::Input)?;
    let g = dist_key(cfg, "resale.g", "uniform", res)?;
    let f = dist_key(cfg, "resale.f", "uniform", res)?;
    let env = ResaleEnv::new(g, f).map_err(input)?;

    let mut summary = String::from("kind = resale\n");
    for (name, scheme) in [
        ("buyback", env.scheme_with_buyback()),
        ("no_buyback", env.scheme_no_buyback()),
    ] {
        let sim = env.simulate(&scheme);
        let mut csv = String::from("theta1,price,sale_prob,profit\n");
        for row in &sim.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                sig(row.theta1),
                sig(row.price),
                sig(row.sale_prob),
                sig(row.profit)
            );
        }
        write_file(out, &format!("resale_{name}.csv"), &csv)?;
        let _ = writeln!(summary, "{name}.p_floor = {}", sig(scheme.p_floor));
        if let Some(r) = scheme.refund {
            let _ = writeln!(summary, "{name}.refund = {}", sig(r));
        }
        let _ = writeln!(summary, "{name}.revenue = {}", sig(sim.revenue));
    }
    let _ = writeln!(summary, "auction_revenue_buyback = {}", sig(env.revenue_with_buyback()));
    let _ = writeln!(summary, "auction_revenue_no_buyback = {}", sig(env.revenue_no_buyback()));
    let (p_lf, rev_lf) = env.laissez_faire().map_err(input)?;
    let _ = writeln!(summary, "laissez_faire.price = {}", sig(p_lf));
    let _ = writeln!(summary, "laissez_faire.revenue = {}", sig(rev_lf));
    write_file(out, "summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}

fn run_efficiency(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let res = cfg.get_usize("numerics.grid_resolution", 201).map_err(Failure::Input)?;
    let grid_n = cfg.get_usize("efficiency.grid_n", 41).map_err(Failure::Input)?;
    let dist = dist_key(cfg, "efficiency.dist", "uniform", res)?;
    let env = match cfg.get("efficiency.env").unwrap_or("rival") {
        "rival" => QuasilinearEnv::rival_good(dist, grid_n).map_err(input)?,
        "public" => {
            let cost = cfg.get_f64("efficiency.cost", 1.0).map_err(Failure::Input)?;
            QuasilinearEnv::public_good(dist, grid_n, cost).map_err(input)?
        }
        other => {
            return Err(Failure::Input(format!(
                "key 'efficiency.env': unknown environment '{other}' (expected rival or public)"
            )))
        }
    };
    let gate = env.feasibility_gate();
    write_file(out, "report.txt", &gate.render())?;
    let mechanism = env.efficient_transfers().map_err(input)?;
    write_file(out, "transfers.csv", &mechanism.to_csv())?;
    let summary = format!(
        "kind = efficiency\ngate_passed = {}\nworst_violation = {}\n",
        gate.passed,
        sig(gate.worst_violation)
    );
    write_file(out, "summary.txt", &summary)?;
    print!("{summary}");
    if gate.passed {
        Ok(())
    } else {
        Err(Failure::Gate(format!(
            "feasibility gate failed (worst violation {:.3e}); see report.txt",
            gate.worst_violation
        )))
    }
}

fn run_partnership(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let res = cfg.get_usize("numerics.grid_resolution", 201).map_err(Failure::Input)?;
    let grid_n = cfg.get_usize("partnership.grid_n", 101).map_err(Failure::Input)?;
    let f = dist_key(cfg, "partnership.f", "uniform", res)?;
    let r1 = cfg.get_f64("partnership.r1", 0.5).map_err(Failure::Input)?;
    let v = match cfg.get("partnership.v").unwrap_or("proportional") {
        "proportional" => OwnershipValue::proportional(),
        spec => match spec.split_once(':') {
            Some(("ramp", rest)) => {
                let (c, m) = rest
                    .split_once(':')
                    .ok_or_else(|| Failure::Input("key 'partnership.v': ramp needs C:M".into()))?;
                let c: f64 = c
                    .parse()
                    .map_err(|e| Failure::Input(format!("key 'partnership.v': bad cutoff ({e})")))?;
                let m: f64 = m
                    .parse()
                    .map_err(|e| Failure::Input(format!("key 'partnership.v': bad power ({e})")))?;
                if !(0.0..1.0).contains(&c) || m < 1.0 {
                    return Err(Failure::Input(
                        "key 'partnership.v': ramp needs 0 <= C < 1 and M >= 1".into(),
                    ));
                }
                OwnershipValue::custom("ramp", move |q| ((q - c).max(0.0) / (1.0 - c)).powf(m))
            }
            _ => {
                return Err(Failure::Input(format!(
                    "key 'partnership.v': unknown value function '{spec}' (expected proportional or ramp:C:M)"
                )))
            }
        },
    };
    let env = PartnershipEnv::new(f, r1, 1.0 - r1, v, grid_n).map_err(input)?;

    let sched = bid_ask(&env, grid_n);
    let mut csv = String::from("lambda,bid,ask\n");
    for k in 0..sched.lambda.len() {
        let _ = writeln!(csv, "{},{},{}", sig(sched.lambda[k]), sig(sched.bid[k]), sig(sched.ask[k]));
    }
    write_file(out, "bid_ask.csv", &csv)?;

    let advice = whom_to_delegate(&env);
    let mut report = advice.delegate1.render();
    report.push_str(&advice.delegate2.render());
    write_file(out, "report.txt", &report)?;

    let recommended = match advice.recommended {
        Some(p) => p.to_string(),
        None => "none".into(),
    };
    let mut summary = format!(
        "kind = partnership\nrecommended_delegate = {recommended}\nfeasible_delegate_1 = {}\nfeasible_delegate_2 = {}\n",
        advice.delegate1.passed, advice.delegate2.passed
    );
    if let Some(note) = &advice.advisory {
        let _ = writeln!(summary, "advisory = {note}");
    }
    write_file(out, "summary.txt", &summary)?;
    print!("{summary}");
    if advice.recommended.is_some() {
        Ok(())
    } else {
        Err(Failure::Gate(
            "no delegate assignment clears the dissolution bounds; see report.txt".into(),
        ))
    }
}

/// Check the six delegated-implementability constraints of a mechanism CSV
/// against a utilities CSV (rows `outcome,player,theta,u`, outside option
/// named `o`).
pub fn verify(mech_path: &str, util_path: &str, tol: f64) -> Result<(), Failure> {
    let mech_text = fs::read_to_string(mech_path)
        .map_err(|e| Failure::Input(format!("mechanism file '{mech_path}': {e}")))?;
    let util_text = fs::read_to_string(util_path)
        .map_err(|e| Failure::Input(format!("utilities file '{util_path}': {e}")))?;

    // the utilities table needs both grids, which only the mechanism rows know
    let mut theta1: Vec<f64> = Vec::new();
    let mut theta2: Vec<f64> = Vec::new();
    for (k, line) in mech_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 6 {
            return Err(Failure::Input(format!("mechanism row {}: need 6 columns", k + 1)));
        }
        for (cell, grid) in [(cells[0], &mut theta1), (cells[1], &mut theta2)] {
            let t: f64 = cell
                .parse()
                .map_err(|e| Failure::Input(format!("mechanism row {}: bad theta ({e})", k + 1)))?;
            if !grid.iter().any(|&g| (g - t).abs() < 1e-12) {
                grid.push(t);
            }
        }
    }
    theta1.sort_by(|a, b| a.partial_cmp(b).unwrap());
    theta2.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let utilities = UtilityModel::from_csv(&util_text, "o", &theta1, &theta2).map_err(input)?;
    let mechanism = DirectMechanism::from_csv(&mech_text, utilities).map_err(input)?;
    let report = mechanism.delegated_implementable_tol(tol);
    print!("{}", report.render());
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Gate(format!(
            "mechanism is not implementable through delegation (worst violation {:.3e})",
            report.worst_violation
        )))
    }
}
