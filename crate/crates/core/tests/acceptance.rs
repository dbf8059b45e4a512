//! End-to-end acceptance suite: one test per release criterion, each
//! printing a single PASS/FAIL line (visible with `--nocapture`, or in the
//! failure output). Every numeric target is checked against an oracle
//! written independently of the library internals: closed forms, exhaustive
//! grid scans, or brute-force double sums.

use delcon::dist::{check_hazard_dominance, TypeDistribution};
use delcon::efficiency::QuasilinearEnv;
use delcon::game::{canonical_rights_from_scf, outcomes_match, solve_pbe, equilibrium_as_mechanism, Contract, ContractualRights};
use delcon::mech::{BudgetMode, DirectMechanism, FiniteTypeSpace, Player, UtilityModel};
use delcon::partnership::{bid_ask, impossibility_scan, OwnershipValue, PartnershipEnv};
use delcon::procurement::{CostFunction, ProcurementEnv};
use delcon::quad;
use delcon::resale::ResaleEnv;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: usize, label: &str, ok: bool) {
    println!("criterion {n}: {} - {label}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {label}");
}

/// Trapezoid weights for a uniform density on a uniform grid of `n` nodes.
fn trapezoid_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0 / (n - 1) as f64; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

#[test]
fn criterion_1_resale_auction_revenues() {
    let env = ResaleEnv::new(
        TypeDistribution::uniform(2001),
        TypeDistribution::uniform(2001),
    )
    .unwrap();
    let sim_bb = env.simulate(&env.scheme_with_buyback()).revenue;
    let sim_n = env.simulate(&env.scheme_no_buyback()).revenue;

    // direct formula quadrature: psi(x) = 2x - 1 for the uniform law,
    // pi_bb = E[max{0, psi, psi}], pi_n = E[max{psi, psi}] on a 2001^2 grid
    let n = 2001;
    let grid = quad::linspace(0.0, 1.0, n);
    let w = trapezoid_weights(n);
    let (mut formula_bb, mut formula_n) = (0.0, 0.0);
    for i in 0..n {
        let pa = 2.0 * grid[i] - 1.0;
        let (mut row_bb, mut row_n) = (0.0, 0.0);
        for j in 0..n {
            let pb = 2.0 * grid[j] - 1.0;
            row_bb += w[j] * pa.max(pb).max(0.0);
            row_n += w[j] * pa.max(pb);
        }
        formula_bb += w[i] * row_bb;
        formula_n += w[i] * row_n;
    }

    // 2-D brute-force oracle over equilibrium play, from the uniform closed
    // forms only: with buybacks the floor and refund are 1/2, the price map
    // is p = max(theta1, 1/2), the discount is d(p) = p^2/2 - 1/8, and the
    // seller keeps p - d(p) minus the refund r paid when the consumer
    // (theta2 < p) returns the unit through a low intermediary (theta1 < r).
    // Without buybacks the floor is 0, p = theta1 and d(p) = p^2/2.
    let (mut oracle_bb, mut oracle_n) = (0.0, 0.0);
    for i in 0..n {
        let t1 = grid[i];
        let p_bb = t1.max(0.5);
        let up_bb = p_bb - (0.5 * p_bb * p_bb - 0.125);
        let up_n = t1 - 0.5 * t1 * t1;
        let mut returned = 0.0;
        if t1 < 0.5 {
            for j in 0..n {
                if grid[j] < p_bb {
                    returned += w[j];
                }
            }
        }
        oracle_bb += w[i] * (up_bb - 0.5 * returned);
        oracle_n += w[i] * up_n;
    }

    let target_bb = 5.0 / 12.0;
    let target_n = 1.0 / 3.0;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-3;
    let levels = close(sim_bb, target_bb)
        && close(sim_n, target_n)
        && close(sim_bb, formula_bb)
        && close(sim_n, formula_n)
        && close(sim_bb, oracle_bb)
        && close(sim_n, oracle_n);
    // ordering pi_bb/2 <= pi_n <= pi_bb with a 10% relative margin
    let margin = (sim_n - 0.5 * sim_bb).min(sim_bb - sim_n);
    verdict(
        1,
        &format!(
            "resale revenues: sim ({sim_bb:.6}, {sim_n:.6}), formula ({formula_bb:.6}, {formula_n:.6}), oracle ({oracle_bb:.6}, {oracle_n:.6})"
        ),
        levels && margin > 0.1 * sim_bb,
    );
}

#[test]
fn criterion_2_resale_scheme_internals() {
    let env = ResaleEnv::new(
        TypeDistribution::uniform(2001),
        TypeDistribution::uniform(2001),
    )
    .unwrap();
    let s = env.scheme_with_buyback();
    let mut ok = (s.p_floor - 0.5).abs() <= 1e-6 && (s.refund.unwrap() - 0.5).abs() <= 1e-6;
    let mut worst = 0.0f64;
    for (k, (&p, &d)) in s.p_grid.iter().zip(&s.discount).enumerate() {
        worst = worst.max((d - (0.5 * p * p - 0.125)).abs());
        ok &= (d - (0.5 * p * p - 0.125)).abs() <= 1e-6;
        ok &= (-1e-12..=p + 1e-12).contains(&d);
        if k > 0 {
            ok &= d >= s.discount[k - 1] - 1e-12;
        }
    }
    ok &= s.discount[0].abs() <= 1e-9;
    verdict(
        2,
        &format!(
            "buyback scheme internals: p_floor {:.8}, refund {:.8}, max |d - closed form| {worst:.2e}",
            s.p_floor,
            s.refund.unwrap()
        ),
        ok,
    );
}

#[test]
fn criterion_3_procurement_cutoff_and_frontier() {
    let env = ProcurementEnv::new(
        TypeDistribution::uniform(201),
        TypeDistribution::uniform(201),
        1.0,
        CostFunction::quadratic(),
        1.0,
    )
    .unwrap();
    let b_bar = env.crossing_point();
    let mut interval = env.optimal_cutoff();
    let b_hat = interval.b_hat;

    // exhaustive oracle on the cutoff objective, from uniform closed forms:
    // J(b) = 2 - 3b, Q*(b) = (b/2)(1 + ln(2/b)),
    // V(c) = int_0^c J Q* + Q*(c) int_c^1 J, on a 10^4-node grid
    let m = 10_001;
    let bs = quad::linspace(0.0, 1.0, m);
    let q_star = |b: f64| if b <= 0.0 { 0.0 } else { 0.5 * b * (1.0 + (2.0 / b).ln()) };
    let j = |b: f64| 2.0 - 3.0 * b;
    let mut head = vec![0.0; m];
    for k in 1..m {
        let (a, b) = (bs[k - 1], bs[k]);
        head[k] = head[k - 1] + 0.5 * (b - a) * (j(a) * q_star(a) + j(b) * q_star(b));
    }
    let tail = |c: f64| (2.0 - 1.5) - (2.0 * c - 1.5 * c * c);
    let v: Vec<f64> = (0..m).map(|k| head[k] + q_star(bs[k]) * tail(bs[k])).collect();
    let k_best = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(k, _)| k)
        .unwrap();
    let b_hat_oracle = bs[k_best];

    let cutoffs = (b_bar - 2.0 / 3.0).abs() <= 1e-6
        && (b_hat - 1.0 / 3.0).abs() <= 1e-3
        && (b_hat - b_hat_oracle).abs() <= 1e-3;

    // frontier game: separation below the cutoff, pooling above
    let s_grid = quad::linspace(0.0, 1.0, 129);
    let mut b_nodes: Vec<f64> = interval
        .contracts
        .iter()
        .map(|c| c.b)
        .step_by(5)
        .chain(std::iter::once(b_hat))
        .collect();
    b_nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    interval.contracts = b_nodes
        .iter()
        .map(|&b| env.b_optimal_contract_on(b, &s_grid))
        .collect();
    let mut b_types = b_nodes.clone();
    b_types.extend_from_slice(&[0.45, 0.6, 0.75, 0.9, 1.0]);
    b_types.sort_by(|a, b| a.partial_cmp(b).unwrap());
    b_types.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let (rights, um, space) = delcon::procurement::frontier_game(&env, &interval, &b_types).unwrap();
    let eq = solve_pbe(&rights, &um, &space, None);
    let last = rights.menus.len() - 1;
    let mut pattern = true;
    for (i, &b) in b_types.iter().enumerate() {
        let picked = eq.delegate_choice[i];
        if b >= b_hat - 1e-9 {
            pattern &= picked == Some(last);
        } else {
            let own = b_nodes.iter().position(|&bn| (bn - b).abs() < 1e-12);
            pattern &= picked == own;
        }
    }

    // every emitted screening contract is dominant-strategy truthful and
    // ex-post individually rational for the supplier
    let mut truthful = true;
    for ct in &interval.contracts {
        let n = ct.s.len();
        let rent = |i: usize, k: usize| ct.t[k] - ct.s[i] * 0.5 * ct.q[k] * ct.q[k];
        for i in 0..n {
            truthful &= rent(i, i) >= -1e-9;
            for k in 0..n {
                truthful &= rent(i, i) >= rent(i, k) - 1e-9;
            }
        }
    }

    verdict(
        3,
        &format!(
            "procurement: b_bar {b_bar:.8}, b_hat {b_hat:.6} (oracle {b_hat_oracle:.6}), separation/pooling {pattern}, truthful menus {truthful}"
        ),
        cutoffs && pattern && truthful,
    );
}

/// A strictly increasing jittered grid in [0, 1].
fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let base = quad::linspace(0.0, 1.0, n);
    let h = 1.0 / (n - 1) as f64;
    base.iter()
        .enumerate()
        .map(|(k, &x)| {
            if k == 0 || k == n - 1 {
                x
            } else {
                x + rng.gen_range(-0.3 * h..0.3 * h)
            }
        })
        .collect()
}

fn random_utilities(
    rng: &mut ChaCha8Rng,
    g1: &[f64],
    g2: &[f64],
    n_outcomes: usize,
) -> UtilityModel {
    let labels: Vec<String> =
        std::iter::once("o".to_string()).chain((1..n_outcomes).map(|k| format!("x{k}"))).collect();
    let tab1: Vec<Vec<f64>> = (0..n_outcomes)
        .map(|x| g1.iter().map(|_| if x == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect())
        .collect();
    let tab2: Vec<Vec<f64>> = (0..n_outcomes)
        .map(|x| g2.iter().map(|_| if x == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect())
        .collect();
    let (o1, o2) = (g1.to_vec(), g2.to_vec());
    let labels_for = labels.clone();
    let idx = move |labels: &[String], x: &str| labels.iter().position(|l| l == x).unwrap();
    let labels2 = labels.clone();
    UtilityModel::from_fns(
        labels.clone(),
        "o",
        g1,
        g2,
        move |x, t| {
            let xi = idx(&labels_for, x);
            let ti = o1.iter().position(|&v| (v - t).abs() < 1e-12).unwrap();
            tab1[xi][ti]
        },
        move |x, t| {
            let xi = labels2.iter().position(|l| l == x).unwrap();
            let ti = o2.iter().position(|&v| (v - t).abs() < 1e-12).unwrap();
            tab2[xi][ti]
        },
    )
    .unwrap()
}

#[test]
fn criterion_4_implementability_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut disagreements = 0usize;
    let mut passes = 0usize;
    for trial in 0..200 {
        let n1 = rng.gen_range(3..=7);
        let n2 = rng.gen_range(3..=7);
        let g1 = random_grid(&mut rng, n1);
        let g2 = random_grid(&mut rng, n2);
        let mut pmf: Vec<Vec<f64>> = (0..n1)
            .map(|_| (0..n2).map(|_| rng.gen_range(0.1..1.0)).collect())
            .collect();
        let mass: f64 = pmf.iter().flatten().sum();
        pmf.iter_mut().flatten().for_each(|p| *p /= mass);
        let space = FiniteTypeSpace::new(g1.clone(), g2.clone(), pmf).unwrap();
        let n_outcomes = rng.gen_range(2..=4);
        let utilities = random_utilities(&mut rng, &g1, &g2, n_outcomes);

        let m = if trial % 2 == 0 {
            // raw random tables: almost always not implementable
            let outcome: Vec<Vec<usize>> = (0..n1)
                .map(|_| (0..n2).map(|_| rng.gen_range(0..n_outcomes)).collect())
                .collect();
            let t: Vec<Vec<f64>> = (0..n1)
                .map(|_| (0..n2).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect();
            let t2: Vec<Vec<f64>> = (0..n1)
                .map(|_| (0..n2).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect();
            DirectMechanism::new(space, utilities, outcome, t, t2).unwrap()
        } else {
            // equilibrium play of random rights: implementable by construction
            let menus: Vec<Vec<Contract>> = (0..rng.gen_range(2..=4))
                .map(|_| {
                    (0..rng.gen_range(1..=3))
                        .map(|_| Contract {
                            outcome: rng.gen_range(0..n_outcomes),
                            t1: rng.gen_range(-0.5..0.5),
                            t2: rng.gen_range(-0.5..0.5),
                        })
                        .collect()
                })
                .collect();
            let rights = ContractualRights { menus };
            let eq = solve_pbe(&rights, &utilities, &space, None);
            equilibrium_as_mechanism(&eq, &utilities, &space)
        };

        let implementable = m.delegated_implementable().passed;
        let (rights, designation) = canonical_rights_from_scf(&m);
        let eq = solve_pbe(&rights, &m.utilities, &m.space, Some(&designation));
        let reproduced = outcomes_match(&eq, &m, 1e-9).passed;
        if implementable != reproduced {
            disagreements += 1;
        }
        if implementable {
            passes += 1;
        }
    }
    verdict(
        4,
        &format!(
            "round trip on 200 random mechanisms: {passes} implementable, {disagreements} disagreements"
        ),
        disagreements == 0 && passes > 0 && passes < 200,
    );
}

#[test]
fn criterion_5_efficiency_gate() {
    let rival = QuasilinearEnv::rival_good(TypeDistribution::uniform(201), 51).unwrap();
    let gate = rival.feasibility_gate();
    let m = rival.efficient_transfers().unwrap();
    // full insurance against the closed form I_F(theta1) = theta1^2/2
    let mut insured = true;
    for (i, &a) in m.space.theta1().iter().enumerate() {
        for j in 0..m.space.theta2().len() {
            insured &= (m.payoff1(i, j) - 0.5 * a * a).abs() <= 1e-9;
        }
    }
    let six = m.delegated_implementable().passed
        && m.check_budget_balance(BudgetMode::Exact).passed;

    let public = QuasilinearEnv::public_good(TypeDistribution::uniform(201), 51, 1.0).unwrap();
    let pg_gate = public.feasibility_gate();
    // at theta2 = 0 the agent bound is violated by exactly theta1^2/2
    let profile = public.surplus_profile();
    let s0 = profile.capital_s[0];
    let mut pg_pattern = !pg_gate.passed;
    for (i, &a) in profile.grid.iter().enumerate() {
        let violation = (profile.capital_s[i] - s0) - profile.s[i][0];
        pg_pattern &= (violation - 0.5 * a * a).abs() <= 1e-4;
    }
    pg_pattern &= (pg_gate.worst_violation - 0.5).abs() <= 1e-4;

    verdict(
        5,
        &format!(
            "efficiency: rival gate {}, full insurance {insured}, six constraints {six}, public-good failure pattern {pg_pattern}",
            gate.passed
        ),
        gate.passed && insured && six && pg_pattern,
    );
}

#[test]
fn criterion_6_transfer_uniqueness() {
    // Claim under test: subject to the six feasibility constraints and the
    // efficient allocation, the transfer table is unique up to the additive
    // constant S(0), within 1e-8, on 5x5 grids. The brute-force search
    // below looks for a feasible alternative table: shift one row's
    // constant-allocation blocks against each other with a pmf-weighted
    // zero row mean and re-run every constraint check on the result.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut non_unique = 0usize;
    for _ in 0..20 {
        let k = rng.gen_range(1.0..3.0);
        let c = rng.gen_range(0.2..2.0);
        let gs = rng.gen_range(0.0..1.0);
        let env = QuasilinearEnv::new(
            vec!["to_1".into(), "to_2".into()],
            move |x, t: f64| gs * t + if x == 0 { c * t.powf(k) } else { 0.0 },
            move |x, t: f64| gs * t + if x == 1 { c * t.powf(k) } else { 0.0 },
            TypeDistribution::uniform(201),
            5,
            |_| 0.0,
            |_| 0.0,
        )
        .unwrap();
        let m = env.efficient_transfers().unwrap();
        let n = m.space.theta2().len();
        let w: Vec<f64> = (0..n).map(|j| m.space.marginal(Player::Agent, j)).collect();
        let mut found = false;
        for i in 0..m.space.theta1().len() {
            let block_a: Vec<usize> = (0..n).filter(|&j| m.outcome[i][j] == 1).collect();
            let block_b: Vec<usize> = (0..n).filter(|&j| m.outcome[i][j] == 2).collect();
            if block_a.is_empty() || block_b.is_empty() {
                continue;
            }
            let mass_a: f64 = block_a.iter().map(|&j| w[j]).sum();
            let mass_b: f64 = block_b.iter().map(|&j| w[j]).sum();
            let eps = 1e-6;
            let mut alt = m.clone();
            for &j in &block_a {
                alt.t2[i][j] -= eps;
                alt.t1[i][j] += eps;
            }
            for &j in &block_b {
                alt.t2[i][j] += eps * mass_a / mass_b;
                alt.t1[i][j] -= eps * mass_a / mass_b;
            }
            let feasible = alt.delegated_implementable().passed
                && alt.check_budget_balance(BudgetMode::Exact).passed;
            let max_diff = (0..m.space.theta1().len())
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| (alt.t2[a][b] - m.t2[a][b]).abs())
                .fold(0.0f64, f64::max);
            if feasible && max_diff > 1e-8 {
                found = true;
                break;
            }
        }
        if found {
            non_unique += 1;
        }
    }
    verdict(
        6,
        &format!(
            "transfer uniqueness up to a constant: {non_unique}/20 tables admit a feasible alternative beyond 1e-8"
        ),
        non_unique == 0,
    );
}

#[test]
fn criterion_7_partnership() {
    let uniform = PartnershipEnv::new(
        TypeDistribution::uniform(201),
        0.5,
        0.5,
        OwnershipValue::proportional(),
        101,
    )
    .unwrap();
    let sched = bid_ask(&uniform, 101);
    let mut closed_forms = true;
    for (k, &l) in sched.lambda.iter().enumerate() {
        closed_forms &= (sched.bid[k] - (l - 0.5 * l * l)).abs() <= 1e-9;
        closed_forms &= (sched.ask[k] - 0.5 * l * l).abs() <= 1e-9;
    }

    let f = TypeDistribution::uniform(201);
    let scan = impossibility_scan(&f, &quad::linspace(0.0, 1.0, 21));
    let impossible = scan.passed && scan.worst_violation > 0.0;

    let kinked = PartnershipEnv::new(
        f.clone(),
        0.6,
        0.4,
        OwnershipValue::custom("threshold", |q| (2.0 * q - 1.0).max(0.0)),
        101,
    )
    .unwrap();
    let split = kinked.feasibility(2).passed && !kinked.feasibility(1).passed;

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut implication = true;
    let mut done = 0;
    while done < 100 {
        let f = TypeDistribution::power(rng.gen_range(1.0..6.0), 201).unwrap();
        if f.mean() < 0.5 {
            continue;
        }
        let r1 = rng.gen_range(0.5..1.0);
        let c = rng.gen_range(0.5..0.9);
        let p = rng.gen_range(1.0..3.0);
        let v = OwnershipValue::custom("ramp", move |q| ((q - c).max(0.0) / (1.0 - c)).powf(p));
        let env = match PartnershipEnv::new(f, r1, 1.0 - r1, v, 41) {
            Ok(e) => e,
            Err(_) => continue,
        };
        done += 1;
        implication &= !env.feasibility(1).passed || env.feasibility(2).passed;
    }

    verdict(
        7,
        &format!(
            "partnership: bid/ask closed forms {closed_forms}, impossibility scan {impossible} (min violation {:.3e}), asymmetric split verdicts {split}, delegate-2 implication {implication}",
            scan.worst_violation
        ),
        closed_forms && impossible && split && implication,
    );
}

#[test]
fn criterion_8_distribution_layer() {
    let families = vec![
        TypeDistribution::uniform(401),
        TypeDistribution::power(2.0, 401).unwrap(),
        TypeDistribution::power(3.5, 401).unwrap(),
        TypeDistribution::truncated_exponential(2.0, 401).unwrap(),
        TypeDistribution::truncated_exponential(-3.0, 401).unwrap(),
        TypeDistribution::tabulated(&[(0.0, 0.5), (0.4, 1.5), (1.0, 1.0)], 401).unwrap(),
    ];
    let mut roundtrip = true;
    let mut rent_identity = true;
    for f in &families {
        let lo = f.virtual_value(0.1);
        let hi = f.virtual_value(1.0);
        for &y in quad::linspace(lo, hi, 200).iter() {
            let x = f.inverse_virtual_value(y).unwrap();
            roundtrip &= (f.virtual_value(x) - y).abs() <= 1e-8;
        }
        rent_identity &= (f.partial_cdf_integral(1.0) - (1.0 - f.mean())).abs() <= 1e-9;
    }

    // virtual value dominance on random hazard-ordered pairs: the truncated
    // exponential family has hazard increasing in its rate parameter
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dominance = true;
    for _ in 0..20 {
        let lam_f = rng.gen_range(-5.0..4.0);
        let lam_g = lam_f + rng.gen_range(0.5..3.0);
        let f = TypeDistribution::truncated_exponential(lam_f, 401).unwrap();
        let g = TypeDistribution::truncated_exponential(lam_g, 401).unwrap();
        dominance &= check_hazard_dominance(&f, &g).passed;
        for &x in quad::linspace(0.0, 1.0, 101).iter() {
            dominance &= f.virtual_value(x) <= g.virtual_value(x) + 1e-9;
        }
    }
    verdict(
        8,
        &format!(
            "distribution layer: psi roundtrip {roundtrip}, I_F(1) = 1 - mean {rent_identity}, hazard-ordered psi dominance {dominance}"
        ),
        roundtrip && rent_identity && dominance,
    );
}
