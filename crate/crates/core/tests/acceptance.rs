//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::DVector;
use trajopt::envs::{
    pendulum_problem, random_lq_problem, two_link_arm_problem, PendulumParams, RandomLqInstance, TwoLinkArmParams,
};
use trajopt::fd::relative_error;
use trajopt::solvers::{accelerated_reg_gn, regularized_ilqr, AccelState, SolverConfig};
use trajopt::steps::{
    ddp_step, gn_step_dual_with, ilqg_step, ilqr_step, tassa_ilqg_step, DdpParams, RolloutSearch,
};
use trajopt::{lq_backward, lq_solve, Command, DerivativeOrder, LqSubproblem, Oracle};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(start: Instant, limit: Duration, detail: String, ok: bool) -> Outcome {
    let elapsed = start.elapsed();
    check(ok && elapsed < limit, format!("{detail}, {:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    let pendulum = pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?;
    let arm = two_link_arm_problem(&TwoLinkArmParams::default()).map_err(|e| e.to_string())?;
    for (problem, scale) in [(&pendulum, 2.0), (&arm, 0.5)] {
        for _ in 0..20 {
            let u = random_command(&mut rng, problem, scale);
            let mut oracle = Oracle::new(problem);
            let tape = oracle.record(&u, DerivativeOrder::First).map_err(|e| e.to_string())?;
            let grad = oracle.objective_gradient(&tape).map_err(|e| e.to_string())?;
            worst = worst.max(relative_error(&grad, &fd_objective_gradient(problem, &u), 1e-8));
        }
    }
    within(start, Duration::from_secs(10), format!("max relative error {worst:.2e}"), worst <= 1e-4)
}

fn lq_dynamic_programming() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut min_eig) = (0.0f64, f64::INFINITY);
    for seed in 0..50u64 {
        let tau = 1 + (seed % 10) as usize;
        let d = 1 + (seed / 3 % 4) as usize;
        let p = 1 + (seed / 7 % 3) as usize;
        let inst = RandomLqInstance::generate(tau, d, p, seed, 1.1).map_err(|e| e.to_string())?;
        let problem = inst.problem().map_err(|e| e.to_string())?;
        let mut oracle = Oracle::new(&problem);
        let tape = oracle.record(&problem.zero_command(), DerivativeOrder::First).map_err(|e| e.to_string())?;
        let sub = LqSubproblem::from_tape(&problem, &tape, f64::INFINITY);
        let (v, _) = lq_solve(&sub).map_err(|e| e.to_string())?;
        worst = worst.max((v - dense_lq_minimizer(&inst)).amax());
        let (_, ctg) = lq_backward(&sub).map_err(|e| e.to_string())?;
        for c in ctg.hessians {
            min_eig = min_eig.min(c.symmetric_eigenvalues().min());
        }
    }
    within(
        start,
        Duration::from_secs(5),
        format!("max deviation {worst:.2e}, min eigenvalue of C_xx {min_eig:.2e}"),
        worst <= 1e-8 && min_eig >= -1e-10,
    )
}

fn closed_form_gauss_newton() -> Outcome {
    let mut rng = rng(103);
    let problems = [
        random_lq_problem(8, 3, 2, 17, 1.0).map_err(|e| e.to_string())?,
        pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?,
    ];
    let mut worst = 0.0f64;
    for problem in &problems {
        let u = random_command(&mut rng, problem, 1.0);
        for gamma in [0.1, 1.0, 10.0] {
            let step = ilqr_step(problem, &u, gamma).map_err(|e| e.to_string())?;
            worst = worst.max((step.direction - dense_gn_step(problem, &u, gamma)).amax());
        }
    }
    check(worst <= 1e-8, format!("max deviation {worst:.2e}"))
}

fn pendulum_config() -> SolverConfig {
    SolverConfig {
        gamma0: 1e3,
        tolerance: 1e-3,
        keep_iterates: true,
        ..Default::default()
    }
}

fn sufficient_decrease() -> Outcome {
    let problem = pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?;
    let (_, record) = regularized_ilqr(&problem, &problem.zero_command(), &pendulum_config()).map_err(|e| e.to_string())?;
    let mut violations = 0;
    for (k, pair) in record.iterates.windows(2).enumerate() {
        let gamma = record.rows[k + 1].gamma.unwrap_or(f64::NAN);
        let step = (pair[1].as_vector() - pair[0].as_vector()).norm_squared();
        if !(record.rows[k + 1].f <= record.rows[k].f - step / (2.0 * gamma)) {
            violations += 1;
        }
    }
    check(
        violations == 0 && record.iterations() > 0,
        format!("{} accepted iterations, {violations} violations", record.iterations()),
    )
}

fn acceleration_rate() -> Outcome {
    let mut worst_ratio = 0.0f64;
    for seed in [5, 6, 7] {
        let inst = RandomLqInstance::generate(10, 3, 2, seed, 1.0).map_err(|e| e.to_string())?;
        let problem = inst.problem().map_err(|e| e.to_string())?;
        let u_star = dense_lq_minimizer(&inst);
        let f_star = problem
            .objective(&Command::from_flat(u_star.clone(), 2).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let u0 = problem.zero_command();
        let config = SolverConfig {
            tolerance: 1e-14,
            max_iterations: 50,
            ..Default::default()
        };
        let (_, record) = accelerated_reg_gn(&problem, &u0, &config).map_err(|e| e.to_string())?;
        let radius = (&u_star - u0.as_vector()).norm_squared();
        for row in &record.rows[1..] {
            let bound = 4.0 / row.delta.unwrap_or(f64::NAN) * radius / (row.k as f64 + 1.0).powi(2);
            worst_ratio = worst_ratio.max((row.f - f_star) / bound);
        }
    }
    let a2 = AccelState::next_alpha(1.0);
    let alpha_err = (a2 - (5f64.sqrt() - 1.0) / 2.0).abs();
    check(
        worst_ratio <= 1.0 && alpha_err <= 1e-12,
        format!("max gap/bound {worst_ratio:.2e}, alpha_2 error {alpha_err:.1e}"),
    )
}

fn dual_step_calls() -> Outcome {
    let problem = pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?;
    let mut rng = rng(106);
    let mut oracle = Oracle::new(&problem);
    let mut most = 0;
    for gamma in [0.1, 1.0, 10.0, f64::INFINITY] {
        let u = random_command(&mut rng, &problem, 1.0);
        let tape = oracle.record(&u, DerivativeOrder::First).map_err(|e| e.to_string())?;
        let report = gn_step_dual_with(&mut oracle, &tape, gamma).map_err(|e| e.to_string())?;
        most = most.max(report.oracle_calls.autodiff_calls());
    }
    check(most <= 5, format!("at most {most} adjoint/tangent calls per step"))
}

fn reductions() -> Outcome {
    let mut rng = rng(107);
    let pendulum = pendulum_problem(&PendulumParams::with_steps(40)).map_err(|e| e.to_string())?;
    let u = random_command(&mut rng, &pendulum, 1.0);
    let mut exact = true;
    for gamma in [0.5, f64::INFINITY] {
        let a = ilqr_step(&pendulum, &u, gamma).map_err(|e| e.to_string())?;
        let b = ilqg_step(&pendulum, &u, gamma).map_err(|e| e.to_string())?;
        exact &= a.direction == b.direction;
    }
    let (mut ddp_gap, mut tassa_gap) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let inst = RandomLqInstance::generate(6, 3, 2, 200 + seed, 1.1).map_err(|e| e.to_string())?;
        let problem = inst.problem().map_err(|e| e.to_string())?;
        let u0 = random_command(&mut rng, &problem, 1.0);
        let ddp = ddp_step(&problem, &u0, &DdpParams::default()).map_err(|e| e.to_string())?;
        ddp_gap = ddp_gap.max((ddp.command.as_vector() - dense_lq_minimizer(&inst)).amax());
        let tassa = tassa_ilqg_step(&problem, &u0, &RolloutSearch::default()).map_err(|e| e.to_string())?;
        let ilqr = ilqr_step(&problem, &u0, f64::INFINITY).map_err(|e| e.to_string())?;
        if tassa.step_size != 1.0 {
            tassa_gap = f64::INFINITY;
        }
        tassa_gap = tassa_gap.max((tassa.command.as_vector() - ilqr.command.as_vector()).amax());
    }
    check(
        exact && ddp_gap <= 1e-8 && tassa_gap <= 1e-10,
        format!("ilqg == ilqr: {exact}, DDP gap {ddp_gap:.2e}, tassa gap {tassa_gap:.2e}"),
    )
}

fn experiments() -> Outcome {
    let start = Instant::now();
    let config = pendulum_config();
    let pendulum = pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?;
    let (u, reg) = regularized_ilqr(&pendulum, &pendulum.zero_command(), &config).map_err(|e| e.to_string())?;
    let theta = pendulum.rollout(&u).map_err(|e| e.to_string())?.last()[0];
    let (_, acc) = accelerated_reg_gn(&pendulum, &pendulum.zero_command(), &config).map_err(|e| e.to_string())?;

    let params = TwoLinkArmParams::default();
    let arm = two_link_arm_problem(&params).map_err(|e| e.to_string())?;
    let (u_arm, arm_rec) = regularized_ilqr(&arm, &arm.zero_command(), &config).map_err(|e| e.to_string())?;
    let x = arm.rollout(&u_arm).map_err(|e| e.to_string())?.last();
    let miss = (DVector::from_row_slice(&[x[0], x[1]]) - DVector::from_row_slice(&params.target)).norm();

    let ok = reg.converged()
        && reg.iterations() <= 500
        && (theta - PI).abs() <= 0.1
        && arm_rec.converged()
        && miss <= 0.1
        && acc.converged()
        && acc.last().oracle_calls <= 2 * reg.last().oracle_calls;
    within(
        start,
        Duration::from_secs(120),
        format!(
            "pendulum: {} iterations, |theta - pi| = {:.3}; arm miss {miss:.2e}; calls acc/reg = {}/{}",
            reg.iterations(),
            (theta - PI).abs(),
            acc.last().oracle_calls,
            reg.last().oracle_calls
        ),
        ok,
    )
}

fn two_adjoint_construction() -> Outcome {
    let mut rng = rng(109);
    let problems = [
        pendulum_problem(&PendulumParams::default()).map_err(|e| e.to_string())?,
        random_lq_problem(10, 4, 3, 31, 1.0).map_err(|e| e.to_string())?,
        two_link_arm_problem(&TwoLinkArmParams::with_steps(100)).map_err(|e| e.to_string())?,
    ];
    let mut worst = 0.0f64;
    for k in 0..100 {
        let problem = &problems[k % problems.len()];
        let u = random_command(&mut rng, problem, 0.5);
        let mut oracle = Oracle::new(problem);
        let tape = oracle.record(&u, DerivativeOrder::First).map_err(|e| e.to_string())?;
        let v = normal_vector(&mut rng, problem.horizon() * problem.control_dim());
        let direct = oracle.tangent_product(&tape, &v).map_err(|e| e.to_string())?;
        worst = worst.max((direct - two_adjoint_tangent(&tape, &v)).amax());
    }
    check(worst <= 1e-10, format!("max deviation {worst:.2e} over 100 pairs"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient oracle vs finite differences", gradient_oracle),
        ("LQ dynamic programming vs dense KKT", lq_dynamic_programming),
        ("closed-form Gauss-Newton equivalence", closed_form_gauss_newton),
        ("sufficient decrease certificate", sufficient_decrease),
        ("acceleration rate", acceleration_rate),
        ("dual step oracle-call bound", dual_step_calls),
        ("reductions", reductions),
        ("experiment reproduction", experiments),
        ("tangent from two adjoint calls", two_adjoint_construction),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
