#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Criteria run through the CLI library
//! where a subcommand covers them, so the configuration path is exercised
//! too.

use std::path::Path;
use std::time::{Duration, Instant};

use ergodic_cli::catalog::{random_instance, random_profile};
use ergodic_cli::config::LoadedConfig;
use ergodic_cli::{execute_config, read_table, Options, Sub};
use ergodic_core::analytic::{be0_certificate, be0_subsolution_eval, mg_upper_bound, TestFunction};
use ergodic_core::discretize::{assemble_ergodic, godunov_hamiltonian, BoundaryCondition, DiscreteOperator, Mesh};
use ergodic_core::eigen::{lambda_via_direct, EigenSettings};
use ergodic_core::{Exponent, Potential, ProblemSpec, Profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    fn floats(&self, name: &str) -> Vec<f64> {
        let c = self.col(name);
        self.rows
            .iter()
            .map(|r| r[c].parse().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Runs `toml` through the CLI into `dir` and reads back the CSV.
fn run(dir: &Path, sub: Sub, toml: &str) -> Result<Table, String> {
    let cfg = LoadedConfig::parse(toml, "acceptance").map_err(|e| e.to_string())?;
    let opts = Options {
        out: Some(dir.to_path_buf()),
        ..Options::default()
    };
    let outcome = execute_config(sub, &cfg, &opts).map_err(|e| e.to_string())?;
    let (header, rows) = read_table(&outcome.csv).map_err(|e| e.to_string())?;
    Ok(Table { header, rows })
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(v: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    let on_time = elapsed <= budget;
    Verdict {
        passed: v.passed && on_time,
        detail: format!(
            "{}; {:.1}s of {}s{}",
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if on_time { "" } else { " (over budget)" }
        ),
    }
}

/// Bisected `beta_+` for `m = inf` on the line.
fn threshold(dir: &Path, name: &str, expected: f64) -> Result<Verdict, String> {
    let t = run(
        dir,
        Sub::BetaBisect,
        &format!(
            "run_id = \"c1_{name}\"\nm = \"inf\"\nR = 60.0\nn_cells = 4096\n\
             [potential]\nname = \"{name}\"\n[beta_bisect]\nside = \"plus\"\n"
        ),
    )?;
    let b = t.floats("beta_plus")[0];
    Ok(verdict(
        (b - expected).abs() <= 0.05,
        format!("{name}: beta_+ = {b:.5} (oracle {expected})"),
    ))
}

fn criterion_1(dir: &Path) -> Result<Verdict, String> {
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, expected) in [("bump", 2.0), ("exponential", 1.0)] {
        let start = Instant::now();
        let v = within_budget(threshold(dir, name, expected)?, start.elapsed(), Duration::from_secs(120));
        passed &= v.passed;
        parts.push(v.detail);
    }
    Ok(verdict(passed, parts.join(" | ")))
}

fn criterion_2(dir: &Path) -> Result<Verdict, String> {
    let mut worst = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    for m in [3, 6] {
        for n in [8192, 16384] {
            let t = run(
                dir,
                Sub::BetaSweep,
                &format!(
                    "run_id = \"c2_m{m}_n{n}\"\nm = {m}\nR = 120.0\nn_cells = {n}\n\
                     [potential]\nname = \"bump\"\n[beta_sweep]\nbetas = [0.5, 1.0, 5.0]\n"
                ),
            )?;
            for (beta, lambda) in t.floats("beta").into_iter().zip(t.floats("lambda")) {
                worst = worst.max(lambda);
                if !(lambda < -1e-4) {
                    failures.push(format!("m={m} n={n} beta={beta}: lambda={lambda:.3e}"));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("largest lambda {worst:.3e} < -1e-4 on both grids")
    } else {
        format!("not below -1e-4: {}", failures.join(", "))
    };
    Ok(verdict(failures.is_empty(), detail))
}

fn criterion_3(dir: &Path) -> Result<Verdict, String> {
    let beta0 = be0_certificate(3, Exponent::finite(3.0).map_err(|e| e.to_string())?, 1.0)
        .map_err(|e| e.to_string())?
        .beta0;
    let a = run(
        dir,
        Sub::Be0Floor,
        "run_id = \"c3_n3\"\nN = 3\nR = 300.0\nn_cells = 8192\n[be0_floor]\nm_list = [3]\nc0 = 1.0\n",
    )?;
    let b = run(
        dir,
        Sub::Be0Floor,
        "run_id = \"c3_n2\"\nN = 2\nR = 300.0\nn_cells = 8192\n[be0_floor]\nm_list = [\"inf\"]\nc0 = 1.0\n",
    )?;
    let (la, ba) = (a.floats("lambda")[0], a.floats("beta")[0]);
    let (lb, bb) = (b.floats("lambda")[0], b.floats("beta")[0]);
    let passed = (ba - 1.224745).abs() <= 1e-6
        && (beta0 - ba).abs() == 0.0
        && la.abs() <= 1e-3
        && (bb - 0.5).abs() <= 1e-15
        && lb.abs() <= 1e-3;
    Ok(verdict(
        passed,
        format!("N=3 m=3: lambda({ba:.6}) = {la:.3e}; N=2 m=inf: lambda({bb}) = {lb:.3e}"),
    ))
}

fn criterion_4(dir: &Path) -> Result<Verdict, String> {
    let t = run(
        dir,
        Sub::MSweep,
        "run_id = \"c4\"\nbeta = 4.0\nR = 60.0\nn_cells = 4096\n[potential]\nname = \"bump\"\n\
         [m_sweep]\nm_list = [4, 8, 16, 32, 64]\ninclude_infinity = true\n",
    )?;
    let ms = t.floats("m");
    let gaps: Vec<f64> = t
        .floats("gap")
        .into_iter()
        .zip(&ms)
        .filter(|(_, m)| [4.0, 8.0, 16.0, 32.0, 64.0].contains(*m))
        .map(|(g, _)| g)
        .collect();
    let lambdas = t.floats("lambda");
    let lambda_inf = lambdas[ms.iter().position(|m| m.is_infinite()).ok_or("no m = inf row")?];
    let bound_ok = ms
        .iter()
        .zip(&lambdas)
        .filter(|(m, _)| [4.0, 8.0, 16.0, 32.0, 64.0].contains(*m))
        .all(|(m, l)| *l >= lambda_inf - 1.0 / m - 1e-3);
    let (first, last) = (gaps[0], gaps[gaps.len() - 1]);
    let passed = gaps.len() == 5 && last < first && last <= 1e-2 && bound_ok;
    Ok(verdict(
        passed,
        format!(
            "gaps {:?}; first {first:.3e} -> last {last:.3e} (needs <= 1e-2); lower bound {}",
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>(),
            if bound_ok { "holds" } else { "violated" }
        ),
    ))
}

fn lambda(mesh: &Mesh, spec: &ProblemSpec) -> Result<f64, String> {
    lambda_via_direct(mesh, spec, &EigenSettings::default())
        .map(|e| e.lambda)
        .map_err(|e| e.to_string())
}

fn criterion_5() -> Result<Verdict, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let mut failures = Vec::new();
    let eps = 0.1;
    for trial in 0..20 {
        let inst = random_instance(&mut rng);
        let (spec, mesh) = (&inst.spec, &inst.mesh);
        let radial = mesh.geometry() == ergodic_core::Geometry::Radial;
        let base = lambda(mesh, spec)?;
        if base > 1e-6 {
            failures.push(format!("#{trial} sign: {base:.3e}"));
        }

        // f -> f + (eps / beta) phi changes the forcing by eps phi.
        let phi = Potential::new(random_profile(&mut rng, radial));
        let sup = mesh.nodes().iter().map(|x| phi.eval(*x).abs()).fold(0.0, f64::max);
        let perturbed = spec.with_potential(spec.potential.plus(&phi.scaled(eps / spec.beta)));
        let lp = lambda(mesh, &perturbed)?;
        if (lp - base).abs() > eps * sup + 1e-8 {
            failures.push(format!("#{trial} stability: {base:.6e} -> {lp:.6e}"));
        }

        let mid = spec.with_potential(spec.potential.mix(&perturbed.potential, 0.5));
        let lm = lambda(mesh, &mid)?;
        if lm < 0.5 * (base + lp) - 1e-8 {
            failures.push(format!("#{trial} concavity: {lm:.6e} < {:.6e}", 0.5 * (base + lp)));
        }

        let c = rng.gen_range(-0.5..0.5);
        let ls = lambda(mesh, &spec.with_shift(c))?;
        if (ls - (base + c)).abs() > 1e-6 {
            failures.push(format!("#{trial} shift {c:.3}: {ls:.6e} vs {:.6e}", base + c));
        }

        let forcing = spec.potential.scaled(spec.beta);
        for delta in [0.01, 0.1] {
            for eps_mg in [0.01, 0.1] {
                let ub = mg_upper_bound(&forcing, &TestFunction::default(), delta, eps_mg, &spec.exponent, spec.dim)
                    .map_err(|e| e.to_string())?;
                if base > ub {
                    failures.push(format!("#{trial} mg bound: {base:.3e} > {ub:.3e}"));
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        "20 instances: sign, stability, concavity, shift and test-function bound hold".to_string()
    } else {
        failures.join(", ")
    };
    Ok(verdict(failures.is_empty(), detail))
}

fn criterion_6(dir: &Path) -> Result<Verdict, String> {
    let t = run(dir, Sub::VerifyAnalytic, "run_id = \"c6\"\n")?;
    let c = t.col("passed");
    let failed: Vec<String> = t
        .rows
        .iter()
        .filter(|r| r[c] != "true")
        .map(|r| format!("{} {}", r[t.col("check")], r[t.col("case")]))
        .collect();
    Ok(verdict(
        failed.is_empty(),
        format!("{} checks, {} failed {:?}", t.rows.len(), failed.len(), failed),
    ))
}

fn consistency_orders(
    ops: impl Fn(usize) -> DiscreteOperator,
    sizes: &[usize],
    u: impl Fn(f64) -> f64,
    exact: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let errors: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let op = ops(n);
            let mesh = op.mesh();
            let v: Vec<f64> = mesh.nodes().iter().map(|&x| u(x)).collect();
            let r = op.residual(&v, 0.0);
            mesh.nodes()
                .iter()
                .zip(&r)
                .filter(|(x, _)| x.abs() <= 0.5 * mesh.radius())
                .map(|(&x, r)| (r - exact(x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn criterion_7() -> Result<Verdict, String> {
    let gauss = Potential::new(Profile::Gaussian {
        amplitude: -1.0,
        center: 0.0,
        width: 1.0,
    });
    let bc = BoundaryCondition::default();
    let e3 = Exponent::finite(3.0).map_err(|e| e.to_string())?;

    let line = ProblemSpec::line(e3, 1.5, gauss.clone());
    let o1 = consistency_orders(
        |n| assemble_ergodic(&Mesh::line(8.0, n).expect("mesh"), &line, bc).expect("operator"),
        &[64, 128, 256, 512],
        |x| (1.0 + x * x).sqrt() - 1.0,
        |x| {
            let du = x / (1.0 + x * x).sqrt();
            -(1.0 + x * x).powf(-1.5) + du.abs().powi(3) / 3.0 - 1.5 * gauss.eval(x)
        },
    );

    let constrained = ProblemSpec::line(Exponent::infinite(), 2.0, gauss.clone());
    let o2 = consistency_orders(
        |n| assemble_ergodic(&Mesh::line(8.0, n).expect("mesh"), &constrained, bc).expect("operator"),
        &[64, 128, 256, 512],
        |x| 0.375 * x * x,
        |x| (-0.75 - 2.0 * gauss.eval(x)).max(0.75 * x.abs() - 1.0),
    );

    let cert = be0_certificate(3, e3, 1.0).map_err(|e| e.to_string())?;
    let f = Potential::algebraic(-1.0, e3.m_star());
    let radial = ProblemSpec::radial(3, e3, cert.beta0, f.clone()).map_err(|e| e.to_string())?;
    let o3 = consistency_orders(
        |n| assemble_ergodic(&Mesh::radial(3, 8.0, n).expect("mesh"), &radial, bc).expect("operator"),
        &[32, 64, 128, 256],
        |r| be0_subsolution_eval(&cert, &[r]).u,
        |r| {
            let s = be0_subsolution_eval(&cert, &[r]);
            -s.laplacian + s.du[0].abs().powi(3) / 3.0 - cert.beta0 * f.eval(r)
        },
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut violations = 0;
    for _ in 0..100_000 {
        let e = Exponent::finite(2.0 + 10f64.powf(rng.gen_range(-3.0..2.3))).map_err(|e| e.to_string())?;
        let pm = rng.gen_range(-3.0..3.0);
        let pp = rng.gen_range(-3.0..3.0);
        let dp: f64 = rng.gen_range(0.0..0.5);
        let h = godunov_hamiltonian(&e, pm, pp);
        let monotone = godunov_hamiltonian(&e, pm + dp, pp) >= h && godunov_hamiltonian(&e, pm, pp + dp) <= h;
        let consistent = (godunov_hamiltonian(&e, pm, pm) - e.hamiltonian(pm)).abs()
            <= 1e-12 * e.hamiltonian(pm).max(1.0);
        if !(monotone && consistent && h >= 0.0) {
            violations += 1;
        }
    }
    let min_order = o1.iter().chain(&o2).chain(&o3).copied().fold(f64::INFINITY, f64::min);
    Ok(verdict(
        min_order >= 0.9 && violations == 0,
        format!("smallest observed order {min_order:.3}; {violations} flux violations in 1e5 triples"),
    ))
}

fn criterion_8(dir: &Path) -> Result<Verdict, String> {
    let configs = [
        (Sub::Solve, "m = \"inf\"\nbeta = 3.0\nmethod = \"cross\"\nR = 60.0\nn_cells = 4096\n"),
        (Sub::MSweep, "beta = 4.0\nR = 30.0\nn_cells = 1024\n[m_sweep]\nm_list = [4, 8, 16]\n"),
        (Sub::BetaSweep, "m = 4\nR = 30.0\nn_cells = 1024\n[beta_sweep]\nbetas = [-1.0, 0.5, 2.0, 3.0]\n"),
    ];
    let mut differing = Vec::new();
    for (i, (sub, body)) in configs.iter().enumerate() {
        let toml = format!("run_id = \"c8_{i}\"\n{body}");
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let sub_dir = dir.join(format!("rep{rep}"));
            run(&sub_dir, *sub, &toml)?;
            bytes.push(std::fs::read(sub_dir.join(format!("c8_{i}.csv"))).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            differing.push(format!("{sub:?}"));
        }
    }
    Ok(verdict(
        differing.is_empty(),
        if differing.is_empty() {
            "solve, m-sweep and beta-sweep CSVs byte-identical across reruns".to_string()
        } else {
            format!("differing: {differing:?}")
        },
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let dir = tmp.path();
    type Criterion<'a> = (&'a str, u64, Box<dyn Fn() -> Result<Verdict, String> + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 exact threshold oracle", 240, Box::new(|| criterion_1(dir))),
        ("2 one-dimensional degeneracy", 60, Box::new(|| criterion_2(dir))),
        ("3 multi-dimensional floor", 120, Box::new(|| criterion_3(dir))),
        ("4 convergence in m", 300, Box::new(|| criterion_4(dir))),
        ("5 structural invariants", 300, Box::new(criterion_5)),
        ("6 analytic oracle suite", 30, Box::new(|| criterion_6(dir))),
        ("7 scheme consistency", 30, Box::new(criterion_7)),
        ("8 determinism", u64::MAX, Box::new(|| criterion_8(dir))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let v = match check() {
            Ok(v) => v,
            Err(e) => verdict(false, format!("error: {e}")),
        };
        let v = if *budget == u64::MAX {
            v
        } else {
            within_budget(v, start.elapsed(), Duration::from_secs(*budget))
        };
        println!("{} criterion {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
