use crp_core::asymptotics::{approx_clt_zone, approx_crp_pmf, approx_renewal};
use crp_core::deviation::clt_local;
use crp_core::oracle::{
    crp_pmf_from_table, jump_power, renewal_measure_exact, simulate, SamplingMode,
};
use crp_core::second_deviation::{domain, rate_point};
use crp_core::{Condition, CrpError, CrpModel};

use crate::output::{Cell, CsvOut};
use crate::{Cli, CliError, Command};

const DEFAULT_PATHS: u64 = 100_000;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let model = load_model(cli)?;
    match cli.command {
        Command::Validate => validate(cli, &model),
        Command::Rate => rate(cli, &model),
        Command::Pmf => pmf(cli, &model),
        Command::Exact => exact(cli, &model),
        Command::Compare => compare(cli, &model),
        Command::Renewal => renewal(cli, &model),
        Command::Clt => clt(cli, &model),
        Command::Simulate => simulate_cmd(cli, &model),
        Command::Domain => domain_cmd(cli, &model),
    }
}

fn load_model(cli: &Cli) -> Result<CrpModel, CliError> {
    let path = cli
        .model
        .as_deref()
        .ok_or_else(|| CliError::Input("--model is required".into()))?;
    let model = CrpModel::from_path(path)?.allow_degenerate(cli.unsafe_mode);
    if cli.command != Command::Validate {
        model.ensure_arithmetic()?;
    }
    Ok(model)
}

fn open(cli: &Cli, header: &[&str]) -> Result<CsvOut, CliError> {
    CsvOut::open(cli.out.as_deref(), header)
}

/// Writes only once every row is computed, so a failed run emits no CSV.
fn write_rows(cli: &Cli, header: &[&str], rows: Vec<Vec<Cell>>) -> Result<(), CliError> {
    let mut out = open(cli, header)?;
    for row in rows {
        out.row(row)?;
    }
    out.finish()
}

fn n_values(cli: &Cli) -> Result<Vec<u64>, CliError> {
    let ns = match (&cli.n_list, cli.n) {
        (Some(_), Some(_)) => {
            return Err(CliError::Input(
                "give either --n or --n-list, not both".into(),
            ))
        }
        (Some(list), None) => list.clone(),
        (None, Some(n)) => vec![n],
        (None, None) => return Err(CliError::Input("--n or --n-list is required".into())),
    };
    if ns.is_empty() || ns[0] == 0 {
        return Err(CliError::Input("--n values must be positive".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Input(
            "--n-list must be strictly increasing".into(),
        ));
    }
    Ok(ns)
}

/// `--x` if given, else the lattice point nearest `alpha n`.
fn target_x(cli: &Cli, n: u64) -> Result<i64, CliError> {
    match (cli.x, cli.alpha) {
        (Some(x), None) => Ok(x),
        (None, Some(alpha)) => Ok((alpha * n as f64).round() as i64),
        (Some(_), Some(_)) => Err(CliError::Input(
            "give either --x or --alpha, not both".into(),
        )),
        (None, None) => Err(CliError::Input("--x or --alpha is required".into())),
    }
}

fn alpha_grid(cli: &Cli) -> Result<Vec<f64>, CliError> {
    match (cli.alpha, cli.alpha_min, cli.alpha_max, cli.alpha_steps) {
        (Some(a), None, None, None) => Ok(vec![a]),
        (None, Some(lo), Some(hi), Some(steps)) => {
            if steps < 2 {
                return Err(CliError::Input("--alpha-steps must be at least 2".into()));
            }
            if !(lo < hi) {
                return Err(CliError::Input(
                    "--alpha-min must be below --alpha-max".into(),
                ));
            }
            Ok((0..steps)
                .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                .collect())
        }
        _ => Err(CliError::Input(
            "give --alpha, or all of --alpha-min, --alpha-max and --alpha-steps".into(),
        )),
    }
}

fn validate(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let step = model.step();
    let report = step.validate_arithmetic();
    let m = step.moments();
    let mut out = open(
        cli,
        &[
            "arithmetic_ok",
            "lattice_a",
            "lattice_b",
            "lattice_d",
            "cramer_ok",
            "lambda_plus",
            "a_tau",
            "a_zeta",
            "a",
            "sigma2",
            "degenerate",
            "homogeneous",
        ],
    )?;
    let [[la, lb], [_, ld]] = report.lattice_basis;
    out.row(vec![
        report.arithmetic_ok.into(),
        la.into(),
        lb.into(),
        ld.into(),
        report.cramer_ok.into(),
        report.lambda_plus.into(),
        m.a_tau.into(),
        m.a_zeta.into(),
        m.a.into(),
        m.sigma2.into(),
        m.degenerate.into(),
        model.is_homogeneous().into(),
    ])?;
    out.finish()?;
    for msg in &report.messages {
        eprintln!("crp: {msg}");
    }
    if !report.arithmetic_ok && !cli.unsafe_mode {
        return Err(CrpError::ConditionViolated {
            condition: Condition::Arithmetic,
            detail: format!("step lattice basis {:?}", report.lattice_basis),
        }
        .into());
    }
    Ok(())
}

fn rate(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let alphas = alpha_grid(cli)?;
    let mut rows = Vec::new();
    for alpha in alphas {
        let rp = rate_point(model.step(), alpha)?;
        rows.push(vec![
            alpha.into(),
            rp.mu_alpha.into(),
            rp.lambda_alpha.into(),
            rp.d.into(),
            rp.d1.into(),
            rp.d2.into(),
        ]);
    }
    write_rows(cli, &["alpha", "mu", "lambda", "D", "D1", "D2"], rows)
}

fn pmf(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for n in n_values(cli)? {
        let x = target_x(cli, n)?;
        let est = approx_crp_pmf(model, n, x)?;
        let central = approx_clt_zone(model, n, x).ok();
        rows.push(vec![
            n.into(),
            x.into(),
            (x as f64 / n as f64).into(),
            est.value.into(),
            est.log_value.into(),
            est.psi1_factor.into(),
            est.prefactor.into(),
            est.i_factor.into(),
            est.exponent.into(),
            central.into(),
        ]);
    }
    write_rows(
        cli,
        &[
            "n",
            "x",
            "alpha",
            "asymptotic",
            "log_asymptotic",
            "psi1_factor",
            "prefactor",
            "I_factor",
            "exponent",
            "central_zone",
        ],
        rows,
    )
}

fn exact(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let ns = n_values(cli)?;
    let table = renewal_measure_exact(model, *ns.last().unwrap() as i64 - 1);
    let mut out = open(cli, &["n", "x", "probability"])?;
    for n in ns {
        let pmf = crp_pmf_from_table(model, &table, n);
        match cli.x {
            Some(x) => out.row(vec![
                n.into(),
                x.into(),
                pmf.get(&x).copied().unwrap_or(0.0).into(),
            ])?,
            None => {
                for (x, p) in pmf {
                    out.row(vec![n.into(), x.into(), p.into()])?;
                }
            }
        }
    }
    out.finish()
}

fn compare(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let ns = n_values(cli)?;
    let targets: Vec<(u64, i64)> = ns
        .iter()
        .map(|&n| target_x(cli, n).map(|x| (n, x)))
        .collect::<Result<_, _>>()?;
    // Fail on the asymptotic side before paying for the exact table.
    let estimates: Vec<_> = targets
        .iter()
        .map(|&(n, x)| approx_crp_pmf(model, n, x))
        .collect::<Result<_, _>>()?;
    let table = renewal_measure_exact(model, *ns.last().unwrap() as i64 - 1);
    let mut out = open(
        cli,
        &[
            "n",
            "x",
            "alpha",
            "exact",
            "asymptotic",
            "ratio",
            "psi1_factor",
            "prefactor",
            "I_factor",
            "exponent",
        ],
    )?;
    for (&(n, x), est) in targets.iter().zip(estimates) {
        let p = crp_pmf_from_table(model, &table, n)
            .get(&x)
            .copied()
            .unwrap_or(0.0);
        out.row(vec![
            n.into(),
            x.into(),
            (x as f64 / n as f64).into(),
            p.into(),
            est.value.into(),
            (p / est.value).into(),
            est.psi1_factor.into(),
            est.prefactor.into(),
            est.i_factor.into(),
            est.exponent.into(),
        ])?;
    }
    out.finish()
}

fn renewal(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let ns = n_values(cli)?;
    let theta = cli.theta.unwrap_or(1.0);
    if !(theta > 0.0) {
        return Err(CliError::Input("--theta must be positive".into()));
    }
    let mut rows = Vec::new();
    for &n in &ns {
        let t = (theta * n as f64).round() as i64;
        let x = target_x(cli, n)?;
        rows.push((n, t, x, approx_renewal(model, n, t, x)?));
    }
    let t_max = rows.iter().map(|r| r.1).max().unwrap();
    let table = renewal_measure_exact(model, t_max);
    let mut out = open(
        cli,
        &[
            "n",
            "t",
            "x",
            "exact",
            "asymptotic",
            "ratio",
            "psi1_factor",
            "prefactor",
            "exponent",
        ],
    )?;
    for (n, t, x, est) in rows {
        let h = table.get(t, x);
        out.row(vec![
            n.into(),
            t.into(),
            x.into(),
            h.into(),
            est.value.into(),
            (h / est.value).into(),
            est.psi1_factor.into(),
            est.prefactor.into(),
            est.exponent.into(),
        ])?;
    }
    out.finish()
}

/// `P(S_n = (t, x))` for the step sums, `t = round(theta n)`; `theta` and
/// `alpha` default to the step means.
fn clt(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let ns = n_values(cli)?;
    let m = model.step().moments();
    let theta = cli.theta.unwrap_or(m.a_tau);
    let mut rows = Vec::new();
    for n in ns {
        let t = (theta * n as f64).round() as i64;
        let x = match (cli.x, cli.alpha) {
            (None, None) => (m.a_zeta * n as f64).round() as i64,
            _ => target_x(cli, n)?,
        };
        let approx = clt_local(model.step(), n, t, x)?;
        let exact = jump_power(model.step(), n as usize, t).get(t, x);
        rows.push(vec![
            n.into(),
            t.into(),
            x.into(),
            exact.into(),
            approx.into(),
            (exact / approx).into(),
        ]);
    }
    write_rows(cli, &["n", "t", "x", "exact", "asymptotic", "ratio"], rows)
}

fn simulate_cmd(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let n = cli
        .n
        .ok_or_else(|| CliError::Input("--n is required for simulate".into()))?;
    let seed = cli
        .seed
        .ok_or_else(|| CliError::Input("--seed is required for simulate".into()))?;
    let paths = cli.paths.unwrap_or(DEFAULT_PATHS);
    if paths == 0 {
        return Err(CliError::Input("--paths must be positive".into()));
    }
    let mode = if cli.tilted {
        let alpha = cli
            .alpha
            .ok_or_else(|| CliError::Input("--tilted needs --alpha".into()))?;
        SamplingMode::Tilted { alpha }
    } else {
        SamplingMode::Naive
    };
    let result = simulate(model, n, paths, seed, mode)?;
    let mut out = open(cli, &["n", "x", "estimate", "std_error"])?;
    let cells: Vec<(i64, _)> = match cli.x {
        Some(x) => vec![(x, result.get(x))],
        None => result.cells.iter().map(|(&x, &c)| (x, c)).collect(),
    };
    for (x, c) in cells {
        out.row(vec![
            n.into(),
            x.into(),
            c.estimate.into(),
            c.std_error.into(),
        ])?;
    }
    out.finish()
}

fn domain_cmd(cli: &Cli, model: &CrpModel) -> Result<(), CliError> {
    let s = domain(model.step());
    let mut out = open(
        cli,
        &[
            "mu_minus",
            "mu_plus",
            "alpha_minus",
            "alpha_plus",
            "lambda_plus",
            "beta_minus",
            "beta_plus",
            "D0",
        ],
    )?;
    out.row(vec![
        s.mu_minus.into(),
        s.mu_plus.into(),
        s.alpha_minus.into(),
        s.alpha_plus.into(),
        s.lambda_plus.into(),
        Cell::Opt(s.beta_minus),
        Cell::Opt(s.beta_plus),
        Cell::Opt(s.d0),
    ])?;
    out.finish()?;
    for d in &s.diagnostics {
        eprintln!("crp: diagnostic: {d}");
    }
    Ok(())
}
