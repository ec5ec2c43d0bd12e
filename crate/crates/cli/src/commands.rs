use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use rankhc::calibration::{tabulate_null_with_budget, table_to_json};
use rankhc::comparators::{dist_aware_hc, friedman_test, raw_permutation_hc, NullFamily, OracleNullSpec};
use rankhc::simgen::{
    zero_variance_fixture, oscillating_variance_fixture, covariance_counterexample, grid_experiment, power_experiment, stream_length_experiment,
    write_power_csv, ExperimentConfig, PowerCurve, Setting, SignalSpec,
};
use rankhc::theory::{rho, rho_tilde};
use rankhc::{
    apply_direction, default_k_n, load_csv, make_grid, save_table, test_midrank_naive, test_midrank_permutation,
    test_random_ties, ColumnDirection, CsvOptions, Error, GridKind, GridSpec, Method, NullTable, Observations,
    Result, RngSeed, TestResult,
};
use serde_json::{json, Value};

use crate::args::*;
use crate::manifest::{replay_args, write_file, Manifest, OutputRecord, TableUse};

/// What a command produced: the main body for `--out` (or stdout) and a
/// summary for the manifest.
struct Outcome {
    body: Vec<u8>,
    result: Value,
    extra_outputs: Vec<OutputRecord>,
}

#[derive(Default)]
struct Ctx {
    tables: Vec<TableUse>,
}

impl SeedArgs {
    fn resolve(&self) -> (RngSeed, &'static str) {
        match self.seed {
            Some(s) => (RngSeed(s), "fixed"),
            None => (RngSeed::from_entropy(), "random"),
        }
    }
}

fn command_seed(c: &Command) -> Option<&SeedArgs> {
    match c {
        Command::Test(a) => Some(&a.seed),
        Command::Tabulate(a) => Some(&a.seed),
        Command::Simulate(a) => Some(&a.seed),
        Command::Friedman(a) => Some(&a.seed),
        Command::DistHc(a) => Some(&a.seed),
        Command::PermHc(a) => Some(&a.seed),
        Command::Fixtures(a) => Some(&a.seed),
        Command::Boundary(_) | Command::Replay(_) => None,
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Test(_) => "test",
        Command::Tabulate(_) => "tabulate",
        Command::Simulate(_) => "simulate",
        Command::Boundary(_) => "boundary",
        Command::Friedman(_) => "friedman",
        Command::DistHc(_) => "dist-hc",
        Command::PermHc(_) => "perm-hc",
        Command::Fixtures(_) => "fixtures",
        Command::Replay(_) => "replay",
    }
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest_path, &cli);
    }
    if let Some(k) = cli.threads {
        // a second call (replay) keeps the first pool, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let clock = Instant::now();
    let seed = command_seed(&cli.command).map(SeedArgs::resolve);
    let rs = seed.map(|s| s.0);
    let mut ctx = Ctx::default();
    let outcome = match &cli.command {
        Command::Test(a) => cmd_test(a, rs.expect("seeded"), &mut ctx)?,
        Command::Tabulate(a) => cmd_tabulate(a, rs.expect("seeded"), &cli, &mut ctx)?,
        Command::Simulate(a) => cmd_simulate(a, rs.expect("seeded"), &mut ctx)?,
        Command::Boundary(a) => cmd_boundary(a)?,
        Command::Friedman(a) => cmd_friedman(a, rs.expect("seeded"))?,
        Command::DistHc(a) => cmd_dist_hc(a, rs.expect("seeded"))?,
        Command::PermHc(a) => cmd_perm_hc(a, rs.expect("seeded"))?,
        Command::Fixtures(a) => cmd_fixtures(a, rs.expect("seeded"))?,
        Command::Replay(_) => unreachable!("handled above"),
    };

    let mut outputs = Vec::new();
    match &cli.out {
        Some(p) => write_file(p, &outcome.body)?,
        None => std::io::stdout().write_all(&outcome.body).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    outputs.push(OutputRecord::new(cli.out.clone(), &outcome.body));
    outputs.extend(outcome.extra_outputs);

    let name = command_name(&cli.command);
    let manifest = Manifest {
        tool: "rankhc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: rankhc::VERSION.into(),
        command: name.into(),
        replay_args: replay_args(&argv, rs.map(|s| s.0)),
        seed: rs.map(|s| s.0),
        seed_source: seed.map(|s| s.1.to_string()),
        threads: cli.threads,
        config: serde_json::to_value(&cli.command)?,
        tables: ctx.tables,
        outputs,
        result: outcome.result,
        started_unix_secs: started,
        elapsed_secs: clock.elapsed().as_secs_f64(),
    };
    let path = match (&cli.manifest, &cli.out) {
        (Some(p), _) => p.clone(),
        (None, Some(o)) => PathBuf::from(format!("{}.manifest.json", o.display())),
        (None, None) => PathBuf::from(format!("rankhc-{name}.manifest.json")),
    };
    manifest.save(&path)
}

fn replay(path: &Path, outer: &Cli) -> Result<()> {
    let m = Manifest::load(path)?;
    let mut argv = vec!["rankhc".to_string()];
    argv.extend(m.replay_args.iter().cloned());
    let mut cli = Cli::try_parse_from(&argv)
        .map_err(|e| Error::InvalidParameter(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::InvalidParameter("a manifest cannot replay another replay".into()));
    }
    if outer.out.is_some() {
        cli.out = outer.out.clone();
    }
    if outer.manifest.is_some() {
        cli.manifest = outer.manifest.clone();
    }
    if outer.threads.is_some() {
        cli.threads = outer.threads;
    }
    run(cli, argv)
}

fn load_input(a: &InputArgs) -> Result<Observations> {
    let m = load_csv(
        &a.input,
        CsvOptions {
            has_header: a.has_header,
            transpose: a.transpose,
        },
    )?;
    match &a.direction {
        None => Ok(m),
        Some(d) => {
            let mut dir: ColumnDirection = d.parse()?;
            if dir.len() == 1 && m.t() > 1 {
                dir = ColumnDirection(vec![dir.0[0]; m.t()]);
            }
            apply_direction(&m, &dir)
        }
    }
}

fn grid_kind(g: GridArg) -> GridKind {
    match g {
        GridArg::Standard => GridKind::Standard,
        GridArg::Extended => GridKind::Extended,
    }
}

fn grid_for(g: &GridArgs, n: usize, t: usize, k_n: Option<u32>) -> Result<GridSpec> {
    let k = k_n.or(g.k_n).unwrap_or_else(|| default_k_n(n));
    make_grid(grid_kind(g.grid), n, t, k)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn budget(b: f64) -> Result<u128> {
    if b.is_finite() && b >= 0.0 {
        Ok(b as u128)
    } else {
        Err(Error::InvalidParameter(format!("budget must be finite and >= 0, got {b}")))
    }
}

fn resolve_table(a: &TableArgs, grid: &GridSpec, ctx: &mut Ctx) -> Result<NullTable> {
    let (n, t) = (grid.n(), grid.t());
    let record = |tb: &NullTable, source: &str, path: Option<PathBuf>| TableUse {
        source: source.into(),
        path,
        n: tb.n(),
        t: tb.t(),
        grid: match tb.grid().kind() {
            GridKind::Standard => "standard".into(),
            GridKind::Extended => "extended".into(),
        },
        k_n: tb.grid().k_n(),
        mc_pq: tb.mc_pq(),
        mc_t: tb.mc_t(),
        seed: tb.seed().0,
    };
    if let Some(p) = &a.table {
        let tb = rankhc::calibration::load_table_for(p, n, t)?;
        ctx.tables.push(record(&tb, "file", Some(p.clone())));
        return Ok(tb);
    }
    let seed = RngSeed(a.table_seed);
    let name = NullTable::cache_file_name(grid, a.mc_pq, a.mc_t, seed);
    if let Some(dir) = &a.table_dir {
        let p = dir.join(&name);
        if p.exists() {
            let tb = rankhc::calibration::load_table_for(&p, n, t)?;
            ctx.tables.push(record(&tb, "cache", Some(p)));
            return Ok(tb);
        }
    }
    if !a.auto_tabulate {
        return Err(Error::TableMissing { n, t });
    }
    let tb = tabulate_null_with_budget(grid, a.mc_pq, a.mc_t, seed, budget(a.budget)?)?;
    match &a.table_dir {
        Some(dir) => {
            let p = dir.join(&name);
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.clone(),
                source,
            })?;
            save_table(&tb, &p)?;
            ctx.tables.push(record(&tb, "tabulated-cached", Some(p)));
        }
        None => ctx.tables.push(record(&tb, "tabulated", None)),
    }
    Ok(tb)
}

fn json_body(v: &Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn test_outcome(n: usize, t: usize, alpha: f64, res: &TestResult) -> Result<Outcome> {
    check_alpha(alpha)?;
    let v = json!({
        "n": n,
        "t": t,
        "alpha": alpha,
        "rejects": res.rejects(alpha),
        "result": res,
    });
    Ok(Outcome {
        body: json_body(&v)?,
        result: json!({ "statistic": v["result"]["statistic"], "p_value": res.p_value, "rejects": res.rejects(alpha) }),
        extra_outputs: Vec::new(),
    })
}

fn cmd_test(a: &TestArgs, seed: RngSeed, ctx: &mut Ctx) -> Result<Outcome> {
    check_alpha(a.alpha)?;
    let m = load_input(&a.input)?;
    let (n, t) = (m.n(), m.t());
    let grid = grid_for(&a.grid, n, t, None)?;
    let mut res = match a.method {
        TestMethod::RandomTies => test_random_ties(&m, &resolve_table(&a.table, &grid, ctx)?, seed)?,
        TestMethod::MidrankNaive => test_midrank_naive(&m, &resolve_table(&a.table, &grid, ctx)?)?,
        TestMethod::MidrankPerm => test_midrank_permutation(&m, &grid, a.permutations, seed)?,
    };
    if !a.subjects {
        res.subject_p = None;
    }
    test_outcome(n, t, a.alpha, &res)
}

fn cmd_tabulate(a: &TabulateArgs, seed: RngSeed, cli: &Cli, ctx: &mut Ctx) -> Result<Outcome> {
    let grid = grid_for(&a.grid, a.n, a.t, None)?;
    if a.table_dir.is_none() && cli.out.is_none() {
        return Err(Error::InvalidParameter("tabulate needs --out or --table-dir".into()));
    }
    let tb = tabulate_null_with_budget(&grid, a.mc_pq, a.mc_t, seed, budget(a.budget)?)?;
    let text = table_to_json(&tb)?;
    let summary = json!({
        "n": tb.n(),
        "t": tb.t(),
        "grid_points": tb.grid().len(),
        "k_n": tb.grid().k_n(),
        "mc_pq": tb.mc_pq(),
        "mc_t": tb.mc_t(),
        "seed": tb.seed(),
    });
    let mut extra = Vec::new();
    let body = match &a.table_dir {
        Some(dir) => {
            let p = dir.join(NullTable::cache_file_name(&grid, a.mc_pq, a.mc_t, seed));
            write_file(&p, text.as_bytes())?;
            extra.push(OutputRecord::new(Some(p.clone()), text.as_bytes()));
            let mut s = summary.clone();
            s["path"] = json!(p);
            json_body(&s)?
        }
        None => text.into_bytes(),
    };
    ctx.tables.clear();
    Ok(Outcome {
        body,
        result: summary,
        extra_outputs: extra,
    })
}

fn method_of(m: MethodArg) -> Method {
    match m {
        MethodArg::RandomTies => Method::RandomTiesMc,
        MethodArg::MidrankPerm => Method::MidrankPermutation,
        MethodArg::MidrankNaive => Method::MidrankNaive,
        MethodArg::DistHc => Method::DistHc,
        MethodArg::Friedman => Method::Friedman,
        MethodArg::PermHc => Method::PermHc,
    }
}

fn cmd_simulate(a: &SimulateArgs, seed: RngSeed, ctx: &mut Ctx) -> Result<Outcome> {
    let setting: Setting = a.setting.parse()?;
    let default_trials = match a.experiment {
        Experiment::Grid => 10_000,
        _ => 1_000,
    };
    let cfg = ExperimentConfig {
        alpha: a.alpha,
        trials: a.trials.unwrap_or(default_trials),
        grid_kind: grid_kind(a.grid.grid),
        k_n: a.grid.k_n,
        permutations: a.permutations,
        oracle_mc: a.oracle_mc,
    };
    let tau0 = a.taus.first().copied().unwrap_or(0.0);
    let base_spec = |t: usize| -> Result<SignalSpec> {
        match (a.anomalies, a.beta) {
            (Some(s), _) => SignalSpec::with_anomalies(setting, tau0, s, a.n, t),
            (None, Some(b)) => SignalSpec::new(setting, tau0, b, a.n, t),
            (None, None) => Err(Error::InvalidParameter("simulate needs --beta or --anomalies".into())),
        }
    };
    let need_t = || a.t.ok_or_else(|| Error::InvalidParameter("this experiment needs --t".into()));
    let curves: Vec<PowerCurve> = match a.experiment {
        Experiment::Power => {
            let t = need_t()?;
            let spec = base_spec(t)?;
            let methods: Vec<Method> = a.methods.iter().map(|&m| method_of(m)).collect();
            let table = if methods
                .iter()
                .any(|m| matches!(m, Method::RandomTiesMc | Method::MidrankNaive))
            {
                Some(resolve_table(&a.table, &grid_for(&a.grid, a.n, t, None)?, ctx)?)
            } else {
                None
            };
            power_experiment(&spec, &a.taus, &methods, &cfg, table.as_ref(), seed)?
        }
        Experiment::Grid => {
            let t = need_t()?;
            let spec = base_spec(t)?;
            let ks = if a.k_list.is_empty() {
                vec![default_k_n(a.n)]
            } else {
                a.k_list.clone()
            };
            let tables = ks
                .iter()
                .map(|&k| resolve_table(&a.table, &grid_for(&a.grid, a.n, t, Some(k))?, ctx))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&NullTable> = tables.iter().collect();
            grid_experiment(&spec, &a.taus, &refs, &cfg, seed)?
        }
        Experiment::StreamLength => {
            let s = a
                .anomalies
                .ok_or_else(|| Error::InvalidParameter("stream-length needs --anomalies".into()))?;
            if a.t_list.is_empty() {
                return Err(Error::InvalidParameter("stream-length needs --t-list".into()));
            }
            let tables = a
                .t_list
                .iter()
                .map(|&t| resolve_table(&a.table, &grid_for(&a.grid, a.n, t, None)?, ctx))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&NullTable> = tables.iter().collect();
            stream_length_experiment(setting, a.n, s, &a.taus, &refs, &cfg, seed)?
        }
    };
    let mut body = Vec::new();
    write_power_csv(&curves, &mut body)?;
    let curves_value = serde_json::to_value(&curves)?;
    let mut extra = Vec::new();
    if let Some(p) = &a.curves_json {
        let b = json_body(&curves_value)?;
        write_file(p, &b)?;
        extra.push(OutputRecord::new(Some(p.clone()), &b));
    }
    Ok(Outcome {
        body,
        result: json!({ "config": cfg, "curves": curves_value }),
        extra_outputs: extra,
    })
}

fn cmd_boundary(a: &BoundaryArgs) -> Result<Outcome> {
    if a.beta_points == 0 {
        return Err(Error::InvalidParameter("need at least one beta point".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidParameter(format!("csv write failed: {e}"));
    w.write_record(["beta", "sigma", "rho", "rho_tilde"]).map_err(csv_err)?;
    for k in 1..=a.beta_points {
        let beta = 0.5 + 0.5 * k as f64 / (a.beta_points + 1) as f64;
        for &sigma in &a.sigmas {
            let r: f64 = rho(beta, sigma)?;
            let rt = rho_tilde(beta, sigma)?;
            w.serialize((beta, sigma, r, rt)).map_err(csv_err)?;
        }
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::InvalidParameter(format!("csv write failed: {e}")))?;
    Ok(Outcome {
        body,
        result: json!({ "rows": a.beta_points * a.sigmas.len() }),
        extra_outputs: Vec::new(),
    })
}

fn cmd_friedman(a: &FriedmanArgs, seed: RngSeed) -> Result<Outcome> {
    let m = load_input(&a.input)?;
    let res = friedman_test(&m, a.mc, seed)?;
    test_outcome(m.n(), m.t(), a.alpha, &res)
}

fn cmd_dist_hc(a: &DistHcArgs, seed: RngSeed) -> Result<Outcome> {
    let m = load_input(&a.input)?;
    let family: NullFamily = a.family.parse()?;
    let spec = OracleNullSpec::new(family, a.mu0, a.sigma0)?;
    let k = a.k_n.unwrap_or_else(|| default_k_n(m.n()));
    let res = dist_aware_hc(&m, &spec, k, a.mc, seed)?;
    test_outcome(m.n(), m.t(), a.alpha, &res)
}

fn cmd_perm_hc(a: &PermHcArgs, seed: RngSeed) -> Result<Outcome> {
    let m = load_input(&a.input)?;
    let k = a.k_n.unwrap_or_else(|| default_k_n(m.n()));
    let res = raw_permutation_hc(&m, k, a.permutations, seed)?;
    test_outcome(m.n(), m.t(), a.alpha, &res)
}

fn cmd_fixtures(a: &FixturesArgs, seed: RngSeed) -> Result<Outcome> {
    let mut v = serde_json::Map::new();
    let mut pass = true;
    if matches!(a.which, Which::ZeroVariance | Which::All) {
        let f = zero_variance_fixture(a.p, a.mc, seed.derive(1))?;
        let ok = f.within(4.0);
        pass &= ok;
        v.insert("zero_variance_fixture".into(), json!({ "pass": ok, "max_z": f.max_z(), "fixture": f }));
    }
    if matches!(a.which, Which::Oscillating | Which::All) {
        let f = oscillating_variance_fixture(a.osc_n, a.mc, seed.derive(2))?;
        let ok = f.within(4.0);
        pass &= ok;
        v.insert("oscillating_variance_fixture".into(), json!({ "pass": ok, "max_z": f.max_z(), "fixture": f }));
    }
    if matches!(a.which, Which::Covariance | Which::All) {
        let d = covariance_counterexample(a.cov_n, a.cov_s)?;
        let ok = d.corrected.identity_holds(a.cov_s);
        pass &= ok;
        v.insert(
            "covariance_counterexample".into(),
            json!({
                "pass": ok,
                "stated_identity_holds": d.stated.identity_holds(a.cov_s),
                "stated_q_formula": d.stated_q_formula(),
                "fixture": d,
            }),
        );
    }
    v.insert("pass".into(), json!(pass));
    let val = Value::Object(v);
    Ok(Outcome {
        body: json_body(&val)?,
        result: json!({ "pass": pass }),
        extra_outputs: Vec::new(),
    })
}
