use oneshot_td::chain::mixing_profile;
use oneshot_td::experiments::{
    centralized_envelope_check, fleet_curve_rows, markov_noise_probe, speedup_experiment, CurveRow, EnvelopeConfig,
    EnvelopeStatus, Evaluator, SpeedupConfig,
};
use oneshot_td::fleet::run_fleet;
use oneshot_td::output::{write_curves, write_report, write_summary, write_table, KeyValues};
use oneshot_td::td::Horizon;
use oneshot_td::truth::convergence_constants;
use oneshot_td::{Error, FleetConfig, Result, Vector};

use crate::settings::{Defaults, Flags, ScheduleSpec, Settings};

const MIXING_HORIZON: usize = 200;
const REPORTED_DISTANCES: usize = 50;

fn count(x: u64) -> String {
    if x == u64::MAX {
        "inf".to_string()
    } else {
        x.to_string()
    }
}

fn defaults(agents: Vec<usize>, schedule: ScheduleSpec, replications: usize) -> Defaults {
    Defaults {
        agents,
        steps: 10_000,
        schedule,
        replications,
    }
}

pub fn solve(flags: &Flags) -> Result<()> {
    let s = Settings::resolve(flags, defaults(vec![1], ScheduleSpec::Decay, 1))?;
    let gt = s.truth()?;
    let mut kv = KeyValues::new();
    kv.push("problem", &s.problem)
        .push("states", gt.chain().num_states())
        .push("dim", gt.features().dim())
        .push("gamma", gt.gamma())
        .push("lambda", gt.lambda())
        .push("regime", format!("{:?}", gt.chain().regime()).to_lowercase())
        .push("r_max", gt.r_max())
        .push_vec("mu", gt.mu().as_slice())
        .push_vec("theta_star", gt.theta_star().as_slice())
        .push("theta_star_condition", gt.td0_solve().condition)
        .push_vec("theta_star_lambda", gt.theta_star_lambda().as_slice())
        .push("theta_star_lambda_condition", gt.tdlambda_solve().condition);
    match gt.value() {
        Some(v) => kv.push_vec("value", v.as_slice()),
        None => kv.push("value", "unavailable"),
    };
    for w in [&gt.td0_solve().warning, &gt.tdlambda_solve().warning]
        .into_iter()
        .flatten()
    {
        eprintln!("warning: {w}");
        kv.push("warning", w);
    }
    kv.push("omega", gt.omega())
        .push("omega_i", gt.omega_i())
        .push("omega_i_lambda", gt.omega_i_lambda())
        .push("kappa", gt.kappa())
        .push("lambda_update_sign", gt.lambda_update_sign())
        .push("radius", gt.radius())
        .push("radius_lambda", gt.radius_lambda());
    for (name, slack) in gt.lemma_checks().entries() {
        kv.push(format!("slack_{name}"), slack);
    }
    match mixing_profile(gt.chain(), MIXING_HORIZON) {
        Ok(profile) => {
            let c = convergence_constants(&gt, &profile);
            let shown = REPORTED_DISTANCES.min(profile.distances().len() - 1);
            kv.push("mixing_m", profile.m())
                .push("mixing_rho", profile.rho())
                .push_vec("mixing_distances", &profile.distances()[..=shown])
                .push("tau_mix", count(c.tau_mix))
                .push("tau_mix_lambda", count(c.tau_mix_lambda))
                .push("t_th", count(c.t_th))
                .push("t_th_lambda", count(c.t_th_lambda))
                .push("t0", count(c.t0))
                .push("t0_lambda", count(c.t0_lambda))
                .push("sigma", c.sigma)
                .push("sigma_lambda", c.sigma_lambda);
        }
        Err(e) => {
            eprintln!("warning: no mixing profile: {e}");
            kv.push("mixing", e.to_string());
        }
    }
    let path = s.out.join("report.txt");
    write_report(&path, &kv)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn run(flags: &Flags) -> Result<()> {
    let s = Settings::resolve(flags, defaults(vec![1], ScheduleSpec::Const(1e-3), 1))?;
    let [agents] = s.agents[..] else {
        return Err(Error::Config(format!(
            "agents: `run` takes a single fleet size, got {:?}",
            s.agents
        )));
    };
    let gt = s.truth()?;
    let eval = Evaluator::from_truth(&gt, s.lambda.is_some())?;
    let mut cfg = FleetConfig::new(agents, s.run_spec(&gt), s.seed);
    cfg.averaging = s.averaging.build(agents)?;
    cfg.execution = s.execution;

    let mut rows: Vec<CurveRow> = Vec::new();
    let mut summary = s.describe("run");
    let mut final_dist = Vec::with_capacity(s.replications);
    for r in 0..s.replications {
        cfg.replication = r as u64;
        let res = run_fleet(&cfg, &s.chain, &s.features)?;
        let rep = r.to_string();
        rows.extend(fleet_curve_rows("run", &rep, &res, &eval));
        if let Some(gossip) = &res.consensus {
            rows.extend(gossip.max_deviation.iter().enumerate().map(|(round, &d)| CurveRow {
                experiment: "run".into(),
                replication: rep.clone(),
                agent: "avg".into(),
                index: round as u64,
                metric: "consensus_max_dev",
                value: d,
            }));
            summary.push(
                format!("rep{r}_consensus_max_dev"),
                gossip.max_deviation.last().copied().unwrap_or(0.0),
            );
        }
        let dist = eval.dist(&res.average);
        final_dist.push(dist);
        summary
            .push(format!("rep{r}_dist_avg"), dist)
            .push_vec(format!("rep{r}_theta_avg"), &res.average);
        if let Some(rms) = eval.rms(&res.average) {
            summary.push(format!("rep{r}_rms_avg"), rms);
        }
    }
    summary.push_vec("theta_star", eval.theta_star());
    let mean = final_dist.iter().sum::<f64>() / final_dist.len() as f64;
    summary.push("mean_dist_avg", mean);

    let header = s.describe("run");
    let curves = s.out.join("curves.csv");
    write_curves(&curves, &header, &rows)?;
    write_report(&s.out.join("summary.txt"), &summary)?;
    println!(
        "wrote {} ({} rows); final ‖θ̄ − θ*‖ = {mean:.6}",
        curves.display(),
        rows.len()
    );
    Ok(())
}

pub fn speedup(flags: &Flags) -> Result<()> {
    let s = Settings::resolve(flags, defaults(vec![1, 2, 4, 8], ScheduleSpec::Const(1e-3), 200))?;
    if s.averaging != crate::settings::AveragingSpec::OneShot {
        return Err(Error::Config(
            "averaging: `speedup` measures the one-shot mean only".into(),
        ));
    }
    if s.replications == 1 {
        eprintln!("warning: replications = 1, so standard errors and confidence intervals are undefined");
    }
    let gt = s.truth()?;
    let eval = Evaluator::from_truth(&gt, s.lambda.is_some())?;
    let experiment = format!("speedup-{}", s.variant().label());
    let cfg = SpeedupConfig {
        experiment: experiment.clone(),
        agents: s.agents.clone(),
        replications: s.replications,
        spec: s.run_spec(&gt),
        base_seed: s.seed,
        first_block: 0,
        execution: s.execution,
    };
    let summary = speedup_experiment(&cfg, &s.chain, &s.features, &eval)?;
    let header = s.describe("speedup");
    write_summary(&s.out.join("summary.csv"), &header, &experiment, &summary.rows)?;
    write_curves(&s.out.join("curves.csv"), &header, &summary.curves)?;
    let mut decomposition = header.clone();
    for d in &summary.decomposition {
        decomposition
            .push(format!("n{}_mse", d.n), d.mse)
            .push(format!("n{}_reconstructed", d.n), d.reconstructed)
            .push(format!("n{}_stderr", d.n), d.stderr)
            .push(format!("n{}_z", d.n), d.z);
    }
    write_report(&s.out.join("decomposition.txt"), &decomposition)?;
    for r in &summary.rows {
        println!(
            "N = {:>3}  MSE = {:.4e} ± {:.1e}  ratio = {:.3}",
            r.n, r.mse_mean, r.mse_stderr, r.ratio
        );
    }
    Ok(())
}

pub fn noise(flags: &Flags) -> Result<()> {
    let s = Settings::resolve(flags, defaults(vec![1], ScheduleSpec::Decay, 1))?;
    let t_max = match s.horizon {
        Horizon::Steps(t) if flags.steps.is_some() => t as usize,
        _ => REPORTED_DISTANCES,
    };
    let gt = s.truth()?;
    let start = s.chain.start_state().unwrap_or(0);
    let theta = Vector::zeros(gt.features().dim());
    let rows = markov_noise_probe(&gt, &theta, start, t_max)?;
    let mut header = s.describe("noise");
    header.push("start", start).push("theta", "zeros");
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                r.noise.to_string(),
                r.envelope.to_string(),
                r.distance.to_string(),
            ]
        })
        .collect();
    let path = s.out.join("noise.csv");
    write_table(&path, &header, &["t", "noise", "envelope", "distance"], &table)?;
    let over = rows.iter().filter(|r| r.noise > r.envelope + 1e-12).count();
    println!(
        "wrote {}; {over} of {} points above the envelope",
        path.display(),
        rows.len()
    );
    Ok(())
}

pub fn envelope(flags: &Flags, tolerance: f64) -> Result<()> {
    let s = Settings::resolve(flags, defaults(vec![1], ScheduleSpec::Decay, 100))?;
    let gt = s.truth()?;
    let Horizon::Steps(horizon) = s.horizon else {
        return Err(Error::Config("episodes: the envelope check needs --steps".into()));
    };
    let interval = s.every.unwrap_or((horizon / 60).max(1));
    let cfg = EnvelopeConfig {
        lambda: s.lambda,
        spec: s.run_spec(&gt),
        replications: s.replications,
        base_seed: s.seed,
        interval,
        tolerance,
        execution: s.execution,
    };
    let report = centralized_envelope_check(&gt, &cfg)?;
    let mut header = s.describe("envelope");
    header.push("tolerance", tolerance);
    let table: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|&(t, mse, se)| {
            vec![
                t.to_string(),
                mse.to_string(),
                se.to_string(),
                ((t + 1) as f64 * mse).to_string(),
            ]
        })
        .collect();
    write_table(
        &s.out.join("envelope.csv"),
        &header,
        &["t", "mse", "mse_stderr", "scaled"],
        &table,
    )?;
    let status = match report.status {
        EnvelopeStatus::Pass => "pass",
        EnvelopeStatus::Fail => "fail",
        EnvelopeStatus::NotApplicable => "not-applicable",
    };
    header
        .push("status", status)
        .push("threshold", count(report.threshold))
        .push("constant", report.constant)
        .push("worst_ratio", report.worst_ratio);
    write_report(&s.out.join("envelope.txt"), &header)?;
    println!(
        "envelope: {status} (threshold {}, worst ratio {:.3})",
        count(report.threshold),
        report.worst_ratio
    );
    Ok(())
}
