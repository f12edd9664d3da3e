use std::path::{Path, PathBuf};

use lvggm::estimation::{effective_rank, sample_covariance_centered};
use lvggm::experiments::{
    collapse_band, effrank_trends, fit_loglog_slope, run_effrank_study, run_error_scaling_study,
    tune_error_scaling, EffRankStudyConfig, ErrorScalingConfig,
};
use lvggm::io::{
    emit_scatter_svg, read_matrix, read_records, write_atomic, write_matrix, write_records, FlatConfig,
    PlotField, RunManifest,
};
use lvggm::model::{numerical_rank, random_sparse_precision};
use lvggm::theory::{diagnose, select_regularization, Regime, ScheduleConstants};
use lvggm::{
    assemble_joint, chain_precision, energy_ratio, glasso, lvggm_admm, marginalize, sample,
    sample_covariance, scale_to_energy_ratio, CovarianceEstimate, JointModel, LvggmError,
    MarginalModel, SampleMatrix, SolverConfig, Support,
};
use serde::Serialize;

use crate::args::{
    ConditionalKind, DiagnoseArgs, EstimateArgs, ExperimentArgs, GenerateArgs, PlotArgs, StudyKind,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lvggm(LvggmError),
}

impl From<LvggmError> for CliError {
    fn from(e: LvggmError) -> Self {
        CliError::Lvggm(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lvggm(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lvggm(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| LvggmError::Io(std::io::Error::other(e)))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Runs `body` between writing a fresh manifest and finalizing it.
fn with_manifest<T>(
    path: &Path,
    mut manifest: RunManifest,
    body: impl FnOnce(&mut RunManifest) -> CliResult<T>,
) -> CliResult<T> {
    manifest.write(path)?;
    let result = body(&mut manifest);
    let outcome = match &result {
        Ok(_) => Ok(()),
        Err(e) => Err(e.to_string()),
    };
    manifest.outputs.push(path.to_path_buf());
    manifest.finish(path, outcome)?;
    result
}

#[derive(Serialize)]
struct ModelSummary {
    p: usize,
    r: usize,
    rank_l: usize,
    support_size: usize,
    energy_ratio: f64,
    r_eff: f64,
    latent_factor: f64,
    seed: u64,
}

pub fn generate(args: &GenerateArgs, seed: u64) -> CliResult<()> {
    if args.p == 0 {
        return Err(CliError::Usage("--p must be positive".into()));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(LvggmError::from)?;
    let dir = &args.out_dir;
    let manifest = RunManifest::new("generate", None, seed);
    with_manifest(&dir.join("manifest.json"), manifest, |m| {
        let s = match args.kind {
            ConditionalKind::Chain => chain_precision(args.p, args.chain_diag)?,
            ConditionalKind::Random => random_sparse_precision(args.p, args.density, seed)?.0,
        };
        let mut jm = assemble_joint(&s, args.r, args.latent_scale, seed.wrapping_add(1))?;
        if let Some(target) = args.energy_ratio {
            jm = scale_to_energy_ratio(&jm, target)?;
        }
        let mm = marginalize(&jm)?;
        let mut outputs: Vec<(&str, &lvggm::Matrix)> = vec![
            ("S_star.csv", &mm.s_star),
            ("L_star.csv", &mm.l_star),
            ("theta_star.csv", &mm.theta_star),
            ("sigma_star.csv", &mm.sigma_star),
            ("joint.csv", jm.j()),
        ];
        let samples;
        if args.n > 0 {
            samples = sample(&mm.sigma_star, args.n, seed.wrapping_add(2))?;
            outputs.push(("samples.csv", &samples.data));
        }
        for (name, mat) in outputs {
            let path = dir.join(name);
            write_matrix(&path, mat)?;
            m.outputs.push(path);
        }
        let summary = ModelSummary {
            p: mm.p(),
            r: jm.r(),
            rank_l: mm.rank,
            support_size: mm.support.len(),
            energy_ratio: energy_ratio(&mm)?,
            r_eff: effective_rank(&mm.sigma_star),
            latent_factor: jm.latent_factor(),
            seed,
        };
        let path = dir.join("model.json");
        write_json(&path, &summary)?;
        m.outputs.push(path);
        println!(
            "p={} r={} |E|={} energy_ratio={:.4} r_eff={:.3}",
            summary.p, summary.r, summary.support_size, summary.energy_ratio, summary.r_eff
        );
        Ok(())
    })
}

#[derive(Serialize)]
struct EstimateDiagnostics {
    method: &'static str,
    p: usize,
    n: Option<usize>,
    lambda: f64,
    mu: f64,
    iterations: usize,
    converged: bool,
    primal_residual: f64,
    dual_residual: f64,
    objective: f64,
    final_rho: f64,
    rank_l_hat: usize,
    support_size_s_hat: usize,
}

pub fn estimate(args: &EstimateArgs, seed: u64) -> CliResult<()> {
    let data = read_matrix(&args.input)?;
    let cov = if args.is_covariance {
        if data.nrows() != data.ncols() {
            return Err(CliError::Usage(format!(
                "--is-covariance expects a square matrix, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        CovarianceEstimate::from_matrix(data, args.n.unwrap_or(0))?
    } else {
        let x = SampleMatrix::new(data, seed)?;
        if args.center {
            sample_covariance_centered(&x)
        } else {
            sample_covariance(&x)
        }
    };
    let n_known = !args.is_covariance || args.n.is_some();
    let (lambda, mu) = match (args.lambda, args.mu) {
        (Some(l), Some(m)) => (l, m),
        (l, m) => {
            if !n_known {
                return Err(CliError::Usage(
                    "default --lambda/--mu need the sample size; pass --n with --is-covariance".into(),
                ));
            }
            let (dl, dm) = select_regularization(
                &cov.sigma_hat,
                cov.n,
                Regime::Practical,
                ScheduleConstants {
                    ca: 0.1,
                    cb: 0.1,
                    ..ScheduleConstants::default()
                },
            )?;
            (l.unwrap_or(dl), m.unwrap_or(dm))
        }
    };
    let cfg = SolverConfig {
        lambda,
        mu,
        rho: args.rho,
        max_iters: args.max_iters,
        eps_abs: args.tol_abs,
        eps_rel: args.tol_rel,
        latent_enabled: !args.glasso,
        adaptive_rho: args.adaptive_rho,
    };
    cfg.validate()?;
    let prefixed = |name: &str| PathBuf::from(format!("{}{name}", args.output_prefix));
    if let Some(parent) = prefixed("x").parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(LvggmError::from)?;
    }
    let manifest = RunManifest::new("estimate", None, seed);
    with_manifest(&prefixed("manifest.json"), manifest, |m| {
        let est = if args.glasso {
            glasso(&cov, lambda, &cfg)?
        } else {
            lvggm_admm(&cov, &cfg)?
        };
        for (name, mat) in [("S_hat.csv", &est.s_hat), ("L_hat.csv", &est.l_hat), ("theta_hat.csv", &est.theta_hat)] {
            write_matrix(&prefixed(name), mat)?;
            m.outputs.push(prefixed(name));
        }
        let diag = EstimateDiagnostics {
            method: if args.glasso { "glasso" } else { "lvggm" },
            p: cov.dim(),
            n: n_known.then_some(cov.n),
            lambda,
            mu: if args.glasso { 0.0 } else { mu },
            iterations: est.iterations,
            converged: est.converged,
            primal_residual: est.primal_residual,
            dual_residual: est.dual_residual,
            objective: est.objective_value,
            final_rho: est.final_rho,
            rank_l_hat: numerical_rank(&est.l_hat)?,
            support_size_s_hat: Support::from_matrix(&est.s_hat, 0.0).len(),
        };
        write_json(&prefixed("diagnostics.json"), &diag)?;
        m.outputs.push(prefixed("diagnostics.json"));
        if !est.converged {
            let w = format!("solver stopped after {} iterations without meeting the tolerances", est.iterations);
            eprintln!("warning: {w}");
            m.warnings.push(w);
        }
        println!(
            "{}: {} iterations, converged={}, objective={:.6}, rank(L̂)={}",
            diag.method, diag.iterations, diag.converged, diag.objective, diag.rank_l_hat
        );
        Ok(())
    })
}

fn load_model(args: &DiagnoseArgs) -> CliResult<MarginalModel> {
    match (&args.model, &args.sparse, &args.lowrank) {
        (Some(joint), None, None) => {
            let p = args
                .observed
                .ok_or_else(|| CliError::Usage("--model needs --observed <p>".into()))?;
            let jm = JointModel::from_matrix(read_matrix(joint)?, p)?;
            Ok(marginalize(&jm)?)
        }
        (None, Some(s), Some(l)) => Ok(MarginalModel::from_parts(read_matrix(s)?, read_matrix(l)?)?),
        _ => Err(CliError::Usage(
            "give either --model <joint.csv> --observed <p>, or --sparse <S.csv> --lowrank <L.csv>".into(),
        )),
    }
}

pub fn diagnose_cmd(args: &DiagnoseArgs, seed: u64) -> CliResult<()> {
    let mm = load_model(args)?;
    let run = || -> CliResult<String> {
        let report = diagnose(&mm, args.lambda, args.mu, args.m_const)?;
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Lvggm(LvggmError::Io(std::io::Error::other(e))))
    };
    match &args.output {
        None => {
            println!("{}", run()?);
            Ok(())
        }
        Some(out) => {
            let manifest = RunManifest::new("diagnose", None, seed);
            with_manifest(&out.with_extension("manifest.json"), manifest, |m| {
                let json = run()? + "\n";
                write_atomic(out, json.as_bytes())?;
                m.outputs.push(out.clone());
                Ok(())
            })
        }
    }
}

pub fn experiment(args: &ExperimentArgs, seed: Option<u64>) -> CliResult<()> {
    let mut flat = match &args.config {
        Some(path) => FlatConfig::load(path)?,
        None => FlatConfig::default(),
    };
    if let Some(s) = seed {
        flat.set("base_seed", &s.to_string());
    }
    if args.full_scale {
        flat.set("full_scale", "true");
    }
    let digest = flat.digest();
    flat = {
        let mut f = FlatConfig::default();
        for k in flat.keys().filter(|k| *k != "full_scale") {
            f.set(k, flat.get(k).unwrap_or_default());
        }
        f
    };
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.output.with_extension("manifest.json"));
    let study = match args.study {
        StudyKind::Effrank => "effrank",
        StudyKind::Scaling => "scaling",
        StudyKind::Tune => "tune",
    };
    let base_seed = flat.get_u64("base_seed")?.unwrap_or(0);
    let manifest = RunManifest::new(format!("experiment {study}"), Some(digest), base_seed);
    with_manifest(&manifest_path, manifest, |m| {
        match args.study {
            StudyKind::Effrank => {
                let base = if args.full_scale {
                    EffRankStudyConfig::full_scale()
                } else {
                    EffRankStudyConfig::default()
                };
                let cfg = EffRankStudyConfig::from_flat_over(base, &flat)?;
                let recs = run_effrank_study(&cfg)?;
                write_records(&args.output, &recs)?;
                for t in effrank_trends(&recs) {
                    eprintln!(
                        "p={}: spearman={} max r_eff={:.3} unattained={}",
                        t.p,
                        t.spearman.map_or("n/a".into(), |s| format!("{s:.3}")),
                        t.max_r_eff,
                        t.unattained
                    );
                    if t.unattained > 0 {
                        m.warnings.push(format!("p={}: {} cell(s) with unattainable ratio", t.p, t.unattained));
                    }
                }
            }
            StudyKind::Scaling => {
                let base = if args.full_scale {
                    ErrorScalingConfig::full_scale()
                } else {
                    ErrorScalingConfig::default()
                };
                let cfg = ErrorScalingConfig::from_flat_over(base, &flat)?;
                let recs = run_error_scaling_study(&cfg)?;
                write_records(&args.output, &recs)?;
                let failed = recs.iter().filter(|r| !r.converged).count();
                if failed > 0 {
                    m.warnings.push(format!("{failed} cell(s) did not converge"));
                }
                match (fit_loglog_slope(&recs), collapse_band(&recs, 5.0)) {
                    (Ok(fit), Ok(band)) => {
                        eprintln!("slope={:.4} intercept band at t=5: {:.3}", fit.slope, band.band)
                    }
                    _ => m.warnings.push("not enough converged cells for a log-log fit".into()),
                }
            }
            StudyKind::Tune => {
                let cfg = ErrorScalingConfig::from_flat(&flat)?;
                let result = tune_error_scaling(&cfg)?;
                write_json(&args.output, &result)?;
                eprintln!("best ca={} cb={} mean error={:.4}", result.ca, result.cb, result.mean_error);
            }
        }
        m.outputs.push(args.output.clone());
        Ok(())
    })
}

pub fn plot(args: &PlotArgs, seed: u64) -> CliResult<()> {
    let x: PlotField = args.x.parse()?;
    let y: PlotField = args.y.parse()?;
    let records = read_records(&args.input)?;
    let manifest = RunManifest::new("plot", None, seed);
    with_manifest(&args.output.with_extension("manifest.json"), manifest, |m| {
        let summary = emit_scatter_svg(&records, x, y, args.log, args.reference, &args.output)?;
        m.outputs.push(summary.svg_path.clone());
        m.outputs.push(summary.dat_path.clone());
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
        m.warnings.extend(summary.warnings);
        println!("{} point(s) plotted, {} excluded", summary.included, summary.excluded);
        Ok(())
    })
}
