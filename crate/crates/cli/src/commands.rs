use std::fmt::{Display, Write as _};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use miscale::analysis::{
    classify, estimate, fit, interior_window, rescale_align, shape_collapse_rms, sweep, Abscissa, CurvePoint,
    EstimatorConfig, FitResult, ScalingCurve, ScalingModel,
};
use miscale::autoregressive::{ArConfig, Ordering};
use miscale::data::{
    discretize, ingest_embedded_text, ingest_idx, make_partition, read_raw, write_raw, Dataset, DiscretizationSpec,
    Family, GridShape,
};
use miscale::diffnet::gradcheck_suite;
use miscale::knn::KnnConfig;
use miscale::mine::{make_score_net, mine_train, MineConfig, ScoreKind};
use miscale::synthetic::{
    exact_gaussian_curve, exact_pair_mi, sample_gaussian, sample_gaussian_grid, sample_matching, sample_pairs,
    GaussianSpec, RandomPairSpec,
};
use miscale::Error;

use crate::{
    AbscissaArg, Cli, Command, EstimateArgs, EstimatorArgs, FitArgs, GaussArgs, GradcheckArgs, IngestArgs, Method,
    RandomPairArgs, ReportArgs, ScanArgs, Score, Synth,
};
use crate::Failure;

type Outcome<T = ()> = Result<T, Failure>;

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// `<path><suffix>`, e.g. `data.bin` + `.oracle.csv`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(out: Option<&Path>, value: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(runtime)? + "\n";
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_curve(path: &Path, curve: &ScalingCurve) -> Outcome {
    let file = File::create(path).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    curve.write_csv(&mut w).map_err(usage)?;
    w.flush().map_err(usage)
}

fn read_curve(path: &Path) -> Outcome<ScalingCurve> {
    let file = File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    ScalingCurve::read_csv(BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Outcome<Dataset> {
    read_raw(path).map(|(d, _)| d).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn run(cli: &Cli) -> Outcome {
    let config = serde_json::to_value(cli).map_err(runtime)?;
    let log = |msg: &str| {
        if cli.verbose {
            eprintln!("[miscale] {msg}");
        }
    };
    match &cli.command {
        Command::Synth(Synth::Randompair(a)) => synth_pairs(a, config, &log),
        Command::Synth(Synth::Gauss(a)) => synth_gauss(a, config, &log),
        Command::Ingest(a) => ingest(a, config, &log),
        Command::Estimate(a) => estimate_cmd(a, config, &log),
        Command::Scan(a) => scan(a, config, &log),
        Command::Fit(a) => fit_cmd(a, config),
        Command::Report(a) => report(a, config, &log),
        Command::Gradcheck(a) => gradcheck(a, config),
    }
}

fn synth_pairs(a: &RandomPairArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let spec = match a.alpha {
        _ if a.all_to_all => RandomPairSpec::all_to_all(a.sites, a.alphabet),
        Some(alpha) => RandomPairSpec::power_law(a.sites, alpha, a.alphabet),
        None => return Err(usage("--alpha is required unless --all-to-all is given")),
    };
    spec.validate().map_err(usage)?;
    let matching = sample_matching(&spec, a.seed).map_err(usage)?;
    let data = sample_pairs(&matching, a.alphabet, a.samples, a.seed.wrapping_add(1)).map_err(usage)?;
    let points = (0..=a.sites)
        .map(|l| Ok(CurvePoint { l, mi: exact_pair_mi(&matching, a.alphabet, l)?, sigma: 0.0 }))
        .collect::<Result<Vec<_>, Error>>()
        .map_err(usage)?;
    let oracle = ScalingCurve::new(Family::LeftRight, a.sites, "exact_pair", points).map_err(usage)?;
    let metadata = json!({
        "config": config,
        "generator": "randompair",
        "partner": matching.partner(),
    });
    write_raw(&a.out, &data, metadata).map_err(usage)?;
    write_curve(&with_suffix(&a.out, ".oracle.csv"), &oracle)?;
    log(&format!("wrote {} samples of {} sites to {}", data.n(), data.d(), a.out.display()));
    Ok(())
}

fn parse_grid(s: &str) -> Outcome<(usize, usize)> {
    let bad = || usage(format!("grid must look like 16x16, got {s:?}"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

fn synth_gauss(a: &GaussArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let (spec, data, default_family) = if let Some(grid) = &a.grid {
        let (h, w) = parse_grid(grid)?;
        let spec = GaussianSpec::grid_mrf(h, w, a.coupling).map_err(usage)?;
        let data = sample_gaussian_grid(&spec, GridShape::new(h, w, 1), a.samples, a.seed).map_err(usage)?;
        (spec, data, Family::TopBottom)
    } else {
        let spec = match a.chain {
            Some(d) => GaussianSpec::chain(d, a.rho),
            None => GaussianSpec::bivariate(a.rho),
        }
        .map_err(usage)?;
        let data = sample_gaussian(&spec, a.samples, a.seed).map_err(usage)?;
        (spec, data, Family::LeftRight)
    };
    let family = match &a.family {
        Some(f) => f.parse().map_err(usage)?,
        None => default_family,
    };
    let geometry = data.geometry();
    let lmax = family.lmax(&geometry).map_err(usage)?;
    let ls: Vec<usize> = (0..=lmax).collect();
    let oracle = exact_gaussian_curve(&spec, &geometry, family, &ls).map_err(usage)?;
    let mut metadata = json!({ "config": config, "generator": "gauss" });
    if a.grid.is_none() && a.chain.is_none() {
        metadata["exact_mi"] = json!(oracle.points[1].mi);
    }
    write_raw(&a.out, &data, metadata).map_err(usage)?;
    write_curve(&with_suffix(&a.out, ".oracle.csv"), &oracle)?;
    log(&format!("wrote {} samples of dimension {} to {}", data.n(), data.d(), a.out.display()));
    Ok(())
}

fn ingest(a: &IngestArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let mut data = match (&a.idx, &a.corpus, &a.embeddings) {
        (Some(idx), _, _) => ingest_idx(idx, a.limit).map_err(usage)?,
        (None, Some(corpus), Some(emb)) => {
            let d = ingest_embedded_text(corpus, emb, a.seq_len, a.stride).map_err(usage)?;
            match a.limit {
                Some(n) if n < d.n() => d.head(n).map_err(usage)?,
                _ => d,
            }
        }
        _ => return Err(usage("give --idx, or --corpus together with --embeddings")),
    };
    if let Some(bins) = a.bins {
        let spec = DiscretizationSpec::new(bins, a.lo, a.hi).map_err(usage)?;
        data = discretize(&data, &spec).map_err(usage)?;
    }
    write_raw(&a.out, &data, json!({ "config": config })).map_err(usage)?;
    log(&format!("wrote {} samples of dimension {} to {}", data.n(), data.d(), a.out.display()));
    Ok(())
}

fn estimator_config(a: &EstimatorArgs, data: &Dataset) -> Outcome<EstimatorConfig> {
    Ok(match a.method {
        Method::Knn => {
            if a.k == 0 {
                return Err(usage("--k must be at least 1"));
            }
            EstimatorConfig::Knn(KnnConfig {
                k: a.k,
                noise_amplitude: a.noise,
                brute_force_above: a.brute_force_above,
                seed: a.seed,
            })
        }
        Method::Mine => {
            let kind = match a.score {
                Score::Ffnn => ScoreKind::Ffnn,
                Score::Cnn => ScoreKind::Cnn,
            };
            let net = make_score_net(kind, data, a.seed).map_err(usage)?;
            let mut cfg = MineConfig::new(net, a.iterations, a.seed);
            cfg.batch_size = a.batch_size;
            cfg.learning_rate = a.lr.unwrap_or(1e-4);
            cfg.ema_rate = a.ema_rate;
            if let Some(w) = a.eval_window {
                cfg.eval_window = w;
            }
            cfg.validate().map_err(usage)?;
            EstimatorConfig::Mine(cfg)
        }
        Method::Ar => {
            let cfg = ArConfig {
                ordering: Ordering::RasterForward,
                bins: a.bins,
                hidden: a.hidden.clone(),
                batch_size: a.batch_size,
                learning_rate: a.lr.unwrap_or(1e-3),
                epochs: a.epochs,
                rng_seed: a.seed,
                holdout_fraction: a.holdout_fraction,
            };
            cfg.validate().map_err(usage)?;
            EstimatorConfig::Ar(cfg)
        }
    })
}

fn estimate_cmd(a: &EstimateArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let data = load(&a.data)?;
    let family: Family = a.family.parse().map_err(usage)?;
    let geometry = data.geometry();
    let lmax = family.lmax(&geometry).map_err(usage)?;
    let partition = make_partition(family, a.l, &geometry).map_err(usage)?;
    let cfg = estimator_config(&a.estimator, &data)?;
    log(&format!("{} at {} L = {} of {lmax}", cfg.method(), family, a.l));
    let start = Instant::now();
    let result = match (&cfg, &a.trace) {
        (EstimatorConfig::Mine(m), Some(trace_path)) => {
            let outcome = mine_train(&data, &partition, m);
            let trace = match &outcome {
                Ok(t) => Some(t),
                Err(Error::TrainingInstability { trace, .. }) => Some(trace.as_ref()),
                Err(_) => None,
            };
            if let Some(t) = trace {
                let file = File::create(trace_path).map_err(usage)?;
                let mut w = BufWriter::new(file);
                t.write_csv(&mut w).map_err(usage)?;
                w.flush().map_err(usage)?;
            }
            outcome.map(|t| t.estimate)
        }
        _ => estimate(&data, &partition, &cfg),
    };
    let est = result.map_err(runtime)?;
    let value = json!({
        "config": config,
        "partition": {
            "family": family,
            "l": a.l,
            "lmax": lmax,
            "size_a": partition.idx_a.len(),
            "size_b": partition.idx_b.len(),
        },
        "estimate": est,
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    write_json(a.out.as_deref(), &value)
}

/// `start:stop[:step]` (inclusive) or `a,b,c`.
pub fn parse_ls(s: &str, lmax: usize) -> Outcome<Vec<usize>> {
    let bad = || usage(format!("cannot parse cut list {s:?}"));
    let ls: Vec<usize> = if s.contains(':') {
        let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Outcome<_>>()?;
        let (start, stop, step) = match parts[..] {
            [a, b] => (a, b, 1),
            [a, b, c] if c > 0 => (a, b, c),
            _ => return Err(bad()),
        };
        (start..=stop).step_by(step).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Outcome<_>>()?
    };
    if ls.is_empty() {
        return Err(bad());
    }
    if let Some(l) = ls.iter().find(|&&l| l > lmax) {
        return Err(usage(format!("cut {l} exceeds Lmax = {lmax}")));
    }
    Ok(ls)
}

fn scan(a: &ScanArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let data = load(&a.data)?;
    let family: Family = a.family.parse().map_err(usage)?;
    let lmax = family.lmax(&data.geometry()).map_err(usage)?;
    let ls = match &a.ls {
        Some(s) => parse_ls(s, lmax)?,
        None => (0..=lmax).collect(),
    };
    let cfg = estimator_config(&a.estimator, &data)?;
    log(&format!("{} over {} cuts of {}", cfg.method(), ls.len(), family));
    let start = Instant::now();
    let curve = sweep(&data, family, &ls, &cfg).map_err(runtime)?;
    write_curve(&a.out, &curve)?;
    let meta = json!({
        "config": config,
        "family": family,
        "lmax": lmax,
        "method": curve.method,
        "n_points": curve.points.len(),
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    write_json(Some(&with_suffix(&a.out, ".json")), &meta)
}

fn parse_window(s: &str) -> Outcome<(usize, usize)> {
    let bad = || usage(format!("window must look like 2:20, got {s:?}"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn fit_cmd(a: &FitArgs, config: Value) -> Outcome {
    let curve = read_curve(&a.curve)?;
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => interior_window(&curve, a.boundary_fraction).map_err(usage)?,
    };
    let value = match &a.model {
        Some(m) => {
            let model: ScalingModel = m.parse().map_err(usage)?;
            let result = fit(&curve, model, window).map_err(usage)?;
            json!({ "config": config, "fit": result })
        }
        None => {
            if a.window.is_some() {
                return Err(usage("ranking uses the interior window; drop --window or give --model"));
            }
            let ranking = classify(&curve, a.boundary_fraction).map_err(usage)?;
            json!({ "config": config, "window": window, "ranking": ranking })
        }
    };
    write_json(a.out.as_deref(), &value)
}

fn param_list(f: &FitResult) -> String {
    f.params
        .iter()
        .map(|p| format!("{} = {:.4} ± {:.4}", p.name, p.value, p.stderr))
        .collect::<Vec<_>>()
        .join(", ")
}

fn report(a: &ReportArgs, config: Value, log: &dyn Fn(&str)) -> Outcome {
    let curves: Vec<ScalingCurve> = a.curves.iter().map(|p| read_curve(p)).collect::<Outcome<_>>()?;
    let rankings: Vec<Vec<FitResult>> = curves
        .iter()
        .map(|c| classify(c, a.boundary_fraction))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    let verdicts: Vec<ScalingModel> = rankings.iter().map(|r| r[0].model).collect();
    let verdict = verdicts[0];
    let agree = verdicts.iter().all(|&v| v == verdict);

    let stem = a.out.with_extension("");
    let mut md = String::new();
    writeln!(md, "# MI scaling report\n").unwrap();
    writeln!(md, "Verdict: **{verdict}**{}\n", if agree { "" } else { " (curves disagree)" }).unwrap();
    writeln!(md, "| curve | family | Lmax | method | points | best model | gnuplot |").unwrap();
    writeln!(md, "|---|---|---|---|---|---|---|").unwrap();
    for (i, (c, path)) in curves.iter().zip(&a.curves).enumerate() {
        let dat = with_suffix(&stem, &format!(".{i}.dat"));
        let mut w = BufWriter::new(File::create(&dat).map_err(usage)?);
        c.write_gnuplot(&mut w).map_err(usage)?;
        w.flush().map_err(usage)?;
        let dat_name = dat.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {dat_name} |",
            path.display(),
            c.family,
            c.lmax,
            c.method,
            c.points.len(),
            verdicts[i]
        )
        .unwrap();
    }

    for (c, (path, ranking)) in curves.iter().zip(a.curves.iter().zip(&rankings)) {
        writeln!(md, "\n## {}\n", path.display()).unwrap();
        writeln!(md, "| rank | model | parameters | residual RMS | window |").unwrap();
        writeln!(md, "|---|---|---|---|---|").unwrap();
        for (r, f) in ranking.iter().enumerate() {
            writeln!(
                md,
                "| {} | {} | {} | {:.3e} | {}..{} |",
                r + 1,
                f.model,
                param_list(f),
                f.residual_rms,
                f.window.0,
                f.window.1
            )
            .unwrap();
        }
        writeln!(md, "\n| L | I (nats) | σ |\n|---|---|---|").unwrap();
        for p in &c.points {
            writeln!(md, "| {} | {:.6} | {:.6} |", p.l, p.mi, p.sigma).unwrap();
        }
    }

    if curves.len() > 1 {
        let abscissa = match a.abscissa {
            AbscissaArg::Cut => Abscissa::Cut,
            AbscissaArg::Fraction => Abscissa::Fraction,
        };
        let aligned = rescale_align(&curves, abscissa).map_err(usage)?;
        let reference = &rankings[0][0];
        let lmax0 = curves[0].lmax as f64;
        let rms = shape_collapse_rms(&aligned, |x| reference.predict(x * lmax0, lmax0));
        writeln!(md, "\n## Collapse\n").unwrap();
        writeln!(md, "Abscissa: {:?}. Shape: best {} fit of the first curve.\n", a.abscissa, reference.model)
            .unwrap();
        writeln!(md, "| curve | rescale factor |\n|---|---|").unwrap();
        for (c, path) in aligned.iter().zip(&a.curves) {
            writeln!(md, "| {} | {:.6} |", path.display(), c.rescale).unwrap();
        }
        writeln!(md, "\nCollapse RMS: {:.3}% of the peak value.", 100.0 * rms).unwrap();
    }

    let cfg = serde_json::to_string_pretty(&config).map_err(runtime)?;
    writeln!(md, "\n## Configuration\n\n```json\n{cfg}\n```").unwrap();
    fs::write(&a.out, md).map_err(|e| usage(format!("cannot write {}: {e}", a.out.display())))?;
    log(&format!("report with verdict {verdict} written to {}", a.out.display()));
    Ok(())
}

fn gradcheck(a: &GradcheckArgs, config: Value) -> Outcome {
    let reports = gradcheck_suite(a.seed).map_err(runtime)?;
    let passed = reports.iter().all(|r| r.passed);
    write_json(a.out.as_deref(), &json!({ "config": config, "passed": passed, "reports": reports }))?;
    if passed {
        Ok(())
    } else {
        Err(runtime("gradient check failed"))
    }
}
