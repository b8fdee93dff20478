//! One function per subcommand. Each writes its files into the output
//! directory after the manifest is already on disk.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bandedge::cheby::{hutchinson_trace, nb_moment_traces_with_budget};
use bandedge::circulant::{walk_asymptotics, CirculantGraph, ExactWalker, FourierWalk};
use bandedge::edge::{
    eigenvalues_with, ensemble_run, lambda_grid, median, EigenOptions, EigenRoute, EnsembleConfig, Regime,
};
use bandedge::fmt_f64;
use bandedge::paths::{
    cumulant_t_with_budget, diagram_census_with_budget, exhaustive_moment_average, joint_moment_paths_with_budget,
    KPathSpec, PathBudget,
};
use bandedge::sampler::{sample_band_matrix, validate, BandMatrix, BandParams, SeedSpec, Symmetry};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Settings;
use crate::failure::{Failure, FailureKind};

pub fn run(s: &Settings, out: &Path) -> Result<(), Failure> {
    match s.command {
        "walk" => walk(s, out),
        "moments" => moments(s, out),
        "oracle" => oracle(s, out),
        "edge" => edge(s, out),
        "norm" => norm(s, out),
        "validate" => validate_cmd(s, out),
        other => Err(Failure::config(format!("unknown subcommand {other:?}"))),
    }
}

/// The master seed, for commands that have one.
pub fn master_seed(s: &Settings) -> Result<Option<u64>, Failure> {
    s.get_opt("seed")
}

fn create(out: &Path, name: &str) -> Result<(BufWriter<File>, PathBuf), Failure> {
    let path = out.join(name);
    let file = File::create(&path).map_err(|e| Failure::new(FailureKind::Io, format!("{}: {e}", path.display())))?;
    Ok((BufWriter::new(file), path))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), Failure> {
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json(out: &Path, name: &str, value: &Value) -> Result<(), Failure> {
    let (mut w, path) = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::new(FailureKind::Io, e.to_string()))?;
    writeln!(w)?;
    finish(w, &path)
}

fn symmetry(s: &Settings) -> Result<Symmetry, Failure> {
    let beta: u8 = s.get("beta")?;
    Symmetry::from_beta(beta).map_err(|e| s.invalid("beta", e.to_string()))
}

fn params_with(s: &Settings, w: usize) -> Result<BandParams, Failure> {
    BandParams::new(s.get("n-sites")?, w, symmetry(s)?).map_err(|e| s.invalid("w", e.to_string()))
}

fn params(s: &Settings) -> Result<BandParams, Failure> {
    params_with(s, s.get("w")?)
}

fn positive(s: &Settings, name: &str) -> Result<u64, Failure> {
    let v: u64 = s.get(name)?;
    if v == 0 {
        return Err(s.invalid(name, format!("--{name} must be positive")));
    }
    Ok(v)
}

fn eigen_options(s: &Settings) -> Result<EigenOptions, Failure> {
    let route = match s.get::<String>("route")?.as_str() {
        "auto" => EigenRoute::Auto,
        "banded" => EigenRoute::Banded,
        "dense" => EigenRoute::Dense,
        other => return Err(s.invalid("route", format!("unknown route {other:?}"))),
    };
    Ok(EigenOptions {
        max_sites: s.get("eigen-budget")?,
        route,
    })
}

fn json_int(v: i128) -> Value {
    match (i64::try_from(v), u64::try_from(v)) {
        (Ok(x), _) => json!(x),
        (_, Ok(x)) => json!(x),
        _ => json!(v.to_string()),
    }
}

/// `a / b` rounded to `f64`, for `b > 0`.
fn ratio_to_f64(a: &BigUint, b: &BigUint) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    // Keep at least 64 quotient bits.
    let shift = b.bits() as i64 - a.bits() as i64 + 64;
    let q = if shift >= 0 {
        (a << shift as u64) / b
    } else {
        a / (b << (-shift) as u64)
    };
    let mut x = q.to_f64().unwrap_or(f64::INFINITY);
    let mut e = -shift;
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        x *= 2f64.powi(step as i32);
        e -= step;
    }
    x
}

fn walk(s: &Settings, out: &Path) -> Result<(), Failure> {
    let n_sites: usize = s.get("n-sites")?;
    let graph = CirculantGraph::new(n_sites, s.get("w")?).map_err(|e| s.invalid("w", e.to_string()))?;
    let mut lengths = s.list("lengths")?;
    lengths.sort_unstable();
    lengths.dedup();
    let displacements: Vec<usize> = match s.list_opt("r")? {
        Some(rs) => rs
            .into_iter()
            .map(|r| {
                usize::try_from(r)
                    .ok()
                    .filter(|&r| r < n_sites)
                    .ok_or_else(|| s.invalid("r", format!("displacement {r} is not below N = {n_sites}")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..n_sites).collect(),
    };
    let skip_exact = s.flag("skip-exact")?;
    let budget: u128 = s.get("dp-budget")?;
    let longest = *lengths.last().expect("nonempty list");
    if !skip_exact && n_sites as u128 * longest as u128 > budget {
        return Err(Failure::new(
            FailureKind::Budget,
            format!(
                "exact walk count needs N·n = {} > dp-budget {budget}; raise --dp-budget or pass --skip-exact",
                n_sites as u128 * longest as u128
            ),
        ));
    }

    let (mut w, path) = create(out, "walk.csv")?;
    writeln!(w, "n,R,count_exact,count_fourier,gaussian,uniform,upper_bound")?;
    let steps = BigUint::from(2 * graph.half_bandwidth());
    let mut walker = (!skip_exact).then(|| ExactWalker::new(&graph));
    for &n in &lengths {
        let exact = match walker.as_mut() {
            Some(walker) => {
                while walker.steps() < n {
                    walker.step();
                }
                let total = steps.pow(n as u32);
                Some(
                    displacements
                        .iter()
                        .map(|&r| ratio_to_f64(&walker.counts()[r], &total))
                        .collect::<Vec<_>>(),
                )
            }
            None => None,
        };
        let fourier = FourierWalk::new(&graph, n);
        for (i, &r) in displacements.iter().enumerate() {
            let a = walk_asymptotics(&graph, n, r as i64);
            let exact = exact.as_ref().map(|e| fmt_f64(e[i])).unwrap_or_default();
            writeln!(
                w,
                "{n},{r},{exact},{},{},{},{}",
                fmt_f64(fourier.normalized_count(r as i64)),
                fmt_f64(a.gaussian),
                fmt_f64(a.uniform),
                fmt_f64(a.upper_bound)
            )?;
        }
    }
    finish(w, &path)
}

fn moments(s: &Settings, out: &Path) -> Result<(), Failure> {
    let params = params(s)?;
    let n_max: usize = s.get("max-length")?;
    if n_max == 0 {
        return Err(s.invalid("max-length", "--max-length must be positive"));
    }
    let replicates = positive(s, "replicates")?;
    let seed: u64 = s.get("seed")?;
    let budget: usize = s.get("trace-budget")?;
    let probes: usize = s.get("probes")?;
    let method = match s.get::<String>("method")?.as_str() {
        "auto" if params.n_sites() <= budget => "exact",
        "auto" | "hutchinson" => "hutchinson",
        "exact" => "exact",
        other => return Err(s.invalid("method", format!("unknown method {other:?}"))),
    };
    if method == "hutchinson" && probes < 2 {
        return Err(s.invalid("probes", "--probes must be at least 2"));
    }

    // Per replicate: (trace, probe standard error) for n = 1..=n_max.
    let per_replicate = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let seed = SeedSpec::new(seed, r);
            let h = sample_band_matrix(&params, &seed);
            if method == "exact" {
                let t = nb_moment_traces_with_budget(&h, n_max, budget)?;
                Ok(t[1..].iter().map(|&x| (x, 0.0)).collect::<Vec<_>>())
            } else {
                (1..=n_max)
                    .map(|n| hutchinson_trace(&h, n, probes, &seed).map(|e| (e.estimate, e.std_error)))
                    .collect()
            }
        })
        .collect::<bandedge::Result<Vec<Vec<(f64, f64)>>>>()?;

    let (mut w, path) = create(out, "moments.csv")?;
    writeln!(w, "n,trace_mean,trace_std_error,method,replicates")?;
    let m = replicates as f64;
    for n in 1..=n_max {
        let xs: Vec<(f64, f64)> = per_replicate.iter().map(|row| row[n - 1]).collect();
        let mean = xs.iter().map(|x| x.0).sum::<f64>() / m;
        let std_error = if replicates > 1 {
            (xs.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
        } else {
            xs[0].1
        };
        writeln!(w, "{n},{},{},{method},{replicates}", fmt_f64(mean), fmt_f64(std_error))?;
    }
    finish(w, &path)
}

fn oracle(s: &Settings, out: &Path) -> Result<(), Failure> {
    let params = params(s)?;
    let lengths: Vec<usize> = s.list("lengths")?.into_iter().map(|n| n as usize).collect();
    let spec = KPathSpec::new(lengths, params.symmetry()).map_err(|e| s.invalid("lengths", e.to_string()))?;
    let budget = PathBudget {
        max_total_length: s.get("max-total-length")?,
        max_sites: s.get("max-sites")?,
        max_paths: s.get("max-paths")?,
    };
    let check = s.flag("check-exhaustive")?;
    if check && params.symmetry() != Symmetry::Signs {
        return Err(s.invalid(
            "check-exhaustive",
            "the exhaustive check enumerates sign matrices and needs beta = 1",
        ));
    }

    let joint = joint_moment_paths_with_budget(&params, &spec, &budget)?;
    let cumulant = cumulant_t_with_budget(&params, &spec, &budget)?;
    let census = diagram_census_with_budget(&params, &spec, &budget)?;
    let mut report = json!({
        "params": {
            "n_sites": params.n_sites(),
            "w": params.half_bandwidth(),
            "beta": params.symmetry().beta(),
        },
        "lengths": spec.lengths(),
        "joint_moment": json_int(joint as i128),
        "cumulant": json_int(cumulant),
        "diagram_census": census
            .iter()
            .map(|(s, c)| json!({ "s": s, "count": json_int(*c as i128) }))
            .collect::<Vec<_>>(),
    });
    let mut agrees = true;
    if check {
        let avg = exhaustive_moment_average(&params, spec.lengths())?;
        let integer = avg.as_integer();
        agrees = integer == Some(joint as i128);
        report["exhaustive"] = json!({
            "joint_moment": integer.map(json_int).unwrap_or_else(|| json!(avg.as_f64())),
            "matrices": avg.matrices,
            "agrees": agrees,
        });
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    write_json(out, "oracle.json", &report)?;
    if !agrees {
        return Err(Failure::new(
            FailureKind::Numeric,
            "path count and exhaustive average disagree",
        ));
    }
    Ok(())
}

fn edge(s: &Settings, out: &Path) -> Result<(), Failure> {
    let params = params(s)?;
    let regime = match s.get::<String>("regime")?.as_str() {
        "rmt" => Regime::Rmt,
        "poisson" => Regime::Poisson,
        other => return Err(s.invalid("regime", format!("unknown regime {other:?}"))),
    };
    let grid = lambda_grid(s.get("lambda-start")?, s.get("lambda-stop")?, s.get("lambda-count")?)
        .map_err(|e| s.invalid("lambda-count", e.to_string()))?;
    let config = EnsembleConfig {
        params,
        replicates: positive(s, "replicates")?,
        master_seed: s.get("seed")?,
        regime,
        lambda_grid: grid,
        eigen: eigen_options(s)?,
    };
    let summary = ensemble_run(&config)?;

    let (mut w, path) = create(out, "extremes.csv")?;
    writeln!(w, "replicate,alpha_max,alpha_min,scaled_right,scaled_left,norm_ratio")?;
    for i in 0..summary.alpha_max.len() {
        writeln!(
            w,
            "{i},{},{},{},{},{}",
            fmt_f64(summary.alpha_max[i]),
            fmt_f64(summary.alpha_min[i]),
            fmt_f64(summary.scaled_max_samples[i]),
            fmt_f64(summary.scaled_min_samples[i]),
            fmt_f64(summary.norm_ratios[i])
        )?;
    }
    finish(w, &path)?;

    let (mut w, path) = create(out, "curves.csv")?;
    writeln!(w, "lambda,sigma_R_mean,sigma_L_mean,sigma_R_std")?;
    for (i, lambda) in summary.mean_curve_r.lambda_grid.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(*lambda),
            fmt_f64(summary.mean_curve_r.values[i]),
            fmt_f64(summary.mean_curve_l.values[i]),
            fmt_f64(summary.std_curve_r[i])
        )?;
    }
    finish(w, &path)
}

fn norm(s: &Settings, out: &Path) -> Result<(), Failure> {
    let ws = s.list("ws")?;
    let replicates = positive(s, "replicates")?;
    let seed: u64 = s.get("seed")?;
    let opts = eigen_options(s)?;
    let all_params = ws
        .iter()
        .map(|&w| params_with(s, w as usize).map_err(|f| f.on_field("ws")))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..all_params.len())
        .flat_map(|i| (0..replicates).map(move |r| (i, r)))
        .collect();
    let extremes = jobs
        .par_iter()
        .map(|&(i, r)| {
            let h = sample_band_matrix(&all_params[i], &SeedSpec::new(seed, r));
            let ev = eigenvalues_with(&h, &opts)?;
            Ok((ev[ev.len() - 1], ev[0]))
        })
        .collect::<bandedge::Result<Vec<(f64, f64)>>>()?;

    let (mut w, path) = create(out, "norm.csv")?;
    writeln!(w, "w,replicate,alpha_max,alpha_min,norm_ratio")?;
    for (&(i, r), &(hi, lo)) in jobs.iter().zip(&extremes) {
        let width = all_params[i].half_bandwidth();
        writeln!(
            w,
            "{width},{r},{},{},{}",
            fmt_f64(hi),
            fmt_f64(lo),
            fmt_f64(hi.abs().max(lo.abs()))
        )?;
    }
    finish(w, &path)?;
    for (i, p) in all_params.iter().enumerate() {
        let ratios: Vec<f64> = extremes[i * replicates as usize..(i + 1) * replicates as usize]
            .iter()
            .map(|(hi, lo)| hi.abs().max(lo.abs()))
            .collect();
        println!(
            "W = {}: median norm ratio {}",
            p.half_bandwidth(),
            fmt_f64(median(&ratios)?)
        );
    }
    Ok(())
}

fn validate_cmd(s: &Settings, out: &Path) -> Result<(), Failure> {
    let params = params(s)?;
    let h = match s.path_opt("matrix") {
        Some(file) => {
            let f = File::open(file).map_err(|e| s.invalid("matrix", format!("{}: {e}", file.display())))?;
            BandMatrix::read_csv(params, BufReader::new(f))?
        }
        None => {
            let h = sample_band_matrix(&params, &SeedSpec::new(s.get("seed")?, 0));
            let (mut w, path) = create(out, "matrix.csv")?;
            h.write_csv(&mut w)?;
            finish(w, &path)?;
            h
        }
    };
    let violations: Vec<String> = validate(&h).iter().map(ToString::to_string).collect();
    let report = json!({
        "valid": violations.is_empty(),
        "entries": h.entries().len(),
        "violations": violations,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    write_json(out, "validate.json", &report)?;
    if !violations.is_empty() {
        return Err(Failure::new(
            FailureKind::InvalidMatrix,
            format!("{} invariant violation(s)", violations.len()),
        ));
    }
    Ok(())
}
