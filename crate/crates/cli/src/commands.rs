use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fscd::data::{
    aggregate_gw, aggregate_same_second, clean, descriptive_stats, read_durations, read_ticks, to_durations, write_durations,
    write_ticks, DescriptiveStats,
};
use fscd::density::ClusterLaw;
use fscd::diagnostics::{
    classification_summary, diurnal_curve, half_life_summary, probability_histogram, shape_curves, summarize_series, Summary,
    SPAGHETTI,
};
use fscd::gir::{run_gir, GirConfig};
use fscd::mcmc::store::{ClassificationTable, DrawTable};
use fscd::mcmc::{adapt_and_run, RunOutput, Sampler};
use fscd::model::{DurationData, Dynamics, ModelParams};
use fscd::priors::{sample_prior, ModelConfig, ModelVariant};
use fscd::synthetic::{desk_truth, simulate_desk, ticks_from_durations};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::{self, RunConfig};
use crate::manifest::RunManifest;
use crate::{Aggregation, CliError, Command, Layers, ModelArg, TruthArg, VariantArg};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Clean {
            input,
            output,
            layers,
            rule,
        } => cmd_clean(&input, &output, &layers, rule),
        Command::Simulate {
            output,
            layers,
            days,
            truth,
            seed,
            ticks,
        } => cmd_simulate(&output, &layers, days, truth, seed, ticks),
        Command::Fit {
            inputs,
            output,
            layers,
            model,
            discrete,
            j,
            sweeps,
            burnin,
            seed,
            chains,
        } => cmd_fit(
            &inputs,
            &output,
            &layers,
            FitFlags {
                model,
                discrete,
                j,
                sweeps,
                burnin,
                seed,
                chains,
            },
        ),
        Command::Gir {
            variant,
            sweeps,
            seed,
            output,
            tau_dof_bias,
        } => cmd_gir(variant, sweeps, seed, tau_dof_bias, &output),
        Command::Summarize {
            draws,
            output,
            config,
            eps_max,
            points,
        } => cmd_summarize(&draws, &output, config.as_deref(), eps_max, points),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> fscd::Result<()>) -> Result<PathBuf, CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| CliError::in_file(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn manifest_for(command: &str, layers: &Layers, cfg: &RunConfig) -> RunManifest {
    let mut m = RunManifest::new(command).with_config(&cfg.effective);
    m.preset = Some(layers.preset.clone());
    m.config_path = layers.config.as_ref().map(|p| p.display().to_string());
    m
}

fn stats_table(rows: &[(&str, DescriptiveStats)]) -> String {
    let mut out = format!("sample\t{}\n", DescriptiveStats::HEADER.join("\t"));
    for (name, s) in rows {
        out.push_str(&format!("{name}\t{}\n", s.to_row()));
    }
    out
}

fn cmd_clean(input: &Path, output: &Path, layers: &Layers, rule: Option<Aggregation>) -> Result<(), CliError> {
    let mut over = toml::Table::new();
    if let Some(r) = rule {
        let name = match r {
            Aggregation::None => "none",
            Aggregation::SameSecond => "same-second",
            Aggregation::Gw => "gw",
        };
        config::set(&mut over, "clean", "rule", name);
    }
    let cfg = config::load(&layers.preset, layers.config.as_deref(), over)?;
    let clean_cfg = cfg.clean.resolve()?;
    let ticks = read_ticks(open(input)?, &cfg.columns.resolve()).map_err(|e| CliError::in_file(input, e))?;
    let cleaned = clean(&ticks, &clean_cfg)?;
    let raw = to_durations(&cleaned)?;
    let rule = cfg.clean.rule.as_deref().unwrap_or("none");
    let durations = match rule {
        "none" => raw.clone(),
        "same-second" => aggregate_same_second(&raw)?,
        "gw" => aggregate_gw(&cleaned)?,
        other => return Err(CliError::config(format!("unknown aggregation rule `{other}`"))),
    };
    create_dir(output)?;
    let mut rows = vec![("cleaned", descriptive_stats(&raw))];
    if rule != "none" {
        rows.push((rule, descriptive_stats(&durations)));
    }
    let outputs = vec![
        write_file(&output.join("ticks_clean.csv"), |w| write_ticks(w, &cleaned))?,
        write_file(&output.join("durations.tsv"), |w| write_durations(w, &durations))?,
        write_text(&output.join("stats.tsv"), &stats_table(&rows))?,
    ];
    eprintln!("{} of {} records kept, {} durations", cleaned.len(), ticks.len(), durations.n_durations());
    let mut m = manifest_for("clean", layers, &cfg);
    m.add_inputs(&[input.to_path_buf()])?;
    m.finish(output, &outputs)?;
    Ok(())
}

fn params_json(p: &ModelParams) -> serde_json::Value {
    let cluster = match p.cluster {
        Some(ClusterLaw::Discrete { zeta }) => serde_json::json!({ "zeta": zeta }),
        Some(ClusterLaw::Continuous { lambda1, lambda2, pi }) => {
            serde_json::json!({ "lambda_1": lambda1, "lambda_2": lambda2, "pi": pi })
        }
        None => serde_json::Value::Null,
    };
    serde_json::json!({
        "phi": p.phi,
        "sigma": p.sigma,
        "delta": p.delta,
        "tau": p.tau,
        "beta": p.beta.as_slice(),
        "xi00": p.xi00,
        "xi11": p.xi11,
        "cluster": cluster,
    })
}

fn cmd_simulate(output: &Path, layers: &Layers, days: usize, truth: TruthArg, seed: u64, ticks: bool) -> Result<(), CliError> {
    if days == 0 {
        return Err(CliError::config("--days must be positive"));
    }
    let cfg = config::load(&layers.preset, layers.config.as_deref(), toml::Table::new())?;
    let shape = &cfg.model.shape;
    let basis = shape.basis()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let params = match truth {
        TruthArg::Desk => {
            if !shape.discrete {
                return Err(CliError::conflict("the desk truth is a second-precision model; use --truth prior"));
            }
            let mut p = desk_truth(&basis, shape.j)?;
            if shape.model == ModelVariant::Regular {
                p.cluster = None;
            }
            p
        }
        TruthArg::Prior => sample_prior(&cfg.model.prior, shape, &mut rng)?,
    };
    let (data, path) = if shape.discrete {
        simulate_desk(&params, days, &basis, &mut rng)?
    } else {
        fscd::model::simulate(&params, days, &basis, Dynamics::Ou, fscd::model::DayLength::UntilClose, false, &mut rng)?
    };
    create_dir(output)?;
    let mut outputs = Vec::new();
    for (d, day) in data.days.iter().enumerate() {
        let one = DurationData::new(vec![day.clone()], data.discrete)?;
        outputs.push(write_file(&output.join(format!("day_{:02}.tsv", d + 1)), |w| write_durations(w, &one))?);
    }
    let mut latent = String::from("day\tindex\ty\ts\tx\n");
    for (d, (day, p)) in data.days.iter().zip(&path.days).enumerate() {
        for (i, y) in day.durations().iter().enumerate() {
            latent.push_str(&format!("{d}\t{i}\t{y:?}\t{}\t{:?}\n", p.s[i], p.x[i]));
        }
    }
    outputs.push(write_text(&output.join("latent.tsv"), &latent)?);
    let truth_text = serde_json::to_string_pretty(&params_json(&params)).expect("parameters serialize");
    outputs.push(write_text(&output.join("truth.json"), &(truth_text + "\n"))?);
    if ticks {
        let records = ticks_from_durations(&data, &mut rng);
        outputs.push(write_file(&output.join("ticks.csv"), |w| write_ticks(w, &records))?);
    }
    let stats = descriptive_stats(&data);
    eprintln!("{} days, {} durations, {:.1}% recorded as 0 s", days, stats.trades, stats.share[0]);
    let mut m = manifest_for("simulate", layers, &cfg);
    m.seed = Some(seed);
    m.finish(output, &outputs)?;
    Ok(())
}

struct FitFlags {
    model: Option<ModelArg>,
    discrete: bool,
    j: Option<usize>,
    sweeps: Option<usize>,
    burnin: Option<usize>,
    seed: Option<u64>,
    chains: usize,
}

fn read_inputs(inputs: &[PathBuf]) -> Result<DurationData, CliError> {
    let mut days = Vec::new();
    let mut discrete = None;
    for path in inputs {
        let data = read_durations(open(path)?).map_err(|e| CliError::in_file(path, e))?;
        if discrete.is_some_and(|d| d != data.discrete) {
            return Err(CliError::conflict(format!(
                "{} mixes second-precision and continuous durations with earlier inputs",
                path.display()
            )));
        }
        discrete = Some(data.discrete);
        days.extend(data.days);
    }
    Ok(DurationData::new(days, discrete.unwrap_or(true))?)
}

fn cmd_fit(inputs: &[PathBuf], output: &Path, layers: &Layers, flags: FitFlags) -> Result<(), CliError> {
    if flags.chains == 0 {
        return Err(CliError::config("--chains must be positive"));
    }
    let data = read_inputs(inputs)?;
    if flags.discrete && !data.discrete {
        return Err(CliError::conflict("--discrete given but the durations are not recorded to the second"));
    }
    let mut over = toml::Table::new();
    config::set(&mut over, "shape", "discrete", data.discrete);
    if let Some(m) = flags.model {
        config::set(&mut over, "shape", "model", if m == ModelArg::All { "all" } else { "regular" });
    }
    if let Some(j) = flags.j {
        config::set(&mut over, "shape", "J", j as i64);
    }
    if let Some(s) = flags.sweeps {
        config::set(&mut over, "sampler", "sweeps", s as i64);
    }
    if let Some(b) = flags.burnin {
        config::set(&mut over, "sampler", "burn_in", b as i64);
    }
    if let Some(s) = flags.seed {
        config::set(&mut over, "sampler", "seed", s as i64);
    }
    let cfg = config::load(&layers.preset, layers.config.as_deref(), over)?;
    if cfg.model.shape.model == ModelVariant::Regular && cfg.model.prior.has_cluster_priors() {
        eprintln!("warning: regular-duration model; cluster and indicator priors are ignored");
    }
    let sampler_cfg = cfg.sampler.resolve();
    let sampler = Sampler::from_config(data, &cfg.model, Dynamics::Ou)?;
    let results: Vec<fscd::Result<RunOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..flags.chains)
            .map(|c| {
                let mut sampler = sampler.clone();
                let mut chain_cfg = sampler_cfg.clone();
                chain_cfg.seed = sampler_cfg.seed + c as u64;
                scope.spawn(move || {
                    let mut rng = ChaCha12Rng::seed_from_u64(chain_cfg.seed);
                    let state = sampler.initial_state(sampler.initial_params()?)?;
                    adapt_and_run(&mut sampler, &chain_cfg, state, &mut rng)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    create_dir(output)?;
    let mut effective = cfg.effective.clone();
    config::set(&mut effective, "sampler", "seed", sampler_cfg.seed as i64);
    let mut outputs = vec![write_text(
        &output.join("config.toml"),
        &toml::to_string(&effective).map_err(|e| CliError::config(e.to_string()))?,
    )?];
    for (c, result) in results.into_iter().enumerate() {
        let run = result?;
        let suffix = if flags.chains == 1 { String::new() } else { format!(".{}", c + 1) };
        if let Some(w) = &run.adaptation_warning {
            eprintln!("warning: chain {}: {w}", c + 1);
        }
        outputs.push(write_file(&output.join(format!("draws{suffix}.tsv")), |w| run.draws.write(w))?);
        if let Some(table) = &run.classification {
            outputs.push(write_file(&output.join(format!("classification{suffix}.tsv")), |w| table.write(w))?);
        }
    }
    let mut m = manifest_for("fit", layers, &cfg);
    m.seed = Some(sampler_cfg.seed);
    m.add_inputs(inputs)?;
    m.finish(output, &outputs)?;
    Ok(())
}

fn cmd_gir(variant: VariantArg, sweeps: usize, seed: u64, tau_dof_bias: f64, output: &Path) -> Result<(), CliError> {
    let mut cfg = GirConfig::standard(variant == VariantArg::Discrete, sweeps)?;
    cfg.tau_dof_bias = tau_dof_bias;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let report = run_gir(&cfg, &mut rng)?;
    create_dir(output)?;
    let text = report.to_text();
    print!("{text}");
    let outputs = vec![write_text(&output.join("gir_report.txt"), &text)?];
    let mut m = RunManifest::new("gir");
    m.preset = Some("gir".into());
    m.seed = Some(seed);
    m.config = serde_json::json!({
        "variant": if report.discrete { "discrete" } else { "continuous" },
        "sweeps": sweeps,
        "n": cfg.n,
        "days": cfg.days,
        "tau_dof_bias": tau_dof_bias,
        "model": toml::from_str::<toml::Table>(&cfg.model.to_toml()).ok(),
    });
    m.finish(output, &outputs)?;
    Ok(())
}

/// Model configuration of a fit from its `config.toml`.
fn fit_config(path: &Path) -> Result<ModelConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    for key in ["sampler", "clean", "columns"] {
        table.remove(key);
    }
    let text = toml::to_string(&table).map_err(|e| CliError::config(e.to_string()))?;
    ModelConfig::from_layers(&[&text]).map_err(|e| CliError::in_file(path, e))
}

fn summary_rows(draws: &DrawTable) -> Result<Vec<(String, Summary)>, CliError> {
    let mut rows = Vec::new();
    for name in &draws.names {
        if name.starts_with("acc_") {
            continue;
        }
        let column = draws.column(name).expect("named column");
        rows.push((name.clone(), summarize_series(&column)?));
        if name == "phi" {
            rows.push(("half_life".into(), half_life_summary(&column)?));
        }
    }
    Ok(rows)
}

fn format_summary(rows: &[(String, Summary)], rates: &[(String, f64)]) -> (String, String) {
    let mut tsv = String::from("parameter\tmean\tsd\tq025\tq975\tnse\trne\n");
    let mut text = format!(
        "{:>10} {:>12} {:>12} {:>12} {:>12} {:>10} {:>6}\n",
        "parameter", "mean", "sd", "2.5%", "97.5%", "nse", "rne"
    );
    for (name, s) in rows {
        let rne = s.rne.map_or("-".to_string(), |r| format!("{r:.3}"));
        tsv.push_str(&format!("{name}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{rne}\n", s.mean, s.sd, s.q025, s.q975, s.nse));
        text.push_str(&format!(
            "{name:>10} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>10.2e} {rne:>6}\n",
            s.mean, s.sd, s.q025, s.q975, s.nse
        ));
    }
    for (name, r) in rates {
        text.push_str(&format!("# acceptance {name}: {r:.3}\n"));
    }
    (tsv, text)
}

fn cmd_summarize(draws_path: &Path, output: &Path, config_path: Option<&Path>, eps_max: f64, points: usize) -> Result<(), CliError> {
    if points < 2 || !(eps_max > 0.0) {
        return Err(CliError::config("need at least 2 grid points and a positive --eps-max"));
    }
    let dir = draws_path.parent().unwrap_or(Path::new("."));
    let config_path = match config_path {
        Some(p) => config::locate(p)?,
        None => dir.join("config.toml"),
    };
    let model = fit_config(&config_path)?;
    let basis = model.shape.basis()?;
    let draws = DrawTable::read(open(draws_path)?).map_err(|e| CliError::in_file(draws_path, e))?;
    if draws.is_empty() {
        return Err(CliError::from(fscd::Error::Degenerate("draw file holds no rows".into())));
    }
    let rates: Vec<(String, f64)> = draws
        .names
        .iter()
        .filter_map(|n| n.strip_prefix("acc_").map(|s| (s.to_string(), fscd::diagnostics::mean(&draws.column(n).unwrap()))))
        .collect();
    let rows = summary_rows(&draws)?;
    let (tsv, text) = format_summary(&rows, &rates);
    create_dir(output)?;
    let mut outputs = vec![
        write_text(&output.join("summary.tsv"), &tsv)?,
        write_text(&output.join("summary.txt"), &text)?,
    ];
    let diurnal = diurnal_curve(&basis, &draws.group("delta_"), points, SPAGHETTI)?;
    let (density, hazard) = shape_curves(&draws.group("beta_"), eps_max, points, SPAGHETTI)?;
    outputs.push(write_text(&output.join("diurnal.tsv"), &diurnal.to_tsv())?);
    outputs.push(write_text(&output.join("density.tsv"), &density.to_tsv())?);
    outputs.push(write_text(&output.join("hazard.tsv"), &hazard.to_tsv())?);

    let mut inputs = vec![draws_path.to_path_buf(), config_path.clone()];
    let file_name = draws_path.file_name().and_then(|n| n.to_str()).unwrap_or("draws.tsv");
    let class_path = dir.join(file_name.replacen("draws", "classification", 1));
    if class_path.exists() && class_path != draws_path {
        let table = ClassificationTable::read(open(&class_path)?).map_err(|e| CliError::in_file(&class_path, e))?;
        inputs.push(class_path);
        let ys: Vec<f64> = table.rows.iter().map(|r| r.2).collect();
        let hits: Vec<u64> = table.rows.iter().map(|r| r.3).collect();
        let zeros = draws.column("reg0").unwrap_or_default();
        let ones = draws.column("reg1").unwrap_or_default();
        let summary = classification_summary(&ys, &hits, table.draws, &zeros, &ones)?;
        let mut text = String::from("recorded\tcount\tregular_mean\tregular_sd\tq025\tq975\n");
        for (label, n, s) in [("0s", summary.zeros_recorded, &summary.zeros), ("1s", summary.ones_recorded, &summary.ones)] {
            text.push_str(&format!("{label}\t{n}\t{:.2}\t{:.2}\t{:.1}\t{:.1}\n", s.mean, s.sd, s.q025, s.q975));
        }
        outputs.push(write_text(&output.join("classification.txt"), &text)?);
        let bins = 20;
        let mut hist = String::from("lo\thi\tcount_0s\tcount_1s\n");
        let pick = |v: f64| -> Vec<f64> {
            ys.iter()
                .zip(&summary.prob_regular)
                .filter(|(y, _)| **y == v)
                .map(|(_, p)| *p)
                .collect()
        };
        let (h0, h1) = (probability_histogram(&pick(0.0), bins), probability_histogram(&pick(1.0), bins));
        for k in 0..bins {
            hist.push_str(&format!(
                "{:.2}\t{:.2}\t{}\t{}\n",
                k as f64 / bins as f64,
                (k + 1) as f64 / bins as f64,
                h0[k],
                h1[k]
            ));
        }
        outputs.push(write_text(&output.join("regular_probability.tsv"), &hist)?);
    }
    print!("{text}");
    let mut m = RunManifest::new("summarize");
    m.config_path = Some(config_path.display().to_string());
    m.add_inputs(&inputs)?;
    m.finish(output, &outputs)?;
    Ok(())
}
