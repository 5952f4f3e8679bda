// SPDX-License-Identifier: MIT OR Apache-2.0

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use tradenet::counterfactual::{average_by_country, length_sweep, sample_tier, tier_report, virtual_report};
use tradenet::diffusion::write_recommendations_jsonl;
use tradenet::evaluation::sweep;
use tradenet::fitness::{assign_tiers, solve_fitness};
use tradenet::format::fmt_sig;
use tradenet::trade_graph::{build_snapshot, read_exports};
use tradenet::{Algorithm, BipartiteSnapshot, Error, Mode, Tier};

use crate::cache::{self, Cache, Manifest, Provenance};
use crate::config::{RunConfig, YearRange};
use crate::CliError;

/// Writes `header` followed by whatever `body` emits, replacing `name`
/// under the output directory.
fn emit(
    cfg: &RunConfig,
    name: &str,
    header: &str,
    body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let path = cfg.out.join(name);
    let mut buf = header.as_bytes().to_vec();
    body(&mut buf).map_err(|e| CliError::io(&path, e))?;
    std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn algorithm_names(algorithms: &[Algorithm]) -> Vec<&'static str> {
    algorithms.iter().map(|a| a.as_str()).collect()
}

fn diffusion_json(cfg: &RunConfig) -> Value {
    json!({
        "theta": cfg.params.theta,
        "tau": cfg.params.tau,
        "epsilon": cfg.params.epsilon,
    })
}

fn solver_json(cfg: &RunConfig) -> Value {
    json!({
        "max_iter": cfg.solver.max_iter,
        "window": cfg.solver.stability_window,
    })
}

fn provenance(cache: &Cache, mut config: Value) -> Provenance {
    config["threshold"] = json!(cache.manifest.threshold);
    Provenance::new(config, &cache.manifest.input_sha256)
}

fn past_for(
    cache: &Cache,
    cfg: &RunConfig,
    algorithms: &[Algorithm],
    year: i32,
) -> Result<Option<BipartiteSnapshot>, CliError> {
    if algorithms.iter().any(|a| a.needs_past()) {
        Ok(Some(cache.load(year - cfg.params.tau)?))
    } else {
        Ok(None)
    }
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg.require_input()?;
    let years = cfg
        .years
        .ok_or_else(|| CliError::Config("--years is required".into()))?;
    let bytes = std::fs::read(input).map_err(|e| CliError::io(input, e))?;
    let input_sha256 = cache::sha256_hex(&bytes);
    let table =
        read_exports(bytes.as_slice(), years.range()).map_err(|e| CliError::from(e).in_file(input))?;

    std::fs::create_dir_all(&cfg.cache).map_err(|e| CliError::io(&cfg.cache, e))?;
    let mut snapshots = Vec::new();
    let mut absent = Vec::new();
    for year in years.range() {
        match build_snapshot(&table, year, cfg.threshold) {
            Ok(s) => {
                let entry = cache::store(&cfg.cache, &s)?;
                println!(
                    "{year}: {} countries ({} with records), {} products, {} links",
                    entry.countries, entry.raw_countries, entry.products, entry.links
                );
                snapshots.push(entry);
            }
            Err(Error::YearAbsent(_)) => {
                log::warn!("{year}: no export records");
                absent.push(year);
            }
            Err(e) => return Err(e.into()),
        }
    }
    let config = json!({
        "command": "ingest",
        "input": input.display().to_string(),
        "years": years.to_string(),
        "threshold": cfg.threshold,
    });
    let manifest = Manifest {
        provenance: serde_json::to_value(Provenance::new(config, &input_sha256))
            .expect("provenance serializes"),
        format: cache::MANIFEST_FORMAT.into(),
        input_sha256,
        threshold: cfg.threshold,
        snapshots,
        absent,
    };
    cache::write_manifest(&cfg.cache, &manifest)?;
    println!(
        "cached {} snapshots in {}",
        manifest.snapshots.len(),
        cfg.cache.display()
    );
    Ok(())
}

pub fn recommend(cfg: &RunConfig) -> Result<(), CliError> {
    let cache = Cache::open(&cfg.cache)?;
    let year = cfg.require_year()?;
    let current = cache.load(year)?;
    let past = past_for(&cache, cfg, &cfg.algorithms, year)?;
    let recommender = tradenet::Recommender::new(&current, past.as_ref(), cfg.params)?;
    let params = recommender.params();
    for &algorithm in &cfg.algorithms {
        let lists = recommender.recommend_all(algorithm, cfg.list_length)?;
        let prov = provenance(
            &cache,
            json!({
                "command": "recommend",
                "year": year,
                "algorithm": algorithm.as_str(),
                "L": cfg.list_length,
                "params": diffusion_json(cfg),
            }),
        );
        let name = format!("recommendations_{algorithm}_{year}.jsonl");
        emit(cfg, &name, &prov.jsonl_header(), |out| {
            write_recommendations_jsonl(out, algorithm, year, &params, &lists)
        })?;
        let padded = lists.iter().filter(|l| l.padded).count();
        let truncated = lists.iter().filter(|l| l.truncated).count();
        println!(
            "{algorithm} {year}: {} countries, {padded} padded, {truncated} truncated",
            lists.len()
        );
    }
    Ok(())
}

pub fn fitness(cfg: &RunConfig) -> Result<(), CliError> {
    let cache = Cache::open(&cfg.cache)?;
    let years = match cfg.year {
        Some(y) => vec![y],
        None => cache.years(),
    };
    let mut unconverged = Vec::new();
    for year in years {
        let snapshot = cache.load(year)?;
        let result = solve_fitness(&snapshot, cfg.solver)?;
        let prov = provenance(
            &cache,
            json!({ "command": "fitness", "year": year, "solver": solver_json(cfg) }),
        );
        let header = prov.csv_header();
        emit(cfg, &format!("fitness_{year}.csv"), &header, |out| {
            result.write_fitness_csv(out)
        })?;
        emit(cfg, &format!("complexity_{year}.csv"), &header, |out| {
            result.write_complexity_csv(out)
        })?;
        if result.converged && result.countries.len() >= 3 {
            let tiers = assign_tiers(&result)?;
            emit(cfg, &format!("tiers_{year}.csv"), &header, |out| {
                writeln!(out, "year,country,tier,rank")?;
                for &i in &result.ranking {
                    let c = &result.countries[i];
                    writeln!(
                        out,
                        "{year},{},{},{}",
                        c,
                        tiers.tier_of(c).expect("tiered"),
                        result.ranks[i]
                    )?;
                }
                Ok(())
            })?;
        }
        println!(
            "{year}: {} countries, {} iterations, {}",
            result.countries.len(),
            result.iterations,
            if result.converged {
                "converged"
            } else {
                "NOT converged"
            }
        );
        if !result.converged {
            unconverged.push(year.to_string());
        }
    }
    if unconverged.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "ranking not stable within {} iterations for {}",
            cfg.solver.max_iter,
            unconverged.join(", ")
        )))
    }
}

fn default_train_years(cache: &Cache, cfg: &RunConfig) -> Result<YearRange, CliError> {
    if let Some(t) = cfg.train_years {
        return Ok(t);
    }
    let years = cache.years();
    match (years.first(), years.last()) {
        (Some(&a), Some(&b)) if b - cfg.horizon >= a => Ok(YearRange {
            from: a,
            to: b - cfg.horizon,
        }),
        _ => Err(CliError::Data(format!(
            "cache holds no year pair {} apart",
            cfg.horizon
        ))),
    }
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let cache = Cache::open(&cfg.cache)?;
    let snapshots = cache.load_all()?;
    let train = default_train_years(&cache, cfg)?;
    let report = sweep(
        &snapshots,
        train.range(),
        &cfg.algorithms,
        cfg.params,
        cfg.list_length,
        cfg.horizon,
    )?;
    let prov = provenance(
        &cache,
        json!({
            "command": "evaluate",
            "T": train.to_string(),
            "horizon": cfg.horizon,
            "algorithms": algorithm_names(&cfg.algorithms),
            "L": cfg.list_length,
            "params": diffusion_json(cfg),
        }),
    );
    let header = prov.csv_header();
    emit(cfg, "evaluation.csv", &header, |out| report.write_csv(out))?;
    emit(cfg, "evaluation_skipped.csv", &header, |out| {
        writeln!(out, "T,algorithm,reason")?;
        for s in &report.skipped {
            writeln!(out, "{},{},{}", s.train_year, s.algorithm, csv_field(&s.reason))?;
        }
        Ok(())
    })?;
    for s in &report.skipped {
        log::warn!("T = {}, {}: skipped ({})", s.train_year, s.algorithm, s.reason);
    }
    println!("algorithm  years  precision  recall");
    for s in &report.summary {
        println!(
            "{:<9}  {:>5}  {:>9}  {:>6}",
            s.algorithm.as_str(),
            s.years,
            fmt_sig(s.precision),
            fmt_sig(s.recall)
        );
    }
    if let Some(best) = report.best_by_recall() {
        println!("best by recall: {best}");
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let cache = Cache::open(&cfg.cache)?;
    match cfg.mode {
        Mode::FixedL => simulate_fixed(cfg, &cache),
        Mode::Virtual => simulate_virtual(cfg, &cache),
    }
}

fn write_skipped(out: &mut Vec<u8>, skipped: &[tradenet::counterfactual::Skipped]) -> std::io::Result<()> {
    writeln!(out, "algorithm,country,reason")?;
    for s in skipped {
        writeln!(out, "{},{},{}", s.algorithm, s.country, csv_field(&s.reason))?;
    }
    Ok(())
}

fn simulate_fixed(cfg: &RunConfig, cache: &Cache) -> Result<(), CliError> {
    let year = cfg.require_year()?;
    let snapshot = cache.load(year)?;
    let past = past_for(cache, cfg, &cfg.algorithms, year)?;
    let report = tier_report(
        &snapshot,
        past.as_ref(),
        &cfg.algorithms,
        cfg.params,
        cfg.list_length,
        cfg.solver,
    )?;
    let prov = provenance(
        cache,
        json!({
            "command": "simulate",
            "mode": Mode::FixedL.as_str(),
            "year": year,
            "algorithms": algorithm_names(&cfg.algorithms),
            "L": cfg.list_length,
            "params": diffusion_json(cfg),
            "solver": solver_json(cfg),
        }),
    );
    let header = prov.csv_header();
    emit(cfg, &format!("simulate_fixed_L_{year}.csv"), &header, |out| {
        report.write_rows_csv(out)
    })?;
    emit(
        cfg,
        &format!("simulate_fixed_L_{year}_tiers.csv"),
        &header,
        |out| report.write_aggregates_csv(out),
    )?;
    emit(
        cfg,
        &format!("simulate_fixed_L_{year}_skipped.csv"),
        &header,
        |out| write_skipped(out, &report.skipped),
    )?;
    for a in &report.aggregates {
        println!(
            "{:<7} {:<6}  countries {:>4}  mean dF {:>14}  mean dRank {:>10}  improved {}",
            a.algorithm.as_str(),
            a.tier.as_str(),
            a.countries,
            fmt_sig(a.mean_delta_fitness),
            fmt_sig(a.mean_delta_rank),
            a.improved
        );
    }

    if let Some(lengths) = &cfg.lengths {
        let countries = match &cfg.countries {
            Some(c) => c.clone(),
            None => {
                let base = solve_fitness(&snapshot, cfg.solver)?;
                if !base.converged {
                    return Err(Error::NonConvergence(cfg.solver.max_iter).into());
                }
                sample_tier(&assign_tiers(&base)?, Tier::Middle, cfg.sample, cfg.seed)
            }
        };
        let rows = length_sweep(
            &snapshot,
            past.as_ref(),
            &cfg.algorithms,
            cfg.params,
            lengths,
            &countries,
            cfg.solver,
        )?;
        let prov = provenance(
            cache,
            json!({
                "command": "simulate",
                "mode": Mode::FixedL.as_str(),
                "year": year,
                "algorithms": algorithm_names(&cfg.algorithms),
                "lengths": lengths,
                "countries": countries,
                "sample": cfg.sample,
                "seed": cfg.seed,
                "params": diffusion_json(cfg),
                "solver": solver_json(cfg),
            }),
        );
        emit(
            cfg,
            &format!("simulate_lengths_{year}.csv"),
            &prov.csv_header(),
            |out| {
                writeln!(out, "algorithm,L,country,fitness_base,fitness_scenario")?;
                for r in &rows {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        r.algorithm,
                        r.list_length,
                        r.country,
                        fmt_sig(r.fitness_base),
                        fmt_sig(r.fitness_scenario)
                    )?;
                }
                Ok(())
            },
        )?;
    }
    Ok(())
}

fn simulate_virtual(cfg: &RunConfig, cache: &Cache) -> Result<(), CliError> {
    let train_years = default_train_years(cache, cfg)?;
    let config = json!({
        "command": "simulate",
        "mode": Mode::Virtual.as_str(),
        "T": train_years.to_string(),
        "horizon": cfg.horizon,
        "algorithms": algorithm_names(&cfg.algorithms),
        "params": diffusion_json(cfg),
        "solver": solver_json(cfg),
    });
    let header = provenance(cache, config).csv_header();

    let mut reports = Vec::new();
    for t in train_years.range() {
        if !cache.has(t) || !cache.has(t + cfg.horizon) {
            log::warn!(
                "T = {t}: snapshot {} or {} not cached, skipped",
                t,
                t + cfg.horizon
            );
            continue;
        }
        let has_past = cache.has(t - cfg.params.tau);
        let algorithms: Vec<Algorithm> = cfg
            .algorithms
            .iter()
            .copied()
            .filter(|a| {
                let ok = has_past || !a.needs_past();
                if !ok {
                    log::warn!(
                        "T = {t}, {a}: snapshot {} not cached, skipped",
                        t - cfg.params.tau
                    );
                }
                ok
            })
            .collect();
        if algorithms.is_empty() {
            continue;
        }
        let train = cache.load(t)?;
        let test = cache.load(t + cfg.horizon)?;
        let past = past_for(cache, cfg, &algorithms, t)?;
        let report = virtual_report(&train, past.as_ref(), &test, &algorithms, cfg.params, cfg.solver)?;
        emit(cfg, &format!("simulate_virtual_{t}.csv"), &header, |out| {
            report.write_rows_csv(out)
        })?;
        emit(cfg, &format!("simulate_virtual_{t}_tiers.csv"), &header, |out| {
            report.write_aggregates_csv(out)
        })?;
        emit(
            cfg,
            &format!("simulate_virtual_{t}_skipped.csv"),
            &header,
            |out| write_skipped(out, &report.skipped),
        )?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(CliError::Data(format!(
            "no training year in {train_years} has the snapshots it needs"
        )));
    }

    let averages = average_by_country(&reports);
    emit(cfg, "simulate_virtual_summary.csv", &header, |out| {
        writeln!(out, "algorithm,country,runs,mean_delta_fitness,mean_delta_rank")?;
        for a in &averages {
            writeln!(
                out,
                "{},{},{},{},{}",
                a.algorithm,
                a.country,
                a.runs,
                fmt_sig(a.mean_delta_fitness),
                fmt_sig(a.mean_delta_rank)
            )?;
        }
        Ok(())
    })?;
    let mut counts = Vec::new();
    for &algorithm in &cfg.algorithms {
        let mine: Vec<_> = averages.iter().filter(|a| a.algorithm == algorithm).collect();
        let improved = mine.iter().filter(|a| a.mean_delta_fitness > 0.0).count();
        println!(
            "{algorithm}: {improved} of {} countries improve on average",
            mine.len()
        );
        counts.push((algorithm, mine.len(), improved));
    }
    emit(cfg, "simulate_virtual_improved.csv", &header, |out| {
        writeln!(out, "algorithm,countries,improved")?;
        for (a, n, k) in &counts {
            writeln!(out, "{a},{n},{k}")?;
        }
        Ok(())
    })
}

impl CliError {
    /// Prefixes data errors with the file they came from.
    fn in_file(self, path: &Path) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}
