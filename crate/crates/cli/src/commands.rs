use std::path::Path;
use std::time::Instant;

use polyphase::ambiguity::{ambiguity_with, auto_and_cross_surfaces, correlation_cut, zero_doppler_cut, AmbiguitySurface};
use polyphase::can::{can_design, evaluate_set_matched, region_weights, central_region, wecan_design, CanConfig};
use polyphase::echo_sim::{
    build_two_trip_train, compress, jitter_psl_study, mean_doppler_spectrum, suppression_ensemble, DopplerWindow, Trip,
};
use polyphase::filter_design::{min_isl_filter, summarize_set, CodeFilterSet, MismatchedFilter};
use polyphase::optimizer::global_search;
use polyphase::waveforms::{chirp, chu_code, hadamard_code, PolyphaseCode};
use polyphase::Execution;
use serde::Serialize;

use crate::config::{BaselineConfig, CanRunConfig, CanVariant, DesignConfig, EvalConfig, EvalMode, SimulateConfig};
use crate::manifest::Outputs;
use crate::CliError;

fn runtime(e: polyphase::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn load_set(path: &Path) -> Result<CodeFilterSet, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read set {}: {e}", path.display())))?;
    CodeFilterSet::from_json(&text).map_err(|e| CliError::Config(format!("set {}: {e}", path.display())))
}

fn pair_name(filter: usize, code: usize) -> String {
    format!("f{}_c{}", filter + 1, code + 1)
}

pub fn design(cfg: &DesignConfig, out: &Path, execution: Execution) -> Result<(), CliError> {
    let started = Instant::now();
    let (err_cfg, mut opt) = cfg.resolve()?;
    opt.execution = execution;
    let result = global_search(cfg.m, cfg.code_length, cfg.filter_length, &err_cfg, &opt).map_err(runtime)?;
    let summary = summarize_set(&result.set);
    let mut files = Outputs::new(out)?;
    files.write("set.json", result.set.to_json().map_err(runtime)? + "\n")?;
    files.write("trace.csv", result.trace_csv())?;
    #[derive(Serialize)]
    struct Report<'a> {
        objective: f64,
        best_start: usize,
        failed_starts: &'a [(usize, String)],
        pairs: &'a [polyphase::filter_design::PairSummary],
    }
    files.write_json(
        "summary.json",
        &Report { objective: result.objective, best_start: result.best_start, failed_starts: &result.failures, pairs: &summary },
    )?;
    for p in &summary {
        println!("{} / {}: psl {:.2} dBc, isl {:.2} dB", p.filter, p.code, p.psl_dbc, p.isl_db);
    }
    files.finish("design", cfg, cfg.seed, started)
}

fn write_surface(files: &mut Outputs, name: &str, s: &AmbiguitySurface) -> Result<(), CliError> {
    files.write(&format!("ambiguity_{name}.csv"), s.to_csv())?;
    files.write(&format!("ambiguity_{name}.json"), s.metadata_json().map_err(runtime)? + "\n")?;
    let cut = zero_doppler_cut(s).map_err(runtime)?;
    files.write(&format!("cut_{name}.csv"), cut.to_csv())
}

#[derive(Serialize)]
struct EvalRun<'a> {
    set: String,
    #[serde(flatten)]
    config: &'a EvalConfig,
}

pub fn eval(set_path: &Path, cfg: &EvalConfig, out: &Path, execution: Execution) -> Result<(), CliError> {
    let started = Instant::now();
    let set = load_set(set_path)?;
    let mut files = Outputs::new(out)?;
    match cfg.mode {
        EvalMode::Corr => {
            for i in 0..set.m() {
                for k in 0..set.m() {
                    let cut = correlation_cut(&set, i, k).map_err(runtime)?;
                    files.write(&format!("cut_{}.csv", pair_name(i, k)), cut.to_csv())?;
                }
            }
        }
        EvalMode::Ambiguity => {
            let grid = cfg.doppler_grid()?;
            if set.m() == 2 {
                let s = auto_and_cross_surfaces(&set, &grid, cfg.sample_rate_hz, execution).map_err(runtime)?;
                for (surface, (f, c)) in s.iter().zip([(0, 0), (1, 1), (1, 0), (0, 1)]) {
                    write_surface(&mut files, &pair_name(f, c), surface)?;
                }
            } else {
                for i in 0..set.m() {
                    let s = ambiguity_with(&set.codes[i], &set.filters[i], &grid, cfg.sample_rate_hz, execution)
                        .map_err(runtime)?;
                    write_surface(&mut files, &pair_name(i, i), &s)?;
                }
            }
        }
    }
    let summary = summarize_set(&set);
    files.write_json("summary.json", &summary)?;
    for p in &summary {
        println!("{} / {}: psl {:.2} dBc, isl {:.2} dB", p.filter, p.code, p.psl_dbc, p.isl_db);
    }
    let run = EvalRun { set: set_path.display().to_string(), config: cfg };
    files.finish("eval", &run, 0, started)
}

#[derive(Serialize)]
struct SimulateRun<'a> {
    set: String,
    #[serde(flatten)]
    config: &'a SimulateConfig,
}

pub fn simulate(set_path: &Path, cfg: &SimulateConfig, out: &Path, execution: Execution) -> Result<(), CliError> {
    let started = Instant::now();
    let scenario = cfg.scenario()?;
    let set = load_set(set_path)?;
    if set.m() != 2 {
        return Err(CliError::Config(format!("simulation needs a set of 2 pairs, {} has {}", set_path.display(), set.m())));
    }
    let mut files = Outputs::new(out)?;
    let seeds: Vec<u64> = (0..cfg.ensemble_size as u64).map(|i| cfg.seed + i).collect();
    let report = suppression_ensemble(&scenario, &set, &seeds, execution).map_err(runtime)?;
    files.write_json("suppression.json", &report)?;
    println!("second-trip suppression: {:.2} dB (mean of {} seeds)", report.mean_db, seeds.len());

    let train = build_two_trip_train(&scenario.trips, &set, &scenario.radar, &scenario.impairments, scenario.pulses, cfg.seed)
        .map_err(runtime)?;
    let start = scenario.trips.iter().map(|t| t.gate_start).min().expect("validated");
    let end = scenario.trips.iter().map(|t| t.gate_end).max().expect("validated");
    let raw = mean_doppler_spectrum(&train, start..end, DopplerWindow::VonHann).map_err(runtime)?;
    files.write("spectrum_uncompressed.csv", raw.to_csv())?;
    for (trip, name) in [(Trip::First, "spectrum_trip1.csv"), (Trip::Second, "spectrum_trip2.csv")] {
        let c = compress(&train, &set, trip).map_err(runtime)?;
        let s = mean_doppler_spectrum(&c, start..end, DopplerWindow::VonHann).map_err(runtime)?;
        files.write(name, s.to_csv())?;
    }

    if !cfg.jitter_sweep_deg.is_empty() {
        let jseeds: Vec<u64> = (0..cfg.jitter_seeds as u64).map(|i| cfg.seed + i).collect();
        let pts = jitter_psl_study(&set, &cfg.jitter_sweep_deg, &jseeds, execution).map_err(runtime)?;
        for p in &pts {
            println!("jitter {:.2} deg: cross PSL {:.2} dBc", p.jitter_deg, p.mean_dbc);
        }
        files.write_json("jitter.json", &pts)?;
    }
    let run = SimulateRun { set: set_path.display().to_string(), config: cfg };
    files.finish("simulate", &run, cfg.seed, started)
}

fn matched_set(codes: Vec<PolyphaseCode>) -> Result<CodeFilterSet, CliError> {
    let filters = codes.iter().map(MismatchedFilter::matched).collect();
    CodeFilterSet::new(codes, filters, 1).map_err(runtime)
}

pub fn baseline_can(cfg: &CanRunConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let mut can = CanConfig::new(cfg.m, cfg.code_length, cfg.seed);
    can.max_cycles = cfg.max_cycles;
    can.tolerance = cfg.tolerance;
    let result = match cfg.variant {
        CanVariant::Can => can_design(&can),
        CanVariant::Wecan => {
            let region = cfg.region.unwrap_or_else(|| central_region(cfg.code_length, cfg.m));
            can.gamma = Some(region_weights(cfg.code_length, region).map_err(|e| CliError::Config(format!("region: {e}")))?);
            wecan_design(&can)
        }
    }
    .map_err(|e| match e {
        polyphase::Error::InvalidArgument(msg) => CliError::Config(msg),
        other => runtime(other),
    })?;
    let report = evaluate_set_matched(&result.codes).map_err(runtime)?;
    let mut files = Outputs::new(out)?;
    files.write("set.json", matched_set(result.codes.clone())?.to_json().map_err(runtime)? + "\n")?;
    let mut trace = String::from("cycle,criterion\n");
    for (i, c) in result.criterion_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{c}\n"));
    }
    files.write("trace.csv", trace)?;
    files.write("report.csv", report.to_csv())?;
    #[derive(Serialize)]
    struct Summary {
        criterion: f64,
        cycles: usize,
        converged: bool,
        worst_psl_dbc: f64,
    }
    let summary = Summary {
        criterion: result.criterion(),
        cycles: result.cycles,
        converged: result.converged,
        worst_psl_dbc: report.worst_psl_dbc(),
    };
    println!("criterion {:.6e} after {} cycles, worst PSL {:.2} dB", summary.criterion, summary.cycles, summary.worst_psl_dbc);
    files.write_json("summary.json", &summary)?;
    files.finish("baseline-can", cfg, cfg.seed, started)
}

#[derive(Serialize)]
struct FilterComparison {
    filter: String,
    psl_dbc: f64,
    isl_db: f64,
    /// Output SNR relative to the matched filter.
    mismatch_loss_db: f64,
}

fn mismatch_loss_db(code: &PolyphaseCode, filter: &MismatchedFilter) -> f64 {
    let peak = filter.zero_lag_response(code).norm_sqr();
    let energy: f64 = filter.coefficients.iter().map(|c| c.norm_sqr()).sum();
    -10.0 * (peak / (energy * code.len() as f64)).log10()
}

pub fn baseline(cfg: &BaselineConfig, out: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let config_err = |e: polyphase::Error| CliError::Config(e.to_string());
    let mut files = Outputs::new(out)?;
    match cfg {
        BaselineConfig::Hadamard { code_length, rows } => {
            let codes = rows.iter().map(|&r| hadamard_code(*code_length, r)).collect::<Result<Vec<_>, _>>().map_err(config_err)?;
            let set = matched_set(codes)?;
            files.write("set.json", set.to_json().map_err(runtime)? + "\n")?;
            files.write_json("summary.json", &summarize_set(&set))?;
        }
        BaselineConfig::Chu { code_length, indices } => {
            let codes = indices.iter().map(|&n| chu_code(*code_length, n)).collect::<Result<Vec<_>, _>>().map_err(config_err)?;
            let set = matched_set(codes)?;
            files.write("set.json", set.to_json().map_err(runtime)? + "\n")?;
            files.write_json("summary.json", &summarize_set(&set))?;
        }
        BaselineConfig::Chirp { bandwidth_hz, pulse_width_us, sample_rate_hz, filter_length, mainlobe_width } => {
            let code = chirp(*bandwidth_hz, pulse_width_us * 1e-6, *sample_rate_hz).map_err(config_err)?.to_code();
            let code = code.with_label("chirp");
            let mismatched = min_isl_filter(&code, *filter_length, *mainlobe_width).map_err(config_err)?;
            let matched = MismatchedFilter::matched(&code);
            let mut rows = Vec::new();
            for (name, filter) in [("matched", matched), ("mismatched", mismatched)] {
                let set = CodeFilterSet::new(vec![code.clone()], vec![filter.clone()], *mainlobe_width).map_err(runtime)?;
                files.write(&format!("set_{name}.json"), set.to_json().map_err(runtime)? + "\n")?;
                let s = &summarize_set(&set)[0];
                rows.push(FilterComparison {
                    filter: name.to_string(),
                    psl_dbc: s.psl_dbc,
                    isl_db: s.isl_db,
                    mismatch_loss_db: mismatch_loss_db(&code, &filter),
                });
            }
            for r in &rows {
                println!("{}: psl {:.2} dBc, isl {:.2} dB, loss {:.2} dB", r.filter, r.psl_dbc, r.isl_db, r.mismatch_loss_db);
            }
            files.write_json("comparison.json", &rows)?;
        }
    }
    files.finish("baseline", cfg, 0, started)
}
