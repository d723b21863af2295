//! Alternating code/filter descent and the multistart driver.

use std::f64::consts::TAU;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::scatter::{latin_hypercube_point, perturb};
use super::{error_of_profile, gradient_from_profile, ErrorFunctionConfig};
use crate::correlation::cross_correlate;
use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::filter_design::{balance_pairs, joint_min_isl_filter, CodeFilterSet, MismatchedFilter};
use crate::waveforms::PolyphaseCode;

/// Which correlation terms the objective includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveTerms {
    /// Auto sidelobes of every pair plus all cross-correlation energy.
    #[default]
    Joint,
    /// Auto sidelobes only; each filter sees only its own code.
    AutoOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_iterations: usize,
    /// Largest phase change, in radians, of the first trial step.
    pub step: f64,
    pub armijo_c: f64,
    /// Stop once an accepted step improves the error by less than this
    /// fraction.
    pub tolerance: f64,
    pub seed: u64,
    /// Standard deviation, in radians, of incumbent perturbations.
    pub perturbation: f64,
    pub terms: ObjectiveTerms,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 16,
            max_iterations: 500,
            step: 0.1,
            armijo_c: 1e-4,
            tolerance: 1e-8,
            seed: 1,
            perturbation: 0.3,
            terms: ObjectiveTerms::Joint,
            execution: Execution::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(invalid("starts must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(invalid("step must be positive"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid("armijo_c must lie in (0, 1)"));
        }
        if !(self.perturbation >= 0.0) || !self.perturbation.is_finite() {
            return Err(invalid("perturbation must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub set: CodeFilterSet,
    /// Objective after every accepted step, one vector per start; failed
    /// starts have an empty trace.
    pub error_trace: Vec<Vec<f64>>,
    pub best_start: usize,
    /// Final objective of the best start.
    pub objective: f64,
    pub wall_time: f64,
    pub failures: Vec<(usize, String)>,
}

impl DesignResult {
    /// `start,iteration,error` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("start,iteration,error\n");
        for (s, trace) in self.error_trace.iter().enumerate() {
            for (i, e) in trace.iter().enumerate() {
                out.push_str(&format!("{s},{i},{e:e}\n"));
            }
        }
        out
    }
}

struct Evaluation {
    value: f64,
    gradient: Vec<Vec<f64>>,
    filters: Vec<MismatchedFilter>,
}

struct Objective {
    filter_length: usize,
    auto: ErrorFunctionConfig,
    cross: ErrorFunctionConfig,
    terms: ObjectiveTerms,
}

impl Objective {
    fn new(filter_length: usize, cfg: &ErrorFunctionConfig, terms: ObjectiveTerms) -> Result<Self> {
        if cfg.filter_length() != filter_length {
            return Err(invalid(format!(
                "error weights sized for filter length {}, not {filter_length}",
                cfg.filter_length()
            )));
        }
        if cfg.mainlobe_width == 0 {
            return Err(invalid("the auto error needs an odd mainlobe width"));
        }
        Ok(Objective {
            filter_length,
            auto: cfg.clone(),
            cross: ErrorFunctionConfig::all_lags(filter_length, cfg.p)?,
            terms,
        })
    }

    fn evaluate(&self, codes: &[PolyphaseCode]) -> Result<Evaluation> {
        let m = codes.len();
        let len = codes[0].len();
        let samples: Vec<Vec<Complex64>> = codes.iter().map(|c| c.samples()).collect();
        let mut gradient = vec![vec![0.0; len]; m];
        let mut filters = Vec::with_capacity(m);
        let mut value = 0.0;
        let l2 = (len * len) as f64;
        let zero_lag = zero_lag_config(self.filter_length);
        for i in 0..m {
            let filter = match self.terms {
                ObjectiveTerms::Joint => {
                    joint_min_isl_filter(codes, i, self.filter_length, self.auto.mainlobe_width)?
                }
                ObjectiveTerms::AutoOnly => joint_min_isl_filter(
                    std::slice::from_ref(&codes[i]),
                    0,
                    self.filter_length,
                    self.auto.mainlobe_width,
                )?,
            };
            let h = &filter.coefficients;
            let own = cross_correlate(&samples[i], h)?;
            let mut e_i = error_of_profile(&own, &self.auto);
            let mut g_i = gradient_from_profile(&samples[i], h, &own, &self.auto);
            if self.terms == ObjectiveTerms::Joint {
                for k in (0..m).filter(|&k| k != i) {
                    let other = cross_correlate(&samples[k], h)?;
                    e_i += error_of_profile(&other, &self.cross);
                    let g_k = gradient_from_profile(&samples[k], h, &other, &self.cross);
                    for (acc, v) in gradient[k].iter_mut().zip(g_k) {
                        *acc += v;
                    }
                }
            }
            // the filter keeps the zero-lag response at L, so its movement
            // enters only through the normalization |c_0|²
            let g0 = gradient_from_profile(&samples[i], h, &own, &zero_lag);
            let k = self.auto.p as f64 * e_i / l2;
            for ((acc, a), b) in gradient[i].iter_mut().zip(&mut g_i).zip(g0) {
                *acc += *a - k * b;
            }
            value += e_i;
            filters.push(filter);
        }
        if !value.is_finite() || gradient.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("objective evaluated to {value}")));
        }
        Ok(Evaluation {
            value,
            gradient,
            filters,
        })
    }
}

fn zero_lag_config(filter_length: usize) -> ErrorFunctionConfig {
    let mut weights = vec![0.0; 2 * filter_length - 1];
    weights[filter_length - 1] = 1.0;
    ErrorFunctionConfig {
        p: 1,
        weights,
        mainlobe_width: 0,
    }
}

fn make_codes(phases: &[Vec<f64>]) -> Result<Vec<PolyphaseCode>> {
    phases
        .iter()
        .enumerate()
        .map(|(i, p)| PolyphaseCode::new(format!("c{}", i + 1), p.clone()))
        .collect()
}

struct StartOutcome {
    codes: Vec<PolyphaseCode>,
    filters: Vec<MismatchedFilter>,
    trace: Vec<f64>,
}

type Phases = Vec<Vec<f64>>;

fn descend(objective: &Objective, initial: Vec<Vec<f64>>, opt: &OptimizerConfig) -> Result<StartOutcome> {
    let mut x = initial;
    let mut codes = make_codes(&x)?;
    let mut eval = objective.evaluate(&codes)?;
    let mut trace = vec![eval.value];
    let mut previous: Option<(Phases, Phases)> = None;
    let mut t = 0.0;
    for _ in 0..opt.max_iterations {
        let g = &eval.gradient;
        let gmax = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let gg: f64 = g.iter().flatten().map(|v| v * v).sum();
        if gmax == 0.0 || eval.value == 0.0 {
            break;
        }
        // Barzilai-Borwein length from the last accepted step
        t = match &previous {
            None => opt.step / gmax,
            Some((px, pg)) => {
                let (mut ss, mut sy) = (0.0, 0.0);
                for ((xa, pa), (ga, pga)) in x.iter().zip(px).zip(g.iter().zip(pg)) {
                    for ((xv, pv), (gv, pgv)) in xa.iter().zip(pa).zip(ga.iter().zip(pga)) {
                        let s = wrap_diff(*xv, *pv);
                        ss += s * s;
                        sy += s * (gv - pgv);
                    }
                }
                if sy > 0.0 {
                    ss / sy
                } else {
                    2.0 * t
                }
            }
        };
        t = t.min(std::f64::consts::PI / gmax);
        let accepted = loop {
            let trial: Vec<Vec<f64>> = x
                .iter()
                .zip(g)
                .map(|(xa, ga)| {
                    xa.iter()
                        .zip(ga)
                        .map(|(xv, gv)| (xv - t * gv).rem_euclid(TAU))
                        .collect()
                })
                .collect();
            let trial_codes = make_codes(&trial)?;
            let trial_eval = objective.evaluate(&trial_codes)?;
            if trial_eval.value <= eval.value - opt.armijo_c * t * gg {
                break Some((trial, trial_codes, trial_eval));
            }
            t *= 0.5;
            if t * gmax < 1e-14 {
                break None;
            }
        };
        let Some((trial, trial_codes, trial_eval)) = accepted else {
            break;
        };
        let improvement = (eval.value - trial_eval.value) / eval.value;
        previous = Some((std::mem::replace(&mut x, trial), std::mem::take(&mut eval.gradient)));
        codes = trial_codes;
        eval = trial_eval;
        trace.push(eval.value);
        if improvement < opt.tolerance {
            break;
        }
    }
    Ok(StartOutcome {
        codes,
        filters: eval.filters,
        trace,
    })
}

fn wrap_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

fn finish(
    outcome: StartOutcome,
    mainlobe_width: usize,
    error_trace: Vec<Vec<f64>>,
    best_start: usize,
    failures: Vec<(usize, String)>,
    started: Instant,
) -> Result<DesignResult> {
    let objective = *outcome.trace.last().expect("trace starts with the initial value");
    let mut set = CodeFilterSet::new(outcome.codes, outcome.filters, mainlobe_width)?;
    balance_pairs(&mut set);
    Ok(DesignResult {
        set,
        error_trace,
        best_start,
        objective,
        wall_time: started.elapsed().as_secs_f64(),
        failures,
    })
}

fn check_initial(initial: &[PolyphaseCode], filter_length: usize) -> Result<()> {
    if initial.is_empty() {
        return Err(invalid("at least one initial code is required"));
    }
    let len = initial[0].len();
    if initial.iter().any(|c| c.len() != len) {
        return Err(invalid("initial codes differ in length"));
    }
    if filter_length < len {
        return Err(invalid("filter shorter than the codes"));
    }
    Ok(())
}

/// Descends from one initial code set: each iteration redesigns the
/// minimum-ISL filters for the current codes, then takes a projected
/// gradient step on all code phases with Armijo backtracking.
pub fn local_search(
    initial: &[PolyphaseCode],
    filter_length: usize,
    cfg: &ErrorFunctionConfig,
    opt: &OptimizerConfig,
) -> Result<DesignResult> {
    opt.validate()?;
    check_initial(initial, filter_length)?;
    let started = Instant::now();
    let objective = Objective::new(filter_length, cfg, opt.terms)?;
    let phases = initial.iter().map(|c| c.phases().to_vec()).collect();
    let outcome = descend(&objective, phases, opt)?;
    let trace = vec![outcome.trace.clone()];
    finish(outcome, cfg.mainlobe_width, trace, 0, Vec::new(), started)
}

fn split(flat: &[f64], m: usize, len: usize) -> Vec<Vec<f64>> {
    (0..m).map(|i| flat[i * len..(i + 1) * len].to_vec()).collect()
}

/// Multistart search. The first `⌈starts/2⌉` starts use Latin-hypercube
/// points; the rest perturb the best of those. Starts run under
/// `opt.execution`; the lowest objective wins, ties going to the lower
/// start index.
pub fn global_search(
    m: usize,
    len: usize,
    filter_length: usize,
    cfg: &ErrorFunctionConfig,
    opt: &OptimizerConfig,
) -> Result<DesignResult> {
    opt.validate()?;
    if m == 0 || len == 0 {
        return Err(invalid("M and L must be at least 1"));
    }
    if filter_length < len {
        return Err(invalid("filter shorter than the codes"));
    }
    let started = Instant::now();
    let objective = Objective::new(filter_length, cfg, opt.terms)?;
    let dims = m * len;
    let scattered = opt.starts.div_ceil(2);

    let run = |phases: Vec<f64>| descend(&objective, split(&phases, m, len), opt);
    let mut outcomes: Vec<Result<StartOutcome>> = opt
        .execution
        .map(scattered, |s| run(latin_hypercube_point(opt.seed, s, dims)));

    let incumbent = best_index(&outcomes).map(|i| {
        let o = outcomes[i].as_ref().expect("best is a success");
        o.codes.iter().flat_map(|c| c.phases().iter().copied()).collect::<Vec<f64>>()
    });
    let rest = opt.execution.map(opt.starts - scattered, |k| {
        let s = scattered + k;
        let start = match &incumbent {
            Some(base) => perturb(base, opt.perturbation, opt.seed.wrapping_add(s as u64)),
            None => latin_hypercube_point(opt.seed, s, dims),
        };
        run(start)
    });
    outcomes.extend(rest);

    let mut failures = Vec::new();
    let mut traces = Vec::with_capacity(outcomes.len());
    for (s, o) in outcomes.iter().enumerate() {
        match o {
            Ok(o) => traces.push(o.trace.clone()),
            Err(e) => {
                failures.push((s, e.to_string()));
                traces.push(Vec::new());
            }
        }
    }
    let Some(best) = best_index(&outcomes) else {
        return Err(Error::AllStartsFailed(
            failures.into_iter().map(|(s, e)| format!("start {s}: {e}")).collect(),
        ));
    };
    let outcome = outcomes.swap_remove(best).expect("best is a success");
    finish(outcome, cfg.mainlobe_width, traces, best, failures, started)
}

fn best_index(outcomes: &[Result<StartOutcome>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Ok(o) = o {
            let v = *o.trace.last().expect("nonempty trace");
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}
