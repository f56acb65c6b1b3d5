//! `treeflow case-study`: randomized bus bounds, one relaxation per trial.

use std::fmt::Write;
use std::time::Instant;

use anyhow::Result;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use treeflow_core::network::{Bus, Network};
use treeflow_core::opf::{solve_opf, Mode, Objective, OpfOptions, Verdict};

use crate::{exit, Global, Method};

pub const CSV_HEADER: &str = "trial,seed,verdict,objective,min_lmp,max_rank_ratio";
/// Share of non-root buses that get randomized bounds under method (b).
const METHOD_B_SHARE: f64 = 0.2;

/// Generator for one trial: a stream of the seed selected by the trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn uniform_between(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Randomized bounds around the nominal injection `-load`: the upper bound
/// between `-load` and `0.8·(-load)`, the lower between `1.2·(-load)` and `-load`.
fn randomized(rng: &mut ChaCha8Rng, load: f64) -> (f64, f64) {
    let nominal = -load;
    let hi = uniform_between(rng, nominal, 0.8 * nominal);
    let lo = uniform_between(rng, 1.2 * nominal, nominal);
    (lo.min(hi), lo.max(hi))
}

fn set_bounds(bus: &mut Bus, p: (f64, f64), q: (f64, f64)) {
    bus.p_min = Some(p.0);
    bus.p_max = Some(p.1);
    bus.q_min = Some(q.0);
    bus.q_max = Some(q.1);
}

/// Bounds for one trial. The root stays unbounded as the slack bus.
pub fn perturb(net: &Network, method: Method, rng: &mut ChaCha8Rng) -> Result<Network> {
    let root = net.topology().root;
    let others: Vec<usize> = (0..net.n_buses()).filter(|&i| i != root).collect();
    let randomized_set: Vec<bool> = match method {
        Method::A => vec![true; others.len()],
        Method::B => {
            let k = ((others.len() as f64 * METHOD_B_SHARE).round() as usize).clamp(1.min(others.len()), others.len());
            let mut mask = vec![false; others.len()];
            for j in index::sample(rng, others.len(), k) {
                mask[j] = true;
            }
            mask
        }
    };
    let mut out = net.clone();
    for (&i, &random) in others.iter().zip(&randomized_set) {
        let mut bus = net.bus(i).clone();
        if random {
            let p = randomized(rng, bus.p_load);
            let q = randomized(rng, bus.q_load);
            set_bounds(&mut bus, p, q);
        } else {
            let (p, q) = (-bus.p_load, -bus.q_load);
            set_bounds(&mut bus, (p, p), (q, q));
        }
        out = out.with_bus(i, bus)?;
    }
    Ok(out)
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub verdict: Option<Verdict>,
    pub objective: Option<f64>,
    pub min_lmp: Option<f64>,
    pub max_ratio: Option<f64>,
    pub seconds: f64,
}

pub fn run_trial(
    net: &Network,
    obj: &Objective,
    mode: Mode,
    opts: &OpfOptions,
    method: Method,
    seed: u64,
    trial: usize,
) -> TrialRow {
    let start = Instant::now();
    let mut rng = trial_rng(seed, trial as u64);
    let result = perturb(net, method, &mut rng).and_then(|n| Ok(solve_opf(&n, obj, mode, opts)?));
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(sol) => TrialRow {
            trial,
            verdict: Some(sol.verdict),
            objective: sol.objective,
            min_lmp: sol.min_lmp(),
            max_ratio: sol.objective.map(|_| sol.max_ratio()),
            seconds,
        },
        Err(e) => {
            log::warn!("trial {trial} failed: {e:#}");
            TrialRow {
                trial,
                verdict: None,
                objective: None,
                min_lmp: None,
                max_ratio: None,
                seconds,
            }
        }
    }
}

pub fn to_csv(rows: &[TrialRow], seed: u64) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.trial,
            seed,
            r.verdict.map_or("failed", |v| v.as_str()),
            opt(r.objective),
            opt(r.min_lmp),
            opt(r.max_ratio)
        );
    }
    out
}

pub fn run(g: &Global, method: Method) -> Result<i32> {
    let net = g.load()?;
    let obj = g.objective_for(&net)?;
    let mode = g.mode_for(&net);
    let opts = g.opf_options()?;
    let rows: Vec<TrialRow> = (0..g.trials)
        .into_par_iter()
        .map(|t| run_trial(&net, &obj, mode, &opts, method, g.seed, t))
        .collect();
    g.emit(&to_csv(&rows, g.seed))?;

    let tight = rows.iter().filter(|r| r.verdict == Some(Verdict::TightOptimal)).count();
    let failed = rows.iter().filter(|r| r.verdict.is_none()).count();
    let min_lmp = rows.iter().filter_map(|r| r.min_lmp).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().filter_map(|r| r.max_ratio).fold(0.0, f64::max);
    let times: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
    let slowest = times.iter().copied().fold(0.0, f64::max);
    eprintln!(
        "{tight}/{} tight, {failed} failed, min LMP {min_lmp:.3e}, max rank ratio {max_ratio:.3e}, \
         solve time mean {:.1} ms, max {:.1} ms",
        rows.len(),
        mean * 1e3,
        slowest * 1e3
    );
    Ok(exit::OK)
}
