//! Yard-sale agent ensembles: the microscopic model whose mean-field limit is
//! the yard-sale Fokker-Planck equation.
//!
//! A transaction moves `sqrt(gamma) * min(w_i, w_j)` from the loser to the
//! winner of a fair coin. Time is counted in transactions; `time_scale * N`
//! transactions make one unit of mean-field time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpe::TimeSpec;
use crate::lorenz_core::{hoover_from_lorenz, Domain, LorenzCurve, MetricRecord, MetricSeries};

/// Exact sum `a + b = hi + lo`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let bb = hi - a;
    let lo = (a - (hi - bb)) + (b - bb);
    (hi, lo)
}

fn ulp(x: f64) -> f64 {
    x.next_up() - x
}

/// How a standalone [`transact`] kept the pair total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conservation {
    /// Both updates are exact, so the real-number total is unchanged.
    Exact,
    /// No exact transfer exists near the stake (the winner crosses a binade
    /// and carries an odd last bit); the f64 sum of the pair is unchanged.
    Rounded,
    /// Neither was possible; nothing moved.
    Skipped,
}

/// Largest exact transfer not above `delta` and within a relative `1e-12`
/// of it, from `loser` to `winner`.
fn exact_transfer(loser: f64, winner: f64, delta: f64) -> Option<f64> {
    let fine = ulp(loser).min(ulp(winner));
    let coarse = ulp(loser).max(ulp(winner + delta));
    let exact = |d: f64| {
        d >= 0.0
            && d < loser
            && (delta - d) <= 1e-12 * delta
            && two_sum(winner, d).1 == 0.0
            && two_sum(loser, -d).1 == 0.0
    };
    let mut best: Option<f64> = None;
    for q in [fine, coarse, 2.0 * coarse] {
        let base = (delta / q).floor() * q;
        for d in [base, base - fine] {
            if exact(d) && best.is_none_or(|b| d > b) {
                best = Some(d);
            }
        }
    }
    best
}

/// Winner gets `fl(winner + delta)`; the loser gets whichever neighbour of
/// `total - new_winner` keeps the f64 pair sum.
fn rounded_transfer(loser: f64, winner: f64, delta: f64) -> Option<(f64, f64)> {
    let total = loser + winner;
    let new_winner = winner + delta;
    let guess = total - new_winner;
    [guess, guess.next_down(), guess.next_up()]
        .into_iter()
        .find(|l| *l > 0.0 && *l + new_winner == total)
        .map(|l| (l, new_winner))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} must lie in (0, 1)")));
    }
    Ok(())
}

/// One yard-sale transaction on arbitrary positive wealths. `i_wins` is the
/// coin: true moves wealth from `j` to `i`.
///
/// The stake `sqrt(gamma) * min` is computed once. Both outputs stay
/// positive and the f64 pair sum is unchanged bit for bit; the returned
/// [`Conservation`] says whether the real-number total is too.
pub fn transact(wi: f64, wj: f64, gamma: f64, i_wins: bool) -> Result<(f64, f64, Conservation)> {
    check_gamma(gamma)?;
    if !(wi > 0.0 && wi.is_finite() && wj > 0.0 && wj.is_finite()) {
        return Err(Error::invalid(format!(
            "wealths {wi}, {wj} must be positive and finite"
        )));
    }
    let delta = gamma.sqrt() * wi.min(wj);
    let (loser, winner) = if i_wins { (wj, wi) } else { (wi, wj) };
    let (new_loser, new_winner, how) = if let Some(d) = exact_transfer(loser, winner, delta) {
        (loser - d, winner + d, Conservation::Exact)
    } else if let Some((l, w)) = rounded_transfer(loser, winner, delta) {
        (l, w, Conservation::Rounded)
    } else {
        (loser, winner, Conservation::Skipped)
    };
    Ok(if i_wins {
        (new_winner, new_loser, how)
    } else {
        (new_loser, new_winner, how)
    })
}

/// Smallest power of two `q` with `total < 2^53 q`: every multiple of `q`
/// up to `total` is an f64 and sums of them below `total` are exact.
pub fn wealth_quantum(total: f64) -> f64 {
    let e = total.log2().floor() as i32 + 1;
    2f64.powi(e - 53)
}

/// Transaction on the lattice `q Z`. The stake is rounded down to the
/// lattice, so the loser keeps at least one quantum and every update is
/// integer arithmetic in units of `q`.
fn transact_on_lattice(wi: f64, wj: f64, sqrt_gamma: f64, q: f64, i_wins: bool) -> (f64, f64) {
    let d = (sqrt_gamma * wi.min(wj) / q).floor() * q;
    if i_wins {
        (wi + d, wj - d)
    } else {
        (wi - d, wj + d)
    }
}

/// Pairwise Gini `sum |w_i - w_j| / (2 N^2 mean)`, via the sorted-rank form.
pub fn pairwise_gini(wealths: &[f64]) -> Result<f64> {
    let n = wealths.len();
    if n < 2 {
        return Err(Error::invalid("Gini needs at least two agents"));
    }
    let mut sorted = wealths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("total wealth must be positive"));
    }
    let nf = n as f64;
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, w)| (2.0 * (k + 1) as f64 - nf - 1.0) * w)
        .sum();
    Ok(weighted / (nf * total))
}

/// Lorenz curve of a population on `N + 1` nodes, normalized so `L(1) = 1`.
pub fn empirical_lorenz(wealths: &[f64], time: f64) -> Result<LorenzCurve> {
    if wealths.len() < 2 {
        return Err(Error::invalid("empirical Lorenz curve needs at least two agents"));
    }
    if let Some(w) = wealths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("wealth {w} must be positive and finite")));
    }
    let mut sorted = wealths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    let mut values = Vec::with_capacity(sorted.len() + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for w in &sorted {
        acc += w;
        values.push(acc / total);
    }
    *values.last_mut().expect("non-empty") = 1.0;
    LorenzCurve::new(values, time, Domain::PositiveHalfLine)
}

/// Starting wealths. All variants are rescaled to mean one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum AgentInitial {
    Equal,
    /// Gamma with integer shape, drawn as a sum of exponentials.
    Gamma {
        shape: u32,
    },
    Tabulated {
        values: Vec<f64>,
    },
}

impl AgentInitial {
    pub fn build(&self, agents: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mut w = match self {
            AgentInitial::Equal => vec![1.0; agents],
            AgentInitial::Gamma { shape } => {
                if *shape == 0 {
                    return Err(Error::invalid("gamma shape must be at least 1"));
                }
                (0..agents)
                    .map(|_| (0..*shape).map(|_| -(1.0 - rng.random::<f64>()).ln()).sum::<f64>())
                    .collect()
            }
            AgentInitial::Tabulated { values } => {
                if values.len() != agents {
                    return Err(Error::invalid(format!(
                        "{} tabulated wealths for {agents} agents",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if let Some(x) = w.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(format!(
                "initial wealth {x} must be positive and finite"
            )));
        }
        let mean = w.iter().sum::<f64>() / agents as f64;
        w.iter_mut().for_each(|x| *x /= mean);
        Ok(w)
    }
}

/// A population with its own random stream. Draw order per transaction is
/// fixed: first agent, second agent, coin.
///
/// Wealths live on the lattice of [`wealth_quantum`] of the total, so the
/// total is conserved exactly and no agent drops below one quantum.
#[derive(Debug, Clone)]
pub struct AgentPopulation {
    wealths: Vec<f64>,
    quantum: f64,
    sqrt_gamma: f64,
    rng: ChaCha8Rng,
    transactions: u64,
}

impl AgentPopulation {
    pub fn new(wealths: Vec<f64>, gamma: f64, rng: ChaCha8Rng) -> Result<Self> {
        check_gamma(gamma)?;
        if wealths.len() < 2 {
            return Err(Error::invalid("a population needs at least two agents"));
        }
        if let Some(w) = wealths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("wealth {w} must be positive and finite")));
        }
        // Rounding can lift the total by at most N/2 quanta; the doubled
        // bound keeps the lattice valid for the rounded total.
        let quantum = wealth_quantum(2.0 * wealths.iter().sum::<f64>());
        let wealths = wealths
            .into_iter()
            .map(|w| ((w / quantum).round() * quantum).max(quantum))
            .collect();
        Ok(Self {
            wealths,
            quantum,
            sqrt_gamma: gamma.sqrt(),
            rng,
            transactions: 0,
        })
    }

    pub fn wealths(&self) -> &[f64] {
        &self.wealths
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn transactions(&self) -> u64 {
        self.transactions
    }

    pub fn total(&self) -> f64 {
        self.wealths.iter().sum()
    }

    /// One transaction between a uniformly drawn pair of distinct agents.
    pub fn step(&mut self) {
        let n = self.wealths.len();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let i_wins = self.rng.random::<bool>();
        let (a, b) = transact_on_lattice(self.wealths[i], self.wealths[j], self.sqrt_gamma, self.quantum, i_wins);
        self.wealths[i] = a;
        self.wealths[j] = b;
        self.transactions += 1;
    }

    pub fn run(&mut self, transactions: u64) {
        for _ in 0..transactions {
            self.step();
        }
    }
}

/// Ensemble configuration. Replica `r` uses stream `r` of the generator
/// seeded with `seed`, so replicas are independent of the thread schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub agents: usize,
    pub gamma: f64,
    pub replicas: usize,
    pub seed: u64,
    pub initial: AgentInitial,
    /// Mean-field end time.
    pub t_end: f64,
    pub record_interval: f64,
    /// Transactions per unit of mean-field time, in multiples of `agents`.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
}

fn default_time_scale() -> f64 {
    1.0
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if self.agents < 2 {
            return Err(Error::invalid("at least two agents are needed"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("at least one replica is needed"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!("t_end {} must be finite and >= 0", self.t_end)));
        }
        if !(self.record_interval > 0.0 && self.record_interval.is_finite()) {
            return Err(Error::invalid(format!(
                "record_interval {} must be positive",
                self.record_interval
            )));
        }
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "time_scale {} must be positive",
                self.time_scale
            )));
        }
        Ok(())
    }

    fn transactions_per_unit(&self) -> f64 {
        self.time_scale * self.agents as f64
    }

    /// Record times with the transaction count each one maps to. Times
    /// follow the same rule as the PDE runs.
    pub fn schedule(&self) -> Vec<(f64, u64)> {
        let per_unit = self.transactions_per_unit();
        let time = TimeSpec {
            t_end: self.t_end,
            dt: None,
            record_interval: Some(self.record_interval),
        };
        time.record_times()
            .into_iter()
            .map(|t| (t, (t * per_unit).round() as u64))
            .collect()
    }
}

/// One replica's trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRun {
    pub replica: usize,
    pub transactions: Vec<u64>,
    pub metrics: MetricSeries,
    pub final_wealths: Vec<f64>,
}

/// All replicas plus ensemble statistics at each record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEnsemble {
    pub times: Vec<f64>,
    pub replicas: Vec<ReplicaRun>,
    pub mean_gini: Vec<f64>,
    /// Standard error of the mean Gini across replicas.
    pub gini_se: Vec<f64>,
    /// Node-wise replica average of the empirical Lorenz curves.
    pub mean_lorenz: Vec<LorenzCurve>,
}

impl AgentEnsemble {
    /// Ensemble-averaged diagnostics in the common metric layout.
    pub fn metrics(&self) -> MetricSeries {
        let mut series = MetricSeries::default();
        for (k, curve) in self.mean_lorenz.iter().enumerate() {
            let r = self.replicas.len() as f64;
            let avg = |col: fn(&MetricSeries) -> &Vec<f64>| {
                self.replicas.iter().map(|rep| col(&rep.metrics)[k]).sum::<f64>() / r
            };
            series.push(MetricRecord {
                time: self.times[k],
                gini: Some(self.mean_gini[k]),
                hoover: Some(hoover_from_lorenz(curve)),
                mean: avg(|m| &m.mean),
                std: avg(|m| &m.std),
                mass_error: self
                    .replicas
                    .iter()
                    .map(|rep| rep.metrics.mass_error[k].abs())
                    .fold(0.0, f64::max),
                convexity_margin: Some(curve.convexity_margin()),
            });
        }
        series
    }
}

fn replica_record(pop: &AgentPopulation, initial_total: f64, time: f64) -> Result<(MetricRecord, LorenzCurve)> {
    let w = pop.wealths();
    let n = w.len() as f64;
    let total = pop.total();
    let mean = total / n;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let curve = empirical_lorenz(w, time)?;
    let record = MetricRecord {
        time,
        gini: Some(pairwise_gini(w)?),
        hoover: Some(hoover_from_lorenz(&curve)),
        mean,
        std: var.sqrt(),
        mass_error: total / initial_total - 1.0,
        convexity_margin: Some(curve.convexity_margin()),
    };
    Ok((record, curve))
}

fn run_replica(config: &AgentConfig, replica: usize) -> Result<(ReplicaRun, Vec<LorenzCurve>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replica as u64);
    let wealths = config.initial.build(config.agents, &mut rng)?;
    let mut pop = AgentPopulation::new(wealths, config.gamma, rng)?;
    let initial_total = pop.total();
    let mut metrics = MetricSeries::default();
    let mut transactions = Vec::new();
    let mut curves = Vec::new();
    for (t, target) in config.schedule() {
        pop.run(target - pop.transactions());
        let (record, curve) = replica_record(&pop, initial_total, t)?;
        metrics.push(record);
        transactions.push(pop.transactions());
        curves.push(curve);
    }
    let run = ReplicaRun {
        replica,
        transactions,
        metrics,
        final_wealths: pop.wealths().to_vec(),
    };
    Ok((run, curves))
}

/// Runs every replica in parallel and aggregates in replica order.
pub fn run_agents(config: &AgentConfig) -> Result<AgentEnsemble> {
    config.validate()?;
    let results: Vec<(ReplicaRun, Vec<LorenzCurve>)> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, r))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = config.schedule().into_iter().map(|(t, _)| t).collect();
    let r = config.replicas as f64;
    let mut mean_gini = Vec::with_capacity(times.len());
    let mut gini_se = Vec::with_capacity(times.len());
    let mut mean_lorenz = Vec::with_capacity(times.len());
    for (k, t) in times.iter().enumerate() {
        let g: Vec<f64> = results
            .iter()
            .map(|(run, _)| run.metrics.gini[k].expect("agent Gini is always recorded"))
            .collect();
        let m = g.iter().sum::<f64>() / r;
        let se = if config.replicas > 1 {
            (g.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1.0) / r).sqrt()
        } else {
            f64::NAN
        };
        mean_gini.push(m);
        gini_se.push(se);
        let nodes = config.agents + 1;
        let mut avg = vec![0.0; nodes];
        for (_, curves) in &results {
            for (a, v) in avg.iter_mut().zip(curves[k].values()) {
                *a += v / r;
            }
        }
        avg[0] = 0.0;
        avg[nodes - 1] = 1.0;
        mean_lorenz.push(LorenzCurve::new(avg, *t, Domain::PositiveHalfLine)?);
    }
    Ok(AgentEnsemble {
        times,
        replicas: results.into_iter().map(|(run, _)| run).collect(),
        mean_gini,
        gini_se,
        mean_lorenz,
    })
}

/// Linear interpolation in a time-sorted series; `None` outside its range.
pub fn interpolate(series: &[(f64, f64)], t: f64) -> Option<f64> {
    let first = series.first()?;
    let last = series.last()?;
    if t < first.0 || t > last.0 {
        return None;
    }
    let k = series.partition_point(|(s, _)| *s <= t);
    if k == 0 {
        return Some(first.1);
    }
    if k == series.len() {
        return Some(last.1);
    }
    let (t0, g0) = series[k - 1];
    let (t1, g1) = series[k];
    Some(g0 + (g1 - g0) * (t - t0) / (t1 - t0))
}

/// Least-squares factor `c` such that agent Gini recorded at `sweeps`
/// (transactions divided by `N`) matches the mean-field Gini at time
/// `sweeps / c`. Golden-section search on `ln c` over `[lo, hi]`.
pub fn fit_time_scale(sweeps: &[f64], agent_gini: &[f64], mean_field: &[(f64, f64)], lo: f64, hi: f64) -> Result<f64> {
    if sweeps.len() != agent_gini.len() || sweeps.len() < 2 {
        return Err(Error::invalid("time-scale fit needs matching series of length >= 2"));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid(format!("bad time-scale bracket [{lo}, {hi}]")));
    }
    let cost = |c: f64| -> f64 {
        let mut sse = 0.0;
        let mut used = 0usize;
        for (s, g) in sweeps.iter().zip(agent_gini) {
            if let Some(p) = interpolate(mean_field, s / c) {
                sse += (g - p) * (g - p);
                used += 1;
            }
        }
        if used < 2 {
            f64::INFINITY
        } else {
            sse / used as f64
        }
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut c1, mut c2) = (cost(x1.exp()), cost(x2.exp()));
    while b - a > 1e-10 {
        if c1 <= c2 {
            b = x2;
            x2 = x1;
            c2 = c1;
            x1 = b - phi * (b - a);
            c1 = cost(x1.exp());
        } else {
            a = x1;
            x1 = x2;
            c1 = c2;
            x2 = a + phi * (b - a);
            c2 = cost(x2.exp());
        }
    }
    let c = (0.5 * (a + b)).exp();
    if !cost(c).is_finite() {
        return Err(Error::Numerical(
            "time-scale fit found no overlap with the mean-field series".into(),
        ));
    }
    Ok(c)
}
