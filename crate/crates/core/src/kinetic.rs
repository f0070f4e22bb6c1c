//! Pairwise money-exchange Monte Carlo.
//!
//! Money is held as integer quanta so that every transfer conserves the
//! total exactly. Agents pay each other under an [`ExchangeRule`]; a step
//! that would push the payer below the floor is rejected, never clipped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent money balances in integer quanta.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEnsemble {
    balances: Vec<i64>,
    total: i64,
    /// Currency value of one quantum (`m*`).
    quantum: f64,
}

impl AgentEnsemble {
    /// Equal division of `total` quanta among `n` agents; the remainder goes
    /// one quantum each to the first `total mod n` agents.
    pub fn new(n: usize, total: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("ensemble needs at least one agent"));
        }
        if total < 0 {
            return Err(Error::domain(format!("total money must be non-negative, got {total}")));
        }
        let base = total / n as i64;
        let rem = (total % n as i64) as usize;
        let balances = (0..n).map(|i| base + i64::from(i < rem)).collect();
        Ok(AgentEnsemble {
            balances,
            total,
            quantum: 1.0,
        })
    }

    pub fn from_balances(balances: Vec<i64>) -> Result<Self> {
        if balances.is_empty() {
            return Err(Error::domain("ensemble needs at least one agent"));
        }
        let total = balances.iter().sum();
        Ok(AgentEnsemble {
            balances,
            total,
            quantum: 1.0,
        })
    }

    pub fn with_quantum(mut self, quantum: f64) -> Result<Self> {
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(Error::domain(format!("money quantum must be positive, got {quantum}")));
        }
        self.quantum = quantum;
        Ok(self)
    }

    pub fn balances(&self) -> &[i64] {
        &self.balances
    }

    pub fn len(&self) -> usize {
        self.balances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }

    /// Tracked total `M` in quanta.
    pub fn total(&self) -> i64 {
        self.total
    }

    /// Recomputed sum of balances; equals [`total`](Self::total) unless
    /// conservation has been broken.
    pub fn balance_sum(&self) -> i64 {
        self.balances.iter().sum()
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    pub fn min_balance(&self) -> i64 {
        self.balances.iter().copied().min().unwrap_or(0)
    }

    /// `T = M/N` in currency units.
    pub fn temperature(&self) -> f64 {
        self.total as f64 / self.len() as f64 * self.quantum
    }

    /// Moves `amount` quanta from `from` to `to` if the payer stays at or
    /// above `floor`. Returns whether the transfer happened.
    pub fn transfer(&mut self, from: usize, to: usize, amount: i64, floor: i64) -> bool {
        if from == to || self.balances[from] - amount < floor {
            return false;
        }
        self.balances[from] -= amount;
        self.balances[to] += amount;
        true
    }

    fn remove_agent(&mut self, idx: usize) -> i64 {
        let m = self.balances.swap_remove(idx);
        self.total -= m;
        m
    }

    fn add_agent(&mut self, balance: i64) {
        self.balances.push(balance);
        self.total += balance;
    }

    /// Histogram with bins `width_quanta` quanta wide, anchored at the
    /// lowest balance rounded down to a bin edge.
    pub fn histogram(&self, width_quanta: i64) -> BinnedHistogram {
        BinnedHistogram::from_balances(&self.balances, width_quanta.max(1), self.quantum)
    }
}

/// Free-function form of [`AgentEnsemble::new`].
pub fn init_ensemble(n: usize, total: i64) -> Result<AgentEnsemble> {
    AgentEnsemble::new(n, total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    /// Fixed `delta` quanta per transaction.
    Fixed,
    /// Uniform integer amount in `[1, m_i + m_j - 2 floor]`, the range set by
    /// the pair's combined money above the floor.
    Uniform,
}

impl std::str::FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(RuleKind::Fixed),
            "uniform" => Ok(RuleKind::Uniform),
            other => Err(Error::Config(format!("unknown exchange rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRule {
    pub kind: RuleKind,
    pub delta: i64,
    pub floor: i64,
}

impl ExchangeRule {
    pub fn new(kind: RuleKind, delta: i64, floor: i64) -> Result<Self> {
        if delta < 1 {
            return Err(Error::domain(format!("transfer quantum must be >= 1, got {delta}")));
        }
        if floor > 0 {
            return Err(Error::domain(format!("balance floor must be <= 0, got {floor}")));
        }
        Ok(ExchangeRule { kind, delta, floor })
    }

    pub fn fixed(delta: i64) -> Result<Self> {
        Self::new(RuleKind::Fixed, delta, 0)
    }

    pub fn uniform() -> Self {
        ExchangeRule {
            kind: RuleKind::Uniform,
            delta: 1,
            floor: 0,
        }
    }

    /// Allow debt down to `-max_debt`.
    pub fn with_debt_limit(self, max_debt: i64) -> Result<Self> {
        Self::new(self.kind, self.delta, -max_debt.abs())
    }

    /// Draws the amount the payer would send; `None` when no positive
    /// amount is available.
    fn draw<R: Rng>(&self, payer: i64, payee: i64, rng: &mut R) -> Option<i64> {
        match self.kind {
            RuleKind::Fixed => Some(self.delta),
            RuleKind::Uniform => {
                let span = payer + payee - 2 * self.floor;
                (span >= 1).then(|| rng.random_range(1..=span))
            }
        }
    }
}

/// One exchange between a uniformly chosen ordered pair `i != j`.
pub fn exchange_step<R: Rng>(ens: &mut AgentEnsemble, rule: &ExchangeRule, rng: &mut R) -> bool {
    let n = ens.balances.len();
    if n < 2 {
        return false;
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    match rule.draw(ens.balances[i], ens.balances[j], rng) {
        Some(amount) => ens.transfer(i, j, amount, rule.floor),
        None => false,
    }
}

/// Occupation counts over uniform bins of the money axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedHistogram {
    /// Bin width in currency units (`m*` times quanta per bin).
    pub bin_width: f64,
    /// Lower edge of bin 0, in quanta.
    pub origin: i64,
    pub width_quanta: i64,
    pub counts: Vec<u64>,
}

impl BinnedHistogram {
    pub fn from_balances(balances: &[i64], width_quanta: i64, quantum: f64) -> Self {
        let lo = balances.iter().copied().min().unwrap_or(0);
        let hi = balances.iter().copied().max().unwrap_or(0);
        let origin = lo.div_euclid(width_quanta) * width_quanta;
        let bins = ((hi - origin) / width_quanta + 1) as usize;
        let mut counts = vec![0u64; if balances.is_empty() { 0 } else { bins }];
        for &b in balances {
            counts[((b - origin) / width_quanta) as usize] += 1;
        }
        BinnedHistogram {
            bin_width: width_quanta as f64 * quantum,
            origin,
            width_quanta,
            counts,
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        BinnedHistogram {
            bin_width: 1.0,
            origin: 0,
            width_quanta: 1,
            counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower edge of bin `k` in currency units.
    pub fn bin_lower(&self, k: usize) -> f64 {
        let quantum = self.bin_width / self.width_quanta as f64;
        (self.origin + k as i64 * self.width_quanta) as f64 * quantum
    }

    pub fn entropy(&self) -> Result<f64> {
        entropy(&self.counts)
    }
}

/// Stirling-form entropy `-sum N_k ln(N_k / N)` with `0 ln 0 = 0`.
pub fn entropy(counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::domain("entropy of an empty histogram"));
    }
    let nf = n as f64;
    Ok(0.0 - counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c * (c / nf).ln()
        })
        .sum::<f64>())
}

/// Exponential-equilibrium entropy `N (1 + ln(T/m*))`.
pub fn equilibrium_entropy(n: usize, t_over_quantum: f64) -> f64 {
    n as f64 * (1.0 + t_over_quantum.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplicity {
    pub omega: u128,
    pub ln_omega: f64,
}

/// Exact multinomial `N! / prod N_k!` for `N <= 20`.
pub fn multiplicity_exact(counts: &[u64]) -> Result<Multiplicity> {
    let n: u64 = counts.iter().sum();
    if n > 20 {
        return Err(Error::Range(format!("{n} agents exceed the exact factorial range (20)")));
    }
    let fact = |k: u64| (1..=k as u128).product::<u128>();
    let omega = counts.iter().fold(fact(n), |acc, &c| acc / fact(c));
    Ok(Multiplicity {
        omega,
        ln_omega: (omega as f64).ln(),
    })
}

/// Money temperature `T = M/N` and chemical potential `mu = -T ln(T/m*)`,
/// both in currency units.
pub fn temperature_and_potential(ens: &AgentEnsemble) -> Result<(f64, f64)> {
    let t = ens.temperature();
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "chemical potential undefined for temperature {t} (total money {})",
            ens.total()
        )));
    }
    Ok((t, -t * (t / ens.quantum()).ln()))
}

/// Sup distance between the complementary CDF of the balances (shifted by
/// `floor`) and `exp(-m/T)`, `T = mean - floor`, over the integer lattice.
pub fn ks_distance_exponential(balances: &[i64], floor: i64) -> f64 {
    if balances.is_empty() {
        return 0.0;
    }
    let mut shifted: Vec<i64> = balances.iter().map(|b| b - floor).collect();
    shifted.sort_unstable();
    let n = shifted.len() as f64;
    let t = shifted.iter().sum::<i64>() as f64 / n;
    if t <= 0.0 {
        return 1.0;
    }
    let max = *shifted.last().unwrap_or(&0);
    let mut idx = 0usize;
    let mut worst: f64 = 0.0;
    for k in 0..=max + 1 {
        while idx < shifted.len() && shifted[idx] < k {
            idx += 1;
        }
        let emp = (shifted.len() - idx) as f64 / n;
        worst = worst.max((emp - (-(k as f64) / t).exp()).abs());
    }
    worst
}

/// Single-threaded engine owning one ensemble and its random stream.
#[derive(Debug, Clone)]
pub struct Engine {
    ens: AgentEnsemble,
    rule: ExchangeRule,
    rng: ChaCha8Rng,
    steps: u64,
    accepted: u64,
}

impl Engine {
    pub fn new(ens: AgentEnsemble, rule: ExchangeRule, seed: u64) -> Self {
        Engine {
            ens,
            rule,
            rng: ChaCha8Rng::seed_from_u64(seed),
            steps: 0,
            accepted: 0,
        }
    }

    pub fn step(&mut self) -> bool {
        let ok = exchange_step(&mut self.ens, &self.rule, &mut self.rng);
        self.steps += 1;
        self.accepted += u64::from(ok);
        ok
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    pub fn ensemble(&self) -> &AgentEnsemble {
        &self.ens
    }

    pub fn into_ensemble(self) -> AgentEnsemble {
        self.ens
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    fn checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            step: self.steps,
            entropy: self.ens.histogram(1).entropy()?,
            temperature: self.ens.temperature(),
            money_sum: self.ens.balance_sum(),
            min_balance: self.ens.min_balance(),
            accepted: self.accepted,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    pub entropy: f64,
    pub temperature: f64,
    /// Recomputed integer sum of balances at this step.
    pub money_sum: i64,
    pub min_balance: i64,
    pub accepted: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub final_histogram: BinnedHistogram,
    pub final_ensemble: AgentEnsemble,
}

/// Runs `steps` exchanges from `ens`, recording entropy (bins of one
/// quantum) at step 0, every `checkpoint_every` steps and at the end.
pub fn run_simulation(
    ens: AgentEnsemble,
    rule: ExchangeRule,
    steps: u64,
    checkpoint_every: u64,
    seed: u64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::domain("simulation needs at least one step"));
    }
    let every = if checkpoint_every == 0 { steps } else { checkpoint_every };
    let mut engine = Engine::new(ens, rule, seed);
    let mut checkpoints = vec![engine.checkpoint()?];
    let mut done = 0;
    while done < steps {
        let chunk = every.min(steps - done);
        engine.run(chunk);
        done += chunk;
        checkpoints.push(engine.checkpoint()?);
    }
    let final_histogram = engine.ensemble().histogram(1);
    Ok(Trajectory {
        checkpoints,
        final_histogram,
        final_ensemble: engine.into_ensemble(),
    })
}

fn default_quantum() -> f64 {
    1.0
}

fn default_delta() -> i64 {
    1
}

/// JSON-serializable simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub total_money_quanta: i64,
    #[serde(default = "default_quantum")]
    pub quantum_value: f64,
    pub rule: RuleKind,
    #[serde(default = "default_delta")]
    pub delta: i64,
    #[serde(default)]
    pub floor: i64,
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub checkpoint_every: u64,
}

impl SimConfig {
    pub fn run(&self) -> Result<Trajectory> {
        let ens = AgentEnsemble::new(self.n_agents, self.total_money_quanta)?
            .with_quantum(self.quantum_value)?;
        let rule = ExchangeRule::new(self.rule, self.delta, self.floor)?;
        run_simulation(ens, rule, self.steps, self.checkpoint_every, self.seed)
    }
}

/// Net fluxes between two coupled ensembles, system 1 to system 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxReport {
    pub steps: u64,
    pub migration_rate: f64,
    /// Net money moved from 1 to 2, currency units.
    pub delta_money: f64,
    /// Net agents moved from 1 to 2.
    pub delta_agents: i64,
    /// `(1/T2 - 1/T1) dM + ln(T2/T1) dN` at the initial temperatures.
    pub delta_entropy: f64,
    pub t1_initial: f64,
    pub t2_initial: f64,
    pub t1_final: f64,
    pub t2_final: f64,
    pub exchanges_accepted: u64,
    pub migrations_accepted: u64,
}

/// Linear-response entropy change for money flux `dm` and agent flux `dn`
/// from a system at `t1` to one at `t2`.
pub fn entropy_flux(t1: f64, t2: f64, dm: f64, dn: f64) -> f64 {
    (1.0 / t2 - 1.0 / t1) * dm + (t2 / t1).ln() * dn
}

/// What a migrating agent takes along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MigrationMode {
    /// The agent moves with its full balance.
    CarryBalance,
    /// The agent hands its balance to a random remaining agent of the
    /// source system and arrives with nothing, so agents move at fixed money.
    LeaveBalance,
}

/// Settings for [`couple_systems`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub steps: u64,
    /// Probability that a step is a migration proposal.
    pub migration_rate: f64,
    pub migration: MigrationMode,
    pub seed: u64,
}

impl Coupling {
    /// Cross-system money exchange only.
    pub fn exchange_only(steps: u64, seed: u64) -> Self {
        Coupling { steps, migration_rate: 0.0, migration: MigrationMode::LeaveBalance, seed }
    }

    /// Migration proposals only.
    pub fn migration_only(steps: u64, migration: MigrationMode, seed: u64) -> Self {
        Coupling { steps, migration_rate: 1.0, migration, seed }
    }
}

/// Couples two ensembles. Each step is, with probability `migration_rate`,
/// a migration proposal: a uniformly chosen agent moves to the other system,
/// accepted with probability `min(1, e^{dS})` where `dS` is the entropy flux
/// of the move at the current temperatures. Otherwise it is one
/// cross-system exchange between a random agent of each system with a
/// random payer. A system never drops below one agent.
pub fn couple_systems(
    sys1: &mut AgentEnsemble,
    sys2: &mut AgentEnsemble,
    rule: &ExchangeRule,
    coupling: &Coupling,
) -> Result<FluxReport> {
    let migration_rate = coupling.migration_rate;
    if !(0.0..=1.0).contains(&migration_rate) {
        return Err(Error::domain(format!("migration rate must lie in [0, 1], got {migration_rate}")));
    }
    if sys1.quantum() != sys2.quantum() {
        return Err(Error::domain("coupled systems must share the money quantum"));
    }
    let (t1, _) = temperature_and_potential(sys1)?;
    let (t2, _) = temperature_and_potential(sys2)?;
    let q = sys1.quantum();
    let mut rng = ChaCha8Rng::seed_from_u64(coupling.seed);
    let mut dm: i64 = 0;
    let mut dn: i64 = 0;
    let mut exchanges = 0u64;
    let mut migrations = 0u64;

    for _ in 0..coupling.steps {
        if migration_rate > 0.0 && rng.random::<f64>() < migration_rate {
            let (n1, n2) = (sys1.len(), sys2.len());
            let pick = rng.random_range(0..n1 + n2);
            let u: f64 = rng.random();
            let from_first = pick < n1;
            let (src, dst, idx) = if from_first {
                (&mut *sys1, &mut *sys2, pick)
            } else {
                (&mut *sys2, &mut *sys1, pick - n1)
            };
            if src.len() < 2 {
                continue;
            }
            let (ts, td) = (src.temperature(), dst.temperature());
            if !(ts > 0.0 && td > 0.0) {
                continue;
            }
            let carried = match coupling.migration {
                MigrationMode::CarryBalance => src.balances[idx],
                MigrationMode::LeaveBalance => 0,
            };
            let ds = entropy_flux(ts, td, carried as f64 * q, 1.0);
            if !(ds >= 0.0 || u < ds.exp()) {
                continue;
            }
            let balance = src.remove_agent(idx);
            let left = balance - carried;
            if left != 0 {
                let heir = rng.random_range(0..src.len());
                if src.balances[heir] + left < rule.floor {
                    // undo: the heir cannot absorb the debt
                    src.add_agent(balance);
                    let last = src.len() - 1;
                    src.balances.swap(idx, last);
                    continue;
                }
                src.balances[heir] += left;
                src.total += left;
            }
            dst.add_agent(carried);
            migrations += 1;
            let sign = if from_first { 1 } else { -1 };
            dm += sign * carried;
            dn += sign;
        } else {
            let i = rng.random_range(0..sys1.len());
            let j = rng.random_range(0..sys2.len());
            let first_pays: bool = rng.random();
            let (payer, payee) = if first_pays {
                (sys1.balances[i], sys2.balances[j])
            } else {
                (sys2.balances[j], sys1.balances[i])
            };
            let Some(amount) = rule.draw(payer, payee, &mut rng) else {
                continue;
            };
            if payer - amount < rule.floor {
                continue;
            }
            if first_pays {
                sys1.balances[i] -= amount;
                sys2.balances[j] += amount;
                sys1.total -= amount;
                sys2.total += amount;
                dm += amount;
            } else {
                sys2.balances[j] -= amount;
                sys1.balances[i] += amount;
                sys2.total -= amount;
                sys1.total += amount;
                dm -= amount;
            }
            exchanges += 1;
        }
    }

    let delta_money = dm as f64 * q;
    Ok(FluxReport {
        steps: coupling.steps,
        migration_rate,
        delta_money,
        delta_agents: dn,
        delta_entropy: entropy_flux(t1, t2, delta_money, dn as f64),
        t1_initial: t1,
        t2_initial: t2,
        t1_final: sys1.temperature(),
        t2_final: sys2.temperature(),
        exchanges_accepted: exchanges,
        migrations_accepted: migrations,
    })
}

/// Seed for replica `index` derived from `base` (splitmix64 finalizer).
pub fn replica_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `count` independent replicas in parallel; results keep replica order.
pub fn run_replicas<T, F>(count: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| f(replica_seed(base_seed, i)))
        .collect()
}

/// Closed speculation cycle in the (volume, price) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub p1: f64,
    pub p2: f64,
    pub v1: f64,
    pub v2: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleOutcome {
    /// Area `(P1 - P2)(V2 - V1)` enclosed by the cycle.
    pub profit: f64,
    /// `(T1 - T2) / T2`.
    pub rate: f64,
}

pub fn cycle_profit_and_rate(cycle: &CycleSpec) -> Result<CycleOutcome> {
    let CycleSpec { p1, p2, v1, v2, t1, t2 } = *cycle;
    if !(t2 > 0.0) {
        return Err(Error::domain(format!("low temperature must be positive, got {t2}")));
    }
    if !(t1 > 0.0) {
        return Err(Error::domain(format!("high temperature must be positive, got {t1}")));
    }
    if !(p2 > 0.0 && p1 > p2) {
        return Err(Error::domain(format!("prices need P1 > P2 > 0, got P1={p1}, P2={p2}")));
    }
    if !(v1 >= 0.0 && v2 > v1) {
        return Err(Error::domain(format!("volumes need V2 > V1 >= 0, got V1={v1}, V2={v2}")));
    }
    Ok(CycleOutcome {
        profit: (p1 - p2) * (v2 - v1),
        rate: (t1 - t2) / t2,
    })
}
