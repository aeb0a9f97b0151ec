//! Training loops over a single continuing system run.
//!
//! Each outer iteration `k`: reset the learners' Q-tables, sample `M_pg`
//! blocks of `M_td` environment steps (updating online, or filling the replay
//! buffer), replay if applicable, take the mirror-ascent step, produce σ, then
//! communicate (networked) or push the central policy (centralised). The
//! global step counter `t` advances on every environment step, including the
//! σ-evaluation and communication steps, and never resets.

use rand::Rng;
use rayon::prelude::*;

use crate::comms::{build_graph, select_sources, tau_at, TauSchedule};
use crate::env::{env_step_all, GameKind};
use crate::error::{Error, Result};
use crate::learning::{beta_at, buffer_replay, pma_update, td_update, BetaSchedule, LagWindow, ReplayBuffer};
use crate::metrics::{average_return, exploitability_approx, policy_divergence, Metric, RunLog};
use crate::rng::{agent_rng, world_rng, StreamRng};
use crate::types::{
    entropy_unchecked, q_max, uniform_policy, Action, Algorithm, Architecture, GridSpec,
    Hyperparams, Policy, QTable, SigmaSource,
};

/// Environment steps taken at the start of every iteration before the first
/// lagged transition is used, so that `ζ_{t-2}` is generated by the current policy.
pub const WARMUP_STEPS: usize = 2;

/// A fully specified problem: hyperparameters, game and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub hp: Hyperparams,
    pub game: GameKind,
    pub grid: GridSpec,
}

impl Scenario {
    pub fn new(hp: Hyperparams, game: GameKind, grid: GridSpec) -> Result<Self> {
        hp.validate()?;
        game.validate(&grid)?;
        if let Some(add) = hp.population_add {
            if add.at_k > hp.k {
                return Err(Error::range(
                    "population_add",
                    format!("iteration {} is beyond k = {}", add.at_k, hp.k),
                ));
            }
        }
        Ok(Self { hp, game, grid })
    }

    pub fn n_states(&self) -> usize {
        self.grid.n_states()
    }

    fn q_init(&self) -> f64 {
        q_max(self.hp.gamma, self.hp.lambda, Action::COUNT).expect("gamma validated")
    }
}

/// What is measured besides the per-iteration return and divergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsOptions {
    /// Probe cadence in iterations; 0 disables the exploitability probe.
    pub exploitability_every: usize,
    pub exploitability_loops: usize,
    /// Configuration digest stamped on the log.
    pub digest: String,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            exploitability_every: 2,
            exploitability_loops: 40,
            digest: String::new(),
        }
    }
}

impl MetricsOptions {
    pub fn without_exploitability() -> Self {
        Self {
            exploitability_every: 0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub state: usize,
    pub policy: Policy,
    pub q: QTable,
    pub buffer: ReplayBuffer,
    pub sigma: f64,
    pub lag: LagWindow,
}

impl AgentState {
    fn fresh(state: usize, sc: &Scenario) -> Self {
        let n_states = sc.n_states();
        Self {
            state,
            policy: uniform_policy(n_states, Action::COUNT),
            q: QTable::filled(n_states, Action::COUNT, sc.q_init()),
            buffer: ReplayBuffer::with_capacity(sc.hp.m_pg),
            sigma: 0.0,
            lag: LagWindow::default(),
        }
    }
}

/// Live system: per-agent learners plus the clocks and random streams.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub t: u64,
    pub k: usize,
    pub seed: u64,
    pub agents: Vec<AgentState>,
    /// One private stream per agent, indexed like `agents`.
    pub rngs: Vec<StreamRng>,
    pub world: StreamRng,
}

impl RunState {
    /// Initial population with uniform policies at uniformly random cells.
    pub fn initial(sc: &Scenario, seed: u64) -> Self {
        let mut world = world_rng(seed);
        let n = sc.hp.n_agents;
        let agents = (0..n)
            .map(|_| AgentState::fresh(world.gen_range(0..sc.n_states()), sc))
            .collect();
        Self {
            t: 0,
            k: 0,
            seed,
            agents,
            rngs: (0..n).map(|i| agent_rng(seed, i)).collect(),
            world,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn states(&self) -> Vec<usize> {
        self.agents.iter().map(|a| a.state).collect()
    }

    pub fn policies(&self) -> Vec<Policy> {
        self.agents.iter().map(|a| a.policy.clone()).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.sigma).collect()
    }
}

/// Which agents run the learning core in a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Learners {
    All,
    Only(usize),
    Nobody,
}

impl Learners {
    fn contains(self, i: usize) -> bool {
        match self {
            Learners::All => true,
            Learners::Only(j) => i == j,
            Learners::Nobody => false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Policy rows where the entropic mirror-ascent solve hit its cap.
    pub unconverged_pma_rows: usize,
    /// Learner updates skipped by injected failures.
    pub failed_updates: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub final_state: RunState,
    pub diagnostics: Diagnostics,
}

/// Learning machinery shared by training and the exploitability probe.
pub(crate) struct Engine<'a> {
    pub sc: &'a Scenario,
    pub run: &'a mut RunState,
    beta: BetaSchedule,
    q_init: f64,
    pub diagnostics: Diagnostics,
}

impl<'a> Engine<'a> {
    pub fn new(sc: &'a Scenario, run: &'a mut RunState) -> Result<Self> {
        Ok(Self {
            beta: sc.hp.beta_schedule()?,
            q_init: sc.q_init(),
            sc,
            run,
            diagnostics: Diagnostics::default(),
        })
    }

    /// One synchronous environment step; returns each agent's regularised
    /// reward `r + h(π(s))` at its pre-step state.
    pub fn step(&mut self) -> Result<Vec<f64>> {
        let lambda = self.sc.hp.lambda;
        let run = &mut *self.run;
        let states = run.states();
        let actions: Vec<Action> = run
            .agents
            .iter()
            .zip(run.rngs.iter_mut())
            .map(|(agent, rng)| {
                let a = agent.policy.sample_with(agent.state, rng.gen());
                Action::from_index(a).expect("policy over the action set")
            })
            .collect();
        let result = env_step_all(&states, &actions, &self.sc.game, &self.sc.grid)?;
        let mut regularised = Vec::with_capacity(states.len());
        for (i, agent) in run.agents.iter_mut().enumerate() {
            let r = result.rewards[i];
            agent.lag.record(states[i], actions[i].index(), r);
            regularised.push(r + entropy_unchecked(agent.policy.row(states[i]), lambda));
            agent.state = result.next_states[i];
        }
        run.t += 1;
        Ok(regularised)
    }

    /// Q reset, warm-up, then `M_pg × M_td` sampling steps. Learners either
    /// update online on `ζ_{t-2}` or buffer it. Returns each agent's
    /// discounted regularised return over the sampling steps.
    pub fn sample_phase(&mut self, learners: Learners) -> Result<Vec<f64>> {
        let hp = &self.sc.hp;
        let (m_pg, m_td, gamma, lambda) = (hp.m_pg, hp.m_td, hp.gamma, hp.lambda);
        let algorithm = hp.algorithm;
        for (i, agent) in self.run.agents.iter_mut().enumerate() {
            agent.lag.clear();
            if learners.contains(i) {
                agent.q.fill(self.q_init);
                agent.buffer.reset(m_pg);
            }
        }
        for _ in 0..WARMUP_STEPS {
            self.step()?;
        }
        let n = self.run.n_agents();
        let mut returns = vec![0.0; n];
        let mut discount = 1.0;
        for m in 0..m_pg {
            for _ in 0..m_td {
                let rewards = self.step()?;
                for (acc, r) in returns.iter_mut().zip(rewards) {
                    *acc += discount * r;
                }
                discount *= gamma;
            }
            if matches!(learners, Learners::Nobody) {
                continue;
            }
            let beta = match algorithm {
                Algorithm::Theoretical => Some(beta_at(self.beta, m, gamma)?),
                Algorithm::Replay => None,
            };
            for (i, agent) in self.run.agents.iter_mut().enumerate() {
                if !learners.contains(i) {
                    continue;
                }
                let Some(zeta) = agent.lag.latest_complete() else {
                    continue;
                };
                match beta {
                    Some(beta) => td_update(&mut agent.q, &zeta, &agent.policy, beta, lambda, gamma),
                    None => agent.buffer.push(zeta)?,
                }
            }
        }
        Ok(returns)
    }

    /// `L` shuffled passes over every learner's buffer.
    pub fn replay_phase(&mut self, learners: Learners) {
        let hp = &self.sc.hp;
        let (passes, beta, lambda, gamma) = (hp.l, hp.beta, hp.lambda, hp.gamma);
        self.run
            .agents
            .par_iter_mut()
            .zip(self.run.rngs.par_iter_mut())
            .enumerate()
            .filter(|(i, _)| learners.contains(*i))
            .for_each(|(_, (agent, rng))| {
                let AgentState { buffer, q, policy, .. } = agent;
                buffer_replay(buffer, q, policy, passes, beta, lambda, gamma, rng);
            });
    }

    /// Mirror-ascent step for every learner whose skip flag is unset.
    pub fn policy_update(&mut self, learners: Learners, skip: &[bool]) {
        let (eta, lambda) = (self.sc.hp.eta, self.sc.hp.lambda);
        let unconverged: usize = self
            .run
            .agents
            .par_iter_mut()
            .enumerate()
            .filter(|(i, _)| learners.contains(*i) && !skip.get(*i).copied().unwrap_or(false))
            .map(|(_, agent)| {
                let out = pma_update(&agent.q, &agent.policy, eta, lambda);
                agent.policy = out.policy;
                out.unconverged_rows
            })
            .sum();
        self.diagnostics.unconverged_pma_rows += unconverged;
    }

    /// Advances `E` steps under the current policies, accumulating each
    /// agent's discounted regularised reward into its σ.
    pub fn evaluate_sigma(&mut self, steps: usize) -> Result<Vec<f64>> {
        let gamma = self.sc.hp.gamma;
        let mut sigma = vec![0.0; self.run.n_agents()];
        let mut discount = 1.0;
        for _ in 0..steps {
            let rewards = self.step()?;
            for (acc, r) in sigma.iter_mut().zip(rewards) {
                *acc += discount * r;
            }
            discount *= gamma;
        }
        for (agent, &s) in self.run.agents.iter_mut().zip(&sigma) {
            agent.sigma = s;
        }
        Ok(sigma)
    }

    /// `C` rounds of broadcast, adoption and one interleaved environment
    /// step. The radius graph is rebuilt from positions before every round.
    pub fn communicate(&mut self, rounds: usize, tau: &TauSchedule) -> Result<()> {
        let temp = tau_at(tau, self.run.k);
        for _ in 0..rounds {
            let graph = build_graph(
                &self.run.states(),
                &self.sc.grid,
                self.sc.hp.broadcast_radius_fraction,
            );
            let sigmas = self.run.sigmas();
            let sources = select_sources(&sigmas, &graph, temp, &mut self.run.rngs);
            let policies: Vec<Policy> = sources
                .iter()
                .map(|&j| self.run.agents[j].policy.clone())
                .collect();
            for ((agent, policy), &j) in self.run.agents.iter_mut().zip(policies).zip(&sources) {
                agent.policy = policy;
                agent.sigma = sigmas[j];
            }
            self.step()?;
        }
        Ok(())
    }

    /// Copies the central learner's policy to every agent.
    fn push_central_policy(&mut self) {
        let central = self.run.agents[0].policy.clone();
        for agent in self.run.agents.iter_mut().skip(1) {
            agent.policy = central.clone();
        }
    }
}

/// Independent Bernoulli(`p_fail`) skip flags, one per learner.
pub fn inject_update_failure<R: Rng + ?Sized>(learners: usize, p_fail: f64, rng: &mut R) -> Vec<bool> {
    if p_fail <= 0.0 {
        return vec![false; learners];
    }
    (0..learners).map(|_| rng.gen_bool(p_fail.min(1.0))).collect()
}

/// Appends `n_add` agents with uniform policies, fresh Q-tables and empty
/// buffers at uniformly random cells.
pub fn population_add_event(run: &mut RunState, sc: &Scenario, n_add: usize) {
    for _ in 0..n_add {
        let index = run.agents.len();
        let state = run.world.gen_range(0..sc.n_states());
        run.agents.push(AgentState::fresh(state, sc));
        run.rngs.push(agent_rng(run.seed, index));
    }
}

/// Runs one trial with the algorithm selected in the hyperparameters.
pub fn run_trial(sc: &Scenario, opts: &MetricsOptions) -> Result<RunOutput> {
    let mut run = RunState::initial(sc, sc.hp.seed);
    let mut log = RunLog::new(sc.hp.seed, opts.digest.clone());
    let hp = &sc.hp;
    let tau = hp.tau_schedule();
    let learners = match hp.architecture {
        Architecture::Centralised => Learners::Only(0),
        Architecture::Independent | Architecture::Networked => Learners::All,
    };
    let mut diagnostics = Diagnostics::default();

    for k in 0..hp.k {
        run.k = k;
        if let Some(add) = hp.population_add {
            if add.at_k == k {
                population_add_event(&mut run, sc, add.count);
            }
        }
        record_start_metrics(sc, &run, opts, &mut log, k)?;

        let mut engine = Engine::new(sc, &mut run)?;
        let returns = engine.sample_phase(learners)?;
        log.record(k, Metric::AvgReturn, average_return(&returns)?)?;
        if hp.algorithm == Algorithm::Replay {
            engine.replay_phase(learners);
        }

        let n_flags = match learners {
            Learners::Only(_) => 1,
            _ => engine.run.n_agents(),
        };
        let skip = inject_update_failure(n_flags, hp.fail_prob, &mut engine.run.world);
        engine.diagnostics.failed_updates += skip.iter().filter(|&&s| s).count();
        engine.policy_update(learners, &skip);
        if hp.architecture == Architecture::Centralised && !skip[0] {
            engine.push_central_policy();
        }

        match (hp.algorithm, hp.sigma_source) {
            (Algorithm::Theoretical, SigmaSource::AgentIndex) => {
                for (i, agent) in engine.run.agents.iter_mut().enumerate() {
                    agent.sigma = i as f64;
                }
            }
            _ => {
                engine.evaluate_sigma(hp.e)?;
            }
        }

        engine.communicate(hp.effective_c(), &tau)?;
        diagnostics.unconverged_pma_rows += engine.diagnostics.unconverged_pma_rows;
        diagnostics.failed_updates += engine.diagnostics.failed_updates;
    }

    run.k = hp.k;
    record_start_metrics(sc, &run, opts, &mut log, hp.k)?;
    let returns = Engine::new(sc, &mut run)?.sample_phase(Learners::Nobody)?;
    log.record(hp.k, Metric::AvgReturn, average_return(&returns)?)?;

    Ok(RunOutput {
        log,
        final_state: run,
        diagnostics,
    })
}

fn record_start_metrics(
    sc: &Scenario,
    run: &RunState,
    opts: &MetricsOptions,
    log: &mut RunLog,
    k: usize,
) -> Result<()> {
    log.record(k, Metric::PolicyDivergence, policy_divergence(&run.policies())?)?;
    if opts.exploitability_every > 0 && k % opts.exploitability_every == 0 {
        let value = exploitability_approx(run, opts.exploitability_loops, sc)?;
        log.record(k, Metric::Exploitability, value)?;
    }
    Ok(())
}

/// Online-TD algorithm: one update per sampling block on the lagged transition.
pub fn run_theoretical(sc: &Scenario, opts: &MetricsOptions) -> Result<RunLog> {
    let mut sc = sc.clone();
    sc.hp.algorithm = Algorithm::Theoretical;
    Ok(run_trial(&sc, opts)?.log)
}

/// Replay algorithm: buffer during sampling, then `L` shuffled TD passes.
pub fn run_replay(sc: &Scenario, opts: &MetricsOptions) -> Result<RunLog> {
    let mut sc = sc.clone();
    sc.hp.algorithm = Algorithm::Replay;
    Ok(run_trial(&sc, opts)?.log)
}
