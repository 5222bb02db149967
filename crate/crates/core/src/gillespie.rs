//! Exact continuous-time simulation of the SI process on a fixed graph.
//!
//! The aggregate infection rate is `beta * X_SI`. The next susceptible to be
//! infected is drawn with probability proportional to its number of infected
//! neighbours, using a Fenwick tree over those per-node counts.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::degree::{DegreeDistribution, DistSpec};
use crate::error::{NetdiffError, Result};
use crate::graph::{build_configuration_model, Graph, GraphMode};
use crate::io::fmt_real;

/// Infection rate, initial susceptible fraction and time horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiParams {
    pub beta: f64,
    pub alpha_s: f64,
    pub t_max: f64,
}

impl SiParams {
    pub fn new(beta: f64, alpha_s: f64, t_max: f64) -> Result<Self> {
        let p = SiParams { beta, alpha_s, t_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(NetdiffError::param(
                "beta",
                format!("must be non-negative, got {}", self.beta),
            ));
        }
        if !(self.alpha_s > 0.0 && self.alpha_s <= 1.0) {
            return Err(NetdiffError::param(
                "alpha_s",
                format!("must lie in (0, 1], got {}", self.alpha_s),
            ));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(NetdiffError::param(
                "t_max",
                format!("must be positive, got {}", self.t_max),
            ));
        }
        Ok(())
    }
}

/// Aggregated counts. `ss` counts each SS edge twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub s: i64,
    pub si: i64,
    pub ss: i64,
    pub i: i64,
}

impl Counts {
    /// Half-edges attached to susceptibles.
    pub fn s_dot(&self) -> i64 {
        self.si + self.ss
    }

    pub fn apply(&mut self, e: &Event) {
        self.s += e.d_s as i64;
        self.i -= e.d_s as i64;
        self.si += e.d_si as i64;
        self.ss += e.d_ss as i64;
    }

    /// `(X_S, X_SI, X_SS)` as reals.
    pub fn as_vector(&self) -> [f64; 3] {
        [self.s as f64, self.si as f64, self.ss as f64]
    }
}

/// One infection: time, infected node and the jump of the aggregated counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub node: u32,
    pub d_s: i32,
    pub d_si: i32,
    pub d_ss: i32,
}

/// Fenwick tree over non-negative integer weights.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<i64>,
    top: usize,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        let top = if n == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - n.leading_zeros())
        };
        Fenwick {
            tree: vec![0; n + 1],
            top,
        }
    }

    fn add(&mut self, i: usize, delta: i64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: i64) -> usize {
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos
    }
}

/// Mutable state of one SI run on a borrowed graph.
#[derive(Debug, Clone)]
pub struct EpidemicState<'g> {
    graph: &'g Graph,
    infected: Vec<bool>,
    /// `X_{SI,i}`: infected neighbours of node `i` (with multiplicity).
    nbr_inf: Vec<u32>,
    weights: Fenwick,
    counts: Counts,
    t: f64,
    beta: f64,
}

impl<'g> EpidemicState<'g> {
    /// Starts with `round((1 - alpha_s) n)` infected nodes chosen uniformly
    /// without replacement.
    pub fn init<R: Rng + ?Sized>(graph: &'g Graph, beta: f64, alpha_s: f64, rng: &mut R) -> Result<Self> {
        if !(alpha_s > 0.0 && alpha_s <= 1.0) {
            return Err(NetdiffError::param(
                "alpha_s",
                format!("must lie in (0, 1], got {alpha_s}"),
            ));
        }
        let n = graph.n();
        let n_inf = ((1.0 - alpha_s) * n as f64).round() as usize;
        let chosen: Vec<u32> = rand::seq::index::sample(rng, n, n_inf)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        Self::with_infected(graph, beta, &chosen)
    }

    pub fn with_infected(graph: &'g Graph, beta: f64, initially_infected: &[u32]) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(NetdiffError::param("beta", format!("must be non-negative, got {beta}")));
        }
        let n = graph.n();
        let mut infected = vec![false; n];
        for &i in initially_infected {
            let i = i as usize;
            if i >= n {
                return Err(NetdiffError::param("infected", format!("node {i} out of range")));
            }
            infected[i] = true;
        }
        let mut state = EpidemicState {
            graph,
            infected,
            nbr_inf: vec![0; n],
            weights: Fenwick::new(n),
            counts: Counts::default(),
            t: 0.0,
            beta,
        };
        state.counts = state.recount();
        for i in 0..n {
            if !state.infected[i] {
                state.nbr_inf[i] = state.infected_neighbours(i);
                state.weights.add(i, state.nbr_inf[i] as i64);
            }
        }
        Ok(state)
    }

    fn infected_neighbours(&self, i: usize) -> u32 {
        self.graph
            .neighbors(i)
            .iter()
            .filter(|&&j| self.infected[j as usize])
            .count() as u32
    }

    /// Counts recomputed from scratch from the adjacency structure.
    fn recount(&self) -> Counts {
        let mut c = Counts::default();
        for i in 0..self.graph.n() {
            if self.infected[i] {
                c.i += 1;
                continue;
            }
            let inf = self.infected_neighbours(i) as i64;
            c.s += 1;
            c.si += inf;
            c.ss += self.graph.degree(i) as i64 - inf;
        }
        c
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn is_infected(&self, i: usize) -> bool {
        self.infected[i]
    }

    /// `X_{SI,i}` for a susceptible node (0 for infected ones).
    pub fn infected_neighbours_of(&self, i: usize) -> u32 {
        if self.infected[i] {
            0
        } else {
            self.nbr_inf[i]
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Next event without a horizon; `None` once the process is frozen.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Event> {
        self.step_before(f64::INFINITY, rng)
    }

    /// Next event if it happens no later than `horizon`; otherwise the state is
    /// left untouched and `None` is returned.
    pub fn step_before<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Option<Event> {
        let rate = self.beta * self.counts.si as f64;
        if rate <= 0.0 {
            return None;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / rate;
        let t = self.t + wait;
        if t > horizon {
            return None;
        }
        let pick = rng.random_range(0..self.counts.si);
        let node = self.weights.find(pick);
        debug_assert!(!self.infected[node]);
        self.t = t;
        Some(self.infect(node))
    }

    fn infect(&mut self, node: usize) -> Event {
        let a = self.nbr_inf[node] as i32;
        let d = self.graph.degree(node) as i32;
        let mut self_ends = 0i32;
        self.infected[node] = true;
        self.weights.add(node, -(a as i64));
        self.nbr_inf[node] = 0;
        for &j in self.graph.neighbors(node) {
            let j = j as usize;
            if j == node {
                self_ends += 1;
            } else if !self.infected[j] {
                self.nbr_inf[j] += 1;
                self.weights.add(j, 1);
            }
        }
        // susceptible neighbours other than the node itself
        let s_nbrs = d - a - self_ends;
        let e = Event {
            t: self.t,
            node: node as u32,
            d_s: -1,
            d_si: s_nbrs - a,
            d_ss: -2 * s_nbrs - self_ends,
        };
        self.counts.apply(&e);
        e
    }

    /// Checks every counter against a full recount.
    pub fn validate(&self) -> Result<()> {
        let fresh = self.recount();
        if fresh != self.counts {
            return Err(NetdiffError::Mismatch(format!(
                "incremental counts {:?} differ from recount {:?}",
                self.counts, fresh
            )));
        }
        for i in 0..self.graph.n() {
            if !self.infected[i] && self.nbr_inf[i] != self.infected_neighbours(i) {
                return Err(NetdiffError::Mismatch(format!(
                    "node {i}: stale infected-neighbour count"
                )));
            }
        }
        let c = self.counts;
        let s_dot: i64 = (0..self.graph.n())
            .filter(|&i| !self.infected[i])
            .map(|i| self.graph.degree(i) as i64)
            .sum();
        if c.si + c.ss != s_dot || c.ss % 2 != 0 || c.s + c.i != self.graph.n() as i64 {
            return Err(NetdiffError::Mismatch(format!("count identities violated: {c:?}")));
        }
        Ok(())
    }
}

/// Event log of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub params: SiParams,
    pub initial: Counts,
    pub events: Vec<Event>,
    pub seed: Option<u64>,
    pub graph_fingerprint: String,
}

/// Runs the process on `graph` until the horizon or until no SI edge is left.
pub fn simulate<R: Rng + ?Sized>(graph: &Graph, params: &SiParams, rng: &mut R) -> Result<Trajectory> {
    params.validate()?;
    let mut state = EpidemicState::init(graph, params.beta, params.alpha_s, rng)?;
    let initial = state.counts();
    let mut events = Vec::new();
    while let Some(e) = state.step_before(params.t_max, rng) {
        events.push(e);
    }
    Ok(Trajectory {
        n: graph.n(),
        params: *params,
        initial,
        events,
        seed: None,
        graph_fingerprint: graph.fingerprint(),
    })
}

/// Samples a degree sequence, builds a fresh graph and simulates on it.
pub fn simulate_fresh<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    n: usize,
    mode: GraphMode,
    params: &SiParams,
    rng: &mut R,
) -> Result<Trajectory> {
    let degrees = dist.sample_degree_sequence(n, rng)?;
    let graph = build_configuration_model(&degrees, mode, rng)?;
    simulate(&graph, params, rng)
}

/// Metadata written next to an exported event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub seed: Option<u64>,
    pub n: usize,
    pub beta: f64,
    pub alpha_s: f64,
    pub t_max: f64,
    pub dist: Option<DistSpec>,
    pub graph_fingerprint: String,
    pub initial: Counts,
    pub events: usize,
}

impl Trajectory {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn t_max(&self) -> f64 {
        self.params.t_max
    }

    pub fn final_counts(&self) -> Counts {
        let mut c = self.initial;
        self.events.iter().for_each(|e| c.apply(e));
        c
    }

    /// Right-continuous path value at `t` in `[0, T]`.
    pub fn counts_at(&self, t: f64) -> Result<Counts> {
        if !(0.0..=self.params.t_max).contains(&t) {
            return Err(NetdiffError::OutOfRange {
                value: t,
                range: format!("[0, {}]", self.params.t_max),
            });
        }
        let k = self.events.partition_point(|e| e.t <= t);
        let mut c = self.initial;
        self.events[..k].iter().for_each(|e| c.apply(e));
        Ok(c)
    }

    /// Path values at ascending times, in one sweep.
    pub fn counts_at_many(&self, times: &[f64]) -> Result<Vec<Counts>> {
        let mut out = Vec::with_capacity(times.len());
        let mut c = self.initial;
        let mut k = 0;
        let mut last = f64::NEG_INFINITY;
        for &t in times {
            if !(0.0..=self.params.t_max).contains(&t) || t < last {
                return Err(NetdiffError::OutOfRange {
                    value: t,
                    range: format!("ascending within [0, {}]", self.params.t_max),
                });
            }
            last = t;
            while k < self.events.len() && self.events[k].t <= t {
                c.apply(&self.events[k]);
                k += 1;
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Events with `from <= t <= to`.
    pub fn jump_series(&self, from: f64, to: f64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < from);
        let hi = self.events.partition_point(|e| e.t <= to);
        if lo >= hi {
            &[]
        } else {
            &self.events[lo..hi]
        }
    }

    /// `theta(t) = exp(-beta * int_0^t X_SI / X_Sdot ds)` along the path.
    pub fn theta_at(&self, t: f64) -> f64 {
        let mut c = self.initial;
        let mut last = 0.0;
        let mut integral = 0.0;
        let ratio = |c: &Counts| {
            if c.s_dot() > 0 {
                c.si as f64 / c.s_dot() as f64
            } else {
                0.0
            }
        };
        for e in self.events.iter().take_while(|e| e.t <= t) {
            integral += ratio(&c) * (e.t - last);
            last = e.t;
            c.apply(e);
        }
        integral += ratio(&c) * (t - last);
        (-self.params.beta * integral).exp()
    }

    /// Event log as CSV with header `t,node,dXS,dXSI,dXSS`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.events.len() + 1));
        s.push_str("t,node,dXS,dXSI,dXSS\n");
        for e in &self.events {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_real(e.t),
                e.node,
                e.d_s,
                e.d_si,
                e.d_ss
            ));
        }
        s
    }

    pub fn meta(&self, dist: Option<&DistSpec>) -> TrajectoryMeta {
        TrajectoryMeta {
            seed: self.seed,
            n: self.n,
            beta: self.params.beta,
            alpha_s: self.params.alpha_s,
            t_max: self.params.t_max,
            dist: dist.cloned(),
            graph_fingerprint: self.graph_fingerprint.clone(),
            initial: self.initial,
            events: self.events.len(),
        }
    }
}
