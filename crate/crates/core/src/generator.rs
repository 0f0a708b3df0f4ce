//! Seeded random economies and oligarch subnetworks.
//!
//! Everything is drawn on integer grid indices from a [`ChaCha8Rng`] seeded
//! with the caller's seed, so a `(config, seed)` pair gives the same economy
//! on every platform.

use std::collections::BTreeSet;

use petgraph::unionfind::UnionFind;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::economy::{Economy, GoodIndex, OligarchSpec};
use crate::error::GeneratorError;
use crate::graph::{self, PathLength};

/// A closed interval sampled on the grid `min, min + step, ..., max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridRange {
    pub const fn new(min: f64, max: f64, step: f64) -> Self {
        Self { min, max, step }
    }

    /// Number of grid points, or `None` if the step does not divide the width.
    pub fn len(&self) -> Option<usize> {
        if !(self.step > 0.0 && self.max >= self.min && self.min.is_finite() && self.max.is_finite()) {
            return None;
        }
        let intervals = (self.max - self.min) / self.step;
        let rounded = intervals.round();
        ((intervals - rounded).abs() <= 1e-9 * rounded.max(1.0)).then_some(rounded as usize + 1)
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len().unwrap_or(0)).map(|i| self.value(i)).collect()
    }
}

/// Closed interval without a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        // grid sums carry rounding from the step arithmetic
        x >= self.min - 1e-9 && x <= self.max + 1e-9
    }
}

/// An oligarch that every generated economy must be able to host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OligarchWitness {
    pub size: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_raw: usize,
    pub n_companies: usize,
    pub beta_range: GridRange,
    /// Inputs per company.
    pub indegree: usize,
    /// Allowed sum of a company's coefficients.
    pub scale_range: Interval,
    pub min_graph_depth: usize,
    pub oligarch_feasibility: Option<OligarchWitness>,
    pub alpha_range: GridRange,
    /// Prices are `price_base^k` for good `k` (1-based).
    pub price_base: f64,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_raw: 2,
            n_companies: 25,
            beta_range: GridRange::new(0.25, 0.6, 0.05),
            indegree: 2,
            scale_range: Interval { min: 0.5, max: 0.85 },
            min_graph_depth: 5,
            oligarch_feasibility: Some(OligarchWitness { size: 12, depth: 3 }),
            alpha_range: GridRange::new(1.1, 1.6, 0.1),
            price_base: 1.1,
            max_attempts: 100_000,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |msg: String| Err(GeneratorError::InvalidConfig(msg));
        if self.n_raw == 0 || self.n_companies == 0 {
            return bad("need at least one raw good and one company".into());
        }
        if self.indegree == 0 || self.indegree > self.n_raw {
            return bad(format!(
                "indegree {} must lie in 1..={} so the first company finds distinct suppliers",
                self.indegree, self.n_raw
            ));
        }
        for (name, grid) in [("beta_range", &self.beta_range), ("alpha_range", &self.alpha_range)] {
            if grid.len().is_none() {
                return bad(format!("{name}: step must be positive and divide the width"));
            }
        }
        if !(self.beta_range.min > 0.0 && self.beta_range.max < 1.0) {
            return bad("beta_range must lie inside (0, 1)".into());
        }
        if !(self.alpha_range.min > 0.0) {
            return bad("alpha_range must be positive".into());
        }
        let s = self.scale_range;
        if !(s.min <= s.max && s.max < 1.0) {
            return bad("scale_range must be non-empty and below 1".into());
        }
        let k = self.indegree as f64;
        if k * self.beta_range.min > s.max + 1e-9 || k * self.beta_range.max < s.min - 1e-9 {
            return bad("no coefficient combination fits scale_range".into());
        }
        if !(self.price_base > 0.0) {
            return bad("price_base must be positive".into());
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        if let Some(w) = self.oligarch_feasibility {
            if w.size == 0 || w.depth == 0 {
                return bad("oligarch witness needs positive size and depth".into());
            }
        }
        Ok(())
    }

    pub fn n_goods(&self) -> usize {
        self.n_raw + self.n_companies
    }
}

/// `base^k`.
pub fn price_schedule(base: f64, k: usize) -> f64 {
    base.powi(k as i32)
}

/// Draws coefficient tuples until their sum lands in the scale range.
const TUPLE_DRAWS: usize = 1000;

/// One draw before the economy is assembled: suppliers (zero-based, sorted)
/// and coefficients per company, then the technology levels.
struct Draw {
    inputs: Vec<Vec<(usize, f64)>>,
    alpha: Vec<f64>,
}

fn draw(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Draw, String> {
    let n = config.n_goods();
    let n_beta = config.beta_range.len().expect("validated");
    let n_alpha = config.alpha_range.len().expect("validated");
    let mut inputs = vec![Vec::new(); n];
    for m in config.n_raw..n {
        let mut suppliers = index::sample(rng, m, config.indegree).into_vec();
        suppliers.sort_unstable();
        let mut betas = None;
        for _ in 0..TUPLE_DRAWS {
            let tuple: Vec<f64> =
                (0..config.indegree).map(|_| config.beta_range.value(rng.random_range(0..n_beta))).collect();
            if config.scale_range.contains(tuple.iter().sum()) {
                betas = Some(tuple);
                break;
            }
        }
        let betas = betas.ok_or_else(|| format!("no admissible coefficients for company {}", m + 1))?;
        inputs[m] = suppliers.into_iter().zip(betas).collect();
    }
    let alpha = (0..n).map(|_| config.alpha_range.value(rng.random_range(0..n_alpha))).collect();
    Ok(Draw { inputs, alpha })
}

impl Draw {
    /// Same checks as [`rejection`], on the supplier lists directly; indices
    /// are topological, so one forward pass gives both distances.
    fn rejection(&self, config: &GeneratorConfig) -> Option<String> {
        let n = self.inputs.len();
        let mut raw_distance = vec![0usize; n];
        let mut longest = vec![0usize; n];
        for m in config.n_raw..n {
            raw_distance[m] = self.inputs[m].iter().map(|&(k, _)| raw_distance[k]).min().unwrap_or(0) + 1;
            longest[m] = self.inputs[m].iter().map(|&(k, _)| longest[k]).max().unwrap_or(0) + 1;
        }
        let depth = longest.iter().copied().max().unwrap_or(0);
        if depth < config.min_graph_depth {
            return Some(format!("graph depth {depth} < {}", config.min_graph_depth));
        }
        let w = config.oligarch_feasibility?;
        let eligible: Vec<bool> = (0..n).map(|k| k >= config.n_raw && raw_distance[k] >= w.depth).collect();
        let mut uf = UnionFind::new(n);
        let mut first_consumer = vec![None; config.n_raw];
        for m in (config.n_raw..n).filter(|&m| eligible[m]) {
            for &(k, _) in &self.inputs[m] {
                if eligible[k] {
                    uf.union(k, m);
                } else if k < config.n_raw {
                    // consumers of one raw good are linked to each other
                    match first_consumer[k] {
                        Some(c) => {
                            uf.union(c, m);
                        }
                        None => first_consumer[k] = Some(m),
                    }
                }
            }
        }
        let mut sizes = vec![0usize; n];
        for k in (0..n).filter(|&k| eligible[k]) {
            sizes[uf.find(k)] += 1;
        }
        if sizes.into_iter().max().unwrap_or(0) < w.size {
            return Some(format!("no consistent oligarch of size {} at depth >= {}", w.size, w.depth));
        }
        None
    }

    fn economy(self, config: &GeneratorConfig) -> Result<Economy, String> {
        let n = config.n_goods();
        let triplets: Vec<(usize, usize, f64)> = self
            .inputs
            .iter()
            .enumerate()
            .flat_map(|(m, inputs)| inputs.iter().map(move |&(k, b)| (k + 1, m + 1, b)))
            .collect();
        let prices = (1..=n).map(|k| price_schedule(config.price_base, k)).collect();
        Economy::from_triplets(config.n_raw, n, &triplets, self.alpha, prices).map_err(|e| e.to_string())
    }
}

/// Why an economy fails the global constraints of `config`, if it does.
pub fn rejection(config: &GeneratorConfig, economy: &Economy) -> Option<String> {
    let depth = graph::graph_depth(economy);
    if depth < config.min_graph_depth {
        return Some(format!("graph depth {depth} < {}", config.min_graph_depth));
    }
    if let Some(w) = config.oligarch_feasibility {
        if largest_deep_component(economy, w.depth) < w.size {
            return Some(format!("no consistent oligarch of size {} at depth >= {}", w.size, w.depth));
        }
    }
    None
}

/// Components of the consistency graph restricted to `eligible`. A
/// component of companies at raw-distance `>= d` always contains one at
/// exactly `d`: the predecessor on a shortest path is linked and one closer.
fn components(economy: &Economy, eligible: &[bool]) -> UnionFind<usize> {
    let mut uf = UnionFind::new(economy.n_goods());
    for (a, b) in graph::consistency_links(economy) {
        if eligible[a] && eligible[b] {
            uf.union(a, b);
        }
    }
    uf
}

fn deep_companies(economy: &Economy, depth: usize) -> Vec<bool> {
    let dist = graph::raw_distances(economy);
    (0..economy.n_goods())
        .map(|k| !economy.is_raw(k) && matches!(dist[k], PathLength::Finite(d) if d >= depth))
        .collect()
}

/// Size of the largest consistent set of companies all at raw-distance
/// `>= depth`.
pub fn largest_deep_component(economy: &Economy, depth: usize) -> usize {
    let eligible = deep_companies(economy, depth);
    let uf = components(economy, &eligible);
    let mut sizes = vec![0usize; economy.n_goods()];
    for k in (0..eligible.len()).filter(|&k| eligible[k]) {
        sizes[uf.find(k)] += 1;
    }
    sizes.into_iter().max().unwrap_or(0)
}

/// A random economy satisfying every constraint of `config`.
pub fn generate_economy(config: &GeneratorConfig, seed: u64) -> Result<Economy, GeneratorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reason = String::new();
    for _ in 0..config.max_attempts {
        let candidate = match draw(config, &mut rng) {
            Ok(d) => d,
            Err(r) => {
                reason = r;
                continue;
            }
        };
        match candidate.rejection(config) {
            None => {
                let economy = candidate.economy(config).map_err(GeneratorError::InvalidConfig)?;
                debug_assert_eq!(rejection(config, &economy), None);
                return Ok(economy);
            }
            Some(r) => reason = r,
        }
    }
    Err(GeneratorError::RejectionExhausted { attempts: config.max_attempts, reason })
}

/// Seed redraws allowed when the drawn seed company sits in too small a
/// component.
const OLIGARCH_ATTEMPTS: usize = 10_000;

/// A random consistent oligarch with `size` members and depth exactly `depth`.
///
/// A seed company at raw-distance `depth` is drawn, then companies at
/// raw-distance `>= depth` are added one at a time, uniformly from the
/// consistency-graph frontier (kept in ascending order). With the same seed,
/// the member set for `size` is a prefix of the one for `size + 1` whenever
/// every candidate seed can reach both sizes.
pub fn generate_oligarch(economy: &Economy, size: usize, depth: usize, seed: u64) -> Result<OligarchSpec, GeneratorError> {
    if size == 0 || size > economy.n_companies() {
        return Err(GeneratorError::Precondition(format!(
            "oligarch size {size} outside 1..={}",
            economy.n_companies()
        )));
    }
    if depth == 0 {
        return Err(GeneratorError::Precondition("oligarch depth must be at least 1".into()));
    }
    let infeasible = GeneratorError::NoFeasibleOligarch { size, depth };
    let dist = graph::raw_distances(economy);
    let eligible = deep_companies(economy, depth);
    let seeds: Vec<usize> = economy.companies().filter(|&k| dist[k] == PathLength::Finite(depth)).collect();
    let uf = components(economy, &eligible);
    let mut component_size = vec![0usize; economy.n_goods()];
    for k in (0..eligible.len()).filter(|&k| eligible[k]) {
        component_size[uf.find(k)] += 1;
    }
    if !seeds.iter().any(|&s| component_size[uf.find(s)] >= size) {
        return Err(infeasible);
    }

    let adjacency = graph::consistency_adjacency(economy);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..OLIGARCH_ATTEMPTS {
        let start = seeds[rng.random_range(0..seeds.len())];
        if component_size[uf.find(start)] < size {
            continue;
        }
        let mut members = vec![start];
        let mut frontier: BTreeSet<usize> = BTreeSet::new();
        let grow = |k: usize, members: &[usize], frontier: &mut BTreeSet<usize>| {
            frontier.remove(&k);
            for &j in &adjacency[k] {
                if eligible[j] && !members.contains(&j) {
                    frontier.insert(j);
                }
            }
        };
        grow(start, &members, &mut frontier);
        while members.len() < size {
            // cannot run dry: the component holds at least `size` companies
            let pick = *frontier.iter().nth(rng.random_range(0..frontier.len())).expect("frontier non-empty");
            members.push(pick);
            grow(pick, &members, &mut frontier);
        }
        let goods: Vec<GoodIndex> = members.into_iter().map(GoodIndex::from_zero_based).collect();
        let spec = OligarchSpec::new(economy, &goods).map_err(|_| infeasible.clone())?;
        debug_assert_eq!(spec.depth(), depth);
        return Ok(spec);
    }
    Err(infeasible)
}
