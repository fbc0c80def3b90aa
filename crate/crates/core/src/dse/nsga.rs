//! NSGA-II style search loop with feasibility-first constraint handling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::archive::{ArchiveEntry, ParetoArchive};
use super::objectives::dominates_keys;
use super::{decode, evaluate, repair_priorities, DseError, Genome, SearchSpace};
use crate::model::{Architecture, SchedulingParams, TaskGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaConfig {
    pub population: usize,
    pub iterations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means 1 / genome length.
    pub mutation_rate: Option<f64>,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self { population: 200, iterations: 1000, crossover_rate: 0.9, mutation_rate: None }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<(), DseError> {
        if self.population < 2 {
            return Err(DseError::Config("population must be at least 2".into()));
        }
        if self.iterations < 1 {
            return Err(DseError::Config("iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(DseError::Config("crossover_rate must be in [0, 1]".into()));
        }
        if let Some(p) = self.mutation_rate {
            if !(0.0..=1.0).contains(&p) {
                return Err(DseError::Config("mutation_rate must be in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

struct Individual {
    genome: Genome,
    entry: ArchiveEntry,
    key: Vec<f64>,
    violations: usize,
    rank: usize,
    crowding: f64,
}

impl Individual {
    fn feasible(&self) -> bool {
        self.violations == 0
    }

    // feasible beats infeasible, fewer violations beat more, Pareto
    // dominance among feasible ones
    fn constraint_dominates(&self, other: &Individual) -> bool {
        match (self.feasible(), other.feasible()) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.violations < other.violations,
            (true, true) => dominates_keys(&self.key, &other.key),
        }
    }
}

struct Context<'a> {
    g: &'a TaskGraph,
    arch: &'a Architecture,
    params: &'a SchedulingParams,
    space: SearchSpace,
}

impl Context<'_> {
    fn random_genome(&self, rng: &mut ChaCha8Rng) -> Genome {
        let n = self.space.candidates.len() as u32;
        Genome {
            pe: self.space.candidates.iter().map(|c| rng.gen_range(0..c.len() as u32)).collect(),
            prio: (0..n).map(|_| rng.gen_range(0..n.max(1))).collect(),
            sl: self.space.slot_ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect(),
        }
    }

    fn evaluate(&self, genome: Genome) -> Individual {
        let mapping = repair_priorities(self.g, &decode(&genome, self.g, self.arch, &self.space));
        let (report, objectives) = evaluate(self.g, &mapping, self.params, self.arch);
        Individual {
            key: objectives.minimization_key(),
            violations: report.violations.len(),
            genome,
            entry: ArchiveEntry { mapping, objectives, report },
            rank: 0,
            crowding: 0.0,
        }
    }

    fn evaluate_all(&self, genomes: Vec<Genome>) -> Vec<Individual> {
        genomes.into_par_iter().map(|g| self.evaluate(g)).collect()
    }

    fn crossover(&self, a: &Genome, b: &Genome, rng: &mut ChaCha8Rng) -> (Genome, Genome) {
        let mut x = a.clone();
        let mut y = b.clone();
        let swap = |u: &mut Vec<u32>, v: &mut Vec<u32>, rng: &mut ChaCha8Rng| {
            for i in 0..u.len() {
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut u[i], &mut v[i]);
                }
            }
        };
        swap(&mut x.pe, &mut y.pe, rng);
        swap(&mut x.prio, &mut y.prio, rng);
        swap(&mut x.sl, &mut y.sl, rng);
        (x, y)
    }

    fn mutate(&self, genome: &mut Genome, rate: f64, rng: &mut ChaCha8Rng) {
        let n = self.space.candidates.len() as u32;
        for (gene, cands) in genome.pe.iter_mut().zip(&self.space.candidates) {
            if rng.gen_bool(rate) {
                *gene = rng.gen_range(0..cands.len() as u32);
            }
        }
        for gene in genome.prio.iter_mut() {
            if rng.gen_bool(rate) {
                *gene = rng.gen_range(0..n.max(1));
            }
        }
        for (gene, &(lo, hi)) in genome.sl.iter_mut().zip(&self.space.slot_ranges) {
            if rng.gen_bool(rate) {
                *gene = rng.gen_range(lo..=hi);
            }
        }
    }
}

/// Assign non-domination ranks and crowding distances in place.
fn rank_and_crowd(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if pop[i].constraint_dominates(&pop[j]) {
                dominates[i].push(j);
                dominated_by_count[j] += 1;
            } else if pop[j].constraint_dominates(&pop[i]) {
                dominates[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = fronts.len();
            for &j in &dominates[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }

    for front in &fronts {
        for &i in front {
            pop[i].crowding = 0.0;
        }
        let dims = pop[front[0]].key.len();
        for d in 0..dims {
            let mut idx = front.clone();
            idx.sort_by(|&a, &b| pop[a].key[d].total_cmp(&pop[b].key[d]).then(a.cmp(&b)));
            let lo = pop[idx[0]].key[d];
            let hi = pop[*idx.last().unwrap()].key[d];
            pop[idx[0]].crowding = f64::INFINITY;
            pop[*idx.last().unwrap()].crowding = f64::INFINITY;
            if hi > lo && hi.is_finite() && lo.is_finite() {
                for w in 1..idx.len().saturating_sub(1) {
                    let span = pop[idx[w + 1]].key[d] - pop[idx[w - 1]].key[d];
                    pop[idx[w]].crowding += span / (hi - lo);
                }
            }
        }
    }
    fronts
}

fn better(a: &Individual, ia: usize, b: &Individual, ib: usize) -> bool {
    (a.rank, std::cmp::Reverse(ordered(a.crowding)), ia) < (b.rank, std::cmp::Reverse(ordered(b.crowding)), ib)
}

// total order key for crowding distances (never NaN)
fn ordered(x: f64) -> u64 {
    let bits = x.to_bits();
    if x.is_sign_negative() {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if better(&pop[a], a, &pop[b], b) {
        a
    } else {
        b
    }
}

fn select(mut pool: Vec<Individual>, size: usize) -> Vec<Individual> {
    let fronts = rank_and_crowd(&mut pool);
    let mut chosen: Vec<usize> = Vec::with_capacity(size);
    for front in fronts {
        if chosen.len() + front.len() <= size {
            chosen.extend(front);
        } else {
            let mut rest = front;
            rest.sort_by(|&a, &b| pool[b].crowding.total_cmp(&pool[a].crowding).then(a.cmp(&b)));
            chosen.extend(rest.into_iter().take(size - chosen.len()));
        }
        if chosen.len() == size {
            break;
        }
    }
    chosen.sort_unstable();
    let mut keep = vec![false; pool.len()];
    for i in chosen {
        keep[i] = true;
    }
    let mut survivors: Vec<Individual> = pool.into_iter().zip(keep).filter(|(_, k)| *k).map(|(ind, _)| ind).collect();
    rank_and_crowd(&mut survivors);
    survivors
}

/// Run the exploration and return the archive of feasible, mutually
/// non-dominated mappings. The result depends only on the inputs and the
/// seed. Applications no PE can host yield an empty archive.
pub fn explore(
    g: &TaskGraph,
    arch: &Architecture,
    params: &SchedulingParams,
    cfg: &EaConfig,
    seed: u64,
) -> Result<ParetoArchive, DseError> {
    cfg.validate()?;
    let mut archive = ParetoArchive::new();
    let space = match SearchSpace::new(g, arch) {
        Ok(s) => s,
        Err(DseError::NoCandidate(_)) => return Ok(archive),
        Err(e) => return Err(e),
    };
    let rate = cfg.mutation_rate.unwrap_or(1.0 / space.genome_len().max(1) as f64);
    let ctx = Context { g, arch, params, space };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let genomes: Vec<Genome> = (0..cfg.population).map(|_| ctx.random_genome(&mut rng)).collect();
    let mut pop = ctx.evaluate_all(genomes);
    for ind in &pop {
        archive.insert(ind.entry.clone());
    }
    rank_and_crowd(&mut pop);

    for _ in 0..cfg.iterations {
        let mut offspring = Vec::with_capacity(cfg.population);
        while offspring.len() < cfg.population {
            let a = &pop[tournament(&pop, &mut rng)].genome;
            let b = &pop[tournament(&pop, &mut rng)].genome;
            let (mut x, mut y) =
                if rng.gen_bool(cfg.crossover_rate) { ctx.crossover(a, b, &mut rng) } else { (a.clone(), b.clone()) };
            ctx.mutate(&mut x, rate, &mut rng);
            ctx.mutate(&mut y, rate, &mut rng);
            offspring.push(x);
            if offspring.len() < cfg.population {
                offspring.push(y);
            }
        }
        let offspring = ctx.evaluate_all(offspring);
        for ind in &offspring {
            archive.insert(ind.entry.clone());
        }
        pop.extend(offspring);
        pop = select(pop, cfg.population);
    }
    Ok(archive)
}
