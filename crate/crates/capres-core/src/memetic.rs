//! The comparison baseline: a resonance-unaware memetic algorithm over a
//! 13-individual ternary-tree population, plus the three post-optimization
//! repair strategies applied to its final answer.
//!
//! The population sits in a depth-2 ternary tree (1 root + 3 + 9). Each
//! generation runs floor(rate_cross * 13) uniform parent-child crossovers
//! (the mutated offspring replaces the child when better), restores the
//! hierarchy so every parent beats its children, then hill-climbs the root
//! individual. The hill-climb is first-improvement over a deterministic move
//! set: retype a slot to any other catalog value, and shift a capacitor onto
//! its parent or a child, merging sizes when the sum is itself a catalog
//! size. No resonance screening happens anywhere in the run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::{total_annual_cost, CapacitorCatalog, EconomicParams};
use crate::eo::RunResult;
use crate::error::{Error, Result};
use crate::network::{Network, ROOT};
use crate::placement::Placement;
use crate::resonance::{check_feasible, ResonancePolicy};

/// Fixed population: a ternary tree of depth 2.
pub const POPULATION: usize = 13;

fn tree_parent(j: usize) -> usize {
    (j - 1) / 3
}

#[derive(Debug, Clone)]
pub struct MaConfig {
    /// Crossover events per generation, as a multiple of the population.
    pub rate_cross: f64,
    /// Per-gene mutation probability; a mutated gene is redrawn uniformly.
    pub p_mut: f64,
    /// Cap on hill-climb evaluations per generation.
    pub local_search_moves: u64,
    pub fe_budget: u64,
    pub seed: u64,
    pub allow_root_placement: bool,
    pub econ: EconomicParams,
}

impl MaConfig {
    pub fn new(econ: EconomicParams, seed: u64) -> Self {
        MaConfig {
            rate_cross: 1.5,
            p_mut: 0.1,
            local_search_moves: 1500,
            fe_budget: 50_000,
            seed,
            allow_root_placement: false,
            econ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_cross < 0.0 {
            return Err(Error::InvalidConfig("rate_cross must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_mut) {
            return Err(Error::InvalidConfig("p_mut must be within [0, 1]".into()));
        }
        if self.fe_budget < 1 {
            return Err(Error::InvalidConfig("fe_budget must be at least 1".into()));
        }
        self.econ.validate()
    }

    fn crossovers_per_generation(&self) -> u64 {
        (self.rate_cross * POPULATION as f64).floor() as u64
    }
}

/// Which post-optimization repair to apply to a resonance-violating answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairStrategy {
    /// Remove every violating capacitor. Always yields a feasible placement.
    Strtg1,
    /// Shift every violating capacitor to its parent bus.
    Strtg2,
    /// Shift every violating capacitor to its first child in bus-id order;
    /// a violator at a leaf stays where it is.
    Strtg3,
}

impl std::str::FromStr for RepairStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strtg1" => Ok(RepairStrategy::Strtg1),
            "strtg2" => Ok(RepairStrategy::Strtg2),
            "strtg3" => Ok(RepairStrategy::Strtg3),
            other => Err(Error::InvalidConfig(format!(
                "repair strategy must be strtg1|strtg2|strtg3, got {other:?}"
            ))),
        }
    }
}

/// A repaired placement plus the verdict. Infeasibility is a value here, not
/// an error: such solutions are dropped from analysis, never used.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub placement: Placement,
    pub feasible: bool,
    /// Buses still violating after the pass, ascending.
    pub violators: Vec<usize>,
}

/// Screen a placement like `placement_feasible` but report an illegal root
/// capacitor as a violation instead of an error, so repairs can verdict it.
fn screen(
    net: &Network,
    placement: &Placement,
    catalog: &CapacitorCatalog,
    policy: &ResonancePolicy,
    allow_root: bool,
) -> Result<Vec<usize>> {
    let mut violators = Vec::new();
    for (bus, type_id) in placement.installed() {
        if bus == ROOT {
            if !allow_root {
                violators.push(bus);
                continue;
            }
            if net.buses()[bus].scc_override_va.is_none() {
                continue;
            }
        }
        let scc = net.short_circuit_power(bus)?;
        if !check_feasible(scc, catalog.size_kvar(type_id)? * 1e3, policy)? {
            violators.push(bus);
        }
    }
    Ok(violators)
}

/// Apply one repair strategy to a solver answer. Violators are collected
/// up front and processed in increasing bus id; a shifted capacitor landing
/// on an occupied slot overwrites it.
pub fn repair(
    net: &Network,
    placement: &Placement,
    strategy: RepairStrategy,
    catalog: &CapacitorCatalog,
    policy: &ResonancePolicy,
    allow_root: bool,
) -> Result<RepairOutcome> {
    let violators = screen(net, placement, catalog, policy, allow_root)?;
    let mut repaired = placement.clone();
    for &bus in &violators {
        let type_id = placement.get(bus);
        match strategy {
            RepairStrategy::Strtg1 => repaired.set(bus, 0),
            RepairStrategy::Strtg2 => {
                if let Some(parent) = net.parent(bus) {
                    repaired.set(parent, type_id);
                    repaired.set(bus, 0);
                }
            }
            RepairStrategy::Strtg3 => {
                if let Some(&child) = net.children(bus).first() {
                    repaired.set(child, type_id);
                    repaired.set(bus, 0);
                }
            }
        }
    }
    let violators = screen(net, &repaired, catalog, policy, allow_root)?;
    Ok(RepairOutcome {
        feasible: violators.is_empty(),
        placement: repaired,
        violators,
    })
}

/// The retype-and-shift move set the root individual is hill-climbed over.
fn local_moves(
    net: &Network,
    current: &Placement,
    bus: usize,
    catalog: &CapacitorCatalog,
    allow_root: bool,
) -> Vec<Placement> {
    let mut out = Vec::new();
    let s = current.get(bus);
    for t in 0..=catalog.max_type() {
        if t != s {
            let mut cand = current.clone();
            cand.set(bus, t);
            out.push(cand);
        }
    }
    if s != 0 {
        let mut targets = Vec::new();
        if let Some(parent) = net.parent(bus) {
            if parent != ROOT || allow_root {
                targets.push(parent);
            }
        }
        targets.extend(net.children(bus).iter().copied());
        for dest in targets {
            let mut cand = current.clone();
            let merged = merge_types(catalog, s, current.get(dest));
            cand.set(dest, merged);
            cand.set(bus, 0);
            if cand != *current {
                out.push(cand);
            }
        }
    }
    out
}

/// Shift semantics for the hill-climb: landing on an occupied slot combines
/// the two sizes when their sum is a catalog size, otherwise overwrites.
fn merge_types(catalog: &CapacitorCatalog, incoming: u8, resident: u8) -> u8 {
    if resident == 0 {
        return incoming;
    }
    let sum = catalog.size_kvar(incoming).unwrap_or(0.0) + catalog.size_kvar(resident).unwrap_or(0.0);
    for row in catalog.rows() {
        if (row.size_kvar - sum).abs() < 1e-9 {
            return row.type_id;
        }
    }
    incoming
}

/// Evolve the structured population. The answer may violate the resonance
/// constraint; callers repair it afterwards.
pub fn run_ma(net: &Network, catalog: &CapacitorCatalog, config: &MaConfig) -> Result<RunResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let econ = &config.econ;
    let max_type = catalog.max_type();
    let placeable: Vec<usize> = (0..net.bus_count())
        .filter(|&b| b != ROOT || config.allow_root_placement)
        .collect();

    let baseline_cost = total_annual_cost(net, &Placement::empty(net), catalog, econ)?;
    let mut fe_used: u64 = 0;
    let mut best: Option<(f64, Placement)> = None;
    let mut cost_trace: Vec<(u64, f64)> = Vec::new();

    let mut pop: Vec<(f64, Placement)> = Vec::with_capacity(POPULATION);
    for _ in 0..POPULATION {
        let mut ind = Placement::empty(net);
        for &bus in &placeable {
            ind.set(bus, rng.gen_range(0..=max_type));
        }
        if fe_used >= config.fe_budget {
            pop.push((f64::INFINITY, ind));
            continue;
        }
        let cost = total_annual_cost(net, &ind, catalog, econ)?;
        fe_used += 1;
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, ind.clone()));
            cost_trace.push((fe_used, cost));
        }
        pop.push((cost, ind));
    }

    let fix_hierarchy = |pop: &mut Vec<(f64, Placement)>| {
        let mut changed = true;
        while changed {
            changed = false;
            for j in 1..POPULATION {
                let p = tree_parent(j);
                if pop[j].0 < pop[p].0 {
                    pop.swap(j, p);
                    changed = true;
                }
            }
        }
    };
    fix_hierarchy(&mut pop);

    let crossovers = config.crossovers_per_generation();
    while fe_used < config.fe_budget {
        let fe_at_generation_start = fe_used;

        for _ in 0..crossovers {
            if fe_used >= config.fe_budget {
                break;
            }
            let j = rng.gen_range(1..POPULATION);
            let p = tree_parent(j);
            let mut offspring = Placement::empty(net);
            for &bus in &placeable {
                let gene = if rng.gen::<f64>() < 0.5 {
                    pop[p].1.get(bus)
                } else {
                    pop[j].1.get(bus)
                };
                offspring.set(bus, gene);
            }
            for &bus in &placeable {
                if rng.gen::<f64>() < config.p_mut {
                    offspring.set(bus, rng.gen_range(0..=max_type));
                }
            }
            let cost = total_annual_cost(net, &offspring, catalog, econ)?;
            fe_used += 1;
            if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                best = Some((cost, offspring.clone()));
                cost_trace.push((fe_used, cost));
            }
            if cost < pop[j].0 {
                pop[j] = (cost, offspring);
            }
        }
        fix_hierarchy(&mut pop);

        // First-improvement hill-climb on the root individual.
        let mut ls_used: u64 = 0;
        let mut improved = true;
        while improved && ls_used < config.local_search_moves && fe_used < config.fe_budget {
            improved = false;
            'buses: for &bus in &placeable {
                if ls_used >= config.local_search_moves || fe_used >= config.fe_budget {
                    break;
                }
                for cand in local_moves(net, &pop[0].1, bus, catalog, config.allow_root_placement) {
                    if ls_used >= config.local_search_moves || fe_used >= config.fe_budget {
                        break 'buses;
                    }
                    let cost = total_annual_cost(net, &cand, catalog, econ)?;
                    fe_used += 1;
                    ls_used += 1;
                    if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                        best = Some((cost, cand.clone()));
                        cost_trace.push((fe_used, cost));
                    }
                    if cost < pop[0].0 {
                        pop[0] = (cost, cand);
                        improved = true;
                        continue 'buses;
                    }
                }
            }
        }

        if fe_used == fe_at_generation_start {
            break; // degenerate operator settings cannot spend budget
        }
    }

    let (best_cost, best_placement) = best.expect("fe_budget >= 1 evaluates at least one individual");
    Ok(RunResult {
        best_savings: baseline_cost - best_cost,
        best_placement,
        best_cost,
        fe_used,
        cost_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_network;
    use crate::resonance::placement_feasible;

    fn chain4() -> Network {
        load_network(
            "# v_nom_kv=12.66\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open\n0,1,0.5,0.3,400,300,0\n1,2,0.4,0.2,300,250,0\n2,3,0.6,0.3,200,150,0\n"
                .as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn hierarchy_parent_indexing_is_a_depth_two_ternary_tree() {
        assert_eq!(tree_parent(1), 0);
        assert_eq!(tree_parent(3), 0);
        assert_eq!(tree_parent(4), 1);
        assert_eq!(tree_parent(12), 3);
    }

    #[test]
    fn budget_below_population_returns_best_of_partial_init() {
        let net = chain4();
        let catalog = CapacitorCatalog::table_i();
        let mut config = MaConfig::new(EconomicParams::new(100.0), 3);
        config.fe_budget = 5;
        let result = run_ma(&net, &catalog, &config).unwrap();
        assert_eq!(result.fe_used, 5);
        assert!(result.best_cost.is_finite());
    }

    #[test]
    fn degenerate_operators_freeze_the_population() {
        let net = chain4();
        let catalog = CapacitorCatalog::table_i();
        let mut config = MaConfig::new(EconomicParams::new(100.0), 9);
        config.rate_cross = 0.0;
        config.p_mut = 0.0;
        config.local_search_moves = 0;
        config.fe_budget = 10_000;
        let result = run_ma(&net, &catalog, &config).unwrap();
        // Only the 13 initial evaluations can be spent.
        assert_eq!(result.fe_used, 13);
    }

    #[test]
    fn ma_runs_are_seed_deterministic() {
        let net = chain4();
        let catalog = CapacitorCatalog::table_i();
        let mut config = MaConfig::new(EconomicParams::new(100.0), 21);
        config.fe_budget = 800;
        let a = run_ma(&net, &catalog, &config).unwrap();
        let b = run_ma(&net, &catalog, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ma_never_places_on_the_root_when_disallowed() {
        let net = chain4();
        let catalog = CapacitorCatalog::table_i();
        let mut config = MaConfig::new(EconomicParams::new(100.0), 4);
        config.fe_budget = 600;
        let result = run_ma(&net, &catalog, &config).unwrap();
        assert_eq!(result.best_placement.get(ROOT), 0);
    }

    #[test]
    fn feasible_input_passes_through_every_repair_unchanged() {
        let net = chain4();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        // Type 4 at bus 1: scc = V^2/|Z1| = 160.2756e6/0.583 = 2.75e8;
        // h = sqrt(2.75e8/6e5) = 21.4 -> 21, odd. Find a feasible pick by
        // screening directly instead of hand-tuning.
        let mut placed = Placement::empty(&net);
        'outer: for bus in 1..net.bus_count() {
            for t in 1..=catalog.max_type() {
                placed.set(bus, t);
                if placement_feasible(&net, &placed, &catalog, &policy, false)
                    .unwrap()
                    .is_feasible()
                {
                    break 'outer;
                }
                placed.set(bus, 0);
            }
        }
        assert!(placed.installed_count() == 1, "no feasible single placement exists");
        for strategy in [RepairStrategy::Strtg1, RepairStrategy::Strtg2, RepairStrategy::Strtg3] {
            let out = repair(&net, &placed, strategy, &catalog, &policy, false).unwrap();
            assert!(out.feasible);
            assert_eq!(out.placement, placed);
        }
    }

    #[test]
    fn strtg1_zeroes_violators_and_always_succeeds() {
        // scc override tuned so a 150 kvar capacitor rounds odd at bus 1:
        // h = sqrt(9.6e5/1.5e5) = 2.53 -> 3.
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open,scc_va\n0,1,0.5,0.3,100,60,0,9.6e5\n1,2,0.4,0.2,50,30,0,\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let mut placed = Placement::empty(&net);
        placed.set(1, 1);
        assert!(!placement_feasible(&net, &placed, &catalog, &policy, false)
            .unwrap()
            .is_feasible());
        let out = repair(&net, &placed, RepairStrategy::Strtg1, &catalog, &policy, false).unwrap();
        assert!(out.feasible);
        assert_eq!(out.placement.get(1), 0);
        assert!(out.placement.is_empty());
    }

    #[test]
    fn strtg3_leaves_a_leaf_violator_in_place_and_verdicts_infeasible() {
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open,scc_va\n0,1,0.5,0.3,100,60,0,9.6e5\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let mut placed = Placement::empty(&net);
        placed.set(1, 1);
        let out = repair(&net, &placed, RepairStrategy::Strtg3, &catalog, &policy, false).unwrap();
        assert!(!out.feasible);
        assert_eq!(out.placement.get(1), 1);
        assert_eq!(out.violators, vec![1]);
    }

    #[test]
    fn strtg2_fails_when_the_parent_is_also_resonant() {
        // Both buses carry scc overrides that make a 150 kvar capacitor round
        // odd: 9.6e5 -> h = 2.53 -> 3 at the child, 1.35e6 -> h = 3.0 at the
        // parent.
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open,scc_va\n0,1,0.5,0.3,100,60,0,1.35e6\n1,2,0.4,0.2,50,30,0,9.6e5\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let mut placed = Placement::empty(&net);
        placed.set(2, 1);
        let out = repair(&net, &placed, RepairStrategy::Strtg2, &catalog, &policy, false).unwrap();
        assert!(!out.feasible);
        assert_eq!(out.violators, vec![1]);
        // The capacitor moved but the verdict stands.
        assert_eq!(out.placement.get(2), 0);
        assert_eq!(out.placement.get(1), 1);
    }

    #[test]
    fn repairs_never_increase_installed_count() {
        let text = "# v_nom_kv=1.0\nfrom,to,r_ohm,x_ohm,p_kw,q_kvar,open,scc_va\n0,1,0.5,0.3,100,60,0,1.35e6\n1,2,0.4,0.2,50,30,0,9.6e5\n2,3,0.4,0.2,20,10,0,9.6e5\n";
        let net = load_network(text.as_bytes()).unwrap();
        let catalog = CapacitorCatalog::table_i();
        let policy = ResonancePolicy::default();
        let mut placed = Placement::empty(&net);
        placed.set(1, 1);
        placed.set(2, 1);
        placed.set(3, 2);
        let before = placed.installed_count();
        for strategy in [RepairStrategy::Strtg1, RepairStrategy::Strtg2, RepairStrategy::Strtg3] {
            let out = repair(&net, &placed, strategy, &catalog, &policy, false).unwrap();
            assert!(out.placement.installed_count() <= before, "{strategy:?}");
        }
    }

    #[test]
    fn merge_shift_combines_catalog_sizes() {
        let catalog = CapacitorCatalog::table_i();
        assert_eq!(merge_types(&catalog, 2, 4), 5); // 300 + 600 = 900
        assert_eq!(merge_types(&catalog, 1, 1), 2); // 150 + 150 = 300
        assert_eq!(merge_types(&catalog, 6, 5), 6); // 2100: no row, overwrite
        assert_eq!(merge_types(&catalog, 3, 0), 3);
    }
}
