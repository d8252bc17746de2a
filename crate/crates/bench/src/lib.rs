//! Fixed inputs for the criterion benches.

use fedreorder::workload::{
    generate_instance, item_rng, random_query, CorpusConfig, Instance, QueryShape,
};
use fedreorder::{CostConfig, FederatedQuery, Method};

pub const SEED: u64 = 7;

/// A single-segment query with `services` constant-endpoint SERVICE blocks.
pub fn planning_query(services: usize) -> FederatedQuery {
    random_query(
        &mut item_rng(SEED, services as u64),
        services,
        &QueryShape::flat(),
    )
}

/// Config whose cap admits exhaustive search over `services`.
pub fn planning_config(method: Method, services: usize) -> CostConfig {
    CostConfig {
        method,
        exhaustive_cap: services.max(1),
        ..CostConfig::default()
    }
}

/// The first `count` instances of the default corpus with `services` SERVICE blocks each.
pub fn simulation_instances(services: usize, count: usize) -> Vec<Instance> {
    let corpus = CorpusConfig {
        min_services: services,
        max_services: services,
        max_store: 2_000,
        ..CorpusConfig::default()
    };
    (0..count).map(|i| generate_instance(&corpus, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_have_the_requested_size() {
        assert_eq!(planning_query(7).service_count(), 7);
        for inst in simulation_instances(3, 2) {
            assert_eq!(inst.query.service_count(), 3);
        }
    }
}
