use htsp::graph::{EdgeId, VertexSet};
use htsp::harness::correlations::complete_bipartite_piece;
use htsp::harness::generate::{generate, Family};
use htsp::harness::suites::optimum_for;
use htsp::hierarchy::enumerate_min_cuts;
use htsp::instance::Instance;
use htsp::ojoin::{
    bipartization_flow, odd_vertices, run_trial, CostModel, EalDetector, EalEstimates, EdgeKind, JoinError, JoinPlan,
};
use htsp::params::ReductionParams;
use htsp::pipeline::{trial_rng, Pipeline, SamplerChoice};
use htsp::rational::{ratio, Rational};
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(family: &Family) -> Instance {
    generate(family, false, &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
}

fn odd_count(shore: VertexSet, odd: &[usize]) -> usize {
    odd.iter().filter(|v| shore.contains(**v)).count()
}

#[test]
fn joins_are_feasible_and_tours_are_closed() {
    let (choice, optimum) = optimum_for(SamplerChoice::Mix(0.471496));
    for family in Family::defaults() {
        let instance = instance(&family);
        let pipeline = Pipeline::new(&instance).unwrap();
        let estimates = EalEstimates::calibrate(&EalDetector::new(&pipeline), choice, 20_000, 4);
        let plan = JoinPlan::new(&pipeline, optimum.params.clone(), &estimates).unwrap();
        let costs = CostModel::new(&instance).unwrap();
        let cuts = enumerate_min_cuts(instance.graph()).unwrap();
        let n = instance.vertex_count();
        for trial in 0..300 {
            let outcome = match run_trial(&plan, &costs, choice, 4, trial, true) {
                Ok(outcome) => outcome,
                Err(e) => panic!("{} trial {trial}: {e}", family.name()),
            };
            let join = &outcome.join;
            assert!(join.ledger_balances());
            let sixth = ratio(1, 6);
            assert!(join.values().iter().all(|z| *z >= sixth));
            let odd = odd_vertices(&instance, &outcome.sample.edges);
            for cut in &cuts {
                if odd_count(cut.shore, &odd) % 2 == 1 {
                    let total: Rational = cut.edges.iter().map(|id| join.value(*id)).sum();
                    assert!(total >= ratio(1, 1), "{} trial {trial}: cut {:?} at {total}", family.name(), cut.shore);
                }
            }
            assert!(outcome.integral_within_fractional);
            let (_, join_edges) = costs.min_join(&odd).unwrap();
            let mut walk = outcome.sample.edges.clone();
            walk.extend(&join_edges);
            assert!(odd_vertices(&instance, &walk).is_empty());
            let tour = costs.tour(&walk, true);
            let mut visited = tour.order.clone();
            visited.sort_unstable();
            visited.dedup();
            assert_eq!(visited.len(), n);
            assert!(tour.cost <= outcome.row.tree_cost + outcome.row.integral_join_cost + 1e-9);
        }
    }
}

#[test]
fn half_of_x_passes_and_a_short_odd_cut_fails() {
    let instance = instance(&Family::K5Gadget(1));
    let pipeline = Pipeline::new(&instance).unwrap();
    let choice = SamplerChoice::MatroidIntersection;
    let estimates = EalEstimates::calibrate(&EalDetector::new(&pipeline), choice, 2_000, 1);
    let plan = JoinPlan::new(&pipeline, ReductionParams::none(ratio(0, 1)), &estimates).unwrap();
    let sample = pipeline.sample(choice, 1, 0).unwrap();
    let mut join = plan.build_join(&sample, &mut trial_rng(1, 0, 9)).unwrap();
    let quarter = ratio(1, 4);
    assert!(join.values().iter().all(|z| *z == quarter));
    plan.verify_join(&join, &sample).unwrap();

    let odd = odd_vertices(&instance, &sample.edges);
    let (_, edges) = plan
        .min_cuts()
        .iter()
        .find(|(shore, _)| odd_count(*shore, &odd) % 2 == 1)
        .expect("a root tree has an odd minimum cut")
        .clone();
    join.z[edges[0].0] -= join.scale / 12;
    assert!(matches!(plan.verify_join(&join, &sample), Err(JoinError::FeasibilityViolation { .. })));
    join.z[edges[0].0] -= join.scale / 12;
    assert!(matches!(plan.verify_join(&join, &sample), Err(JoinError::EdgeBelowFloor { .. })));
}

#[test]
fn flows_split_each_demand_over_incident_interior_edges() {
    let (choice, optimum) = optimum_for(SamplerChoice::Mix(0.471496));
    let params = &optimum.params;
    for family in [Family::Nested(1), Family::Nested(2), Family::ChainInDegree] {
        let instance = instance(&family);
        let pipeline = Pipeline::new(&instance).unwrap();
        let estimates = EalEstimates::calibrate(&EalDetector::new(&pipeline), choice, 5_000, 2);
        let plan = JoinPlan::new(&pipeline, params.clone(), &estimates).unwrap();
        let mut routed = 0;
        for node in pipeline.hierarchy().internal_nodes() {
            let (Some(flow), Some(piece)) = (plan.flow(node.id), node.piece.as_ref()) else { continue };
            routed += 1;
            let demand = |id: EdgeId| match plan.classes()[id.0].kind {
                EdgeKind::Cycle => &params.beta / num_bigint::BigInt::from(2),
                kind => kind.reduction(params),
            };
            let externals: Vec<EdgeId> = piece.graph.incident(0).map(|e| e.id).collect();
            for &e in &externals {
                let share: Rational = flow.fractions.iter().filter(|(x, _, _)| *x == e).map(|(_, _, f)| f.clone()).sum();
                if demand(e).is_zero() {
                    continue;
                }
                assert_eq!(share, ratio(1, 1), "{} node {} edge {e}", family.name(), node.id);
            }
            for (e, f, _) in &flow.fractions {
                let inside = piece.graph.find(*e).unwrap().other(0);
                assert!(piece.graph.find(*f).unwrap().touches(inside));
            }
            let demands: Vec<(EdgeId, Rational)> = externals.iter().map(|&e| (e, demand(e))).collect();
            for &f in &piece.internal {
                assert!(flow.load(f, &demands) <= flow.capacity);
            }
        }
        assert!(routed > 0, "{} has no routed degree piece", family.name());
    }
}

#[test]
fn flow_fails_exactly_when_capacity_is_short() {
    // K_{4,4}: each boundary vertex meets three interior edges, so a demand
    // d per outside edge needs capacity d / 3 per interior edge.
    let piece = complete_bipartite_piece();
    let demands: Vec<(EdgeId, Rational)> = piece.graph.incident(0).map(|e| (e.id, ratio(1, 4))).collect();
    assert!(bipartization_flow(&piece, &demands, &ratio(1, 12)).is_some());
    assert!(bipartization_flow(&piece, &demands, &ratio(1, 13)).is_none());
}
