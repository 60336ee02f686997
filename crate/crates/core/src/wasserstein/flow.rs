//! Dense successive-shortest-path solver for the transportation problem.
//!
//! Instances here are small (a few hundred atoms per side), so the solver
//! favours determinism and verifiability over asymptotics: dense Dijkstra
//! with lowest-index tie-breaking, and a post-run certificate that checks
//! primal feasibility and complementary slackness before any result is
//! returned.

use super::WassersteinError;

/// Mass below this is treated as exhausted supply/demand.
const RESIDUAL_TOL: f64 = 1e-12;
/// Flow below this does not open a backward residual arc.
const FLOW_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct TransportPlan {
    /// Row-major `ns × nt` flow matrix.
    pub flows: Vec<f64>,
    /// Total transport cost `Σ c_ij·x_ij`.
    pub cost: f64,
}

/// Solves `min Σ c_ij·x_ij` subject to row sums `supply` and column sums
/// `demand` (totals must agree; demands are rescaled to the supply total to
/// absorb last-ulp drift). Costs must be finite and nonnegative.
pub(crate) fn min_cost_transport(
    cost: &[f64],
    ns: usize,
    nt: usize,
    supply: &[f64],
    demand: &[f64],
) -> Result<TransportPlan, WassersteinError> {
    assert_eq!(cost.len(), ns * nt);
    assert_eq!(supply.len(), ns);
    assert_eq!(demand.len(), nt);
    for &c in cost {
        if !(c.is_finite() && c >= 0.0) {
            return Err(WassersteinError::SolverInconsistency(format!(
                "cost entry {c} is negative or non-finite"
            )));
        }
    }
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    if (total_supply - total_demand).abs() > 1e-9 * (1.0 + total_supply.abs()) {
        return Err(WassersteinError::SolverInconsistency(format!(
            "supply total {total_supply} does not match demand total {total_demand}"
        )));
    }
    let rescale = total_supply / total_demand;
    let mut r_sup = supply.to_vec();
    let mut r_dem: Vec<f64> = demand.iter().map(|d| d * rescale).collect();

    let nv = ns + nt;
    let mut flows = vec![0.0f64; ns * nt];
    // Node potentials: pi on sources, rho on sinks, stored as one array so
    // reduced costs read c_ij + pot[i] - pot[ns + j].
    let mut pot = vec![0.0f64; nv];
    let mut dist = vec![0.0f64; nv];
    let mut parent = vec![usize::MAX; nv];
    let mut done = vec![false; nv];

    let max_rounds = 64 * nv;
    let mut rounds = 0usize;
    loop {
        if !r_dem.iter().any(|&d| d > RESIDUAL_TOL) {
            break;
        }
        rounds += 1;
        if rounds > max_rounds {
            return Err(WassersteinError::SolverInconsistency(format!(
                "augmentation cap {max_rounds} exceeded"
            )));
        }

        // Multi-source Dijkstra on the residual graph under reduced costs.
        for v in 0..nv {
            dist[v] = f64::INFINITY;
            parent[v] = usize::MAX;
            done[v] = false;
        }
        for i in 0..ns {
            if r_sup[i] > RESIDUAL_TOL {
                dist[i] = 0.0;
            }
        }
        let mut target = usize::MAX;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= ns && r_dem[u - ns] > RESIDUAL_TOL {
                target = u;
                break;
            }
            if u < ns {
                // Forward arcs source -> sink, unbounded capacity.
                for j in 0..nt {
                    let rc = (cost[u * nt + j] + pot[u] - pot[ns + j]).max(0.0);
                    let nd = dist[u] + rc;
                    if nd < dist[ns + j] {
                        dist[ns + j] = nd;
                        parent[ns + j] = u;
                    }
                }
            } else {
                // Backward arcs sink -> source, capacity = current flow.
                let j = u - ns;
                for i in 0..ns {
                    if flows[i * nt + j] > FLOW_TOL {
                        let rc = (-cost[i * nt + j] + pot[u] - pot[i]).max(0.0);
                        let nd = dist[u] + rc;
                        if nd < dist[i] {
                            dist[i] = nd;
                            parent[i] = u;
                        }
                    }
                }
            }
        }
        if target == usize::MAX {
            return Err(WassersteinError::SolverInconsistency(
                "residual demand is unreachable from remaining supply".to_string(),
            ));
        }

        for v in 0..nv {
            if dist[v].is_finite() {
                pot[v] += dist[v].min(dist[target]);
            } else {
                pot[v] += dist[target];
            }
        }

        // Trace back to a root and find the bottleneck.
        let mut bottleneck = r_dem[target - ns];
        let mut v = target;
        loop {
            let u = parent[v];
            if v < ns {
                // v is a source reached through a backward arc from sink u.
                bottleneck = bottleneck.min(flows[v * nt + (u - ns)]);
            }
            if u < ns && parent[u] == usize::MAX {
                bottleneck = bottleneck.min(r_sup[u]);
                break;
            }
            v = u;
        }

        // Apply the augmentation.
        let mut v = target;
        loop {
            let u = parent[v];
            if v >= ns {
                flows[u * nt + (v - ns)] += bottleneck;
            } else {
                flows[v * nt + (parent[v] - ns)] -= bottleneck;
            }
            if u < ns && parent[u] == usize::MAX {
                r_sup[u] -= bottleneck;
                break;
            }
            v = u;
        }
        r_dem[target - ns] -= bottleneck;
    }

    let mut total = 0.0;
    for (f, c) in flows.iter().zip(cost) {
        total += f * c;
    }
    let plan = TransportPlan { flows, cost: total };
    certify(cost, ns, nt, supply, &r_dem, &plan.flows, &pot)?;
    Ok(plan)
}

/// Optimality certificate: primal feasibility, dual feasibility, and
/// complementary slackness of the returned plan against the final
/// potentials. A failure here is a solver bug, never a data error.
fn certify(
    cost: &[f64],
    ns: usize,
    nt: usize,
    supply: &[f64],
    rescaled_residual_demand: &[f64],
    flows: &[f64],
    pot: &[f64],
) -> Result<(), WassersteinError> {
    let cmax = cost.iter().cloned().fold(0.0f64, f64::max);
    let feas_tol = 1e-9;
    let cs_tol = 1e-7 * (1.0 + cmax);
    for (i, &s) in supply.iter().enumerate() {
        let row: f64 = (0..nt).map(|j| flows[i * nt + j]).sum();
        if (row - s).abs() > feas_tol {
            return Err(WassersteinError::SolverInconsistency(format!(
                "row {i} ships {row}, supply is {s}"
            )));
        }
    }
    for (j, &resid) in rescaled_residual_demand.iter().enumerate() {
        if resid.abs() > feas_tol {
            return Err(WassersteinError::SolverInconsistency(format!(
                "column {j} left with residual demand {resid}"
            )));
        }
    }
    for i in 0..ns {
        for j in 0..nt {
            let x = flows[i * nt + j];
            if x < -feas_tol {
                return Err(WassersteinError::SolverInconsistency(format!(
                    "negative flow {x} on arc ({i},{j})"
                )));
            }
            let rc = cost[i * nt + j] + pot[i] - pot[ns + j];
            if rc < -cs_tol {
                return Err(WassersteinError::SolverInconsistency(format!(
                    "dual infeasibility {rc} on arc ({i},{j})"
                )));
            }
            if x > FLOW_TOL && rc.abs() > cs_tol {
                return Err(WassersteinError::SolverInconsistency(format!(
                    "slack {rc} on an arc carrying flow {x}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_single_arc() {
        let plan = min_cost_transport(&[3.0], 1, 1, &[1.0], &[1.0]).unwrap();
        assert_eq!(plan.flows, vec![1.0]);
        assert_eq!(plan.cost, 3.0);
    }

    #[test]
    fn picks_the_cheap_assignment() {
        // 2x2 with an obvious permutation optimum.
        let cost = [0.0, 10.0, 10.0, 0.0];
        let plan = min_cost_transport(&cost, 2, 2, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((plan.cost - 0.0).abs() <= 1e-12);
        assert!((plan.flows[0] - 0.5).abs() <= 1e-12);
        assert!((plan.flows[3] - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn splits_mass_when_forced() {
        // One source feeding two sinks: flow is fixed, cost is the weighted sum.
        let cost = [2.0, 5.0];
        let plan = min_cost_transport(&cost, 1, 2, &[1.0], &[0.25, 0.75]).unwrap();
        assert!((plan.cost - (0.25 * 2.0 + 0.75 * 5.0)).abs() <= 1e-12);
    }

    #[test]
    fn requires_rerouting_through_backward_arcs() {
        // Greedy sends source 0 to sink 0; the optimum reroutes it.
        //   c = [1 2]    supplies [0.5, 0.5]   demands [0.5, 0.5]
        //       [1 9]
        // Optimal: x00=0, x01=0.5, x10=0.5 with cost 0.5*2 + 0.5*1 = 1.5
        // versus the greedy 0.5*1 + 0.5*9 = 5.
        let cost = [1.0, 2.0, 1.0, 9.0];
        let plan = min_cost_transport(&cost, 2, 2, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((plan.cost - 1.5).abs() <= 1e-12, "cost {}", plan.cost);
    }

    #[test]
    fn matches_assignment_optimum_on_uniform_instances() {
        // With equal-size uniform marginals the transportation polytope is the
        // Birkhoff polytope, so the optimum is a permutation matching and can
        // be brute-forced.
        use itertools::Itertools;
        use rand::Rng;
        let mut rng = crate::rng::substream(7, 0);
        for _ in 0..40 {
            let n = rng.random_range(2..=6);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..4.0)).collect();
            let marg = vec![1.0 / n as f64; n];
            let plan = min_cost_transport(&cost, n, n, &marg, &marg).unwrap();
            let best = (0..n)
                .permutations(n)
                .map(|perm| {
                    perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>()
                        / n as f64
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                (plan.cost - best).abs() <= 1e-10 * (1.0 + best),
                "solver {} vs assignment optimum {best}",
                plan.cost
            );
        }
    }

    #[test]
    fn never_exceeds_random_feasible_plans() {
        use rand::Rng;
        let mut rng = crate::rng::substream(8, 0);
        for _ in 0..25 {
            let ns = rng.random_range(1..=5);
            let nt = rng.random_range(1..=5);
            let cost: Vec<f64> = (0..ns * nt).map(|_| rng.random_range(0.0..4.0)).collect();
            let raw: Vec<f64> = (0..ns).map(|_| rng.random_range(0.1..1.0)).collect();
            let ssum: f64 = raw.iter().sum();
            let supply: Vec<f64> = raw.iter().map(|v| v / ssum).collect();
            let rawd: Vec<f64> = (0..nt).map(|_| rng.random_range(0.1..1.0)).collect();
            let dsum: f64 = rawd.iter().sum();
            let demand: Vec<f64> = rawd.iter().map(|v| v / dsum).collect();
            let plan = min_cost_transport(&cost, ns, nt, &supply, &demand).unwrap();
            for _ in 0..20 {
                let feasible = random_feasible_cost(&cost, ns, nt, &supply, &demand, &mut rng);
                assert!(
                    plan.cost <= feasible + 1e-9,
                    "solver {} above a feasible plan {feasible}",
                    plan.cost
                );
            }
        }
    }

    /// Cost of a random feasible plan built by pushing mass along arcs in a
    /// random order; each push saturates a source or a sink, so this ends.
    fn random_feasible_cost(
        cost: &[f64],
        ns: usize,
        nt: usize,
        supply: &[f64],
        demand: &[f64],
        rng: &mut impl rand::Rng,
    ) -> f64 {
        let mut r_sup = supply.to_vec();
        let mut r_dem = demand.to_vec();
        let mut total = 0.0;
        loop {
            let live_i: Vec<usize> = (0..ns).filter(|&i| r_sup[i] > 1e-12).collect();
            let live_j: Vec<usize> = (0..nt).filter(|&j| r_dem[j] > 1e-12).collect();
            if live_i.is_empty() || live_j.is_empty() {
                return total;
            }
            let i = live_i[rng.random_range(0..live_i.len())];
            let j = live_j[rng.random_range(0..live_j.len())];
            let push = r_sup[i].min(r_dem[j]);
            r_sup[i] -= push;
            r_dem[j] -= push;
            total += push * cost[i * nt + j];
        }
    }

    #[test]
    fn rejects_mismatched_totals() {
        let r = min_cost_transport(&[1.0], 1, 1, &[1.0], &[0.5]);
        assert!(matches!(r, Err(WassersteinError::SolverInconsistency(_))));
    }

    #[test]
    fn rejects_negative_costs() {
        let r = min_cost_transport(&[-1.0], 1, 1, &[1.0], &[1.0]);
        assert!(matches!(r, Err(WassersteinError::SolverInconsistency(_))));
    }

    #[test]
    fn zero_weight_atoms_are_inert() {
        let cost = [1.0, 2.0, 3.0, 4.0];
        let plan = min_cost_transport(&cost, 2, 2, &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(plan.flows[2], 0.0);
        assert_eq!(plan.flows[3], 0.0);
        assert!((plan.cost - (0.5 * 1.0 + 0.5 * 2.0)).abs() <= 1e-12);
    }
}
