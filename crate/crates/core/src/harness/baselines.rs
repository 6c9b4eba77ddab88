use crate::bandit_core::{PlacementAgent, RoundOutcome};
use crate::mec_sim::{Arm, ServerId, SlotObservation, Simulator};
use crate::Result;

/// Index into `arms` of the arm on `server` using its first incident link.
fn first_arm_of(arms: &[Arm], server: ServerId) -> usize {
    arms.iter().position(|a| a.server == server).expect("every server has an incident link")
}

/// Always the server with the lowest mean base processing delay.
#[derive(Clone, Debug)]
pub struct FixedAgent {
    arm: usize,
}

impl FixedAgent {
    pub fn new(sim: &Simulator) -> Self {
        let best = sim
            .model()
            .servers
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.delay.mean().total_cmp(&b.1.delay.mean()))
            .map(|(s, _)| ServerId(s))
            .expect("at least one server");
        Self {
            arm: first_arm_of(sim.arms(), best),
        }
    }

    pub fn arm(&self) -> usize {
        self.arm
    }
}

impl PlacementAgent for FixedAgent {
    fn step(&mut self, slot: u64, _obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        Ok(RoundOutcome::simple(slot, self.arm, cost_of(self.arm)))
    }
}

/// The server whose observed processing delay has the lowest running mean,
/// the current slot included.
#[derive(Clone, Debug)]
pub struct GreedyAgent {
    server_arm: Vec<usize>,
    sums: Vec<f64>,
    observed: u64,
}

impl GreedyAgent {
    pub fn new(sim: &Simulator) -> Self {
        let servers = sim.topology().server_count();
        Self {
            server_arm: (0..servers).map(|s| first_arm_of(sim.arms(), ServerId(s))).collect(),
            sums: vec![0.0; servers],
            observed: 0,
        }
    }

    pub fn running_means(&self) -> Vec<f64> {
        let n = self.observed.max(1) as f64;
        self.sums.iter().map(|s| s / n).collect()
    }
}

impl PlacementAgent for GreedyAgent {
    fn step(&mut self, slot: u64, obs: &SlotObservation, cost_of: &dyn Fn(usize) -> f64) -> Result<RoundOutcome> {
        for (sum, d) in self.sums.iter_mut().zip(&obs.server_delays) {
            *sum += d;
        }
        self.observed += 1;
        let server = self
            .sums
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(s, _)| s)
            .expect("at least one server");
        let arm = self.server_arm[server];
        Ok(RoundOutcome::simple(slot, arm, cost_of(arm)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mec_sim::{DelayDist, DelayModel, DynamicMode, NetworkTopology, ServerDelay};

    fn sim() -> Simulator {
        let topo = NetworkTopology::new(
            ["c0"],
            ["s0", "s1"],
            [("e0", "c0", "s0"), ("e1", "c0", "s1"), ("e2", "s0", "s1")],
        )
        .unwrap();
        let model = DelayModel {
            servers: vec![
                ServerDelay {
                    delay: DelayDist::Constant { ms: 9.0 },
                    load_penalty_ms: 4.0,
                },
                ServerDelay {
                    delay: DelayDist::Constant { ms: 5.0 },
                    load_penalty_ms: 4.0,
                },
            ],
            links: vec![DelayDist::Constant { ms: 1.0 }; 3],
            dynamic: DynamicMode::default(),
        };
        Simulator::new(topo, model, 1).unwrap()
    }

    #[test]
    fn fixed_picks_lowest_mean_server_with_first_link() {
        let sim = sim();
        let agent = FixedAgent::new(&sim);
        let arm = sim.arms()[agent.arm()];
        assert_eq!(arm.server, ServerId(1));
        assert_eq!(arm.link, sim.topology().incident_links(ServerId(1))[0]);
    }

    #[test]
    fn greedy_follows_observed_load() {
        let sim = sim();
        let mut g = GreedyAgent::new(&sim);
        let obs = sim.sample_slot(0);
        let pick = g.step(0, &obs, &|_| 0.0).unwrap();
        assert_eq!(sim.arms()[pick.arm].server, ServerId(1));
        // Two modules already on s1 push its observed delay to 13 ms.
        let loaded = obs.with_load(sim.model(), &[0, 2]);
        let mut g = GreedyAgent::new(&sim);
        let pick = g.step(0, &loaded, &|_| 0.0).unwrap();
        assert_eq!(sim.arms()[pick.arm].server, ServerId(0));
        assert_eq!(g.running_means(), vec![9.0, 13.0]);
    }
}
