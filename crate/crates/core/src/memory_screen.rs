//! Pavlovian conditioning screen over all (UCS, CS, R) node triplets of a
//! Boolean network, with randomized control networks for comparison.
//!
//! Stimulating a node means clamping it to 1 for `stim_steps` synchronous
//! updates; on release it follows its own rule again.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boolnet::{BooleanNetwork, Node};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub stim_steps: usize,
    pub obs_window: usize,
    pub on_fraction: f64,
    pub off_fraction: f64,
    pub relax_steps: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            stim_steps: 8,
            obs_window: 16,
            on_fraction: 0.75,
            off_fraction: 0.25,
            relax_steps: 4096,
        }
    }
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.off_fraction
            && self.off_fraction < self.on_fraction
            && self.on_fraction <= 1.0)
        {
            return Err(Error::config(
                "protocol",
                "fractions must satisfy 0 <= off_fraction < on_fraction <= 1",
            ));
        }
        for (field, v) in [
            ("protocol.stim_steps", self.stim_steps),
            ("protocol.obs_window", self.obs_window),
            ("protocol.relax_steps", self.relax_steps),
        ] {
            if v < 1 {
                return Err(Error::config(field, "must be >= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub ucs: usize,
    pub cs: usize,
    pub r: usize,
}

impl Triplet {
    pub fn new(ucs: usize, cs: usize, r: usize) -> Self {
        Triplet { ucs, cs, r }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.ucs >= n || self.cs >= n || self.r >= n {
            return Err(Error::config(
                "triplet",
                format!("node index out of range 0..{n}"),
            ));
        }
        if self.ucs == self.cs || self.ucs == self.r || self.cs == self.r {
            return Err(Error::config("triplet", "ucs, cs and r must be distinct"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Responds,
    Silent,
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Associative,
    None,
    Skipped,
}

impl Classification {
    pub fn from_phases(pre: Response, ucs: Response, post: Response) -> Self {
        use Response::*;
        if [pre, ucs, post].contains(&Ambiguous) {
            Classification::Skipped
        } else if pre == Silent && ucs == Responds && post == Responds {
            Classification::Associative
        } else {
            Classification::None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripletOutcome {
    pub r_pre: Response,
    pub r_ucs: Response,
    pub r_post: Response,
    pub classification: Classification,
}

/// Cycle a deterministic network settles into, in visiting order. The first
/// state is where the trajectory entered the cycle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attractor {
    pub states: Vec<u64>,
}

impl Attractor {
    pub fn entry(&self) -> u64 {
        self.states[0]
    }

    pub fn period(&self) -> usize {
        self.states.len()
    }
}

pub fn find_attractor(net: &BooleanNetwork, init: u64, relax_steps: usize) -> Result<Attractor> {
    if relax_steps < 1 {
        return Err(Error::config("protocol.relax_steps", "must be >= 1"));
    }
    let mut seen: HashMap<u64, usize> = HashMap::new();
    let mut trajectory = Vec::new();
    let mut state = init;
    for step in 0..=relax_steps {
        if let Some(&start) = seen.get(&state) {
            return Ok(Attractor {
                states: trajectory[start..].to_vec(),
            });
        }
        seen.insert(state, step);
        trajectory.push(state);
        state = net.next_state(state);
    }
    Err(Error::AttractorBudget {
        budget: relax_steps,
    })
}

struct Runner<'a> {
    net: &'a BooleanNetwork,
    protocol: &'a Protocol,
}

impl Runner<'_> {
    /// Hold `mask` at 1 through `stim_steps` updates.
    fn clamp(&self, mut state: u64, mask: u64) -> u64 {
        state |= mask;
        for _ in 0..self.protocol.stim_steps {
            state = self.net.next_state_clamped(state, mask);
        }
        state
    }

    /// Free-run for the observation window and classify `r`.
    fn observe(&self, mut state: u64, r: usize) -> Response {
        let mut on = 0;
        for _ in 0..self.protocol.obs_window {
            state = self.net.next_state(state);
            on += ((state >> r) & 1) as usize;
        }
        let frac = on as f64 / self.protocol.obs_window as f64;
        if frac >= self.protocol.on_fraction {
            Response::Responds
        } else if frac <= self.protocol.off_fraction {
            Response::Silent
        } else {
            Response::Ambiguous
        }
    }

    fn run(&self, baseline: u64, t: Triplet) -> TripletOutcome {
        let (ucs, cs) = (1u64 << t.ucs, 1u64 << t.cs);
        let r_pre = self.observe(self.clamp(baseline, cs), t.r);
        let r_ucs = self.observe(self.clamp(baseline, ucs), t.r);
        let trained = self.clamp(baseline, ucs | cs);
        let r_post = self.observe(self.clamp(trained, cs), t.r);
        TripletOutcome {
            r_pre,
            r_ucs,
            r_post,
            classification: Classification::from_phases(r_pre, r_ucs, r_post),
        }
    }
}

/// Baseline for every phase: the attractor reached from the all-zero state.
pub fn baseline_attractor(net: &BooleanNetwork, protocol: &Protocol) -> Result<Attractor> {
    find_attractor(net, 0, protocol.relax_steps)
}

/// Pre-test, UCS check, paired training and test for one triplet. Pre-test
/// and UCS check each start from the baseline; training starts from the
/// baseline and the test follows training without a reset.
pub fn run_protocol(
    net: &BooleanNetwork,
    triplet: Triplet,
    protocol: &Protocol,
) -> Result<TripletOutcome> {
    protocol.validate()?;
    triplet.validate(net.len())?;
    let baseline = baseline_attractor(net, protocol)?.entry();
    Ok(Runner { net, protocol }.run(baseline, triplet))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub triplet: Triplet,
    pub names: [String; 3],
    pub outcome: TripletOutcome,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub associative: usize,
    pub none: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub node_count: usize,
    pub baseline: Attractor,
    pub hits: Vec<Triplet>,
    pub counts: ClassCounts,
    pub triplets: Vec<TripletRecord>,
}

impl ScreenReport {
    pub fn outcome(&self, t: Triplet) -> Option<&TripletOutcome> {
        self.triplets
            .iter()
            .find(|r| r.triplet == t)
            .map(|r| &r.outcome)
    }
}

/// All ordered triplets of distinct nodes, ucs-major.
pub fn all_triplets(n: usize) -> Vec<Triplet> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) * n.saturating_sub(2));
    for ucs in 0..n {
        for cs in 0..n {
            for r in 0..n {
                if ucs != cs && cs != r && ucs != r {
                    out.push(Triplet::new(ucs, cs, r));
                }
            }
        }
    }
    out
}

/// Screen the given triplets; the report preserves their order.
pub fn screen_triplets(
    net: &BooleanNetwork,
    protocol: &Protocol,
    triplets: &[Triplet],
) -> Result<ScreenReport> {
    protocol.validate()?;
    for t in triplets {
        t.validate(net.len())?;
    }
    let baseline = baseline_attractor(net, protocol)?;
    let runner = Runner { net, protocol };
    let entry = baseline.entry();
    let records: Vec<TripletRecord> = triplets
        .par_iter()
        .map(|&t| TripletRecord {
            triplet: t,
            names: [t.ucs, t.cs, t.r].map(|i| net.nodes[i].name.clone()),
            outcome: runner.run(entry, t),
        })
        .collect();
    let mut counts = ClassCounts::default();
    for r in &records {
        match r.outcome.classification {
            Classification::Associative => counts.associative += 1,
            Classification::None => counts.none += 1,
            Classification::Skipped => counts.skipped += 1,
        }
    }
    let hits = records
        .iter()
        .filter(|r| r.outcome.classification == Classification::Associative)
        .map(|r| r.triplet)
        .collect();
    Ok(ScreenReport {
        node_count: net.len(),
        baseline,
        hits,
        counts,
        triplets: records,
    })
}

pub fn screen_network(net: &BooleanNetwork, protocol: &Protocol) -> Result<ScreenReport> {
    if net.len() < 3 {
        return Err(Error::config("network", "screening needs at least 3 nodes"));
    }
    screen_triplets(net, protocol, &all_triplets(net.len()))
}

/// Same node count and per-node indegree; inputs drawn without repetition
/// from all nodes, tables drawn uniformly.
pub fn random_control<R: Rng>(net: &BooleanNetwork, rng: &mut R) -> BooleanNetwork {
    let n = net.len();
    let nodes = net
        .nodes
        .iter()
        .map(|node| {
            let k = node.inputs.len();
            let inputs = sample(rng, n, k).into_vec();
            let table = (0..1usize << k)
                .map(|_| u8::from(rng.gen::<bool>()))
                .collect();
            Node {
                name: node.name.clone(),
                inputs,
                table,
            }
        })
        .collect();
    BooleanNetwork { nodes }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSummary {
    pub seed: u64,
    pub original_hits: usize,
    pub control_hits: Vec<usize>,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

pub fn random_controls(
    net: &BooleanNetwork,
    protocol: &Protocol,
    count: usize,
    seed: u64,
) -> Result<ControlSummary> {
    if count < 1 {
        return Err(Error::config("controls", "count must be >= 1"));
    }
    let original_hits = screen_network(net, protocol)?.counts.associative;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw every control up front so results do not depend on scheduling.
    let controls: Vec<BooleanNetwork> = (0..count).map(|_| random_control(net, &mut rng)).collect();
    let control_hits = controls
        .par_iter()
        .map(|c| screen_network(c, protocol).map(|r| r.counts.associative))
        .collect::<Result<Vec<usize>>>()?;
    let mean = control_hits.iter().sum::<usize>() as f64 / count as f64;
    Ok(ControlSummary {
        seed,
        original_hits,
        min: control_hits.iter().copied().min().unwrap_or(0),
        max: control_hits.iter().copied().max().unwrap_or(0),
        control_hits,
        mean,
    })
}
