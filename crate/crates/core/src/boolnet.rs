//! Synchronous Boolean networks, their transition matrices, effective
//! information and coarse-graining.
//!
//! A network state is an integer whose bit `i` is the value of node `i`
//! (little-endian by node index). A node's lookup table is indexed the same
//! way by its inputs: bit `k` of the table index is the value of `inputs[k]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count for which a full transition matrix is built.
pub const MAX_TPM_NODES: usize = 20;

/// Largest micro state count searched exhaustively (Bell(10) = 115975).
pub const MAX_EXHAUSTIVE_STATES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub name: String,
    pub inputs: Vec<usize>,
    pub table: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BooleanNetwork {
    pub nodes: Vec<Node>,
}

impl BooleanNetwork {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let net = BooleanNetwork { nodes };
        net.validate()?;
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n > 63 {
            return Err(Error::Capacity { nodes: n, max: 63 });
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let loc = || format!("node {i} ({:?})", node.name);
            if node.inputs.len() > 30 {
                return Err(Error::parse(loc(), "indegree above 30 is not supported"));
            }
            if let Some(&bad) = node.inputs.iter().find(|&&j| j >= n) {
                return Err(Error::parse(
                    loc(),
                    format!("input index {bad} out of range 0..{n}"),
                ));
            }
            let want = 1usize << node.inputs.len();
            if node.table.len() != want {
                return Err(Error::parse(
                    loc(),
                    format!(
                        "table has {} entries, expected 2^{} = {want}",
                        node.table.len(),
                        node.inputs.len()
                    ),
                ));
            }
            if let Some(&bad) = node.table.iter().find(|&&b| b > 1) {
                return Err(Error::parse(
                    loc(),
                    format!("table entry {bad} is not 0 or 1"),
                ));
            }
        }
        Ok(())
    }

    /// Value of node `i` after one synchronous update from `state`.
    #[inline]
    pub fn node_update(&self, i: usize, state: u64) -> bool {
        let node = &self.nodes[i];
        let idx = node.inputs.iter().enumerate().fold(0usize, |acc, (k, &j)| {
            acc | ((((state >> j) & 1) as usize) << k)
        });
        node.table[idx] == 1
    }

    /// Synchronous successor of `state`.
    pub fn next_state(&self, state: u64) -> u64 {
        (0..self.len()).fold(0u64, |acc, i| {
            acc | (u64::from(self.node_update(i, state)) << i)
        })
    }

    /// Successor with every node in `clamp_mask` held at 1.
    pub fn next_state_clamped(&self, state: u64, clamp_mask: u64) -> u64 {
        self.next_state(state) | clamp_mask
    }
}

/// Parse and validate a network file: a JSON array of
/// `{name, inputs, table}` objects.
pub fn parse_network(text: &str) -> Result<BooleanNetwork> {
    let net: BooleanNetwork = serde_json::from_str(text)?;
    net.validate()?;
    Ok(net)
}

/// Row-stochastic transition matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tpm {
    n_states: usize,
    data: Vec<f64>,
}

impl Tpm {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::config("tpm", "needs at least one state"));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(
                    "tpm",
                    format!("row {i} has {} entries, expected {n}", row.len()),
                ));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::config(
                    "tpm",
                    format!("row {i} has a negative or non-finite entry"),
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    "tpm",
                    format!("row {i} sums to {sum}, expected 1"),
                ));
            }
            data.extend(row);
        }
        Ok(Tpm { n_states: n, data })
    }

    /// Deterministic map: row `i` is one-hot on `successors[i]`.
    pub fn from_map(successors: &[usize]) -> Result<Self> {
        let n = successors.len();
        if n == 0 {
            return Err(Error::config("tpm", "needs at least one state"));
        }
        let mut data = vec![0.0; n * n];
        for (i, &s) in successors.iter().enumerate() {
            if s >= n {
                return Err(Error::config(
                    "tpm",
                    format!("successor {s} of state {i} out of range"),
                ));
            }
            data[i * n + s] = 1.0;
        }
        Ok(Tpm { n_states: n, data })
    }

    pub fn identity(n_states: usize) -> Self {
        let map: Vec<usize> = (0..n_states).collect();
        Tpm::from_map(&map).expect("non-empty identity")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_states..(i + 1) * self.n_states]
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n_states + to]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_states)
    }

    pub fn max_row_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Comma-separated matrix, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn build_tpm(net: &BooleanNetwork) -> Result<Tpm> {
    if net.len() > MAX_TPM_NODES {
        return Err(Error::Capacity {
            nodes: net.len(),
            max: MAX_TPM_NODES,
        });
    }
    let n_states = 1usize << net.len();
    let successors: Vec<usize> = (0..n_states as u64)
        .map(|s| net.next_state(s) as usize)
        .collect();
    Tpm::from_map(&successors)
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

fn entropy(dist: &[f64]) -> f64 {
    dist.iter().map(|&p| plogp(p)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EiReport {
    /// Bits.
    pub ei: f64,
    pub determinism: f64,
    pub degeneracy: f64,
    pub effectiveness: f64,
    pub size: usize,
}

/// Effective information under a uniform intervention distribution:
/// `H(mean row) − mean H(row)`.
pub fn effective_information(tpm: &Tpm) -> EiReport {
    let n = tpm.n_states();
    let mut avg = vec![0.0; n];
    let mut row_entropy = 0.0;
    for row in tpm.rows() {
        row_entropy += entropy(row);
        for (a, &p) in avg.iter_mut().zip(row) {
            *a += p;
        }
    }
    avg.iter_mut().for_each(|a| *a /= n as f64);
    let mean_row_entropy = row_entropy / n as f64;
    let effect_entropy = entropy(&avg);
    let ei = effect_entropy - mean_row_entropy;
    let log_n = (n as f64).log2();
    let (determinism, degeneracy) = if n > 1 {
        (1.0 - mean_row_entropy / log_n, 1.0 - effect_entropy / log_n)
    } else {
        (1.0, 1.0)
    };
    EiReport {
        ei,
        determinism,
        degeneracy,
        effectiveness: determinism - degeneracy,
        size: n,
    }
}

/// Surjective map from micro states onto macro labels `0..n_macro`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    mapping: Vec<usize>,
    n_macro: usize,
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(mapping: Vec<usize>) -> Result<Self> {
        Partition::new(mapping)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.mapping
    }
}

impl Partition {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        if mapping.is_empty() {
            return Err(Error::config("partition", "empty mapping"));
        }
        let n_macro = mapping.iter().max().map_or(0, |&m| m + 1);
        let mut seen = vec![false; n_macro];
        for &m in &mapping {
            seen[m] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::config(
                "partition",
                format!("not surjective: macro state {missing} has no members"),
            ));
        }
        Ok(Partition { mapping, n_macro })
    }

    pub fn trivial(n_states: usize) -> Self {
        Partition {
            mapping: (0..n_states).collect(),
            n_macro: n_states,
        }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn n_micro(&self) -> usize {
        self.mapping.len()
    }

    pub fn n_macro(&self) -> usize {
        self.n_macro
    }

    /// Relabel macro states in order of first appearance.
    pub fn canonical(&self) -> Partition {
        let mut relabel = vec![usize::MAX; self.n_macro];
        let mut next = 0;
        let mapping = self
            .mapping
            .iter()
            .map(|&m| {
                if relabel[m] == usize::MAX {
                    relabel[m] = next;
                    next += 1;
                }
                relabel[m]
            })
            .collect();
        Partition {
            mapping,
            n_macro: self.n_macro,
        }
    }

    /// Micro members of each macro state, ascending.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_macro];
        for (i, &m) in self.mapping.iter().enumerate() {
            groups[m].push(i);
        }
        groups
    }
}

/// Macro TPM: each macro row is the uniform average of its members' rows,
/// with columns summed within each macro state.
pub fn coarse_grain(tpm: &Tpm, partition: &Partition) -> Result<Tpm> {
    let n = tpm.n_states();
    if partition.n_micro() != n {
        return Err(Error::config(
            "partition",
            format!("covers {} micro states, TPM has {n}", partition.n_micro()),
        ));
    }
    let m = partition.n_macro();
    let map = partition.mapping();
    let mut data = vec![0.0; m * m];
    let mut counts = vec![0usize; m];
    for (i, row) in tpm.rows().enumerate() {
        let g = map[i];
        counts[g] += 1;
        let out = &mut data[g * m..(g + 1) * m];
        for (j, &p) in row.iter().enumerate() {
            out[map[j]] += p;
        }
    }
    for (g, &c) in counts.iter().enumerate() {
        data[g * m..(g + 1) * m]
            .iter_mut()
            .for_each(|p| *p /= c as f64);
    }
    Ok(Tpm { n_states: m, data })
}

/// `EI(macro) − EI(micro)` in bits.
pub fn causal_emergence(micro: &Tpm, partition: &Partition) -> Result<f64> {
    let macro_tpm = coarse_grain(micro, partition)?;
    Ok(effective_information(&macro_tpm).ei - effective_information(micro).ei)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Greedy,
}

impl std::str::FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "greedy" => Ok(SearchMode::Greedy),
            other => Err(Error::config(
                "mode",
                format!("expected exhaustive|greedy, got {other:?}"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub partition: Partition,
    pub ce: f64,
    pub mode: SearchMode,
    /// Candidate partitions scored.
    pub evaluations: usize,
    /// True when the budget ran out before the search finished.
    pub truncated: bool,
}

/// Gains this small count as ties.
const TIE_TOL: f64 = 1e-12;

/// Maximize causal emergence over partitions of the TPM's states.
///
/// With `mode = None`, TPMs with at most [`MAX_EXHAUSTIVE_STATES`] states are
/// searched exhaustively and larger ones greedily. `budget` caps the number
/// of candidate partitions scored.
pub fn search_partitions(
    tpm: &Tpm,
    mode: Option<SearchMode>,
    budget: Option<usize>,
) -> Result<SearchResult> {
    let n = tpm.n_states();
    let mode = mode.unwrap_or(if n <= MAX_EXHAUSTIVE_STATES {
        SearchMode::Exhaustive
    } else {
        SearchMode::Greedy
    });
    let budget = budget.unwrap_or(usize::MAX);
    match mode {
        SearchMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_STATES {
                return Err(Error::config(
                    "mode",
                    format!("exhaustive search is limited to {MAX_EXHAUSTIVE_STATES} states, TPM has {n}"),
                ));
            }
            Ok(exhaustive(tpm, budget))
        }
        SearchMode::Greedy => Ok(greedy(tpm, budget)),
    }
}

/// Enumerate restricted-growth strings in lexicographic order, so the first
/// optimum found is the lexicographically smallest.
fn exhaustive(tpm: &Tpm, budget: usize) -> SearchResult {
    let n = tpm.n_states();
    let micro_ei = effective_information(tpm).ei;
    let mut rgs = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, rgs.clone());
    let mut evaluations = 0;
    let mut truncated = false;
    'outer: loop {
        if evaluations == budget {
            truncated = true;
            break;
        }
        let p = Partition::new(rgs.clone()).expect("restricted growth strings are surjective");
        let macro_tpm = coarse_grain(tpm, &p).expect("sizes match");
        let ce = effective_information(&macro_tpm).ei - micro_ei;
        evaluations += 1;
        if ce > best.0 + TIE_TOL {
            best = (ce, rgs.clone());
        }
        // Advance to the next restricted growth string.
        let mut i = n;
        loop {
            if i <= 1 {
                break 'outer;
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                rgs[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
    }
    SearchResult {
        partition: Partition::new(best.1).expect("surjective"),
        ce: best.0,
        mode: SearchMode::Exhaustive,
        evaluations,
        truncated,
    }
}

/// Greedy agglomeration from two seeds: singletons, and classes of micro
/// states with identical rows. Each run merges the best pair of macro states
/// while that strictly raises CE. The better run is returned.
fn greedy(tpm: &Tpm, budget: usize) -> SearchResult {
    let n = tpm.n_states();
    let mut seeds = vec![Partition::trivial(n)];
    let by_row = identical_row_partition(tpm);
    if by_row.n_macro() < n {
        seeds.push(by_row);
    }

    let mut best: Option<(f64, Partition)> = None;
    let mut evaluations = 0;
    let mut truncated = false;
    for seed in seeds {
        if evaluations >= budget {
            truncated = true;
            break;
        }
        let (p, used, cut) = agglomerate(tpm, seed, budget - evaluations);
        evaluations += used;
        truncated |= cut;
        let ce = causal_emergence(tpm, &p).expect("sizes match");
        let better = match &best {
            None => true,
            Some((b, bp)) => ce > b + TIE_TOL || (ce >= b - TIE_TOL && p.mapping() < bp.mapping()),
        };
        if better {
            best = Some((ce, p));
        }
    }
    let (ce, partition) = best.unwrap_or_else(|| (0.0, Partition::trivial(n)));
    SearchResult {
        partition,
        ce,
        mode: SearchMode::Greedy,
        evaluations,
        truncated,
    }
}

fn identical_row_partition(tpm: &Tpm) -> Partition {
    let n = tpm.n_states();
    let mut mapping = vec![usize::MAX; n];
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..n {
        let row = tpm.row(i);
        mapping[i] = match reps.iter().position(|&r| tpm.row(r) == row) {
            Some(g) => g,
            None => {
                reps.push(i);
                reps.len() - 1
            }
        };
    }
    Partition::new(mapping).expect("first-appearance labels are surjective")
}

/// Agglomerative merging with O(m) incremental scoring per candidate pair.
/// Returns the final partition, candidates scored, and whether the budget
/// cut the run short.
fn agglomerate(tpm: &Tpm, start: Partition, budget: usize) -> (Partition, usize, bool) {
    let n = tpm.n_states();
    let start = start.canonical();
    let mut groups = start.groups();
    let mut evaluations = 0;

    loop {
        let m = groups.len();
        if m <= 1 {
            return (groups_to_partition(&groups, n), evaluations, false);
        }
        // Macro rows r[g][h] and per-row entropies.
        let mut label = vec![0; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                label[i] = g;
            }
        }
        let mut rows = vec![0.0; m * m];
        for (g, members) in groups.iter().enumerate() {
            let out = &mut rows[g * m..(g + 1) * m];
            for &i in members {
                for (j, &p) in tpm.row(i).iter().enumerate() {
                    out[label[j]] += p;
                }
            }
            let size = members.len() as f64;
            out.iter_mut().for_each(|p| *p /= size);
        }
        let r = |g: usize, h: usize| rows[g * m + h];
        let row_h: Vec<f64> = (0..m).map(|g| entropy(&rows[g * m..(g + 1) * m])).collect();
        let col_sum: Vec<f64> = (0..m).map(|h| (0..m).map(|g| r(g, h)).sum()).collect();
        let total_row_h: f64 = row_h.iter().sum();
        let current_ei = entropy(&col_sum.iter().map(|s| s / m as f64).collect::<Vec<_>>())
            - total_row_h / m as f64;

        let mut best: Option<(f64, usize, usize)> = None;
        let mut merged = vec![0.0; m];
        let mut cut = false;
        // Visiting by (b, a) ascending makes the first of several tied merges
        // the one with the lexicographically smallest canonical mapping.
        'pairs: for b in 1..m {
            for a in 0..b {
                if evaluations == budget {
                    cut = true;
                    break 'pairs;
                }
                evaluations += 1;
                let (na, nb) = (groups[a].len() as f64, groups[b].len() as f64);
                // Merged row, indexed by old labels with column b folded into a.
                for h in 0..m {
                    merged[h] = (r(a, h) * na + r(b, h) * nb) / (na + nb);
                }
                merged[a] += merged[b];
                merged[b] = 0.0;
                let mut sum_h = entropy(&merged);
                for g in (0..m).filter(|&g| g != a && g != b) {
                    sum_h += row_h[g] - plogp(r(g, a)) - plogp(r(g, b)) + plogp(r(g, a) + r(g, b));
                }
                let k = (m - 1) as f64;
                let mut effect_h = 0.0;
                for h in 0..m {
                    if h == b {
                        continue;
                    }
                    let s = if h == a {
                        col_sum[a] + col_sum[b] - (r(a, a) + r(a, b) + r(b, a) + r(b, b))
                            + merged[a]
                    } else {
                        col_sum[h] - r(a, h) - r(b, h) + merged[h]
                    };
                    effect_h += plogp(s / k);
                }
                let gain = effect_h - sum_h / k - current_ei;
                if best.is_none_or(|(g, _, _)| gain > g + TIE_TOL) {
                    best = Some((gain, a, b));
                }
            }
        }

        match best {
            Some((gain, a, b)) if gain > TIE_TOL => {
                let moved = std::mem::take(&mut groups[b]);
                groups[a].extend(moved);
                groups[a].sort_unstable();
                groups.remove(b);
            }
            _ => return (groups_to_partition(&groups, n), evaluations, cut),
        }
        if cut {
            return (groups_to_partition(&groups, n), evaluations, true);
        }
    }
}

fn groups_to_partition(groups: &[Vec<usize>], n: usize) -> Partition {
    let mut mapping = vec![0; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            mapping[i] = g;
        }
    }
    Partition::new(mapping)
        .expect("groups cover all states")
        .canonical()
}
