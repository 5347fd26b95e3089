//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

/// Direct O(n²) DFT of every bin, scaled by 2/n.
pub fn naive_dft(series: &[f64]) -> Vec<(f64, f64)> {
    let n = series.len();
    let table: Vec<(f64, f64)> = (0..n)
        .map(|m| {
            let a = 2.0 * PI * m as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in series.iter().enumerate() {
                let (c, s) = table[(k * j) % n];
                re += x * c;
                im -= x * s;
            }
            (2.0 * re / n as f64, 2.0 * im / n as f64)
        })
        .collect()
}

/// Mutual information between a uniform intervention and the next state.
pub fn mi_oracle(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let px = 1.0 / n as f64;
    let py: Vec<f64> = (0..n)
        .map(|y| rows.iter().map(|r| r[y] * px).sum())
        .collect();
    let mut mi = 0.0;
    for r in rows {
        for (y, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += px * p * (p / py[y]).log2();
            }
        }
    }
    mi
}

pub fn macro_rows(rows: &[Vec<f64>], mapping: &[usize]) -> Vec<Vec<f64>> {
    let m = mapping.iter().max().unwrap() + 1;
    let mut out = vec![vec![0.0; m]; m];
    let mut size = vec![0usize; m];
    for (i, r) in rows.iter().enumerate() {
        size[mapping[i]] += 1;
        for (j, &p) in r.iter().enumerate() {
            out[mapping[i]][mapping[j]] += p;
        }
    }
    for (a, row) in out.iter_mut().enumerate() {
        for p in row.iter_mut() {
            *p /= size[a] as f64;
        }
    }
    out
}

/// Every set partition of 0..n as a macro-id vector, by recursive insertion.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=blocks {
            cur.push(b);
            go(i + 1, n, cur, blocks.max(b + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

pub fn best_ce_oracle(rows: &[Vec<f64>]) -> f64 {
    let micro = mi_oracle(rows);
    all_partitions(rows.len())
        .iter()
        .map(|p| mi_oracle(&macro_rows(rows, p)) - micro)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Straight-line four-phase trace on `Vec<bool>` states, reading the node
/// tables directly.
pub mod memory {
    use polyc_core::boolnet::BooleanNetwork;
    use polyc_core::memory_screen::{Protocol, Response, Triplet};

    fn update(net: &BooleanNetwork, s: &[bool]) -> Vec<bool> {
        net.nodes
            .iter()
            .map(|node| {
                let mut idx = 0;
                for (bit, &src) in node.inputs.iter().enumerate() {
                    if s[src] {
                        idx += 1 << bit;
                    }
                }
                node.table[idx] == 1
            })
            .collect()
    }

    fn baseline(net: &BooleanNetwork, budget: usize) -> Vec<bool> {
        let mut seen: Vec<Vec<bool>> = Vec::new();
        let mut s = vec![false; net.nodes.len()];
        for _ in 0..=budget {
            if let Some(pos) = seen.iter().position(|x| *x == s) {
                return seen[pos].clone();
            }
            seen.push(s.clone());
            s = update(net, &s);
        }
        panic!("no attractor");
    }

    fn clamp(net: &BooleanNetwork, s: &[bool], on: &[usize], d: usize) -> Vec<bool> {
        let mut s = s.to_vec();
        for &i in on {
            s[i] = true;
        }
        for _ in 0..d {
            s = update(net, &s);
            for &i in on {
                s[i] = true;
            }
        }
        s
    }

    fn observe(net: &BooleanNetwork, s: &[bool], r: usize, p: &Protocol) -> Response {
        let mut s = s.to_vec();
        let mut count = 0;
        for _ in 0..p.obs_window {
            s = update(net, &s);
            if s[r] {
                count += 1;
            }
        }
        let frac = count as f64 / p.obs_window as f64;
        if frac >= p.on_fraction {
            Response::Responds
        } else if frac <= p.off_fraction {
            Response::Silent
        } else {
            Response::Ambiguous
        }
    }

    pub fn run(net: &BooleanNetwork, t: Triplet, p: &Protocol) -> (Response, Response, Response) {
        let base = baseline(net, p.relax_steps);
        let pre = observe(net, &clamp(net, &base, &[t.cs], p.stim_steps), t.r, p);
        let ucs = observe(net, &clamp(net, &base, &[t.ucs], p.stim_steps), t.r, p);
        let trained = clamp(net, &base, &[t.ucs, t.cs], p.stim_steps);
        let post = observe(net, &clamp(net, &trained, &[t.cs], p.stim_steps), t.r, p);
        (pre, ucs, post)
    }
}
