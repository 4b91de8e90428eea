//! Walk-count risk `R^L_i = Σ_s w_s E[N^L_is]`, where `N^L_is` counts walks
//! of length `1..=L` from `i` to `s` whose nodes are all susceptible.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Network;

use super::{AttackVector, DefenseVector, RiskKind, RiskVector, WalkMode};

/// Longest walk enumerated in `exact_distinct` mode.
pub const MAX_EXACT_WALK_LENGTH: usize = 8;

/// Cap on the number of enumerated walks.
const MAX_WALKS: usize = 20_000_000;

#[derive(Debug, Clone, Copy)]
struct Term {
    i: u32,
    s: u32,
    count: f64,
    start: u32,
    len: u32,
}

/// Every walk of length `1..=L`, grouped by `(start, end, set of distinct
/// nodes)`. A walk survives with probability `Π_{k in set} (1 - q_k)`.
#[derive(Debug, Clone)]
pub struct WalkIndex {
    n: usize,
    length: usize,
    terms: Vec<Term>,
    nodes: Vec<u32>,
}

impl WalkIndex {
    pub fn build(net: &Network, length: usize) -> Result<Self> {
        Self::build_with(net, length, true)
    }

    /// With `closed` unset, walks returning to their start are left out.
    pub fn build_with(net: &Network, length: usize, closed: bool) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument("walk length must be >= 1".into()));
        }
        if length > MAX_EXACT_WALK_LENGTH {
            return Err(Error::WalkLimit(format!(
                "exact_distinct supports L <= {MAX_EXACT_WALK_LENGTH}, got {length}"
            )));
        }
        // walks of length exactly l ending anywhere, from dynamic programming on degrees
        let mut per_len: Vec<f64> = net.degrees().iter().map(|&d| d as f64).collect();
        let mut total: f64 = per_len.iter().sum();
        for _ in 1..length {
            per_len = (0..net.n())
                .map(|v| net.neighbors(v).iter().map(|&w| per_len[w]).sum())
                .collect();
            total += per_len.iter().sum::<f64>();
        }
        if total > MAX_WALKS as f64 {
            return Err(Error::WalkLimit(format!(
                "{total:.0} walks of length <= {length}"
            )));
        }

        let mut groups: HashMap<(u32, u32, Vec<u32>), f64> = HashMap::new();
        let mut path = Vec::with_capacity(length + 1);
        for i in 0..net.n() {
            path.clear();
            path.push(i);
            extend(net, length, &mut path, &mut |walk| {
                if !closed && *walk.last().unwrap() == i {
                    return;
                }
                let mut set: Vec<u32> = walk.iter().map(|&v| v as u32).collect();
                set.sort_unstable();
                set.dedup();
                *groups
                    .entry((i as u32, *walk.last().unwrap() as u32, set))
                    .or_default() += 1.0;
            });
        }
        let mut keyed: Vec<_> = groups.into_iter().collect();
        keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut terms = Vec::with_capacity(keyed.len());
        let mut nodes = Vec::new();
        for ((i, s, set), count) in keyed {
            terms.push(Term {
                i,
                s,
                count,
                start: nodes.len() as u32,
                len: set.len() as u32,
            });
            nodes.extend(set);
        }
        Ok(Self {
            n: net.n(),
            length,
            terms,
            nodes,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of distinct `(i, s, node set)` groups.
    pub fn groups(&self) -> usize {
        self.terms.len()
    }

    fn set(&self, t: &Term) -> &[u32] {
        &self.nodes[t.start as usize..(t.start + t.len) as usize]
    }

    pub fn evaluate(&self, q: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for t in &self.terms {
            let w = weights[t.s as usize];
            if w == 0.0 {
                continue;
            }
            let survive: f64 = self.set(t).iter().map(|&k| 1.0 - q[k as usize]).product();
            out[t.i as usize] += t.count * w * survive;
        }
        out
    }

    /// Gradient of `Σ_i cot_i R_i(q, w)` with respect to `q`.
    pub fn vjp(&self, q: &[f64], weights: &[f64], cot: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.n];
        for t in &self.terms {
            let c = cot[t.i as usize] * t.count * weights[t.s as usize];
            if c == 0.0 {
                continue;
            }
            let set = self.set(t);
            for (x, &k) in set.iter().enumerate() {
                let others: f64 = set
                    .iter()
                    .enumerate()
                    .filter(|&(y, _)| y != x)
                    .map(|(_, &v)| 1.0 - q[v as usize])
                    .product();
                grad[k as usize] -= c * others;
            }
        }
        grad
    }
}

fn extend(net: &Network, length: usize, path: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    let last = *path.last().unwrap();
    for &w in net.neighbors(last) {
        path.push(w);
        visit(path);
        if path.len() <= length {
            extend(net, length, path, visit);
        }
        path.pop();
    }
}

/// `Σ_{l=1..L} (D A)^l D w` with `D = diag(1 - q)`: one survival factor per
/// visit rather than per distinct node.
pub(crate) fn matrix_power(net: &Network, q: &[f64], weights: &[f64], length: usize) -> Vec<f64> {
    let n = net.n();
    let mut y: Vec<f64> = (0..n).map(|k| (1.0 - q[k]) * weights[k]).collect();
    let mut out = vec![0.0; n];
    for _ in 0..length {
        y = (0..n)
            .map(|i| (1.0 - q[i]) * net.neighbors(i).iter().map(|&k| y[k]).sum::<f64>())
            .collect();
        for (o, v) in out.iter_mut().zip(&y) {
            *o += v;
        }
    }
    out
}

/// Reverse-mode gradient of `cot · matrix_power(q, w)`.
pub(crate) fn matrix_power_vjp(
    net: &Network,
    q: &[f64],
    weights: &[f64],
    cot: &[f64],
    length: usize,
) -> Vec<f64> {
    let n = net.n();
    let d: Vec<f64> = q.iter().map(|x| 1.0 - x).collect();
    // ay[l] = A y_l for l = 0..L-1
    let mut ay = Vec::with_capacity(length);
    let mut y: Vec<f64> = (0..n).map(|k| d[k] * weights[k]).collect();
    for _ in 0..length {
        let a: Vec<f64> = (0..n)
            .map(|i| net.neighbors(i).iter().map(|&k| y[k]).sum())
            .collect();
        y = (0..n).map(|i| d[i] * a[i]).collect();
        ay.push(a);
    }
    let mut grad_d = vec![0.0; n];
    let mut adj = vec![0.0; n];
    for a in ay.iter().rev() {
        for i in 0..n {
            adj[i] += cot[i];
            grad_d[i] += adj[i] * a[i];
        }
        let scaled: Vec<f64> = (0..n).map(|i| d[i] * adj[i]).collect();
        adj = (0..n)
            .map(|k| net.neighbors(k).iter().map(|&i| scaled[i]).sum())
            .collect();
    }
    for k in 0..n {
        grad_d[k] += adj[k] * weights[k];
    }
    grad_d.iter().map(|g| -g).collect()
}

/// Closed-walk part of [`matrix_power`]: `w_i Σ_l [(D A)^l D]_ii`.
pub(crate) fn matrix_power_diagonal(
    net: &Network,
    q: &[f64],
    weights: &[f64],
    length: usize,
) -> Vec<f64> {
    let mut unit = vec![0.0; net.n()];
    (0..net.n())
        .map(|i| {
            if weights[i] == 0.0 {
                return 0.0;
            }
            unit[i] = weights[i];
            let r = matrix_power(net, q, &unit, length)[i];
            unit[i] = 0.0;
            r
        })
        .collect()
}

pub(crate) fn matrix_power_diagonal_vjp(
    net: &Network,
    q: &[f64],
    weights: &[f64],
    cot: &[f64],
    length: usize,
) -> Vec<f64> {
    let n = net.n();
    let mut grad = vec![0.0; n];
    let (mut unit_w, mut unit_c) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        if weights[i] == 0.0 || cot[i] == 0.0 {
            continue;
        }
        unit_w[i] = weights[i];
        unit_c[i] = cot[i];
        for (g, d) in grad
            .iter_mut()
            .zip(matrix_power_vjp(net, q, &unit_w, &unit_c, length))
        {
            *g += d;
        }
        unit_w[i] = 0.0;
        unit_c[i] = 0.0;
    }
    grad
}

pub fn walk_count_risk(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
    length: usize,
    mode: WalkMode,
) -> Result<RiskVector> {
    net.check_len(q.len())?;
    net.check_len(phi.len())?;
    if length == 0 {
        return Err(Error::InvalidArgument("walk length must be >= 1".into()));
    }
    let values = match mode {
        WalkMode::ExactDistinct => {
            WalkIndex::build(net, length)?.evaluate(q.as_slice(), phi.as_slice())
        }
        WalkMode::MatrixPower => matrix_power(net, q.as_slice(), phi.as_slice(), length),
    };
    Ok(RiskVector {
        values,
        kind: RiskKind::WalkCount,
        std_err: None,
    })
}
