use crate::error::{Error, Result};
use crate::graph::Network;

use super::{AttackVector, DefenseVector, RiskKind, RiskVector};

/// Largest network handled by exhaustive enumeration of susceptibility states.
pub const MAX_EXACT_NODES: usize = 16;

/// Calls `f(mask, p)` for every susceptibility state, where bit `i` of `mask`
/// is `X_i` and `p = Π (1 - q_i)^{X_i} q_i^{1 - X_i}`.
pub fn for_each_state(q: &[f64], mut f: impl FnMut(u32, f64)) {
    let n = q.len();
    assert!(
        n <= MAX_EXACT_NODES,
        "state enumeration limited to {MAX_EXACT_NODES} nodes"
    );
    for mask in 0u32..(1u32 << n) {
        let mut p = 1.0;
        for (i, &qi) in q.iter().enumerate() {
            p *= if mask >> i & 1 == 1 { 1.0 - qi } else { qi };
            if p == 0.0 {
                break;
            }
        }
        if p != 0.0 {
            f(mask, p);
        }
    }
}

/// Component labels of the susceptible subgraph encoded by `mask`;
/// immune nodes get `u8::MAX`.
fn label_mask(net: &Network, mask: u32, labels: &mut [u8], stack: &mut Vec<usize>) -> usize {
    labels.fill(u8::MAX);
    let mut next = 0u8;
    for start in 0..net.n() {
        if mask >> start & 1 == 0 || labels[start] != u8::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in net.neighbors(v) {
                if mask >> w & 1 == 1 && labels[w] == u8::MAX {
                    labels[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    next as usize
}

/// `Σ_{s,X} p(X) w_s 1[i ~ s in T(X)]` by enumeration of all `2^n` states.
pub(crate) fn enumerate(net: &Network, q: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = net.n();
    let mut out = vec![0.0; n];
    let mut labels = vec![0u8; n];
    let mut stack = Vec::new();
    let mut comp_weight = vec![0.0; n];
    for_each_state(q, |mask, p| {
        let count = label_mask(net, mask, &mut labels, &mut stack);
        comp_weight[..count].fill(0.0);
        for s in 0..n {
            if labels[s] != u8::MAX {
                comp_weight[labels[s] as usize] += weights[s];
            }
        }
        for i in 0..n {
            if labels[i] != u8::MAX {
                out[i] += p * comp_weight[labels[i] as usize];
            }
        }
    });
    out
}

/// Nodes on the unique path from `root` to every reachable node, as parent
/// pointers from a depth-first traversal.
fn forest_parents(net: &Network, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = net.n();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    parent[root] = root;
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &w in net.neighbors(v) {
            if parent[w] == usize::MAX {
                parent[w] = v;
                stack.push(w);
            }
        }
    }
    (parent, order)
}

/// On a forest, `i ~ s` in `T(X)` iff every node on the path is susceptible,
/// so `P_i = Σ_s w_s Π_{k on path(i,s)} (1 - q_k)`.
pub(crate) fn forest(net: &Network, q: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = net.n();
    let mut out = vec![0.0; n];
    let mut reach = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let (parent, order) = forest_parents(net, i);
        let mut total = 0.0;
        for &v in &order {
            reach[v] = (1.0 - q[v]) * if v == i { 1.0 } else { reach[parent[v]] };
            total += weights[v] * reach[v];
        }
        *slot = total;
    }
    out
}

/// Gradient of `Σ_i cot_i P_i(q, w)` for the forest closed form.
///
/// Rooting the tree at `i`, `∂P_i/∂q_k = -reach(parent(k)) · S(k)` with
/// `S(k) = w_k + Σ_{c child of k} (1 - q_c) S(c)`.
pub(crate) fn forest_vjp(net: &Network, q: &[f64], weights: &[f64], cot: &[f64]) -> Vec<f64> {
    let n = net.n();
    let mut grad = vec![0.0; n];
    let mut reach = vec![0.0; n];
    let mut subtree = vec![0.0; n];
    for i in 0..n {
        if cot[i] == 0.0 {
            continue;
        }
        let (parent, order) = forest_parents(net, i);
        for &v in &order {
            reach[v] = (1.0 - q[v]) * if v == i { 1.0 } else { reach[parent[v]] };
            subtree[v] = weights[v];
        }
        for &v in order.iter().rev() {
            if v != i {
                subtree[parent[v]] += (1.0 - q[v]) * subtree[v];
            }
        }
        for &k in &order {
            let upstream = if k == i { 1.0 } else { reach[parent[k]] };
            grad[k] -= cot[i] * upstream * subtree[k];
        }
    }
    grad
}

pub fn infection_probability_exact(
    net: &Network,
    q: &DefenseVector,
    phi: &AttackVector,
) -> Result<RiskVector> {
    net.check_len(q.len())?;
    net.check_len(phi.len())?;
    let values = if net.n() <= MAX_EXACT_NODES {
        enumerate(net, q.as_slice(), phi.as_slice())
    } else if net.is_forest() {
        forest(net, q.as_slice(), phi.as_slice())
    } else {
        return Err(Error::TooLargeForExact {
            n: net.n(),
            max: MAX_EXACT_NODES,
        });
    };
    Ok(RiskVector {
        values,
        kind: RiskKind::Probability,
        std_err: None,
    })
}
