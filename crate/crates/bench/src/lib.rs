//! Fixtures shared by the benchmarks.

use netdefense::graph::generate_topology;
use netdefense::{Network, Topology, TopologySpec};

/// Connected Erdős–Rényi graph with mean degree `c`, retried over seeds.
pub fn er(n: usize, c: f64, seed: u64) -> Network {
    for s in seed.. {
        let net = generate_topology(&TopologySpec::new(Topology::ErdosRenyi { n, c }, s))
            .expect("valid topology");
        if net.is_connected() {
            return net;
        }
    }
    unreachable!()
}

pub fn ramp(n: usize, top: f64) -> Vec<f64> {
    (0..n).map(|i| top * i as f64 / n.max(2) as f64).collect()
}
