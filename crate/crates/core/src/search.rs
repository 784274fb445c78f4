//! Shared pieces of the shortest-path solvers.

use std::cmp::Ordering;

/// Heap entry ordered so that `BinaryHeap` pops the smallest cost first,
/// then the smallest node index.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct State {
    pub cost: f64,
    pub node: u32,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub const NO_PRED: u32 = u32::MAX;

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    pub fn components(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BinaryHeap;

    #[test]
    fn heap_pops_cheapest_then_lowest_index() {
        let mut h = BinaryHeap::new();
        h.push(State { cost: 2.0, node: 0 });
        h.push(State { cost: 1.0, node: 5 });
        h.push(State { cost: 1.0, node: 3 });
        assert_eq!(h.pop().unwrap().node, 3);
        assert_eq!(h.pop().unwrap().node, 5);
        assert_eq!(h.pop().unwrap().node, 0);
    }
}
