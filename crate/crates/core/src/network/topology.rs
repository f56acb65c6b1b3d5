//! Tree checks and rooted traversal orders.

use std::collections::VecDeque;

use super::Line;

/// Result of checking that a graph is a tree, rooted at bus index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyReport {
    pub is_tree: bool,
    pub root: usize,
    /// `parent[k]` is `(parent bus, line index)`; `None` for the root and for
    /// buses unreachable from it.
    pub parent: Vec<Option<(usize, usize)>>,
    pub children: Vec<Vec<usize>>,
    pub leaves: Vec<usize>,
    pub depth: Vec<usize>,
    /// Breadth-first order from the root; every bus appears after its parent.
    pub order: Vec<usize>,
    pub problem: Option<String>,
}

impl TopologyReport {
    /// Number of buses with a parent entry.
    pub fn parent_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_some()).count()
    }

    /// Buses ordered deepest first, ties broken by index.
    pub fn leaf_to_root(&self) -> Vec<usize> {
        let mut order = self.order.clone();
        order.sort_by(|&a, &b| self.depth[b].cmp(&self.depth[a]).then(a.cmp(&b)));
        order
    }

    /// Bus indices on the path from the root down to `bus`, inclusive.
    pub fn path_from_root(&self, bus: usize) -> Vec<usize> {
        let mut path = vec![bus];
        let mut cur = bus;
        while let Some((p, _)) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// Check that `lines` form a spanning tree over `n` buses and compute the
/// rooted structure. Failures are reported in the result rather than raised.
pub fn validate_tree(n: usize, lines: &[Line]) -> TopologyReport {
    let mut adj = vec![Vec::new(); n];
    let mut problem = None;
    for (e, l) in lines.iter().enumerate() {
        if l.from == l.to {
            problem.get_or_insert_with(|| format!("self-loop at bus index {}", l.from));
            continue;
        }
        adj[l.from].push((l.to, e));
        adj[l.to].push((l.from, e));
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
    }

    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    let mut depth = vec![0; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    if n > 0 {
        seen[0] = true;
        queue.push_back(0);
    }
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &(k, e) in &adj[i] {
            if parent[i].is_some_and(|(p, pe)| p == k && pe == e) {
                continue;
            }
            if seen[k] {
                problem.get_or_insert_with(|| "graph contains a cycle".to_string());
                continue;
            }
            seen[k] = true;
            parent[k] = Some((i, e));
            children[i].push(k);
            depth[k] = depth[i] + 1;
            queue.push_back(k);
        }
    }
    if order.len() < n {
        problem.get_or_insert_with(|| {
            format!(
                "graph is disconnected ({} of {n} buses reachable from the root)",
                order.len()
            )
        });
    }
    if n > 0 && lines.len() != n - 1 {
        problem.get_or_insert_with(|| format!("{} lines for {n} buses", lines.len()));
    }
    let leaves = if n >= 2 {
        (1..n).filter(|&i| seen[i] && children[i].is_empty()).collect()
    } else {
        Vec::new()
    };
    TopologyReport {
        is_tree: problem.is_none() && n > 0,
        root: 0,
        parent,
        children,
        leaves,
        depth,
        order,
        problem,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(pairs: &[(usize, usize)]) -> Vec<Line> {
        pairs.iter().map(|&(a, b)| Line::new(a, b, 1.0, 1.0)).collect()
    }

    #[test]
    fn path_graph() {
        let r = validate_tree(3, &edges(&[(0, 1), (1, 2)]));
        assert!(r.is_tree);
        assert_eq!(r.parent[1].map(|p| p.0), Some(0));
        assert_eq!(r.parent[2].map(|p| p.0), Some(1));
        assert_eq!(r.leaves, vec![2]);
        assert_eq!(r.root, 0);
        assert_eq!(r.leaf_to_root(), vec![2, 1, 0]);
    }

    #[test]
    fn star_graph() {
        let r = validate_tree(4, &edges(&[(0, 1), (0, 2), (0, 3)]));
        assert!(r.is_tree);
        assert_eq!(r.leaves, vec![1, 2, 3]);
        assert_eq!(r.children[0], vec![1, 2, 3]);
    }

    #[test]
    fn disconnected() {
        let r = validate_tree(4, &edges(&[(0, 1), (2, 3)]));
        assert!(!r.is_tree);
        assert!(r.problem.unwrap().contains("disconnected"));
    }

    #[test]
    fn cycle() {
        let r = validate_tree(3, &edges(&[(0, 1), (1, 2), (0, 2)]));
        assert!(!r.is_tree);
    }

    #[test]
    fn single_bus() {
        let r = validate_tree(1, &[]);
        assert!(r.is_tree);
        assert!(r.leaves.is_empty());
    }
}
