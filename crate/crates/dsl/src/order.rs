//! Ordering of categories so that every drill-down parent comes before the
//! categories that depend on it, while nested categories stay inside their
//! container.

use std::collections::{BTreeSet, HashMap};

use crate::model::{CategoryDecl, ConfigModel};
use crate::validate::ValidatedModel;

/// One category as seen by the ordering algorithm. Nodes are passed in
/// declaration (pre-order) sequence; that sequence breaks ties.
#[derive(Clone, Copy, Debug)]
pub struct OrderNode<'a> {
    pub name: &'a str,
    pub container: Option<&'a str>,
    pub depends_on: Option<&'a str>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderError {
    /// Categories that depend on each other in a loop, in dependency order.
    Cycle(Vec<String>),
    /// No container-respecting order exists; names the conflicting categories.
    Placement(Vec<String>),
}

/// Returns node indices in an order where dependency parents precede their
/// dependents, containers precede their contents, and otherwise declaration
/// order is kept. References to unknown names are ignored.
pub fn order_categories(nodes: &[OrderNode<'_>]) -> Result<Vec<usize>, OrderError> {
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.name, i)).collect();
    let parent_of: Vec<Option<usize>> = nodes
        .iter()
        .map(|n| n.depends_on.and_then(|p| index.get(p).copied()))
        .collect();
    let container_of: Vec<Option<usize>> = nodes
        .iter()
        .map(|n| n.container.and_then(|c| index.get(c).copied()))
        .collect();

    if let Some(cycle) = find_cycle(&parent_of) {
        return Err(OrderError::Cycle(
            cycle.into_iter().map(|i| nodes[i].name.to_string()).collect(),
        ));
    }

    let chain = |mut i: usize| {
        let mut c = vec![i];
        let mut guard = 0;
        while let Some(up) = container_of[i] {
            c.push(up);
            i = up;
            guard += 1;
            if guard > nodes.len() {
                break;
            }
        }
        c.reverse();
        c
    };

    // Sibling groups keyed by container (None = top level).
    let mut groups: HashMap<Option<usize>, Vec<usize>> = HashMap::new();
    for (i, &container) in container_of.iter().enumerate() {
        groups.entry(container).or_default().push(i);
    }
    let mut group_edges: HashMap<Option<usize>, Vec<(usize, usize)>> = HashMap::new();

    for (dependent, parent) in parent_of.iter().enumerate() {
        let Some(parent) = *parent else { continue };
        let pc = chain(parent);
        let dc = chain(dependent);
        let common = pc.iter().zip(&dc).take_while(|(a, b)| a == b).count();
        if common == pc.len() {
            // Parent contains the dependent: already ordered by nesting.
            continue;
        }
        if common == dc.len() {
            return Err(OrderError::Placement(vec![
                nodes[dependent].name.to_string(),
                nodes[parent].name.to_string(),
            ]));
        }
        let container = if common == 0 { None } else { Some(pc[common - 1]) };
        group_edges
            .entry(container)
            .or_default()
            .push((pc[common], dc[common]));
    }

    let mut sorted_groups: HashMap<Option<usize>, Vec<usize>> = HashMap::new();
    for (container, members) in &groups {
        let edges = group_edges.remove(container).unwrap_or_default();
        let sorted = kahn(members, &edges).map_err(|stuck| {
            OrderError::Placement(stuck.into_iter().map(|i| nodes[i].name.to_string()).collect())
        })?;
        sorted_groups.insert(*container, sorted);
    }

    let mut out = Vec::with_capacity(nodes.len());
    let mut stack: Vec<usize> = sorted_groups
        .get(&None)
        .map(|g| g.iter().rev().copied().collect())
        .unwrap_or_default();
    while let Some(i) = stack.pop() {
        out.push(i);
        if let Some(children) = sorted_groups.get(&Some(i)) {
            stack.extend(children.iter().rev());
        }
    }
    Ok(out)
}

/// Topological sort that always emits the smallest ready index. On failure
/// returns the members that could not be placed.
fn kahn(members: &[usize], edges: &[(usize, usize)]) -> Result<Vec<usize>, Vec<usize>> {
    let mut indegree: HashMap<usize, usize> = members.iter().map(|&m| (m, 0)).collect();
    let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(from, to) in edges {
        *indegree.get_mut(&to).expect("edge inside group") += 1;
        succ.entry(from).or_default().push(to);
    }
    let mut ready: BTreeSet<usize> = indegree.iter().filter(|(_, d)| **d == 0).map(|(m, _)| *m).collect();
    let mut out = Vec::with_capacity(members.len());
    while let Some(next) = ready.pop_first() {
        out.push(next);
        for to in succ.get(&next).into_iter().flatten() {
            let d = indegree.get_mut(to).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(*to);
            }
        }
    }
    if out.len() == members.len() {
        Ok(out)
    } else {
        let mut stuck: Vec<usize> = indegree.into_iter().filter(|(_, d)| *d > 0).map(|(m, _)| m).collect();
        stuck.sort_unstable();
        Err(stuck)
    }
}

/// Each node has at most one dependency parent, so a cycle is found by
/// following parent pointers.
fn find_cycle(parent_of: &[Option<usize>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; parent_of.len()];
    for start in 0..parent_of.len() {
        let mut path = Vec::new();
        let mut cur = Some(start);
        while let Some(i) = cur {
            match state[i] {
                2 => break,
                1 => {
                    let at = path.iter().position(|&p| p == i).unwrap();
                    let mut cycle: Vec<usize> = path[at..].to_vec();
                    // report parent-first, closing the loop
                    cycle.reverse();
                    cycle.push(cycle[0]);
                    return Some(cycle);
                }
                _ => {
                    state[i] = 1;
                    path.push(i);
                    cur = parent_of[i];
                }
            }
        }
        for i in path {
            state[i] = 2;
        }
    }
    None
}

pub(crate) fn model_nodes(model: &ConfigModel) -> Vec<OrderNode<'_>> {
    fn walk<'a>(cats: &'a [CategoryDecl], container: Option<&'a str>, out: &mut Vec<OrderNode<'a>>) {
        for c in cats {
            out.push(OrderNode {
                name: &c.name,
                container,
                depends_on: c.depends_on.as_ref().map(|d| d.parent.as_str()),
            });
            walk(&c.subcategories, Some(&c.name), out);
        }
    }
    let mut out = Vec::new();
    walk(&model.scheme.categories, None, &mut out);
    out
}

/// Category names of a validated model in dependency order: each parent
/// before its dependents, declaration order among independent categories.
pub fn dependency_graph(model: &ValidatedModel) -> Vec<String> {
    let nodes = model_nodes(model);
    let order = order_categories(&nodes).expect("validated models have an ordering");
    order.into_iter().map(|i| nodes[i].name.to_string()).collect()
}
