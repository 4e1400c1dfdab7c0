use std::collections::HashMap;

use super::MrGraph;

/// Interned form: a sorted label list per ordered pair and a signature per node.
struct Indexed {
    pair: Vec<Vec<usize>>,
    sig: Vec<Signature>,
}

/// Node label plus the sorted multisets of outgoing and incoming edge labels.
type Signature = (usize, Vec<usize>, Vec<usize>);

fn index(g: &MrGraph, names: &mut HashMap<String, usize>) -> Indexed {
    let mut intern = |s: &str| {
        let next = names.len();
        *names.entry(s.to_string()).or_insert(next)
    };
    let n = g.nodes.len();
    let labels: Vec<usize> = g.nodes.iter().map(|x| intern(&x.label)).collect();
    let mut pair = vec![Vec::new(); n * n];
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for e in &g.edges {
        let l = intern(&e.label);
        pair[e.src * n + e.dst].push(l);
        out[e.src].push(l);
        inc[e.dst].push(l);
    }
    for p in &mut pair {
        p.sort_unstable();
    }
    let sig = (0..n)
        .map(|i| {
            out[i].sort_unstable();
            inc[i].sort_unstable();
            (labels[i], std::mem::take(&mut out[i]), std::mem::take(&mut inc[i]))
        })
        .collect();
    Indexed { pair, sig }
}

/// Whether a bijection between the nodes preserves node labels and every
/// ordered pair's edge labels.
pub fn graph_isomorphic(a: &MrGraph, b: &MrGraph) -> bool {
    let n = a.nodes.len();
    if n != b.nodes.len() || a.edges.len() != b.edges.len() {
        return false;
    }
    let mut names = HashMap::new();
    let ga = index(a, &mut names);
    let gb = index(b, &mut names);

    let mut sa = ga.sig.clone();
    let mut sb = gb.sig.clone();
    sa.sort();
    sb.sort();
    if sa != sb {
        return false;
    }

    let candidates: Vec<Vec<usize>> = (0..n)
        .map(|u| (0..n).filter(|&v| ga.sig[u] == gb.sig[v]).collect())
        .collect();
    // most constrained first, then neighbours of already ordered nodes
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .min_by_key(|&u| {
                let linked = order
                    .iter()
                    .any(|&w| !ga.pair[u * n + w].is_empty() || !ga.pair[w * n + u].is_empty());
                (!linked, candidates[u].len(), u)
            })
            .expect("unplaced node exists");
        placed[next] = true;
        order.push(next);
    }

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    search(&ga, &gb, &order, &candidates, 0, &mut map, &mut used)
}

fn search(
    a: &Indexed,
    b: &Indexed,
    order: &[usize],
    candidates: &[Vec<usize>],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let n = map.len();
    if depth == n {
        return true;
    }
    let u = order[depth];
    for &v in &candidates[u] {
        if used[v] {
            continue;
        }
        if a.pair[u * n + u] != b.pair[v * n + v] {
            continue;
        }
        let consistent = order[..depth].iter().all(|&w| {
            let mw = map[w];
            a.pair[u * n + w] == b.pair[v * n + mw] && a.pair[w * n + u] == b.pair[mw * n + v]
        });
        if !consistent {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if search(a, b, order, candidates, depth + 1, map, used) {
            return true;
        }
        used[v] = false;
        map[u] = usize::MAX;
    }
    false
}
