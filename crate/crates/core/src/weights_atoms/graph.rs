use std::cmp::Ordering;
use std::collections::BTreeMap;

/// Lattice index; unused trailing axes are zero.
pub type Cell = [i64; 3];

pub fn lattice_distance(a: &Cell, b: &Cell) -> f64 {
    let s: i64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (s as f64).sqrt()
}

/// `(1+|i−j|)^{−θ}`.
pub fn decay_factor(i: &Cell, j: &Cell, theta: f64) -> f64 {
    (1.0 + lattice_distance(i, j)).powf(-theta)
}

/// `sup_i (1+|i−j|)^{−θ4} f*_i` and its maximizer, by brute force over the table.
///
/// Ties prefer `j` itself, then the lexicographically smallest index.
pub fn maximal_function(stars: &BTreeMap<Cell, f64>, j: &Cell, theta4: f64) -> (f64, Cell) {
    let mut best = (stars.get(j).copied().unwrap_or(0.0), *j);
    for (i, &s) in stars {
        let v = decay_factor(i, j, theta4) * s;
        if v > best.0 || (v == best.0 && best.1 != *j && i < &best.1) {
            best = (v, *i);
        }
    }
    best
}

/// One vertex of a horizontal graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphNode {
    pub star: f64,
    pub maximal: f64,
    /// `ĵ`; equal to the vertex itself when there is no incoming arrow.
    pub source: Cell,
    pub saturated: bool,
}

/// Arrows `ĵ → j` at one scale.
#[derive(Clone, Debug, Default)]
pub struct HorizontalGraph {
    pub k: usize,
    pub nodes: BTreeMap<Cell, GraphNode>,
}

/// Maximal functions for a whole table, pruned by visiting stars in decreasing order.
pub fn maximal_functions(stars: &BTreeMap<Cell, f64>, theta4: f64) -> BTreeMap<Cell, (f64, Cell)> {
    let mut order: Vec<(Cell, f64)> = stars.iter().map(|(c, s)| (*c, *s)).collect();
    order.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut out = BTreeMap::new();
    for (j, &sj) in stars {
        let mut best = (sj, *j);
        for (i, si) in &order {
            // (1+|i−j|)^{−θ} ≤ 1, so smaller stars cannot win
            if *si < best.0 {
                break;
            }
            let v = decay_factor(i, j, theta4) * si;
            if v > best.0 || (v == best.0 && best.1 != *j && i < &best.1) {
                best = (v, *i);
            }
        }
        out.insert(*j, best);
    }
    out
}

/// Builds `Γ̃_k`: every `j` points back to the maximizer `ĵ`, and `ĵ ≠ j` gives an arrow.
pub fn build_horizontal_graph(
    k: usize,
    stars: &BTreeMap<Cell, f64>,
    theta4: f64,
    ksat: f64,
) -> HorizontalGraph {
    let maximal = maximal_functions(stars, theta4);
    let nodes = stars
        .iter()
        .map(|(j, &star)| {
            let (m, src) = maximal[j];
            (
                *j,
                GraphNode {
                    star,
                    maximal: m,
                    source: src,
                    saturated: m <= ksat * star,
                },
            )
        })
        .collect();
    HorizontalGraph { k, nodes }
}

impl HorizontalGraph {
    /// `(source, target)` pairs.
    pub fn arrows(&self) -> impl Iterator<Item = (Cell, Cell)> + '_ {
        self.nodes
            .iter()
            .filter(|(j, n)| n.source != **j)
            .map(|(j, n)| (n.source, *j))
    }

    pub fn has_incoming(&self, j: &Cell) -> bool {
        self.nodes.get(j).is_some_and(|n| n.source != *j)
    }

    /// Number of oriented paths `i → ĵ → j`.
    pub fn length_two_paths(&self) -> usize {
        self.arrows()
            .filter(|(src, _)| self.has_incoming(src))
            .count()
    }

    /// Violated structural properties, as messages.
    pub fn violations(&self, lambda: f64, theta4: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (j, n) in &self.nodes {
            if n.maximal < n.star {
                out.push(format!("maximal below star at {j:?}"));
            }
            let src = &self.nodes.get(&n.source);
            match src {
                None => out.push(format!("source of {j:?} is outside the table")),
                Some(s) => {
                    if n.maximal > lambda * decay_factor(&n.source, j, theta4) * s.star {
                        out.push(format!(
                            "source of {j:?} is not within lambda of the maximum"
                        ));
                    }
                }
            }
            if n.source != *j {
                if !self.nodes[&n.source].saturated {
                    out.push(format!("arrow source {:?} is not saturated", n.source));
                }
            } else if !n.saturated {
                out.push(format!(
                    "vertex {j:?} has no incoming arrow but is not saturated"
                ));
            }
        }
        let paths = self.length_two_paths();
        if paths > 0 {
            out.push(format!("{paths} oriented paths of length two"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(vals: &[f64]) -> BTreeMap<Cell, f64> {
        vals.iter()
            .enumerate()
            .map(|(i, v)| ([i as i64, 0, 0], *v))
            .collect()
    }

    #[test]
    fn spike_points_everywhere() {
        let mut v = vec![0.0; 9];
        v[4] = 1.0;
        let g = build_horizontal_graph(0, &table(&v), 3.0, 2.0);
        assert_eq!(g.arrows().count(), 8);
        assert!(g.arrows().all(|(s, _)| s == [4, 0, 0]));
        let sat: Vec<bool> = g.nodes.values().map(|n| n.saturated).collect();
        assert_eq!(sat.iter().filter(|s| **s).count(), 1);
        assert!(g.violations(1.2, 3.0).is_empty());
    }

    #[test]
    fn constant_and_zero_tables_have_no_arrows() {
        for v in [vec![2.0; 7], vec![0.0; 7]] {
            let g = build_horizontal_graph(0, &table(&v), 3.0, 2.0);
            assert_eq!(g.arrows().count(), 0);
            assert!(g.nodes.values().all(|n| n.saturated && n.maximal == n.star));
        }
    }

    #[test]
    fn pruned_maximal_matches_brute_force() {
        let v = [0.3, 0.0, 5.0, 1.0, 1.0, 4.9, 0.2, 3.3];
        let t = table(&v);
        let fast = maximal_functions(&t, 2.5);
        for j in t.keys() {
            assert_eq!(fast[j], maximal_function(&t, j, 2.5));
        }
    }
}
