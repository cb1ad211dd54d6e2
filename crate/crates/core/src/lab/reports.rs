use std::collections::{BTreeMap, BTreeSet};

use super::fmt_f64;
use crate::error::Result;
use crate::field_grid::{pairwise_sum, Field};
use crate::heat_flow::HeatLadder;
use crate::norms::{distribution_steps, lorentz_from_steps, lorentz_norm, Domain};
use crate::weights_atoms::{cube_index, l1_norm, AtomTable, Cell, Flag, VerticalForest};

/// One row of a per-scale report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub k: usize,
    pub term: f64,
    pub partial_sum: f64,
    pub convex: usize,
    pub flat: usize,
    pub degenerate: usize,
    /// `partial_sum / ‖f‖_{L1}`, zero for the zero field.
    pub ratio: f64,
}

pub fn rows_csv(rows: &[ReportRow]) -> String {
    let mut s = String::from("experiment,k,term,partial_sum,convex,flat,degenerate,ratio\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.experiment,
            r.k,
            fmt_f64(r.term),
            fmt_f64(r.partial_sum),
            r.convex,
            r.flat,
            r.degenerate,
            fmt_f64(r.ratio)
        ));
    }
    s
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Terms `A^{−αk} ‖f_k‖_{L_{p,1}}` for `k = 0..=K` with running sums.
pub fn embedding_rows(ladder: &HeatLadder, p: f64) -> Result<Vec<ReportRow>> {
    let d = ladder.base().grid().d() as f64;
    let alpha = d * (p - 1.0) / p;
    let a = ladder.a() as f64;
    let l1 = l1_norm(ladder.base());
    let mut partial = 0.0;
    ladder
        .levels()
        .iter()
        .enumerate()
        .map(|(k, fk)| {
            let term = a.powf(-alpha * k as f64) * lorentz_norm(fk, p, 1.0, Domain::All)?;
            partial += term;
            Ok(ReportRow {
                experiment: "embedding".into(),
                k,
                term,
                partial_sum: partial,
                convex: 0,
                flat: 0,
                degenerate: 0,
                ratio: ratio(partial, l1),
            })
        })
        .collect()
}

/// Embedding partial sums of `f` through the ladder depth `params.k`.
pub fn embedding_report(
    f: &Field,
    params: &crate::weights_atoms::ProofParameters,
) -> Result<Vec<ReportRow>> {
    params.validate()?;
    let ladder = crate::heat_flow::build_ladder(f, params.a, params.k)?;
    embedding_rows(&ladder, params.p)
}

/// Per-node cube index at scale `A^k`.
fn node_cells(f: &Field, a: u32, k: usize) -> Vec<Cell> {
    let g = f.grid();
    let scale = (a as f64).powi(k as i32);
    (0..g.node_count())
        .map(|n| cube_index(scale, &g.coord(n)[..g.d()]))
        .collect()
}

/// `L_{p,1}` norm of `f` restricted to the nodes selected by `keep`.
fn lorentz_on(f: &Field, p: f64, keep: impl Fn(usize) -> bool) -> f64 {
    let cell = f.grid().cell();
    let mu: Vec<f64> = (0..f.grid().node_count())
        .map(|n| if keep(n) { cell } else { 0.0 })
        .collect();
    lorentz_from_steps(&distribution_steps(&f.magnitudes(), &mu), p, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexReport {
    pub rows: Vec<ReportRow>,
    /// Fraction of grid nodes covered by convex cubes, per level.
    pub coverage: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `Σ_k A^{−αk} ‖f_k‖_{L_{p,1}(∪ convex cubes)}` against `‖f‖_{L1}`.
pub fn convex_sum_report(ladder: &HeatLadder, table: &AtomTable) -> Result<ConvexReport> {
    let p = table.params.p;
    let alpha = table.params.alpha;
    let a = table.params.a;
    let mut rows = Vec::new();
    let mut coverage = Vec::new();
    let mut partial = 0.0;
    for lvl in &table.levels {
        let k = lvl.k;
        let fk = ladder.level(k)?;
        let convex: BTreeSet<Cell> = lvl
            .atoms
            .iter()
            .filter(|(_, at)| at.flag == Flag::Convex)
            .map(|(c, _)| *c)
            .collect();
        let cells = node_cells(fk, a, k);
        let inside: Vec<bool> = cells.iter().map(|c| convex.contains(c)).collect();
        let term = (a as f64).powf(-alpha * k as f64) * lorentz_on(fk, p, |n| inside[n]);
        partial += term;
        coverage.push(inside.iter().filter(|&&b| b).count() as f64 / inside.len() as f64);
        let degenerate = lvl.atoms.values().filter(|at| at.degenerate).count();
        rows.push(ReportRow {
            experiment: "convex".into(),
            k,
            term,
            partial_sum: partial,
            convex: convex.len(),
            flat: lvl.atoms.len() - convex.len() - degenerate,
            degenerate,
            ratio: ratio(partial, table.l1),
        });
    }
    Ok(ConvexReport {
        rows,
        coverage,
        lhs: partial,
        rhs: table.l1,
        ratio: ratio(partial, table.l1),
    })
}

/// Where a tree's telescoping budget comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Charge {
    /// The difference term of an atom one level up.
    Atom(usize, Cell),
    /// `‖f_2‖_{L1}`, shared by all trees rooted at level 0.
    Level0,
    /// Neither the parent nor its horizontal source is convex.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeRow {
    pub root: (usize, Cell),
    pub size: usize,
    /// `A^{−αk} ‖f_k‖_{L_{p,1}(∪ member cubes)}` from the root level down.
    pub depth_mass: Vec<f64>,
    pub charge: Charge,
    pub budget: f64,
    pub ratio: f64,
    /// Mean ratio of consecutive depth masses, when the tree has at least two levels.
    pub decay_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeReport {
    pub trees: Vec<TreeRow>,
    /// Sum of distinct charged budgets.
    pub total_budget: f64,
    pub bound: f64,
    pub degenerate_charges: usize,
}

impl TreeReport {
    pub fn within_bound(&self, rel: f64) -> bool {
        self.total_budget <= self.bound * (1.0 + rel)
    }
}

pub fn tree_budget_report(
    ladder: &HeatLadder,
    table: &AtomTable,
    forest: &VerticalForest,
) -> Result<TreeReport> {
    let p = table.params.p;
    let alpha = table.params.alpha;
    let a = table.params.a;
    let ntrees = forest.roots.len();
    let mut depth_mass: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ntrees];
    let mut sizes = vec![0usize; ntrees];
    for q in forest.tree_of.values() {
        sizes[*q] += 1;
    }
    for lvl in &table.levels {
        let k = lvl.k;
        if !forest.tree_of.keys().any(|(kk, _)| *kk == k) {
            continue;
        }
        let fk = ladder.level(k)?;
        let mags = fk.magnitudes();
        let cell = fk.grid().cell();
        let mut per_tree: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (n, c) in node_cells(fk, a, k).iter().enumerate() {
            if let Some(q) = forest.tree_of.get(&(k, *c)) {
                let e = per_tree.entry(*q).or_default();
                e.0.push(mags[n]);
                e.1.push(cell);
            }
        }
        let factor = (a as f64).powf(-alpha * k as f64);
        for (q, (m, w)) in per_tree {
            depth_mass[q].insert(
                k,
                factor * lorentz_from_steps(&distribution_steps(&m, &w), p, 1.0),
            );
        }
    }
    let f2 = l1_norm(ladder.level(2)?);
    let mut charged: BTreeSet<(usize, Cell)> = BTreeSet::new();
    let mut level0 = false;
    let mut degenerate_charges = 0;
    let mut trees = Vec::with_capacity(ntrees);
    for (q, root) in forest.roots.iter().enumerate() {
        let (k, j) = *root;
        let charge = if k == 0 {
            level0 = true;
            Charge::Level0
        } else {
            let pc = crate::weights_atoms::parent_cell(a, &j);
            let convex = |c: &Cell| {
                table
                    .atom(k - 1, c)
                    .is_some_and(|at| at.flag == Flag::Convex)
            };
            if convex(&pc) {
                Charge::Atom(k - 1, pc)
            } else {
                match table.levels[k - 1].graph.nodes.get(&pc) {
                    Some(n) if convex(&n.source) => Charge::Atom(k - 1, n.source),
                    _ => Charge::Degenerate,
                }
            }
        };
        let budget = match charge {
            Charge::Atom(kk, c) => {
                charged.insert((kk, c));
                table.atom(kk, &c).map_or(0.0, |at| at.diff.max(0.0))
            }
            Charge::Level0 => f2,
            Charge::Degenerate => {
                degenerate_charges += 1;
                0.0
            }
        };
        let masses: Vec<f64> = depth_mass[q].values().copied().collect();
        let total: f64 = pairwise_sum(&masses);
        let rates: Vec<f64> = masses
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > 0.0)
            .map(|w| (w[1] / w[0]).ln())
            .collect();
        let decay_rate =
            (!rates.is_empty()).then(|| (rates.iter().sum::<f64>() / rates.len() as f64).exp());
        trees.push(TreeRow {
            root: *root,
            size: sizes[q],
            depth_mass: masses,
            charge,
            budget,
            ratio: ratio(total, budget),
            decay_rate,
        });
    }
    let mut pieces: Vec<f64> = charged
        .iter()
        .map(|(k, c)| table.atom(*k, c).map_or(0.0, |at| at.diff.max(0.0)))
        .collect();
    if level0 {
        pieces.push(f2);
    }
    Ok(TreeReport {
        trees,
        total_budget: pairwise_sum(&pieces),
        bound: 3.0 * table.l1,
        degenerate_charges,
    })
}

pub fn trees_csv(report: &TreeReport, d: usize) -> String {
    let join = |c: &Cell| {
        c[..d]
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::from("tree,root_k,root_j,size,charge,budget,total_mass,ratio,decay_rate\n");
    for (q, t) in report.trees.iter().enumerate() {
        let charge = match t.charge {
            Charge::Atom(k, c) => format!("atom {k} {}", join(&c)),
            Charge::Level0 => "level0".into(),
            Charge::Degenerate => "degenerate".into(),
        };
        s.push_str(&format!(
            "{q},{},{},{},{charge},{},{},{},{}\n",
            t.root.0,
            join(&t.root.1),
            t.size,
            fmt_f64(t.budget),
            fmt_f64(pairwise_sum(&t.depth_mass)),
            fmt_f64(t.ratio),
            t.decay_rate.map(fmt_f64).unwrap_or_default()
        ));
    }
    s
}

/// Every atom is accounted for exactly once: convex, a member of one tree, or flat-degenerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionAudit {
    pub atoms: usize,
    pub convex: usize,
    pub in_trees: usize,
    pub degenerate: usize,
}

impl PartitionAudit {
    pub fn balanced(&self) -> bool {
        self.convex + self.in_trees + self.degenerate == self.atoms
    }
}

pub fn partition_audit(table: &AtomTable, forest: &VerticalForest) -> PartitionAudit {
    let mut audit = PartitionAudit {
        atoms: 0,
        convex: 0,
        in_trees: 0,
        degenerate: 0,
    };
    for lvl in &table.levels {
        for (j, at) in &lvl.atoms {
            audit.atoms += 1;
            let in_tree = forest.tree_of.contains_key(&(lvl.k, *j));
            match (at.flag, at.degenerate, in_tree) {
                (Flag::Convex, false, false) => audit.convex += 1,
                (Flag::Flat, false, true) => audit.in_trees += 1,
                (Flag::Flat, true, false) => audit.degenerate += 1,
                // double-counted or lost atoms leave the tallies unbalanced
                _ => {}
            }
        }
    }
    audit
}
