use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::graph::{build_horizontal_graph, Cell, HorizontalGraph};
use super::params::ProofParameters;
use super::weight::LatticeWeight;
use crate::error::{invalid, Error, Result};
use crate::field_grid::{pairwise_sum, Field, GridSpec};
use crate::heat_flow::{heat_extend, HeatLadder};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flag {
    Flat,
    Convex,
}

/// Statistics of one atom `(k, j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    /// `f*_{k,j} = ‖f_{k+2}‖_{L1(Heat[w_{k,j}](A^{-2k} − A^{-2k-4}))}`.
    pub star: f64,
    /// `‖f_{k+3}‖_{L1(Heat[w_{k,j}](A^{-2k} − A^{-2k-6}))}`.
    pub reference: f64,
    /// `‖f_k‖_{L1(w_{k,j})}`.
    pub base_mass: f64,
    /// `reference − base_mass`, summed pointwise.
    pub diff: f64,
    pub flag: Flag,
    /// Reference mass below `1e-12·‖f‖_{L1}`; classified flat and excluded from graphs of flat atoms.
    pub degenerate: bool,
}

/// All atoms of one scale with their horizontal graph.
#[derive(Clone, Debug)]
pub struct LevelTable {
    pub k: usize,
    pub atoms: BTreeMap<Cell, Atom>,
    pub graph: HorizontalGraph,
}

/// Atom tables for `k = 0..=K−3`.
#[derive(Clone, Debug)]
pub struct AtomTable {
    pub params: ProofParameters,
    pub levels: Vec<LevelTable>,
    /// `‖f‖_{L1}` of the ladder base.
    pub l1: f64,
    /// Lattice window margin used for every level.
    pub window: f64,
}

pub fn l1_norm(f: &Field) -> f64 {
    f.grid().cell() * pairwise_sum(&f.magnitudes())
}

fn magnitude_field(f: &Field) -> Field {
    Field::new(f.grid().clone(), 1, f.magnitudes()).expect("magnitudes of a valid field")
}

/// Index box of the atoms whose weights reach the grid box at scale `k`.
fn window_bounds(grid: &GridSpec, scale: f64, margin: f64) -> (i64, i64) {
    let reach = scale * grid.l();
    (
        (-reach - margin).floor() as i64,
        (reach + margin).ceil() as i64,
    )
}

/// Round-to-nearest cube index, `A^k x ∈ j + [−1/2, 1/2)^d`.
pub fn cube_index(scale: f64, x: &[f64]) -> Cell {
    let mut c = [0i64; 3];
    for (a, v) in x.iter().enumerate() {
        c[a] = (scale * v + 0.5).floor() as i64;
    }
    c
}

/// Parent of `j'` one scale up: the cube `Q_{k,j}` containing `Q_{k+1,j'}` for odd `A`.
pub fn parent_cell(a: u32, j: &Cell) -> Cell {
    let a = a as i64;
    let half = (a - 1) / 2;
    [
        (j[0] + half).div_euclid(a),
        (j[1] + half).div_euclid(a),
        (j[2] + half).div_euclid(a),
    ]
}

/// Checks that atom scales `A^{-k}`, `k ≤ K−3`, stay at least two grid steps wide.
pub fn check_atom_resolution(grid: &GridSpec, a: u32, k_max: usize) -> Result<()> {
    let finest = (a as f64).powi(-(k_max as i32));
    if finest < 2.0 * grid.h() {
        return Err(Error::Resolution {
            what: "atom scale",
            detail: format!("A^-{k_max} = {finest:e} is below 2h = {:e}", 2.0 * grid.h()),
        });
    }
    Ok(())
}

/// Per-node scatter of weighted sums `Σ_x g_c(x) w(A^k x − j) h^d` into a dense window.
struct Scatter<'a> {
    grid: &'a GridSpec,
    lw: &'a LatticeWeight,
    scale: f64,
    lo: i64,
    span: usize,
    radius: i64,
}

impl Scatter<'_> {
    fn accumulate(&self, sources: &[&[f64]]) -> Vec<Vec<f64>> {
        let d = self.grid.d();
        let cells = self.span.pow(d as u32);
        let nodes = self.grid.node_count();
        let chunks = 16usize;
        let per = nodes.div_ceil(chunks);
        let partial: Vec<Vec<Vec<f64>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = vec![vec![0.0; cells]; sources.len()];
                let mut y = [0.0; 3];
                for node in c * per..((c + 1) * per).min(nodes) {
                    if sources.iter().all(|s| s[node] == 0.0) {
                        continue;
                    }
                    let x = self.grid.coord(node);
                    for a in 0..d {
                        y[a] = self.scale * x[a];
                    }
                    let s = self.lw.lattice_sum(&y[..d]);
                    let base: Vec<i64> = (0..d).map(|a| y[a].round() as i64).collect();
                    let side = (2 * self.radius + 1) as usize;
                    let mut off = [0.0; 3];
                    for code in 0..side.pow(d as u32) {
                        let mut rest = code;
                        let mut slot = 0usize;
                        let mut inside = true;
                        for a in 0..d {
                            let j = base[a] - self.radius + (rest % side) as i64;
                            rest /= side;
                            off[a] = y[a] - j as f64;
                            let rel = j - self.lo;
                            if rel < 0 || rel as usize >= self.span {
                                inside = false;
                                break;
                            }
                            slot = slot * self.span + rel as usize;
                        }
                        if !inside {
                            continue;
                        }
                        let w = self.lw.numerator(&off[..d]) / s;
                        for (acc_c, src) in acc.iter_mut().zip(sources) {
                            acc_c[slot] += src[node] * w;
                        }
                    }
                }
                acc
            })
            .collect();
        let cell = self.grid.cell();
        let mut total = vec![vec![0.0; cells]; sources.len()];
        for part in partial {
            for (t, p) in total.iter_mut().zip(part) {
                for (a, b) in t.iter_mut().zip(p) {
                    *a += b;
                }
            }
        }
        for t in &mut total {
            t.iter_mut().for_each(|v| *v *= cell);
        }
        total
    }

    fn cell_of(&self, slot: usize) -> Cell {
        let d = self.grid.d();
        let mut c = [0i64; 3];
        let mut rest = slot;
        for a in (0..d).rev() {
            c[a] = self.lo + (rest % self.span) as i64;
            rest /= self.span;
        }
        c
    }
}

/// Builds atom statistics and horizontal graphs for `k = 0..=K−3`.
///
/// Heated-weight norms use self-adjointness of the heat flow on the grid:
/// `‖g‖_{L1(Heat[w](s))} = ∫ Heat[|g|](s) w`, with the same spectral flow that built the ladder.
pub fn build_atom_table(ladder: &HeatLadder, params: &ProofParameters) -> Result<AtomTable> {
    params.validate()?;
    if ladder.a() != params.a {
        return invalid("ladder base A differs from the parameter set");
    }
    let depth = ladder.depth();
    if depth < 3 {
        return Err(Error::LadderDepth {
            need: 3,
            have: depth,
        });
    }
    let grid = ladder.base().grid().clone();
    if grid.d() != params.d {
        return invalid("parameter dimension differs from the grid");
    }
    let k_max = depth - 3;
    check_atom_resolution(&grid, params.a, k_max)?;
    let lw = LatticeWeight::shared(params.theta[0], params.d)?;
    let window = params.window();
    let radius = window.ceil() as i64;
    let l1 = l1_norm(ladder.base());
    let a = params.a as f64;
    let mut levels = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let t = ladder.time(k);
        let h4 = heat_extend(
            &magnitude_field(ladder.level(k + 2)?),
            t - ladder.time(k + 2),
        )?;
        let h6 = heat_extend(
            &magnitude_field(ladder.level(k + 3)?),
            t - ladder.time(k + 3),
        )?;
        let base = magnitude_field(ladder.level(k)?);
        let diff: Vec<f64> = h6
            .data()
            .iter()
            .zip(base.data())
            .map(|(x, y)| x - y)
            .collect();
        let scale = a.powi(k as i32);
        let (lo, hi) = window_bounds(&grid, scale, window);
        let sc = Scatter {
            grid: &grid,
            lw: &lw,
            scale,
            lo,
            span: (hi - lo + 1) as usize,
            radius,
        };
        let sums = sc.accumulate(&[h4.data(), h6.data(), base.data(), &diff]);
        let mut atoms = BTreeMap::new();
        for slot in 0..sums[0].len() {
            let reference = sums[1][slot];
            let diff = sums[3][slot];
            let degenerate = !(reference > 1e-12 * l1);
            let flag = if !degenerate && diff >= params.epsilon * reference {
                Flag::Convex
            } else {
                Flag::Flat
            };
            atoms.insert(
                sc.cell_of(slot),
                Atom {
                    star: sums[0][slot],
                    reference,
                    base_mass: sums[2][slot],
                    diff,
                    flag,
                    degenerate,
                },
            );
        }
        let stars: BTreeMap<Cell, f64> = atoms.iter().map(|(c, at)| (*c, at.star)).collect();
        let graph = build_horizontal_graph(k, &stars, params.theta[3], params.ksat);
        levels.push(LevelTable { k, atoms, graph });
    }
    Ok(AtomTable {
        params: params.clone(),
        levels,
        l1,
        window,
    })
}

impl AtomTable {
    pub fn atom(&self, k: usize, j: &Cell) -> Option<&Atom> {
        self.levels.get(k).and_then(|l| l.atoms.get(j))
    }

    /// `Σ_{k,j} diff_{k,j}⁺`, the telescoping budget actually used.
    pub fn telescoping_sum(&self) -> f64 {
        let v: Vec<f64> = self
            .levels
            .iter()
            .flat_map(|l| l.atoms.values().map(|a| a.diff.max(0.0)))
            .collect();
        pairwise_sum(&v)
    }

    /// Most negative per-atom difference (should be rounding noise).
    pub fn min_diff(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.atoms.values().map(|a| a.diff))
            .fold(0.0, f64::min)
    }

    pub fn is_vertex(&self, k: usize, j: &Cell) -> bool {
        self.atom(k, j)
            .is_some_and(|a| a.flag == Flag::Flat && !a.degenerate)
    }

    fn saturated(&self, k: usize, j: &Cell) -> bool {
        self.levels[k]
            .graph
            .nodes
            .get(j)
            .is_some_and(|n| n.saturated)
    }

    /// Export rows `k, j, star, flag, maximal, saturated, h_arrow_src, v_arrow_dst`.
    pub fn to_csv(&self, forest: Option<&VerticalForest>) -> String {
        let fmt = crate::lab::fmt_f64;
        let d = self.params.d;
        let join = |c: &Cell| {
            c[..d]
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut kids: BTreeMap<(usize, Cell), Vec<(usize, Cell)>> = BTreeMap::new();
        if let Some(f) = forest {
            for (child, parent) in &f.parent {
                kids.entry(*parent).or_default().push(*child);
            }
        }
        let mut s = String::from("k,j,star,flag,maximal,saturated,h_arrow_src,v_arrow_dst\n");
        for l in &self.levels {
            for (j, at) in &l.atoms {
                let node = &l.graph.nodes[j];
                let flag = match (at.flag, at.degenerate) {
                    (_, true) => "flat-degenerate",
                    (Flag::Flat, _) => "flat",
                    (Flag::Convex, _) => "convex",
                };
                let src = if node.source != *j {
                    join(&node.source)
                } else {
                    String::new()
                };
                let dst = kids
                    .get(&(l.k, *j))
                    .map(|v| v.iter().map(|(_, c)| join(c)).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default();
                s.push_str(&format!(
                    "{},\"{}\",{},{},{},{},\"{}\",\"{}\"\n",
                    l.k,
                    join(j),
                    fmt(at.star),
                    flag,
                    fmt(node.maximal),
                    node.saturated,
                    src,
                    dst
                ));
            }
        }
        s
    }
}

/// Downward subordination among flat atoms.
#[derive(Clone, Debug, Default)]
pub struct VerticalForest {
    /// child → parent.
    pub parent: BTreeMap<(usize, Cell), (usize, Cell)>,
    pub vertices: BTreeSet<(usize, Cell)>,
    pub roots: Vec<(usize, Cell)>,
    /// Tree number of every vertex (index into `roots`).
    pub tree_of: BTreeMap<(usize, Cell), usize>,
}

/// Arrow `(k, j) → (k+1, j')` when `(k, j)` is saturated and `Q_{k+1,j'}` lies in `Q_{k,j}`, or
/// lies in a non-saturated `Q_{k,i}` with `j → i` horizontally. Both ends must be flat atoms.
pub fn build_vertical_forest(table: &AtomTable) -> VerticalForest {
    let a = table.params.a;
    let mut forest = VerticalForest::default();
    for l in &table.levels {
        for j in l.atoms.keys() {
            if table.is_vertex(l.k, j) {
                forest.vertices.insert((l.k, *j));
            }
        }
    }
    for &(k1, jp) in &forest.vertices {
        if k1 == 0 {
            continue;
        }
        let k = k1 - 1;
        let p = parent_cell(a, &jp);
        let Some(pnode) = table.levels[k].graph.nodes.get(&p) else {
            continue;
        };
        let src = if pnode.saturated {
            Some(p)
        } else if pnode.source != p {
            Some(pnode.source)
        } else {
            None
        };
        if let Some(s) = src {
            if table.is_vertex(k, &s) && table.saturated(k, &s) {
                forest.parent.insert((k1, jp), (k, s));
            }
        }
    }
    forest.roots = forest
        .vertices
        .iter()
        .filter(|v| !forest.parent.contains_key(v))
        .copied()
        .collect();
    let mut kids: BTreeMap<(usize, Cell), Vec<(usize, Cell)>> = BTreeMap::new();
    for (c, p) in &forest.parent {
        kids.entry(*p).or_default().push(*c);
    }
    for (q, root) in forest.roots.iter().enumerate() {
        let mut stack = vec![*root];
        while let Some(v) = stack.pop() {
            forest.tree_of.insert(v, q);
            if let Some(ch) = kids.get(&v) {
                stack.extend(ch.iter().copied());
            }
        }
    }
    forest
}

impl VerticalForest {
    pub fn children(&self, v: &(usize, Cell)) -> Vec<(usize, Cell)> {
        self.parent
            .iter()
            .filter(|(_, p)| *p == v)
            .map(|(c, _)| *c)
            .collect()
    }

    /// Members of tree `q` at level `k`.
    pub fn members_at(&self, q: usize, k: usize) -> Vec<Cell> {
        self.tree_of
            .iter()
            .filter(|((kk, _), t)| *kk == k && **t == q)
            .map(|((_, c), _)| *c)
            .collect()
    }

    /// Violated structural properties, as messages.
    pub fn violations(&self, table: &AtomTable) -> Vec<String> {
        let mut out = Vec::new();
        for (c, p) in &self.parent {
            if p.0 + 1 != c.0 {
                out.push(format!("arrow {p:?} -> {c:?} does not descend one level"));
            }
            if !table.saturated(p.0, &p.1) {
                out.push(format!("arrow source {p:?} is not saturated"));
            }
            if !table.is_vertex(p.0, &p.1) || !table.is_vertex(c.0, &c.1) {
                out.push(format!("arrow {p:?} -> {c:?} touches a non-flat atom"));
            }
        }
        if self.tree_of.len() != self.vertices.len() {
            out.push("some vertices are not reachable from a root".into());
        }
        out
    }
}

/// `(ratio, passes)` for `‖f_{k+2}‖_{L1(u_{k,j})} ≤ C f*_{k,j}` with `u = (1+|·|)^{−θ2}`.
/// Zero data gives `(0, true)`.
pub fn concentration_check(
    ladder: &HeatLadder,
    table: &AtomTable,
    k: usize,
    j: &Cell,
    c: f64,
) -> Result<(f64, bool)> {
    let f2 = ladder.level(k + 2)?;
    let g = f2.grid();
    let theta2 = table.params.theta[1];
    let scale = (table.params.a as f64).powi(k as i32);
    let d = g.d();
    let terms: Vec<f64> = (0..g.node_count())
        .map(|node| {
            let x = g.coord(node);
            let r2: f64 = (0..d).map(|a| (scale * x[a] - j[a] as f64).powi(2)).sum();
            f2.magnitude_at(node) * (1.0 + r2.sqrt()).powf(-theta2)
        })
        .collect();
    let num = g.cell() * pairwise_sum(&terms);
    let star = table.atom(k, j).map(|a| a.star).unwrap_or(0.0);
    if num == 0.0 {
        return Ok((0.0, true));
    }
    let ratio = num / star;
    Ok((ratio, ratio <= c))
}

/// The constant `2 s[u](√d) s[w](√d) / w̃(0) · Σ_i (1+|i|)^{θ4−θ2}` that saturated atoms satisfy.
pub fn saturated_concentration_constant(params: &ProofParameters) -> Result<f64> {
    let d = params.d;
    let df = d as f64;
    let [t1, t2, _, t4, _] = params.theta;
    let lw = LatticeWeight::shared(t1, d)?;
    let (cw, ccw) = lw.bounds();
    let su = (1.0 + df.sqrt()).powf(t2);
    let sw = ccw / cw * (1.0 + df.sqrt()).powf(t1);
    let a4 = (params.a as f64).powi(-4);
    let w = super::ParametricWeight::LatticeNormalized(lw);
    let w0 = crate::heat_flow::heated_value(&w, 1.0 - a4, &vec![0.0; d]);
    let lattice = LatticeWeight::shared(t2 - t4, d)?.lattice_sum(&vec![0.0; d]);
    Ok(2.0 * su * sw / w0 * lattice)
}
