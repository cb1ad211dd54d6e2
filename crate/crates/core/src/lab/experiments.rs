use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ConfigFile;
use super::output::{blob_hash, Artifacts};
use super::reports::{
    convex_sum_report, embedding_rows, partition_audit, rows_csv, tree_budget_report, trees_csv,
    ReportRow,
};
use crate::error::{Error, Result};
use crate::field_grid::{
    gen_divfree_field, gen_gaussian, gen_gradient_field, gen_near_delta, Bump, Field, GridSpec,
    NearDelta, PointMeasure,
};
use crate::heat_flow::{
    build_ladder, evaluation_lattice, heat_weight, semigroup_defect, SemigroupOutcome,
};
use crate::monotonicity::{
    bct_csv, bct_identity_defect, monotonicity_scan, qp, BctCheck, Terminal,
};
use crate::norms::{lorentz_norm, Domain};
use crate::spectral::{cancellation_defect, sphere_samples, SymbolMap};
use crate::weights_atoms::{
    build_atom_table, build_vertical_forest, partition_deviation, ParametricWeight, ProofParameters,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Verify,
    Qp,
    Atoms,
    Embed,
    Gen,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Verify => "verify",
            Experiment::Qp => "qp",
            Experiment::Atoms => "atoms",
            Experiment::Embed => "embed",
            Experiment::Gen => "gen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Experiment::Verify,
            Experiment::Qp,
            Experiment::Atoms,
            Experiment::Embed,
            Experiment::Gen,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }
}

/// Field source of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum InputSpec {
    Gaussian(Bump),
    Gradient(Bump),
    DivFree(Bump),
    NearDelta(NearDelta),
    Zero { ell: usize },
    File(PathBuf),
}

impl InputSpec {
    pub fn field(&self, grid: &GridSpec) -> Result<Field> {
        match self {
            InputSpec::Gaussian(b) => gen_gaussian(grid, b),
            InputSpec::Gradient(b) => gen_gradient_field(grid, b),
            InputSpec::DivFree(b) => gen_divfree_field(grid, b),
            InputSpec::NearDelta(n) => gen_near_delta(grid, n),
            InputSpec::Zero { ell } => Ok(Field::zeros(grid, *ell)),
            InputSpec::File(p) => {
                let f = Field::read_bin(p)?;
                if f.grid() != grid {
                    return Err(Error::Format {
                        path: p.clone(),
                        msg: "grid differs from the [grid] section".into(),
                    });
                }
                Ok(f)
            }
        }
    }
}

/// Settings of the randomized derivative-identity suite.
#[derive(Clone, Debug, PartialEq)]
pub struct QpSpec {
    pub dims: Vec<usize>,
    pub p: Vec<f64>,
    pub instances: usize,
    pub atoms_max: usize,
    pub spread: f64,
    pub t_range: (f64, f64),
    pub h: f64,
    /// Terminal weight decay; `None` means the flat weight.
    pub theta: Option<f64>,
    pub scan: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMode {
    Report,
    Divergent,
    Bounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedSpec {
    pub k_min: usize,
    pub k_max: usize,
    pub mode: EmbedMode,
    pub atoms: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub bct: f64,
    pub growth: f64,
    pub bounded_factor: f64,
    pub budget: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            bct: 1e-3,
            growth: 0.8,
            bounded_factor: 2.0,
            budget: 1e-6,
        }
    }
}

/// A parsed experiment configuration.
#[derive(Clone, Debug)]
pub struct LabConfig {
    pub experiment: Option<Experiment>,
    pub name: String,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub params: Option<ProofParameters>,
    pub input: Option<InputSpec>,
    pub qp: Option<QpSpec>,
    pub embed: Option<EmbedSpec>,
    pub tolerances: Tolerances,
    pub out: Option<PathBuf>,
    pub source: ConfigFile,
}

fn bump(c: &ConfigFile, d: usize) -> Result<Bump> {
    let center = c.list("input", "center")?.unwrap_or(vec![0.0; d]);
    if center.len() != d {
        return Err(c.error("input", "center", format!("expected {d} coordinates")));
    }
    Ok(Bump {
        center,
        width: c.require("input", "width")?,
        amplitude: c.or("input", "amplitude", 1.0)?,
    })
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(ConfigFile::read(path)?)
    }

    pub fn from_file(c: ConfigFile) -> Result<Self> {
        let known = [
            "experiment",
            "grid",
            "params",
            "input",
            "qp",
            "embed",
            "tolerances",
            "output",
        ];
        for s in c.section_names() {
            if !known.contains(&s) {
                let line = c
                    .text
                    .lines()
                    .position(|l| l.trim() == format!("[{s}]"))
                    .map_or(1, |i| i + 1);
                return Err(Error::Config {
                    path: c.path.clone(),
                    line,
                    msg: format!("unknown section [{s}]"),
                });
            }
        }
        c.check_keys("experiment", &["kind", "name", "seed"])?;
        c.check_keys("grid", &["d", "n", "l"])?;
        c.check_keys(
            "params",
            &[
                "a",
                "p",
                "k",
                "epsilon",
                "ksat",
                "lambda",
                "theta",
                "window_radius",
            ],
        )?;
        c.check_keys(
            "input",
            &[
                "generator",
                "width",
                "amplitude",
                "center",
                "sigma",
                "direction",
                "ell",
                "path",
            ],
        )?;
        c.check_keys(
            "qp",
            &[
                "dims",
                "p",
                "instances",
                "atoms_max",
                "spread",
                "t_range",
                "h",
                "theta",
                "scan",
            ],
        )?;
        c.check_keys("embed", &["k_min", "k_max", "mode", "atoms"])?;
        c.check_keys("tolerances", &["bct", "growth", "bounded_factor", "budget"])?;
        c.check_keys("output", &["dir"])?;

        let experiment = match c.get::<String>("experiment", "kind")? {
            None => None,
            Some(k) => Some(
                Experiment::parse(&k)
                    .ok_or_else(|| c.error("experiment", "kind", "unknown experiment"))?,
            ),
        };
        let grid = if c.has_section("grid") {
            let d: usize = c.require("grid", "d")?;
            Some(
                GridSpec::new(d, c.require("grid", "n")?, c.require("grid", "l")?)
                    .map_err(|e| c.error("grid", "n", e.to_string()))?,
            )
        } else {
            None
        };
        let params = if c.has_section("params") {
            let d = grid
                .as_ref()
                .map(|g| g.d())
                .ok_or_else(|| c.error("grid", "d", "[params] needs a [grid]"))?;
            let mut p = ProofParameters::new(
                d,
                c.require("params", "a")?,
                c.require("params", "p")?,
                c.require("params", "k")?,
            )
            .map_err(|e| c.error("params", "a", e.to_string()))?;
            p.epsilon = c.or("params", "epsilon", p.epsilon)?;
            p.ksat = c.or("params", "ksat", p.ksat)?;
            if let Some(th) = c.list::<f64>("params", "theta")? {
                p.theta = th
                    .try_into()
                    .map_err(|_| c.error("params", "theta", "expected five exponents"))?;
                p.lambda = crate::weights_atoms::default_lambda(p.theta[3]);
            }
            p.lambda = c.or("params", "lambda", p.lambda)?;
            p.window_radius = c.get("params", "window_radius")?;
            p.validate()
                .map_err(|e| c.error("params", "theta", e.to_string()))?;
            Some(p)
        } else {
            None
        };
        let input = if c.has_section("input") {
            let d = grid
                .as_ref()
                .map(|g| g.d())
                .ok_or_else(|| c.error("grid", "d", "[input] needs a [grid]"))?;
            let kind: String = c.require("input", "generator")?;
            Some(match kind.as_str() {
                "gaussian" => InputSpec::Gaussian(bump(&c, d)?),
                "gradient" => InputSpec::Gradient(bump(&c, d)?),
                "divfree" => InputSpec::DivFree(bump(&c, d)?),
                "near_delta" => InputSpec::NearDelta(NearDelta {
                    sigma: c.require("input", "sigma")?,
                    direction: c.list("input", "direction")?.unwrap_or(vec![1.0]),
                    center: c.list("input", "center")?.unwrap_or(vec![0.0; d]),
                }),
                "zero" => InputSpec::Zero {
                    ell: c.or("input", "ell", 1)?,
                },
                "file" => InputSpec::File(c.require::<String>("input", "path")?.into()),
                _ => {
                    return Err(c.error(
                        "input",
                        "generator",
                        format!("unknown generator `{kind}`"),
                    ))
                }
            })
        } else {
            None
        };
        let qp = if c.has_section("qp") {
            let t_range: Vec<f64> = c.list("qp", "t_range")?.unwrap_or(vec![0.2, 0.8]);
            if t_range.len() != 2
                || !(0.0 < t_range[0] && t_range[0] <= t_range[1] && t_range[1] < 1.0)
            {
                return Err(c.error("qp", "t_range", "expected `lo, hi` inside (0, 1)"));
            }
            let spec = QpSpec {
                dims: c.list("qp", "dims")?.unwrap_or(vec![1, 2]),
                p: c.list("qp", "p")?.unwrap_or(vec![1.25, 1.5, 2.0]),
                instances: c.or("qp", "instances", 100)?,
                atoms_max: c.or("qp", "atoms_max", 8)?,
                spread: c.or("qp", "spread", 2.0)?,
                t_range: (t_range[0], t_range[1]),
                h: c.or("qp", "h", 1e-4)?,
                theta: c.get("qp", "theta")?,
                scan: c
                    .list("qp", "scan")?
                    .unwrap_or((1..=10).map(|i| i as f64 / 10.0).collect()),
            };
            if spec.dims.iter().any(|d| !(1..=3).contains(d)) {
                return Err(c.error("qp", "dims", "dimensions must lie in 1..3"));
            }
            if spec.p.iter().any(|p| !(*p > 1.0)) {
                return Err(c.error("qp", "p", "exponents must exceed 1"));
            }
            if spec.atoms_max == 0 {
                return Err(c.error("qp", "atoms_max", "must be positive"));
            }
            Some(spec)
        } else {
            None
        };
        let embed = if c.has_section("embed") {
            let default_k = params.as_ref().map_or(5, |p| p.k);
            let mode = match c.or("embed", "mode", "report".to_string())?.as_str() {
                "report" => EmbedMode::Report,
                "divergent" => EmbedMode::Divergent,
                "bounded" => EmbedMode::Bounded,
                other => return Err(c.error("embed", "mode", format!("unknown mode `{other}`"))),
            };
            let spec = EmbedSpec {
                k_min: c.or("embed", "k_min", 2)?,
                k_max: c.or("embed", "k_max", default_k)?,
                mode,
                atoms: c.or("embed", "atoms", false)?,
            };
            if spec.k_min == 0 || spec.k_min > spec.k_max {
                return Err(c.error("embed", "k_min", "need 1 ≤ k_min ≤ k_max"));
            }
            Some(spec)
        } else {
            None
        };
        let d = Tolerances::default();
        let tolerances = Tolerances {
            bct: c.or("tolerances", "bct", d.bct)?,
            growth: c.or("tolerances", "growth", d.growth)?,
            bounded_factor: c.or("tolerances", "bounded_factor", d.bounded_factor)?,
            budget: c.or("tolerances", "budget", d.budget)?,
        };
        for (k, v) in [
            ("bct", tolerances.bct),
            ("growth", tolerances.growth),
            ("bounded_factor", tolerances.bounded_factor),
            ("budget", tolerances.budget),
        ] {
            if !(v > 0.0) {
                return Err(c.error("tolerances", k, "must be positive"));
            }
        }
        Ok(Self {
            experiment,
            name: c.or("experiment", "name", "experiment".to_string())?,
            seed: c.or("experiment", "seed", 0)?,
            grid,
            params,
            input,
            qp,
            embed,
            tolerances,
            out: c.get::<String>("output", "dir")?.map(PathBuf::from),
            source: c,
        })
    }

    fn need<'a, T>(&self, v: &'a Option<T>, section: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::Config {
            path: self.source.path.clone(),
            line: 1,
            msg: format!("this experiment needs a [{section}] section"),
        })
    }
}

/// One asserted invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Result of a run: asserted checks and written files.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn random_measure(
    rng: &mut ChaCha8Rng,
    d: usize,
    atoms: usize,
    spread: f64,
) -> Result<PointMeasure> {
    let list: Vec<(Vec<f64>, f64)> = (0..atoms)
        .map(|_| {
            (
                (0..d).map(|_| rng.gen_range(-spread..spread)).collect(),
                rng.gen_range(0.1..1.0),
            )
        })
        .collect();
    PointMeasure::new(d, &list)
}

fn run_qp(cfg: &LabConfig, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let spec = cfg.need(&cfg.qp, "qp")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<BctCheck> = Vec::new();
    let mut meta = String::from("instance,d,p,atoms\n");
    let mut scans = String::from("instance,t,Qp\n");
    let (mut worst, mut scans_ok) = (0.0f64, true);
    for i in 0..spec.instances {
        let d = spec.dims[rng.gen_range(0..spec.dims.len())];
        let p = spec.p[rng.gen_range(0..spec.p.len())];
        let n = rng.gen_range(1..=spec.atoms_max);
        let mu = random_measure(&mut rng, d, n, spec.spread)?;
        let t = rng.gen_range(spec.t_range.0..=spec.t_range.1);
        let g = match spec.theta {
            None => Terminal::Flat,
            Some(th) => Terminal::Weight(ParametricWeight::poly(th, vec![0.0; d])?),
        };
        let c = bct_identity_defect(&mu, &g, p, t, spec.h)?;
        worst = worst.max(c.defect);
        rows.push(c);
        meta.push_str(&format!("{i},{d},{},{n}\n", super::fmt_f64(p)));
        let scan = monotonicity_scan(&mu, &g, p, &spec.scan)?;
        scans_ok &= scan.pass();
        for (t, q) in scan.t.iter().zip(&scan.q) {
            scans.push_str(&format!(
                "{i},{},{}\n",
                super::fmt_f64(*t),
                super::fmt_f64(*q)
            ));
        }
    }
    art.csv("bct.csv", &bct_csv(&rows))?;
    art.csv("instances.csv", &meta)?;
    art.csv("scan.csv", &scans)?;
    Ok(vec![
        Check::new(
            "bct_identity",
            worst <= cfg.tolerances.bct,
            format!("worst defect {worst:e}"),
        ),
        Check::new(
            "monotone_scan",
            scans_ok,
            format!("{} instances", spec.instances),
        ),
    ])
}

fn input_field(cfg: &LabConfig, art: &mut Artifacts) -> Result<Field> {
    let grid = cfg.need(&cfg.grid, "grid")?;
    let f = cfg.need(&cfg.input, "input")?.field(grid)?;
    art.note("field_hash", &blob_hash(&f.to_bytes()));
    Ok(f)
}

fn run_atoms_on(
    f: &Field,
    params: &ProofParameters,
    tol: &Tolerances,
    art: &mut Artifacts,
) -> Result<Vec<Check>> {
    let ladder = build_ladder(f, params.a, params.k)?;
    let table = build_atom_table(&ladder, params)?;
    let forest = build_vertical_forest(&table);
    art.csv("atoms.csv", &table.to_csv(Some(&forest)))?;
    let mut graph_issues = 0;
    for l in &table.levels {
        graph_issues += l.graph.violations(params.lambda, params.theta[3]).len();
    }
    let forest_issues = forest.violations(&table);
    let convex = convex_sum_report(&ladder, &table)?;
    art.csv("convex.csv", &rows_csv(&convex.rows))?;
    let trees = tree_budget_report(&ladder, &table, &forest)?;
    art.csv("trees.csv", &trees_csv(&trees, params.d))?;
    let audit = partition_audit(&table, &forest);
    let tele = table.telescoping_sum();
    art.note("convex_ratio", &super::fmt_f64(convex.ratio));
    art.note("trees", &trees.trees.len().to_string());
    Ok(vec![
        Check::new(
            "horizontal_graph",
            graph_issues == 0,
            format!("{graph_issues} violations"),
        ),
        Check::new(
            "vertical_forest",
            forest_issues.is_empty(),
            forest_issues.join("; "),
        ),
        Check::new(
            "telescoping_budget",
            tele <= 3.0 * table.l1 * (1.0 + tol.budget),
            format!("sum {tele:e} against 3|f| = {:e}", 3.0 * table.l1),
        ),
        Check::new(
            "tree_budget",
            trees.within_bound(tol.budget),
            format!("charged {:e} against {:e}", trees.total_budget, trees.bound),
        ),
        Check::new("partition_audit", audit.balanced(), format!("{audit:?}")),
    ])
}

fn run_atoms(cfg: &LabConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let f = input_field(cfg, art)?;
    run_atoms_on(&f, cfg.need(&cfg.params, "params")?, &cfg.tolerances, art)
}

/// Growth or boundedness verdict on embedding partial sums.
pub fn embedding_verdict(rows: &[ReportRow], spec: &EmbedSpec, tol: &Tolerances) -> Option<Check> {
    let at = |k: usize| rows.iter().find(|r| r.k == k);
    match spec.mode {
        EmbedMode::Report => None,
        EmbedMode::Divergent => {
            let c = at(spec.k_min)?.term;
            let worst = (spec.k_min..=spec.k_max)
                .filter_map(at)
                .map(|r| r.partial_sum / (c * r.k as f64))
                .fold(f64::INFINITY, f64::min);
            Some(Check::new(
                "linear_growth",
                worst >= tol.growth,
                format!("min S_K/(cK) = {worst:.6} with c = {c:e}"),
            ))
        }
        EmbedMode::Bounded => {
            let ratios: Vec<f64> = (spec.k_min..=spec.k_max)
                .filter_map(at)
                .map(|r| r.ratio)
                .collect();
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(0.0, f64::max);
            let spread = if lo > 0.0 {
                hi / lo
            } else if hi == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            Some(Check::new(
                "bounded_ratio",
                spread <= tol.bounded_factor,
                format!("max/min = {spread:.6}"),
            ))
        }
    }
}

fn run_embed(cfg: &LabConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let spec = cfg.need(&cfg.embed, "embed")?;
    let params = cfg.need(&cfg.params, "params")?;
    let f = input_field(cfg, art)?;
    let ladder = build_ladder(&f, params.a, spec.k_max)?;
    let rows = embedding_rows(&ladder, params.p)?;
    art.csv("embedding.csv", &rows_csv(&rows))?;
    let mut checks = Vec::new();
    checks.extend(embedding_verdict(&rows, spec, &cfg.tolerances));
    if spec.atoms {
        checks.extend(run_atoms_on(&f, params, &cfg.tolerances, art)?);
    }
    Ok(checks)
}

fn run_gen(cfg: &LabConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let f = input_field(cfg, art)?;
    art.bytes("field.bin", &f.to_bytes())?;
    art.text("field.csv", &f.to_csv())?;
    Ok(Vec::new())
}

/// Built-in invariant suite; runs without a configuration.
fn run_verify(seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let g1 = GridSpec::new(1, 256, 8.0)?;
    let gauss = gen_gaussian(&g1, &Bump::centered(1, 0.7, 1.0))?;
    let semi = match semigroup_defect(&gauss, 0.3, 0.5)? {
        SemigroupOutcome::Defect(v) => v,
        SemigroupOutcome::ZeroField => 0.0,
    };
    checks.push(Check::new(
        "semigroup",
        semi <= 1e-10,
        format!("defect {semi:e}"),
    ));

    let g2 = GridSpec::new(1, 512, 4.0)?;
    let part = (0..=5)
        .map(|k| partition_deviation(&g2, 6.0, 3, k))
        .collect::<Result<Vec<_>>>()?;
    let worst = part.iter().copied().fold(0.0, f64::max);
    checks.push(Check::new(
        "partition_of_unity",
        worst <= 1e-10,
        format!("max deviation {worst:e}"),
    ));

    let ind = Field::from_fn(&g1, 1, |x, o| {
        o[0] = if x[0].abs() < 1.0 { 1.0 } else { 0.0 }
    });
    // measure of the set as the grid sees it
    let m = g1.cell() * ind.data().iter().filter(|&&v| v == 1.0).count() as f64;
    let lz = lorentz_norm(&ind, 1.5, 1.0, Domain::All)?;
    let dev = (lz - 1.5 * m.powf(1.0 / 1.5)).abs();
    checks.push(Check::new(
        "lorentz_indicator",
        dev <= 1e-12,
        format!("deviation {dev:e}"),
    ));

    let samples = sphere_samples(2, 32);
    let grad = cancellation_defect(&SymbolMap::by_name("gradient", 2)?, &samples)?;
    let div = cancellation_defect(&SymbolMap::by_name("divfree", 2)?, &samples)?;
    let scalar = cancellation_defect(&SymbolMap::by_name("gradient", 1)?, &sphere_samples(1, 2))?;
    checks.push(Check::new(
        "cancellation",
        grad.defect > 0.5 && div.defect > 0.5 && scalar.defect <= 1e-8 && scalar.witness.is_some(),
        format!(
            "gradient {:e}, divfree {:e}, scalar {:e}",
            grad.defect, div.defect, scalar.defect
        ),
    ));

    let delta = PointMeasure::dirac(1);
    let closed = (8.0 * std::f64::consts::PI).sqrt().recip();
    let qs = [0.1, 0.4, 1.0]
        .iter()
        .map(|&t| qp(&delta, &Terminal::Flat, 2.0, t))
        .collect::<Result<Vec<_>>>()?;
    let dev = qs
        .iter()
        .map(|q| (q / closed - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "delta_constancy",
        dev <= 1e-8,
        format!("relative deviation {dev:e}"),
    ));

    let pts = evaluation_lattice(1, 20.0, 0.5);
    let hw = heat_weight(&ParametricWeight::poly(2.0, vec![0.0])?, 0.5, &pts);
    checks.push(Check::new(
        "heated_weight_bounds",
        hw.is_ok(),
        hw.err().map(|e| e.to_string()).unwrap_or_default(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = random_measure(&mut rng, 1, 5, 2.0)?;
    let bct = bct_identity_defect(
        &mu,
        &Terminal::Weight(ParametricWeight::poly(3.0, vec![0.0])?),
        1.5,
        0.5,
        1e-4,
    )?;
    checks.push(Check::new(
        "bct_identity",
        bct.defect <= 1e-3,
        format!("defect {:e}", bct.defect),
    ));

    let mut s = String::from("check,pass,detail\n");
    for c in &checks {
        s.push_str(&format!("{},{},\"{}\"\n", c.name, c.pass, c.detail));
    }
    art.text("verify.csv", &s)?;
    Ok(checks)
}

/// Run-time overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Runs an experiment and writes its artifacts and manifest.
pub fn run_experiment(
    kind: Experiment,
    cfg: Option<&LabConfig>,
    opts: &RunOptions,
) -> Result<Outcome> {
    if let (Some(c), Some(declared)) = (cfg, cfg.and_then(|c| c.experiment)) {
        if declared != kind {
            return Err(Error::Config {
                path: c.source.path.clone(),
                line: c.source.entry("experiment", "kind").map_or(1, |e| e.line),
                msg: format!("config is for `{}`, not `{}`", declared.name(), kind.name()),
            });
        }
    }
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = opts.seed.or(cfg.map(|c| c.seed)).unwrap_or(0);
    let mut art = Artifacts::new(&out)?;
    art.note("experiment", kind.name());
    art.note("seed", &seed.to_string());
    if let Some(c) = cfg {
        art.note("name", &c.name);
        art.note("config", &c.source.path.display().to_string());
        art.note("config_hash", &blob_hash(c.source.text.as_bytes()));
    }
    let checks = match (kind, cfg) {
        (Experiment::Verify, _) => run_verify(seed, &mut art)?,
        (_, None) => return Err(Error::Invalid(format!("`{}` needs --config", kind.name()))),
        (Experiment::Qp, Some(c)) => run_qp(c, seed, &mut art)?,
        (Experiment::Atoms, Some(c)) => run_atoms(c, &mut art)?,
        (Experiment::Embed, Some(c)) => run_embed(c, &mut art)?,
        (Experiment::Gen, Some(c)) => run_gen(c, &mut art)?,
    };
    for c in &checks {
        art.note(
            &format!("check.{}", c.name),
            if c.pass { "PASS" } else { "FAIL" },
        );
    }
    let files = art.finish()?;
    Ok(Outcome { checks, files })
}
