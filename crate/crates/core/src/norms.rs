//! Lebesgue, Lorentz and Besov–Lorentz norms of grid data.
//!
//! Grid data is a step function, so its distribution function is a finite staircase and the
//! Lorentz integral in `t` is summed exactly over the steps.

use std::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::field_grid::{pairwise_sum, Field};
use crate::spectral::{besov_band, BandFilter};

/// Where a norm is taken: the whole box, a node mask, or a nonnegative weight.
#[derive(Clone, Copy, Debug)]
pub enum Domain<'a> {
    All,
    Region(&'a [bool]),
    Weight(&'a [f64]),
}

impl Domain<'_> {
    /// Measure carried by each node.
    fn node_measures(&self, f: &Field) -> Result<Vec<f64>> {
        let cell = f.grid().cell();
        let n = f.grid().node_count();
        match self {
            Domain::All => Ok(vec![cell; n]),
            Domain::Region(mask) => {
                if mask.len() != n {
                    return invalid("region mask length differs from the node count");
                }
                if !mask.iter().any(|&m| m) {
                    return invalid("empty region");
                }
                Ok(mask.iter().map(|&m| if m { cell } else { 0.0 }).collect())
            }
            Domain::Weight(w) => {
                if w.len() != n {
                    return invalid("weight length differs from the node count");
                }
                if w.iter().any(|v| !(*v >= 0.0)) {
                    return invalid("weights must be nonnegative");
                }
                Ok(w.iter().map(|v| cell * v).collect())
            }
        }
    }
}

/// `(h^d Σ |f|^p w)^{1/p}`.
pub fn lp_norm(f: &Field, p: f64, weight: Option<&[f64]>) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("p must lie in [1, ∞), got {p}"));
    }
    let dom = weight.map_or(Domain::All, Domain::Weight);
    let mu = dom.node_measures(f)?;
    let terms: Vec<f64> = f
        .magnitudes()
        .iter()
        .zip(&mu)
        .map(|(m, w)| m.powf(p) * w)
        .collect();
    Ok(pairwise_sum(&terms).powf(1.0 / p))
}

/// One step of the decreasing rearrangement: value `u` held on cumulative measure `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub value: f64,
    pub measure: f64,
}

/// Distribution staircase of `|f|` under per-node measures; ties merged, zeros dropped.
pub fn distribution_steps(mags: &[f64], measures: &[f64]) -> Vec<Step> {
    let mut idx: Vec<usize> = (0..mags.len())
        .filter(|&i| mags[i] > 0.0 && measures[i] > 0.0)
        .collect();
    idx.sort_by(|&a, &b| {
        mags[b]
            .partial_cmp(&mags[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut steps: Vec<Step> = Vec::new();
    let mut acc = 0.0;
    for i in idx {
        acc += measures[i];
        match steps.last_mut() {
            Some(s) if s.value == mags[i] => s.measure = acc,
            _ => steps.push(Step {
                value: mags[i],
                measure: acc,
            }),
        }
    }
    steps
}

/// `p^{1/q} (Σ_i M_i^{q/p} (u_i^q − u_{i+1}^q) / q)^{1/q}` over a staircase.
pub fn lorentz_from_steps(steps: &[Step], p: f64, q: f64) -> f64 {
    let terms: Vec<f64> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let next = steps.get(i + 1).map_or(0.0, |n| n.value);
            s.measure.powf(q / p) * (s.value.powf(q) - next.powf(q)) / q
        })
        .collect();
    p.powf(1.0 / q) * pairwise_sum(&terms).powf(1.0 / q)
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite() && q >= 1.0 && q.is_finite()) {
        return invalid(format!(
            "Lorentz indices must satisfy p, q ∈ [1, ∞), got ({p}, {q})"
        ));
    }
    Ok(())
}

/// `p^{1/q} ‖t·μ{|f| ≥ t}^{1/p}‖_{L_q(dt/t)}` over a domain.
pub fn lorentz_norm(f: &Field, p: f64, q: f64, domain: Domain) -> Result<f64> {
    check_pq(p, q)?;
    let mu = domain.node_measures(f)?;
    Ok(lorentz_from_steps(
        &distribution_steps(&f.magnitudes(), &mu),
        p,
        q,
    ))
}

/// Partial Besov–Lorentz sum over bands `k0..=k1` with the per-band `L_{p,1}` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct BesovLorentz {
    pub total: f64,
    pub terms: Vec<(i32, f64)>,
}

pub fn besov_lorentz_norm(
    f: &Field,
    p: f64,
    filter: &BandFilter,
    k0: i32,
    k1: i32,
) -> Result<BesovLorentz> {
    if k1 < k0 {
        return invalid("empty band range");
    }
    let terms = (k0..=k1)
        .map(|k| {
            Ok((
                k,
                lorentz_norm(&besov_band(f, k, filter)?, p, 1.0, Domain::All)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = terms.iter().map(|t| t.1).collect();
    Ok(BesovLorentz {
        total: pairwise_sum(&vals),
        terms,
    })
}

/// `Σ_j ‖f‖_{L_{p,q}(Ω_j)} − ‖f‖_{L_{p,q}(∪Ω_j)}` for pairwise disjoint masks.
pub fn lorentz_split_defect(f: &Field, p: f64, q: f64, regions: &[Vec<bool>]) -> Result<f64> {
    check_pq(p, q)?;
    let n = f.grid().node_count();
    if regions.is_empty() {
        return invalid("no regions given");
    }
    let mut union = vec![false; n];
    for r in regions {
        if r.len() != n {
            return invalid("region mask length differs from the node count");
        }
        for (u, &m) in union.iter_mut().zip(r) {
            if m && *u {
                return invalid("regions overlap");
            }
            *u |= m;
        }
    }
    let parts: Vec<f64> = regions
        .iter()
        .map(|r| lorentz_norm(f, p, q, Domain::Region(r)))
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&parts) - lorentz_norm(f, p, q, Domain::Region(&union))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Lp,
    LpWeighted,
    Lorentz,
    LorentzWeighted,
    BesovLorentz,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Lp => "Lp",
            NormKind::LpWeighted => "LpWeighted",
            NormKind::Lorentz => "Lorentz",
            NormKind::LorentzWeighted => "LorentzWeighted",
            NormKind::BesovLorentz => "BesovLorentz",
        }
    }
}

/// A norm request.
#[derive(Clone, Debug)]
pub struct NormSpec {
    pub kind: NormKind,
    pub p: f64,
    pub q: f64,
    pub weight: Option<Vec<f64>>,
    pub region: Option<Vec<bool>>,
    pub bands: Option<(i32, i32)>,
    pub filter_a: u32,
}

/// A norm value with its per-band or per-step breakdown.
#[derive(Clone, Debug, PartialEq)]
pub struct NormResult {
    pub value: f64,
    pub breakdown: Vec<f64>,
}

impl NormSpec {
    pub fn new(kind: NormKind, p: f64, q: f64) -> Self {
        Self {
            kind,
            p,
            q,
            weight: None,
            region: None,
            bands: None,
            filter_a: 2,
        }
    }

    pub fn evaluate(&self, f: &Field) -> Result<NormResult> {
        check_pq(self.p, self.q)?;
        let dom = match (&self.weight, &self.region) {
            (Some(_), Some(_)) => return invalid("give either a weight or a region, not both"),
            (Some(w), None) => Domain::Weight(w),
            (None, Some(r)) => Domain::Region(r),
            (None, None) => Domain::All,
        };
        let weighted = matches!(self.kind, NormKind::LpWeighted | NormKind::LorentzWeighted);
        if weighted && self.weight.is_none() {
            return invalid("weighted norm without a weight");
        }
        match self.kind {
            NormKind::Lp | NormKind::LpWeighted => {
                let mu = dom.node_measures(f)?;
                let terms: Vec<f64> = f
                    .magnitudes()
                    .iter()
                    .zip(&mu)
                    .map(|(m, w)| m.powf(self.p) * w)
                    .collect();
                Ok(NormResult {
                    value: pairwise_sum(&terms).powf(1.0 / self.p),
                    breakdown: Vec::new(),
                })
            }
            NormKind::Lorentz | NormKind::LorentzWeighted => {
                let mu = dom.node_measures(f)?;
                let steps = distribution_steps(&f.magnitudes(), &mu);
                Ok(NormResult {
                    value: lorentz_from_steps(&steps, self.p, self.q),
                    breakdown: steps.iter().map(|s| s.measure).collect(),
                })
            }
            NormKind::BesovLorentz => {
                let (k0, k1) = self
                    .bands
                    .ok_or_else(|| crate::Error::Invalid("band range missing".into()))?;
                let b = besov_lorentz_norm(f, self.p, &BandFilter::new(self.filter_a)?, k0, k1)?;
                Ok(NormResult {
                    value: b.total,
                    breakdown: b.terms.iter().map(|t| t.1).collect(),
                })
            }
        }
    }
}

/// CSV rows `norm_kind,p,q,region_id,value`.
pub fn norms_csv(rows: &[(NormKind, f64, f64, usize, f64)]) -> String {
    let fmt = crate::lab::fmt_f64;
    let mut s = String::from("norm_kind,p,q,region_id,value\n");
    for (k, p, q, r, v) in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            k.name(),
            fmt(*p),
            fmt(*q),
            r,
            fmt(*v)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_grid::GridSpec;

    #[test]
    fn indicator_values() {
        // 16 nodes of width 1/8 inside [-1, 1) → measure 1 after masking 8 of them
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let f = Field::from_fn(&g, 1, |x, o| {
            o[0] = if x[0] >= -0.5 && x[0] < 0.5 { 1.0 } else { 0.0 }
        });
        assert!((lp_norm(&f, 3.0, None).unwrap() - 1.0).abs() < 1e-15);
        assert!((lorentz_norm(&f, 2.0, 1.0, Domain::All).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ties_merge() {
        let steps = distribution_steps(&[1.0, 3.0, 1.0, 0.0, 3.0], &[1.0; 5]);
        assert_eq!(
            steps,
            vec![
                Step {
                    value: 3.0,
                    measure: 2.0
                },
                Step {
                    value: 1.0,
                    measure: 4.0
                }
            ]
        );
    }

    #[test]
    fn overlapping_regions_rejected() {
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let f = Field::from_fn(&g, 1, |_, o| o[0] = 1.0);
        let r = vec![true; 16];
        assert!(lorentz_split_defect(&f, 2.0, 1.0, &[r.clone(), r]).is_err());
        assert!(lorentz_norm(&f, 2.0, 1.0, Domain::Region(&[false; 16])).is_err());
    }

    #[test]
    fn two_equal_regions_defect() {
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let c = 1.5;
        let f = Field::from_fn(&g, 1, |_, o| o[0] = c);
        let left: Vec<bool> = (0..16).map(|i| i < 8).collect();
        let right: Vec<bool> = left.iter().map(|v| !v).collect();
        let m: f64 = 1.0;
        let expect = (2.0 - 2f64.sqrt()) * 2.0 * c * m.sqrt();
        let got = lorentz_split_defect(&f, 2.0, 1.0, &[left, right]).unwrap();
        assert!((got - expect).abs() < 1e-14);
    }
}
