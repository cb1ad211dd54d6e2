//! The monotone functional `Q_p`, its derivative identity, exponent fits and concentration
//! diagnostics.

mod diagnostics;
mod qp;

pub use diagnostics::{
    conc3_sides, concentration_diagnostic, exponent_fit, flatness_defect, improved_exponent,
    line_measure, Concentration, ConeSample, ConeTag, CubeRow, ExponentFit, ExponentSummary,
    Flatness,
};
pub use qp::{
    bct_identity_defect, bct_rhs, monotonicity_scan, qp, BctCheck, BctRhs, QpQuadrature, Scan,
    Terminal, SCAN_SLACK,
};

/// CSV rows `t,Qp,bct_rhs,fd_derivative,defect`.
pub fn bct_csv(rows: &[BctCheck]) -> String {
    let fmt = crate::lab::fmt_f64;
    let mut s = String::from("t,Qp,bct_rhs,fd_derivative,defect\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(r.t),
            fmt(r.qp),
            fmt(r.rhs),
            fmt(r.fd),
            fmt(r.defect)
        ));
    }
    s
}

/// Lattice map rows `cell,a_k,kind,good`; the cell is `i0 i1 i2` separated by spaces.
pub fn concentration_csv(c: &Concentration, d: usize) -> String {
    let mut s = String::from("cell,a_k,kind,good\n");
    for (k, row) in &c.cubes {
        let cell: Vec<String> = k[..d].iter().map(|v| v.to_string()).collect();
        s.push_str(&format!(
            "{},{},{},{}\n",
            cell.join(" "),
            crate::lab::fmt_f64(row.mass),
            row.kind,
            row.good
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_grid::PointMeasure;
    use crate::weights_atoms::ParametricWeight;
    use std::f64::consts::PI;

    #[test]
    fn delta_flat_closed_form() {
        let mu = PointMeasure::dirac(1);
        for t in [0.1, 0.5, 1.0] {
            let v = qp(&mu, &Terminal::Flat, 2.0, t).unwrap();
            assert!((v - 1.0 / (8.0 * PI).sqrt()).abs() < 1e-10, "{v}");
        }
    }

    #[test]
    fn delta_constant_with_weight() {
        let mu = PointMeasure::new(2, &[(vec![0.3, -0.2], 1.0)]).unwrap();
        let g = Terminal::Weight(ParametricWeight::poly(6.0, vec![0.0, 0.0]).unwrap());
        let q1 = qp(&mu, &g, 1.5, 1.0).unwrap();
        for t in [0.1, 0.3, 0.7] {
            let v = qp(&mu, &g, 1.5, t).unwrap();
            assert!((v / q1 - 1.0).abs() < 1e-6, "{t} {}", v / q1);
        }
    }

    #[test]
    fn bct_pair() {
        let mu = PointMeasure::new(1, &[(vec![-1.0], 1.0), (vec![1.0], 1.0)]).unwrap();
        let g = Terminal::Weight(ParametricWeight::poly(3.0, vec![0.0]).unwrap());
        let c = bct_identity_defect(&mu, &g, 2.0, 0.5, 1e-4).unwrap();
        assert!(c.rhs > 0.0);
        assert!(c.defect < 1e-3, "{c:?}");
        let single = bct_rhs(&PointMeasure::dirac(1), &g, 2.0, 0.5).unwrap();
        assert_eq!(single.value, 0.0);
    }

    #[test]
    fn single_atom_concentrates() {
        let mu = PointMeasure::dirac(2);
        let c = concentration_diagnostic(&mu, &Terminal::Flat, 2.0, 4.0, 0.5, 3.0, 0.1).unwrap();
        let x0 = c.x0.unwrap();
        assert_eq!(x0, [0, 0, 0]);
        let (lhs, rhs) = c.conc3.unwrap();
        assert!(lhs > 0.0 && rhs == 0.0);
    }
}
