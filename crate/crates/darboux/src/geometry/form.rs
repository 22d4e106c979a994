//! Differential forms stored sparsely by sorted coordinate multi-index.

use super::{same_chart, Chart, GeomError, VectorField};
use crate::symcore::{differentiate, simplify, Expr, Node};
use num::Signed;
use std::collections::BTreeMap;
use std::fmt;

/// A homogeneous k-form on a chart: a map from strictly increasing
/// multi-indices to simplified, nonzero coefficient expressions. Degree 0
/// forms hold a single scalar under the empty index.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialForm {
    chart: Chart,
    degree: usize,
    terms: BTreeMap<Vec<u32>, Expr>,
}

/// Sorts a multi-index, tracking permutation parity. Returns None when an
/// index repeats (the term vanishes).
fn canonical_index(mut idx: Vec<u32>) -> Option<(Vec<u32>, bool)> {
    let mut flip = false;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            flip = !flip;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((idx, flip))
}

/// Merges two strictly increasing index lists, counting the crossings that
/// determine the sign of the wedge. Returns None on a shared index.
fn merge_indices(a: &[u32], b: &[u32]) -> Option<(Vec<u32>, bool)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut crossings = 0usize;
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            // every remaining entry of a must hop over b[j]
            crossings += a.len() - i;
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((out, crossings % 2 == 1))
}

impl DifferentialForm {
    pub fn zero(chart: &Chart, degree: usize) -> DifferentialForm {
        DifferentialForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// Wraps a scalar as a 0-form.
    pub fn scalar(chart: &Chart, e: Expr) -> DifferentialForm {
        let mut f = DifferentialForm::zero(chart, 0);
        f.add_term(Vec::new(), e);
        f
    }

    /// The coordinate differential d(name).
    pub fn differential(chart: &Chart, name: &str) -> Result<DifferentialForm, GeomError> {
        let i = chart.index_of(name)? as u32;
        let mut f = DifferentialForm::zero(chart, 1);
        f.add_term(vec![i], Expr::one());
        Ok(f)
    }

    /// The 1-form with the given coefficient per coordinate.
    pub fn one_form(chart: &Chart, coeffs: &[Expr]) -> Result<DifferentialForm, GeomError> {
        if coeffs.len() != chart.dim() {
            return Err(GeomError::ComponentCount {
                expected: chart.dim(),
                found: coeffs.len(),
            });
        }
        let mut f = DifferentialForm::zero(chart, 1);
        for (i, c) in coeffs.iter().enumerate() {
            f.add_term(vec![i as u32], c.clone());
        }
        Ok(f)
    }

    /// Builds `coeff * d(names[0]) /\ ... /\ d(names[k-1])`.
    pub fn term(chart: &Chart, coeff: Expr, names: &[&str]) -> Result<DifferentialForm, GeomError> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            idx.push(chart.index_of(n)? as u32);
        }
        let mut f = DifferentialForm::zero(chart, names.len());
        f.add_term(idx, coeff);
        Ok(f)
    }

    /// Adds coeff under a possibly unsorted index, normalizing sign and
    /// dropping vanishing or duplicate-index terms.
    fn add_term(&mut self, idx: Vec<u32>, coeff: Expr) {
        debug_assert_eq!(idx.len(), self.degree);
        let Some((idx, flip)) = canonical_index(idx) else {
            return;
        };
        let coeff = if flip { Expr::neg(coeff) } else { coeff };
        let entry = match self.terms.remove(&idx) {
            Some(old) => simplify(&(old + coeff)),
            None => simplify(&coeff),
        };
        if !entry.is_zero() {
            self.terms.insert(idx, entry);
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates (multi-index, coefficient) pairs in index order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Expr)> {
        self.terms.iter().map(|(i, c)| (i.as_slice(), c))
    }

    /// The coefficient of the given coordinate differentials (any order).
    pub fn coefficient(&self, names: &[&str]) -> Result<Expr, GeomError> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            idx.push(self.chart.index_of(n)? as u32);
        }
        let Some((idx, flip)) = canonical_index(idx) else {
            return Ok(Expr::zero());
        };
        let c = self.terms.get(&idx).cloned().unwrap_or_else(Expr::zero);
        Ok(if flip { Expr::neg(c) } else { c })
    }

    /// The scalar held by a 0-form.
    pub fn as_scalar(&self) -> Option<Expr> {
        if self.degree != 0 {
            return None;
        }
        Some(self.terms.get(&Vec::new()).cloned().unwrap_or_else(Expr::zero))
    }

    pub fn neg(&self) -> DifferentialForm {
        let mut out = DifferentialForm::zero(&self.chart, self.degree);
        for (i, c) in &self.terms {
            out.terms.insert(i.clone(), simplify(&Expr::neg(c.clone())));
        }
        out
    }

    pub fn scale(&self, s: &Expr) -> DifferentialForm {
        let mut out = DifferentialForm::zero(&self.chart, self.degree);
        for (i, c) in &self.terms {
            let v = simplify(&(s.clone() * c.clone()));
            if !v.is_zero() {
                out.terms.insert(i.clone(), v);
            }
        }
        out
    }

    /// Adds two forms. Zero forms are degree-flexible so that vanishing
    /// wedge products combine without ceremony.
    pub fn add(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeomError> {
        same_chart(&self.chart, &other.chart)?;
        if self.is_zero() && self.degree != other.degree {
            return Ok(other.clone());
        }
        if other.is_zero() && self.degree != other.degree {
            return Ok(self.clone());
        }
        if self.degree != other.degree {
            return Err(GeomError::DegreeMismatch(self.degree, other.degree));
        }
        let mut out = self.clone();
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeomError> {
        self.add(&other.neg())
    }

    pub fn wedge(&self, other: &DifferentialForm) -> Result<DifferentialForm, GeomError> {
        same_chart(&self.chart, &other.chart)?;
        let mut out = DifferentialForm::zero(&self.chart, self.degree + other.degree);
        for (ia, ca) in &self.terms {
            for (ib, cb) in &other.terms {
                let Some((idx, flip)) = merge_indices(ia, ib) else {
                    continue;
                };
                let mut c = ca.clone() * cb.clone();
                if flip {
                    c = Expr::neg(c);
                }
                out.add_term(idx, c);
            }
        }
        Ok(out)
    }

    pub fn exterior_derivative(&self) -> DifferentialForm {
        let mut out = DifferentialForm::zero(&self.chart, self.degree + 1);
        for (idx, c) in &self.terms {
            for (j, name) in self.chart.coords().iter().enumerate() {
                let j = j as u32;
                if idx.contains(&j) {
                    continue;
                }
                let dc = differentiate(c, name);
                if dc.is_zero() {
                    continue;
                }
                let mut nidx = Vec::with_capacity(idx.len() + 1);
                nidx.push(j);
                nidx.extend_from_slice(idx);
                out.add_term(nidx, dc);
            }
        }
        out
    }

    /// Interior product i_X: contracts the leading slot with X.
    pub fn interior_product(&self, x: &VectorField) -> Result<DifferentialForm, GeomError> {
        same_chart(&self.chart, x.chart())?;
        if self.degree == 0 {
            return Ok(DifferentialForm::zero(&self.chart, 0));
        }
        let mut out = DifferentialForm::zero(&self.chart, self.degree - 1);
        for (idx, c) in &self.terms {
            for (p, j) in idx.iter().enumerate() {
                let comp = x.component(*j as usize);
                if comp.is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(p);
                let mut v = comp.clone() * c.clone();
                if p % 2 == 1 {
                    v = Expr::neg(v);
                }
                out.add_term(rest, v);
            }
        }
        Ok(out)
    }

    /// Pairing of a 1-form with a vector field.
    pub fn apply_to(&self, x: &VectorField) -> Result<Expr, GeomError> {
        if self.degree != 1 {
            return Err(GeomError::DegreeMismatch(self.degree, 1));
        }
        Ok(self
            .interior_product(x)?
            .as_scalar()
            .unwrap_or_else(Expr::zero))
    }

    /// Lie derivative along X by the Cartan formula i_X(da) + d(i_X a).
    pub fn lie_derivative(&self, x: &VectorField) -> Result<DifferentialForm, GeomError> {
        let a = self.exterior_derivative().interior_product(x)?;
        let b = self.interior_product(x)?.exterior_derivative();
        a.add(&b)
    }

    /// Structural equality after simplification of the difference.
    pub fn same(&self, other: &DifferentialForm) -> bool {
        match self.sub(other) {
            Ok(d) => d.is_zero(),
            Err(_) => false,
        }
    }

    /// Rewrites the form by substituting `images[l]` for the l-th coordinate
    /// differential, leaving coefficients untouched. `chart` is the chart of
    /// the images (it may extend the form's own chart, e.g. with formal
    /// coframe labels), and every coefficient must make sense there.
    pub(crate) fn map_differentials(
        &self,
        images: &[DifferentialForm],
        chart: &Chart,
    ) -> Result<DifferentialForm, GeomError> {
        if images.len() != self.chart.dim() {
            return Err(GeomError::ComponentCount {
                expected: self.chart.dim(),
                found: images.len(),
            });
        }
        let mut out = DifferentialForm::zero(chart, self.degree);
        for (idx, coeff) in &self.terms {
            let mut w = DifferentialForm::scalar(chart, coeff.clone());
            for l in idx {
                w = w.wedge(&images[*l as usize])?;
            }
            out = out.add(&w)?;
        }
        Ok(out)
    }

    /// Coefficient row over the full multi-index basis column set `cols`.
    pub(crate) fn row(&self, cols: &[Vec<u32>]) -> Vec<Expr> {
        cols.iter()
            .map(|i| self.terms.get(i).cloned().unwrap_or_else(Expr::zero))
            .collect()
    }
}

/// Exterior derivative of a scalar as a 1-form.
pub fn d_scalar(chart: &Chart, f: &Expr) -> DifferentialForm {
    let mut out = DifferentialForm::zero(chart, 1);
    for (j, name) in chart.coords().iter().enumerate() {
        let df = differentiate(f, name);
        if !df.is_zero() {
            out.add_term(vec![j as u32], df);
        }
    }
    out
}

fn coeff_is_atomic(e: &Expr) -> bool {
    match e.node() {
        Node::Var(_) | Node::Opaque { .. } | Node::Elem(..) | Node::Integral { .. } => true,
        Node::Rat(q) => !q.is_negative(),
        Node::Float(v) => v.0 >= 0.0,
        _ => false,
    }
}

impl fmt::Display for DifferentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, c) in &self.terms {
            let (c, neg) = match c.node() {
                Node::Rat(q) if q.is_negative() => (Expr::neg(c.clone()), true),
                _ => (c.clone(), false),
            };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let dxs: Vec<String> = idx
                .iter()
                .map(|i| format!("d({})", self.chart.coord(*i as usize)))
                .collect();
            if idx.is_empty() {
                write!(f, "{}", c)?;
                continue;
            }
            if c.is_one() {
                write!(f, "{}", dxs.join("/\\"))?;
            } else if coeff_is_atomic(&c) {
                write!(f, "{}*{}", c, dxs.join("/\\"))?;
            } else {
                write!(f, "({})*{}", c, dxs.join("/\\"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse;

    fn jet2() -> Chart {
        Chart::new(&["x", "y", "u", "u_x", "u_y"]).unwrap()
    }

    #[test]
    fn wedge_antisymmetry_and_nilpotence() {
        let m = jet2();
        let dx = DifferentialForm::differential(&m, "x").unwrap();
        let dy = DifferentialForm::differential(&m, "y").unwrap();
        assert!(dx.wedge(&dx).unwrap().is_zero());
        let xy = dx.wedge(&dy).unwrap();
        let yx = dy.wedge(&dx).unwrap();
        assert!(xy.add(&yx).unwrap().is_zero());
        assert_eq!(format!("{}", xy), "d(x)/\\d(y)");
    }

    #[test]
    fn contact_form_wedge_dx() {
        let m = jet2();
        let theta = parse_form_str(&m, "d(u) - u_x*d(x) - u_y*d(y)");
        let dx = DifferentialForm::differential(&m, "x").unwrap();
        let got = theta.wedge(&dx).unwrap();
        // du/\dx survives; the dx/\dx term dies; -u_y dy/\dx flips sign
        let du_dx = DifferentialForm::term(&m, Expr::one(), &["u", "x"]).unwrap();
        let dy_dx = DifferentialForm::term(&m, parse("u_y").unwrap(), &["x", "y"]).unwrap();
        let want = du_dx.add(&dy_dx).unwrap();
        assert!(got.same(&want));
    }

    fn parse_form_str(m: &Chart, s: &str) -> DifferentialForm {
        super::super::parse_form(m, s).unwrap()
    }

    #[test]
    fn exterior_derivative_of_contact_forms() {
        let m = jet2();
        let theta = parse_form_str(&m, "d(u) - u_x*d(x) - u_y*d(y)");
        let dtheta = theta.exterior_derivative();
        let want = parse_form_str(&m, "-d(u_x)/\\d(x) - d(u_y)/\\d(y)");
        assert!(dtheta.same(&want));
        // d of a coordinate differential vanishes
        let dx = DifferentialForm::differential(&m, "x").unwrap();
        assert!(dx.exterior_derivative().is_zero());
        // d^2 = 0 on the contact form itself
        assert!(dtheta.exterior_derivative().is_zero());
    }

    #[test]
    fn exterior_derivative_on_first_order_system() {
        let m = Chart::new(&["y", "w", "w_y", "w_yy"]).unwrap();
        let k = parse_form_str(&m, "d(w) - w_y*d(y)");
        let want = parse_form_str(&m, "-d(w_y)/\\d(y)");
        assert!(k.exterior_derivative().same(&want));
    }

    #[test]
    fn interior_product_contracts_with_sign() {
        let m = jet2();
        let x = VectorField::coordinate(&m, "x").unwrap();
        let two_form = parse_form_str(&m, "d(x)/\\d(y)");
        let got = two_form.interior_product(&x).unwrap();
        let dy = DifferentialForm::differential(&m, "y").unwrap();
        assert!(got.same(&dy));
        // contracting the second slot picks up a sign
        let y = VectorField::coordinate(&m, "y").unwrap();
        let got = two_form.interior_product(&y).unwrap();
        let dx = DifferentialForm::differential(&m, "x").unwrap();
        assert!(got.add(&dx).unwrap().is_zero());
    }

    #[test]
    fn lie_derivative_by_cartan() {
        let m = Chart::new(&["y", "w", "w_y", "w_yy"]).unwrap();
        let k1 = parse_form_str(&m, "d(w) - w_y*d(y)");
        // translation in w leaves the form alone
        let dw = VectorField::coordinate(&m, "w").unwrap();
        assert!(k1.lie_derivative(&dw).unwrap().is_zero());
        // the prolonged scaling w d/dw reproduces the form itself
        let pr = VectorField::new(
            &m,
            &[
                Expr::zero(),
                parse("w").unwrap(),
                parse("w_y").unwrap(),
                parse("w_yy").unwrap(),
            ],
        )
        .unwrap();
        assert!(k1.lie_derivative(&pr).unwrap().same(&k1));
        // naturality: L_X(df) = d(X f)
        let f = parse("w*y + w_y^2").unwrap();
        let lhs = d_scalar(&m, &f).lie_derivative(&pr).unwrap();
        let rhs = d_scalar(&m, &pr.apply(&f));
        assert!(lhs.same(&rhs));
    }

    #[test]
    fn chart_mismatch_is_reported() {
        let m = jet2();
        let n = Chart::new(&["s", "t"]).unwrap();
        let dx = DifferentialForm::differential(&m, "x").unwrap();
        let ds = DifferentialForm::differential(&n, "s").unwrap();
        assert!(matches!(
            dx.wedge(&ds),
            Err(GeomError::ChartMismatch(..))
        ));
    }

    #[test]
    fn display_reads_back() {
        let m = jet2();
        let theta = parse_form_str(&m, "d(u) - u_x*d(x) - u_y*d(y)");
        let shown = format!("{}", theta);
        let back = parse_form_str(&m, &shown);
        assert!(back.same(&theta));
    }
}
