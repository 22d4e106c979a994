//! Exact linear algebra over the symbolic coefficient field.
//!
//! Pivots are chosen by structural inspection and confirmed by numeric
//! probing, so an entry that only looks nonzero (but vanishes identically)
//! is never divided by. Division by expressions that vanish on a thin locus
//! is fine: results hold at generic points of the domain.

use super::rank::{describe_point, generic_rank_rows, ProbeConfig};
use super::{Chart, Constraint, DifferentialForm, GeomError, VectorField};
use crate::symcore::{simplify, split_fraction, zero_probe, Expr, Node, ProbeOptions};
use std::collections::BTreeSet;

/// A dense matrix of simplified expressions.
#[derive(Clone, Debug)]
pub struct SymMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Expr>,
}

impl SymMat {
    pub fn new(rows: usize, cols: usize) -> SymMat {
        SymMat {
            rows,
            cols,
            data: vec![Expr::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<Expr>]) -> SymMat {
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        let mut m = SymMat::new(nr, nc);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), nc, "ragged rows");
            for (j, e) in row.iter().enumerate() {
                m.set(i, j, e.clone());
            }
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> &Expr {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) {
        self.data[i * self.cols + j] = simplify(&e);
    }

    pub fn transpose(&self) -> SymMat {
        let mut m = SymMat::new(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.data[j * self.rows + i] = self.at(i, j).clone();
            }
        }
        m
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// Scores a pivot candidate: exact nonzero constants beat single
    /// variables beat everything else; short displays break ties.
    fn pivot_score(e: &Expr) -> usize {
        match e.node() {
            Node::Rat(_) => 0,
            Node::Var(_) => 1,
            _ => 2 + format!("{e}").len().min(400),
        }
    }

    /// Reduced row echelon form in place. Returns the pivot columns.
    /// `probe` decides whether a structurally nonzero entry truly vanishes.
    pub fn rref(&mut self, probe: &ProbeOptions) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            // best verified-nonzero row for this column
            let mut best: Option<(usize, usize)> = None;
            for i in r..self.rows {
                let e = self.at(i, c);
                if e.is_zero() {
                    continue;
                }
                let score = SymMat::pivot_score(e);
                if best.map_or(true, |(s, _)| score < s) && !zero_probe(e, probe) {
                    best = Some((score, i));
                    if score == 0 {
                        break;
                    }
                }
            }
            let Some((_, prow)) = best else {
                // column is identically zero below r; clear stray entries
                for i in r..self.rows {
                    if !self.at(i, c).is_zero() {
                        self.set(i, c, Expr::zero());
                    }
                }
                continue;
            };
            self.swap_rows(r, prow);
            let pivot = self.at(r, c).clone();
            for j in c..self.cols {
                let e = Expr::div(self.at(r, j).clone(), pivot.clone());
                self.set(r, j, e);
            }
            self.set(r, c, Expr::one());
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.at(i, c).clone();
                if factor.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let e = self.at(i, j).clone() - factor.clone() * self.at(r, j).clone();
                    self.set(i, j, e);
                }
                self.set(i, c, Expr::zero());
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    /// Basis of the right null space, one vector per free column, with the
    /// free component normalized to 1.
    pub fn nullspace(&self, probe: &ProbeOptions) -> Vec<Vec<Expr>> {
        let mut m = self.clone();
        let pivots = m.rref(probe);
        let mut out = Vec::new();
        for j in 0..self.cols {
            if pivots.contains(&j) {
                continue;
            }
            let mut v = vec![Expr::zero(); self.cols];
            v[j] = Expr::one();
            for (r, pc) in pivots.iter().enumerate() {
                v[*pc] = simplify(&Expr::neg(m.at(r, j).clone()));
            }
            out.push(v);
        }
        out
    }

    /// Full reduction with free pivot choice: repeatedly picks the cheapest
    /// verified-nonzero entry anywhere in the unpivoted rows and columns,
    /// normalizes its row, and clears its column. Rows stay in place; the
    /// returned (row, column) pairs identify the pivots in discovery order.
    /// Rows without a pivot are identically zero and are cleared.
    pub fn reduce_free(&mut self, probe: &ProbeOptions) -> Vec<(usize, usize)> {
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        loop {
            let mut best: Option<(usize, usize, usize)> = None;
            'scan: for i in 0..self.rows {
                if pivots.iter().any(|(r, _)| *r == i) {
                    continue;
                }
                for j in 0..self.cols {
                    if pivots.iter().any(|(_, c)| *c == j) {
                        continue;
                    }
                    let e = self.at(i, j);
                    if e.is_zero() {
                        continue;
                    }
                    let score = SymMat::pivot_score(e);
                    if best.map_or(true, |(s, _, _)| score < s) && !zero_probe(e, probe) {
                        best = Some((score, i, j));
                        if score == 0 {
                            break 'scan;
                        }
                    }
                }
            }
            let Some((_, r, c)) = best else {
                break;
            };
            let pivot = self.at(r, c).clone();
            for j in 0..self.cols {
                let e = Expr::div(self.at(r, j).clone(), pivot.clone());
                self.set(r, j, e);
            }
            self.set(r, c, Expr::one());
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self.at(i, c).clone();
                if factor.is_zero() {
                    continue;
                }
                for j in 0..self.cols {
                    let e = self.at(i, j).clone() - factor.clone() * self.at(r, j).clone();
                    self.set(i, j, e);
                }
                self.set(i, c, Expr::zero());
            }
            pivots.push((r, c));
        }
        for i in 0..self.rows {
            if pivots.iter().any(|(r, _)| *r == i) {
                continue;
            }
            for j in 0..self.cols {
                if !self.at(i, j).is_zero() {
                    self.set(i, j, Expr::zero());
                }
            }
        }
        pivots
    }

    /// The inverse of a square matrix, or None when it is singular at
    /// generic points.
    pub fn inverse(&self, probe: &ProbeOptions) -> Option<Vec<Vec<Expr>>> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut aug = SymMat::new(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.at(i, j).clone());
            }
            aug.set(i, n + i, Expr::one());
        }
        let pivots = aug.rref(probe);
        if pivots.len() != n || pivots.iter().enumerate().any(|(i, p)| *p != i) {
            return None;
        }
        Some(
            (0..n)
                .map(|i| (0..n).map(|j| aug.at(i, n + j).clone()).collect())
                .collect(),
        )
    }

    /// Solves `self * x = b` for one solution, if the system is consistent.
    pub fn solve(&self, b: &[Expr], probe: &ProbeOptions) -> Option<Vec<Expr>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = SymMat::new(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug.set(i, j, self.at(i, j).clone());
            }
            aug.set(i, self.cols, b[i].clone());
        }
        let pivots = aug.rref(probe);
        if pivots.contains(&self.cols) {
            return None; // a row reduces to 0 = 1
        }
        let mut x = vec![Expr::zero(); self.cols];
        for (r, pc) in pivots.iter().enumerate() {
            x[*pc] = aug.at(r, self.cols).clone();
        }
        Some(x)
    }
}

/// Multiplies a vector of expressions by the least common structure of the
/// component denominators, producing denominator-free generators up to the
/// simplifier's ability to cancel.
pub(crate) fn clear_denominators(v: &[Expr]) -> Vec<Expr> {
    let mut dens: Vec<Expr> = Vec::new();
    let mut seen = BTreeSet::new();
    for e in v {
        let (_, den) = split_fraction(e);
        if den.is_one() {
            continue;
        }
        if seen.insert(format!("{den}")) {
            dens.push(den);
        }
    }
    if dens.is_empty() {
        return v.to_vec();
    }
    let m = Expr::product(dens.clone());
    let mut out: Vec<Expr> = v
        .iter()
        .map(|e| simplify(&(m.clone() * e.clone())))
        .collect();
    // strip denominator factors the multiply-through left in every component
    'strip: loop {
        if out.iter().all(|e| e.is_zero()) {
            break;
        }
        for d in &dens {
            let trial: Vec<Expr> = out
                .iter()
                .map(|e| simplify(&(e.clone() / d.clone())))
                .collect();
            if trial.iter().all(|e| split_fraction(e).1.is_one()) {
                out = trial;
                continue 'strip;
            }
        }
        break;
    }
    out
}

/// ProbeOptions honoring a chart's domain constraints.
pub(crate) fn probe_for_chart(chart: &Chart, cfg: &ProbeConfig) -> ProbeOptions {
    let mut po = ProbeOptions {
        samples: cfg.samples,
        seed: cfg.seed,
        margin: cfg.margin,
        range: cfg.range,
        ..ProbeOptions::default()
    };
    for c in chart.constraints() {
        match c {
            Constraint::NonZero(e) => po.avoid.push(e.clone()),
            Constraint::Positive(e) => po.positive.push(e.clone()),
        }
    }
    po.bind = cfg.bind.clone();
    po
}

/// Denominator-cleared nullspace of coefficient rows whose generic rank is
/// constant on the domain; a rank drop is reported with a witness point.
fn constant_rank_nullspace(
    chart: &Chart,
    rows: &[Vec<Expr>],
    cfg: &ProbeConfig,
) -> Result<Vec<Vec<Expr>>, GeomError> {
    let rp = generic_rank_rows(chart, rows, cfg)?;
    if !rp.constant {
        let witness = rp
            .drop_witness()
            .map(describe_point)
            .unwrap_or_else(|| "unknown".to_string());
        let low = rp.ranks.iter().copied().min().unwrap_or(0);
        return Err(GeomError::RankDrop {
            low,
            high: rp.rank,
            witness,
        });
    }
    let probe = probe_for_chart(chart, cfg);
    let m = SymMat::from_rows(rows);
    let null: Vec<Vec<Expr>> = m
        .nullspace(&probe)
        .into_iter()
        .map(|v| clear_denominators(&v))
        .collect();
    debug_assert_eq!(null.len(), chart.dim() - rp.rank);
    Ok(null)
}

/// Vector fields spanning the annihilator of a collection of 1-forms at
/// generic points. Requires constant generic rank on the domain.
pub fn annihilator(
    forms: &[DifferentialForm],
    cfg: &ProbeConfig,
) -> Result<Vec<VectorField>, GeomError> {
    let Some(first) = forms.first() else {
        return Ok(Vec::new());
    };
    let chart = first.chart().clone();
    for f in forms {
        super::same_chart(&chart, f.chart())?;
        if f.degree() != 1 {
            return Err(GeomError::DegreeMismatch(f.degree(), 1));
        }
    }
    let rows: Vec<Vec<Expr>> = forms
        .iter()
        .map(|f| {
            (0..chart.dim() as u32)
                .map(|j| f.coefficient(&[chart.coord(j as usize)]).unwrap())
                .collect()
        })
        .collect();
    constant_rank_nullspace(&chart, &rows, cfg)?
        .into_iter()
        .map(|v| VectorField::new(&chart, &v))
        .collect()
}

/// One-forms spanning the annihilator of a collection of vector fields at
/// generic points: the dual computation to [`annihilator`].
pub fn annihilating_forms(
    fields: &[VectorField],
    cfg: &ProbeConfig,
) -> Result<Vec<DifferentialForm>, GeomError> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let chart = first.chart().clone();
    for f in fields {
        super::same_chart(&chart, f.chart())?;
    }
    let rows: Vec<Vec<Expr>> = fields.iter().map(|f| f.components().to_vec()).collect();
    constant_rank_nullspace(&chart, &rows, cfg)?
        .into_iter()
        .map(|v| DifferentialForm::one_form(&chart, &v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::parse_form;
    use crate::symcore::parse;

    #[test]
    fn rref_solves_a_symbolic_system() {
        // [1 x; 0 u] has nullspace 0 for u != 0; solve picks exact entries
        let m = SymMat::from_rows(&[
            vec![Expr::one(), parse("x").unwrap()],
            vec![Expr::zero(), parse("u").unwrap()],
        ]);
        let po = ProbeOptions::default();
        assert!(m.nullspace(&po).is_empty());
        let sol = m
            .solve(&[parse("x*u + 1").unwrap(), parse("u^2").unwrap()], &po)
            .unwrap();
        // x2 = u, x1 = x*u + 1 - x*u = 1
        assert!(simplify(&(sol[0].clone() - Expr::one())).is_zero());
        assert!(simplify(&(sol[1].clone() - parse("u").unwrap())).is_zero());
    }

    #[test]
    fn nullspace_parameterizes_free_columns() {
        // single row (w_y, -1, 0): kernel is two-dimensional
        let m = SymMat::from_rows(&[vec![
            parse("w_y").unwrap(),
            Expr::int(-1),
            Expr::zero(),
        ]]);
        let po = ProbeOptions::default();
        let ns = m.nullspace(&po);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            let dot = simplify(
                &(parse("w_y").unwrap() * v[0].clone() - v[1].clone()),
            );
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn inconsistent_system_has_no_solution() {
        let m = SymMat::from_rows(&[
            vec![Expr::one(), Expr::one()],
            vec![Expr::one(), Expr::one()],
        ]);
        let po = ProbeOptions::default();
        assert!(m.solve(&[Expr::zero(), Expr::one()], &po).is_none());
    }

    #[test]
    fn annihilator_of_coordinate_differentials() {
        let m = Chart::new(&["x", "y", "u"]).unwrap();
        let dx = parse_form(&m, "d(x)").unwrap();
        let dy = parse_form(&m, "d(y)").unwrap();
        let ann = annihilator(&[dx, dy], &ProbeConfig::default()).unwrap();
        assert_eq!(ann.len(), 1);
        let du = VectorField::coordinate(&m, "u").unwrap();
        assert_eq!(ann[0], du);
    }

    #[test]
    fn annihilator_of_first_order_contact_system() {
        let m = Chart::new(&["y", "w", "w_y", "w_yy"]).unwrap();
        let k1 = parse_form(&m, "d(w) - w_y*d(y)").unwrap();
        let k2 = parse_form(&m, "d(w_y) - w_yy*d(y)").unwrap();
        let cfg = ProbeConfig::default();
        let ann = annihilator(&[k1.clone(), k2.clone()], &cfg).unwrap();
        assert_eq!(ann.len(), 2);
        // every returned field annihilates every generator, exactly
        for x in &ann {
            assert!(k1.apply_to(x).unwrap().is_zero());
            assert!(k2.apply_to(x).unwrap().is_zero());
        }
        // and the span is exactly {D_y + w_y D_w + w_yy D_{w_y}, D_{w_yy}}
        let total = VectorField::from_pairs(
            &m,
            &[
                ("y", Expr::one()),
                ("w", parse("w_y").unwrap()),
                ("w_y", parse("w_yy").unwrap()),
            ],
        )
        .unwrap();
        let dwyy = VectorField::coordinate(&m, "w_yy").unwrap();
        let mut all = ann.clone();
        all.push(total);
        all.push(dwyy);
        let p = crate::geometry::generic_rank_fields(&all, &cfg).unwrap();
        assert_eq!(p.rank, 2);
    }

    #[test]
    fn annihilator_of_full_coframe_is_empty() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let dx = parse_form(&m, "d(x)").unwrap();
        let dy = parse_form(&m, "d(y)").unwrap();
        let ann = annihilator(&[dx, dy], &ProbeConfig::default()).unwrap();
        assert!(ann.is_empty());
        let none = annihilator(&[], &ProbeConfig::default()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn rank_drop_reports_witness() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let a = parse_form(&m, "x*d(x)").unwrap();
        let cfg = ProbeConfig {
            samples: 400,
            range: (-0.1, 0.1),
            ..ProbeConfig::default()
        };
        match annihilator(&[a], &cfg) {
            Err(GeomError::RankDrop { low, high, witness }) => {
                assert_eq!(low, 0);
                assert_eq!(high, 1);
                assert!(witness.contains("x ="));
            }
            other => panic!("expected rank drop, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn free_pivoting_prefers_exact_units() {
        // coefficient rows of {dw - w_y dy, dw_y - w_yy dy} over (y,w,w_y,w_yy):
        // the unit entries pivot first, so the rows come back unchanged
        let rows = vec![
            vec![
                simplify(&Expr::neg(parse("w_y").unwrap())),
                Expr::one(),
                Expr::zero(),
                Expr::zero(),
            ],
            vec![
                simplify(&Expr::neg(parse("w_yy").unwrap())),
                Expr::zero(),
                Expr::one(),
                Expr::zero(),
            ],
        ];
        let mut m = SymMat::from_rows(&rows);
        let po = ProbeOptions::default();
        let piv = m.reduce_free(&po);
        assert_eq!(piv, vec![(0, 1), (1, 2)]);
        for i in 0..2 {
            for j in 0..4 {
                assert!(
                    simplify(&(m.at(i, j).clone() - rows[i][j].clone())).is_zero(),
                    "entry ({i},{j}) changed"
                );
            }
        }
        // a dependent row is recognized and cleared
        let mut m = SymMat::from_rows(&[
            vec![Expr::one(), parse("x").unwrap()],
            vec![parse("y").unwrap(), parse("y*x").unwrap()],
        ]);
        let piv = m.reduce_free(&po);
        assert_eq!(piv.len(), 1);
        let free_row = 1 - piv[0].0;
        assert!(m.at(free_row, 0).is_zero() && m.at(free_row, 1).is_zero());
    }

    #[test]
    fn symbolic_inverse_round_trips() {
        let m = SymMat::from_rows(&[
            vec![Expr::one(), parse("x").unwrap()],
            vec![Expr::zero(), parse("u").unwrap()],
        ]);
        let po = ProbeOptions::default();
        let inv = m.inverse(&po).unwrap();
        // [1 x; 0 u]^-1 = [1 -x/u; 0 1/u]
        assert!(simplify(&(inv[0][1].clone() + parse("x/u").unwrap())).is_zero());
        assert!(simplify(&(inv[1][1].clone() - parse("1/u").unwrap())).is_zero());
        for i in 0..2 {
            for j in 0..2 {
                let dot = simplify(
                    &(m.at(i, 0).clone() * inv[0][j].clone()
                        + m.at(i, 1).clone() * inv[1][j].clone()),
                );
                if i == j {
                    assert!(dot.is_one());
                } else {
                    assert!(dot.is_zero());
                }
            }
        }
        // a singular matrix has no inverse
        let s = SymMat::from_rows(&[
            vec![Expr::one(), parse("x").unwrap()],
            vec![parse("y").unwrap(), parse("y*x").unwrap()],
        ]);
        assert!(s.inverse(&po).is_none());
    }

    #[test]
    fn clearing_denominators_preserves_direction() {
        let v = vec![
            parse("1/w_yy").unwrap(),
            parse("w_y/w_yy").unwrap(),
            Expr::one(),
        ];
        let cleared = clear_denominators(&v);
        assert!(simplify(&(cleared[0].clone() - Expr::one())).is_zero());
        assert!(simplify(&(cleared[1].clone() - parse("w_y").unwrap())).is_zero());
        assert!(simplify(&(cleared[2].clone() - parse("w_yy").unwrap())).is_zero());
    }
}
