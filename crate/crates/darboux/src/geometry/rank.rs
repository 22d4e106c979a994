//! Generic rank of form and field collections by seeded numeric probing.
//!
//! Points are drawn at random rational coordinates (sixteenths inside the
//! configured range) by rejection sampling against the chart constraints.
//! Opaque function symbols are bound to generic smooth definitions unless
//! the caller supplies their own. Rank at each point is the number of
//! singular values above a relative threshold; the generic rank is the
//! maximum over all probe points, with non-constancy flagged.

use super::{Chart, Constraint, DifferentialForm, GeomError, VectorField};
use crate::symcore::nf::random_smooth_def;
use crate::symcore::{eval_numeric, Binding, Expr, FuncDef, Node};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Controls probing: sample count, RNG seed, rejection margin for domain
/// constraints, sampling range, and the relative singular-value threshold.
/// `bind` overrides the generic smooth definitions for named opaque symbols.
#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub samples: usize,
    pub seed: u64,
    pub svd_tol: f64,
    pub margin: f64,
    pub range: (f64, f64),
    pub attempts: usize,
    pub bind: BTreeMap<String, FuncDef>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            samples: 12,
            seed: 0,
            svd_tol: 1e-9,
            margin: 0.25,
            range: (-3.0, 3.0),
            attempts: 200,
            bind: BTreeMap::new(),
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(seed: u64) -> ProbeConfig {
        ProbeConfig {
            seed,
            ..ProbeConfig::default()
        }
    }

    pub fn bind_func(mut self, name: &str, def: FuncDef) -> ProbeConfig {
        self.bind.insert(name.to_string(), def);
        self
    }
}

/// Outcome of rank probing: the generic (maximum) rank, whether every probe
/// point agreed, the per-point ranks, and the points themselves.
#[derive(Clone, Debug)]
pub struct RankProbe {
    pub rank: usize,
    pub constant: bool,
    pub ranks: Vec<usize>,
    pub points: Vec<BTreeMap<String, f64>>,
}

impl RankProbe {
    /// A probe point where the rank falls below the generic value, if any.
    pub fn drop_witness(&self) -> Option<&BTreeMap<String, f64>> {
        self.ranks
            .iter()
            .position(|r| *r < self.rank)
            .map(|i| &self.points[i])
    }
}

pub(crate) fn describe_point(p: &BTreeMap<String, f64>) -> String {
    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    format!("({})", parts.join(", "))
}

fn collect_opaque(e: &Expr, out: &mut BTreeMap<String, usize>) {
    e.walk(&mut |n| {
        if let Node::Opaque { name, args, .. } = n {
            out.entry(name.clone()).or_insert(args.len());
        }
    });
}

/// Bindings at `samples` admissible points: chart coordinates (plus any free
/// variables of `exprs` beyond them) receive random rational values subject
/// to the chart constraints; opaque symbols receive smooth definitions.
pub(crate) fn probe_bindings(
    chart: &Chart,
    exprs: &[Expr],
    cfg: &ProbeConfig,
) -> Result<Vec<Binding>, GeomError> {
    let mut arities = BTreeMap::new();
    for e in exprs {
        collect_opaque(e, &mut arities);
    }
    for c in chart.constraints() {
        collect_opaque(c.expr(), &mut arities);
    }

    let mut vars: Vec<String> = chart.coords().to_vec();
    for e in exprs {
        for v in e.free_vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
    }

    let mut template = Binding::new();
    for (name, arity) in &arities {
        let def = cfg
            .bind
            .get(name)
            .cloned()
            .unwrap_or_else(|| random_smooth_def(name, *arity, cfg.seed));
        template.bind_def(name, def);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lo16 = (cfg.range.0 * 16.0).round() as i64;
    let hi16 = (cfg.range.1 * 16.0).round() as i64;
    let mut out = Vec::with_capacity(cfg.samples);
    'sample: for _ in 0..cfg.samples {
        'attempt: for _ in 0..cfg.attempts {
            let mut b = template.clone();
            for v in &vars {
                let k = rng.gen_range(lo16..=hi16);
                b.set_var(v, k as f64 / 16.0);
            }
            for c in chart.constraints() {
                let ok = match (c, eval_numeric(c.expr(), &b)) {
                    (Constraint::NonZero(_), Ok(v)) => v.abs() >= cfg.margin,
                    (Constraint::Positive(_), Ok(v)) => v >= cfg.margin,
                    (_, Err(_)) => false,
                };
                if !ok {
                    continue 'attempt;
                }
            }
            out.push(b);
            continue 'sample;
        }
        return Err(GeomError::NoProbePoint);
    }
    Ok(out)
}

pub(crate) fn point_of(b: &Binding, chart: &Chart) -> BTreeMap<String, f64> {
    chart
        .coords()
        .iter()
        .filter_map(|c| b.var(c).map(|v| (c.clone(), v)))
        .collect()
}

fn rank_at(rows: &[Vec<Expr>], b: &Binding, svd_tol: f64) -> Result<usize, GeomError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Ok(0);
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    let mut m = DMatrix::<f64>::zeros(nr, nc);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = eval_numeric(e, b).map_err(|e| GeomError::ProbeEval(e.to_string()))?;
        }
    }
    let svd = m.svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(svd
        .singular_values
        .iter()
        .filter(|s| **s > svd_tol * smax)
        .count())
}

/// Rank probing over explicit coefficient rows.
pub(crate) fn generic_rank_rows(
    chart: &Chart,
    rows: &[Vec<Expr>],
    cfg: &ProbeConfig,
) -> Result<RankProbe, GeomError> {
    let flat: Vec<Expr> = rows.iter().flatten().cloned().collect();
    let bindings = probe_bindings(chart, &flat, cfg)?;
    let mut ranks = Vec::with_capacity(bindings.len());
    let mut points = Vec::with_capacity(bindings.len());
    for b in &bindings {
        ranks.push(rank_at(rows, b, cfg.svd_tol)?);
        points.push(point_of(b, chart));
    }
    let rank = ranks.iter().copied().max().unwrap_or(0);
    let constant = ranks.iter().all(|r| *r == rank);
    Ok(RankProbe {
        rank,
        constant,
        ranks,
        points,
    })
}

/// The shared multi-index column basis of a form collection, in index order.
pub(crate) fn form_columns(forms: &[DifferentialForm]) -> Vec<Vec<u32>> {
    let mut cols: Vec<Vec<u32>> = Vec::new();
    for f in forms {
        for (idx, _) in f.terms() {
            if !cols.iter().any(|c| c == idx) {
                cols.push(idx.to_vec());
            }
        }
    }
    cols.sort();
    cols
}

fn common_chart<'a>(
    charts: impl Iterator<Item = &'a Chart>,
) -> Result<Option<Chart>, GeomError> {
    let mut found: Option<Chart> = None;
    for c in charts {
        match &found {
            None => found = Some(c.clone()),
            Some(f) => super::same_chart(f, c)?,
        }
    }
    Ok(found)
}

/// Generic rank of a collection of forms (as vectors over the shared
/// multi-index basis).
pub fn generic_rank_forms(
    forms: &[DifferentialForm],
    cfg: &ProbeConfig,
) -> Result<RankProbe, GeomError> {
    let Some(chart) = common_chart(forms.iter().map(|f| f.chart()))? else {
        return Ok(RankProbe {
            rank: 0,
            constant: true,
            ranks: vec![0; cfg.samples],
            points: Vec::new(),
        });
    };
    let cols = form_columns(forms);
    let rows: Vec<Vec<Expr>> = forms.iter().map(|f| f.row(&cols)).collect();
    generic_rank_rows(&chart, &rows, cfg)
}

/// Generic rank of a collection of vector fields.
pub fn generic_rank_fields(
    fields: &[VectorField],
    cfg: &ProbeConfig,
) -> Result<RankProbe, GeomError> {
    let Some(chart) = common_chart(fields.iter().map(|f| f.chart()))? else {
        return Ok(RankProbe {
            rank: 0,
            constant: true,
            ranks: vec![0; cfg.samples],
            points: Vec::new(),
        });
    };
    let rows: Vec<Vec<Expr>> = fields.iter().map(|f| f.components().to_vec()).collect();
    generic_rank_rows(&chart, &rows, cfg)
}

/// Whether `candidate` lies in the span of `span` at every probe point:
/// augmenting it must not raise the rank anywhere.
pub fn span_contains(
    span: &[DifferentialForm],
    candidate: &DifferentialForm,
    cfg: &ProbeConfig,
) -> Result<bool, GeomError> {
    if candidate.is_zero() {
        return Ok(true);
    }
    let chart = candidate.chart().clone();
    for f in span {
        super::same_chart(&chart, f.chart())?;
    }
    let mut all: Vec<DifferentialForm> = span.to_vec();
    all.push(candidate.clone());
    let cols = form_columns(&all);
    let base_rows: Vec<Vec<Expr>> = span.iter().map(|f| f.row(&cols)).collect();
    let full_rows: Vec<Vec<Expr>> = all.iter().map(|f| f.row(&cols)).collect();
    let flat: Vec<Expr> = full_rows.iter().flatten().cloned().collect();
    let bindings = probe_bindings(&chart, &flat, cfg)?;
    for b in &bindings {
        let r0 = rank_at(&base_rows, b, cfg.svd_tol)?;
        let r1 = rank_at(&full_rows, b, cfg.svd_tol)?;
        if r1 > r0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::parse_form;
    use crate::symcore::parse;

    #[test]
    fn dependent_forms_have_rank_one() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let a = parse_form(&m, "d(x)").unwrap();
        let b = parse_form(&m, "2*d(x)").unwrap();
        let p = generic_rank_forms(&[a, b], &ProbeConfig::default()).unwrap();
        assert_eq!(p.rank, 1);
        assert!(p.constant);
        let p = generic_rank_forms(&[], &ProbeConfig::default()).unwrap();
        assert_eq!(p.rank, 0);
    }

    #[test]
    fn rank_respects_constraints() {
        // x d(x) + y d(y) and d(x) drop rank where y = 0; excluding that
        // locus keeps the probe constant
        let m = Chart::new(&["x", "y"]).unwrap().nonzero(parse("y").unwrap());
        let a = parse_form(&m, "x*d(x) + y*d(y)").unwrap();
        let b = parse_form(&m, "d(x)").unwrap();
        let p = generic_rank_forms(&[a, b], &ProbeConfig::default()).unwrap();
        assert_eq!(p.rank, 2);
        assert!(p.constant);
    }

    #[test]
    fn nonconstant_rank_is_flagged() {
        // rows (d(x), x d(x)) have rank 1 generically but 1 vs 2 is not
        // possible; use x d(x) alone: rank 0 exactly at x = 0
        let m = Chart::new(&["x"]).unwrap();
        let a = parse_form(&m, "x*d(x)").unwrap();
        // sixteenths hit 0 occasionally over many samples; force it by
        // sampling a tight range around zero
        let cfg = ProbeConfig {
            samples: 400,
            range: (-0.1, 0.1),
            ..ProbeConfig::default()
        };
        let p = generic_rank_forms(&[a], &cfg).unwrap();
        assert_eq!(p.rank, 1);
        assert!(!p.constant);
        assert!(p.drop_witness().is_some());
    }

    #[test]
    fn first_order_jet_systems_have_expected_rank() {
        let m1 = Chart::new(&["y", "w", "w_y", "w_yy"]).unwrap();
        let m2 = Chart::new(&["x", "v", "v_x", "v_xx", "v_xxx"]).unwrap();
        let m = m1.product(&m2).unwrap();
        let k1a = parse_form(&m, "d(w) - w_y*d(y)").unwrap();
        let k1b = parse_form(&m, "d(w_y) - w_yy*d(y)").unwrap();
        let k2a = parse_form(&m, "d(v) - v_x*d(x)").unwrap();
        let k2b = parse_form(&m, "d(v_x) - v_xx*d(x)").unwrap();
        let k2c = parse_form(&m, "d(v_xx) - v_xxx*d(x)").unwrap();
        let p = generic_rank_forms(&[k1a, k1b, k2a, k2b, k2c], &ProbeConfig::default()).unwrap();
        assert_eq!(p.rank, 5);
        assert!(p.constant);
    }

    #[test]
    fn span_membership_detects_combinations() {
        let m = Chart::new(&["x", "y", "u"]).unwrap();
        let dx = parse_form(&m, "d(x)").unwrap();
        let dy = parse_form(&m, "d(y)").unwrap();
        let combo = parse_form(&m, "u*d(x) - d(y)").unwrap();
        let du = parse_form(&m, "d(u)").unwrap();
        let span = [dx, dy];
        assert!(span_contains(&span, &combo, &ProbeConfig::default()).unwrap());
        assert!(!span_contains(&span, &du, &ProbeConfig::default()).unwrap());
    }

    #[test]
    fn no_probe_point_is_reported() {
        // contradictory constraints: x > 0 and -x > 0
        let x = parse("x").unwrap();
        let m = Chart::new(&["x"])
            .unwrap()
            .positive(x.clone())
            .positive(Expr::neg(x));
        let a = parse_form(&m, "d(x)").unwrap();
        assert!(matches!(
            generic_rank_forms(&[a], &ProbeConfig::default()),
            Err(GeomError::NoProbePoint)
        ));
    }

    #[test]
    fn opaque_coefficients_are_bound_generically() {
        let m = Chart::new(&["x", "y"]).unwrap();
        let a = parse_form(&m, "f(x)*d(x) + d(y)").unwrap();
        let p = generic_rank_forms(&[a], &ProbeConfig::default()).unwrap();
        assert_eq!(p.rank, 1);
        assert!(p.constant);
    }
}
