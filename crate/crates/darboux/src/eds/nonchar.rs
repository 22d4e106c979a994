//! Characteristic test for integral curves of a hyperbolic system.
//!
//! A curve direction is characteristic when it annihilates one of the two
//! singular systems. The test draws random parameter values, verifies the
//! integral-curve condition against the system at each one, and records the
//! parameters where the velocity annihilates every generator of a singular
//! system. All pairings are evaluated numerically: curves supplying Cauchy
//! data routinely run inside the singular loci of an adapted coframe, where
//! a symbolic pullback would divide by zero even though every pairing that
//! matters stays finite.

use super::pfaffian::PfaffianSystem;
use super::EdsError;
use crate::geometry::{same_chart, GeomError, ParamCurve, ProbeConfig};
use crate::symcore::nf::random_smooth_def;
use crate::symcore::{eval_numeric, Binding, Expr, Node};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const SAMPLES: usize = 25;
const TOL: f64 = 1e-8;

/// Sampled characteristic data for an integral curve: the worst residual of
/// the integral-curve condition and the parameter values (if any) where the
/// velocity annihilates a singular system.
#[derive(Clone, Debug)]
pub struct NoncharReport {
    pub samples: usize,
    pub integral_residual: f64,
    pub hat_characteristic_at: Vec<f64>,
    pub check_characteristic_at: Vec<f64>,
}

impl NoncharReport {
    pub fn noncharacteristic(&self) -> bool {
        self.hat_characteristic_at.is_empty() && self.check_characteristic_at.is_empty()
    }
}

fn coefficient_rows(sys: &PfaffianSystem) -> Vec<Vec<Expr>> {
    let chart = sys.chart();
    let n = chart.dim();
    sys.generators()
        .iter()
        .map(|g| {
            (0..n)
                .map(|j| g.coefficient(&[chart.coord(j)]).unwrap())
                .collect()
        })
        .collect()
}

fn collect_opaque(e: &Expr, out: &mut BTreeMap<String, usize>) {
    e.walk(&mut |n| {
        if let Node::Opaque { name, args, .. } = n {
            out.entry(name.clone()).or_insert(args.len());
        }
    });
}

/// True when every generator pairs to numerical zero with the velocity. A
/// pairing that cannot be evaluated counts as nonvanishing: a generator
/// singular at the point cannot be certified annihilated.
fn annihilates(rows: &[Vec<Expr>], b: &Binding, vel: &[f64]) -> bool {
    rows.iter().all(|row| {
        let mut acc = 0.0;
        for (c, v) in row.iter().zip(vel) {
            match eval_numeric(c, b) {
                Ok(x) => acc += x * v,
                Err(_) => return false,
            }
        }
        acc.abs() <= TOL
    })
}

/// Samples the curve parameter, checks that the curve is an integral curve
/// of `system`, and reports the samples where its velocity is hat- or
/// check-characteristic, i.e. annihilates `hv` or `cv`. A sample is skipped
/// only when the curve itself or a system generator cannot be evaluated
/// there.
pub fn is_noncharacteristic(
    curve: &ParamCurve,
    system: &PfaffianSystem,
    hv: &PfaffianSystem,
    cv: &PfaffianSystem,
    cfg: &ProbeConfig,
) -> Result<NoncharReport, EdsError> {
    same_chart(curve.chart(), system.chart())?;
    same_chart(curve.chart(), hv.chart())?;
    same_chart(curve.chart(), cv.chart())?;
    let chart = system.chart();
    let n = chart.dim();
    let velocity = curve.velocity();
    let sys_rows = coefficient_rows(system);
    let hv_rows = coefficient_rows(hv);
    let cv_rows = coefficient_rows(cv);

    let mut arities = BTreeMap::new();
    for e in curve.components().iter().chain(&velocity) {
        collect_opaque(e, &mut arities);
    }
    for rows in [&sys_rows, &hv_rows, &cv_rows] {
        for row in rows.iter() {
            for e in row {
                collect_opaque(e, &mut arities);
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

    let mut report = NoncharReport {
        samples: 0,
        integral_residual: 0.0,
        hat_characteristic_at: Vec::new(),
        check_characteristic_at: Vec::new(),
    };
    'sample: for _ in 0..SAMPLES {
        'attempt: for _ in 0..cfg.attempts {
            let t = rng.gen_range(lo16..=hi16) as f64 / 16.0;
            let mut b = template.clone();
            b.set_var(curve.param(), t);
            for (j, comp) in curve.components().iter().enumerate() {
                match eval_numeric(comp, &b) {
                    Ok(v) => b.set_var(chart.coord(j), v),
                    Err(_) => continue 'attempt,
                };
            }
            let mut vel = vec![0.0; n];
            for (j, ve) in velocity.iter().enumerate() {
                match eval_numeric(ve, &b) {
                    Ok(v) => vel[j] = v,
                    Err(_) => continue 'attempt,
                }
            }
            let mut residual = 0.0f64;
            for row in &sys_rows {
                let mut acc = 0.0;
                for (c, v) in row.iter().zip(&vel) {
                    match eval_numeric(c, &b) {
                        Ok(x) => acc += x * v,
                        Err(_) => continue 'attempt,
                    }
                }
                residual = residual.max(acc.abs());
            }
            if residual > TOL {
                return Err(EdsError::NotIntegralCurve { residual, param: t });
            }
            report.integral_residual = report.integral_residual.max(residual);
            if annihilates(&hv_rows, &b, &vel) {
                report.hat_characteristic_at.push(t);
            }
            if annihilates(&cv_rows, &b, &vel) {
                report.check_characteristic_at.push(t);
            }
            report.samples += 1;
            continue 'sample;
        }
        return Err(EdsError::Geom(GeomError::NoProbePoint));
    }
    Ok(report)
}
