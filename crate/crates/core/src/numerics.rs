//! Deterministic quadrature and root finding.
//!
//! One-dimensional integrals use a globally adaptive 7/15-point
//! Gauss–Kronrod scheme: the interval with the largest error estimate is
//! bisected until the summed estimate meets the tolerance or the subdivision
//! budget runs out. Integrands are never evaluated at the interval end
//! points, so integrable end-point singularities are handled by
//! concentrating subdivisions there.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("quadrature failure: estimate {estimate} with error bound {error_bound} after {subdivisions} subdivisions")]
    QuadratureFailure {
        estimate: f64,
        error_bound: f64,
        subdivisions: usize,
    },
    #[error("integrand not finite at x = {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error("root not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root finding did not converge within {iterations} iterations; last bracket [{lo}, {hi}]")]
    RootFailure { lo: f64, hi: f64, iterations: usize },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),
}

/// Accuracy targets shared by the quadrature and root-finding routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self, NumericsError> {
        let tol = ToleranceSpec {
            abs_tol,
            rel_tol,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(NumericsError::InvalidTolerance("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(NumericsError::InvalidTolerance("rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(NumericsError::InvalidTolerance("max_iter must be at least 1"));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Segment, NumericsError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(NumericsError::NonFiniteIntegrand { at: x })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 7];
    for (j, &node) in XGK[..7].iter().enumerate() {
        let dx = half * node;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        values[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }

    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (1.0f64).min((200.0 * error / asc).powf(1.5));
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Ok(Segment { a, b, value, error })
}

/// Adaptive integral of `f` over `[a, b]` returning value and error bound.
pub fn integrate_1d_with_error<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<Quadrature, NumericsError> {
    tol.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(NumericsError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
        });
    }

    let mut segments = vec![kronrod15(&f, a, b)?];
    let mut subdivisions = 0;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if error <= tol.target(value) {
            return Ok(Quadrature { value, error });
        }
        if subdivisions >= tol.max_iter {
            return Err(NumericsError::QuadratureFailure {
                estimate: value,
                error_bound: error,
                subdivisions,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, s)| {
                if s.error > best.1 {
                    (i, s.error)
                } else {
                    best
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval at floating-point resolution; cannot refine further.
            return Err(NumericsError::QuadratureFailure {
                estimate: value,
                error_bound: error,
                subdivisions,
            });
        }
        segments.push(kronrod15(&f, seg.a, mid)?);
        segments.push(kronrod15(&f, mid, seg.b)?);
        // Keep summation order independent of the swap_remove history.
        segments.sort_by(|l, r| l.a.total_cmp(&r.a));
        subdivisions += 1;
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError> {
    integrate_1d_with_error(f, a, b, tol).map(|q| q.value)
}

/// Nested adaptive integral of `f(u, v)` over the open unit square.
///
/// The inner integrals are computed to a tenth of the outer absolute
/// tolerance; the first inner failure aborts the whole computation.
pub fn integrate_2d_unit_square<F: Fn(f64, f64) -> f64>(
    f: F,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError> {
    tol.validate()?;
    let inner_tol = ToleranceSpec {
        abs_tol: tol.abs_tol * 0.1,
        rel_tol: tol.rel_tol * 0.1,
        max_iter: tol.max_iter,
    };
    let failure: Cell<Option<NumericsError>> = Cell::new(None);
    let outer = integrate_1d(
        |u| {
            if let Some(err) = failure.take() {
                failure.set(Some(err));
                return 0.0;
            }
            match integrate_1d(|v| f(u, v), 0.0, 1.0, &inner_tol) {
                Ok(value) => value,
                Err(err) => {
                    failure.set(Some(err));
                    0.0
                }
            }
        },
        0.0,
        1.0,
        tol,
    );
    if let Some(err) = failure.take() {
        return Err(err);
    }
    outer
}

/// Root of a continuous function on a sign-changing bracket.
///
/// Brent–Dekker iteration: inverse quadratic or secant steps when they stay
/// inside the bracket and shrink it fast enough, bisection otherwise.
/// Terminates when `|f(x)| <= abs_tol` or the bracket has collapsed to
/// floating-point resolution.
pub fn find_root<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: &ToleranceSpec,
) -> Result<f64, NumericsError> {
    tol.validate()?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(NumericsError::InvalidInterval { a: lo, b: hi });
    }
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(NumericsError::RootNotBracketed {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    if fa.abs() <= tol.abs_tol && fa.abs() <= fb.abs() {
        return Ok(a);
    }
    if fb.abs() <= tol.abs_tol {
        return Ok(b);
    }

    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let resolution = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.abs_tol || m.abs() <= resolution {
            return Ok(b);
        }
        if e.abs() >= resolution && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (resolution * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > resolution {
            d
        } else {
            resolution.copysign(m)
        };
        fb = f(b);
        if fb.is_nan() {
            return Err(NumericsError::RootFailure {
                lo: b.min(c),
                hi: b.max(c),
                iterations: tol.max_iter,
            });
        }
    }
    Err(NumericsError::RootFailure {
        lo: b.min(c),
        hi: b.max(c),
        iterations: tol.max_iter,
    })
}
