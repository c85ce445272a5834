//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals and
//! on `[lower, ∞)` via an exponential change of variable.

use crate::{Error, Result};

/// Tolerances and subdivision budget for one integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::config(format!(
                "quadrature tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::config("quadrature needs at least one subdivision"));
        }
        Ok(())
    }

    /// Same budget, both tolerances divided by `factor`. Used for the inner
    /// integral of a nested pair.
    pub fn tightened(&self, factor: f64) -> Self {
        QuadratureSpec {
            abs_tol: self.abs_tol / factor,
            rel_tol: self.rel_tol / factor,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Exponential weight below which the mapped tail is dropped.
const TAIL_CUTOFF: f64 = 1e-16;

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    if !kronrod.is_finite() {
        return Err(Error::domain(format!(
            "integrand is not finite on [{a}, {b}]"
        )));
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * abs_sum;
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && roundoff > error {
        error = roundoff;
    }
    Ok(Panel { a, b, value, error })
}

/// `∫_a^b f(x) dx` by adaptive bisection of the worst panel.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::domain("finite-interval quadrature needs finite limits"));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![gk15(&f, a, b)?];
    loop {
        let (total, err) = panels
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= tol {
            return Ok(total);
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions: panels.len(),
                estimate: total,
                error: err,
            });
        }
        // ties resolve to the lowest index, keeping refinement deterministic
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.error > panels[best].error { i } else { best });
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if !(mid > a.min(b) && mid < a.max(b)) {
            // panel cannot be split further in floating point
            return Err(Error::Quadrature {
                subdivisions: panels.len(),
                estimate: total,
                error: err,
            });
        }
        panels[worst] = gk15(&f, a, mid)?;
        panels.push(gk15(&f, mid, b)?);
    }
}

/// `∫_lower^∞ f(x) dx` with unit decay length. See
/// [`integrate_semi_infinite_scaled`].
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    integrate_semi_infinite_scaled(f, lower, 1.0, spec)
}

/// `∫_lower^∞ f(x) dx` for integrands with an exponential tail of decay
/// length `scale`.
///
/// Substitutes `u = exp(-(x - lower)/scale)`, mapping the half line onto
/// `(0, 1]`; an integrand `~ e^{-x/scale}` becomes bounded in `u`. The
/// range `u < 1e-16` is dropped.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !lower.is_finite() {
        return Err(Error::domain(format!("lower limit must be finite, got {lower}")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::domain(format!("decay length must be positive, got {scale}")));
    }
    let mapped = |u: f64| {
        let x = lower - scale * u.ln();
        let fx = f(x);
        if fx == 0.0 {
            0.0
        } else {
            fx * scale / u
        }
    };
    integrate(mapped, TAIL_CUTOFF, 1.0, spec)
}
