//! Adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

#![allow(clippy::excessive_precision)]

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

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 40;

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64, tol: f64, whole: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, lo, hi);
    if err <= tol || depth >= MAX_DEPTH || (hi - lo) <= 1e-15 * whole {
        return value;
    }
    let mid = 0.5 * (lo + hi);
    adapt(f, lo, mid, 0.5 * tol, whole, depth + 1) + adapt(f, mid, hi, 0.5 * tol, whole, depth + 1)
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Reversed bounds give the negated integral.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if lo == hi {
        return 0.0;
    }
    if hi < lo {
        return -integrate(f, hi, lo, tol);
    }
    let whole = (hi - lo).abs().max(f64::MIN_POSITIVE);
    adapt(&mut f, lo, hi, tol.max(1e-15), whole, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exact_on_polynomials() {
        // K15 integrates degree <= 22 exactly, G7 degree <= 13.
        for deg in 0..=13 {
            let mut f = |x: f64| x.powi(deg);
            let (v, err) = gk15(&mut f, -1.0, 1.0);
            let expect = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((v - expect).abs() < 1e-14, "deg {deg}");
            assert!(err < 1e-13, "deg {deg} err {err}");
        }
        let mut f = |x: f64| x.powi(22);
        let (v, _) = gk15(&mut f, -1.0, 1.0);
        assert!((v - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(|x| (-400.0 * x * x).exp(), -1.0, 1.0, 1e-12);
        let expect = (std::f64::consts::PI / 400.0).sqrt();
        assert!((v - expect).abs() < 1e-11);
        assert!((integrate(|x| x.exp(), 0.0, 1.0, 1e-12) - (1f64.exp() - 1.0)).abs() < 1e-13);
        assert_eq!(integrate(|x| x, 2.0, 2.0, 1e-9), 0.0);
        assert!((integrate(|x| x, 1.0, 0.0, 1e-12) + 0.5).abs() < 1e-15);
    }
}
